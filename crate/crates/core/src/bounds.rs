//! Lower bounds certifying solution quality.
//!
//! * Clique bound on the number of used frequencies: binary search over `k`
//!   with a k-core filter (vertices of live degree `< k - 1` cannot be in a
//!   k-clique) followed by a time-capped exact search on what survives. Only
//!   cliques actually found are reported as the bound.
//! * Spanning-tree and Hamiltonian-path bounds on the index span. Components
//!   of the constraint graph are independent, so the span bound is the
//!   maximum over components. Non-adjacent pairs inside a component weigh 0.
//! * Triangle-inequality check: when it holds and the Hamiltonian bound is
//!   exact, that bound is the optimal span.

use std::time::{Duration, Instant};

use serde::Serialize;

use crate::graph::ConstraintGraph;
use crate::model::{Assignment, FrequencyPlan};

pub const DEFAULT_EXACT_LIMIT: usize = 16;
pub const DEFAULT_CLIQUE_TIMEOUT: Duration = Duration::from_secs(2);

#[derive(Debug, Clone, Copy)]
pub struct BoundsOptions {
    /// Largest component solved exactly by subset dynamic programming.
    pub exact_limit: usize,
    /// Budget for each exact k-clique confirmation.
    pub clique_timeout: Duration,
}

impl Default for BoundsOptions {
    fn default() -> Self {
        BoundsOptions {
            exact_limit: DEFAULT_EXACT_LIMIT,
            clique_timeout: DEFAULT_CLIQUE_TIMEOUT,
        }
    }
}

/// Dense symmetric weight table with 0 for non-adjacent pairs.
fn dense_weights(g: &ConstraintGraph) -> Vec<Vec<u32>> {
    let n = g.vertex_count();
    let mut w = vec![vec![0u32; n]; n];
    for (i, j, x) in g.edges() {
        w[i][j] = x;
        w[j][i] = x;
    }
    w
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CliqueStatus {
    /// The search finished for every probed `k`; `lower` is the clique number.
    Exact,
    /// Some confirmation timed out; `lower` is a found clique but larger ones
    /// passed the filter unconfirmed.
    FilterOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CliqueBound {
    /// Size of the largest clique found.
    pub lower: usize,
    /// Largest `k` whose filter leaves a nonempty residual graph.
    pub filter_bound: usize,
    pub status: CliqueStatus,
    /// Link ids of a clique of size `lower`.
    pub witness: Vec<u32>,
}

struct Bits {
    words: usize,
    rows: Vec<Vec<u64>>,
}

impl Bits {
    fn adjacency(g: &ConstraintGraph) -> Bits {
        let n = g.vertex_count();
        let words = n.div_ceil(64).max(1);
        let mut rows = vec![vec![0u64; words]; n];
        for (i, j, _) in g.edges() {
            rows[i][j / 64] |= 1 << (j % 64);
            rows[j][i / 64] |= 1 << (i % 64);
        }
        Bits { words, rows }
    }
}

fn first_one(set: &[u64]) -> Option<usize> {
    set.iter()
        .position(|&w| w != 0)
        .map(|i| i * 64 + set[i].trailing_zeros() as usize)
}

fn count(set: &[u64]) -> usize {
    set.iter().map(|w| w.count_ones() as usize).sum()
}

/// Vertices surviving repeated deletion of those with fewer than `k - 1`
/// live neighbours.
fn k_filter(g: &ConstraintGraph, k: usize) -> Vec<bool> {
    let n = g.vertex_count();
    let mut alive = vec![true; n];
    let mut deg: Vec<usize> = (0..n).map(|v| g.neighbors(v).len()).collect();
    let need = k.saturating_sub(1);
    let mut stack: Vec<usize> = (0..n).filter(|&v| deg[v] < need).collect();
    for &v in &stack {
        alive[v] = false;
    }
    while let Some(v) = stack.pop() {
        for &(u, _) in g.neighbors(v) {
            if alive[u] {
                deg[u] -= 1;
                if deg[u] < need {
                    alive[u] = false;
                    stack.push(u);
                }
            }
        }
    }
    alive
}

enum Search {
    Found(Vec<usize>),
    NotFound,
    Timeout,
}

struct CliqueSearch<'a> {
    bits: &'a Bits,
    target: usize,
    deadline: Instant,
    ticks: u64,
    timed_out: bool,
}

impl CliqueSearch<'_> {
    /// Greedy colouring bound on the largest clique inside `cand`.
    fn colour_bound(&self, cand: &[u64]) -> usize {
        let mut rest = cand.to_vec();
        let mut colours = 0;
        while count(&rest) > 0 {
            colours += 1;
            let mut avail = rest.clone();
            while let Some(v) = first_one(&avail) {
                rest[v / 64] &= !(1 << (v % 64));
                avail[v / 64] &= !(1 << (v % 64));
                for (a, r) in avail.iter_mut().zip(&self.bits.rows[v]) {
                    *a &= !r;
                }
            }
        }
        colours
    }

    fn expand(&mut self, clique: &mut Vec<usize>, cand: Vec<u64>) -> bool {
        if clique.len() >= self.target {
            return true;
        }
        self.ticks += 1;
        if self.ticks % 256 == 0 && Instant::now() >= self.deadline {
            self.timed_out = true;
        }
        if self.timed_out {
            return false;
        }
        if clique.len() + count(&cand) < self.target
            || clique.len() + self.colour_bound(&cand) < self.target
        {
            return false;
        }
        let mut cand = cand;
        while let Some(v) = first_one(&cand) {
            if clique.len() + count(&cand) < self.target {
                return false;
            }
            cand[v / 64] &= !(1 << (v % 64));
            let next: Vec<u64> = cand.iter().zip(&self.bits.rows[v]).map(|(a, b)| a & b).collect();
            clique.push(v);
            if self.expand(clique, next) {
                return true;
            }
            clique.pop();
            if self.timed_out {
                return false;
            }
        }
        false
    }
}

fn find_clique(bits: &Bits, alive: &[bool], k: usize, timeout: Duration) -> Search {
    let mut cand = vec![0u64; bits.words];
    for (v, &a) in alive.iter().enumerate() {
        if a {
            cand[v / 64] |= 1 << (v % 64);
        }
    }
    let mut s = CliqueSearch {
        bits,
        target: k,
        deadline: Instant::now() + timeout,
        ticks: 0,
        timed_out: false,
    };
    let mut clique = Vec::new();
    if s.expand(&mut clique, cand) {
        Search::Found(clique)
    } else if s.timed_out {
        Search::Timeout
    } else {
        Search::NotFound
    }
}

pub fn clique_lower_bound(g: &ConstraintGraph, timeout: Duration) -> CliqueBound {
    let n = g.vertex_count();
    if n == 0 {
        return CliqueBound {
            lower: 0,
            filter_bound: 0,
            status: CliqueStatus::Exact,
            witness: Vec::new(),
        };
    }
    // largest k whose filter leaves anything (degeneracy + 1)
    let max_deg = (0..n).map(|v| g.neighbors(v).len()).max().unwrap_or(0);
    let (mut lo_f, mut hi_f) = (1usize, max_deg + 1);
    while lo_f < hi_f {
        let mid = (lo_f + hi_f + 1) / 2;
        if k_filter(g, mid).iter().any(|&a| a) {
            lo_f = mid;
        } else {
            hi_f = mid - 1;
        }
    }
    let filter_bound = lo_f;

    let bits = Bits::adjacency(g);
    let mut witness = vec![0usize];
    if let Some((i, j, _)) = g.edges().next() {
        witness = vec![i, j];
    }
    let mut lo = witness.len();
    let mut hi = filter_bound;
    let mut status = CliqueStatus::Exact;
    while lo < hi {
        let mid = (lo + hi + 1) / 2;
        let alive = k_filter(g, mid);
        match find_clique(&bits, &alive, mid, timeout) {
            Search::Found(c) => {
                lo = c.len();
                witness = c;
            }
            Search::NotFound => hi = mid - 1,
            Search::Timeout => {
                status = CliqueStatus::FilterOnly;
                hi = mid - 1;
            }
        }
    }
    witness.sort_unstable();
    CliqueBound {
        lower: lo,
        filter_bound,
        status,
        witness: witness.into_iter().map(|v| g.link_id(v)).collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MstBound {
    /// Spanning-tree weight of each connected component.
    pub per_component: Vec<u64>,
    pub sum: u64,
    pub max: u64,
}

/// Prim's algorithm over the completion of one component.
fn prim(verts: &[usize], w: &[Vec<u32>]) -> u64 {
    let m = verts.len();
    if m <= 1 {
        return 0;
    }
    let mut in_tree = vec![false; m];
    let mut best = vec![u64::MAX; m];
    best[0] = 0;
    let mut total = 0;
    for _ in 0..m {
        let (v, &b) = best
            .iter()
            .enumerate()
            .filter(|(k, _)| !in_tree[*k])
            .min_by_key(|(_, &b)| b)
            .expect("a vertex remains");
        in_tree[v] = true;
        total += b;
        let row = &w[verts[v]];
        for u in 0..m {
            if !in_tree[u] {
                best[u] = best[u].min(row[verts[u]] as u64);
            }
        }
    }
    total
}

/// Minimum spanning tree per connected component, over the completion in
/// which non-adjacent pairs weigh 0.
pub fn mst_bound(g: &ConstraintGraph) -> MstBound {
    let w = dense_weights(g);
    let per_component: Vec<u64> = g.components().iter().map(|vs| prim(vs, &w)).collect();
    let sum = per_component.iter().sum();
    let max = per_component.iter().copied().max().unwrap_or(0);
    MstBound { per_component, sum, max }
}

/// Minimum Hamiltonian path weight over `verts` in the completion `w`,
/// by dynamic programming over subsets.
fn held_karp(verts: &[usize], w: &[Vec<u32>]) -> u64 {
    let m = verts.len();
    if m <= 1 {
        return 0;
    }
    let full = 1usize << m;
    let mut dp = vec![u64::MAX; full * m];
    for v in 0..m {
        dp[(1 << v) * m + v] = 0;
    }
    for mask in 1..full {
        for last in 0..m {
            let cur = dp[mask * m + last];
            if cur == u64::MAX || mask & (1 << last) == 0 {
                continue;
            }
            let wl = &w[verts[last]];
            for next in 0..m {
                if mask & (1 << next) != 0 {
                    continue;
                }
                let nm = mask | (1 << next);
                let cand = cur + wl[verts[next]] as u64;
                let slot = &mut dp[nm * m + next];
                if cand < *slot {
                    *slot = cand;
                }
            }
        }
    }
    (0..m).map(|v| dp[(full - 1) * m + v]).min().unwrap_or(0)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct HamiltonianBound {
    /// Per component: exact path weight, or the spanning-tree weight when the
    /// component exceeds the exact limit.
    pub per_component: Vec<u64>,
    pub value: u64,
    pub exact: bool,
}

pub fn hamiltonian_bound(g: &ConstraintGraph, exact_limit: usize) -> HamiltonianBound {
    let comps = g.components();
    let mst = mst_bound(g);
    let w = dense_weights(g);
    let mut exact = true;
    let per_component: Vec<u64> = comps
        .iter()
        .zip(&mst.per_component)
        .map(|(vs, &tree)| {
            if vs.len() <= exact_limit {
                held_karp(vs, &w)
            } else {
                exact = false;
                tree
            }
        })
        .collect();
    let value = per_component.iter().copied().max().unwrap_or(0);
    HamiltonianBound { per_component, value, exact }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct TriangleCheck {
    /// Every triple inside a component satisfies the triangle inequality,
    /// with missing edges weighing 0.
    pub completion: bool,
    /// Every triangle made of three actual edges satisfies it.
    pub edges_only: bool,
}

fn triangle_ok(a: u32, b: u32, c: u32) -> bool {
    let (a, b, c) = (a as u64, b as u64, c as u64);
    a <= b + c && b <= a + c && c <= a + b
}

pub fn triangle_check(g: &ConstraintGraph) -> TriangleCheck {
    let w = dense_weights(g);
    let mut completion = true;
    let mut edges_only = true;
    for vs in g.components() {
        for (x, &i) in vs.iter().enumerate() {
            for (y, &j) in vs.iter().enumerate().skip(x + 1) {
                for &k in vs.iter().skip(y + 1) {
                    let (a, b, c) = (w[i][j], w[i][k], w[j][k]);
                    if !triangle_ok(a, b, c) {
                        completion = false;
                        if a > 0 && b > 0 && c > 0 {
                            edges_only = false;
                        }
                    }
                }
            }
        }
        if !completion && !edges_only {
            break;
        }
    }
    TriangleCheck { completion, edges_only }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundsReport {
    pub n_links: usize,
    pub n_constraints: usize,
    pub components: usize,
    pub clique: CliqueBound,
    /// Span units, maximum over components.
    pub mst_lb: u64,
    /// Span units, summed over components.
    pub mst_sum: u64,
    pub mst_lb_mhz: f64,
    pub ham_lb: u64,
    pub ham_lb_mhz: f64,
    pub ham_exact: bool,
    pub triangle: TriangleCheck,
    /// Triangle inequality holds and the path bound is exact, so `ham_lb`
    /// is the minimum achievable span.
    pub range_optimality_certificate: bool,
}

impl BoundsReport {
    pub fn csv_header() -> &'static str {
        "n_links,n_constraints,components,clique_lb,clique_filter,clique_status,mst_lb,mst_lb_mhz,ham_lb,ham_lb_mhz,ham_exact,triangle_ok,triangle_ok_edges,certificate"
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{:.4},{},{:.4},{},{},{},{}",
            self.n_links,
            self.n_constraints,
            self.components,
            self.clique.lower,
            self.clique.filter_bound,
            match self.clique.status {
                CliqueStatus::Exact => "exact",
                CliqueStatus::FilterOnly => "filter-only",
            },
            self.mst_lb,
            self.mst_lb_mhz,
            self.ham_lb,
            self.ham_lb_mhz,
            self.ham_exact,
            self.triangle.completion,
            self.triangle.edges_only,
            self.range_optimality_certificate,
        )
    }

    /// Lists every bound an assignment contradicts; empty when consistent.
    pub fn violations(&self, a: &Assignment) -> Vec<String> {
        let mut out = Vec::new();
        let used = a.used_count();
        let span = a.span().unwrap_or(0) as u64;
        if used > 0 && self.clique.lower > used {
            out.push(format!("clique bound {} > used {}", self.clique.lower, used));
        }
        if self.mst_lb > self.ham_lb {
            out.push(format!("mst {} > hamiltonian {}", self.mst_lb, self.ham_lb));
        }
        if used > 0 && self.ham_lb > span {
            out.push(format!("hamiltonian {} > span {}", self.ham_lb, span));
        }
        out
    }
}

pub fn compute_bounds(g: &ConstraintGraph, plan: &FrequencyPlan, opts: &BoundsOptions) -> BoundsReport {
    let clique = clique_lower_bound(g, opts.clique_timeout);
    let mst = mst_bound(g);
    let ham = hamiltonian_bound(g, opts.exact_limit);
    let triangle = triangle_check(g);
    let to_mhz = |s: u64| s as f64 * plan.step + plan.bandwidth;
    BoundsReport {
        n_links: g.vertex_count(),
        n_constraints: g.edge_count(),
        components: mst.per_component.len(),
        clique,
        mst_lb: mst.max,
        mst_sum: mst.sum,
        mst_lb_mhz: to_mhz(mst.max),
        ham_lb: ham.value,
        ham_lb_mhz: to_mhz(ham.value),
        ham_exact: ham.exact,
        triangle,
        range_optimality_certificate: triangle.completion && ham.exact,
    }
}
