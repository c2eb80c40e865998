//! Greedy solvers: highest-degree-first assignment with rollback (HEDGE),
//! colour-then-map (COG), their hybrid, and the randomized multi-run
//! ("enhanced") driver with its scored solution pool.
//!
//! All three share one engine: the first `n_cog` picks are coloured and
//! mapped to frequencies COG-style, the remaining vertices are assigned
//! HEDGE-style. `n_cog = 0` is plain HEDGE and `n_cog = N` is plain COG.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::checker::check_feasibility;
use crate::error::{FapError, Result};
use crate::graph::{ConstraintGraph, DegreeMode, Tier};
use crate::model::{Assignment, FrequencyPlan, SolutionMetrics};
use crate::nfd::SeparationMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Hedge,
    Cog,
    Hybrid,
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Strategy::Hedge => "hedge",
            Strategy::Cog => "cog",
            Strategy::Hybrid => "hybrid",
        })
    }
}

impl FromStr for Strategy {
    type Err = FapError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hedge" => Ok(Strategy::Hedge),
            "cog" => Ok(Strategy::Cog),
            "hybrid" => Ok(Strategy::Hybrid),
            other => Err(FapError::InvalidParameters(format!("unknown strategy {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub strategy: Strategy,
    /// Links handled COG-style before switching to HEDGE (hybrid only).
    pub n_cog: usize,
    pub replications: usize,
    pub seed: u64,
    /// Weight of the used-frequency term in the score; `1 - bf` weighs range.
    pub balancing_factor: f64,
    /// MHz
    pub range_cap: Option<f64>,
    /// Rollback budget per run; `None` means twice the number of links.
    pub max_rollbacks: Option<usize>,
    pub degree_mode: DegreeMode,
    /// Alternate degree tiers in HEDGE steps and shuffle COG colour order.
    pub randomize: bool,
    /// Run replication 0 without randomization so the plain greedy answer
    /// is always in the pool.
    pub keep_raw: bool,
    /// Seconds; replications not started by then are skipped. Replication 0
    /// always runs.
    pub time_limit: Option<f64>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            strategy: Strategy::Hedge,
            n_cog: 0,
            replications: 1,
            seed: 0,
            balancing_factor: 0.5,
            range_cap: None,
            max_rollbacks: None,
            degree_mode: DegreeMode::Count,
            randomize: true,
            keep_raw: true,
            time_limit: None,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self, n_links: usize) -> Result<()> {
        if !(0.0..=1.0).contains(&self.balancing_factor) {
            return Err(FapError::InvalidParameters(format!(
                "balancing factor {} outside [0, 1]",
                self.balancing_factor
            )));
        }
        if self.replications == 0 {
            return Err(FapError::InvalidParameters("replications must be >= 1".into()));
        }
        if self.strategy == Strategy::Hybrid && self.n_cog > n_links {
            return Err(FapError::InvalidParameters(format!(
                "n_cog {} exceeds the {n_links} links",
                self.n_cog
            )));
        }
        if self.time_limit.is_some_and(|t| !(t > 0.0)) {
            return Err(FapError::InvalidParameters("time limit must be positive".into()));
        }
        if let Some(cap) = self.range_cap {
            if !(cap > 0.0) {
                return Err(FapError::InvalidParameters(format!("range cap {cap} must be positive")));
            }
        }
        Ok(())
    }

    fn cog_prefix(&self, n: usize) -> usize {
        match self.strategy {
            Strategy::Hedge => 0,
            Strategy::Cog => n,
            Strategy::Hybrid => self.n_cog.min(n),
        }
    }
}

/// Partial assignment with usage counts and the separation window.
struct Partial {
    n_f: u32,
    span_cap: Option<u32>,
    assignment: Assignment,
    usage: BTreeMap<u32, u32>,
}

impl Partial {
    fn new(sep: &SeparationMatrix, plan: &FrequencyPlan, range_cap: Option<f64>) -> Result<Self> {
        let span_cap = match range_cap {
            Some(cap) => Some(plan.span_cap(cap).ok_or_else(|| {
                FapError::InvalidParameters(format!(
                    "range cap {cap} MHz is narrower than one {} MHz band",
                    plan.bandwidth
                ))
            })?),
            None => None,
        };
        Ok(Partial {
            n_f: plan.count(),
            span_cap,
            assignment: Assignment::unassigned(sep.len()),
            usage: BTreeMap::new(),
        })
    }

    fn assign(&mut self, v: usize, k: u32) {
        debug_assert!(self.assignment.get(v).is_none());
        self.assignment.set(v, k);
        *self.usage.entry(k).or_insert(0) += 1;
    }

    fn unassign(&mut self, v: usize) {
        if let Some(k) = self.assignment.get(v) {
            self.assignment.clear(v);
            let c = self.usage.get_mut(&k).expect("used index is counted");
            *c -= 1;
            if *c == 0 {
                self.usage.remove(&k);
            }
        }
    }

    /// Index window allowed by the range cap given what is already used.
    fn window(&self) -> (i64, i64) {
        let (mut lo, mut hi) = (1i64, self.n_f as i64);
        if let (Some(cap), Some((&min, _)), Some((&max, _))) = (
            self.span_cap,
            self.usage.first_key_value(),
            self.usage.last_key_value(),
        ) {
            lo = lo.max(max as i64 - cap as i64);
            hi = hi.min(min as i64 + cap as i64);
        } else if let Some(cap) = self.span_cap {
            hi = hi.min(1 + cap as i64);
        }
        (lo, hi)
    }

    /// Merged closed intervals of indices ruled out for every vertex in
    /// `members` by the already-assigned vertices.
    fn forbidden(&self, graph: &ConstraintGraph, members: &[usize]) -> Vec<(i64, i64)> {
        let mut iv: Vec<(i64, i64)> = Vec::new();
        for &v in members {
            for &(u, w) in graph.neighbors(v) {
                if let Some(m) = self.assignment.get(u) {
                    let (m, w) = (m as i64, w as i64);
                    iv.push((m - w + 1, m + w - 1));
                }
            }
        }
        iv.sort_unstable();
        let mut merged: Vec<(i64, i64)> = Vec::with_capacity(iv.len());
        for (a, b) in iv {
            match merged.last_mut() {
                Some(last) if a <= last.1 + 1 => last.1 = last.1.max(b),
                _ => merged.push((a, b)),
            }
        }
        merged
    }

    fn first_free(merged: &[(i64, i64)], lo: i64, hi: i64) -> Option<u32> {
        let mut k = lo;
        for &(a, b) in merged {
            if b < k {
                continue;
            }
            if a > k {
                break;
            }
            k = b + 1;
        }
        (k <= hi).then_some(k as u32)
    }

    fn is_forbidden(merged: &[(i64, i64)], k: i64) -> bool {
        let p = merged.partition_point(|&(a, _)| a <= k);
        p > 0 && merged[p - 1].1 >= k
    }

    /// Used indices by descending usage then ascending index, followed by the
    /// lowest unused index that fits.
    fn pick_for(&self, graph: &ConstraintGraph, v: usize) -> Option<u32> {
        let merged = self.forbidden(graph, &[v]);
        let (lo, hi) = self.window();
        let mut used: Vec<(u32, u32)> = self.usage.iter().map(|(&k, &c)| (k, c)).collect();
        used.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
        for (k, _) in used {
            let ki = k as i64;
            if ki >= lo && ki <= hi && !Self::is_forbidden(&merged, ki) {
                return Some(k);
            }
        }
        // every used index is forbidden or outside the window at this point,
        // and the window contains all used indices, so the sweep skips them
        Self::first_free(&merged, lo, hi)
    }

    /// Smallest index compatible with every member of a colour class.
    fn lowest_for_class(&self, graph: &ConstraintGraph, members: &[usize]) -> Option<u32> {
        let merged = self.forbidden(graph, members);
        let (lo, hi) = self.window();
        Self::first_free(&merged, lo, hi)
    }

    fn assigned_neighbors(&self, graph: &ConstraintGraph, v: usize) -> Vec<usize> {
        graph
            .neighbors(v)
            .iter()
            .filter(|&&(u, _)| self.assignment.get(u).is_some())
            .map(|&(u, _)| u)
            .collect()
    }
}

fn infeasible(graph: &ConstraintGraph, v: usize, neighbors: &[usize]) -> FapError {
    FapError::Infeasible {
        link: graph.link_id(v),
        neighbors: neighbors.iter().map(|&u| graph.link_id(u)).collect(),
    }
}

/// Single greedy run. `rng` drives tier alternation and colour shuffling;
/// without it the run is the deterministic base algorithm.
fn greedy_run(
    sep: &SeparationMatrix,
    plan: &FrequencyPlan,
    config: &SolverConfig,
    mut rng: Option<&mut ChaCha8Rng>,
) -> Result<Assignment> {
    let n = sep.len();
    config.validate(n)?;
    let mut graph = ConstraintGraph::from_separation(sep).with_degree_mode(config.degree_mode);
    let mut state = Partial::new(sep, plan, config.range_cap)?;

    // COG colouring of the first picks
    let n_cog = config.cog_prefix(n);
    let mut colour_of: Vec<Option<usize>> = vec![None; n];
    let mut classes: Vec<Vec<usize>> = Vec::new();
    for _ in 0..n_cog {
        let v = graph.highest_degree_vertex(Tier::Highest, None)?;
        let mut blocked = vec![false; classes.len()];
        for &(u, _) in graph.neighbors(v) {
            if let Some(c) = colour_of[u] {
                blocked[c] = true;
            }
        }
        let choice = (0..classes.len())
            .filter(|&c| !blocked[c])
            .max_by(|&a, &b| classes[a].len().cmp(&classes[b].len()).then(b.cmp(&a)));
        let c = choice.unwrap_or_else(|| {
            classes.push(Vec::new());
            classes.len() - 1
        });
        classes[c].push(v);
        colour_of[v] = Some(c);
        graph.remove_vertex(v)?;
    }

    // colour classes to frequencies
    let mut order: Vec<usize> = (0..classes.len()).collect();
    order.sort_by(|&a, &b| classes[b].len().cmp(&classes[a].len()).then(a.cmp(&b)));
    if config.randomize {
        if let Some(r) = rng.as_deref_mut() {
            order.shuffle(r);
        }
    }
    for c in order {
        let members = &classes[c];
        let Some(k) = state.lowest_for_class(&graph, members) else {
            let v = members[0];
            return Err(infeasible(&graph, v, &state.assigned_neighbors(&graph, v)));
        };
        for &v in members {
            state.assign(v, k);
        }
    }

    // HEDGE for the rest
    let mut rollbacks_left = config.max_rollbacks.unwrap_or(2 * n);
    let mut step = 1usize;
    while graph.live_count() > 0 {
        let tier = if config.randomize && step % 2 == 0 { Tier::Second } else { Tier::Highest };
        let pick_rng = match rng.as_deref_mut() {
            Some(r) if config.randomize => Some(r as &mut dyn RngCore),
            _ => None,
        };
        let v = graph.highest_degree_vertex(tier, pick_rng)?;
        step += 1;
        if let Some(k) = state.pick_for(&graph, v) {
            state.assign(v, k);
            graph.remove_vertex(v)?;
            continue;
        }
        let blockers = state.assigned_neighbors(&graph, v);
        if rollbacks_left == 0 || blockers.is_empty() {
            return Err(infeasible(&graph, v, &blockers));
        }
        rollbacks_left -= 1;
        for &u in &blockers {
            state.unassign(u);
            graph.reinsert_vertex(u)?;
        }
        match state.pick_for(&graph, v) {
            Some(k) => {
                state.assign(v, k);
                graph.remove_vertex(v)?;
            }
            None => return Err(infeasible(&graph, v, &blockers)),
        }
    }
    Ok(state.assignment)
}

/// Frequency choice for one link given a partial assignment (indices of 0
/// are unassigned): most-used compatible index first, else the lowest free
/// one. `None` when nothing fits.
pub fn assign_freq_to(
    vertex: usize,
    partial: &Assignment,
    sep: &SeparationMatrix,
    plan: &FrequencyPlan,
    range_cap: Option<f64>,
) -> Result<Option<u32>> {
    let graph = ConstraintGraph::from_separation(sep);
    let mut state = Partial::new(sep, plan, range_cap)?;
    for (v, &k) in partial.indices().iter().enumerate() {
        if k != 0 && v != vertex {
            state.assign(v, k);
        }
    }
    Ok(state.pick_for(&graph, vertex))
}

fn with_strategy(config: &SolverConfig, strategy: Strategy) -> SolverConfig {
    SolverConfig { strategy, ..config.clone() }
}

fn rng_for(config: &SolverConfig, seed: u64) -> Option<ChaCha8Rng> {
    config.randomize.then(|| ChaCha8Rng::seed_from_u64(seed))
}

fn run_with_seed(
    sep: &SeparationMatrix,
    plan: &FrequencyPlan,
    config: &SolverConfig,
    seed: u64,
) -> Result<Assignment> {
    match rng_for(config, seed) {
        Some(mut r) => greedy_run(sep, plan, config, Some(&mut r)),
        None => greedy_run(sep, plan, config, None),
    }
}

/// Highest-degree-first greedy assignment with rollback.
pub fn hedge(sep: &SeparationMatrix, plan: &FrequencyPlan, config: &SolverConfig, seed: u64) -> Result<Assignment> {
    run_with_seed(sep, plan, &with_strategy(config, Strategy::Hedge), seed)
}

/// Colour every link, then map colour classes to frequencies.
pub fn cog(sep: &SeparationMatrix, plan: &FrequencyPlan, config: &SolverConfig, seed: u64) -> Result<Assignment> {
    run_with_seed(sep, plan, &with_strategy(config, Strategy::Cog), seed)
}

/// COG for the first `config.n_cog` links, HEDGE for the rest.
pub fn hybrid(sep: &SeparationMatrix, plan: &FrequencyPlan, config: &SolverConfig, seed: u64) -> Result<Assignment> {
    run_with_seed(sep, plan, &with_strategy(config, Strategy::Hybrid), seed)
}

/// Derives an independent stream seed from a master seed (splitmix64 of
/// the master mixed with the stream id). All sub-seeds in the crate come
/// from here or from [`replication_seed`].
pub fn split_seed(master: u64, stream: u64) -> u64 {
    let mut z = master ^ stream.wrapping_mul(0x9e37_79b9_7f4a_7c15).wrapping_add(0x6a09_e667_f3bc_c909);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of replication `r` under master seed `master`.
pub fn replication_seed(master: u64, r: usize) -> u64 {
    master ^ r as u64
}

/// One replication of the enhanced driver, as [`enhanced_solve`] runs it.
pub fn run_replication(
    sep: &SeparationMatrix,
    plan: &FrequencyPlan,
    config: &SolverConfig,
    r: usize,
) -> Result<Assignment> {
    let seed = replication_seed(config.seed, r);
    if config.keep_raw && r == 0 {
        let raw = SolverConfig { randomize: false, ..config.clone() };
        return greedy_run(sep, plan, &raw, None);
    }
    run_with_seed(sep, plan, config, seed)
}

/// `psi` of entry `i` given `(used_count, range)` for every pool member.
/// A term whose pool maximum equals its minimum contributes 0.
pub fn score(metrics: &[(usize, f64)], i: usize, bf: f64) -> f64 {
    let norm = |x: f64, lo: f64, hi: f64| if hi > lo { (x - lo) / (hi - lo) } else { 0.0 };
    let (used_lo, used_hi) = metrics
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &(u, _)| (lo.min(u as f64), hi.max(u as f64)));
    let (r_lo, r_hi) = metrics
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &(_, r)| (lo.min(r), hi.max(r)));
    let (u, r) = metrics[i];
    bf * norm(u as f64, used_lo, used_hi) + (1.0 - bf) * norm(r, r_lo, r_hi)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PoolEntry {
    #[serde(skip)]
    pub assignment: Assignment,
    pub metrics: SolutionMetrics,
    pub seed: u64,
    pub strategy: String,
    pub psi: f64,
    pub pareto: bool,
}

/// Feasible, de-duplicated solutions with their scores.
#[derive(Debug, Clone, Default)]
pub struct SolutionPool {
    entries: Vec<PoolEntry>,
    seen: HashSet<Assignment>,
    balancing_factor: f64,
}

impl SolutionPool {
    pub fn new(balancing_factor: f64) -> Self {
        SolutionPool { entries: Vec::new(), seen: HashSet::new(), balancing_factor }
    }

    /// Adds a solution after verifying it; returns whether it was new and
    /// feasible.
    pub fn insert(
        &mut self,
        assignment: Assignment,
        sep: &SeparationMatrix,
        plan: &FrequencyPlan,
        range_cap: Option<f64>,
        seed: u64,
        strategy: impl Into<String>,
    ) -> bool {
        let metrics = check_feasibility(&assignment, sep, plan, range_cap);
        if !metrics.feasible || self.seen.contains(&assignment) {
            return false;
        }
        self.seen.insert(assignment.clone());
        self.entries.push(PoolEntry {
            assignment,
            metrics,
            seed,
            strategy: strategy.into(),
            psi: 0.0,
            pareto: false,
        });
        self.rescore();
        true
    }

    pub fn set_balancing_factor(&mut self, bf: f64) {
        self.balancing_factor = bf;
        self.rescore();
    }

    pub fn balancing_factor(&self) -> f64 {
        self.balancing_factor
    }

    fn rescore(&mut self) {
        let m: Vec<(usize, f64)> = self.entries.iter().map(|e| (e.metrics.used_count, e.metrics.range)).collect();
        for (i, e) in self.entries.iter_mut().enumerate() {
            e.psi = score(&m, i, self.balancing_factor);
            e.pareto = !m.iter().any(|&(u, r)| {
                u <= e.metrics.used_count
                    && r <= e.metrics.range
                    && (u < e.metrics.used_count || r < e.metrics.range)
            });
        }
    }

    pub fn entries(&self) -> &[PoolEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, a: &Assignment) -> bool {
        self.seen.contains(a)
    }

    /// Smallest score; ties go to fewer frequencies, then smaller range, then
    /// insertion order.
    pub fn best(&self) -> Option<&PoolEntry> {
        self.entries.iter().min_by(|a, b| {
            a.psi
                .total_cmp(&b.psi)
                .then(a.metrics.used_count.cmp(&b.metrics.used_count))
                .then(a.metrics.range.total_cmp(&b.metrics.range))
        })
    }

    /// Score an outside solution would get if it joined the pool.
    pub fn score_of(&self, used_count: usize, range: f64) -> f64 {
        let mut m: Vec<(usize, f64)> = self.entries.iter().map(|e| (e.metrics.used_count, e.metrics.range)).collect();
        m.push((used_count, range));
        score(&m, m.len() - 1, self.balancing_factor)
    }

    pub fn pareto_front(&self) -> impl Iterator<Item = &PoolEntry> {
        self.entries.iter().filter(|e| e.pareto)
    }

    /// CSV with columns `seed,strategy,used_count,range_mhz,psi,pareto_flag`.
    pub fn to_csv(&self, meta: &str) -> String {
        let mut s = String::new();
        s.push_str(meta);
        s.push('\n');
        s.push_str("seed,strategy,used_count,range_mhz,psi,pareto_flag\n");
        for e in &self.entries {
            s.push_str(&format!(
                "{},{},{},{:.4},{:.6},{}\n",
                e.seed,
                e.strategy,
                e.metrics.used_count,
                e.metrics.range,
                e.psi,
                u8::from(e.pareto)
            ));
        }
        s
    }
}

/// Runs `config.replications` seeded replications in parallel and pools
/// the feasible results in replication order.
pub fn enhanced_solve(sep: &SeparationMatrix, plan: &FrequencyPlan, config: &SolverConfig) -> Result<SolutionPool> {
    config.validate(sep.len())?;
    let deadline = config.time_limit.map(|t| Instant::now() + Duration::from_secs_f64(t.max(0.0)));
    let runs: Vec<Option<Result<Assignment>>> = (0..config.replications)
        .into_par_iter()
        .map(|r| {
            let late = r > 0 && deadline.is_some_and(|d| Instant::now() >= d);
            (!late).then(|| run_replication(sep, plan, config, r))
        })
        .collect();
    let mut pool = SolutionPool::new(config.balancing_factor);
    let label = config.strategy.to_string();
    for (r, run) in runs.into_iter().enumerate() {
        let Some(run) = run else { continue };
        match run {
            Ok(a) => {
                pool.insert(a, sep, plan, config.range_cap, replication_seed(config.seed, r), label.clone());
            }
            Err(FapError::Infeasible { .. }) => {}
            Err(e) => return Err(e),
        }
    }
    if pool.is_empty() {
        return Err(FapError::AllReplicationsInfeasible(config.replications));
    }
    Ok(pool)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sep(n: usize, pairs: &[(usize, usize, u32)]) -> SeparationMatrix {
        let mut m = SeparationMatrix::empty((0..n as u32).collect(), 1.0);
        for &(i, j, w) in pairs {
            m.set(i, j, w as f64, w);
        }
        m
    }

    fn plan(n_f: u32) -> FrequencyPlan {
        FrequencyPlan::new(0.0, n_f as f64, 1.0, 1.0).unwrap()
    }

    fn raw() -> SolverConfig {
        SolverConfig { randomize: false, ..SolverConfig::default() }
    }

    #[test]
    fn assign_freq_examples() {
        let s = sep(3, &[(0, 1, 4), (0, 2, 4)]);
        let p = plan(9);
        assert_eq!(assign_freq_to(0, &Assignment::unassigned(3), &s, &p, None).unwrap(), Some(1));
        assert_eq!(assign_freq_to(1, &Assignment::new(vec![1, 0, 0]), &s, &p, None).unwrap(), Some(5));
        let got = assign_freq_to(0, &Assignment::new(vec![0, 1, 9]), &s, &p, None).unwrap();
        // brute force over the nine indices
        let scan = (1..=9u32).find(|&k| (k as i64 - 1).abs() >= 4 && (k as i64 - 9).abs() >= 4);
        assert_eq!(got, scan);
        assert_eq!(got, Some(5));
        assert_eq!(assign_freq_to(0, &Assignment::new(vec![0, 2, 7]), &s, &p, None).unwrap(), None);
    }

    #[test]
    fn assign_prefers_most_used_then_lowest() {
        // vertex 3 is unconstrained: it should reuse the most popular index
        let s = sep(4, &[(0, 1, 2)]);
        let p = plan(20);
        let a = Assignment::new(vec![5, 1, 5, 0]);
        assert_eq!(assign_freq_to(3, &a, &s, &p, None).unwrap(), Some(5));
        // equal usage: lower index wins
        let a = Assignment::new(vec![7, 3, 0, 0]);
        assert_eq!(assign_freq_to(3, &a, &s, &p, None).unwrap(), Some(3));
    }

    #[test]
    fn range_cap_limits_new_indices() {
        let s = sep(2, &[(0, 1, 4)]);
        let p = plan(20);
        let a = Assignment::new(vec![1, 0]);
        // span 4 needs 4 * 1 + 1 = 5 MHz
        assert_eq!(assign_freq_to(1, &a, &s, &p, Some(5.0)).unwrap(), Some(5));
        assert_eq!(assign_freq_to(1, &a, &s, &p, Some(4.9)).unwrap(), None);
    }

    #[test]
    fn hedge_examples() {
        let s = sep(3, &[(0, 1, 2), (0, 2, 2), (1, 2, 2)]);
        let a = hedge(&s, &plan(20), &raw(), 0).unwrap();
        assert_eq!(a.used_set(), vec![1, 3, 5]);
        assert_eq!(a.span(), Some(4));

        let a = hedge(&sep(6, &[]), &plan(5), &raw(), 0).unwrap();
        assert_eq!(a.indices(), &[1; 6]);

        let n_f = 7;
        let err = hedge(&sep(2, &[(0, 1, n_f)]), &plan(n_f), &raw(), 0).unwrap_err();
        assert!(matches!(err, FapError::Infeasible { .. }), "{err}");
    }

    #[test]
    fn hedge_span_four_is_optimal_on_triangle() {
        // exhaustive: three pairwise-2 links need span >= 4
        let mut best = u32::MAX;
        for a in 1..=8u32 {
            for b in 1..=8u32 {
                for c in 1..=8u32 {
                    let ok = a.abs_diff(b) >= 2 && a.abs_diff(c) >= 2 && b.abs_diff(c) >= 2;
                    if ok {
                        best = best.min(a.max(b).max(c) - a.min(b).min(c));
                    }
                }
            }
        }
        assert_eq!(best, 4);
    }

    #[test]
    fn rollback_recovers_from_bad_order() {
        // path 0-1-2 with separations that force the middle link to an end:
        // hub 1 goes first (index 1) and the rest fits around it
        let s = sep(4, &[(0, 1, 3), (1, 2, 3), (2, 3, 3), (0, 3, 1)]);
        let a = hedge(&s, &plan(7), &raw(), 0).unwrap();
        let m = check_feasibility(&a, &s, &plan(7), None);
        assert!(m.feasible, "{:?}", a);
    }

    #[test]
    fn cog_examples() {
        let a = cog(&sep(2, &[]), &plan(5), &raw(), 0).unwrap();
        assert_eq!(a.indices(), &[1, 1]);
        let s = sep(3, &[(0, 1, 3), (0, 2, 3), (1, 2, 3)]);
        let a = cog(&s, &plan(20), &raw(), 0).unwrap();
        assert_eq!(a.used_set(), vec![1, 4, 7]);
        let a = cog(&sep(5, &[]), &plan(5), &raw(), 0).unwrap();
        assert_eq!(a.used_count(), 1);
    }

    #[test]
    fn hybrid_degenerates_to_both_ends() {
        let s = sep(6, &[(0, 1, 3), (1, 2, 2), (2, 3, 5), (3, 4, 1), (4, 5, 2), (0, 5, 4), (1, 4, 3)]);
        let p = plan(40);
        for seed in 0..5 {
            let cfg = SolverConfig { n_cog: 0, randomize: true, ..SolverConfig::default() };
            assert_eq!(hybrid(&s, &p, &cfg, seed).unwrap(), hedge(&s, &p, &cfg, seed).unwrap());
            let cfg = SolverConfig { n_cog: 6, ..cfg };
            assert_eq!(hybrid(&s, &p, &cfg, seed).unwrap(), cog(&s, &p, &cfg, seed).unwrap());
        }
    }

    #[test]
    fn score_examples() {
        let m = [(65, 422.3), (68, 408.0), (74, 387.3)];
        let got: Vec<f64> = (0..3).map(|i| score(&m, i, 1.0)).collect();
        assert!((got[0] - 0.0).abs() < 1e-12);
        assert!((got[1] - 1.0 / 3.0).abs() < 1e-12);
        assert!((got[2] - 1.0).abs() < 1e-12);
        assert_eq!(score(&[(10, 99.0)], 0, 0.3), 0.0);
        // bf = 0: range only
        let r: Vec<f64> = (0..3).map(|i| score(&m, i, 0.0)).collect();
        assert!(r[2] < r[1] && r[1] < r[0]);
    }

    #[test]
    fn enhanced_without_randomization_is_the_raw_solution() {
        let s = sep(5, &[(0, 1, 3), (1, 2, 2), (2, 3, 5), (3, 4, 1)]);
        let p = plan(40);
        let cfg = SolverConfig { replications: 7, randomize: false, ..SolverConfig::default() };
        let pool = enhanced_solve(&s, &p, &cfg).unwrap();
        assert_eq!(pool.len(), 1);
        assert_eq!(pool.entries()[0].assignment, hedge(&s, &p, &raw(), 0).unwrap());
    }

    #[test]
    fn enhanced_is_deterministic() {
        let s = sep(8, &[(0, 1, 3), (1, 2, 2), (2, 3, 5), (3, 4, 1), (4, 5, 2), (5, 6, 3), (6, 7, 2), (0, 7, 2), (1, 6, 4)]);
        let p = plan(60);
        let cfg = SolverConfig { replications: 40, seed: 99, strategy: Strategy::Hybrid, n_cog: 3, ..SolverConfig::default() };
        let a = enhanced_solve(&s, &p, &cfg).unwrap();
        let b = enhanced_solve(&s, &p, &cfg).unwrap();
        assert_eq!(a.entries(), b.entries());
        let raw_a = hybrid(&s, &p, &SolverConfig { randomize: false, ..cfg.clone() }, 0).unwrap();
        assert!(a.contains(&raw_a));
    }

    #[test]
    fn all_infeasible_is_reported() {
        let s = sep(2, &[(0, 1, 9)]);
        let cfg = SolverConfig { replications: 3, ..SolverConfig::default() };
        assert!(matches!(enhanced_solve(&s, &plan(5), &cfg), Err(FapError::AllReplicationsInfeasible(3))));
    }

    #[test]
    fn config_validation() {
        let bad_bf = SolverConfig { balancing_factor: 1.5, ..SolverConfig::default() };
        assert!(bad_bf.validate(3).is_err());
        let bad_cog = SolverConfig { strategy: Strategy::Hybrid, n_cog: 4, ..SolverConfig::default() };
        assert!(bad_cog.validate(3).is_err());
        assert!(SolverConfig { replications: 0, ..SolverConfig::default() }.validate(3).is_err());
    }

    #[test]
    fn pool_dedups_and_flags_pareto() {
        let s = sep(2, &[(0, 1, 2)]);
        let p = plan(10);
        let mut pool = SolutionPool::new(0.5);
        assert!(pool.insert(Assignment::new(vec![1, 3]), &s, &p, None, 0, "x"));
        assert!(!pool.insert(Assignment::new(vec![1, 3]), &s, &p, None, 1, "x"));
        assert!(!pool.insert(Assignment::new(vec![1, 2]), &s, &p, None, 2, "x"));
        assert!(pool.insert(Assignment::new(vec![1, 5]), &s, &p, None, 3, "x"));
        assert_eq!(pool.len(), 2);
        assert!(pool.entries()[0].pareto);
        assert!(!pool.entries()[1].pareto);
        assert_eq!(pool.best().unwrap().seed, 0);
        let csv = pool.to_csv("# meta");
        assert_eq!(csv.lines().nth(1).unwrap(), "seed,strategy,used_count,range_mhz,psi,pareto_flag");
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn best_is_invariant_under_affine_rescaling(
                m in proptest::collection::vec((1usize..50, 10.0f64..500.0), 1..12),
                bf in 0.0f64..=1.0,
                a in 0.5f64..4.0,
                b in -10.0f64..10.0,
            ) {
                let argmin = |m: &[(usize, f64)]| {
                    (0..m.len()).map(|i| score(m, i, bf)).collect::<Vec<_>>()
                };
                let base = argmin(&m);
                let scaled: Vec<(usize, f64)> = m.iter().map(|&(u, r)| (u, a * r + b)).collect();
                let moved = argmin(&scaled);
                for (x, y) in base.iter().zip(&moved) {
                    prop_assert!((x - y).abs() < 1e-9);
                }
            }
        }
    }
}
