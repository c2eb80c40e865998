//! Undirected constraint graph over links, with live-degree bookkeeping
//! under vertex removal and re-insertion.

use rand::{Rng, RngCore};

use crate::error::{FapError, Result};
use crate::nfd::SeparationMatrix;

/// How vertex degree is measured when ordering vertices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DegreeMode {
    /// Number of live incident edges.
    #[default]
    Count,
    /// Sum of live incident edge weights.
    Weighted,
}

/// Which degree tier to draw from: the highest degree value or the second
/// distinct one.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Tier {
    Highest,
    Second,
}

#[derive(Debug, Clone)]
pub struct ConstraintGraph {
    link_ids: Vec<u32>,
    adj: Vec<Vec<(usize, u32)>>,
    live: Vec<bool>,
    degree: Vec<usize>,
    weighted_degree: Vec<u64>,
    live_count: usize,
    live_edges: usize,
    mode: DegreeMode,
}

impl ConstraintGraph {
    /// One edge per pair with separation `>= 1`.
    pub fn from_separation(sep: &SeparationMatrix) -> Self {
        let n = sep.len();
        let mut adj = vec![Vec::new(); n];
        let mut edges = 0;
        for (i, j, w) in sep.constraints() {
            adj[i].push((j, w));
            adj[j].push((i, w));
            edges += 1;
        }
        let degree: Vec<usize> = adj.iter().map(Vec::len).collect();
        let weighted_degree = adj
            .iter()
            .map(|a| a.iter().map(|&(_, w)| w as u64).sum())
            .collect();
        ConstraintGraph {
            link_ids: sep.link_ids().to_vec(),
            adj,
            live: vec![true; n],
            degree,
            weighted_degree,
            live_count: n,
            live_edges: edges,
            mode: DegreeMode::Count,
        }
    }

    pub fn with_degree_mode(mut self, mode: DegreeMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn vertex_count(&self) -> usize {
        self.adj.len()
    }

    pub fn live_count(&self) -> usize {
        self.live_count
    }

    pub fn live_edge_count(&self) -> usize {
        self.live_edges
    }

    /// Total edges of the original graph, ignoring removals.
    pub fn edge_count(&self) -> usize {
        self.adj.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn is_live(&self, v: usize) -> bool {
        self.live.get(v).copied().unwrap_or(false)
    }

    pub fn degree(&self, v: usize) -> usize {
        self.degree[v]
    }

    pub fn link_id(&self, v: usize) -> u32 {
        self.link_ids[v]
    }

    pub fn link_ids(&self) -> &[u32] {
        &self.link_ids
    }

    /// All neighbours in the original graph with edge weights, live or not.
    pub fn neighbors(&self, v: usize) -> &[(usize, u32)] {
        &self.adj[v]
    }

    pub fn live_vertices(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.adj.len()).filter(|&v| self.live[v])
    }

    /// `(i, j, w)` for `i < j` over the original edge set.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, u32)> + '_ {
        self.adj
            .iter()
            .enumerate()
            .flat_map(|(i, a)| a.iter().filter(move |&&(j, _)| i < j).map(move |&(j, w)| (i, j, w)))
    }

    fn key(&self, v: usize) -> u64 {
        match self.mode {
            DegreeMode::Count => self.degree[v] as u64,
            DegreeMode::Weighted => self.weighted_degree[v],
        }
    }

    /// Picks a live vertex from the requested degree tier. With an rng the
    /// pick is uniform within the tier; without one the lowest link id wins.
    /// `Tier::Second` falls back to the highest tier when every live vertex
    /// has the same degree.
    pub fn highest_degree_vertex(&self, tier: Tier, rng: Option<&mut dyn RngCore>) -> Result<usize> {
        let mut top: Option<u64> = None;
        let mut second: Option<u64> = None;
        for v in self.live_vertices() {
            let k = self.key(v);
            match top {
                None => top = Some(k),
                Some(t) if k > t => {
                    second = top;
                    top = Some(k);
                }
                Some(t) if k < t && second.map_or(true, |s| k > s) => second = Some(k),
                _ => {}
            }
        }
        let top = top.ok_or(FapError::EmptyGraph)?;
        let target = match tier {
            Tier::Highest => top,
            Tier::Second => second.unwrap_or(top),
        };
        match rng {
            Some(rng) => {
                let count = self.live_vertices().filter(|&v| self.key(v) == target).count();
                let pick = rng.gen_range(0..count);
                Ok(self
                    .live_vertices()
                    .filter(|&v| self.key(v) == target)
                    .nth(pick)
                    .expect("pick is within the tier"))
            }
            None => Ok(self
                .live_vertices()
                .filter(|&v| self.key(v) == target)
                .min_by_key(|&v| self.link_ids[v])
                .expect("tier is nonempty")),
        }
    }

    /// Removes `v` and its incident edges from the live graph.
    pub fn remove_vertex(&mut self, v: usize) -> Result<()> {
        if !self.is_live(v) {
            return Err(FapError::UnknownVertex(v));
        }
        self.live[v] = false;
        self.live_count -= 1;
        for k in 0..self.adj[v].len() {
            let (u, w) = self.adj[v][k];
            if self.live[u] {
                self.degree[u] -= 1;
                self.weighted_degree[u] -= w as u64;
                self.live_edges -= 1;
            }
        }
        self.degree[v] = 0;
        self.weighted_degree[v] = 0;
        Ok(())
    }

    /// Puts a removed vertex back, restoring its edges to live neighbours.
    pub fn reinsert_vertex(&mut self, v: usize) -> Result<()> {
        if v >= self.adj.len() || self.live[v] {
            return Err(FapError::UnknownVertex(v));
        }
        self.live[v] = true;
        self.live_count += 1;
        let (mut d, mut wd) = (0, 0u64);
        for k in 0..self.adj[v].len() {
            let (u, w) = self.adj[v][k];
            if self.live[u] {
                self.degree[u] += 1;
                self.weighted_degree[u] += w as u64;
                self.live_edges += 1;
                d += 1;
                wd += w as u64;
            }
        }
        self.degree[v] = d;
        self.weighted_degree[v] = wd;
        Ok(())
    }

    /// Connected components of the original graph, each sorted, ordered by
    /// smallest vertex.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let n = self.adj.len();
        let mut seen = vec![false; n];
        let mut out = Vec::new();
        for s in 0..n {
            if seen[s] {
                continue;
            }
            seen[s] = true;
            let mut comp = vec![s];
            let mut stack = vec![s];
            while let Some(v) = stack.pop() {
                for &(u, _) in &self.adj[v] {
                    if !seen[u] {
                        seen[u] = true;
                        comp.push(u);
                        stack.push(u);
                    }
                }
            }
            comp.sort_unstable();
            out.push(comp);
        }
        out
    }
}
