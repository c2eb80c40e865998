//! Domain types shared by every stage of the pipeline: the physical
//! topology (nodes and directed links), the overlapping frequency-band
//! grid, link assignments and the metrics derived from them.
//!
//! Frequency indices are 1-based throughout. An [`Assignment`] stores one
//! index per constraint-graph vertex, in the vertex order of the
//! [`SeparationMatrix`](crate::nfd::SeparationMatrix) it was solved
//! against; link ids only appear at the file boundary.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{FapError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub id: u32,
    /// km
    pub x: f64,
    /// km
    pub y: f64,
}

impl Node {
    pub fn distance_to(&self, other: &Node) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Directed communication link `tx -> rx`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Link {
    pub id: u32,
    pub tx: u32,
    pub rx: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Topology {
    nodes: Vec<Node>,
    links: Vec<Link>,
    #[serde(skip)]
    node_pos: BTreeMap<u32, usize>,
}

impl Topology {
    /// Validates ids, coordinates and the one-outgoing/one-incoming rule.
    pub fn new(nodes: Vec<Node>, links: Vec<Link>) -> Result<Self> {
        let mut node_pos = BTreeMap::new();
        for (k, n) in nodes.iter().enumerate() {
            if !n.x.is_finite() || !n.y.is_finite() {
                return Err(FapError::InvalidTopology(format!(
                    "node {} has non-finite coordinates",
                    n.id
                )));
            }
            if node_pos.insert(n.id, k).is_some() {
                return Err(FapError::InvalidTopology(format!("duplicate node id {}", n.id)));
            }
        }
        let mut link_ids = HashSet::new();
        let mut has_out = HashSet::new();
        let mut has_in = HashSet::new();
        for l in &links {
            if !link_ids.insert(l.id) {
                return Err(FapError::InvalidTopology(format!("duplicate link id {}", l.id)));
            }
            if l.tx == l.rx {
                return Err(FapError::InvalidTopology(format!("link {} is a self-loop", l.id)));
            }
            for end in [l.tx, l.rx] {
                if !node_pos.contains_key(&end) {
                    return Err(FapError::InvalidTopology(format!(
                        "link {} references unknown node {end}",
                        l.id
                    )));
                }
            }
            if !has_out.insert(l.tx) {
                return Err(FapError::InvalidTopology(format!(
                    "node {} has more than one outgoing link",
                    l.tx
                )));
            }
            if !has_in.insert(l.rx) {
                return Err(FapError::InvalidTopology(format!(
                    "node {} has more than one incoming link",
                    l.rx
                )));
            }
        }
        Ok(Topology { nodes, links, node_pos })
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn node(&self, id: u32) -> Option<&Node> {
        self.node_pos.get(&id).map(|&k| &self.nodes[k])
    }

    pub fn link(&self, id: u32) -> Option<&Link> {
        self.links.iter().find(|l| l.id == id)
    }

    pub fn link_ids(&self) -> Vec<u32> {
        self.links.iter().map(|l| l.id).collect()
    }

    pub(crate) fn endpoints(&self, link: &Link) -> (&Node, &Node) {
        // Both ends were checked in `new`.
        (self.node(link.tx).unwrap(), self.node(link.rx).unwrap())
    }
}

/// Grid of overlapping bands `f_i = f_start + B/2 + (i - 1) * step`, `i = 1..=count`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FrequencyPlan {
    pub f_start: f64,
    pub f_end: f64,
    #[serde(rename = "B")]
    pub bandwidth: f64,
    #[serde(rename = "delta_f")]
    pub step: f64,
    #[serde(skip)]
    count: u32,
}

impl FrequencyPlan {
    /// Builds the plan, fitting as many bands as satisfy `f_count + B/2 <= f_end`.
    pub fn new(f_start: f64, f_end: f64, bandwidth: f64, step: f64) -> Result<Self> {
        if !(step > 0.0) || !step.is_finite() {
            return Err(FapError::InvalidParameters(format!("step must be positive, got {step}")));
        }
        if !(bandwidth > 0.0) || !bandwidth.is_finite() {
            return Err(FapError::InvalidParameters(format!(
                "bandwidth must be positive, got {bandwidth}"
            )));
        }
        if !f_start.is_finite() || !f_end.is_finite() {
            return Err(FapError::InvalidParameters("band edges must be finite".into()));
        }
        let slack = f_end - f_start - bandwidth;
        // absorb representation error so that exact multiples of the step are counted
        let steps = slack / step;
        let tol = 1e-9 * steps.abs().max(1.0);
        if steps < -tol {
            return Err(FapError::InvalidParameters(format!(
                "no band of width {bandwidth} MHz fits in [{f_start}, {f_end}]"
            )));
        }
        let extra = (steps + tol).floor().max(0.0);
        if extra >= u32::MAX as f64 {
            return Err(FapError::InvalidParameters("too many bands".into()));
        }
        Ok(FrequencyPlan {
            f_start,
            f_end,
            bandwidth,
            step,
            count: extra as u32 + 1,
        })
    }

    /// Number of bands `N_f`.
    pub fn count(&self) -> u32 {
        self.count
    }

    /// Center frequency of band `index` (1-based), MHz.
    pub fn center_frequency(&self, index: u32) -> f64 {
        self.f_start + self.bandwidth / 2.0 + (index as f64 - 1.0) * self.step
    }

    pub fn mid_band(&self) -> f64 {
        (self.center_frequency(1) + self.center_frequency(self.count)) / 2.0
    }

    /// Range in MHz of an index span `max - min`.
    pub fn span_to_mhz(&self, span: u32) -> f64 {
        span as f64 * self.step + self.bandwidth
    }

    /// Largest index span whose range stays within `cap_mhz`, or `None` if
    /// even a single band exceeds it.
    pub fn span_cap(&self, cap_mhz: f64) -> Option<u32> {
        let k = (cap_mhz - self.bandwidth) / self.step;
        let tol = 1e-9 * k.abs().max(1.0);
        if k < -tol {
            None
        } else {
            Some(((k + tol).floor().max(0.0) as u64).min(u32::MAX as u64) as u32)
        }
    }
}

/// Convenience wrapper mirroring the `{f_start, f_end, B, delta_f}` file block.
pub fn build_plan(f_start: f64, f_end: f64, bandwidth: f64, step: f64) -> Result<FrequencyPlan> {
    FrequencyPlan::new(f_start, f_end, bandwidth, step)
}

/// Frequency index per vertex. `0` marks an unassigned vertex.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Assignment {
    indices: Vec<u32>,
}

impl Assignment {
    pub fn new(indices: Vec<u32>) -> Self {
        Assignment { indices }
    }

    pub fn unassigned(n: usize) -> Self {
        Assignment { indices: vec![0; n] }
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn get(&self, vertex: usize) -> Option<u32> {
        match self.indices.get(vertex) {
            Some(&0) | None => None,
            Some(&k) => Some(k),
        }
    }

    pub fn set(&mut self, vertex: usize, index: u32) {
        self.indices[vertex] = index;
    }

    pub fn clear(&mut self, vertex: usize) {
        self.indices[vertex] = 0;
    }

    pub fn indices(&self) -> &[u32] {
        &self.indices
    }

    pub fn into_indices(self) -> Vec<u32> {
        self.indices
    }

    pub fn is_complete(&self) -> bool {
        self.indices.iter().all(|&k| k != 0)
    }

    /// Sorted distinct assigned indices.
    pub fn used_set(&self) -> Vec<u32> {
        let set: BTreeSet<u32> = self.indices.iter().copied().filter(|&k| k != 0).collect();
        set.into_iter().collect()
    }

    pub fn used_count(&self) -> usize {
        self.used_set().len()
    }

    /// `max - min` over assigned indices.
    pub fn span(&self) -> Option<u32> {
        let mut it = self.indices.iter().copied().filter(|&k| k != 0);
        let first = it.next()?;
        let (lo, hi) = it.fold((first, first), |(lo, hi), k| (lo.min(k), hi.max(k)));
        Some(hi - lo)
    }

    /// Map from link id to index, for vertices `0..n` labelled by `link_ids`.
    pub fn to_link_map(&self, link_ids: &[u32]) -> BTreeMap<u32, u32> {
        link_ids
            .iter()
            .zip(&self.indices)
            .map(|(&id, &k)| (id, k))
            .collect()
    }

    /// Inverse of [`Assignment::to_link_map`]; missing links stay unassigned.
    pub fn from_link_map(map: &BTreeMap<u32, u32>, link_ids: &[u32]) -> Self {
        Assignment {
            indices: link_ids.iter().map(|id| map.get(id).copied().unwrap_or(0)).collect(),
        }
    }
}

/// `(max - min) * step + B` over the assigned indices.
pub fn range_of(assignment: &Assignment, plan: &FrequencyPlan) -> Result<f64> {
    assignment
        .span()
        .map(|s| plan.span_to_mhz(s))
        .ok_or(FapError::EmptyAssignment)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolutionMetrics {
    pub used_count: usize,
    /// MHz
    pub range: f64,
    pub feasible: bool,
    pub fail_count: usize,
}
