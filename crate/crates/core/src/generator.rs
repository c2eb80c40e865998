//! Clustered synthetic topologies and the topology-to-separations pipeline.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{FapError, Result};
use crate::model::{FrequencyPlan, Link, Node, Topology};
use crate::nfd::{build_separation_matrix, NfdCurve, SeparationMatrix, SpectralMask};
use crate::propagation::{build_interference_matrix, AntennaPattern, LinkBudgetParams};

const MAX_TRIES: usize = 1000;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GeneratorConfig {
    /// Side of the square area, km.
    pub area_km: f64,
    pub n_links: usize,
    pub cluster_radius_km: f64,
    pub max_link_length_km: f64,
    /// `None` means `max(1, n_links / 5)`.
    pub n_clusters: Option<usize>,
    pub seed: u64,
    /// Emit links in reverse pairs, each direction on its own pair of nodes.
    pub bidirectional: bool,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            area_km: 100.0,
            n_links: 150,
            cluster_radius_km: 0.5,
            max_link_length_km: 20.0,
            n_clusters: None,
            seed: 0,
            bidirectional: false,
        }
    }
}

impl GeneratorConfig {
    pub fn clusters(&self) -> usize {
        self.n_clusters.unwrap_or((self.n_links / 5).max(1))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(FapError::InvalidParameters(m));
        if self.n_links == 0 {
            return bad("n_links must be >= 1".into());
        }
        if self.bidirectional && self.n_links % 2 != 0 {
            return bad(format!("bidirectional generation needs an even link count, got {}", self.n_links));
        }
        if !(self.area_km > 0.0) || !(self.cluster_radius_km > 0.0) || !(self.max_link_length_km > 0.0) {
            return bad("area, cluster radius and max link length must be positive".into());
        }
        if self.max_link_length_km > self.area_km * std::f64::consts::SQRT_2 {
            return bad(format!(
                "max link length {} km exceeds the area diagonal",
                self.max_link_length_km
            ));
        }
        if 2.0 * self.cluster_radius_km > self.max_link_length_km {
            return bad("cluster diameter exceeds the max link length".into());
        }
        if self.clusters() == 0 {
            return bad("n_clusters must be >= 1".into());
        }
        Ok(())
    }
}

fn point_in_disc<R: Rng>(rng: &mut R, c: (f64, f64), r: f64) -> (f64, f64) {
    let rho = r * rng.gen::<f64>().sqrt();
    let theta = rng.gen_range(0.0..std::f64::consts::TAU);
    (c.0 + rho * theta.cos(), c.1 + rho * theta.sin())
}

/// Cluster centres uniform over the area, nodes uniform in their cluster
/// disc. Every link gets its own transmitter and receiver node, so no two
/// links share a node. Links join clusters whose discs fit within the max
/// link length; a cluster with no such partner hosts links internally.
pub fn generate_topology(config: &GeneratorConfig) -> Result<Topology> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let k = config.clusters();
    let centres: Vec<(f64, f64)> =
        (0..k).map(|_| (rng.gen_range(0.0..config.area_km), rng.gen_range(0.0..config.area_km))).collect();
    let reach = config.max_link_length_km - 2.0 * config.cluster_radius_km;
    let partners: Vec<Vec<usize>> = (0..k)
        .map(|a| {
            let far: Vec<usize> = (0..k)
                .filter(|&b| {
                    b != a && (centres[a].0 - centres[b].0).hypot(centres[a].1 - centres[b].1) <= reach
                })
                .collect();
            if far.is_empty() {
                vec![a]
            } else {
                far
            }
        })
        .collect();

    let mut nodes: Vec<Node> = Vec::with_capacity(2 * config.n_links);
    let mut links: Vec<Link> = Vec::with_capacity(config.n_links);
    let place = |rng: &mut ChaCha8Rng, c: usize, nodes: &mut Vec<Node>| -> Result<u32> {
        for _ in 0..MAX_TRIES {
            let (x, y) = point_in_disc(rng, centres[c], config.cluster_radius_km);
            if nodes.iter().all(|n| n.x != x || n.y != y) {
                let id = nodes.len() as u32;
                nodes.push(Node { id, x, y });
                return Ok(id);
            }
        }
        Err(FapError::PlacementFailure(format!("no free spot in cluster {c}")))
    };
    let mut draw = |rng: &mut ChaCha8Rng, from: usize, to: usize, nodes: &mut Vec<Node>| -> Result<()> {
        for _ in 0..MAX_TRIES {
            let mark = nodes.len();
            let tx = place(rng, from, nodes)?;
            let rx = place(rng, to, nodes)?;
            let d = nodes[tx as usize].distance_to(&nodes[rx as usize]);
            if d > 0.0 && d <= config.max_link_length_km {
                links.push(Link { id: links.len() as u32, tx, rx });
                return Ok(());
            }
            nodes.truncate(mark);
        }
        Err(FapError::PlacementFailure(format!("clusters {from} and {to} admit no link")))
    };
    let mut drawn = 0;
    while drawn < config.n_links {
        let a = rng.gen_range(0..k);
        let b = partners[a][rng.gen_range(0..partners[a].len())];
        draw(&mut rng, a, b, &mut nodes)?;
        drawn += 1;
        if config.bidirectional {
            // reverse direction on fresh nodes in the same two clusters
            draw(&mut rng, b, a, &mut nodes)?;
            drawn += 1;
        }
    }
    Topology::new(nodes, links)
}

/// Frequency plan of the reference scenario: 600 MHz from 7007.5 MHz,
/// 15 MHz bands on a 0.15 MHz grid.
pub fn reference_plan() -> FrequencyPlan {
    FrequencyPlan::new(7007.5, 7607.5, 15.0, 0.15).expect("reference plan is valid")
}

/// Physical inputs for deriving separations from a topology.
#[derive(Debug, Clone)]
pub struct PipelineParams {
    pub budget: LinkBudgetParams,
    pub pattern: AntennaPattern,
    pub tx_mask: SpectralMask,
    pub rx_mask: SpectralMask,
    /// MHz; `None` means the plan's mid-band.
    pub f_ref: Option<f64>,
}

impl Default for PipelineParams {
    fn default() -> Self {
        PipelineParams {
            budget: LinkBudgetParams::default(),
            pattern: AntennaPattern::default(),
            tx_mask: SpectralMask::default_tx(),
            rx_mask: SpectralMask::default_rx(),
            f_ref: None,
        }
    }
}

/// Interference margins, NFD curve on the plan grid, then quantized
/// separations.
pub fn derive_separations(
    topology: &Topology,
    plan: &FrequencyPlan,
    params: &PipelineParams,
) -> Result<SeparationMatrix> {
    let f_ref = params.f_ref.unwrap_or_else(|| plan.mid_band());
    let di = build_interference_matrix(topology, f_ref, &params.budget, &params.pattern)?;
    let curve = NfdCurve::build_saturating(&params.tx_mask, &params.rx_mask, plan.step)?;
    build_separation_matrix(&di, &curve, plan.step, plan.count())
}
