//! Free-space link budget between links and the interference-to-tackle
//! matrix.
//!
//! Received interference from link `i` at the receiver of link `j` is
//! `P_tx + G - PL(f_ref, d)` with `G = 58 - A(phi_t) - A(phi_r)` and `d` the
//! distance from `tx(i)` to `rx(j)`. Every antenna points at its link
//! partner. The amount the net filter discrimination has to absorb is that
//! power minus the receiver sensitivity.
//!
//! All powers are dBm.

use serde::Serialize;

use crate::error::{FapError, Result};
use crate::model::{Node, Topology};

/// Peak antenna gain pair used by the channel model, dB.
pub const PEAK_GAIN_DB: f64 = 58.0;

const DEFAULT_PATTERN: &str = include_str!("../data/antenna_default.txt");

pub fn watts_to_dbm(watts: f64) -> f64 {
    10.0 * watts.log10() + 30.0
}

pub fn dbw_to_dbm(dbw: f64) -> f64 {
    dbw + 30.0
}

/// Piecewise-linear attenuation over the off-boresight angle, symmetric in
/// `±angle`.
#[derive(Debug, Clone, PartialEq)]
pub struct AntennaPattern {
    samples: Vec<(f64, f64)>,
}

impl AntennaPattern {
    pub fn new(samples: Vec<(f64, f64)>) -> Result<Self> {
        let bad = |msg: String| Err(FapError::InvalidParameters(format!("antenna pattern: {msg}")));
        match samples.first() {
            Some(&(a, att)) if a == 0.0 && att == 0.0 => {}
            _ => return bad("first sample must be (0, 0)".into()),
        }
        for w in samples.windows(2) {
            if !(w[1].0 > w[0].0) {
                return bad(format!("angles not strictly increasing at {}", w[1].0));
            }
        }
        for &(a, att) in &samples {
            if !(0.0..=180.0).contains(&a) {
                return bad(format!("angle {a} outside [0, 180]"));
            }
            if !att.is_finite() || att < 0.0 {
                return bad(format!("attenuation {att} at {a} deg must be finite and >= 0"));
            }
        }
        Ok(AntennaPattern { samples })
    }

    /// 0 dB at boresight rising linearly to 25 dB at 60 degrees, flat beyond.
    pub fn default_pattern() -> Self {
        let samples = crate::io::parse_two_column(DEFAULT_PATTERN, "antenna_default.txt")
            .expect("bundled antenna pattern parses");
        AntennaPattern::new(samples).expect("bundled antenna pattern is valid")
    }

    pub fn samples(&self) -> &[(f64, f64)] {
        &self.samples
    }

    /// Attenuation in dB at `angle` degrees; any angle is folded into [0, 180].
    pub fn attenuation(&self, angle: f64) -> f64 {
        let mut a = angle.rem_euclid(360.0);
        if a > 180.0 {
            a = 360.0 - a;
        }
        let s = &self.samples;
        let last = s[s.len() - 1];
        if a >= last.0 {
            return last.1;
        }
        // first sample is at 0, so a lies inside some segment
        let k = s.partition_point(|&(x, _)| x <= a);
        let (x0, y0) = s[k - 1];
        let (x1, y1) = s[k];
        y0 + (y1 - y0) * (a - x0) / (x1 - x0)
    }
}

impl Default for AntennaPattern {
    fn default() -> Self {
        AntennaPattern::default_pattern()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LinkBudgetParams {
    pub tx_power_dbm: f64,
    pub sensitivity_dbm: f64,
}

impl Default for LinkBudgetParams {
    /// 1 W transmitters, -79.12 dBm sensitivity.
    fn default() -> Self {
        LinkBudgetParams {
            tx_power_dbm: watts_to_dbm(1.0),
            sensitivity_dbm: -79.12,
        }
    }
}

/// Free-space path loss in dB for `f` in MHz and `d` in km.
pub fn path_loss(f: f64, d: f64) -> Result<f64> {
    if !(f > 0.0) {
        return Err(FapError::NonPositiveFrequency(f));
    }
    if !(d > 0.0) {
        return Err(FapError::NonPositiveDistance(d));
    }
    Ok(32.4 + 20.0 * f.log10() + 20.0 * d.log10())
}

pub fn antenna_gain(pattern: &AntennaPattern, phi_t: f64, phi_r: f64) -> f64 {
    PEAK_GAIN_DB - pattern.attenuation(phi_t) - pattern.attenuation(phi_r)
}

/// Unsigned angle in degrees at `at` between the directions to `a` and `b`.
/// A degenerate (zero-length) direction counts as boresight.
fn angle_between(at: &Node, a: &Node, b: &Node) -> f64 {
    let (ux, uy) = (a.x - at.x, a.y - at.y);
    let (vx, vy) = (b.x - at.x, b.y - at.y);
    if (ux == 0.0 && uy == 0.0) || (vx == 0.0 && vy == 0.0) {
        return 0.0;
    }
    let cross = ux * vy - uy * vx;
    let dot = ux * vx + uy * vy;
    cross.abs().atan2(dot).to_degrees()
}

/// Interference to tackle from link `source` into the receiver of link
/// `victim`, in dB above sensitivity.
pub fn interference_to_tackle(
    topology: &Topology,
    source: u32,
    victim: u32,
    f_ref: f64,
    params: &LinkBudgetParams,
    pattern: &AntennaPattern,
) -> Result<f64> {
    let unknown = |id| FapError::InvalidParameters(format!("unknown link {id}"));
    let li = topology.link(source).ok_or_else(|| unknown(source))?;
    let lj = topology.link(victim).ok_or_else(|| unknown(victim))?;
    if source == victim {
        return Err(FapError::InvalidParameters(format!(
            "self interference requested for link {source}"
        )));
    }
    let (tx_i, rx_i) = topology.endpoints(li);
    let (tx_j, rx_j) = topology.endpoints(lj);
    let d = tx_i.distance_to(rx_j);
    if li.tx == lj.rx || !(d > 0.0) {
        return Err(FapError::CoLocatedNodes { source_link: source, victim_link: victim });
    }
    let phi_t = angle_between(tx_i, rx_i, rx_j);
    let phi_r = angle_between(rx_j, tx_j, tx_i);
    let received =
        params.tx_power_dbm + antenna_gain(pattern, phi_t, phi_r) - path_loss(f_ref, d)?;
    Ok(received - params.sensitivity_dbm)
}

/// Dense `n x n` matrix of interference to tackle, row = source, column =
/// victim, in the link order of the topology. The diagonal is NaN.
///
/// Pairs sharing a node get `+inf`: a radio cannot receive on top of its
/// own transmission.
#[derive(Debug, Clone, PartialEq)]
pub struct InterferenceMatrix {
    link_ids: Vec<u32>,
    values: Vec<f64>,
    shared_node_pairs: usize,
}

impl InterferenceMatrix {
    pub fn from_values(link_ids: Vec<u32>, values: Vec<f64>) -> Result<Self> {
        let n = link_ids.len();
        if values.len() != n * n {
            return Err(FapError::InvalidParameters(format!(
                "interference matrix needs {} entries, got {}",
                n * n,
                values.len()
            )));
        }
        let mut shared = 0;
        for i in 0..n {
            for j in (i + 1)..n {
                if values[i * n + j] == f64::INFINITY || values[j * n + i] == f64::INFINITY {
                    shared += 1;
                }
            }
        }
        Ok(InterferenceMatrix {
            link_ids,
            values,
            shared_node_pairs: shared,
        })
    }

    pub fn len(&self) -> usize {
        self.link_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.link_ids.is_empty()
    }

    pub fn link_ids(&self) -> &[u32] {
        &self.link_ids
    }

    pub fn get(&self, source: usize, victim: usize) -> f64 {
        self.values[source * self.len() + victim]
    }

    /// Number of unordered pairs carrying the shared-node sentinel.
    pub fn shared_node_pairs(&self) -> usize {
        self.shared_node_pairs
    }

    pub fn defined_entries(&self) -> usize {
        self.values.iter().filter(|v| !v.is_nan()).count()
    }
}

pub fn build_interference_matrix(
    topology: &Topology,
    f_ref: f64,
    params: &LinkBudgetParams,
    pattern: &AntennaPattern,
) -> Result<InterferenceMatrix> {
    let links = topology.links();
    let n = links.len();
    let mut values = vec![f64::NAN; n * n];
    for (a, li) in links.iter().enumerate() {
        for (b, lj) in links.iter().enumerate() {
            if a == b {
                continue;
            }
            let shares_node =
                li.tx == lj.tx || li.tx == lj.rx || li.rx == lj.tx || li.rx == lj.rx;
            values[a * n + b] = if shares_node {
                f64::INFINITY
            } else {
                interference_to_tackle(topology, li.id, lj.id, f_ref, params, pattern)?
            };
        }
    }
    InterferenceMatrix::from_values(topology.link_ids(), values)
}
