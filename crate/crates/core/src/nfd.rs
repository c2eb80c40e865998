//! Net filter discrimination and the quantized separation matrix.
//!
//! `NFD(df) = 10 log10(P_c / P_a)` where `P_c` and `P_a` integrate the
//! product of the transmitter mask (shifted by `df`) and the receiver power
//! response. Both masks are piecewise linear in dB, so on every interval
//! between merged breakpoints the integrand is a single exponential and is
//! integrated in closed form.
//!
//! The tabulated curve is monotonized by a running maximum before it is
//! inverted, which can only over-separate.

use std::f64::consts::LN_10;

use crate::error::{FapError, Result};
use crate::propagation::InterferenceMatrix;

pub const DEFAULT_FLOOR_DB: f64 = -120.0;

const DEFAULT_TX_MASK: &str = include_str!("../data/mask_tx_default.txt");
const DEFAULT_RX_MASK: &str = include_str!("../data/mask_rx_default.txt");

/// Symmetric piecewise-linear spectral shape in dB relative to the peak.
///
/// Samples are `(offset >= 0, level <= 0)` with non-decreasing offsets; two
/// samples at the same offset describe a step. Beyond the last sample the
/// level is `floor`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralMask {
    samples: Vec<(f64, f64)>,
    floor: f64,
}

impl SpectralMask {
    pub fn new(samples: Vec<(f64, f64)>, floor: f64) -> Result<Self> {
        let bad = |msg: String| Err(FapError::InvalidParameters(format!("spectral mask: {msg}")));
        if !floor.is_finite() || floor > 0.0 {
            return bad(format!("floor {floor} must be finite and <= 0"));
        }
        match samples.first() {
            Some(&(u, l)) if u == 0.0 && l == 0.0 => {}
            _ => return bad("first sample must be (0, 0)".into()),
        }
        for w in samples.windows(2) {
            if w[1].0 < w[0].0 {
                return bad(format!("offsets decrease at {}", w[1].0));
            }
        }
        for &(u, l) in &samples {
            if !u.is_finite() || u < 0.0 {
                return bad(format!("offset {u} must be finite and >= 0"));
            }
            if !l.is_finite() || l > 0.0 || l < floor {
                return bad(format!("level {l} at {u} MHz must lie in [floor, 0]"));
            }
        }
        Ok(SpectralMask { samples, floor })
    }

    /// Flat over `±half_width`, then falling at `slope_db_per_mhz` to the floor.
    pub fn flat_with_rolloff(half_width: f64, slope_db_per_mhz: f64, floor: f64) -> Result<Self> {
        if !(half_width > 0.0) || !(slope_db_per_mhz > 0.0) {
            return Err(FapError::InvalidParameters(
                "mask half width and rolloff slope must be positive".into(),
            ));
        }
        let edge = half_width + (-floor) / slope_db_per_mhz;
        SpectralMask::new(vec![(0.0, 0.0), (half_width, 0.0), (edge, floor)], floor)
    }

    /// Ideal rectangle of total width `width`.
    pub fn rectangular(width: f64, floor: f64) -> Result<Self> {
        SpectralMask::new(
            vec![(0.0, 0.0), (width / 2.0, 0.0), (width / 2.0, floor)],
            floor,
        )
    }

    /// Bundled transmitter mask for 15 MHz channels.
    pub fn default_tx() -> Self {
        Self::bundled(DEFAULT_TX_MASK, "mask_tx_default.txt")
    }

    /// Bundled receiver response for 15 MHz channels.
    pub fn default_rx() -> Self {
        Self::bundled(DEFAULT_RX_MASK, "mask_rx_default.txt")
    }

    fn bundled(text: &str, name: &str) -> Self {
        let samples = crate::io::parse_two_column(text, name).expect("bundled mask parses");
        SpectralMask::new(samples, DEFAULT_FLOOR_DB).expect("bundled mask is valid")
    }

    pub fn samples(&self) -> &[(f64, f64)] {
        &self.samples
    }

    pub fn floor(&self) -> f64 {
        self.floor
    }

    /// Offset beyond which the mask sits at its floor.
    pub fn extent(&self) -> f64 {
        self.samples[self.samples.len() - 1].0
    }

    /// Linear-in-offset piece containing `u` (strictly inside a segment when
    /// `u` is a segment midpoint), as `(u0, l0, u1, l1)`.
    fn piece(&self, u: f64) -> (f64, f64, f64, f64) {
        let s = &self.samples;
        if u >= self.extent() {
            return (0.0, self.floor, 1.0, self.floor);
        }
        let k = s.partition_point(|&(x, _)| x <= u);
        let (u0, l0) = s[k - 1];
        let (u1, l1) = s[k];
        (u0, l0, u1, l1)
    }

    /// Level in dB at offset `u`, continuing the line of a given piece.
    fn level_on(piece: (f64, f64, f64, f64), u: f64) -> f64 {
        let (u0, l0, u1, l1) = piece;
        if u1 == u0 {
            l1
        } else {
            l0 + (l1 - l0) * (u - u0) / (u1 - u0)
        }
    }

    /// Level in dB at signed frequency offset `f`.
    pub fn level(&self, f: f64) -> f64 {
        let u = f.abs();
        Self::level_on(self.piece(u), u)
    }

    fn breakpoints(&self) -> impl Iterator<Item = f64> + '_ {
        self.samples.iter().flat_map(|&(u, _)| [u, -u])
    }
}

/// Integral of `10^(g/10)` over an interval of width `h` where `g` moves
/// linearly from `ga` to `gb` dB.
fn exp_segment(h: f64, ga: f64, gb: f64) -> f64 {
    let pa = 10f64.powf(ga / 10.0);
    let pb = 10f64.powf(gb / 10.0);
    let dg = gb - ga;
    if dg.abs() < 1e-9 {
        h * 0.5 * (pa + pb)
    } else {
        h * (pb - pa) / (dg * LN_10 / 10.0)
    }
}

/// `∫ D(f - shift) |H(f)|^2 df` over the union of both supports, linear scale.
fn overlap_power(tx: &SpectralMask, rx: &SpectralMask, shift: f64) -> f64 {
    let mut grid: Vec<f64> = rx
        .breakpoints()
        .chain(tx.breakpoints().map(|b| b + shift))
        .collect();
    grid.sort_by(|a, b| a.total_cmp(b));
    grid.dedup();
    let mut total = 0.0;
    for w in grid.windows(2) {
        let (a, b) = (w[0], w[1]);
        let h = b - a;
        if h <= 0.0 {
            continue;
        }
        let mid = 0.5 * (a + b);
        let d_piece = tx.piece((mid - shift).abs());
        let h_piece = rx.piece(mid.abs());
        let g = |f: f64| {
            SpectralMask::level_on(d_piece, (f - shift).abs()) + SpectralMask::level_on(h_piece, f.abs())
        };
        total += exp_segment(h, g(a), g(b));
    }
    total
}

/// NFD in dB at carrier offset `offset` MHz.
pub fn compute_nfd(tx: &SpectralMask, rx: &SpectralMask, offset: f64) -> Result<f64> {
    if !(offset >= 0.0) {
        return Err(FapError::InvalidParameters(format!("offset {offset} must be >= 0")));
    }
    let p_c = overlap_power(tx, rx, 0.0);
    if !(p_c > 0.0) {
        return Err(FapError::DegenerateMask);
    }
    if offset == 0.0 {
        return Ok(0.0);
    }
    let p_a = overlap_power(tx, rx, offset);
    Ok(10.0 * (p_c / p_a).log10())
}

/// NFD tabulated at `k * resolution`, `k = 0..len`, monotone non-decreasing.
#[derive(Debug, Clone, PartialEq)]
pub struct NfdCurve {
    resolution: f64,
    values: Vec<f64>,
}

impl NfdCurve {
    /// Tabulates up to `max_offset` (inclusive, rounded up to the grid).
    pub fn build(
        tx: &SpectralMask,
        rx: &SpectralMask,
        resolution: f64,
        max_offset: f64,
    ) -> Result<Self> {
        if !(resolution > 0.0) || !(max_offset >= 0.0) {
            return Err(FapError::InvalidParameters(
                "curve resolution must be positive and max offset >= 0".into(),
            ));
        }
        let steps = (max_offset / resolution - 1e-9).ceil().max(0.0) as usize;
        let values = (0..=steps)
            .map(|k| compute_nfd(tx, rx, k as f64 * resolution))
            .collect::<Result<Vec<_>>>()?;
        NfdCurve::from_table(resolution, values)
    }

    /// Tabulates far enough that the two masks no longer overlap.
    pub fn build_saturating(tx: &SpectralMask, rx: &SpectralMask, resolution: f64) -> Result<Self> {
        NfdCurve::build(tx, rx, resolution, tx.extent() + rx.extent() + resolution)
    }

    /// Takes raw tabulated values; entry 0 is pinned to 0 dB and the rest
    /// are replaced by their running maximum.
    pub fn from_table(resolution: f64, mut values: Vec<f64>) -> Result<Self> {
        if !(resolution > 0.0) || values.is_empty() {
            return Err(FapError::InvalidParameters("empty NFD table".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(FapError::InvalidParameters("NFD table contains non-finite values".into()));
        }
        values[0] = 0.0;
        let mut running = 0.0f64;
        for v in &mut values {
            running = running.max(*v);
            *v = running;
        }
        Ok(NfdCurve { resolution, values })
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn offset(&self, k: usize) -> f64 {
        k as f64 * self.resolution
    }

    pub fn max_db(&self) -> f64 {
        self.values[self.values.len() - 1]
    }

    /// Index of the first tabulated offset whose NFD reaches `target`.
    fn first_reaching(&self, target: f64) -> Option<usize> {
        let k = self.values.partition_point(|&v| v < target);
        (k < self.values.len()).then_some(k)
    }
}

/// Smallest tabulated offset (MHz) whose NFD is at least `target` dB.
pub fn invert_nfd(curve: &NfdCurve, target: f64) -> Result<f64> {
    if target.is_nan() {
        return Err(FapError::InvalidParameters("NaN NFD target".into()));
    }
    if target <= 0.0 {
        return Ok(0.0);
    }
    curve
        .first_reaching(target)
        .map(|k| curve.offset(k))
        .ok_or(FapError::UnreachableTarget {
            required_db: target,
            max_db: curve.max_db(),
            pair: None,
        })
}

/// `ceil(separation / step)` with a guard against representation error on
/// exact multiples.
pub fn quantize(separation: f64, step: f64) -> u32 {
    if separation <= 0.0 {
        return 0;
    }
    let q = (separation / step - 1e-9).ceil();
    q.max(0.0).min(u32::MAX as f64) as u32
}

/// Symmetric integer separation matrix over vertices `0..n`, labelled by
/// link id, plus the raw separation in MHz it was quantized from.
#[derive(Debug, Clone, PartialEq)]
pub struct SeparationMatrix {
    link_ids: Vec<u32>,
    step: f64,
    quantized: Vec<u32>,
    raw: Vec<f64>,
    sentinel_pairs: usize,
}

impl SeparationMatrix {
    /// All-zero matrix.
    pub fn empty(link_ids: Vec<u32>, step: f64) -> Self {
        let n = link_ids.len();
        SeparationMatrix {
            link_ids,
            step,
            quantized: vec![0; n * n],
            raw: vec![0.0; n * n],
            sentinel_pairs: 0,
        }
    }

    /// Builds from a full square table of quantized separations; raw values
    /// are taken as `sep * step`. Only the upper triangle is read.
    pub fn from_quantized(link_ids: Vec<u32>, step: f64, table: &[Vec<u32>]) -> Self {
        let mut m = SeparationMatrix::empty(link_ids, step);
        let n = m.len();
        for i in 0..n {
            for j in (i + 1)..n {
                let q = table[i][j];
                m.set(i, j, q as f64 * step, q);
            }
        }
        m
    }

    /// Sets the pair `(i, j)` symmetrically.
    pub fn set(&mut self, i: usize, j: usize, raw: f64, quantized: u32) {
        if i == j {
            return;
        }
        let n = self.len();
        self.quantized[i * n + j] = quantized;
        self.quantized[j * n + i] = quantized;
        self.raw[i * n + j] = raw;
        self.raw[j * n + i] = raw;
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

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn get(&self, i: usize, j: usize) -> u32 {
        self.quantized[i * self.len() + j]
    }

    pub fn raw(&self, i: usize, j: usize) -> f64 {
        self.raw[i * self.len() + j]
    }

    /// Unordered pairs built from the shared-node sentinel.
    pub fn sentinel_pairs(&self) -> usize {
        self.sentinel_pairs
    }

    /// `(i, j, sep)` for `i < j` with `sep > 0`.
    pub fn constraints(&self) -> impl Iterator<Item = (usize, usize, u32)> + '_ {
        let n = self.len();
        (0..n).flat_map(move |i| {
            ((i + 1)..n).filter_map(move |j| {
                let q = self.get(i, j);
                (q > 0).then_some((i, j, q))
            })
        })
    }

    pub fn constraint_count(&self) -> usize {
        self.constraints().count()
    }

    pub fn vertex_of(&self, link_id: u32) -> Option<usize> {
        self.link_ids.iter().position(|&l| l == link_id)
    }
}

/// `S_ij = max(NFD^-1(dI_ij), NFD^-1(dI_ji))`, quantized by `step`.
/// Shared-node pairs (`+inf` interference) get separation `n_f`.
pub fn build_separation_matrix(
    interference: &InterferenceMatrix,
    curve: &NfdCurve,
    step: f64,
    n_f: u32,
) -> Result<SeparationMatrix> {
    if !(step > 0.0) {
        return Err(FapError::InvalidParameters(format!("step must be positive, got {step}")));
    }
    let ids = interference.link_ids().to_vec();
    let n = ids.len();
    let mut m = SeparationMatrix::empty(ids.clone(), step);
    let invert = |target: f64, i: usize, j: usize| -> Result<f64> {
        invert_nfd(curve, target).map_err(|e| match e {
            FapError::UnreachableTarget { required_db, max_db, .. } => FapError::UnreachableTarget {
                required_db,
                max_db,
                pair: Some((ids[i], ids[j])),
            },
            other => other,
        })
    };
    for i in 0..n {
        for j in (i + 1)..n {
            let (a, b) = (interference.get(i, j), interference.get(j, i));
            if a == f64::INFINITY || b == f64::INFINITY {
                m.set(i, j, f64::INFINITY, n_f);
                m.sentinel_pairs += 1;
                continue;
            }
            let s = invert(a, i, j)?.max(invert(b, j, i)?);
            m.set(i, j, s, quantize(s, step));
        }
    }
    Ok(m)
}
