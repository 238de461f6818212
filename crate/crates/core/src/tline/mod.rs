//! Lumped-element transmission line with current-dependent kinetic
//! inductance, and Bloch analysis of its periodically loaded form.
//!
//! A unit cell is a series inductor `L(I) = l0 * (1 + (I/I*)^2)` followed by
//! a shunt capacitor. A supercell is one period of the loading pattern: a
//! list of multipliers applied to either the capacitance or the inductance of
//! consecutive cells. Propagation through one supercell is described by the
//! cascaded ABCD matrix `M`; the Bloch wavenumber per supercell follows from
//!
//! ```text
//! cos(k * Lambda) = (A + D) / 2
//! ```
//!
//! with `|A + D|/2 > 1` marking stopbands. The branch of `k` is unwrapped so
//! it is continuous and increasing from `k(0+) = 0`, which the mixing module
//! relies on for absolute wavenumber differences.
//!
//! Band edges are located through the extrema of the half-trace: for a
//! lossless ladder the half-trace is a polynomial in `omega^2` whose critical
//! values never fall strictly inside (-1, 1), so every monotone segment
//! between consecutive extrema crosses each band edge exactly once. That
//! turns edge finding into bisection on monotone functions and makes band
//! counting exact even across stopbands far narrower than a sampling grid.

mod design;

pub use design::{design_loading, DesignConstraints, DesignReport};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum TlineError {
    #[error("invalid unit cell: {0}")]
    InvalidCell(String),
    #[error("invalid line spec: {0}")]
    InvalidSpec(String),
    #[error("frequency grid is empty")]
    EmptyGrid,
    #[error("frequency grid invalid: {0}")]
    InvalidGrid(String),
    #[error("grid extends to {requested:.3e} rad/s, beyond 3x the lowest per-cell cutoff {cutoff:.3e} rad/s")]
    GridBeyondCutoff { requested: f64, cutoff: f64 },
    #[error("omega {0:.6e} rad/s lies in a stopband")]
    OmegaInStopband(f64),
    #[error("omega {omega:.6e} rad/s outside the tabulated dispersion range [{lo:.6e}, {hi:.6e}]")]
    OmegaOutOfRange { omega: f64, lo: f64, hi: f64 },
    #[error("no loading pattern satisfies the design constraints: {0}")]
    DesignInfeasible(String),
}

/// One lumped LC cell of the line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UnitCell {
    /// Series inductance per cell at zero current [H].
    #[serde(rename = "l0_H")]
    pub l0: f64,
    /// Nonlinearity scaling current [A]; `f64::INFINITY` gives a linear cell.
    #[serde(rename = "i_star_A", default = "inf")]
    pub i_star: f64,
    /// Shunt capacitance per cell [F].
    #[serde(rename = "c_F")]
    pub c: f64,
}

fn inf() -> f64 {
    f64::INFINITY
}

impl UnitCell {
    pub fn validate(&self) -> Result<(), TlineError> {
        if !(self.l0 > 0.0) || !(self.c > 0.0) || !(self.i_star > 0.0) {
            return Err(TlineError::InvalidCell(format!(
                "need l0 > 0, c > 0, i_star > 0; got l0={}, c={}, i_star={}",
                self.l0, self.c, self.i_star
            )));
        }
        Ok(())
    }
}

/// Inductance of a cell carrying current `i`: `l0 * (1 + (i/i_star)^2)`.
pub fn effective_inductance(cell: &UnitCell, i: f64) -> f64 {
    let ratio = i / cell.i_star;
    cell.l0 * (1.0 + ratio * ratio)
}

/// Which cell quantity the loading pattern multiplies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PatternTarget {
    #[serde(rename = "c")]
    Capacitance,
    #[serde(rename = "l")]
    Inductance,
}

/// A periodically loaded line: `n_supercells` repetitions of the pattern.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoadedLineSpec {
    pub base: UnitCell,
    /// Per-cell multipliers over one supercell; all 1.0 means an unloaded line.
    pub pattern: Vec<f64>,
    pub pattern_target: PatternTarget,
    pub n_supercells: usize,
    /// DC bias current [A]; shifts every cell inductance through `L(I)`.
    #[serde(rename = "dc_bias_A", default)]
    pub dc_bias: f64,
}

impl LoadedLineSpec {
    /// An unloaded line: single-cell supercell, no bias.
    pub fn uniform(base: UnitCell, n_cells: usize) -> Self {
        Self {
            base,
            pattern: vec![1.0],
            pattern_target: PatternTarget::Capacitance,
            n_supercells: n_cells,
            dc_bias: 0.0,
        }
    }

    pub fn validate(&self) -> Result<(), TlineError> {
        self.base.validate()?;
        if self.pattern.is_empty() {
            return Err(TlineError::InvalidSpec("pattern must not be empty".into()));
        }
        if self.pattern.iter().any(|&m| !(m > 0.0)) {
            return Err(TlineError::InvalidSpec(
                "pattern multipliers must be positive".into(),
            ));
        }
        if self.n_supercells == 0 {
            return Err(TlineError::InvalidSpec("n_supercells must be >= 1".into()));
        }
        if !self.dc_bias.is_finite() {
            return Err(TlineError::InvalidSpec("dc_bias must be finite".into()));
        }
        Ok(())
    }

    pub fn cells_per_supercell(&self) -> usize {
        self.pattern.len()
    }

    /// `(L, C)` of cell `index` within the supercell, at the dc bias point.
    pub fn cell_lc(&self, index: usize) -> (f64, f64) {
        let m = self.pattern[index % self.pattern.len()];
        let l_eff = effective_inductance(&self.base, self.dc_bias);
        match self.pattern_target {
            PatternTarget::Capacitance => (l_eff, self.base.c * m),
            PatternTarget::Inductance => (l_eff * m, self.base.c),
        }
    }

    /// Lowest per-cell LC cutoff `2/sqrt(L*C)` across the supercell [rad/s].
    pub fn min_cell_cutoff(&self) -> f64 {
        (0..self.pattern.len())
            .map(|i| {
                let (l, c) = self.cell_lc(i);
                2.0 / (l * c).sqrt()
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// Supercell-averaged `L` and `C` at the bias point.
    pub fn mean_lc(&self) -> (f64, f64) {
        let n = self.pattern.len() as f64;
        let (mut l_sum, mut c_sum) = (0.0, 0.0);
        for i in 0..self.pattern.len() {
            let (l, c) = self.cell_lc(i);
            l_sum += l;
            c_sum += c;
        }
        (l_sum / n, c_sum / n)
    }

    /// Low-frequency Bloch impedance `sqrt(L_mean/C_mean)` [Ohm].
    pub fn bloch_impedance(&self) -> f64 {
        let (l, c) = self.mean_lc();
        (l / c).sqrt()
    }
}

/// ABCD transfer matrix of a two-port.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Abcd {
    pub a: Complex64,
    pub b: Complex64,
    pub c: Complex64,
    pub d: Complex64,
}

impl Abcd {
    pub fn identity() -> Self {
        Self {
            a: Complex64::new(1.0, 0.0),
            b: Complex64::new(0.0, 0.0),
            c: Complex64::new(0.0, 0.0),
            d: Complex64::new(1.0, 0.0),
        }
    }

    pub fn cascade(&self, rhs: &Abcd) -> Abcd {
        Abcd {
            a: self.a * rhs.a + self.b * rhs.c,
            b: self.a * rhs.b + self.b * rhs.d,
            c: self.c * rhs.a + self.d * rhs.c,
            d: self.c * rhs.b + self.d * rhs.d,
        }
    }

    pub fn determinant(&self) -> Complex64 {
        self.a * self.d - self.b * self.c
    }

    /// Eigenvalues of the 2x2 matrix.
    pub fn eigenvalues(&self) -> (Complex64, Complex64) {
        let tr = self.a + self.d;
        let half = tr / 2.0;
        let disc = (half * half - self.determinant()).sqrt();
        (half + disc, half - disc)
    }
}

/// ABCD matrix of one cell (series L then shunt C), with the inductance taken
/// at the dc bias point through `L(I)`.
pub fn abcd_cell(omega: f64, cell: &UnitCell, bias: f64) -> Abcd {
    let l = effective_inductance(cell, bias);
    Abcd {
        a: Complex64::new(1.0 - omega * omega * l * cell.c, 0.0),
        b: Complex64::new(0.0, omega * l),
        c: Complex64::new(0.0, omega * cell.c),
        d: Complex64::new(1.0, 0.0),
    }
}

/// Lossless-ladder ABCD matrix `[[a, i*b], [i*c, d]]` with real entries only.
/// Closed under multiplication; used in the dispersion hot paths.
#[derive(Debug, Clone, Copy)]
struct LosslessAbcd {
    a: f64,
    b: f64,
    c: f64,
    d: f64,
}

impl LosslessAbcd {
    fn identity() -> Self {
        Self {
            a: 1.0,
            b: 0.0,
            c: 0.0,
            d: 1.0,
        }
    }

    fn cell(omega: f64, l: f64, c: f64) -> Self {
        Self {
            a: 1.0 - omega * omega * l * c,
            b: omega * l,
            c: omega * c,
            d: 1.0,
        }
    }

    fn cascade(&self, r: &LosslessAbcd) -> Self {
        Self {
            a: self.a * r.a - self.b * r.c,
            b: self.a * r.b + self.b * r.d,
            c: self.c * r.a + self.d * r.c,
            d: self.d * r.d - self.c * r.b,
        }
    }
}

/// Half-trace `(A+D)/2` of the supercell matrix at `omega`.
fn half_trace(cells: &[(f64, f64)], omega: f64) -> f64 {
    let mut m = LosslessAbcd::identity();
    for &(l, c) in cells {
        m = m.cascade(&LosslessAbcd::cell(omega, l, c));
    }
    0.5 * (m.a + m.d)
}

/// Principal Bloch phase in [0, pi] from the half-trace, stable near both
/// band edges.
fn principal_phase(t: f64) -> f64 {
    if t > 0.5 {
        2.0 * ((0.5 * (1.0 - t)).max(0.0).sqrt()).asin()
    } else if t < -0.5 {
        std::f64::consts::PI - 2.0 * ((0.5 * (1.0 + t)).max(0.0).sqrt()).asin()
    } else {
        t.acos()
    }
}

/// One tabulated dispersion point.
#[derive(Debug, Clone, Copy)]
pub struct DispersionSample {
    /// Angular frequency [rad/s].
    pub omega: f64,
    /// Unwrapped Bloch wavenumber per supercell [rad]; `None` in stopbands.
    pub k: Option<f64>,
    pub passband: bool,
}

/// Tabulated Bloch dispersion of a loaded line, with its stopbands.
#[derive(Debug, Clone)]
pub struct DispersionCurve {
    pub samples: Vec<DispersionSample>,
    /// Stopband intervals `(omega_lo, omega_hi)` within the analyzed range,
    /// edges refined to better than 1e-6 relative frequency.
    pub stopbands: Vec<(f64, f64)>,
    /// Cells per supercell; `k` values are radians per this many cells.
    pub supercell_length: usize,
    /// The line the curve was computed for (bias included).
    pub line: LoadedLineSpec,
}

/// A located stopband.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Stopband {
    pub omega_lo: f64,
    pub omega_hi: f64,
    pub width: f64,
}

impl DispersionCurve {
    pub fn omega_range(&self) -> (f64, f64) {
        (
            self.samples.first().map(|s| s.omega).unwrap_or(0.0),
            self.samples.last().map(|s| s.omega).unwrap_or(0.0),
        )
    }

    /// Wavenumber per supercell at `omega`, linearly interpolated.
    pub fn k_at(&self, omega: f64) -> Result<f64, TlineError> {
        let (lo, hi) = self.omega_range();
        if !(lo..=hi).contains(&omega) {
            return Err(TlineError::OmegaOutOfRange { omega, lo, hi });
        }
        if self
            .stopbands
            .iter()
            .any(|&(a, b)| omega >= a && omega <= b)
        {
            return Err(TlineError::OmegaInStopband(omega));
        }
        let idx = self
            .samples
            .partition_point(|s| s.omega < omega)
            .min(self.samples.len() - 1)
            .max(1);
        // Nearest passband samples on each side; a bracketing sample may sit
        // inside a gap even when `omega` does not. The unwrapped k is
        // continuous through a gap (pinned at the Bragg value), so widening
        // the bracket stays consistent.
        let below = self.samples[..idx]
            .iter()
            .rev()
            .find_map(|s| s.k.map(|k| (s.omega, k)));
        let above = self.samples[idx..]
            .iter()
            .find_map(|s| s.k.map(|k| (s.omega, k)));
        match (below, above) {
            (Some((w0, k0)), Some((w1, k1))) => {
                let f = (omega - w0) / (w1 - w0);
                Ok(k0 + f * (k1 - k0))
            }
            (Some((_, k0)), None) => Ok(k0),
            (None, Some((_, k1))) => Ok(k1),
            (None, None) => Err(TlineError::OmegaInStopband(omega)),
        }
    }
}

/// Band boundaries of a loaded line below some maximum frequency.
#[derive(Debug, Clone)]
struct BandStructure {
    /// Gap intervals, in increasing frequency; zero-width entries are band
    /// touchings where adjacent bands meet without an actual gap.
    boundaries: Vec<(f64, f64)>,
}

impl BandStructure {
    fn band_index(&self, omega: f64) -> usize {
        self.boundaries.iter().filter(|&&(_, hi)| hi < omega).count()
    }

    fn in_gap(&self, omega: f64) -> bool {
        self.boundaries
            .iter()
            .any(|&(lo, hi)| hi > lo && omega >= lo && omega <= hi)
    }

    fn gaps(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.boundaries.iter().copied().filter(|&(lo, hi)| hi > lo)
    }
}

/// Locates every band boundary of the supercell in `(0, omega_max]`.
fn analyze_bands(cells: &[(f64, f64)], omega_max: f64) -> BandStructure {
    let n = cells.len();
    // Sampling fine enough to bracket every trace extremum: uniform points
    // plus a sine-mapped set that tracks band compression toward cutoff.
    let count = (24 * n).max(192);
    let mut scan: Vec<f64> = Vec::with_capacity(2 * count);
    for i in 1..=count {
        let u = i as f64 / count as f64;
        scan.push(omega_max * u);
        scan.push(omega_max * (u * std::f64::consts::FRAC_PI_2).sin());
    }
    scan.sort_by(|a, b| a.partial_cmp(b).unwrap());
    scan.dedup_by(|a, b| (*a - *b).abs() < 1e-12 * omega_max);

    let trace = |w: f64| half_trace(cells, w);
    let values: Vec<f64> = scan.iter().map(|&w| trace(w)).collect();

    // Bracket extrema through sign changes of successive differences.
    let mut extrema: Vec<(f64, f64)> = Vec::new(); // (omega, trace value)
    let mut prev_diff = 0.0f64;
    for i in 1..scan.len() {
        let diff = values[i] - values[i - 1];
        if i >= 2 && diff * prev_diff < 0.0 {
            let maximize = prev_diff > 0.0;
            let (w, v) = refine_extremum(&trace, scan[i - 2], scan[i], maximize);
            extrema.push((w, v));
        }
        if diff != 0.0 {
            prev_diff = diff;
        }
    }

    // Monotone segments between consecutive extrema (plus the range ends).
    let mut nodes: Vec<(f64, f64)> = Vec::with_capacity(extrema.len() + 2);
    let w_start = omega_max * 1e-12;
    nodes.push((w_start, trace(w_start)));
    nodes.extend(extrema.iter().copied());
    nodes.push((omega_max, trace(omega_max)));
    nodes.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());

    // Collect transversal crossings of the +1 and -1 band-edge lines.
    let mut events: Vec<f64> = Vec::new();
    for pair in nodes.windows(2) {
        let ((w0, v0), (w1, v1)) = (pair[0], pair[1]);
        for target in [1.0f64, -1.0] {
            if (v0 - target) * (v1 - target) < 0.0 {
                events.push(bisect_crossing(&trace, w0, w1, target));
            }
        }
    }
    events.sort_by(|a, b| a.partial_cmp(b).unwrap());

    // Inside/outside classification between consecutive events gives the
    // gap intervals directly.
    let mut boundaries: Vec<(f64, f64)> = Vec::new();
    let mut walls = vec![w_start];
    walls.extend(events.iter().copied());
    walls.push(omega_max);
    for pair in walls.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        if b <= a {
            continue;
        }
        let mid = 0.5 * (a + b);
        if trace(mid).abs() > 1.0 {
            match boundaries.last_mut() {
                Some(last) if (last.1 - a).abs() < 1e-12 * omega_max => last.1 = b,
                _ => boundaries.push((a, b)),
            }
        }
    }

    // Band touchings: extrema that graze +-1 without opening a gap still
    // separate bands and must advance the branch counter.
    for &(w, v) in &extrema {
        if (v.abs() - 1.0).abs() <= 1e-9 && !boundaries.iter().any(|&(lo, hi)| w >= lo && w <= hi)
        {
            boundaries.push((w, w));
        }
    }
    boundaries.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    BandStructure { boundaries }
}

fn refine_extremum<F: Fn(f64) -> f64>(f: &F, mut a: f64, mut b: f64, maximize: bool) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let sign = if maximize { 1.0 } else { -1.0 };
    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let mut f1 = sign * f(x1);
    let mut f2 = sign * f(x2);
    for _ in 0..90 {
        if b - a < 1e-14 * b.abs() {
            break;
        }
        if f1 < f2 {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (b - a);
            f2 = sign * f(x2);
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INV_PHI * (b - a);
            f1 = sign * f(x1);
        }
    }
    let w = 0.5 * (a + b);
    (w, f(w))
}

fn bisect_crossing<F: Fn(f64) -> f64>(f: &F, mut a: f64, mut b: f64, target: f64) -> f64 {
    let mut fa = f(a) - target;
    for _ in 0..100 {
        if (b - a) < 1e-13 * b.abs() {
            break;
        }
        let m = 0.5 * (a + b);
        let fm = f(m) - target;
        if fa * fm <= 0.0 {
            b = m;
        } else {
            a = m;
            fa = fm;
        }
    }
    0.5 * (a + b)
}

/// Bloch dispersion of the loaded line over an increasing frequency grid.
///
/// The grid must stay within `(0, 3x]` of the lowest per-cell cutoff;
/// frequencies between the cutoff and that limit are classified (stopband)
/// rather than rejected.
pub fn bloch_dispersion(
    spec: &LoadedLineSpec,
    omegas: &[f64],
) -> Result<DispersionCurve, TlineError> {
    spec.validate()?;
    if omegas.is_empty() {
        return Err(TlineError::EmptyGrid);
    }
    if omegas[0] <= 0.0 {
        return Err(TlineError::InvalidGrid(
            "grid frequencies must be positive".into(),
        ));
    }
    if omegas.windows(2).any(|p| p[1] <= p[0]) {
        return Err(TlineError::InvalidGrid(
            "grid must be strictly increasing".into(),
        ));
    }
    let cutoff = spec.min_cell_cutoff();
    let w_max = *omegas.last().unwrap();
    if w_max > 3.0 * cutoff {
        return Err(TlineError::GridBeyondCutoff {
            requested: w_max,
            cutoff,
        });
    }

    let cells: Vec<(f64, f64)> = (0..spec.cells_per_supercell())
        .map(|i| spec.cell_lc(i))
        .collect();
    let bands = analyze_bands(&cells, w_max);

    let samples: Vec<DispersionSample> = omegas
        .iter()
        .map(|&w| {
            let t = half_trace(&cells, w);
            if t.abs() > 1.0 || bands.in_gap(w) {
                DispersionSample {
                    omega: w,
                    k: None,
                    passband: false,
                }
            } else {
                let m = bands.band_index(w);
                let theta = principal_phase(t);
                let k = if m % 2 == 0 {
                    m as f64 * std::f64::consts::PI + theta
                } else {
                    (m + 1) as f64 * std::f64::consts::PI - theta
                };
                DispersionSample {
                    omega: w,
                    k: Some(k),
                    passband: true,
                }
            }
        })
        .collect();

    Ok(DispersionCurve {
        samples,
        stopbands: bands.gaps().collect(),
        supercell_length: spec.cells_per_supercell(),
        line: spec.clone(),
    })
}

/// Stopbands of a computed dispersion curve, sorted ascending.
///
/// Edges are the bisection-refined values located during the band analysis.
pub fn find_stopbands(curve: &DispersionCurve) -> Vec<Stopband> {
    curve
        .stopbands
        .iter()
        .map(|&(lo, hi)| Stopband {
            omega_lo: lo,
            omega_hi: hi,
            width: hi - lo,
        })
        .collect()
}

/// Linear grid of `n` points over `(0, fraction * cutoff]` for a line spec.
pub fn default_grid(spec: &LoadedLineSpec, n: usize, fraction: f64) -> Vec<f64> {
    let cutoff = spec.min_cell_cutoff();
    let hi = fraction * cutoff;
    let lo = hi * 1e-3;
    (0..n)
        .map(|i| lo + (hi - lo) * i as f64 / (n - 1).max(1) as f64)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn base_cell() -> UnitCell {
        UnitCell {
            l0: 100e-12,
            i_star: 1e-3,
            c: 40e-15,
        }
    }

    #[test]
    fn effective_inductance_examples() {
        let cell = base_cell();
        assert_relative_eq!(effective_inductance(&cell, 0.0), 100e-12, max_relative = 1e-15);
        assert_relative_eq!(effective_inductance(&cell, 1e-3), 200e-12, max_relative = 1e-12);
        assert_relative_eq!(effective_inductance(&cell, 0.5e-3), 125e-12, max_relative = 1e-12);
        let linear = UnitCell {
            i_star: f64::INFINITY,
            ..cell
        };
        assert_eq!(effective_inductance(&linear, 5e-3), 100e-12);
    }

    #[test]
    fn abcd_cell_identity_at_dc_and_unit_determinant() {
        let cell = base_cell();
        let m = abcd_cell(0.0, &cell, 0.0);
        assert_eq!(m.a.re, 1.0);
        assert_eq!(m.b.norm(), 0.0);
        assert_eq!(m.c.norm(), 0.0);
        assert_eq!(m.d.re, 1.0);
        for &omega in &[1e9, 2.0 * std::f64::consts::PI * 6e9, 5e11] {
            let m = abcd_cell(omega, &cell, 0.3e-3);
            assert!((m.determinant() - Complex64::new(1.0, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn abcd_cell_matches_hand_multiplication() {
        // omega = 2*pi*6 GHz, L = 100 pH, C = 40 fF.
        let omega = 2.0 * std::f64::consts::PI * 6e9;
        let m = abcd_cell(omega, &base_cell(), 0.0);
        assert_relative_eq!(m.a.re, 0.9943151078649726, max_relative = 1e-12);
        assert_relative_eq!(m.b.im, 3.7699111843077517, max_relative = 1e-12);
        assert_relative_eq!(m.c.im, 0.0015079644737231006, max_relative = 1e-12);
        assert_eq!(m.d.re, 1.0);
    }

    #[test]
    fn uniform_ladder_matches_arcsin_dispersion() {
        let spec = LoadedLineSpec::uniform(base_cell(), 1);
        let sqrt_lc = (100e-12 * 40e-15_f64).sqrt();
        let cutoff = 2.0 / sqrt_lc;
        let grid: Vec<f64> = (0..1000)
            .map(|i| cutoff * (1e-3 + (0.9995 - 1e-3) * i as f64 / 999.0))
            .collect();
        let curve = bloch_dispersion(&spec, &grid).unwrap();
        for s in &curve.samples {
            let k = s.k.expect("below cutoff is all passband");
            let exact = 2.0 * (s.omega * sqrt_lc / 2.0).asin();
            assert_relative_eq!(k, exact, max_relative = 1e-9);
        }
        assert!(find_stopbands(&curve).is_empty());
    }

    #[test]
    fn uniform_ladder_above_cutoff_is_stopband() {
        let spec = LoadedLineSpec::uniform(base_cell(), 1);
        let cutoff = 2.0 / (100e-12 * 40e-15_f64).sqrt();
        assert_relative_eq!(cutoff, 1e12, max_relative = 1e-12);
        let grid = vec![0.5 * cutoff, 0.99 * cutoff, 1.01 * cutoff, 1.2 * cutoff];
        let curve = bloch_dispersion(&spec, &grid).unwrap();
        assert!(curve.samples[0].passband);
        assert!(curve.samples[1].passband);
        assert!(!curve.samples[2].passband);
        assert!(!curve.samples[3].passband);
    }

    #[test]
    fn grid_beyond_three_cutoffs_rejected() {
        let spec = LoadedLineSpec::uniform(base_cell(), 1);
        let err = bloch_dispersion(&spec, &[1e10, 3.5e12]).unwrap_err();
        assert!(matches!(err, TlineError::GridBeyondCutoff { .. }));
    }

    #[test]
    fn loaded_supercell_opens_bragg_stopband_consistent_with_eigenvalues() {
        // Three-cell supercell with capacitance multipliers (1, 1, 1.5).
        let spec = LoadedLineSpec {
            base: base_cell(),
            pattern: vec![1.0, 1.0, 1.5],
            pattern_target: PatternTarget::Capacitance,
            n_supercells: 1,
            dc_bias: 0.0,
        };
        let grid = default_grid(&spec, 4000, 0.999);
        let curve = bloch_dispersion(&spec, &grid).unwrap();
        let gaps = find_stopbands(&curve);
        assert!(!gaps.is_empty(), "loading must open at least one stopband");

        // Eigenvalue oracle: unit-modulus eigenvalues in passbands, split
        // moduli inside stopbands.
        for s in &curve.samples {
            let mut m = Abcd::identity();
            for i in 0..3 {
                let (l, c) = spec.cell_lc(i);
                let cell = UnitCell {
                    l0: l,
                    i_star: f64::INFINITY,
                    c,
                };
                m = m.cascade(&abcd_cell(s.omega, &cell, 0.0));
            }
            let (e1, e2) = m.eigenvalues();
            if s.passband {
                assert!(
                    (e1.norm() - 1.0).abs() < 1e-9 && (e2.norm() - 1.0).abs() < 1e-9,
                    "passband eigenvalues off the unit circle at omega={}",
                    s.omega
                );
            } else {
                assert!(
                    (e1.norm() - 1.0).abs() > 1e-9 || (e2.norm() - 1.0).abs() > 1e-9,
                    "stopband eigenvalues on the unit circle at omega={}",
                    s.omega
                );
            }
        }

        // First gap sits at the supercell Bragg condition k*Lambda = pi.
        let (lo, _) = curve.stopbands[0];
        let just_below = lo * (1.0 - 1e-4);
        let k = curve.k_at(just_below).unwrap();
        assert!(
            (k - std::f64::consts::PI).abs() < 0.05,
            "k at first gap edge = {k}"
        );
    }

    #[test]
    fn two_loading_periodicities_give_two_reported_stopbands() {
        // Pattern with both a 6-cell and a 3-cell periodicity.
        let spec = LoadedLineSpec {
            base: base_cell(),
            pattern: vec![1.6, 1.0, 1.0, 1.3, 1.0, 1.0],
            pattern_target: PatternTarget::Capacitance,
            n_supercells: 1,
            dc_bias: 0.0,
        };
        let grid = default_grid(&spec, 6000, 0.98);
        let curve = bloch_dispersion(&spec, &grid).unwrap();
        let gaps = find_stopbands(&curve);
        assert!(gaps.len() >= 2, "expected at least two gaps, got {gaps:?}");
        for pair in gaps.windows(2) {
            assert!(pair[0].omega_hi <= pair[1].omega_lo, "gaps must be sorted");
        }
    }

    #[test]
    fn unwrapped_k_is_continuous_and_increasing_across_bands() {
        let spec = LoadedLineSpec {
            base: base_cell(),
            pattern: vec![1.0, 1.0, 1.1],
            pattern_target: PatternTarget::Capacitance,
            n_supercells: 1,
            dc_bias: 0.0,
        };
        let grid = default_grid(&spec, 8000, 0.995);
        let curve = bloch_dispersion(&spec, &grid).unwrap();
        let mut last_k = 0.0;
        for s in &curve.samples {
            if let Some(k) = s.k {
                assert!(
                    k >= last_k - 1e-9,
                    "k not increasing at omega={}: {k} < {last_k}",
                    s.omega
                );
                last_k = k;
            }
        }
        // The grid tops out above the third folded band: both gaps crossed.
        assert!(last_k > 2.0 * std::f64::consts::PI, "last_k = {last_k}");
    }

    #[test]
    fn uniform_multi_cell_supercell_unwraps_through_band_touchings() {
        // All multipliers 1: the 3-cell supercell has zero-width touchings at
        // k*Lambda = pi and 2*pi that must not break the unwrapping.
        let spec = LoadedLineSpec {
            base: base_cell(),
            pattern: vec![1.0, 1.0, 1.0],
            pattern_target: PatternTarget::Capacitance,
            n_supercells: 1,
            dc_bias: 0.0,
        };
        let grid = default_grid(&spec, 3000, 0.99);
        let curve = bloch_dispersion(&spec, &grid).unwrap();
        assert!(find_stopbands(&curve).is_empty());
        let sqrt_lc = (100e-12 * 40e-15_f64).sqrt();
        for s in &curve.samples {
            let exact = 3.0 * 2.0 * (s.omega * sqrt_lc / 2.0).asin();
            let k = s.k.expect("uniform line has no gaps below cutoff");
            assert_relative_eq!(k, exact, max_relative = 1e-7);
        }
    }

    #[test]
    fn long_wavelength_limit() {
        let spec = LoadedLineSpec {
            base: base_cell(),
            pattern: vec![2.0, 1.0, 1.0, 1.0],
            pattern_target: PatternTarget::Capacitance,
            n_supercells: 1,
            dc_bias: 0.0,
        };
        let cutoff = spec.min_cell_cutoff();
        let w = cutoff / 1000.0;
        let curve = bloch_dispersion(&spec, &[w, w * 1.001]).unwrap();
        let k = curve.samples[0].k.unwrap();
        let (l_mean, c_mean) = spec.mean_lc();
        let expected = 4.0 * w * (l_mean * c_mean).sqrt();
        assert_relative_eq!(k, expected, max_relative = 1e-3);
    }

    #[test]
    fn dc_bias_slows_the_line() {
        let mk = |bias: f64| LoadedLineSpec {
            base: base_cell(),
            pattern: vec![1.0, 1.0, 1.3],
            pattern_target: PatternTarget::Capacitance,
            n_supercells: 1,
            dc_bias: bias,
        };
        let w = 2.0 * std::f64::consts::PI * 20e9;
        let grid = vec![w, w * 1.01];
        let k_unbiased = bloch_dispersion(&mk(0.0), &grid).unwrap().samples[0]
            .k
            .unwrap();
        let k_biased = bloch_dispersion(&mk(0.5e-3), &grid).unwrap().samples[0]
            .k
            .unwrap();
        assert!(
            k_biased > k_unbiased,
            "bias must increase k: {k_biased} <= {k_unbiased}"
        );
    }

    #[test]
    fn spec_serialization_round_trip_with_required_keys() {
        let spec = LoadedLineSpec {
            base: base_cell(),
            pattern: vec![2.0, 1.0],
            pattern_target: PatternTarget::Capacitance,
            n_supercells: 16,
            dc_bias: 1e-4,
        };
        let json = serde_json::to_string(&spec).unwrap();
        for key in [
            "l0_H",
            "c_F",
            "i_star_A",
            "pattern",
            "pattern_target",
            "n_supercells",
            "dc_bias_A",
        ] {
            assert!(json.contains(key), "missing key {key} in {json}");
        }
        assert!(json.contains("\"c\""));
        let back: LoadedLineSpec = serde_json::from_str(&json).unwrap();
        assert_eq!(back, spec);
    }

    #[test]
    fn empty_grid_rejected() {
        let spec = LoadedLineSpec::uniform(base_cell(), 1);
        assert_eq!(
            bloch_dispersion(&spec, &[]).unwrap_err(),
            TlineError::EmptyGrid
        );
    }
}
