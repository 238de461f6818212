//! Three-wave mixing on the biased nonlinear line: phase matching, pump
//! placement, and parametric gain.
//!
//! With a dc bias `I_d`, the quadratic term of `L(I) = L0 (1 + (I/I*)^2)`
//! couples a pump at `omega_p` to a signal/idler pair with
//! `omega_p = omega_s + omega_i`. Perturbing the ladder wave equation around
//! the bias point gives the coupled-mode equations
//!
//! ```text
//! a_s' = i (chi k_s / 2) I_d a_p conj(a_i) e^{i dk x} + i (chi k_s / 8) (|a_s|^2 + 2|a_p|^2 + 2|a_i|^2) a_s
//! a_i' = i (chi k_i / 2) I_d a_p conj(a_s) e^{i dk x} + i (chi k_i / 8) (|a_i|^2 + 2|a_p|^2 + 2|a_s|^2) a_i
//! a_p' = i (chi k_p / 2) I_d a_s a_i  e^{-i dk x} + i (chi k_p / 8) (|a_p|^2 + 2|a_s|^2 + 2|a_i|^2) a_p
//! ```
//!
//! with `chi = 1/(I*^2 + I_d^2)`, `dk = k_p - k_s - k_i`, amplitudes in peak
//! current and distance in supercells. Absorbing the pump self- and
//! cross-phase modulation into the envelopes leaves the total phase mismatch
//!
//! ```text
//! delta = (chi I_p0^2 / 8) (2 k_s + 2 k_i - k_p) - (k_p - k_s - k_i)
//! ```
//!
//! which vanishes where the stopband-steepened geometric dispersion
//! compensates the pump phase shifts — the pump is therefore parked just
//! below the narrow stopband. In the undepleted-pump limit the signal power
//! gain over `x` supercells is
//!
//! ```text
//! G = |cosh(g' x) + (i delta / 2 g') sinh(g' x)|^2,   g' = sqrt(g^2 - (delta/2)^2)
//! g = (chi I_d I_p0 / 2) sqrt(k_s k_i)
//! ```
//!
//! The coupling normalization is fixed by the time-domain ladder simulator
//! in [`oracle`], not trusted from the derivation alone.

pub mod oracle;

use crate::constants::{HBAR, KB};
use crate::numerics::ode::{OdeError, Rk45};
use crate::tline::{DispersionCurve, LoadedLineSpec, TlineError};
use num_complex::Complex64;
use thiserror::Error;

/// Coupling rate per supercell of the signal/idler pair, as derived from the
/// ladder wave equation with peak-current amplitudes and validated against
/// the time-domain oracle.
pub const COUPLING_NORM: f64 = 0.5;

#[derive(Debug, Error, PartialEq)]
pub enum MixingError {
    #[error("chi is singular: i_star and i_d are both zero")]
    SingularChi,
    #[error("mixing config invalid: {0}")]
    InvalidConfig(String),
    #[error("tone at {omega:.6e} rad/s is evanescent (stopband or outside the tabulated dispersion)")]
    FrequencyInStopband { omega: f64 },
    #[error("no stopband lower edge inside ({0:.4e}, {1:.4e}) rad/s")]
    NoStopbandInBand(f64, f64),
    #[error("tone at {omega:.6e} rad/s lies in a stopband")]
    StopbandTone { omega: f64 },
    #[error("integrator failed: {0}")]
    StepFailure(String),
    #[error("simulation budget exceeded: estimated {estimated:.2e} cell-steps > budget {budget:.2e}")]
    BudgetExceeded { estimated: f64, budget: f64 },
    #[error("record not steady: {0}")]
    NotSteady(String),
    #[error(transparent)]
    Line(#[from] TlineError),
}

/// Nonlinear interaction strength `1 / (I*^2 + I_d^2)` [1/A^2].
pub fn chi(i_star: f64, i_d: f64) -> Result<f64, MixingError> {
    let denom = i_star * i_star + i_d * i_d;
    if denom <= 0.0 {
        return Err(MixingError::SingularChi);
    }
    Ok(1.0 / denom)
}

/// Pump, bias, and line parameters for a mixing analysis.
#[derive(Debug, Clone)]
pub struct MixingConfig {
    /// Pump angular frequency [rad/s].
    pub omega_p: f64,
    /// Pump amplitude (peak current) at the amplifier input [A].
    pub i_p0: f64,
    /// DC bias current [A].
    pub i_d: f64,
    /// Nonlinearity scaling current [A].
    pub i_star: f64,
    pub line: LoadedLineSpec,
    pub dispersion: DispersionCurve,
}

impl MixingConfig {
    pub fn validate(&self) -> Result<(), MixingError> {
        if !(self.i_star > 0.0) {
            return Err(MixingError::InvalidConfig(format!(
                "i_star must be positive, got {}",
                self.i_star
            )));
        }
        if !(self.i_p0 >= 0.0) {
            return Err(MixingError::InvalidConfig(format!(
                "i_p0 must be non-negative, got {}",
                self.i_p0
            )));
        }
        if self.i_p0 >= self.i_star {
            return Err(MixingError::InvalidConfig(format!(
                "i_p0 = {} is not below i_star = {}; outside the perturbative regime",
                self.i_p0, self.i_star
            )));
        }
        self.line.validate()?;
        self.dispersion
            .k_at(self.omega_p)
            .map_err(|_| MixingError::FrequencyInStopband {
                omega: self.omega_p,
            })?;
        Ok(())
    }

    fn k(&self, omega: f64) -> Result<f64, MixingError> {
        self.dispersion
            .k_at(omega)
            .map_err(|_| MixingError::FrequencyInStopband { omega })
    }
}

/// Phase mismatch [rad/supercell] for a signal at `omega_s` with the pump of
/// `cfg`; zero means phase-matched exponential gain.
///
/// `delta = (chi I_p0^2 / 8)(2 k_s + 2 k_i - k_p) - (k_p - k_s - k_i)`,
/// symmetric under signal-idler exchange. With linear dispersion `k = w/v`
/// the geometric part cancels exactly and
/// `delta = chi I_p0^2 omega_p / (8 v)`.
pub fn phase_mismatch(omega_s: f64, cfg: &MixingConfig) -> Result<f64, MixingError> {
    if !(omega_s > 0.0 && omega_s < cfg.omega_p) {
        return Err(MixingError::InvalidConfig(format!(
            "omega_s = {omega_s:.6e} must lie strictly inside (0, omega_p)"
        )));
    }
    let omega_i = cfg.omega_p - omega_s;
    let k_p = cfg.k(cfg.omega_p)?;
    let k_s = cfg.k(omega_s)?;
    let k_i = cfg.k(omega_i)?;
    let x = chi(cfg.i_star, cfg.i_d)?;
    Ok(x * cfg.i_p0 * cfg.i_p0 / 8.0 * (2.0 * k_s + 2.0 * k_i - k_p) - (k_p - k_s - k_i))
}

/// Drive parameters for a pump-placement search (everything in a
/// [`MixingConfig`] except the pump frequency being solved for).
#[derive(Debug, Clone, Copy)]
pub struct PumpDrive {
    pub i_p0: f64,
    pub i_d: f64,
    pub i_star: f64,
}

/// Outcome of a pump-placement search.
#[derive(Debug, Clone, Copy)]
pub struct PumpPlacement {
    /// Chosen pump frequency [rad/s].
    pub omega_p: f64,
    /// Band-center mismatch `delta(omega_p / 2)` at the chosen pump.
    pub mismatch: f64,
    /// False when the mismatch never crossed zero and the returned pump only
    /// minimizes |delta|.
    pub sign_change: bool,
    /// Lower edge of the stopband the pump was placed against [rad/s].
    pub stopband_edge: f64,
}

/// Places the pump below the narrow stopband whose lower edge falls inside
/// `band`, minimizing the band-center mismatch `|delta(omega_p / 2)|`.
///
/// Scans the dispersion-steepened region below the edge; a zero crossing is
/// refined by bisection to 1e-9 relative. If `delta` never changes sign the
/// minimizing pump is returned with `sign_change = false`.
pub fn solve_pump_placement(
    dispersion: &DispersionCurve,
    drive: &PumpDrive,
    band: (f64, f64),
) -> Result<PumpPlacement, MixingError> {
    let edge = dispersion
        .stopbands
        .iter()
        .map(|&(lo, _)| lo)
        .find(|&lo| lo > band.0 && lo < band.1)
        .ok_or(MixingError::NoStopbandInBand(band.0, band.1))?;

    let cfg_at = |omega_p: f64| MixingConfig {
        omega_p,
        i_p0: drive.i_p0,
        i_d: drive.i_d,
        i_star: drive.i_star,
        line: dispersion.line.clone(),
        dispersion: dispersion.clone(),
    };
    let mismatch_at = |omega_p: f64| -> Option<f64> {
        phase_mismatch(omega_p / 2.0, &cfg_at(omega_p)).ok()
    };

    let (range_lo, _) = dispersion.omega_range();
    let scan_lo = (0.80 * edge).max(band.0).max(2.02 * range_lo);
    let scan_hi = 0.9998 * edge;
    if scan_hi <= scan_lo {
        return Err(MixingError::InvalidConfig(format!(
            "empty pump scan window below the stopband edge at {edge:.4e} rad/s"
        )));
    }

    const SCAN_POINTS: usize = 256;
    let mut prev: Option<(f64, f64)> = None;
    let mut best: Option<(f64, f64)> = None;
    let mut crossing: Option<(f64, f64)> = None;
    for j in 0..SCAN_POINTS {
        let w = scan_lo + (scan_hi - scan_lo) * j as f64 / (SCAN_POINTS - 1) as f64;
        let Some(m) = mismatch_at(w) else { continue };
        if best.map_or(true, |(_, bm): (f64, f64)| m.abs() < bm.abs()) {
            best = Some((w, m));
        }
        if let Some((wp, mp)) = prev {
            if mp * m < 0.0 && crossing.is_none() {
                crossing = Some((wp, w));
            }
        }
        prev = Some((w, m));
    }

    if let Some((mut a, mut b)) = crossing {
        let mut fa = mismatch_at(a).unwrap();
        for _ in 0..80 {
            if (b - a) < 1e-9 * b {
                break;
            }
            let mid = 0.5 * (a + b);
            match mismatch_at(mid) {
                Some(fm) if fa * fm <= 0.0 => b = mid,
                Some(fm) => {
                    a = mid;
                    fa = fm;
                }
                None => break,
            }
        }
        let omega_p = 0.5 * (a + b);
        let mismatch = mismatch_at(omega_p).unwrap_or(f64::NAN);
        return Ok(PumpPlacement {
            omega_p,
            mismatch,
            sign_change: true,
            stopband_edge: edge,
        });
    }

    let (omega_p, mismatch) = best.ok_or_else(|| {
        MixingError::InvalidConfig("no valid pump candidates in the scan window".into())
    })?;
    Ok(PumpPlacement {
        omega_p,
        mismatch,
        sign_change: false,
        stopband_edge: edge,
    })
}

/// A computed gain point.
#[derive(Debug, Clone, Copy)]
pub struct GainPoint {
    pub omega_s: f64,
    pub gain_db: f64,
    pub omega_i: f64,
    /// Phase mismatch [rad/supercell].
    pub mismatch: f64,
}

/// Signal gain across a frequency grid.
#[derive(Debug, Clone)]
pub struct GainProfile {
    pub points: Vec<GainPoint>,
    /// Line length in supercells.
    pub line_length: usize,
    /// Largest relative drift of the photon-flux invariants seen during full
    /// integration; `None` for the closed-form path.
    pub manley_rowe_drift: Option<f64>,
}

/// Gain evaluation method.
#[derive(Debug, Clone, Copy)]
pub enum GainMethod {
    /// Closed-form undepleted-pump solution (default).
    Undepleted,
    /// Full three-equation integration including pump depletion, with the
    /// given signal input amplitude (peak current) [A].
    FullDepletion { signal_amplitude: f64 },
}

/// Undepleted-pump power gain for coupling `g`, mismatch `delta`, and length
/// `x` (supercells).
pub fn undepleted_gain(g: f64, delta: f64, x: f64) -> f64 {
    let gp2 = Complex64::new(g * g - 0.25 * delta * delta, 0.0);
    let gp = gp2.sqrt();
    let arg = gp * x;
    if arg.norm() < 1e-8 {
        // Degenerate limit: sinh(g'x)/g' -> x.
        let val = Complex64::new(1.0, 0.5 * delta * x);
        return val.norm_sqr();
    }
    let val = arg.cosh() + Complex64::new(0.0, 0.5 * delta) / gp * arg.sinh();
    val.norm_sqr()
}

/// Parametric signal gain over the line of `cfg` for each grid frequency.
pub fn cme_gain(
    cfg: &MixingConfig,
    omega_s_grid: &[f64],
    method: GainMethod,
) -> Result<GainProfile, MixingError> {
    cfg.validate()?;
    let x_len = cfg.line.n_supercells as f64;
    let chi_v = chi(cfg.i_star, cfg.i_d)?;
    let k_p = cfg
        .dispersion
        .k_at(cfg.omega_p)
        .map_err(|_| MixingError::StopbandTone { omega: cfg.omega_p })?;

    let mut points = Vec::with_capacity(omega_s_grid.len());
    let mut max_drift: Option<f64> = None;
    for &omega_s in omega_s_grid {
        if !(omega_s > 0.0 && omega_s < cfg.omega_p) {
            return Err(MixingError::InvalidConfig(format!(
                "grid frequency {omega_s:.6e} outside (0, omega_p)"
            )));
        }
        let omega_i = cfg.omega_p - omega_s;
        let k_s = cfg
            .dispersion
            .k_at(omega_s)
            .map_err(|_| MixingError::StopbandTone { omega: omega_s })?;
        let k_i = cfg
            .dispersion
            .k_at(omega_i)
            .map_err(|_| MixingError::StopbandTone { omega: omega_i })?;
        let delta = phase_mismatch(omega_s, cfg)?;
        let g = COUPLING_NORM * chi_v * cfg.i_d * cfg.i_p0 * (k_s * k_i).sqrt();

        let gain_db = match method {
            GainMethod::Undepleted => 10.0 * undepleted_gain(g, delta, x_len).log10(),
            GainMethod::FullDepletion { signal_amplitude } => {
                let (gain, drift) = integrate_cme(
                    chi_v,
                    cfg.i_d,
                    cfg.i_p0,
                    signal_amplitude,
                    k_p,
                    k_s,
                    k_i,
                    x_len,
                )?;
                max_drift = Some(max_drift.unwrap_or(0.0).max(drift));
                10.0 * gain.log10()
            }
        };
        points.push(GainPoint {
            omega_s,
            gain_db,
            omega_i,
            mismatch: delta,
        });
    }
    Ok(GainProfile {
        points,
        line_length: cfg.line.n_supercells,
        manley_rowe_drift: max_drift,
    })
}

/// Integrates the full three-wave equations; returns the signal power gain
/// and the largest relative drift of the photon-flux invariants.
#[allow(clippy::too_many_arguments)]
fn integrate_cme(
    chi_v: f64,
    i_d: f64,
    i_p0: f64,
    a_s0: f64,
    k_p: f64,
    k_s: f64,
    k_i: f64,
    x_len: f64,
) -> Result<(f64, f64), MixingError> {
    let dk = k_p - k_s - k_i;
    // State: [Re a_s, Im a_s, Re a_i, Im a_i, Re a_p, Im a_p].
    let y0 = [a_s0, 0.0, 0.0, 0.0, i_p0, 0.0];
    let flux = |y: &[f64]| {
        let ps = (y[0] * y[0] + y[1] * y[1]) / k_s;
        let pi = (y[2] * y[2] + y[3] * y[3]) / k_i;
        let pp = (y[4] * y[4] + y[5] * y[5]) / k_p;
        (pp + ps, ps - pi)
    };
    let (q1_0, q2_0) = flux(&y0);
    let scale = q1_0.max(1e-300);
    let mut max_drift = 0.0f64;

    let rhs = |x: f64, y: &[f64], dy: &mut [f64]| {
        let a_s = Complex64::new(y[0], y[1]);
        let a_i = Complex64::new(y[2], y[3]);
        let a_p = Complex64::new(y[4], y[5]);
        let (ns, ni, np) = (a_s.norm_sqr(), a_i.norm_sqr(), a_p.norm_sqr());
        let ph = Complex64::from_polar(1.0, dk * x);
        let i_unit = Complex64::new(0.0, 1.0);
        let ds = i_unit
            * (chi_v * k_s / 2.0 * i_d * a_p * a_i.conj() * ph
                + chi_v * k_s / 8.0 * (ns + 2.0 * np + 2.0 * ni) * a_s);
        let di = i_unit
            * (chi_v * k_i / 2.0 * i_d * a_p * a_s.conj() * ph
                + chi_v * k_i / 8.0 * (ni + 2.0 * np + 2.0 * ns) * a_i);
        let dp = i_unit
            * (chi_v * k_p / 2.0 * i_d * a_s * a_i * ph.conj()
                + chi_v * k_p / 8.0 * (np + 2.0 * ns + 2.0 * ni) * a_p);
        dy[0] = ds.re;
        dy[1] = ds.im;
        dy[2] = di.re;
        dy[3] = di.im;
        dy[4] = dp.re;
        dy[5] = dp.im;
    };

    let solver = Rk45 {
        rtol: 1e-8,
        atol: 1e-14 * i_p0.max(a_s0),
        h_initial: x_len * 1e-3,
        ..Default::default()
    };
    let y_end = solver
        .integrate_observed(rhs, 0.0, x_len, &y0, |_, _, _, _, y_new, _| {
            let (q1, q2) = flux(y_new);
            max_drift = max_drift
                .max((q1 - q1_0).abs() / scale)
                .max((q2 - q2_0).abs() / scale);
        })
        .map_err(|e: OdeError| MixingError::StepFailure(format!("{e:?}")))?;

    let gain = (y_end[0] * y_end[0] + y_end[1] * y_end[1]) / (a_s0 * a_s0);
    Ok((gain, max_drift))
}

/// Standard quantum limit on the added noise temperature of a
/// phase-insensitive amplifier at `omega`: `hbar * omega / (2 k_B)` [K].
pub fn quantum_limit_noise(omega: f64) -> f64 {
    HBAR * omega / (2.0 * KB)
}
