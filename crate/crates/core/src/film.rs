//! Superconducting film records and kinetic-inductance determination.
//!
//! Two independent routes to the sheet kinetic inductance are provided:
//!
//! - from the critical temperature and normal-state sheet resistance,
//!   `L_k = hbar * R_n / (1.76 * pi * k_B * T_c)`;
//! - from a measured resonance frequency and simulated geometric values,
//!   inverting `(2*pi*f0)^-2 = (L_k + L_g) * C`.
//!
//! `T_c` itself comes from R(T) transition curves via a configurable
//! resistance criterion (50% of the normal-state plateau by default).

use crate::constants::{HBAR, KB};
use thiserror::Error;

/// Fraction of the temperature range treated as the normal-state plateau.
const PLATEAU_WINDOW: f64 = 0.10;
/// Maximum relative spread tolerated inside the plateau window.
const PLATEAU_SPREAD: f64 = 0.05;

#[derive(Debug, Error, PartialEq)]
pub enum FilmError {
    #[error("transition curve invalid: {0}")]
    InvalidCurve(String),
    #[error("criterion must lie strictly inside (0, 1), got {0}")]
    InvalidCriterion(f64),
    #[error("no normal-state plateau: upper {window:.0}% of the temperature range has relative spread {spread:.3} >= {limit}")]
    NoPlateau { window: f64, spread: f64, limit: f64 },
    #[error("normalized resistance never crosses criterion {0} going upward")]
    NoCrossing(f64),
    #[error("critical temperature must be positive, got {0} K")]
    NonPositiveTc(f64),
    #[error("inputs invalid: {0}")]
    InvalidInput(String),
    #[error("geometric inductance {lg:.3e} H exceeds total inductance {total:.3e} H implied by f0")]
    NegativeResult { lg: f64, total: f64 },
    #[error("L_k methods incomparable: {0}")]
    IncomparableMethods(String),
}

/// A resistance-vs-temperature transition measurement for one film.
#[derive(Debug, Clone)]
pub struct TransitionCurve {
    /// `(temperature [K], resistance [Ohm])`, temperatures strictly increasing.
    pub samples: Vec<(f64, f64)>,
    pub film_id: String,
    pub deposition_batch: String,
}

impl TransitionCurve {
    pub fn new(
        samples: Vec<(f64, f64)>,
        film_id: impl Into<String>,
        deposition_batch: impl Into<String>,
    ) -> Result<Self, FilmError> {
        if samples.len() < 4 {
            return Err(FilmError::InvalidCurve(format!(
                "need at least 4 samples, got {}",
                samples.len()
            )));
        }
        for pair in samples.windows(2) {
            if pair[1].0 <= pair[0].0 {
                return Err(FilmError::InvalidCurve(format!(
                    "temperatures not strictly increasing at {} K",
                    pair[1].0
                )));
            }
        }
        if let Some((t, r)) = samples.iter().find(|(_, r)| *r < 0.0) {
            return Err(FilmError::InvalidCurve(format!(
                "negative resistance {r} Ohm at {t} K"
            )));
        }
        Ok(Self {
            samples,
            film_id: film_id.into(),
            deposition_batch: deposition_batch.into(),
        })
    }
}

/// Material record for one superconducting film.
#[derive(Debug, Clone)]
pub struct FilmProperties {
    /// Critical temperature [K].
    pub tc: f64,
    /// Normal-state sheet resistance [Ohm/sq].
    pub rn_sheet: f64,
    /// Sheet kinetic inductance [H/sq].
    pub lk_sheet: f64,
    /// Nonlinearity scaling current [A].
    pub i_star: f64,
    /// Critical current [A].
    pub i_c: f64,
    /// Film thickness [m], informational.
    pub thickness: Option<f64>,
}

impl FilmProperties {
    pub fn validate(&self) -> Result<(), FilmError> {
        if self.tc <= 0.0 {
            return Err(FilmError::NonPositiveTc(self.tc));
        }
        if self.rn_sheet < 0.0 || self.lk_sheet < 0.0 {
            return Err(FilmError::InvalidInput(
                "sheet resistance and inductance must be non-negative".into(),
            ));
        }
        if self.i_star <= 0.0 || self.i_c < 0.0 {
            return Err(FilmError::InvalidInput(
                "i_star must be positive and i_c non-negative".into(),
            ));
        }
        Ok(())
    }
}

/// Result of a critical-temperature extraction.
#[derive(Debug, Clone)]
pub struct TcEstimate {
    /// Temperature at which the normalized resistance crosses the criterion [K].
    pub tc: f64,
    /// Normal-state plateau resistance used for normalization [Ohm].
    pub plateau: f64,
    /// Criterion the crossing was evaluated at.
    pub criterion: f64,
    /// Non-fatal findings, e.g. non-monotonic brackets.
    pub warnings: Vec<String>,
}

/// Extracts T_c as the temperature where R(T)/R_plateau first crosses
/// `criterion` going upward, linearly interpolated between the bracketing
/// samples.
///
/// The plateau is the median resistance over the upper 10% of the temperature
/// range, which must be settled to within a 5% relative spread.
pub fn extract_tc(curve: &TransitionCurve, criterion: f64) -> Result<TcEstimate, FilmError> {
    if !(0.0 < criterion && criterion < 1.0) {
        return Err(FilmError::InvalidCriterion(criterion));
    }
    let t_min = curve.samples.first().unwrap().0;
    let t_max = curve.samples.last().unwrap().0;
    let window_start = t_max - PLATEAU_WINDOW * (t_max - t_min);
    let mut plateau_r: Vec<f64> = curve
        .samples
        .iter()
        .filter(|(t, _)| *t >= window_start)
        .map(|(_, r)| *r)
        .collect();
    // Thin curves may put fewer than three samples in the window; widen to
    // the last three so the spread test means something.
    if plateau_r.len() < 3 {
        let n = curve.samples.len();
        plateau_r = curve.samples[n - 3..].iter().map(|(_, r)| *r).collect();
    }
    let plateau = median(&mut plateau_r.clone());
    let spread_abs = plateau_r.iter().cloned().fold(f64::MIN, f64::max)
        - plateau_r.iter().cloned().fold(f64::MAX, f64::min);
    if plateau <= 0.0 {
        return Err(FilmError::NoPlateau {
            window: PLATEAU_WINDOW * 100.0,
            spread: f64::INFINITY,
            limit: PLATEAU_SPREAD,
        });
    }
    let spread = spread_abs / plateau;
    if spread >= PLATEAU_SPREAD {
        return Err(FilmError::NoPlateau {
            window: PLATEAU_WINDOW * 100.0,
            spread,
            limit: PLATEAU_SPREAD,
        });
    }

    let mut warnings = Vec::new();
    let norm: Vec<(f64, f64)> = curve
        .samples
        .iter()
        .map(|(t, r)| (*t, r / plateau))
        .collect();
    // First upward crossing of the criterion.
    let mut crossing = None;
    for pair in norm.windows(2) {
        let (t0, r0) = pair[0];
        let (t1, r1) = pair[1];
        if r0 < criterion && r1 >= criterion {
            crossing = Some(t0 + (criterion - r0) / (r1 - r0) * (t1 - t0));
            break;
        }
    }
    let tc = crossing.ok_or(FilmError::NoCrossing(criterion))?;
    // Flag any later downward re-crossing: the transition is not monotone.
    let after: Vec<&(f64, f64)> = norm.iter().filter(|(t, _)| *t > tc).collect();
    if after
        .windows(2)
        .any(|p| p[0].1 >= criterion && p[1].1 < criterion)
    {
        warnings.push(format!(
            "non-monotonic transition: resistance re-crosses the {criterion} criterion above {tc:.4} K; first upward crossing reported"
        ));
    }
    Ok(TcEstimate {
        tc,
        plateau,
        criterion,
        warnings,
    })
}

/// Sheet kinetic inductance [H/sq] from T_c [K] and sheet resistance [Ohm/sq]:
/// `hbar * R_n / (1.76 * pi * k_B * T_c)`.
pub fn lk_from_tc(tc: f64, rn_sheet: f64) -> Result<f64, FilmError> {
    if tc <= 0.0 {
        return Err(FilmError::NonPositiveTc(tc));
    }
    if rn_sheet < 0.0 {
        return Err(FilmError::InvalidInput(format!(
            "sheet resistance must be non-negative, got {rn_sheet}"
        )));
    }
    Ok(HBAR * rn_sheet / (1.76 * std::f64::consts::PI * KB * tc))
}

/// Kinetic inductance [H] that reconciles a measured resonance `f0` [Hz] with
/// a simulated geometric inductance `lg` [H] and capacitance `c` [F]:
/// `L_k = 1 / ((2*pi*f0)^2 * C) - L_g`.
pub fn lk_from_sim(f0: f64, lg: f64, c: f64) -> Result<f64, FilmError> {
    if f0 <= 0.0 || c <= 0.0 || lg < 0.0 {
        return Err(FilmError::InvalidInput(format!(
            "need f0 > 0, c > 0, lg >= 0; got f0={f0}, lg={lg}, c={c}"
        )));
    }
    let total = 1.0 / ((2.0 * std::f64::consts::PI * f0).powi(2) * c);
    let lk = total - lg;
    if lk < 0.0 {
        return Err(FilmError::NegativeResult { lg, total });
    }
    Ok(lk)
}

/// Side-by-side record of the two kinetic-inductance determinations.
#[derive(Debug, Clone)]
pub struct LkComparison {
    /// Sheet value from the T_c route [H/sq].
    pub lk_tc: f64,
    /// Sheet value from the resonance route [H/sq] (device value divided by
    /// the number of squares).
    pub lk_sim: f64,
    /// `|lk_sim - lk_tc| / lk_tc`.
    pub relative_deviation: f64,
    pub f0: f64,
    pub lg: f64,
    pub c: f64,
    pub n_squares: f64,
}

/// Runs both determinations and reports their relative deviation.
///
/// `n_squares` converts the per-device resonance result to a per-square value
/// so the two sheet quantities are commensurable; pass 1.0 when the caller
/// already works in device units.
pub fn compare_lk_methods(
    film: &FilmProperties,
    f0: f64,
    lg: f64,
    c: f64,
    n_squares: f64,
) -> Result<LkComparison, FilmError> {
    if n_squares <= 0.0 {
        return Err(FilmError::InvalidInput(format!(
            "n_squares must be positive, got {n_squares}"
        )));
    }
    let lk_tc = lk_from_tc(film.tc, film.rn_sheet)?;
    let lk_sim = lk_from_sim(f0, lg, c)? / n_squares;
    if lk_tc == 0.0 {
        return Err(FilmError::IncomparableMethods(
            "T_c route gives zero inductance (zero sheet resistance)".into(),
        ));
    }
    Ok(LkComparison {
        lk_tc,
        lk_sim,
        relative_deviation: (lk_sim - lk_tc).abs() / lk_tc,
        f0,
        lg,
        c,
        n_squares,
    })
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}
