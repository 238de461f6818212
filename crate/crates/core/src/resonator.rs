//! Resonance fitting and extraction of the nonlinearity scale I* from
//! power-dependent resonance shifts.
//!
//! The magnitude model fitted to |S21| traces is a skewed Lorentzian dip,
//!
//! ```text
//! |S21(f)|_dB = baseline + 10*log10(1 - (1 - 10^(-depth/10)) * (1 + 2*a*x) / (1 + 4*x^2))
//! x = (f - f0) / (f0 / Q_loaded)
//! ```
//!
//! where `a` absorbs impedance-mismatch asymmetry. The I* pipeline converts
//! each probe power to an RMS current, maps each fitted `f0` to a kinetic
//! inductance through `(2*pi*f0)^-2 = (L_k + L_g)*C`, and regresses `L_k`
//! against `I^2`: the nonlinearity `L_k(I) = L_k0 * (1 + (I/I*)^2)` is exactly
//! linear in `I^2`, so `I* = sqrt(L_k0 / slope)` with a transparent ordinary
//! least-squares estimator.

use crate::numerics::{fit_line, levmar::LevMar};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ResonatorError {
    #[error("sweep invalid: {0}")]
    InvalidSweep(String),
    #[error("no resonance: deepest point is {depth_db:.3} dB below baseline, threshold {threshold_db:.3} dB")]
    NoResonance { depth_db: f64, threshold_db: f64 },
    #[error("fit diverged: {0}")]
    FitDiverged(String),
    #[error("sweep spans {span_linewidths:.2} linewidths; more than one is required")]
    SpanTooNarrow { span_linewidths: f64 },
    #[error("beta must be positive, got {0}")]
    NonPositiveBeta(f64),
    #[error("power sweep invalid: {0}")]
    InvalidPowerSweep(String),
    #[error("kinetic inductance non-positive at {p_dbm} dBm: total inductance {total:.3e} H does not exceed L_g = {lg:.3e} H")]
    NegativeLk { p_dbm: f64, total: f64, lg: f64 },
    #[error("nonlinearity undetectable: {0}")]
    NonlinearityUndetectable(String),
    #[error("i_star must be positive, got {0}")]
    NonPositiveIStar(f64),
}

/// One |S21| magnitude trace at a fixed probe power.
#[derive(Debug, Clone)]
pub struct S21Sweep {
    /// `(frequency [Hz], |S21| [dB])`, frequencies strictly increasing.
    pub points: Vec<(f64, f64)>,
    pub probe_power_dbm: f64,
    pub resonator_id: String,
}

impl S21Sweep {
    pub fn new(
        points: Vec<(f64, f64)>,
        probe_power_dbm: f64,
        resonator_id: impl Into<String>,
    ) -> Result<Self, ResonatorError> {
        if points.len() < 16 {
            return Err(ResonatorError::InvalidSweep(format!(
                "need at least 16 points, got {}",
                points.len()
            )));
        }
        if points.windows(2).any(|p| p[1].0 <= p[0].0) {
            return Err(ResonatorError::InvalidSweep(
                "frequencies must be strictly increasing".into(),
            ));
        }
        Ok(Self {
            points,
            probe_power_dbm,
            resonator_id: resonator_id.into(),
        })
    }
}

/// Fitted resonance parameters.
#[derive(Debug, Clone, Copy)]
pub struct ResonanceFit {
    /// Resonance frequency [Hz].
    pub f0: f64,
    pub q_loaded: f64,
    /// Dip depth below the baseline [dB].
    pub depth_db: f64,
    pub asymmetry: f64,
    pub baseline_db: f64,
    /// RMS of the fit residuals [dB].
    pub residual_rms: f64,
}

/// The skewed-Lorentzian magnitude model [dB].
pub fn s21_model_db(f: f64, f0: f64, q: f64, depth_db: f64, asymmetry: f64, baseline_db: f64) -> f64 {
    let x = (f - f0) / (f0 / q);
    let dip = 1.0 - 10f64.powf(-depth_db / 10.0);
    let arg = 1.0 - dip * (1.0 + 2.0 * asymmetry * x) / (1.0 + 4.0 * x * x);
    baseline_db + 10.0 * arg.max(1e-12).log10()
}

/// Least-squares fit of the skewed-Lorentzian dip model to a sweep.
pub fn fit_resonance(sweep: &S21Sweep) -> Result<ResonanceFit, ResonatorError> {
    let pts = &sweep.points;
    let n = pts.len();

    // Baseline and noise from the outer quarters of the trace.
    let edge = (n / 4).max(2);
    let outer: Vec<f64> = pts[..edge]
        .iter()
        .chain(&pts[n - edge..])
        .map(|p| p.1)
        .collect();
    let baseline0 = median(&outer);
    let noise = (outer.iter().map(|v| (v - baseline0).powi(2)).sum::<f64>() / outer.len() as f64)
        .sqrt()
        .max(1e-6);

    let (min_idx, &(f_min, db_min)) = pts
        .iter()
        .enumerate()
        .min_by(|a, b| a.1 .1.partial_cmp(&b.1 .1).unwrap())
        .unwrap();
    let depth0 = baseline0 - db_min;
    if depth0 < 3.0 * noise {
        return Err(ResonatorError::NoResonance {
            depth_db: depth0,
            threshold_db: 3.0 * noise,
        });
    }

    // Q seed from the full width at half depth.
    let half_level = baseline0 - depth0 / 2.0;
    let mut lo = pts[0].0;
    for i in (0..min_idx).rev() {
        if pts[i].1 >= half_level {
            lo = pts[i].0;
            break;
        }
    }
    let mut hi = pts[n - 1].0;
    for p in &pts[min_idx..] {
        if p.1 >= half_level {
            hi = p.0;
            break;
        }
    }
    let fwhm = (hi - lo).max(pts[1].0 - pts[0].0);
    let q0 = (f_min / fwhm).max(2.0);

    let span = pts[n - 1].0 - pts[0].0;
    let params0 = [f_min, q0, depth0, 0.0, baseline0];
    let lower = [pts[0].0, 1.0, 0.05, -5.0, baseline0 - 30.0];
    let upper = [pts[n - 1].0, 1e9, 200.0, 5.0, baseline0 + 30.0];

    let solver = LevMar::default();
    let result = solver
        .solve(&params0, &lower, &upper, |p| {
            pts.iter()
                .map(|&(f, db)| s21_model_db(f, p[0], p[1], p[2], p[3], p[4]) - db)
                .collect()
        })
        .map_err(|e| ResonatorError::FitDiverged(format!("{e:?}")))?;

    let p = result.params;
    let fit = ResonanceFit {
        f0: p[0],
        q_loaded: p[1],
        depth_db: p[2],
        asymmetry: p[3],
        baseline_db: p[4],
        residual_rms: (result.cost / n as f64).sqrt(),
    };
    if !(pts[0].0..=pts[n - 1].0).contains(&fit.f0) || fit.q_loaded <= 0.0 {
        return Err(ResonatorError::FitDiverged(format!(
            "parameters left physical bounds: f0={}, Q={}",
            fit.f0, fit.q_loaded
        )));
    }
    // Post-fit sweep validation: the trace must span at least one linewidth.
    let span_linewidths = span / (fit.f0 / fit.q_loaded);
    if span_linewidths <= 1.0 {
        return Err(ResonatorError::SpanTooNarrow { span_linewidths });
    }
    Ok(fit)
}

/// RMS current [A] delivered by a probe at `p` dBm through a power-to-
/// current-squared conversion factor `beta` [A^2/W].
pub fn power_to_current(p_dbm: f64, beta: f64) -> Result<f64, ResonatorError> {
    if !(beta > 0.0) {
        return Err(ResonatorError::NonPositiveBeta(beta));
    }
    Ok((beta * 10f64.powf((p_dbm - 30.0) / 10.0)).sqrt())
}

/// A set of resonance fits taken at different probe powers, with the
/// externally supplied conversion and circuit parameters.
#[derive(Debug, Clone)]
pub struct PowerSweep {
    /// `(probe power [dBm], fit)`.
    pub entries: Vec<(f64, ResonanceFit)>,
    /// Power-to-current-squared conversion [A^2/W]; stands in for the
    /// electromagnetic simulation that maps probe power onto line current.
    pub beta: f64,
    /// Geometric inductance [H].
    pub lg: f64,
    /// Resonator capacitance [F].
    pub c: f64,
}

impl PowerSweep {
    pub fn validate(&self) -> Result<(), ResonatorError> {
        if !(self.beta > 0.0) {
            return Err(ResonatorError::NonPositiveBeta(self.beta));
        }
        if self.entries.len() < 3 {
            return Err(ResonatorError::InvalidPowerSweep(format!(
                "need at least 3 entries, got {}",
                self.entries.len()
            )));
        }
        if !(self.lg >= 0.0) || !(self.c > 0.0) {
            return Err(ResonatorError::InvalidPowerSweep(
                "need lg >= 0 and c > 0".into(),
            ));
        }
        let mut powers: Vec<f64> = self.entries.iter().map(|e| e.0).collect();
        powers.sort_by(|a, b| a.partial_cmp(b).unwrap());
        if powers.windows(2).any(|p| p[1] == p[0]) {
            return Err(ResonatorError::InvalidPowerSweep(
                "probe powers must be distinct".into(),
            ));
        }
        Ok(())
    }
}

/// Result of an I* extraction.
#[derive(Debug, Clone)]
pub struct IStarResult {
    /// Nonlinearity scaling current [A].
    pub i_star: f64,
    /// Zero-current kinetic inductance [H].
    pub lk0: f64,
    pub fit_r_squared: f64,
    pub points_used: usize,
    pub warnings: Vec<String>,
}

/// Core regression on raw `(power [dBm], f0 [Hz])` points; two exact points
/// already determine the line, so this accepts n >= 2.
pub fn istar_regression(
    points: &[(f64, f64)],
    beta: f64,
    lg: f64,
    c: f64,
) -> Result<IStarResult, ResonatorError> {
    if points.len() < 2 {
        return Err(ResonatorError::InvalidPowerSweep(format!(
            "need at least 2 points, got {}",
            points.len()
        )));
    }
    let mut warnings = Vec::new();
    let mut sorted = points.to_vec();
    sorted.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());

    // f0 must not rise with power beyond numerical noise.
    for pair in sorted.windows(2) {
        let tol = 1e-9 * pair[0].1;
        if pair[1].1 > pair[0].1 + tol {
            warnings.push(format!(
                "f0 increases with power between {} and {} dBm (+{:.3e} Hz) — violates the nonlinear model",
                pair[0].0,
                pair[1].0,
                pair[1].1 - pair[0].1
            ));
        }
    }

    let mut xy = Vec::with_capacity(sorted.len());
    for &(p_dbm, f0) in &sorted {
        let i = power_to_current(p_dbm, beta)?;
        let total = 1.0 / ((2.0 * std::f64::consts::PI * f0).powi(2) * c);
        let lk = total - lg;
        if lk <= 0.0 {
            return Err(ResonatorError::NegativeLk { p_dbm, total, lg });
        }
        xy.push((i * i, lk));
    }

    let fit = fit_line(&xy).ok_or_else(|| {
        ResonatorError::InvalidPowerSweep("degenerate currents in regression".into())
    })?;
    if fit.slope <= 0.0 {
        return Err(ResonatorError::NonlinearityUndetectable(format!(
            "slope {} <= 0: f0 does not decrease with power",
            fit.slope
        )));
    }
    if fit.slope_stderr > 0.0 && fit.slope < 2.0 * fit.slope_stderr {
        return Err(ResonatorError::NonlinearityUndetectable(format!(
            "slope {} below 2-sigma significance ({})",
            fit.slope,
            2.0 * fit.slope_stderr
        )));
    }
    if fit.intercept <= 0.0 {
        return Err(ResonatorError::NonlinearityUndetectable(format!(
            "non-positive L_k0 intercept {}",
            fit.intercept
        )));
    }
    Ok(IStarResult {
        i_star: (fit.intercept / fit.slope).sqrt(),
        lk0: fit.intercept,
        fit_r_squared: fit.r_squared,
        points_used: sorted.len(),
        warnings,
    })
}

/// Extracts I* from a validated power sweep of resonance fits.
pub fn extract_istar(sweep: &PowerSweep) -> Result<IStarResult, ResonatorError> {
    sweep.validate()?;
    let points: Vec<(f64, f64)> = sweep.entries.iter().map(|(p, fit)| (*p, fit.f0)).collect();
    istar_regression(&points, sweep.beta, sweep.lg, sweep.c)
}

/// Film nonlinearity figure of merit `I_c / I*`.
pub fn nonlinearity_figure(i_c: f64, i_star: f64) -> Result<f64, ResonatorError> {
    if !(i_star > 0.0) {
        return Err(ResonatorError::NonPositiveIStar(i_star));
    }
    if i_c < 0.0 {
        return Err(ResonatorError::InvalidPowerSweep(format!(
            "critical current must be non-negative, got {i_c}"
        )));
    }
    Ok(i_c / i_star)
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn synthetic_sweep(
        f0: f64,
        q: f64,
        depth: f64,
        asym: f64,
        baseline: f64,
        n: usize,
        span_linewidths: f64,
    ) -> S21Sweep {
        let lw = f0 / q;
        let f_lo = f0 - span_linewidths * lw / 2.0;
        let f_hi = f0 + span_linewidths * lw / 2.0;
        let points: Vec<(f64, f64)> = (0..n)
            .map(|i| {
                let f = f_lo + (f_hi - f_lo) * i as f64 / (n - 1) as f64;
                (f, s21_model_db(f, f0, q, depth, asym, baseline))
            })
            .collect();
        S21Sweep::new(points, -60.0, "synthetic").unwrap()
    }

    #[test]
    fn noiseless_symmetric_lorentzian_recovered() {
        let sweep = synthetic_sweep(5e9, 1e4, 20.0, 0.0, -0.2, 301, 12.0);
        let fit = fit_resonance(&sweep).unwrap();
        assert_relative_eq!(fit.f0, 5e9, max_relative = 1e-7);
        assert_relative_eq!(fit.q_loaded, 1e4, max_relative = 1e-3);
        assert_relative_eq!(fit.depth_db, 20.0, max_relative = 1e-3);
        assert!(fit.residual_rms < 1e-6);
    }

    #[test]
    fn skewed_resonance_recovered() {
        let sweep = synthetic_sweep(6.2e9, 5e4, 12.0, 0.35, -1.0, 401, 16.0);
        let fit = fit_resonance(&sweep).unwrap();
        assert_relative_eq!(fit.f0, 6.2e9, max_relative = 1e-6);
        assert_relative_eq!(fit.asymmetry, 0.35, max_relative = 1e-2);
    }

    #[test]
    fn flat_trace_has_no_resonance() {
        let points: Vec<(f64, f64)> = (0..64).map(|i| (4e9 + i as f64 * 1e6, -0.1)).collect();
        let sweep = S21Sweep::new(points, -60.0, "flat").unwrap();
        assert!(matches!(
            fit_resonance(&sweep),
            Err(ResonatorError::NoResonance { .. })
        ));
    }

    #[test]
    fn noisy_f0_recovery_monte_carlo() {
        // 100 noise seeds at sigma = 0.05 dB; f0 must come back within
        // f0 / (100 * Q) every time.
        let (f0, q) = (5e9, 1e4);
        let clean = synthetic_sweep(f0, q, 20.0, 0.0, -0.2, 301, 12.0);
        let bound = f0 / (100.0 * q);
        let mut rng = ChaCha8Rng::seed_from_u64(20260810);
        for _ in 0..100 {
            let noisy: Vec<(f64, f64)> = clean
                .points
                .iter()
                .map(|&(f, db)| (f, db + 0.05 * gauss(&mut rng)))
                .collect();
            let sweep = S21Sweep::new(noisy, -60.0, "mc").unwrap();
            let fit = fit_resonance(&sweep).unwrap();
            assert!(
                (fit.f0 - f0).abs() < bound,
                "f0 error {} exceeds {}",
                (fit.f0 - f0).abs(),
                bound
            );
        }
    }

    fn gauss<R: Rng>(rng: &mut R) -> f64 {
        // Box-Muller.
        let u1: f64 = rng.gen_range(1e-12..1.0);
        let u2: f64 = rng.gen_range(0.0..1.0);
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    }

    #[test]
    fn frequency_shift_invariance() {
        let (f0, q) = (5e9, 2e4);
        let delta = 3.7e8;
        let base = synthetic_sweep(f0, q, 15.0, 0.1, -0.5, 301, 10.0);
        let shifted_points: Vec<(f64, f64)> =
            base.points.iter().map(|&(f, db)| (f + delta, db)).collect();
        let shifted = S21Sweep::new(shifted_points, -60.0, "shifted").unwrap();
        let fit0 = fit_resonance(&base).unwrap();
        let fit1 = fit_resonance(&shifted).unwrap();
        assert_relative_eq!(fit1.f0, fit0.f0 + delta, max_relative = 1e-9);
    }

    #[test]
    fn narrow_span_rejected_post_fit() {
        let sweep = synthetic_sweep(5e9, 1e4, 20.0, 0.0, 0.0, 64, 0.8);
        assert!(matches!(
            fit_resonance(&sweep),
            Err(ResonatorError::SpanTooNarrow { .. })
        ));
    }

    #[test]
    fn power_to_current_values() {
        assert_relative_eq!(
            power_to_current(-60.0, 1e-3).unwrap(),
            1e-6,
            max_relative = 1e-12
        );
        assert_relative_eq!(
            power_to_current(0.0, 1.0).unwrap(),
            0.03162277660168379,
            max_relative = 1e-12
        );
        assert!(power_to_current(-1e6, 1.0).unwrap() < 1e-30);
        assert!(matches!(
            power_to_current(-60.0, 0.0),
            Err(ResonatorError::NonPositiveBeta(_))
        ));
    }

    #[test]
    fn power_to_current_monotone_and_sqrt_beta() {
        let p1 = power_to_current(-60.0, 1e-3).unwrap();
        let p2 = power_to_current(-50.0, 1e-3).unwrap();
        assert!(p2 > p1);
        let scaled = power_to_current(-60.0, 4e-3).unwrap();
        assert_relative_eq!(scaled, 2.0 * p1, max_relative = 1e-12);
    }

    /// Forward model: f0 at probe power `p` for the standard test resonator.
    fn forward_f0(p_dbm: f64, lk0: f64, i_star: f64, lg: f64, c: f64, beta: f64) -> f64 {
        let i = power_to_current(p_dbm, beta).unwrap();
        let lk = lk0 * (1.0 + (i / i_star).powi(2));
        1.0 / (2.0 * std::f64::consts::PI * ((lk + lg) * c).sqrt())
    }

    #[test]
    fn istar_roundtrip_noise_free() {
        let (lk0, i_star, lg, c, beta) = (8e-9, 1e-3, 2e-9, 1e-13, 1e-3);
        let points: Vec<(f64, f64)> = (0..11)
            .map(|i| {
                let p = -70.0 + 2.0 * i as f64;
                (p, forward_f0(p, lk0, i_star, lg, c, beta))
            })
            .collect();
        let res = istar_regression(&points, beta, lg, c).unwrap();
        assert_relative_eq!(res.i_star, i_star, max_relative = 1e-6);
        assert_relative_eq!(res.lk0, lk0, max_relative = 1e-6);
        assert!(res.fit_r_squared > 1.0 - 1e-9);
        assert!(res.warnings.is_empty());
    }

    #[test]
    fn istar_two_point_exact() {
        let (lk0, i_star, lg, c, beta) = (8e-9, 1e-3, 2e-9, 1e-13, 1e-3);
        let points: Vec<(f64, f64)> = [-60.0, -50.0]
            .iter()
            .map(|&p| (p, forward_f0(p, lk0, i_star, lg, c, beta)))
            .collect();
        let res = istar_regression(&points, beta, lg, c).unwrap();
        assert_relative_eq!(res.i_star, i_star, max_relative = 1e-9);
    }

    #[test]
    fn flat_f0_is_undetectable() {
        let points: Vec<(f64, f64)> = (0..5).map(|i| (-70.0 + 5.0 * i as f64, 5e9)).collect();
        assert!(matches!(
            istar_regression(&points, 1e-3, 2e-9, 1e-13),
            Err(ResonatorError::NonlinearityUndetectable(_))
        ));
    }

    #[test]
    fn rising_f0_warns() {
        let (lk0, i_star, lg, c, beta) = (8e-9, 1e-3, 2e-9, 1e-13, 1e-3);
        let mut points: Vec<(f64, f64)> = (0..8)
            .map(|i| {
                let p = -70.0 + 3.0 * i as f64;
                (p, forward_f0(p, lk0, i_star, lg, c, beta))
            })
            .collect();
        points[3].1 = points[2].1 * (1.0 + 1e-6); // injected violation
        let res = istar_regression(&points, beta, lg, c).unwrap();
        assert!(!res.warnings.is_empty());
    }

    #[test]
    fn inconsistent_lg_gives_negative_lk() {
        // lg far larger than the total inductance implied by f0.
        let points = vec![(-70.0, 5e9), (-60.0, 4.999e9), (-50.0, 4.99e9)];
        assert!(matches!(
            istar_regression(&points, 1e-3, 1e-6, 1e-13),
            Err(ResonatorError::NegativeLk { .. })
        ));
    }

    #[test]
    fn power_sweep_validation() {
        let fit = ResonanceFit {
            f0: 5e9,
            q_loaded: 1e4,
            depth_db: 20.0,
            asymmetry: 0.0,
            baseline_db: 0.0,
            residual_rms: 0.0,
        };
        let sweep = PowerSweep {
            entries: vec![(-60.0, fit), (-55.0, fit)],
            beta: 1e-3,
            lg: 2e-9,
            c: 1e-13,
        };
        assert!(matches!(
            extract_istar(&sweep),
            Err(ResonatorError::InvalidPowerSweep(_))
        ));
        let dup = PowerSweep {
            entries: vec![(-60.0, fit), (-60.0, fit), (-55.0, fit)],
            beta: 1e-3,
            lg: 2e-9,
            c: 1e-13,
        };
        assert!(matches!(
            extract_istar(&dup),
            Err(ResonatorError::InvalidPowerSweep(_))
        ));
    }

    #[test]
    fn nonlinearity_figure_values() {
        assert_relative_eq!(
            nonlinearity_figure(0.25e-3, 1.0e-3).unwrap(),
            0.25,
            max_relative = 1e-12
        );
        assert_eq!(nonlinearity_figure(0.0, 1e-3).unwrap(), 0.0);
        assert_relative_eq!(
            nonlinearity_figure(0.34e-3, 1.0e-3).unwrap(),
            0.34,
            max_relative = 1e-12
        );
        assert!(matches!(
            nonlinearity_figure(1e-3, 0.0),
            Err(ResonatorError::NonPositiveIStar(_))
        ));
    }
}
