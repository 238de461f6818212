//! Loading-pattern search that realizes the dispersion engineering: a narrow
//! stopband with its lower edge just above the pump and a wide stopband
//! covering the pump's third harmonic.
//!
//! Candidate supercells have length `3*P` with heavy loading on cells
//! `0, P, 2P` (period `P` drives the wide third-harmonic gap) and an extra
//! light perturbation on cell 0 (period `3*P` opens the narrow gap near the
//! pump). For capacitive (or inductive) loading, multiplying every pattern
//! entry by `s` rescales the whole band structure by `1/sqrt(s)` exactly,
//! so each discrete candidate is fine-tuned analytically to put the narrow
//! gap edge at the requested position.

use super::{
    analyze_bands, LoadedLineSpec, PatternTarget, Stopband, TlineError, UnitCell,
};

/// Search box for [`design_loading`].
#[derive(Debug, Clone)]
pub struct DesignConstraints {
    /// Bounds on the final (scaled) pattern multipliers.
    pub min_multiplier: f64,
    pub max_multiplier: f64,
    /// Candidate range for `P`, the heavy-loading period in cells
    /// (supercells have `3*P` cells).
    pub period_range: (usize, usize),
    /// Supercell count for the returned line spec.
    pub n_supercells: usize,
    /// DC bias the line will operate at; the search runs on the biased cell.
    pub dc_bias: f64,
    pub pattern_target: PatternTarget,
    /// Where inside `(1.00, 1.05) * omega_p` to place the narrow gap's lower
    /// edge.
    pub edge_placement: f64,
}

impl Default for DesignConstraints {
    fn default() -> Self {
        Self {
            min_multiplier: 0.2,
            max_multiplier: 5.0,
            period_range: (3, 24),
            n_supercells: 64,
            dc_bias: 0.0,
            pattern_target: PatternTarget::Capacitance,
            edge_placement: 1.02,
        }
    }
}

/// Outcome of a successful design search.
#[derive(Debug, Clone)]
pub struct DesignReport {
    pub spec: LoadedLineSpec,
    /// The narrow stopband just above the pump.
    pub narrow: Stopband,
    /// The stopband covering three times the pump.
    pub wide: Stopband,
    /// Narrow-gap lower edge divided by the pump frequency.
    pub edge_ratio: f64,
    /// Distance of `3*omega_p` from the nearest wide-gap edge, relative to
    /// `3*omega_p`.
    pub coverage_margin: f64,
}

/// Searches loading patterns for `base` cells such that the loaded line has
/// a narrow stopband whose lower edge lies in `(1.00, 1.05) * target_pump`
/// and a stopband covering `3 * target_pump`.
pub fn design_loading(
    target_pump: f64,
    base: &UnitCell,
    constraints: &DesignConstraints,
) -> Result<DesignReport, TlineError> {
    base.validate()?;
    if !(target_pump > 0.0) {
        return Err(TlineError::DesignInfeasible(format!(
            "target pump must be positive, got {target_pump}"
        )));
    }
    let l_eff = super::effective_inductance(base, constraints.dc_bias);
    let cutoff = 2.0 / (l_eff * base.c).sqrt();
    if 3.0 * target_pump >= cutoff {
        return Err(TlineError::DesignInfeasible(format!(
            "third harmonic {:.3e} rad/s is at or beyond the ladder cutoff {cutoff:.3e} rad/s",
            3.0 * target_pump
        )));
    }
    if !(0.0 < constraints.min_multiplier && constraints.min_multiplier <= constraints.max_multiplier)
    {
        return Err(TlineError::DesignInfeasible(
            "empty multiplier box".into(),
        ));
    }

    let heavy_grid: Vec<f64> = [1.5, 2.0, 2.5, 3.0, 4.0]
        .into_iter()
        .filter(|&m| m <= constraints.max_multiplier && m > 1.0)
        .collect();
    let light_grid = [1.05, 1.1, 1.2, 1.3];
    if heavy_grid.is_empty() {
        return Err(TlineError::DesignInfeasible(
            "multiplier box admits no loading (all multipliers pinned near 1)".into(),
        ));
    }

    // Period estimate from the long-wavelength dispersion: the narrow gap
    // sits where the phase across one supercell reaches pi.
    let sqrt_lc = (l_eff * base.c).sqrt();
    let scan_max = 3.5 * target_pump;
    let edge_target = constraints.edge_placement * target_pump;

    let mut best: Option<(f64, DesignReport)> = None;

    for &m3 in &heavy_grid {
        for &m1 in &light_grid {
            // Average multiplier enters the period estimate; one fixed-point
            // pass is enough for a +-2 cell search window.
            let mut n_est = std::f64::consts::PI / (edge_target * sqrt_lc);
            for _ in 0..2 {
                let avg = (m3 * m1 + 2.0 * m3 + (n_est - 3.0).max(0.0)) / n_est.max(3.0);
                n_est = std::f64::consts::PI / (edge_target * sqrt_lc * avg.sqrt());
            }
            let p0 = ((n_est / 3.0).round() as i64).max(2);

            for dp in -2i64..=2 {
                let p = p0 + dp;
                if p < constraints.period_range.0 as i64 || p > constraints.period_range.1 as i64 {
                    continue;
                }
                let p = p as usize;
                let mut pattern = vec![1.0; 3 * p];
                pattern[0] = m3 * m1;
                pattern[p] = m3;
                pattern[2 * p] = m3;

                if let Some(report) =
                    evaluate_candidate(base, constraints, &pattern, target_pump, scan_max)
                {
                    let score = report.coverage_margin;
                    if best.as_ref().map_or(true, |(s, _)| score > *s) {
                        best = Some((score, report));
                    }
                }
            }
        }
    }

    best.map(|(_, r)| r).ok_or_else(|| {
        TlineError::DesignInfeasible(format!(
            "no pattern in periods {:?} with multipliers <= {} places a narrow gap edge in (1.00, 1.05) x {target_pump:.4e} rad/s and covers its third harmonic",
            constraints.period_range, constraints.max_multiplier
        ))
    })
}

/// Scales a candidate pattern to put the first gap edge at the requested
/// position, then verifies both stopband conditions with refined edges.
fn evaluate_candidate(
    base: &UnitCell,
    constraints: &DesignConstraints,
    pattern: &[f64],
    target_pump: f64,
    scan_max: f64,
) -> Option<DesignReport> {
    let edge_target = constraints.edge_placement * target_pump;
    let spec = LoadedLineSpec {
        base: *base,
        pattern: pattern.to_vec(),
        pattern_target: constraints.pattern_target,
        n_supercells: constraints.n_supercells,
        dc_bias: constraints.dc_bias,
    };
    let cells: Vec<(f64, f64)> = (0..spec.cells_per_supercell())
        .map(|i| spec.cell_lc(i))
        .collect();
    let bands = analyze_bands(&cells, scan_max);
    let first_gap = bands.gaps().next()?;

    // Exact rescale: multiplying every pattern entry by s moves all band
    // frequencies by 1/sqrt(s).
    let s = (first_gap.0 / edge_target).powi(2);
    let scaled: Vec<f64> = pattern.iter().map(|m| m * s).collect();
    if scaled
        .iter()
        .any(|&m| m < constraints.min_multiplier || m > constraints.max_multiplier)
    {
        return None;
    }
    let spec = LoadedLineSpec {
        pattern: scaled,
        ..spec
    };
    let cells: Vec<(f64, f64)> = (0..spec.cells_per_supercell())
        .map(|i| spec.cell_lc(i))
        .collect();
    let bands = analyze_bands(&cells, scan_max);
    let gaps: Vec<(f64, f64)> = bands.gaps().collect();
    let narrow = *gaps.first()?;

    let ratio = narrow.0 / target_pump;
    if !(1.00 < ratio && ratio < 1.05) {
        return None;
    }
    let third = 3.0 * target_pump;
    let wide = gaps
        .iter()
        .copied()
        .find(|&(lo, hi)| lo <= third && third <= hi && hi < scan_max * 0.999)?;
    let coverage_margin = ((third - wide.0).min(wide.1 - third)) / third;

    Some(DesignReport {
        spec,
        narrow: Stopband {
            omega_lo: narrow.0,
            omega_hi: narrow.1,
            width: narrow.1 - narrow.0,
        },
        wide: Stopband {
            omega_lo: wide.0,
            omega_hi: wide.1,
            width: wide.1 - wide.0,
        },
        edge_ratio: ratio,
        coverage_margin,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tline::{bloch_dispersion, default_grid, find_stopbands};

    fn base_cell() -> UnitCell {
        UnitCell {
            l0: 100e-12,
            i_star: 1e-3,
            c: 40e-15,
        }
    }

    #[test]
    fn eight_ghz_design_passes_its_own_stopband_checks() {
        let target = 2.0 * std::f64::consts::PI * 8e9;
        let report = design_loading(target, &base_cell(), &DesignConstraints::default()).unwrap();

        // Independent verification through the public dispersion path.
        let grid = {
            let mut g = default_grid(&report.spec, 4000, 0.999);
            g.retain(|&w| w <= 3.5 * target);
            g
        };
        let curve = bloch_dispersion(&report.spec, &grid).unwrap();
        let gaps = find_stopbands(&curve);
        let narrow = gaps
            .iter()
            .find(|g| g.omega_lo > target && g.omega_lo < 1.05 * target)
            .expect("narrow gap just above the pump");
        assert!(
            (narrow.omega_lo - report.narrow.omega_lo).abs() < 1e-6 * target,
            "design and verification disagree on the narrow edge"
        );
        assert!(
            gaps.iter()
                .any(|g| g.omega_lo <= 3.0 * target && 3.0 * target <= g.omega_hi),
            "no stopband covers the third harmonic: {gaps:?}"
        );
    }

    #[test]
    fn target_above_cutoff_third_is_infeasible() {
        let base = base_cell();
        let cutoff = 2.0 / (base.l0 * base.c).sqrt();
        let err = design_loading(0.4 * cutoff, &base, &DesignConstraints::default()).unwrap_err();
        assert!(matches!(err, TlineError::DesignInfeasible(_)));
    }

    #[test]
    fn multiplier_box_pinned_at_one_is_infeasible() {
        let constraints = DesignConstraints {
            min_multiplier: 1.0,
            max_multiplier: 1.0,
            ..Default::default()
        };
        let target = 2.0 * std::f64::consts::PI * 8e9;
        let err = design_loading(target, &base_cell(), &constraints).unwrap_err();
        assert!(matches!(err, TlineError::DesignInfeasible(_)));
    }
}
