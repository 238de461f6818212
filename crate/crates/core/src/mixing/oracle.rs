//! Brute-force time-domain simulation of the nonlinear LC ladder.
//!
//! This is the ground truth the coupled-mode predictions are validated
//! against: no envelope approximation, no mode truncation, just the node
//! equations of the full ladder with the per-cell nonlinearity
//! `L(I) = L0 (1 + (I/I*)^2)` at the instantaneous current.
//!
//! Topology: a voltage source behind a matched resistor drives `M` cells
//! (series nonlinear inductor, shunt capacitor), terminated by a matched
//! resistor. Terminations equal the low-frequency Bloch impedance
//! `sqrt(L_mean/C_mean)` at the bias point. The dc bias is applied through
//! the source so the operating point develops exactly as in the device, and
//! the RF drive is ramped on smoothly to keep the turn-on transient small.
//! Tone amplitudes are projected out of the steady-state tail of the record
//! with Hann windows at the exact drive and mixing frequencies.

use super::MixingError;
use crate::numerics::ode::{hermite, Rk45};
use crate::numerics::spectra::tone_amplitude;
use crate::tline::LoadedLineSpec;

/// One drive tone, amplitude as peak line current [A].
#[derive(Debug, Clone, Copy)]
pub struct DriveTone {
    pub omega: f64,
    pub amplitude: f64,
}

/// Runtime limits and tolerances for the ladder simulation.
#[derive(Debug, Clone, Copy)]
pub struct OracleConfig {
    /// Budget on `cells x integration steps`; exceeding it is an error
    /// rather than a silent multi-minute run.
    pub budget_cell_steps: f64,
    pub rtol: f64,
    /// Relative tone-amplitude drift between the third and fourth quarters
    /// of the record above which the run is declared not steady (-60 dBc of
    /// the strongest line by default).
    pub steady_tol: f64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            budget_cell_steps: 1e9,
            rtol: 1e-7,
            steady_tol: 1e-3,
        }
    }
}

/// One spectral line of the simulated output.
#[derive(Debug, Clone, Copy)]
pub struct SpectrumLine {
    pub omega: f64,
    /// Peak current amplitude into the load [A].
    pub amplitude: f64,
}

/// Output of a ladder run.
#[derive(Debug, Clone)]
pub struct OracleResult {
    /// Output spectrum at the drive and mixing frequencies, sorted by
    /// frequency.
    pub lines: Vec<SpectrumLine>,
    /// Input-node current amplitudes at the drive frequencies, in drive
    /// order; this is the measured pump/signal actually launched.
    pub input_lines: Vec<SpectrumLine>,
    /// Analysis window `(t_start, t_end)` [s].
    pub window: (f64, f64),
}

/// Drive harmonics and pairwise mixing products worth probing, deduplicated
/// and sorted.
pub fn analysis_frequencies(drive: &[DriveTone]) -> Vec<f64> {
    let mut freqs: Vec<f64> = Vec::new();
    for (i, a) in drive.iter().enumerate() {
        freqs.push(a.omega);
        freqs.push(2.0 * a.omega);
        freqs.push(3.0 * a.omega);
        for b in &drive[i + 1..] {
            freqs.push(a.omega + b.omega);
            freqs.push((a.omega - b.omega).abs());
            freqs.push((2.0 * a.omega - b.omega).abs());
            freqs.push((2.0 * b.omega - a.omega).abs());
        }
    }
    freqs.retain(|&w| w > 0.0);
    freqs.sort_by(|x, y| x.partial_cmp(y).unwrap());
    freqs.dedup_by(|a, b| (*a - *b).abs() < 1e-9 * *b);
    freqs
}

/// Integrates the nonlinear ladder under `drive` tones plus a dc bias and
/// returns the output amplitude spectrum over the final steady-state window.
pub fn time_domain_oracle(
    line: &LoadedLineSpec,
    drive: &[DriveTone],
    duration: f64,
    dc_bias: f64,
    config: &OracleConfig,
) -> Result<OracleResult, MixingError> {
    line.validate()?;
    if drive.is_empty() {
        return Err(MixingError::InvalidConfig("no drive tones".into()));
    }
    if !(duration > 0.0) {
        return Err(MixingError::InvalidConfig(format!(
            "duration must be positive, got {duration}"
        )));
    }
    let n_cells = line.cells_per_supercell() * line.n_supercells;
    let cutoff = line.min_cell_cutoff();
    for t in drive {
        if !(t.omega > 0.0) || t.omega >= cutoff {
            return Err(MixingError::InvalidConfig(format!(
                "drive tone at {:.4e} rad/s outside (0, cutoff {cutoff:.4e})",
                t.omega
            )));
        }
    }

    // Per-cell linear inductance (loading applied, no bias: the bias flows
    // in the state) and capacitance.
    let i_star = line.base.i_star;
    let cells: Vec<(f64, f64)> = (0..n_cells)
        .map(|j| {
            let m = line.pattern[j % line.pattern.len()];
            match line.pattern_target {
                crate::tline::PatternTarget::Capacitance => (line.base.l0, line.base.c * m),
                crate::tline::PatternTarget::Inductance => (line.base.l0 * m, line.base.c),
            }
        })
        .collect();

    // Matched terminations at the biased low-frequency Bloch impedance.
    let biased = LoadedLineSpec {
        dc_bias,
        ..line.clone()
    };
    let z0 = biased.bloch_impedance();
    let v_dc = dc_bias * 2.0 * z0;

    // Step-size ceiling from the fastest cell at the bias point.
    let omega_max_cell = cells
        .iter()
        .map(|&(l, c)| {
            let l_biased = l * (1.0 + (dc_bias / i_star).powi(2));
            2.0 / (l_biased * c).sqrt()
        })
        .fold(0.0f64, f64::max);
    let h_max = 2.5 / omega_max_cell;
    // Fifth-order accuracy limit at the highest analysis frequency governs
    // the actual step, not the stability cap.
    let freqs = analysis_frequencies(drive);
    let omega_top = freqs.last().copied().unwrap();
    let h_acc = (120.0 * config.rtol).powf(0.2) / omega_top;
    let h_est = h_max.min(h_acc);
    let est_steps = duration / h_est;
    let est_cost = est_steps * n_cells as f64;
    if est_cost > config.budget_cell_steps {
        return Err(MixingError::BudgetExceeded {
            estimated: est_cost,
            budget: config.budget_cell_steps,
        });
    }

    let t_ramp = 0.1 * duration;
    let source = |t: f64| {
        let ramp = if t >= t_ramp {
            1.0
        } else {
            0.5 * (1.0 - (std::f64::consts::PI * t / t_ramp).cos())
        };
        let mut v = v_dc;
        for tone in drive {
            v += ramp * 2.0 * z0 * tone.amplitude * (tone.omega * t).cos();
        }
        v
    };

    // State: currents I_1..I_M then node voltages V_1..V_M.
    let m = n_cells;
    let mut y0 = vec![0.0; 2 * m];
    for j in 0..m {
        y0[j] = dc_bias;
        y0[m + j] = dc_bias * z0;
    }

    let rhs = |t: f64, y: &[f64], dy: &mut [f64]| {
        let v_in = source(t) - z0 * y[0];
        for j in 0..m {
            let i_j = y[j];
            let l = cells[j].0 * (1.0 + (i_j / i_star) * (i_j / i_star));
            let v_prev = if j == 0 { v_in } else { y[m + j - 1] };
            dy[j] = (v_prev - y[m + j]) / l;
        }
        for j in 0..m - 1 {
            dy[m + j] = (y[j] - y[j + 1]) / cells[j].1;
        }
        dy[2 * m - 1] = (y[m - 1] - y[2 * m - 1] / z0) / cells[m - 1].1;
    };

    // Uniform sampling of the two observables (input current, output
    // current) over the second half of the record, via Hermite
    // interpolation inside each accepted step.
    let sample_dt = (2.0 * std::f64::consts::PI / omega_top) / 16.0;
    let t_record = 0.5 * duration;
    let n_samples = ((duration - t_record) / sample_dt).floor() as usize;
    let mut samples_in: Vec<f64> = Vec::with_capacity(n_samples + 1);
    let mut samples_out: Vec<f64> = Vec::with_capacity(n_samples + 1);
    let mut next_t = t_record;

    let solver = Rk45 {
        rtol: config.rtol,
        atol: 1e-9 * dc_bias.abs().max(drive[0].amplitude.abs()).max(1e-12),
        h_initial: h_est * 0.1,
        h_max,
        max_steps: (6.0 * est_steps) as usize + 20_000,
        ..Default::default()
    };
    let iv_out = 2 * m - 1;
    solver
        .integrate_observed(rhs, 0.0, duration, &y0, |t0, y_a, dy_a, t1, y_b, dy_b| {
            while next_t <= t1 && samples_in.len() <= n_samples {
                let pick = |idx: usize| {
                    let mut out = [0.0];
                    hermite(
                        next_t,
                        t0,
                        &y_a[idx..=idx],
                        &dy_a[idx..=idx],
                        t1,
                        &y_b[idx..=idx],
                        &dy_b[idx..=idx],
                        &mut out,
                    );
                    out[0]
                };
                samples_in.push(pick(0));
                samples_out.push(pick(iv_out) / z0);
                next_t += sample_dt;
            }
        })
        .map_err(|e| MixingError::StepFailure(format!("{e:?}")))?;

    if samples_out.len() < 64 {
        return Err(MixingError::NotSteady(format!(
            "record too short: only {} analysis samples",
            samples_out.len()
        )));
    }

    // Quarters 3 and 4 of the record; their disagreement measures both
    // residual transients and spectral leakage.
    let half = samples_out.len() / 2;
    let q3_out = &samples_out[..half];
    let q4_out = &samples_out[half..];
    let t_q3 = t_record;
    let t_q4 = t_record + half as f64 * sample_dt;

    let mut amps_q3 = Vec::with_capacity(freqs.len());
    let mut amps_q4 = Vec::with_capacity(freqs.len());
    for &w in &freqs {
        amps_q3.push(tone_amplitude(q3_out, t_q3, sample_dt, w));
        amps_q4.push(tone_amplitude(q4_out, t_q4, sample_dt, w));
    }
    let a_max = amps_q4.iter().cloned().fold(0.0f64, f64::max);
    for (j, &w) in freqs.iter().enumerate() {
        let diff = (amps_q4[j] - amps_q3[j]).abs();
        if diff > config.steady_tol * a_max {
            return Err(MixingError::NotSteady(format!(
                "line at {:.4e} rad/s drifted by {:.2e} A between record quarters ({:.1} dBc of the strongest line); increase the duration",
                w,
                diff,
                20.0 * (diff / a_max).log10()
            )));
        }
    }

    let lines = freqs
        .iter()
        .zip(&amps_q4)
        .map(|(&omega, &amplitude)| SpectrumLine { omega, amplitude })
        .collect();
    let input_lines = drive
        .iter()
        .map(|t| SpectrumLine {
            omega: t.omega,
            amplitude: tone_amplitude(&samples_in[half..], t_q4, sample_dt, t.omega),
        })
        .collect();

    Ok(OracleResult {
        lines,
        input_lines,
        window: (t_q4, duration),
    })
}

impl OracleResult {
    /// Amplitude of the output line nearest `omega` (within 0.1% relative).
    pub fn amplitude_at(&self, omega: f64) -> Option<f64> {
        self.lines
            .iter()
            .find(|l| (l.omega - omega).abs() <= 1e-3 * omega)
            .map(|l| l.amplitude)
    }
}

/// Measures the parametric signal gain of a line by running the ladder with
/// the pump on and off: `20 log10(A_signal(pump on) / A_signal(pump off))`.
/// The reference run divides out linear transmission ripple.
pub fn signal_gain_via_oracle(
    line: &LoadedLineSpec,
    pump: DriveTone,
    signal: DriveTone,
    duration: f64,
    dc_bias: f64,
    config: &OracleConfig,
) -> Result<f64, MixingError> {
    let with_pump = time_domain_oracle(line, &[pump, signal], duration, dc_bias, config)?;
    let without_pump = time_domain_oracle(line, &[signal], duration, dc_bias, config)?;
    let a_on = with_pump
        .amplitude_at(signal.omega)
        .ok_or_else(|| MixingError::InvalidConfig("signal line missing from spectrum".into()))?;
    let a_off = without_pump
        .amplitude_at(signal.omega)
        .ok_or_else(|| MixingError::InvalidConfig("signal line missing from spectrum".into()))?;
    Ok(20.0 * (a_on / a_off).log10())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tline::{LoadedLineSpec, UnitCell};

    fn linear_line(n_cells: usize) -> LoadedLineSpec {
        LoadedLineSpec::uniform(
            UnitCell {
                l0: 100e-12,
                i_star: f64::INFINITY,
                c: 40e-15,
            },
            n_cells,
        )
    }

    #[test]
    fn linear_line_transmits_single_tone_within_one_percent() {
        let line = linear_line(48);
        let tone = DriveTone {
            omega: 5e10,
            amplitude: 1e-4,
        };
        let result = time_domain_oracle(&line, &[tone], 2e-8, 0.0, &OracleConfig::default())
            .expect("linear run");
        let out = result.amplitude_at(tone.omega).unwrap();
        assert!(
            (out - tone.amplitude).abs() / tone.amplitude < 0.01,
            "transmitted {out:.6e} A vs driven {:.6e} A",
            tone.amplitude
        );
        // No harmonics on a linear line beyond the spectral-estimation floor.
        let h2 = result.amplitude_at(2.0 * tone.omega).unwrap();
        assert!(h2 < 1e-5 * tone.amplitude, "h2 = {h2:.3e}");
    }

    #[test]
    fn budget_exceeded_for_huge_lines() {
        let line = linear_line(4000);
        let tone = DriveTone {
            omega: 5e10,
            amplitude: 1e-4,
        };
        let config = OracleConfig {
            budget_cell_steps: 1e6,
            ..Default::default()
        };
        assert!(matches!(
            time_domain_oracle(&line, &[tone], 1e-7, 0.0, &config),
            Err(MixingError::BudgetExceeded { .. })
        ));
    }

    #[test]
    fn too_short_duration_is_not_steady() {
        let line = linear_line(256);
        let tone = DriveTone {
            omega: 5e10,
            amplitude: 1e-4,
        };
        // One transit takes ~0.5 ns; half a nanosecond of record cannot be
        // settled.
        let err = time_domain_oracle(&line, &[tone], 5e-10, 0.0, &OracleConfig::default());
        assert!(
            matches!(err, Err(MixingError::NotSteady(_))),
            "expected NotSteady, got {err:?}"
        );
    }

    #[test]
    fn dc_bias_plus_pump_generates_idler() {
        let line = LoadedLineSpec::uniform(
            UnitCell {
                l0: 100e-12,
                i_star: 0.5e-3,
                c: 40e-15,
            },
            32,
        );
        let pump = DriveTone {
            omega: 3e11,
            amplitude: 5e-5,
        };
        let signal = DriveTone {
            omega: 1.2e11,
            amplitude: 2e-6,
        };
        let result =
            time_domain_oracle(&line, &[pump, signal], 4e-9, 2e-4, &OracleConfig::default())
                .expect("mixing run");
        let idler = result.amplitude_at(pump.omega - signal.omega).unwrap();
        assert!(
            idler > 10.0 * 1e-9,
            "idler line should rise above the numerical floor, got {idler:.3e} A"
        );
    }
}
