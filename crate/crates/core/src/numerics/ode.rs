//! Adaptive Dormand–Prince 5(4) integrator with optional dense sampling.
//!
//! Dense output is produced by cubic Hermite interpolation over each accepted
//! step, which is enough for the spectral post-processing done on ladder
//! simulations (the step controller keeps steps well inside one oscillation
//! period).

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum OdeError {
    /// Step size fell below `h_min` while trying to meet the tolerance.
    StepUnderflow,
    /// Step budget exhausted before reaching the end time.
    TooManySteps,
}

pub struct Rk45 {
    pub rtol: f64,
    pub atol: f64,
    pub h_initial: f64,
    pub h_min: f64,
    /// Hard cap on the step size; keeps unexcited high-frequency modes of
    /// large oscillatory systems inside the explicit stability region.
    pub h_max: f64,
    pub max_steps: usize,
}

impl Default for Rk45 {
    fn default() -> Self {
        Self {
            rtol: 1e-8,
            atol: 1e-12,
            h_initial: 1e-3,
            h_min: 1e-16,
            h_max: f64::INFINITY,
            max_steps: 50_000_000,
        }
    }
}

const A: [[f64; 6]; 6] = [
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const C: [f64; 6] = [1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
// Difference between the 5th-order and embedded 4th-order weights.
const E: [f64; 7] = [
    35.0 / 384.0 - 5179.0 / 57600.0,
    0.0,
    500.0 / 1113.0 - 7571.0 / 16695.0,
    125.0 / 192.0 - 393.0 / 640.0,
    -2187.0 / 6784.0 + 92097.0 / 339200.0,
    11.0 / 84.0 - 187.0 / 2100.0,
    -1.0 / 40.0,
];

impl Rk45 {
    /// Integrates `dy/dt = f(t, y)` from `t0` to `t1`, returning the final state.
    pub fn integrate<F>(&self, f: F, t0: f64, t1: f64, y0: &[f64]) -> Result<Vec<f64>, OdeError>
    where
        F: FnMut(f64, &[f64], &mut [f64]),
    {
        self.integrate_observed(f, t0, t1, y0, |_, _, _, _, _, _| {})
    }

    /// As [`integrate`](Self::integrate), invoking `observe` after every
    /// accepted step with `(t_prev, y_prev, dy_prev, t_new, y_new, dy_new)`.
    /// The observer can reconstruct the solution inside the step with
    /// [`hermite`].
    pub fn integrate_observed<F, O>(
        &self,
        mut f: F,
        t0: f64,
        t1: f64,
        y0: &[f64],
        mut observe: O,
    ) -> Result<Vec<f64>, OdeError>
    where
        F: FnMut(f64, &[f64], &mut [f64]),
        O: FnMut(f64, &[f64], &[f64], f64, &[f64], &[f64]),
    {
        let n = y0.len();
        let mut t = t0;
        let mut y = y0.to_vec();
        let mut k: Vec<Vec<f64>> = (0..7).map(|_| vec![0.0; n]).collect();
        let mut ytmp = vec![0.0; n];
        let mut ynew = vec![0.0; n];

        let (k0, rest) = k.split_at_mut(1);
        f(t, &y, &mut k0[0]);
        let _ = rest;

        let mut h = self.h_initial.min(t1 - t0).min(self.h_max).max(self.h_min);
        let mut steps = 0usize;

        while t < t1 {
            if steps >= self.max_steps {
                return Err(OdeError::TooManySteps);
            }
            steps += 1;
            h = h.min(t1 - t);

            for stage in 0..6 {
                for i in 0..n {
                    let mut acc = 0.0;
                    for (j, kj) in k.iter().enumerate().take(stage + 1) {
                        acc += A[stage][j] * kj[i];
                    }
                    ytmp[i] = y[i] + h * acc;
                }
                let (head, tail) = k.split_at_mut(stage + 1);
                let _ = head;
                f(t + C[stage] * h, &ytmp, &mut tail[0]);
            }
            // 5th-order solution is the stage-6 combination (FSAL: k[6] = f at it).
            for i in 0..n {
                let mut acc = 0.0;
                for (j, kj) in k.iter().enumerate().take(6) {
                    acc += A[5][j] * kj[i];
                }
                ynew[i] = y[i] + h * acc;
            }
            // k[6] already holds f(t + h, ynew) from the last stage loop.

            let mut err_sq = 0.0;
            for i in 0..n {
                let mut e = 0.0;
                for (j, kj) in k.iter().enumerate() {
                    e += E[j] * kj[i];
                }
                e *= h;
                let scale = self.atol + self.rtol * y[i].abs().max(ynew[i].abs());
                let r = e / scale;
                err_sq += r * r;
            }
            let err = (err_sq / n as f64).sqrt();

            if err <= 1.0 {
                let t_new = t + h;
                observe(t, &y, &k[0], t_new, &ynew, &k[6]);
                t = t_new;
                std::mem::swap(&mut y, &mut ynew);
                let last = k.len() - 1;
                k.swap(0, last); // FSAL
            }

            let factor = if err == 0.0 {
                5.0
            } else {
                (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
            };
            h = (h * factor).min(self.h_max);
            if h < self.h_min {
                return Err(OdeError::StepUnderflow);
            }
        }
        Ok(y)
    }
}

/// Cubic Hermite interpolation of `y` at `t` within `[t0, t1]`, given the
/// endpoint values and derivatives.
pub fn hermite(t: f64, t0: f64, y0: &[f64], dy0: &[f64], t1: f64, y1: &[f64], dy1: &[f64], out: &mut [f64]) {
    let h = t1 - t0;
    let s = (t - t0) / h;
    let s2 = s * s;
    let s3 = s2 * s;
    let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
    let h10 = s3 - 2.0 * s2 + s;
    let h01 = -2.0 * s3 + 3.0 * s2;
    let h11 = s3 - s2;
    for i in 0..y0.len() {
        out[i] = h00 * y0[i] + h10 * h * dy0[i] + h01 * y1[i] + h11 * h * dy1[i];
    }
}
