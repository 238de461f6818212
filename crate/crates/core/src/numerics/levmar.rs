//! Small dense Levenberg–Marquardt solver with box constraints.
//!
//! Sized for the fitting problems in this crate (a handful of parameters,
//! a few hundred residuals). The Jacobian is formed by forward differences
//! and the damped normal equations are solved by Gaussian elimination with
//! partial pivoting.

/// Outcome of a converged solve.
#[derive(Debug, Clone)]
pub struct LevMarResult {
    pub params: Vec<f64>,
    /// Sum of squared residuals at the solution.
    pub cost: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LevMarError {
    /// Iteration cap reached without meeting the convergence criteria.
    IterationCap(usize),
    /// The damped normal equations became singular.
    Singular,
}

pub struct LevMar {
    pub max_iterations: usize,
    /// Relative cost-reduction threshold for convergence.
    pub cost_tol: f64,
    /// Infinity-norm threshold on the gradient for convergence.
    pub grad_tol: f64,
}

impl Default for LevMar {
    fn default() -> Self {
        Self {
            max_iterations: 200,
            cost_tol: 1e-14,
            grad_tol: 1e-14,
        }
    }
}

impl LevMar {
    /// Minimizes `|r(p)|^2` over `p` within `[lo, hi]` boxes, starting at `p0`.
    pub fn solve<F>(
        &self,
        p0: &[f64],
        lo: &[f64],
        hi: &[f64],
        mut residuals: F,
    ) -> Result<LevMarResult, LevMarError>
    where
        F: FnMut(&[f64]) -> Vec<f64>,
    {
        let np = p0.len();
        let mut p: Vec<f64> = p0
            .iter()
            .zip(lo.iter().zip(hi))
            .map(|(&v, (&l, &h))| v.clamp(l, h))
            .collect();
        let mut r = residuals(&p);
        let mut cost: f64 = r.iter().map(|v| v * v).sum();
        let mut lambda = 1e-3;

        for iter in 0..self.max_iterations {
            let iterations = iter + 1;
            // Forward-difference Jacobian, column per parameter.
            let nr = r.len();
            let mut jac = vec![vec![0.0; np]; nr];
            for j in 0..np {
                let step = 1e-7 * p[j].abs().max(1e-9);
                let mut pj = p.clone();
                pj[j] = (p[j] + step).min(hi[j]);
                let actual = pj[j] - p[j];
                if actual == 0.0 {
                    // Pinned at the upper bound; probe downward instead.
                    pj[j] = p[j] - step;
                    let rj = residuals(&pj);
                    for i in 0..nr {
                        jac[i][j] = (r[i] - rj[i]) / step;
                    }
                    continue;
                }
                let rj = residuals(&pj);
                for i in 0..nr {
                    jac[i][j] = (rj[i] - r[i]) / actual;
                }
            }

            // g = J^T r, h = J^T J
            let mut g = vec![0.0; np];
            let mut h = vec![vec![0.0; np]; np];
            for i in 0..nr {
                for j in 0..np {
                    g[j] += jac[i][j] * r[i];
                    for k in j..np {
                        h[j][k] += jac[i][j] * jac[i][k];
                    }
                }
            }
            for j in 0..np {
                for k in 0..j {
                    h[j][k] = h[k][j];
                }
            }

            let gmax = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if gmax < self.grad_tol {
                return Ok(LevMarResult {
                    params: p,
                    cost,
                    iterations,
                });
            }

            // Try damped steps, inflating lambda until the cost drops.
            let mut stepped = false;
            for _ in 0..30 {
                let mut a = h.clone();
                for j in 0..np {
                    a[j][j] += lambda * h[j][j].max(1e-30);
                }
                let rhs: Vec<f64> = g.iter().map(|v| -v).collect();
                let delta = match solve_dense(a, rhs) {
                    Some(d) => d,
                    None => return Err(LevMarError::Singular),
                };
                let p_new: Vec<f64> = p
                    .iter()
                    .zip(delta.iter())
                    .zip(lo.iter().zip(hi))
                    .map(|((&v, &d), (&l, &h))| (v + d).clamp(l, h))
                    .collect();
                let r_new = residuals(&p_new);
                let cost_new: f64 = r_new.iter().map(|v| v * v).sum();
                if cost_new < cost {
                    let rel_drop = (cost - cost_new) / cost.max(1e-300);
                    p = p_new;
                    r = r_new;
                    cost = cost_new;
                    lambda = (lambda * 0.3).max(1e-12);
                    stepped = true;
                    if rel_drop < self.cost_tol {
                        return Ok(LevMarResult {
                            params: p,
                            cost,
                            iterations,
                        });
                    }
                    break;
                }
                lambda *= 10.0;
                if lambda > 1e12 {
                    break;
                }
            }
            if !stepped {
                // No downhill step found at any damping: local minimum.
                return Ok(LevMarResult {
                    params: p,
                    cost,
                    iterations,
                });
            }
        }
        Err(LevMarError::IterationCap(self.max_iterations))
    }
}

/// Gaussian elimination with partial pivoting for small dense systems.
fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| {
            a[i][col]
                .abs()
                .partial_cmp(&a[j][col].abs())
                .unwrap_or(std::cmp::Ordering::Equal)
        })?;
        if a[pivot][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut s = b[row];
        for k in row + 1..n {
            s -= a[row][k] * x[k];
        }
        x[row] = s / a[row][row];
    }
    Some(x)
}
