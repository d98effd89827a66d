//! Small dense Levenberg-Marquardt solver.
//!
//! Problems implement [`Residuals`]; the Jacobian defaults to forward finite
//! differences. An evaluation may report a point as infeasible (returns
//! `false`), in which case the step is rejected and the damping raised.

use nalgebra::{DMatrix, DVector};

pub trait Residuals {
    fn n_residuals(&self) -> usize;

    /// Fill `out` with residuals at `params`; `false` marks the point infeasible.
    fn eval(&self, params: &[f64], out: &mut [f64]) -> bool;

    /// Finite-difference step for parameter `i`.
    fn fd_step(&self, _i: usize, value: f64) -> f64 {
        1e-7 * value.abs().max(1e-2)
    }

    fn jacobian(&self, params: &[f64], residuals: &[f64], jac: &mut DMatrix<f64>) -> bool {
        forward_difference(self, params, residuals, jac)
    }
}

/// Forward-difference Jacobian, stepping backwards where the forward point is
/// infeasible.
pub fn forward_difference<P: Residuals + ?Sized>(
    problem: &P,
    params: &[f64],
    residuals: &[f64],
    jac: &mut DMatrix<f64>,
) -> bool {
    let m = residuals.len();
    let mut p = params.to_vec();
    let mut buf = vec![0.0; m];
    for i in 0..params.len() {
        let h = problem.fd_step(i, params[i]);
        p[i] = params[i] + h;
        let (ok, step) = if problem.eval(&p, &mut buf) {
            (true, h)
        } else {
            p[i] = params[i] - h;
            (problem.eval(&p, &mut buf), -h)
        };
        if !ok {
            return false;
        }
        for k in 0..m {
            jac[(k, i)] = (buf[k] - residuals[k]) / step;
        }
        p[i] = params[i];
    }
    true
}

#[derive(Debug, Clone)]
pub struct LmConfig {
    pub max_iter: usize,
    /// Stop when the relative cost reduction of an accepted step falls below this.
    pub ftol: f64,
    /// Stop when the step is this small relative to the parameters.
    pub xtol: f64,
    /// Stop when the largest gradient component falls below this.
    pub gtol: f64,
    /// Stop when the cost (sum of squares) falls below this.
    pub cost_floor: f64,
    pub initial_damping: f64,
}

impl Default for LmConfig {
    fn default() -> Self {
        Self { max_iter: 200, ftol: 1e-12, xtol: 1e-12, gtol: 1e-14, cost_floor: 1e-28, initial_damping: 1e-3 }
    }
}

#[derive(Debug, Clone)]
pub struct LmOutcome {
    pub params: Vec<f64>,
    pub residuals: Vec<f64>,
    /// Σ r².
    pub cost: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn sum_sq(r: &[f64]) -> f64 {
    r.iter().map(|x| x * x).sum()
}

/// Minimize Σ r(p)² from `start`. Returns `None` if the start itself is infeasible.
pub fn minimize<P: Residuals + ?Sized>(problem: &P, start: &[f64], config: &LmConfig) -> Option<LmOutcome> {
    let n = start.len();
    let m = problem.n_residuals();
    let mut p = start.to_vec();
    let mut r = vec![0.0; m];
    if !problem.eval(&p, &mut r) {
        return None;
    }
    let mut cost = sum_sq(&r);
    let mut jac = DMatrix::zeros(m, n);
    let mut trial = vec![0.0; n];
    let mut r_trial = vec![0.0; m];
    let mut lambda = -1.0;
    let mut nu = 2.0;
    let mut converged = false;
    let mut iterations = 0;

    'outer: while iterations < config.max_iter {
        if cost <= config.cost_floor {
            converged = true;
            break;
        }
        iterations += 1;
        if !problem.jacobian(&p, &r, &mut jac) {
            break;
        }
        let jtj = jac.tr_mul(&jac);
        let grad = jac.tr_mul(&DVector::from_column_slice(&r));
        if grad.amax() <= config.gtol {
            converged = true;
            break;
        }
        let dmax = jtj.diagonal().amax().max(f64::MIN_POSITIVE);
        let scale: Vec<f64> = jtj.diagonal().iter().map(|d| d.max(1e-12 * dmax)).collect();
        if lambda < 0.0 {
            lambda = config.initial_damping;
        }
        loop {
            let mut a = jtj.clone();
            for i in 0..n {
                a[(i, i)] += lambda * scale[i];
            }
            let step = match a.cholesky() {
                Some(ch) => ch.solve(&(-&grad)),
                None => {
                    lambda *= nu;
                    nu *= 2.0;
                    if lambda > 1e30 {
                        break 'outer;
                    }
                    continue;
                }
            };
            for i in 0..n {
                trial[i] = p[i] + step[i];
            }
            let feasible = problem.eval(&trial, &mut r_trial);
            let new_cost = if feasible { sum_sq(&r_trial) } else { f64::INFINITY };
            if new_cost.is_finite() && new_cost < cost {
                // predicted reduction for the damped model
                let mut pred = 0.0;
                for i in 0..n {
                    pred += step[i] * (lambda * scale[i] * step[i] - grad[i]);
                }
                let rho = if pred > 0.0 { (cost - new_cost) / pred } else { 1.0 };
                lambda *= (1.0 - (2.0 * rho - 1.0).powi(3)).max(1.0 / 3.0);
                nu = 2.0;
                let pnorm = p.iter().map(|x| x * x).sum::<f64>().sqrt();
                let snorm = step.norm();
                let rel = (cost - new_cost) / cost;
                std::mem::swap(&mut p, &mut trial);
                std::mem::swap(&mut r, &mut r_trial);
                cost = new_cost;
                if rel <= config.ftol || snorm <= config.xtol * (pnorm + config.xtol) {
                    converged = true;
                    break 'outer;
                }
                break;
            }
            lambda *= nu;
            nu *= 2.0;
            if lambda > 1e30 {
                // no descent direction left at working precision
                converged = true;
                break 'outer;
            }
        }
    }
    if cost <= config.cost_floor {
        converged = true;
    }
    Some(LmOutcome { params: p, residuals: r, cost, iterations, converged })
}
