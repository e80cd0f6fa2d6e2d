use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Model values and analytic partial derivatives at one abscissa.
pub(crate) trait Model {
    fn n_params(&self) -> usize;
    /// Writes `∂f/∂p` into `grad` and returns `f`.
    fn eval(&self, x: f64, p: &[f64], grad: &mut [f64]) -> f64;
    /// Projects a trial point back into the admissible region.
    fn clamp(&self, _p: &mut [f64]) {}
}

pub(crate) struct Solution {
    pub params: Vec<f64>,
    pub errors: Vec<f64>,
    pub cost: f64,
    /// Cost after every accepted step, starting point first.
    pub history: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

pub(crate) struct Data<'a> {
    pub x: &'a [f64],
    pub y: &'a [f64],
    pub w: &'a [f64],
}

fn residuals(model: &dyn Model, data: &Data, p: &[f64], free: &[bool], jac: Option<&mut DMatrix<f64>>) -> DVector<f64> {
    let mut grad = vec![0.0; model.n_params()];
    let mut r = DVector::zeros(data.x.len());
    let cols: Vec<usize> = (0..free.len()).filter(|&k| free[k]).collect();
    match jac {
        Some(j) => {
            for i in 0..data.x.len() {
                let f = model.eval(data.x[i], p, &mut grad);
                r[i] = data.w[i] * (data.y[i] - f);
                for (c, &k) in cols.iter().enumerate() {
                    j[(i, c)] = data.w[i] * grad[k];
                }
            }
        }
        None => {
            for i in 0..data.x.len() {
                r[i] = data.w[i] * (data.y[i] - model.eval(data.x[i], p, &mut grad));
            }
        }
    }
    r
}

/// Damped Gauss-Newton with Marquardt scaling. A step is taken only when
/// it lowers the weighted sum of squares, so the cost never increases.
pub(crate) fn levenberg_marquardt(model: &dyn Model, data: &Data, start: &[f64], free: &[bool], max_iter: usize) -> Result<Solution> {
    let n_free = free.iter().filter(|&&f| f).count();
    let m = data.x.len();
    if m < n_free {
        return Err(Error::NonConvergence { iterations: 0, reason: format!("{m} points for {n_free} parameters") });
    }
    let mut p = start.to_vec();
    model.clamp(&mut p);
    let mut jac = DMatrix::zeros(m, n_free);
    let mut r = residuals(model, data, &p, free, Some(&mut jac));
    let mut cost = r.norm_squared();
    if !cost.is_finite() {
        return Err(Error::NonConvergence { iterations: 0, reason: "non-finite residuals at the starting point".into() });
    }
    let mut history = vec![cost];
    let mut lambda = 1e-3;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < max_iter {
        iterations += 1;
        let jtj = jac.transpose() * &jac;
        let g = jac.transpose() * &r;
        if g.amax() <= 1e-15 * (cost + f64::MIN_POSITIVE).sqrt() * jtj.diagonal().amax().sqrt() || cost == 0.0 {
            converged = true;
            break;
        }
        let mut improved = false;
        while lambda < 1e16 {
            let mut a = jtj.clone();
            for k in 0..n_free {
                a[(k, k)] += lambda * jtj[(k, k)].max(1e-300);
            }
            let Some(step) = a.cholesky().map(|c| c.solve(&g)) else {
                lambda *= 4.0;
                continue;
            };
            let mut trial = p.clone();
            for (c, k) in (0..free.len()).filter(|&k| free[k]).enumerate() {
                trial[k] += step[c];
            }
            model.clamp(&mut trial);
            let rt = residuals(model, data, &trial, free, None);
            let ct = rt.norm_squared();
            if ct.is_finite() && ct < cost {
                let rel = (cost - ct) / cost;
                let small_step = (0..free.len())
                    .filter(|&k| free[k])
                    .all(|k| (trial[k] - p[k]).abs() <= 1e-12 * (p[k].abs() + 1e-300));
                p = trial;
                r = residuals(model, data, &p, free, Some(&mut jac));
                cost = ct;
                history.push(ct);
                lambda = (lambda / 3.0).max(1e-12);
                improved = true;
                if rel < 1e-14 || small_step {
                    converged = true;
                }
                break;
            }
            lambda *= 4.0;
        }
        if converged {
            break;
        }
        if !improved {
            // no descent direction left: at a minimum to machine precision
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NonConvergence { iterations, reason: "iteration limit reached".into() });
    }
    let jtj = jac.transpose() * &jac;
    let cov = jtj.clone().try_inverse().filter(|c| c.iter().all(|v| v.is_finite()));
    let Some(cov) = cov else {
        return Err(Error::NonConvergence { iterations, reason: "parameters are not identifiable (singular normal matrix)".into() });
    };
    // a normal matrix this ill-conditioned means some parameter is unconstrained
    let diag_ok = (0..n_free).all(|k| cov[(k, k)] >= 0.0 && cov[(k, k)] * jtj[(k, k)] < 1e12);
    if !diag_ok {
        return Err(Error::NonConvergence { iterations, reason: "parameters are not identifiable (ill-conditioned normal matrix)".into() });
    }
    let dof = (m - n_free).max(1) as f64;
    let s2 = cost / dof;
    let mut errors = vec![0.0; p.len()];
    for (c, k) in (0..free.len()).filter(|&k| free[k]).enumerate() {
        errors[k] = (cov[(c, c)] * s2).sqrt();
    }
    Ok(Solution { params: p, errors, cost, history, iterations, converged })
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Line;
    impl Model for Line {
        fn n_params(&self) -> usize {
            2
        }
        fn eval(&self, x: f64, p: &[f64], g: &mut [f64]) -> f64 {
            g[0] = 1.0;
            g[1] = x;
            p[0] + p[1] * x
        }
    }

    #[test]
    fn linear_model_in_one_step_and_errors_match_ols() {
        let x: Vec<f64> = (0..20).map(|i| i as f64).collect();
        let noise = [0.1, -0.2, 0.05, 0.3, -0.1];
        let y: Vec<f64> = x.iter().enumerate().map(|(i, &t)| 1.0 + 2.0 * t + noise[i % 5]).collect();
        let w = vec![1.0; 20];
        let s = levenberg_marquardt(&Line, &Data { x: &x, y: &y, w: &w }, &[0.0, 0.0], &[true, true], 100).unwrap();
        // closed-form slope error σ/√Σ(x−x̄)²
        let xm = 9.5;
        let sxx: f64 = x.iter().map(|t| (t - xm).powi(2)).sum();
        let sigma = (s.cost / 18.0).sqrt();
        assert!((s.errors[1] - sigma / sxx.sqrt()).abs() < 1e-9);
        assert!((s.params[1] - 2.0).abs() < 0.02);
    }

    #[test]
    fn fixed_parameters_stay_put() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y = [1.0, 3.0, 5.0, 7.0];
        let w = [1.0; 4];
        let s = levenberg_marquardt(&Line, &Data { x: &x, y: &y, w: &w }, &[0.5, 0.0], &[false, true], 100).unwrap();
        assert_eq!(s.params[0], 0.5);
        assert_eq!(s.errors[0], 0.0);
    }
}
