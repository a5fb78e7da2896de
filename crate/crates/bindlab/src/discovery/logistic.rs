//! L1-regularized logistic regression by accelerated proximal gradient
//! descent (FISTA) with backtracking line search and function restart.
//!
//! Features are standardized to zero mean and unit variance inside the fit;
//! constant columns are dropped and keep weight zero. The intercept is not
//! penalized. Soft thresholding produces exact zeros, so sparsity can be
//! read off the weights directly.

use crate::error::{Error, Result};

const MAX_ITERATIONS: usize = 10_000;
const REL_OBJECTIVE_TOL: f64 = 1e-8;

/// A fitted model: weights on the standardized scale plus the standardizer.
#[derive(Debug, Clone, PartialEq)]
pub struct LogisticFit {
    pub weights: Vec<f64>,
    pub intercept: f64,
    pub means: Vec<f64>,
    pub sds: Vec<f64>,
    pub lambda: f64,
    pub objective: f64,
    pub iterations: usize,
}

impl LogisticFit {
    /// Count of weights with magnitude above `tol`.
    pub fn n_active(&self, tol: f64) -> usize {
        self.weights.iter().filter(|w| w.abs() > tol).count()
    }

    /// Mean log-loss on held-out rows, standardized with the training stats.
    pub fn validation_log_loss(&self, x: &[f64], n_rows: usize, n_cols: usize, y: &[u8]) -> f64 {
        debug_assert_eq!(n_cols, self.weights.len());
        let mut total = 0.0;
        for i in 0..n_rows {
            let row = &x[i * n_cols..(i + 1) * n_cols];
            let mut z = self.intercept;
            for j in 0..n_cols {
                if self.sds[j] > 0.0 {
                    z += self.weights[j] * (row[j] - self.means[j]) / self.sds[j];
                }
            }
            total += log_loss(z, y[i]);
        }
        total / n_rows as f64
    }
}

/// Numerically stable log(1 + exp(z)) - y*z.
fn log_loss(z: f64, y: u8) -> f64 {
    let y = f64::from(y);
    z.max(0.0) - z * y + (-z.abs()).exp().ln_1p()
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

struct Problem {
    xs: Vec<f64>, // standardized rows, dropped columns zeroed
    n_rows: usize,
    n_cols: usize,
    y: Vec<f64>,
    active: Vec<bool>,
}

impl Problem {
    /// Mean logistic loss and its gradient at (w, b).
    fn loss_grad(&self, w: &[f64], b: f64, grad_w: &mut [f64], grad_b: &mut f64) -> f64 {
        let n = self.n_rows as f64;
        grad_w.fill(0.0);
        *grad_b = 0.0;
        let mut loss = 0.0;
        for i in 0..self.n_rows {
            let row = &self.xs[i * self.n_cols..(i + 1) * self.n_cols];
            let mut z = b;
            for j in 0..self.n_cols {
                z += w[j] * row[j];
            }
            let yi = self.y[i];
            loss += z.max(0.0) - z * yi + (-z.abs()).exp().ln_1p();
            let resid = sigmoid(z) - yi;
            for j in 0..self.n_cols {
                grad_w[j] += resid * row[j];
            }
            *grad_b += resid;
        }
        for g in grad_w.iter_mut() {
            *g /= n;
        }
        *grad_b /= n;
        loss / n
    }

    fn loss_only(&self, w: &[f64], b: f64) -> f64 {
        let mut loss = 0.0;
        for i in 0..self.n_rows {
            let row = &self.xs[i * self.n_cols..(i + 1) * self.n_cols];
            let mut z = b;
            for j in 0..self.n_cols {
                z += w[j] * row[j];
            }
            loss += z.max(0.0) - z * self.y[i] + (-z.abs()).exp().ln_1p();
        }
        loss / self.n_rows as f64
    }
}

fn soft_threshold(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

/// Fit mean logistic loss + lambda * ||w||_1 (intercept unpenalized).
pub fn fit_l1_logistic(
    x: &[f64],
    n_rows: usize,
    n_cols: usize,
    y: &[u8],
    lambda: f64,
) -> Result<LogisticFit> {
    fit_l1_logistic_warm(x, n_rows, n_cols, y, lambda, None)
}

/// Same, warm-started from a previous solution (used along a lambda path).
pub fn fit_l1_logistic_warm(
    x: &[f64],
    n_rows: usize,
    n_cols: usize,
    y: &[u8],
    lambda: f64,
    warm: Option<(&[f64], f64)>,
) -> Result<LogisticFit> {
    if n_rows < 2 {
        return Err(Error::Input(format!("need at least 2 rows, got {n_rows}")));
    }
    if lambda < 0.0 {
        return Err(Error::Config(format!("lambda must be nonnegative, got {lambda}")));
    }
    if x.len() != n_rows * n_cols || y.len() != n_rows {
        return Err(Error::Input("feature matrix shape mismatch".into()));
    }
    let ones = y.iter().filter(|&&v| v == 1).count();
    if ones == 0 || ones == n_rows {
        return Err(Error::Input("both classes must be present".into()));
    }

    // standardize, dropping constant columns
    let mut means = vec![0.0; n_cols];
    let mut sds = vec![0.0; n_cols];
    for j in 0..n_cols {
        let mut s = 0.0;
        for i in 0..n_rows {
            s += x[i * n_cols + j];
        }
        means[j] = s / n_rows as f64;
        let mut v = 0.0;
        for i in 0..n_rows {
            let d = x[i * n_cols + j] - means[j];
            v += d * d;
        }
        sds[j] = (v / n_rows as f64).sqrt();
    }
    let active: Vec<bool> = sds.iter().map(|&s| s > 0.0).collect();
    let mut xs = vec![0.0; n_rows * n_cols];
    for i in 0..n_rows {
        for j in 0..n_cols {
            if active[j] {
                xs[i * n_cols + j] = (x[i * n_cols + j] - means[j]) / sds[j];
            }
        }
    }
    let problem = Problem {
        xs,
        n_rows,
        n_cols,
        y: y.iter().map(|&v| f64::from(v)).collect(),
        active,
    };

    let (mut w, mut b) = match warm {
        Some((w0, b0)) if w0.len() == n_cols => (w0.to_vec(), b0),
        _ => (vec![0.0; n_cols], 0.0),
    };
    // keep dropped columns at zero even when warm-started
    for j in 0..n_cols {
        if !problem.active[j] {
            w[j] = 0.0;
        }
    }

    let mut w_prev = w.clone();
    let mut b_prev = b;
    let mut yw = w.clone();
    let mut yb = b;
    let mut theta: f64 = 1.0;
    let mut lipschitz: f64 = 1.0;

    let mut grad = vec![0.0; n_cols];
    let mut grad_b = 0.0;
    let mut objective = problem.loss_only(&w, b) + lambda * l1(&w);
    let mut iterations = 0;

    for iter in 0..MAX_ITERATIONS {
        iterations = iter + 1;
        let fy = problem.loss_grad(&yw, yb, &mut grad, &mut grad_b);

        // backtracking on the smooth part
        let (mut w_new, mut b_new, mut f_new);
        loop {
            let step = 1.0 / lipschitz;
            w_new = yw.clone();
            for j in 0..n_cols {
                if problem.active[j] {
                    w_new[j] = soft_threshold(yw[j] - step * grad[j], lambda * step);
                }
            }
            b_new = yb - step * grad_b;
            f_new = problem.loss_only(&w_new, b_new);
            let mut quad = fy + 0.5 * lipschitz * (b_new - yb) * (b_new - yb)
                + grad_b * (b_new - yb);
            for j in 0..n_cols {
                let d = w_new[j] - yw[j];
                quad += grad[j] * d + 0.5 * lipschitz * d * d;
            }
            if f_new <= quad + 1e-15 || lipschitz > 1e12 {
                break;
            }
            lipschitz *= 2.0;
        }

        let new_objective = f_new + lambda * l1(&w_new);
        // function restart keeps the sequence monotone
        if new_objective > objective {
            theta = 1.0;
            yw.copy_from_slice(&w);
            yb = b;
            let rel = (objective - new_objective).abs() / objective.abs().max(1.0);
            if rel <= REL_OBJECTIVE_TOL {
                break;
            }
            continue;
        }

        let theta_new = 0.5 * (1.0 + (1.0 + 4.0 * theta * theta).sqrt());
        let momentum = (theta - 1.0) / theta_new;
        for j in 0..n_cols {
            yw[j] = w_new[j] + momentum * (w_new[j] - w_prev[j]);
        }
        yb = b_new + momentum * (b_new - b_prev);
        theta = theta_new;

        w_prev.copy_from_slice(&w);
        b_prev = b;
        w = w_new;
        b = b_new;

        let rel = (objective - new_objective).abs() / new_objective.abs().max(1.0);
        objective = new_objective;
        if rel <= REL_OBJECTIVE_TOL {
            break;
        }
    }

    Ok(LogisticFit {
        weights: w,
        intercept: b,
        means,
        sds,
        lambda,
        objective,
        iterations,
    })
}

fn l1(w: &[f64]) -> f64 {
    w.iter().map(|v| v.abs()).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn huge_lambda_zeroes_every_weight() {
        let x = [0.0, 1.0, 1.0, 0.0, 0.5, 0.5, 1.0, 1.0];
        let y = [0u8, 1, 0, 1];
        let fit = fit_l1_logistic(&x, 4, 2, &y, 1e3).unwrap();
        assert!(fit.weights.iter().all(|&w| w == 0.0));
    }

    #[test]
    fn separable_1d_gets_positive_weight() {
        let x = [-1.0, -1.0, 1.0, 1.0];
        let y = [0u8, 0, 1, 1];
        let fit = fit_l1_logistic(&x, 4, 1, &y, 0.01).unwrap();
        assert!(fit.weights[0] > 0.0, "weight {:?}", fit.weights);
    }

    #[test]
    fn solution_beats_zero_vector() {
        let x = [-1.2, -0.8, 0.9, 1.1, -1.0, 1.0];
        let y = [0u8, 0, 1, 1, 0, 1];
        let lambda = 0.05;
        let fit = fit_l1_logistic(&x, 6, 1, &y, lambda).unwrap();
        // objective at w=0, b=0 is ln 2
        let at_zero = std::f64::consts::LN_2;
        assert!(fit.objective <= at_zero + 1e-12);
    }

    #[test]
    fn single_class_rejected() {
        let x = [0.0, 1.0];
        assert!(fit_l1_logistic(&x, 2, 1, &[1, 1], 0.1).is_err());
        assert!(fit_l1_logistic(&x, 2, 1, &[0, 0], 0.1).is_err());
    }

    #[test]
    fn constant_columns_dropped() {
        // column 1 is constant, column 0 informative
        let x = [-1.0, 3.0, -0.9, 3.0, 1.0, 3.0, 1.1, 3.0];
        let y = [0u8, 0, 1, 1];
        let fit = fit_l1_logistic(&x, 4, 2, &y, 0.01).unwrap();
        assert_eq!(fit.weights[1], 0.0);
        assert!(fit.weights[0].abs() > 0.0);
    }

    #[test]
    fn warm_start_matches_cold_solution() {
        let x: Vec<f64> = (0..40).map(|i| ((i * 37 % 17) as f64 - 8.0) / 8.0).collect();
        let y: Vec<u8> = (0..20).map(|i| u8::from(x[i * 2] + 0.3 * x[i * 2 + 1] > 0.0)).collect();
        let cold = fit_l1_logistic(&x, 20, 2, &y, 0.05).unwrap();
        let prev = fit_l1_logistic(&x, 20, 2, &y, 0.2).unwrap();
        let warm =
            fit_l1_logistic_warm(&x, 20, 2, &y, 0.05, Some((&prev.weights, prev.intercept)))
                .unwrap();
        assert!((cold.objective - warm.objective).abs() < 1e-6);
        for (a, b) in cold.weights.iter().zip(&warm.weights) {
            assert!((a - b).abs() < 1e-3, "{a} vs {b}");
        }
    }
}
