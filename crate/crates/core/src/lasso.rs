//! ℓ₁-penalized least squares by cyclic coordinate descent.
//!
//! The objective is
//!
//! ```text
//! (1/n) |y - Xβ|²  +  2λ |β|₁
//! ```
//!
//! with no intercept and no column standardization: the regressors this
//! crate feeds in are rank-transformed scores that already share a marginal
//! scale and have (tie-free) exact zero column means. Note the factor 2 on
//! the penalty; λ values are not interchangeable with conventions that omit
//! it.

use ndarray::{Array1, ArrayView1, ArrayView2};

use crate::error::{Error, Result};
use crate::stream::RandomStream;

const SWEEP_TOL: f64 = 1e-7;
const MAX_SWEEPS: usize = 10_000;

/// A fitted Lasso solution for one response.
#[derive(Debug, Clone)]
pub struct LassoFit {
    pub coefficients: Vec<f64>,
    pub lambda: f64,
    /// (1/n)|y - Xβ|² + 2λ|β|₁ at the solution.
    pub objective: f64,
    /// (λ, mean held-out squared error) pairs in descending-λ order when
    /// cross-validation chose the penalty; empty otherwise.
    pub cv_table: Vec<(f64, f64)>,
    /// Coordinate-descent sweeps of the final fit.
    pub iterations: usize,
    /// False when the sweep cap was hit before the update tolerance.
    pub converged: bool,
}

/// Fit at a fixed penalty.
pub fn lasso_fit(design: ArrayView2<'_, f64>, response: ArrayView1<'_, f64>, lambda: f64) -> Result<LassoFit> {
    validate_problem(design, response)?;
    if lambda < 0.0 || !lambda.is_finite() {
        return Err(Error::config(format!("lambda must be finite and >= 0, got {lambda}")));
    }
    let mut beta = vec![0.0; design.ncols()];
    let (iterations, converged) = coordinate_descent(design, response, lambda, &mut beta, None);
    let objective = objective_value(design, response, &beta, lambda);
    Ok(LassoFit {
        coefficients: beta,
        lambda,
        objective,
        cv_table: Vec::new(),
        iterations,
        converged,
    })
}

/// Fit with the penalty chosen by K-fold cross-validation over a log-spaced
/// grid of `grid_size` values on [1e-3·λ_max, λ_max]; ties prefer the larger
/// (sparser) penalty, and the final fit uses all rows at the chosen λ.
pub fn lasso_cv(
    design: ArrayView2<'_, f64>,
    response: ArrayView1<'_, f64>,
    folds: usize,
    grid_size: usize,
    seed: u64,
) -> Result<LassoFit> {
    validate_problem(design, response)?;
    let n = design.nrows();
    if folds < 2 {
        return Err(Error::config(format!("need at least 2 folds, got {folds}")));
    }
    if n < folds {
        return Err(Error::config(format!("{folds} folds need at least {folds} rows, got {n}")));
    }
    if grid_size < 2 {
        return Err(Error::config(format!("grid needs at least 2 points, got {grid_size}")));
    }

    let lambda_max = max_abs_correlation(design, response);
    if lambda_max == 0.0 {
        // Response is exactly orthogonal to every column; zero fit at λ = 0.
        let mut fit = lasso_fit(design, response, 0.0)?;
        fit.cv_table = vec![(0.0, response.iter().map(|v| v * v).sum::<f64>() / n as f64)];
        return Ok(fit);
    }
    let grid = lambda_grid(lambda_max, grid_size);

    // Seeded shuffle, then round-robin fold assignment.
    let mut order: Vec<usize> = (0..n).collect();
    let mut stream = RandomStream::new(seed, 0);
    for i in (1..n).rev() {
        let j = (stream.next_u64() % (i as u64 + 1)) as usize;
        order.swap(i, j);
    }
    let mut fold_of = vec![0usize; n];
    for (pos, &row) in order.iter().enumerate() {
        fold_of[row] = pos % folds;
    }

    let mut sq_err = vec![0.0; grid.len()];
    for fold in 0..folds {
        let train_rows: Vec<usize> = (0..n).filter(|&i| fold_of[i] != fold).collect();
        let test_rows: Vec<usize> = (0..n).filter(|&i| fold_of[i] == fold).collect();
        let train_x = design.select(ndarray::Axis(0), &train_rows);
        let train_y = response.select(ndarray::Axis(0), &train_rows);

        // Warm starts along the descending grid.
        let mut beta = vec![0.0; design.ncols()];
        for (g, &lambda) in grid.iter().enumerate() {
            coordinate_descent(train_x.view(), train_y.view(), lambda, &mut beta, None);
            for &row in &test_rows {
                let pred: f64 = design
                    .row(row)
                    .iter()
                    .zip(&beta)
                    .map(|(&x, &b)| x * b)
                    .sum();
                let err = response[row] - pred;
                sq_err[g] += err * err;
            }
        }
    }

    let cv_table: Vec<(f64, f64)> = grid
        .iter()
        .zip(&sq_err)
        .map(|(&l, &e)| (l, e / n as f64))
        .collect();

    // Grid is descending, so scanning forward and keeping strict improvement
    // resolves ties toward the larger λ.
    let mut best = 0usize;
    for (g, &(_, err)) in cv_table.iter().enumerate() {
        if err < cv_table[best].1 {
            best = g;
        }
    }
    let chosen = cv_table[best].0;

    let mut fit = lasso_fit(design, response, chosen)?;
    fit.cv_table = cv_table;
    Ok(fit)
}

/// λ_max = max_v |(1/n) Σᵢ x_{iv} yᵢ|: the smallest penalty with an all-zero
/// solution.
pub fn max_abs_correlation(design: ArrayView2<'_, f64>, response: ArrayView1<'_, f64>) -> f64 {
    let n = design.nrows() as f64;
    let mut best = 0.0f64;
    for col in design.columns() {
        let rho: f64 = col.iter().zip(response.iter()).map(|(&x, &y)| x * y).sum::<f64>() / n;
        best = best.max(rho.abs());
    }
    best
}

fn lambda_grid(lambda_max: f64, grid_size: usize) -> Vec<f64> {
    let ratio: f64 = 1e-3;
    (0..grid_size)
        .map(|i| lambda_max * ratio.powf(i as f64 / (grid_size as f64 - 1.0)))
        .collect()
}

fn validate_problem(design: ArrayView2<'_, f64>, response: ArrayView1<'_, f64>) -> Result<()> {
    let n = design.nrows();
    if n < 2 {
        return Err(Error::shape(format!("need at least 2 rows, got {n}")));
    }
    if response.len() != n {
        return Err(Error::shape(format!(
            "response has {} entries for {} design rows",
            response.len(),
            n
        )));
    }
    if design.iter().any(|v| !v.is_finite()) || response.iter().any(|v| !v.is_finite()) {
        return Err(Error::domain("design and response must be finite"));
    }
    Ok(())
}

/// Cyclic coordinate descent with residual updates; returns (sweeps,
/// converged). `beta` is used as the warm start and overwritten in place.
/// `trace`, when supplied, records the objective after every sweep.
fn coordinate_descent(
    design: ArrayView2<'_, f64>,
    response: ArrayView1<'_, f64>,
    lambda: f64,
    beta: &mut [f64],
    mut trace: Option<&mut Vec<f64>>,
) -> (usize, bool) {
    let n = design.nrows();
    let m = design.ncols();
    let inv_n = 1.0 / n as f64;

    let col_sq: Vec<f64> = design
        .columns()
        .into_iter()
        .map(|c| c.iter().map(|&v| v * v).sum::<f64>() * inv_n)
        .collect();

    // Residual for the warm start.
    let mut resid: Array1<f64> = response.to_owned();
    for (v, &b) in beta.iter().enumerate() {
        if b != 0.0 {
            let col = design.column(v);
            for (r, &x) in resid.iter_mut().zip(col.iter()) {
                *r -= x * b;
            }
        }
    }

    let mut sweeps = 0;
    loop {
        let mut max_delta = 0.0f64;
        for v in 0..m {
            if col_sq[v] == 0.0 {
                continue;
            }
            let col = design.column(v);
            let partial: f64 =
                col.iter().zip(resid.iter()).map(|(&x, &r)| x * r).sum::<f64>() * inv_n;
            let rho = partial + col_sq[v] * beta[v];
            let new = soft_threshold(rho, lambda) / col_sq[v];
            let delta = new - beta[v];
            if delta != 0.0 {
                for (r, &x) in resid.iter_mut().zip(col.iter()) {
                    *r -= x * delta;
                }
                beta[v] = new;
            }
            max_delta = max_delta.max(delta.abs());
        }
        sweeps += 1;
        if let Some(t) = trace.as_deref_mut() {
            let mse = resid.iter().map(|&r| r * r).sum::<f64>() * inv_n;
            let l1: f64 = beta.iter().map(|b| b.abs()).sum();
            t.push(mse + 2.0 * lambda * l1);
        }
        if max_delta < SWEEP_TOL {
            return (sweeps, true);
        }
        if sweeps >= MAX_SWEEPS {
            return (sweeps, false);
        }
    }
}

fn soft_threshold(z: f64, lambda: f64) -> f64 {
    if z > lambda {
        z - lambda
    } else if z < -lambda {
        z + lambda
    } else {
        0.0
    }
}

fn objective_value(
    design: ArrayView2<'_, f64>,
    response: ArrayView1<'_, f64>,
    beta: &[f64],
    lambda: f64,
) -> f64 {
    let n = design.nrows();
    let mut sse = 0.0;
    for i in 0..n {
        let pred: f64 = design.row(i).iter().zip(beta).map(|(&x, &b)| x * b).sum();
        let e = response[i] - pred;
        sse += e * e;
    }
    sse / n as f64 + 2.0 * lambda * beta.iter().map(|b| b.abs()).sum::<f64>()
}

/// KKT residual of a fit: the largest violation of the stationarity
/// conditions, which is 0 at an exact solution.
pub fn kkt_residual(
    design: ArrayView2<'_, f64>,
    response: ArrayView1<'_, f64>,
    fit: &LassoFit,
) -> f64 {
    let n = design.nrows();
    let mut resid: Vec<f64> = response.to_vec();
    for i in 0..n {
        let pred: f64 = design
            .row(i)
            .iter()
            .zip(&fit.coefficients)
            .map(|(&x, &b)| x * b)
            .sum();
        resid[i] -= pred;
    }
    let inv_n = 1.0 / n as f64;
    let mut worst = 0.0f64;
    for (v, col) in design.columns().into_iter().enumerate() {
        let grad: f64 =
            2.0 * inv_n * col.iter().zip(&resid).map(|(&x, &r)| x * r).sum::<f64>();
        let b = fit.coefficients[v];
        let violation = if b == 0.0 {
            (grad.abs() - 2.0 * fit.lambda).max(0.0)
        } else {
            (grad - 2.0 * fit.lambda * b.signum()).abs()
        };
        worst = worst.max(violation);
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array1, Array2};

    fn random_problem(seed: u64, n: usize, m: usize) -> (Array2<f64>, Array1<f64>) {
        let mut s = RandomStream::new(seed, 0);
        let x = Array2::from_shape_fn((n, m), |_| s.standard_normal());
        let y = Array1::from_shape_fn(n, |_| s.standard_normal());
        (x, y)
    }

    #[test]
    fn lambda_at_or_above_max_gives_zero_fit() {
        let (x, y) = random_problem(1, 30, 5);
        let lmax = max_abs_correlation(x.view(), y.view());
        let fit = lasso_fit(x.view(), y.view(), lmax).unwrap();
        assert!(fit.coefficients.iter().all(|&b| b == 0.0));
        let fit = lasso_fit(x.view(), y.view(), lmax * 1.5).unwrap();
        assert!(fit.coefficients.iter().all(|&b| b == 0.0));
    }

    #[test]
    fn univariate_soft_threshold_closed_form() {
        // Column with (1/n)Σx² = 1 and (1/n)Σxy = 0.8, λ = 0.3 → β = 0.5.
        let x = array![[1.0], [1.0], [-1.0], [-1.0]];
        let y = array![0.8, 0.8, -0.8, -0.8];
        let fit = lasso_fit(x.view(), y.view(), 0.3).unwrap();
        assert!((fit.coefficients[0] - 0.5).abs() < 1e-9);
        // And the sign mirrors with the response.
        let fit = lasso_fit(x.view(), (-&y).view(), 0.3).unwrap();
        assert!((fit.coefficients[0] + 0.5).abs() < 1e-9);
    }

    #[test]
    fn zero_lambda_matches_least_squares_oracle() {
        let (x, y) = random_problem(2, 5, 3);
        let fit = lasso_fit(x.view(), y.view(), 0.0).unwrap();

        // Normal equations solved independently.
        let xn = nalgebra::DMatrix::from_fn(5, 3, |i, j| x[[i, j]]);
        let yn = nalgebra::DVector::from_fn(5, |i, _| y[i]);
        let gram = xn.transpose() * &xn;
        let rhs = xn.transpose() * yn;
        let ols = gram.lu().solve(&rhs).expect("invertible Gram");
        for v in 0..3 {
            assert!((fit.coefficients[v] - ols[v]).abs() < 1e-6, "coord {v}");
        }
    }

    #[test]
    fn objective_nonincreasing_across_sweeps() {
        for seed in 0..5u64 {
            let (x, y) = random_problem(100 + seed, 40, 8);
            let mut beta = vec![0.0; 8];
            let mut trace = Vec::new();
            coordinate_descent(x.view(), y.view(), 0.05, &mut beta, Some(&mut trace));
            for w in trace.windows(2) {
                assert!(w[1] <= w[0] + 1e-12, "objective rose: {} -> {}", w[0], w[1]);
            }
        }
    }

    #[test]
    fn kkt_conditions_hold_on_random_instances() {
        for seed in 0..50u64 {
            let (x, y) = random_problem(200 + seed, 35, 7);
            let lmax = max_abs_correlation(x.view(), y.view());
            let lambda = lmax * 0.3;
            let fit = lasso_fit(x.view(), y.view(), lambda).unwrap();
            assert!(fit.converged);
            let res = kkt_residual(x.view(), y.view(), &fit);
            assert!(res <= 1e-6, "seed {seed}: KKT residual {res}");
        }
    }

    #[test]
    fn cv_recovers_strong_signal() {
        let mut s = RandomStream::new(3, 0);
        let n = 200;
        let m = 5;
        let truth = [1.0, -1.0, 0.5, 0.0, 0.0];
        let x = Array2::from_shape_fn((n, m), |_| s.standard_normal());
        let y = Array1::from_shape_fn(n, |i| {
            let signal: f64 = (0..m).map(|v| truth[v] * x[[i, v]]).sum();
            signal + 0.1 * s.standard_normal()
        });
        let fit = lasso_cv(x.view(), y.view(), 10, 100, 7).unwrap();
        for v in 0..m {
            assert!(
                (fit.coefficients[v] - truth[v]).abs() < 0.1,
                "coord {v}: {} vs {}",
                fit.coefficients[v],
                truth[v]
            );
        }
    }

    #[test]
    fn cv_on_pure_noise_prefers_heavy_penalties() {
        // Independent response: the chosen λ should land in the top quartile
        // of the grid in at least 80% of seeded runs.
        let mut hits = 0;
        let runs = 50;
        for seed in 0..runs {
            let (x, y) = random_problem(300 + seed, 50, 10);
            let fit = lasso_cv(x.view(), y.view(), 5, 40, seed).unwrap();
            let grid: Vec<f64> = fit.cv_table.iter().map(|&(l, _)| l).collect();
            // Descending grid: the top quartile is the first quarter.
            let cutoff = grid[grid.len() / 4 - 1];
            if fit.lambda >= cutoff {
                hits += 1;
            }
        }
        assert!(hits * 10 >= runs * 8, "only {hits}/{runs} in top quartile");
    }

    #[test]
    fn leave_one_out_matches_hand_loop() {
        let x = array![
            [0.5, -0.2],
            [1.0, 0.3],
            [-0.7, 0.8],
            [0.2, -1.1],
            [-0.3, 0.4],
            [0.9, -0.6]
        ];
        let y = array![0.4, 1.1, -0.2, -0.8, 0.1, 0.7];
        let folds = 6;
        let grid_size = 10;
        let fit = lasso_cv(x.view(), y.view(), folds, grid_size, 13).unwrap();

        // Hand loop: same grid, leave each row out in turn. With n == folds
        // every fold holds exactly one row regardless of the shuffle.
        let lmax = max_abs_correlation(x.view(), y.view());
        let grid = lambda_grid(lmax, grid_size);
        let mut sq = vec![0.0; grid.len()];
        for held in 0..6usize {
            let train: Vec<usize> = (0..6).filter(|&i| i != held).collect();
            let tx = x.select(ndarray::Axis(0), &train);
            let ty = y.select(ndarray::Axis(0), &train);
            for (g, &l) in grid.iter().enumerate() {
                let f = lasso_fit(tx.view(), ty.view(), l).unwrap();
                let pred: f64 = x
                    .row(held)
                    .iter()
                    .zip(&f.coefficients)
                    .map(|(&xv, &b)| xv * b)
                    .sum();
                sq[g] += (y[held] - pred).powi(2);
            }
        }
        for (g, &(_, err)) in fit.cv_table.iter().enumerate() {
            assert!(
                (err - sq[g] / 6.0).abs() < 1e-8,
                "grid point {g}: {err} vs {}",
                sq[g] / 6.0
            );
        }
    }

    #[test]
    fn config_errors() {
        let (x, y) = random_problem(4, 6, 2);
        assert!(lasso_cv(x.view(), y.view(), 7, 10, 0).is_err());
        assert!(lasso_cv(x.view(), y.view(), 1, 10, 0).is_err());
        assert!(lasso_fit(x.view(), y.view(), -0.1).is_err());
    }
}
