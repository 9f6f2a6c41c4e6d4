//! Conditional-independence test via linear (Lasso) residuals.
//!
//! All three blocks are Gaussianized on the full sample; every Û and V̂
//! column is regressed on Ŵ by a Lasso with its own cross-validated penalty;
//! and the independence machinery runs on the residual pair: the statistic
//! is √n times the largest absolute entry of the mean of η̂ᵢ = ε̂ᵢ ⊗ δ̂ᵢ,
//! calibrated by the multiplier bootstrap on the η̂ rows.
//!
//! An empty control block (m = 0) is accepted and degenerates to the
//! unconditional independence test: every fit is empty and the residuals are
//! the scores themselves.

use ndarray::Array2;
use rayon::prelude::*;

use crate::bootstrap::{self, MultiplierKind};
use crate::data::DataMatrix;
use crate::error::{Error, Result};
use crate::gaussianize::{self, GaussianizeOptions};
use crate::ind::{aggregate_for, max_abs_entry, push_tie_warnings};
use crate::lasso::{self, LassoFit};
use crate::report::TestReport;
use crate::stream;

// Stream-index tags for per-column cross-validation shuffles.
const TAG_LASSO_X: u64 = 0x6c61_7373_6f78;
const TAG_LASSO_Y: u64 = 0x6c61_7373_6f79;

/// Residuals of the score regressions, with per-column fit records.
#[derive(Debug, Clone)]
pub struct ResidualPair {
    /// n×p residuals ε̂ of the Û columns on Ŵ.
    pub eps: Array2<f64>,
    /// n×q residuals δ̂ of the V̂ columns on Ŵ.
    pub delta: Array2<f64>,
    pub fits_x: Vec<LassoFit>,
    pub fits_y: Vec<LassoFit>,
}

/// Tuning knobs for [`ci_lasso_test_with`].
#[derive(Debug, Clone)]
pub struct CiLassoOptions {
    pub folds: usize,
    pub grid_size: usize,
    pub memory_budget_entries: usize,
    pub gaussianize: GaussianizeOptions,
}

impl Default for CiLassoOptions {
    fn default() -> Self {
        CiLassoOptions {
            folds: 10,
            grid_size: 100,
            memory_budget_entries: 200_000_000,
            gaussianize: GaussianizeOptions::default(),
        }
    }
}

/// Conditional-independence test of x ⊥ y given z.
///
/// `lambda_override` skips cross-validation and fits every column at the
/// given penalty (0 gives least-squares residuals when m < n).
#[allow(clippy::too_many_arguments)]
pub fn ci_lasso_test(
    x: &DataMatrix,
    y: &DataMatrix,
    z: &DataMatrix,
    multiplier: MultiplierKind,
    n_draws: usize,
    alpha: f64,
    seed: u64,
    lambda_override: Option<f64>,
) -> Result<TestReport> {
    ci_lasso_test_with(
        x,
        y,
        z,
        multiplier,
        n_draws,
        alpha,
        seed,
        lambda_override,
        &CiLassoOptions::default(),
    )
}

#[allow(clippy::too_many_arguments)]
pub fn ci_lasso_test_with(
    x: &DataMatrix,
    y: &DataMatrix,
    z: &DataMatrix,
    multiplier: MultiplierKind,
    n_draws: usize,
    alpha: f64,
    seed: u64,
    lambda_override: Option<f64>,
    opts: &CiLassoOptions,
) -> Result<TestReport> {
    let n = x.n();
    if y.n() != n || z.n() != n {
        return Err(Error::shape(format!(
            "blocks disagree on n: x={}, y={}, z={}",
            x.n(),
            y.n(),
            z.n()
        )));
    }

    let gx = gaussianize::gaussianize_full_with(x, &opts.gaussianize)?;
    let gy = gaussianize::gaussianize_full_with(y, &opts.gaussianize)?;
    let mut warnings = Vec::new();
    push_tie_warnings(&mut warnings, "x", &gx);
    push_tie_warnings(&mut warnings, "y", &gy);

    let w_scores = if z.k() == 0 {
        Array2::zeros((n, 0))
    } else {
        let gz = gaussianize::gaussianize_full_with(z, &opts.gaussianize)?;
        push_tie_warnings(&mut warnings, "z", &gz);
        gz.scores
    };

    let residuals = fit_residuals(
        &gx.scores,
        &gy.scores,
        &w_scores,
        seed,
        lambda_override,
        opts,
    )?;
    for (block, fits) in [("x", &residuals.fits_x), ("y", &residuals.fits_y)] {
        for (col, fit) in fits.iter().enumerate() {
            if !fit.converged {
                warnings.push(format!(
                    "{block} column {col}: lasso hit the sweep cap before converging"
                ));
            }
        }
    }

    let means = bootstrap::cross_mean(residuals.eps.view(), residuals.delta.view());
    let aggregate = aggregate_for(1);
    let flat: Vec<f64> = means.iter().copied().collect();
    let statistic = (n as f64).sqrt() * aggregate.apply(&flat);
    let (argmax, _) = max_abs_entry(&means);

    let entries = n * residuals.eps.ncols() * residuals.delta.ncols();
    let draws = if entries <= opts.memory_budget_entries {
        let rows = bootstrap::kronecker_rows(residuals.eps.view(), residuals.delta.view());
        bootstrap::bootstrap_statistics(rows.view(), multiplier, n_draws, aggregate, seed)?
    } else {
        bootstrap::bootstrap_statistics_paired(
            residuals.eps.view(),
            residuals.delta.view(),
            multiplier,
            n_draws,
            aggregate,
            seed,
        )?
    };
    let cv = bootstrap::critical_value(&draws, alpha)?;
    let p = bootstrap::p_value(&draws, statistic);

    Ok(TestReport::new(
        statistic,
        cv,
        p,
        alpha,
        multiplier,
        n_draws,
        aggregate.describe(),
        argmax,
        warnings,
    ))
}

/// Per-column Lasso fits of the score blocks on the control scores, and the
/// resulting residual matrices.
pub fn fit_residuals(
    u: &Array2<f64>,
    v: &Array2<f64>,
    w: &Array2<f64>,
    seed: u64,
    lambda_override: Option<f64>,
    opts: &CiLassoOptions,
) -> Result<ResidualPair> {
    let fits_x = fit_block(u, w, seed, TAG_LASSO_X, lambda_override, opts)?;
    let fits_y = fit_block(v, w, seed, TAG_LASSO_Y, lambda_override, opts)?;
    let eps = residual_matrix(u, w, &fits_x);
    let delta = residual_matrix(v, w, &fits_y);
    Ok(ResidualPair {
        eps,
        delta,
        fits_x,
        fits_y,
    })
}

fn fit_block(
    responses: &Array2<f64>,
    w: &Array2<f64>,
    seed: u64,
    tag: u64,
    lambda_override: Option<f64>,
    opts: &CiLassoOptions,
) -> Result<Vec<LassoFit>> {
    (0..responses.ncols())
        .into_par_iter()
        .map(|j| {
            let y = responses.column(j);
            match lambda_override {
                Some(lambda) => lasso::lasso_fit(w.view(), y, lambda),
                None => lasso::lasso_cv(
                    w.view(),
                    y,
                    opts.folds,
                    opts.grid_size,
                    stream::mix(seed, stream::mix(tag, j as u64)),
                ),
            }
        })
        .collect()
}

// resid[i][j] = scores[i][j] - <coef_j, w_i>.
fn residual_matrix(scores: &Array2<f64>, w: &Array2<f64>, fits: &[LassoFit]) -> Array2<f64> {
    let n = scores.nrows();
    let k = scores.ncols();
    let mut out = Array2::zeros((n, k));
    for j in 0..k {
        let coef = &fits[j].coefficients;
        for i in 0..n {
            let mut pred = 0.0;
            for (l, &c) in coef.iter().enumerate() {
                pred += c * w[[i, l]];
            }
            out[[i, j]] = scores[[i, j]] - pred;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ind::independence_test;
    use crate::stream::RandomStream;
    use ndarray::Array2;

    fn random_blocks(seed: u64, n: usize, p: usize, q: usize, m: usize) -> (DataMatrix, DataMatrix, DataMatrix) {
        let mut s = RandomStream::new(seed, 0);
        let z = Array2::from_shape_fn((n, m), |_| s.standard_normal());
        let x = Array2::from_shape_fn((n, p), |(i, j)| {
            0.7 * z[[i, j % m.max(1)]] + 0.5 * s.standard_normal()
        });
        let y = Array2::from_shape_fn((n, q), |(i, k)| {
            0.4 * z[[i, k % m.max(1)]] + 0.5 * s.standard_normal()
        });
        (
            DataMatrix::new(x).unwrap(),
            DataMatrix::new(y).unwrap(),
            DataMatrix::new(z).unwrap(),
        )
    }

    #[test]
    fn all_zero_fits_reduce_to_independence_statistic() {
        let (x, y, z) = random_blocks(1, 40, 2, 3, 2);
        // A penalty at (or above) every column's λ_max zeroes every fit.
        let big_lambda = 10.0;
        let ci = ci_lasso_test(
            &x,
            &y,
            &z,
            MultiplierKind::Rademacher,
            300,
            0.05,
            5,
            Some(big_lambda),
        )
        .unwrap();
        let ind = independence_test(&x, &y, MultiplierKind::Rademacher, 300, 0.05, 1, 5).unwrap();
        assert_eq!(ci.statistic, ind.statistic);
        assert_eq!(ci.critical_value, ind.critical_value);
        assert_eq!(ci.p_value, ind.p_value);
    }

    #[test]
    fn empty_control_block_reduces_to_independence_statistic() {
        let (x, y, _) = random_blocks(2, 30, 2, 2, 1);
        let z = DataMatrix::new(Array2::zeros((30, 0))).unwrap();
        let ci =
            ci_lasso_test(&x, &y, &z, MultiplierKind::Rademacher, 300, 0.05, 5, None).unwrap();
        let ind = independence_test(&x, &y, MultiplierKind::Rademacher, 300, 0.05, 1, 5).unwrap();
        assert_eq!(ci.statistic, ind.statistic);
    }

    #[test]
    fn least_squares_residuals_are_orthogonal_to_controls() {
        let (x, y, z) = random_blocks(3, 50, 3, 2, 4);
        let gx = gaussianize::gaussianize_full(&x).unwrap();
        let gy = gaussianize::gaussianize_full(&y).unwrap();
        let gz = gaussianize::gaussianize_full(&z).unwrap();
        let res = fit_residuals(
            &gx.scores,
            &gy.scores,
            &gz.scores,
            0,
            Some(0.0),
            &CiLassoOptions::default(),
        )
        .unwrap();
        let n = 50.0;
        for j in 0..res.eps.ncols() {
            for l in 0..gz.scores.ncols() {
                let dot: f64 = (0..50).map(|i| gz.scores[[i, l]] * res.eps[[i, j]]).sum::<f64>() / n;
                assert!(dot.abs() < 1e-8, "eps col {j} vs control {l}: {dot}");
            }
        }
    }

    #[test]
    fn residuals_match_definition_exactly() {
        let (x, y, z) = random_blocks(4, 30, 2, 2, 3);
        let gx = gaussianize::gaussianize_full(&x).unwrap();
        let gy = gaussianize::gaussianize_full(&y).unwrap();
        let gz = gaussianize::gaussianize_full(&z).unwrap();
        let res = fit_residuals(
            &gx.scores,
            &gy.scores,
            &gz.scores,
            9,
            None,
            &CiLassoOptions {
                folds: 5,
                grid_size: 20,
                ..CiLassoOptions::default()
            },
        )
        .unwrap();
        for i in 0..30 {
            for j in 0..2 {
                let mut pred = 0.0;
                for (l, &c) in res.fits_x[j].coefficients.iter().enumerate() {
                    pred += c * gz.scores[[i, l]];
                }
                assert_eq!(res.eps[[i, j]], gx.scores[[i, j]] - pred);
            }
        }
    }

    #[test]
    fn full_report_is_rank_invariant() {
        let (x, y, z) = random_blocks(5, 40, 2, 2, 2);
        let r1 = ci_lasso_test(&x, &y, &z, MultiplierKind::Rademacher, 200, 0.05, 3, None).unwrap();

        let tx = DataMatrix::new(x.values().mapv(|v| v.atan())).unwrap();
        let ty = DataMatrix::new(y.values().mapv(|v| v.exp())).unwrap();
        let tz = DataMatrix::new(z.values().mapv(|v| v.powi(3))).unwrap();
        let r2 =
            ci_lasso_test(&tx, &ty, &tz, MultiplierKind::Rademacher, 200, 0.05, 3, None).unwrap();

        assert_eq!(r1.statistic, r2.statistic);
        assert_eq!(r1.p_value, r2.p_value);
        assert_eq!(r1.argmax, r2.argmax);
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let (x, y, _) = random_blocks(6, 30, 2, 2, 2);
        let (_, _, z) = random_blocks(6, 31, 2, 2, 2);
        assert!(
            ci_lasso_test(&x, &y, &z, MultiplierKind::Rademacher, 200, 0.05, 0, None).is_err()
        );
    }
}
