//! Conditional-independence test via feedforward-network residuals.
//!
//! The sample splits into three contiguous blocks: block 1 builds the
//! truncated (clamped-ECDF) rank transforms, block 2 trains one small
//! network per score column to regress it on the transformed controls, and
//! block 3 supplies the residual contribution rows for the statistic
//! √n₃·|mean(ε̃ᵢ ⊗ δ̃ᵢ)|∞ and its multiplier bootstrap. Default block sizes
//! are n₁ = ⌊n/3⌋ and n₂ = ⌊n/2⌋; the third block is the remainder, a fixed
//! size, or the size chosen by the parametric-bootstrap sweep in
//! [`select_n3`], which simulates the whole pipeline and picks the size
//! whose simulated rejection rate is closest to the nominal level.

use ndarray::{s, Array2};
use rayon::prelude::*;

use crate::bootstrap::{self, MultiplierKind};
use crate::data::DataMatrix;
use crate::error::{Error, Result};
use crate::fnn::{self, FnnConfig, FnnModel};
use crate::gaussianize::{self, GaussianizeOptions};
use crate::ind::{aggregate_for, max_abs_entry};
use crate::normal;
use crate::report::TestReport;
use crate::stream::{mix, RandomStream};

const TAG_FNN_X: u64 = 0x666e_6e78;
const TAG_FNN_Y: u64 = 0x666e_6e79;
const TAG_ALG1: u64 = 0x616c_6731;
const TAG_SHUFFLE: u64 = 0x7368_7566;

/// Disjoint index blocks of one sample split.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitPlan {
    pub d1: std::ops::Range<usize>,
    pub d2: std::ops::Range<usize>,
    pub d3: std::ops::Range<usize>,
}

impl SplitPlan {
    /// Contiguous default split: d1 = ⌊n/3⌋ rows, d2 = ⌊n/2⌋ rows, d3 the
    /// first `n3` rows of the remainder.
    pub fn contiguous(n: usize, n3: usize) -> Result<Self> {
        let n1 = n / 3;
        let n2 = n / 2;
        let rem = n - n1 - n2;
        if n3 == 0 || n3 > rem {
            return Err(Error::config(format!(
                "n3 must lie in [1, {rem}] for n={n}, got {n3}"
            )));
        }
        Ok(SplitPlan {
            d1: 0..n1,
            d2: n1..n1 + n2,
            d3: n1 + n2..n1 + n2 + n3,
        })
    }

    pub fn n1(&self) -> usize {
        self.d1.len()
    }

    pub fn n2(&self) -> usize {
        self.d2.len()
    }

    pub fn n3(&self) -> usize {
        self.d3.len()
    }
}

/// How the third split is sized.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum N3Mode {
    /// Remainder for n >= 200, otherwise Algorithm-1 with B = 500.
    Auto,
    /// n₃ = n - n₁ - n₂.
    Remainder,
    Fixed(usize),
    /// Parametric-bootstrap selection with B repetitions.
    Algorithm1 { repetitions: usize },
}

/// Network training settings shared by the main fit and Algorithm-1 refits.
#[derive(Debug, Clone)]
pub struct FnnSettings {
    pub outer_units: usize,
    pub order: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub init_scale: f64,
    /// Overrides the default (log n)·√(log(d̃·n)) truncation level.
    pub beta_trunc_override: Option<f64>,
}

impl Default for FnnSettings {
    fn default() -> Self {
        FnnSettings {
            outer_units: 32,
            order: 1,
            epochs: 500,
            learning_rate: 1e-3,
            batch_size: 32,
            init_scale: 1.0,
            beta_trunc_override: None,
        }
    }
}

impl FnnSettings {
    fn config(&self, beta: f64, seed: u64) -> FnnConfig {
        FnnConfig {
            outer_units: self.outer_units,
            order: self.order,
            beta_trunc: beta,
            epochs: self.epochs,
            learning_rate: self.learning_rate,
            batch_size: self.batch_size,
            init_scale: self.init_scale,
            seed,
        }
    }
}

/// Algorithm-1 tuning.
#[derive(Debug, Clone)]
pub struct Algorithm1Config {
    /// Bootstrap draws per (repetition, candidate-size) critical value.
    pub n_boot: usize,
    /// Evaluate candidate sizes 1, 1+stride, 1+2·stride, ….
    pub stride: usize,
    /// Warn and coarsen the candidate grid once B·(p+q) refits exceed this.
    pub refit_budget: usize,
}

impl Default for Algorithm1Config {
    fn default() -> Self {
        Algorithm1Config {
            n_boot: 200,
            stride: 1,
            refit_budget: 20_000,
        }
    }
}

/// Tuning knobs for [`ci_fnn_test_with`].
#[derive(Debug, Clone)]
pub struct CiFnnOptions {
    pub fnn: FnnSettings,
    /// Use every row for all three steps (no sample split).
    pub no_split: bool,
    /// Opt-in seeded row shuffle before splitting.
    pub shuffle: bool,
    /// Debug hook: force f̂ = ĝ = 0 instead of training.
    pub zero_function_hook: bool,
    pub algorithm1: Algorithm1Config,
    pub memory_budget_entries: usize,
    pub gaussianize: GaussianizeOptions,
}

impl Default for CiFnnOptions {
    fn default() -> Self {
        CiFnnOptions {
            fnn: FnnSettings::default(),
            no_split: false,
            shuffle: false,
            zero_function_hook: false,
            algorithm1: Algorithm1Config::default(),
            memory_budget_entries: 200_000_000,
            gaussianize: GaussianizeOptions::default(),
        }
    }
}

/// Residuals of the network regressions on the statistic block.
#[derive(Debug, Clone)]
pub struct FnnResiduals {
    /// n₃×p residuals ε̃.
    pub eps_tilde: Array2<f64>,
    /// n₃×q residuals δ̃.
    pub delta_tilde: Array2<f64>,
    pub models_x: Vec<FnnModel>,
    pub models_y: Vec<FnnModel>,
}

/// Full outcome of the CI-FNN test, including the chosen split size and the
/// Algorithm-1 rejection curve when the selection ran.
#[derive(Debug, Clone)]
pub struct CiFnnOutcome {
    pub report: TestReport,
    pub split: SplitPlan,
    /// (candidate n₃, simulated rejection rate) pairs from Algorithm 1.
    pub n3_curve: Option<Vec<(usize, f64)>>,
}

/// Conditional-independence test of x ⊥ y given z with network residuals.
#[allow(clippy::too_many_arguments)]
pub fn ci_fnn_test(
    x: &DataMatrix,
    y: &DataMatrix,
    z: &DataMatrix,
    multiplier: MultiplierKind,
    n_draws: usize,
    alpha: f64,
    n3_mode: N3Mode,
    seed: u64,
) -> Result<TestReport> {
    ci_fnn_test_with(
        x,
        y,
        z,
        multiplier,
        n_draws,
        alpha,
        n3_mode,
        seed,
        &CiFnnOptions::default(),
    )
    .map(|outcome| outcome.report)
}

#[allow(clippy::too_many_arguments)]
pub fn ci_fnn_test_with(
    x: &DataMatrix,
    y: &DataMatrix,
    z: &DataMatrix,
    multiplier: MultiplierKind,
    n_draws: usize,
    alpha: f64,
    n3_mode: N3Mode,
    seed: u64,
    opts: &CiFnnOptions,
) -> Result<CiFnnOutcome> {
    let n = x.n();
    if y.n() != n || z.n() != n {
        return Err(Error::shape(format!(
            "blocks disagree on n: x={}, y={}, z={}",
            x.n(),
            y.n(),
            z.n()
        )));
    }
    if z.k() == 0 {
        return Err(Error::config(
            "ci-fnn needs at least one control column; use the independence test instead",
        ));
    }
    if !opts.no_split && n < 12 {
        return Err(Error::config(format!(
            "the three-way split needs n >= 12, got {n} (or use the full-sample mode)"
        )));
    }

    let (x, y, z) = if opts.shuffle {
        let perm = shuffled_rows(n, seed);
        (
            x.select_rows(&perm),
            y.select_rows(&perm),
            z.select_rows(&perm),
        )
    } else {
        (x.clone(), y.clone(), z.clone())
    };

    let mut warnings = Vec::new();

    // Step 1: clamped-ECDF transforms against the reference block.
    let (n1, n2) = if opts.no_split { (n, n) } else { (n / 3, n / 2) };
    let ref_rows: Vec<usize> = (0..n1).collect();
    let (u_scores, v_scores, w_scores) = truncated_scores(&x, &y, &z, &ref_rows)?;

    // Step 2: one network per score column, trained on the middle block.
    let d2 = if opts.no_split { 0..n } else { n1..n1 + n2 };
    let d_max = x.k().max(y.k()).max(z.k());
    let beta = opts
        .fnn
        .beta_trunc_override
        .unwrap_or_else(|| fnn::default_beta_trunc(n, d_max));
    let (models_x, models_y) = if opts.zero_function_hook {
        let dims = fnn::FnnDims {
            outer_units: opts.fnn.outer_units,
            order: opts.fnn.order,
            input_dim: z.k(),
        };
        (
            (0..x.k()).map(|_| FnnModel::zero(dims, beta)).collect(),
            (0..y.k()).map(|_| FnnModel::zero(dims, beta)).collect(),
        )
    } else {
        train_models(
            &u_scores,
            &v_scores,
            &w_scores,
            d2.clone(),
            beta,
            seed,
            &opts.fnn,
        )?
    };

    // Residuals on every row; the statistic slices the third block.
    let eps_full = residual_matrix(&u_scores, &w_scores, &models_x);
    let delta_full = residual_matrix(&v_scores, &w_scores, &models_y);

    // Step 3: size and take the statistic block.
    let mut n3_curve = None;
    let (split, d3_rows) = if opts.no_split {
        (
            SplitPlan {
                d1: 0..n,
                d2: 0..n,
                d3: 0..n,
            },
            0..n,
        )
    } else {
        let rem = n - n1 - n2;
        let n3 = match n3_mode {
            N3Mode::Remainder => rem,
            N3Mode::Fixed(k) => k,
            N3Mode::Auto if n >= 200 => rem,
            N3Mode::Auto => {
                let (n3, curve, mut warns) = select_n3(
                    &SelectN3Context {
                        w_scores: &w_scores,
                        eps: &eps_full,
                        delta: &delta_full,
                        models_x: &models_x,
                        models_y: &models_y,
                        n1,
                        n2,
                        beta_trunc: beta,
                        fnn: &opts.fnn,
                    },
                    500,
                    alpha,
                    multiplier,
                    seed,
                    &opts.algorithm1,
                )?;
                warnings.append(&mut warns);
                n3_curve = Some(curve);
                n3
            }
            N3Mode::Algorithm1 { repetitions } => {
                let (n3, curve, mut warns) = select_n3(
                    &SelectN3Context {
                        w_scores: &w_scores,
                        eps: &eps_full,
                        delta: &delta_full,
                        models_x: &models_x,
                        models_y: &models_y,
                        n1,
                        n2,
                        beta_trunc: beta,
                        fnn: &opts.fnn,
                    },
                    repetitions,
                    alpha,
                    multiplier,
                    seed,
                    &opts.algorithm1,
                )?;
                warnings.append(&mut warns);
                n3_curve = Some(curve);
                n3
            }
        };
        let split = SplitPlan::contiguous(n, n3)?;
        let rows = split.d3.clone();
        (split, rows)
    };

    let eps = eps_full.slice(s![d3_rows.clone(), ..]).to_owned();
    let delta = delta_full.slice(s![d3_rows, ..]).to_owned();
    let n3 = split.n3();

    let means = bootstrap::cross_mean(eps.view(), delta.view());
    let aggregate = aggregate_for(1);
    let flat: Vec<f64> = means.iter().copied().collect();
    let statistic = (n3 as f64).sqrt() * aggregate.apply(&flat);
    let (argmax, _) = max_abs_entry(&means);

    let entries = n3 * eps.ncols() * delta.ncols();
    let draws = if entries <= opts.memory_budget_entries {
        let rows = bootstrap::kronecker_rows(eps.view(), delta.view());
        bootstrap::bootstrap_statistics(rows.view(), multiplier, n_draws, aggregate, seed)?
    } else {
        bootstrap::bootstrap_statistics_paired(
            eps.view(),
            delta.view(),
            multiplier,
            n_draws,
            aggregate,
            seed,
        )?
    };
    let cv = bootstrap::critical_value(&draws, alpha)?;
    let p_val = bootstrap::p_value(&draws, statistic);

    let report = TestReport::new(
        statistic,
        cv,
        p_val,
        alpha,
        multiplier,
        n_draws,
        aggregate.describe(),
        argmax,
        warnings,
    );
    Ok(CiFnnOutcome {
        report,
        split,
        n3_curve,
    })
}

/// Everything [`select_n3`] needs from the first two pipeline steps:
/// transformed controls, full-sample residuals, and the fitted models.
pub struct SelectN3Context<'a> {
    pub w_scores: &'a Array2<f64>,
    pub eps: &'a Array2<f64>,
    pub delta: &'a Array2<f64>,
    pub models_x: &'a [FnnModel],
    pub models_y: &'a [FnnModel],
    pub n1: usize,
    pub n2: usize,
    pub beta_trunc: f64,
    pub fnn: &'a FnnSettings,
}

/// Parametric-bootstrap selection of the statistic-block size.
///
/// Each repetition synthesizes controls and residuals as Gaussian mixtures
/// of the observed rows, rebuilds scores through the fitted models, clamps
/// them at Φ⁻¹(1 - 1/n₁), refits the networks on the middle block, and
/// records, for every candidate size ℓ̃, whether the simulated test rejects.
/// The returned size minimizes |mean rejection rate - α| (smallest candidate
/// wins ties). Also returns the (ℓ̃, rejection-rate) curve and any warnings.
pub fn select_n3(
    ctx: &SelectN3Context<'_>,
    repetitions: usize,
    alpha: f64,
    multiplier: MultiplierKind,
    seed: u64,
    config: &Algorithm1Config,
) -> Result<(usize, Vec<(usize, f64)>, Vec<String>)> {
    if repetitions == 0 {
        return Err(Error::config("Algorithm 1 needs at least one repetition"));
    }
    let n = ctx.w_scores.nrows();
    let (p, q, m) = (ctx.eps.ncols(), ctx.delta.ncols(), ctx.w_scores.ncols());
    let rem = n - ctx.n1 - ctx.n2;
    if rem == 0 {
        return Err(Error::config("no rows left for the third block"));
    }

    let mut warnings = Vec::new();
    let mut stride = config.stride.max(1);
    let refits = repetitions * (p + q);
    if refits > config.refit_budget && stride == 1 {
        stride = rem.div_ceil(25).max(2);
        warnings.push(format!(
            "Algorithm 1 would run {refits} network refits (budget {}); evaluating every {stride}-th candidate size",
            config.refit_budget
        ));
    }
    let candidates: Vec<usize> = (1..=rem).step_by(stride).collect();

    let m1 = normal::quantile(1.0 - 1.0 / ctx.n1 as f64);
    let clamp = |v: f64| v.abs().min(m1) * v.signum();
    let scale = 1.0 / (n as f64).sqrt();

    let rejections: Vec<Vec<bool>> = (0..repetitions)
        .into_par_iter()
        .map(|b| {
            let mut stream = RandomStream::new(seed, mix(TAG_ALG1, b as u64));

            // Gaussian-mixture surrogates of controls and residuals.
            let mixture = |rows: &Array2<f64>, stream: &mut RandomStream| -> Array2<f64> {
                let k = rows.ncols();
                let mut out = Array2::zeros((n, k));
                for i in 0..n {
                    for source in 0..n {
                        let weight = stream.standard_normal() * scale;
                        for c in 0..k {
                            out[[i, c]] += weight * rows[[source, c]];
                        }
                    }
                }
                out
            };
            let w_b = mixture(ctx.w_scores, &mut stream);
            let eps_b = mixture(ctx.eps, &mut stream);
            let delta_b = mixture(ctx.delta, &mut stream);

            // Scores through the fitted functions, plus surrogate noise,
            // clamped like the rank scores.
            let mut u_b = Array2::zeros((n, p));
            let mut v_b = Array2::zeros((n, q));
            let mut w_clamped = Array2::zeros((n, m));
            for i in 0..n {
                let w_row: Vec<f64> = w_b.row(i).to_vec();
                for j in 0..p {
                    u_b[[i, j]] = clamp(fnn::forward(&ctx.models_x[j], &w_row) + eps_b[[i, j]]);
                }
                for c in 0..q {
                    v_b[[i, c]] = clamp(fnn::forward(&ctx.models_y[c], &w_row) + delta_b[[i, c]]);
                }
                for l in 0..m {
                    w_clamped[[i, l]] = clamp(w_b[[i, l]]);
                }
            }

            // Refit networks on the middle block of the surrogate data.
            let d2 = ctx.n1..ctx.n1 + ctx.n2;
            let (models_x_b, models_y_b) = train_models(
                &u_b,
                &v_b,
                &w_clamped,
                d2,
                ctx.beta_trunc,
                mix(seed, mix(TAG_ALG1, b as u64)),
                ctx.fnn,
            )
            .expect("surrogate training");

            // Residual products on the tail rows.
            let tail = ctx.n1 + ctx.n2..n;
            let eps_tail = residual_rows(&u_b, &w_clamped, &models_x_b, tail.clone());
            let delta_tail = residual_rows(&v_b, &w_clamped, &models_y_b, tail);

            candidates
                .iter()
                .map(|&l| {
                    let e = eps_tail.slice(s![..l, ..]);
                    let d = delta_tail.slice(s![..l, ..]);
                    let means = bootstrap::cross_mean(e, d);
                    let stat = (l as f64).sqrt()
                        * means.iter().fold(0.0f64, |mx, &v| mx.max(v.abs()));
                    let rows = bootstrap::kronecker_rows(e, d);
                    let draws = bootstrap::bootstrap_statistics(
                        rows.view(),
                        multiplier,
                        config.n_boot,
                        aggregate_for(1),
                        mix(seed, mix(TAG_ALG1, (b as u64) << 20 | l as u64)),
                    )
                    .expect("surrogate bootstrap");
                    let cv = bootstrap::critical_value(&draws, alpha).expect("cv");
                    stat > cv
                })
                .collect()
        })
        .collect();

    let curve: Vec<(usize, f64)> = candidates
        .iter()
        .enumerate()
        .map(|(idx, &l)| {
            let hits = rejections.iter().filter(|r| r[idx]).count();
            (l, hits as f64 / repetitions as f64)
        })
        .collect();
    let best = argmin_curve(&curve, alpha);
    Ok((best, curve, warnings))
}

// Candidate whose rejection rate is closest to alpha; first (smallest)
// candidate wins ties, so a flat curve returns the smallest size.
fn argmin_curve(curve: &[(usize, f64)], alpha: f64) -> usize {
    let mut best = curve[0];
    for &(l, rate) in &curve[1..] {
        if (rate - alpha).abs() < (best.1 - alpha).abs() {
            best = (l, rate);
        }
    }
    best.0
}

fn shuffled_rows(n: usize, seed: u64) -> Vec<usize> {
    let mut stream = RandomStream::new(seed, TAG_SHUFFLE);
    let mut rows: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = (stream.next_u64() % (i as u64 + 1)) as usize;
        rows.swap(i, j);
    }
    rows
}

fn truncated_scores(
    x: &DataMatrix,
    y: &DataMatrix,
    z: &DataMatrix,
    ref_rows: &[usize],
) -> Result<(Array2<f64>, Array2<f64>, Array2<f64>)> {
    let x_ref = x.select_rows(ref_rows);
    let y_ref = y.select_rows(ref_rows);
    let z_ref = z.select_rows(ref_rows);
    Ok((
        gaussianize::gaussianize_truncated(x, &x_ref)?.scores,
        gaussianize::gaussianize_truncated(y, &y_ref)?.scores,
        gaussianize::gaussianize_truncated(z, &z_ref)?.scores,
    ))
}

fn train_models(
    u: &Array2<f64>,
    v: &Array2<f64>,
    w: &Array2<f64>,
    d2: std::ops::Range<usize>,
    beta: f64,
    seed: u64,
    settings: &FnnSettings,
) -> Result<(Vec<FnnModel>, Vec<FnnModel>)> {
    let w_train = w.slice(s![d2.clone(), ..]).to_owned();
    let train_block = |scores: &Array2<f64>, tag: u64| -> Result<Vec<FnnModel>> {
        (0..scores.ncols())
            .into_par_iter()
            .map(|j| {
                let targets = scores.slice(s![d2.clone(), j]).to_owned();
                let config = settings.config(beta, mix(seed, mix(tag, j as u64)));
                fnn::train(w_train.view(), targets.view(), &config)
            })
            .collect()
    };
    Ok((train_block(u, TAG_FNN_X)?, train_block(v, TAG_FNN_Y)?))
}

// scores[rows] - model(w[rows]) for each column's model.
fn residual_rows(
    scores: &Array2<f64>,
    w: &Array2<f64>,
    models: &[FnnModel],
    rows: std::ops::Range<usize>,
) -> Array2<f64> {
    let k = scores.ncols();
    let mut out = Array2::zeros((rows.len(), k));
    for (t, i) in rows.enumerate() {
        let w_row: Vec<f64> = w.row(i).to_vec();
        for (j, model) in models.iter().enumerate() {
            out[[t, j]] = scores[[i, j]] - fnn::forward(model, &w_row);
        }
    }
    out
}

fn residual_matrix(scores: &Array2<f64>, w: &Array2<f64>, models: &[FnnModel]) -> Array2<f64> {
    residual_rows(scores, w, models, 0..scores.nrows())
}

/// The statistic-block residuals and fitted models (the step-2/step-3
/// intermediate), exposed for inspection and diagnostics.
#[allow(clippy::too_many_arguments)]
pub fn fnn_residuals(
    x: &DataMatrix,
    y: &DataMatrix,
    z: &DataMatrix,
    n3: usize,
    seed: u64,
    opts: &CiFnnOptions,
) -> Result<(FnnResiduals, SplitPlan)> {
    let n = x.n();
    let split = SplitPlan::contiguous(n, n3)?;
    let ref_rows: Vec<usize> = split.d1.clone().collect();
    let (u_scores, v_scores, w_scores) = truncated_scores(x, y, z, &ref_rows)?;
    let d_max = x.k().max(y.k()).max(z.k());
    let beta = opts
        .fnn
        .beta_trunc_override
        .unwrap_or_else(|| fnn::default_beta_trunc(n, d_max));
    let (models_x, models_y) = train_models(
        &u_scores,
        &v_scores,
        &w_scores,
        split.d2.clone(),
        beta,
        seed,
        &opts.fnn,
    )?;
    let eps_tilde = residual_rows(&u_scores, &w_scores, &models_x, split.d3.clone());
    let delta_tilde = residual_rows(&v_scores, &w_scores, &models_y, split.d3.clone());
    Ok((
        FnnResiduals {
            eps_tilde,
            delta_tilde,
            models_x,
            models_y,
        },
        split,
    ))
}
