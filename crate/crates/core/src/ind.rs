//! Independence test between two data blocks.
//!
//! Both blocks are Gaussianized column-by-column, each observation
//! contributes the Kronecker product γ̂ᵢ = Ûᵢ ⊗ V̂ᵢ, and the statistic is
//! √n times the max-type aggregate of the mean contribution vector — i.e.
//! the largest absolute pairwise sample covariance between the score
//! coordinates, scaled by √n. The critical value comes from the multiplier
//! bootstrap on the same contribution rows.

use ndarray::{Array2, ArrayView2};

use crate::bootstrap::{
    self, Aggregate, BootstrapDraws, MultiplierKind,
};
use crate::data::DataMatrix;
use crate::error::{Error, Result};
use crate::gaussianize::{self, GaussianizeOptions, GaussianizedSample, TieReport};
use crate::report::TestReport;

/// Per-observation Kronecker contributions of a Gaussianized pair.
///
/// Row i is Ûᵢ ⊗ V̂ᵢ in row-major layout: coordinate (j,k) of the product
/// lives at flat index j·q + k, so flat indices map back to an
/// (X-coordinate, Y-coordinate) pair. The n×(p·q) matrix is materialized
/// only while p·q·n stays within a memory budget; beyond it the bootstrap
/// streams the rows one draw at a time instead.
#[derive(Debug, Clone)]
pub struct PairContribution {
    u: Array2<f64>,
    v: Array2<f64>,
    gamma: Option<Array2<f64>>,
}

impl PairContribution {
    pub fn new(u: Array2<f64>, v: Array2<f64>, budget_entries: usize) -> Result<Self> {
        if u.nrows() != v.nrows() {
            return Err(Error::shape(format!(
                "blocks disagree on n: {} vs {}",
                u.nrows(),
                v.nrows()
            )));
        }
        let entries = u.nrows() * u.ncols() * v.ncols();
        let gamma = if entries <= budget_entries {
            Some(bootstrap::kronecker_rows(u.view(), v.view()))
        } else {
            None
        };
        Ok(PairContribution { u, v, gamma })
    }

    pub fn n(&self) -> usize {
        self.u.nrows()
    }

    pub fn p(&self) -> usize {
        self.u.ncols()
    }

    pub fn q(&self) -> usize {
        self.v.ncols()
    }

    pub fn d(&self) -> usize {
        self.p() * self.q()
    }

    /// The materialized γ̂ matrix, when within budget.
    pub fn gamma(&self) -> Option<ArrayView2<'_, f64>> {
        self.gamma.as_ref().map(Array2::view)
    }

    /// Mean contribution as the p×q cross-covariance matrix of the scores.
    pub fn cross_mean(&self) -> Array2<f64> {
        bootstrap::cross_mean(self.u.view(), self.v.view())
    }

    fn bootstrap(
        &self,
        kind: MultiplierKind,
        n_draws: usize,
        aggregate: Aggregate,
        seed: u64,
    ) -> Result<BootstrapDraws> {
        match &self.gamma {
            Some(rows) => bootstrap::bootstrap_statistics(rows.view(), kind, n_draws, aggregate, seed),
            None => bootstrap::bootstrap_statistics_paired(
                self.u.view(),
                self.v.view(),
                kind,
                n_draws,
                aggregate,
                seed,
            ),
        }
    }
}

/// Index and value of the largest |column mean|, first occurrence winning
/// ties in row-major order.
pub fn max_abs_cov_index(gamma: &PairContribution) -> ((usize, usize), f64) {
    let means = gamma.cross_mean();
    max_abs_entry(&means)
}

pub(crate) fn max_abs_entry(means: &Array2<f64>) -> ((usize, usize), f64) {
    let mut best = ((0usize, 0usize), f64::NEG_INFINITY);
    for (idx, &v) in means.indexed_iter() {
        if v.abs() > best.1 {
            best = (idx, v.abs());
        }
    }
    best
}

/// Tuning knobs for [`independence_test_with`].
#[derive(Debug, Clone)]
pub struct IndependenceOptions {
    /// Materialize γ̂ only while p·q·n stays at or below this entry count.
    pub memory_budget_entries: usize,
    pub gaussianize: GaussianizeOptions,
}

impl Default for IndependenceOptions {
    fn default() -> Self {
        IndependenceOptions {
            memory_budget_entries: 200_000_000,
            gaussianize: GaussianizeOptions::default(),
        }
    }
}

/// Independence test at level `alpha` with `n_draws` bootstrap draws and a
/// top-`top_t` aggregate (`top_t = 1` is the plain max statistic).
pub fn independence_test(
    x: &DataMatrix,
    y: &DataMatrix,
    multiplier: MultiplierKind,
    n_draws: usize,
    alpha: f64,
    top_t: usize,
    seed: u64,
) -> Result<TestReport> {
    independence_test_with(
        x,
        y,
        multiplier,
        n_draws,
        alpha,
        top_t,
        seed,
        &IndependenceOptions::default(),
    )
}

#[allow(clippy::too_many_arguments)]
pub fn independence_test_with(
    x: &DataMatrix,
    y: &DataMatrix,
    multiplier: MultiplierKind,
    n_draws: usize,
    alpha: f64,
    top_t: usize,
    seed: u64,
    opts: &IndependenceOptions,
) -> Result<TestReport> {
    if x.n() != y.n() {
        return Err(Error::shape(format!(
            "x has {} rows but y has {}",
            x.n(),
            y.n()
        )));
    }
    let gx = gaussianize::gaussianize_full_with(x, &opts.gaussianize)?;
    let gy = gaussianize::gaussianize_full_with(y, &opts.gaussianize)?;
    let mut warnings = Vec::new();
    push_tie_warnings(&mut warnings, "x", &gx);
    push_tie_warnings(&mut warnings, "y", &gy);

    let pair = PairContribution::new(gx.scores, gy.scores, opts.memory_budget_entries)?;
    let aggregate = aggregate_for(top_t);

    let means = pair.cross_mean();
    let flat: Vec<f64> = means.iter().copied().collect();
    let statistic = (pair.n() as f64).sqrt() * aggregate.apply(&flat);
    let (argmax, _) = max_abs_entry(&means);

    let draws = pair.bootstrap(multiplier, n_draws, aggregate, seed)?;
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

pub(crate) fn aggregate_for(top_t: usize) -> Aggregate {
    if top_t <= 1 {
        Aggregate::MaxAbs
    } else {
        Aggregate::TopTSum(top_t)
    }
}

pub(crate) fn push_tie_warnings(
    warnings: &mut Vec<String>,
    block: &str,
    sample: &GaussianizedSample,
) {
    for TieReport { column, tied_groups } in &sample.ties {
        warnings.push(format!(
            "{block} column {column} has {tied_groups} tied group(s); ranks share the maximal position"
        ));
    }
}
