//! Multiplier bootstrap machinery.
//!
//! Given per-observation contribution rows r₁,…,rₙ ∈ ℝᵈ, one bootstrap draw
//! re-weights the centered rows with i.i.d. mean-zero unit-variance
//! multipliers ϖ and aggregates
//!
//! ```text
//! ξ† = n^{-1/2} Σᵢ ϖᵢ (rᵢ - r̄),   stat = aggregate(|ξ†|).
//! ```
//!
//! The empirical critical value at level α is the ⌊Nα⌋-th largest of the N
//! draw statistics. Draw b always consumes stream `(seed, b)`, so the stats
//! vector does not depend on thread count or scheduling.
//!
//! Two computation paths produce identical draws (up to float rounding):
//! [`bootstrap_statistics`] consumes materialized rows, while
//! [`bootstrap_statistics_paired`] exploits the Kronecker structure
//! rᵢ = eᵢ ⊗ dᵢ of the tests' contribution vectors and never materializes
//! the n×d matrix, which is how oversized problems are streamed.

use ndarray::{Array2, ArrayView2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stream::RandomStream;

/// Multiplier family for the bootstrap weights.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MultiplierKind {
    Gaussian,
    /// Two-point law on (1±√5)/2 with mean 0, variance 1 and third moment 1.
    Mammen,
    Rademacher,
}

impl MultiplierKind {
    pub fn name(&self) -> &'static str {
        match self {
            MultiplierKind::Gaussian => "gaussian",
            MultiplierKind::Mammen => "mammen",
            MultiplierKind::Rademacher => "rademacher",
        }
    }
}

impl std::str::FromStr for MultiplierKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" => Ok(MultiplierKind::Gaussian),
            "mammen" => Ok(MultiplierKind::Mammen),
            "rademacher" => Ok(MultiplierKind::Rademacher),
            other => Err(Error::config(format!("unknown multiplier '{other}'"))),
        }
    }
}

/// How a d-dimensional bootstrap vector collapses to a scalar statistic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Aggregate {
    /// ℓ∞ norm: max over coordinates of the absolute value.
    MaxAbs,
    /// Sum of the T largest absolute coordinates (equals MaxAbs at T = 1).
    TopTSum(usize),
}

impl Aggregate {
    pub fn apply(&self, values: &[f64]) -> f64 {
        match *self {
            Aggregate::MaxAbs => values.iter().fold(0.0, |m, &v| m.max(v.abs())),
            Aggregate::TopTSum(t) => top_t_abs_sum(values, t),
        }
    }

    fn validate(&self, d: usize) -> Result<()> {
        if let Aggregate::TopTSum(t) = *self {
            if t == 0 {
                return Err(Error::config("top-T aggregate needs T >= 1"));
            }
            if t > d {
                return Err(Error::config(format!(
                    "top-T aggregate with T={t} exceeds dimension d={d}"
                )));
            }
        }
        Ok(())
    }

    pub fn describe(&self) -> String {
        match self {
            Aggregate::MaxAbs => "max-abs".to_string(),
            Aggregate::TopTSum(t) => format!("top-{t}-sum"),
        }
    }
}

fn top_t_abs_sum(values: &[f64], t: usize) -> f64 {
    if t == 1 {
        return values.iter().fold(0.0, |m, &v| m.max(v.abs()));
    }
    let mut abs: Vec<f64> = values.iter().map(|v| v.abs()).collect();
    let k = abs.len() - t;
    abs.select_nth_unstable_by(k, |a, b| a.partial_cmp(b).unwrap());
    abs[k..].iter().sum()
}

/// The N aggregated bootstrap statistics of one calibration run.
#[derive(Debug, Clone)]
pub struct BootstrapDraws {
    stats: Vec<f64>,
    aggregate: Aggregate,
}

impl BootstrapDraws {
    fn new(stats: Vec<f64>, aggregate: Aggregate) -> Self {
        debug_assert!(stats.iter().all(|s| s.is_finite()));
        BootstrapDraws { stats, aggregate }
    }

    pub fn n_draws(&self) -> usize {
        self.stats.len()
    }

    pub fn stats(&self) -> &[f64] {
        &self.stats
    }

    pub fn aggregate(&self) -> Aggregate {
        self.aggregate
    }
}

/// i.i.d. draws from the named multiplier family.
pub fn sample_multipliers(kind: MultiplierKind, n: usize, stream: &mut RandomStream) -> Vec<f64> {
    let mut out = Vec::with_capacity(n);
    match kind {
        MultiplierKind::Gaussian => {
            for _ in 0..n {
                out.push(stream.standard_normal());
            }
        }
        MultiplierKind::Mammen => {
            let sqrt5 = 5.0f64.sqrt();
            let upper = (1.0 + sqrt5) / 2.0;
            let lower = (1.0 - sqrt5) / 2.0;
            let p_upper = (sqrt5 - 1.0) / (2.0 * sqrt5);
            for _ in 0..n {
                out.push(if stream.uniform01() < p_upper { upper } else { lower });
            }
        }
        MultiplierKind::Rademacher => {
            for _ in 0..n {
                out.push(if stream.uniform01() < 0.5 { 1.0 } else { -1.0 });
            }
        }
    }
    out
}

const MIN_DRAWS: usize = 100;
// Draws per matmul batch on the explicit-rows path.
const BATCH: usize = 16;

/// Bootstrap statistics from materialized contribution rows (n×d).
pub fn bootstrap_statistics(
    rows: ArrayView2<'_, f64>,
    kind: MultiplierKind,
    n_draws: usize,
    aggregate: Aggregate,
    seed: u64,
) -> Result<BootstrapDraws> {
    let (n, d) = rows.dim();
    validate_draw_config(n, d, n_draws, aggregate)?;

    let mean = rows.mean_axis(Axis(0)).unwrap();
    let centered = &rows - &mean.broadcast((n, d)).unwrap();
    let scale = 1.0 / (n as f64).sqrt();

    let n_batches = n_draws.div_ceil(BATCH);
    let stats: Vec<f64> = (0..n_batches)
        .into_par_iter()
        .flat_map_iter(|batch| {
            let lo = batch * BATCH;
            let hi = (lo + BATCH).min(n_draws);
            let width = hi - lo;
            let mut weights = Array2::zeros((n, width));
            for (c, b) in (lo..hi).enumerate() {
                let mut stream = RandomStream::new(seed, b as u64);
                let w = sample_multipliers(kind, n, &mut stream);
                for (i, &wi) in w.iter().enumerate() {
                    weights[[i, c]] = wi;
                }
            }
            // (d×n)·(n×width): column c holds ξ† for draw lo+c.
            let xi = centered.t().dot(&weights);
            (0..width)
                .map(|c| {
                    let col: Vec<f64> = xi.column(c).iter().map(|&v| v * scale).collect();
                    aggregate.apply(&col)
                })
                .collect::<Vec<_>>()
        })
        .collect();

    Ok(BootstrapDraws::new(stats, aggregate))
}

/// Bootstrap statistics for Kronecker-product rows rᵢ = eᵢ ⊗ dᵢ, streamed
/// one draw at a time. `eps` is n×p, `delta` is n×q, and the implicit
/// contribution matrix is n×(p·q) in row-major Kronecker layout.
pub fn bootstrap_statistics_paired(
    eps: ArrayView2<'_, f64>,
    delta: ArrayView2<'_, f64>,
    kind: MultiplierKind,
    n_draws: usize,
    aggregate: Aggregate,
    seed: u64,
) -> Result<BootstrapDraws> {
    let (n, p) = eps.dim();
    let q = delta.ncols();
    if delta.nrows() != n {
        return Err(Error::shape(format!(
            "paired blocks disagree on n: {} vs {}",
            n,
            delta.nrows()
        )));
    }
    validate_draw_config(n, p * q, n_draws, aggregate)?;

    let mean = cross_mean(eps, delta);
    let scale = 1.0 / (n as f64).sqrt();

    let stats: Vec<f64> = (0..n_draws)
        .into_par_iter()
        .map(|b| {
            let mut stream = RandomStream::new(seed, b as u64);
            let w = sample_multipliers(kind, n, &mut stream);
            let w_sum: f64 = w.iter().sum();

            // Σᵢ ϖᵢ eᵢdᵢᵀ via one (p×n)·(n×q) product on ϖ-scaled rows.
            let mut scaled = eps.to_owned();
            for (i, mut row) in scaled.axis_iter_mut(Axis(0)).enumerate() {
                row.mapv_inplace(|v| v * w[i]);
            }
            let m = scaled.t().dot(&delta);

            // Centering: Σᵢ ϖᵢ (rᵢ - r̄) = Σᵢ ϖᵢ rᵢ - (Σϖ) r̄.
            let vals: Vec<f64> = m
                .iter()
                .zip(mean.iter())
                .map(|(&mv, &av)| scale * (mv - w_sum * av))
                .collect();
            aggregate.apply(&vals)
        })
        .collect();

    Ok(BootstrapDraws::new(stats, aggregate))
}

/// All 2ⁿ Rademacher sign patterns instead of random draws; pattern b maps
/// bit i to the multiplier of observation i (set bit → +1). Used to check
/// sampled critical values against exhaustive enumeration on tiny samples;
/// the N >= 100 floor does not apply here.
pub fn bootstrap_statistics_enumerated(
    rows: ArrayView2<'_, f64>,
    aggregate: Aggregate,
) -> Result<BootstrapDraws> {
    let (n, d) = rows.dim();
    if n > 20 {
        return Err(Error::config(format!(
            "sign enumeration over 2^{n} patterns is not tractable"
        )));
    }
    aggregate.validate(d)?;

    let mean = rows.mean_axis(Axis(0)).unwrap();
    let centered = &rows - &mean.broadcast((n, d)).unwrap();
    let scale = 1.0 / (n as f64).sqrt();

    let n_draws = 1usize << n;
    let mut stats = Vec::with_capacity(n_draws);
    let mut xi = vec![0.0; d];
    for b in 0..n_draws {
        xi.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..n {
            let w = if (b >> i) & 1 == 1 { 1.0 } else { -1.0 };
            for (j, x) in xi.iter_mut().enumerate() {
                *x += w * centered[[i, j]];
            }
        }
        xi.iter_mut().for_each(|v| *v *= scale);
        stats.push(aggregate.apply(&xi));
    }
    Ok(BootstrapDraws::new(stats, aggregate))
}

/// One raw bootstrap vector ξ† for draw `b`, exposed for distribution-level
/// checks of the draws themselves.
pub fn bootstrap_draw_vector(
    rows: ArrayView2<'_, f64>,
    kind: MultiplierKind,
    seed: u64,
    b: u64,
) -> Vec<f64> {
    let (n, d) = rows.dim();
    let mean = rows.mean_axis(Axis(0)).unwrap();
    let mut stream = RandomStream::new(seed, b);
    let w = sample_multipliers(kind, n, &mut stream);
    let scale = 1.0 / (n as f64).sqrt();
    let mut xi = vec![0.0; d];
    for i in 0..n {
        for j in 0..d {
            xi[j] += w[i] * (rows[[i, j]] - mean[j]);
        }
    }
    xi.iter_mut().for_each(|v| *v *= scale);
    xi
}

fn validate_draw_config(n: usize, d: usize, n_draws: usize, aggregate: Aggregate) -> Result<()> {
    if n == 0 || d == 0 {
        return Err(Error::shape("bootstrap needs a non-empty row matrix"));
    }
    if n_draws < MIN_DRAWS {
        return Err(Error::config(format!(
            "bootstrap needs at least {MIN_DRAWS} draws, got {n_draws}"
        )));
    }
    aggregate.validate(d)
}

/// The ⌊Nα⌋-th largest draw statistic (order statistic, ties kept).
pub fn critical_value(draws: &BootstrapDraws, alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::config(format!("alpha must lie in (0,1), got {alpha}")));
    }
    let n = draws.stats.len();
    let k = (n as f64 * alpha).floor() as usize;
    if k == 0 {
        return Err(Error::config(format!(
            "floor(N*alpha) = 0 with N={n}, alpha={alpha}; increase N"
        )));
    }
    Ok(kth_largest(&draws.stats, k))
}

// k-th largest element, 1-based, ties kept; k = len gives the minimum.
pub(crate) fn kth_largest(values: &[f64], k: usize) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
    sorted[k - 1]
}

/// Add-one permutation-style p-value: (1 + #{stats >= observed}) / (N+1).
/// Strictly positive by construction. `observed` must be finite.
pub fn p_value(draws: &BootstrapDraws, observed: f64) -> f64 {
    let hits = draws.stats.iter().filter(|&&s| s >= observed).count();
    (1.0 + hits as f64) / (draws.stats.len() as f64 + 1.0)
}

/// Mean over observations of the Kronecker rows eᵢ ⊗ dᵢ, returned as the
/// p×q matrix (1/n) EᵀD whose row-major layout matches the flat rows.
pub fn cross_mean(eps: ArrayView2<'_, f64>, delta: ArrayView2<'_, f64>) -> Array2<f64> {
    let n = eps.nrows() as f64;
    let mut m = eps.t().dot(&delta);
    m.mapv_inplace(|v| v / n);
    m
}

/// Materialized Kronecker rows: row i is eᵢ ⊗ dᵢ in row-major layout
/// (index (j,k) ↦ j·q + k).
pub fn kronecker_rows(eps: ArrayView2<'_, f64>, delta: ArrayView2<'_, f64>) -> Array2<f64> {
    let (n, p) = eps.dim();
    let q = delta.ncols();
    let mut rows = Array2::zeros((n, p * q));
    for i in 0..n {
        for j in 0..p {
            let e = eps[[i, j]];
            for k in 0..q {
                rows[[i, j * q + k]] = e * delta[[i, k]];
            }
        }
    }
    rows
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn rademacher_support() {
        let mut s = RandomStream::new(1, 0);
        for v in sample_multipliers(MultiplierKind::Rademacher, 1000, &mut s) {
            assert!(v == 1.0 || v == -1.0);
        }
    }

    #[test]
    fn mammen_support() {
        let sqrt5 = 5.0f64.sqrt();
        let upper = (1.0 + sqrt5) / 2.0;
        let lower = (1.0 - sqrt5) / 2.0;
        assert!((upper - 1.6180).abs() < 1e-4);
        assert!((lower + 0.6180).abs() < 1e-4);
        let mut s = RandomStream::new(2, 0);
        for v in sample_multipliers(MultiplierKind::Mammen, 1000, &mut s) {
            assert!(v == upper || v == lower);
        }
    }

    #[test]
    fn mammen_first_three_moments() {
        // Analytic moments of the two-point law: 0, 1, 1.
        let mut s = RandomStream::new(3, 0);
        let n = 1_000_000;
        let draws = sample_multipliers(MultiplierKind::Mammen, n, &mut s);
        let m1 = draws.iter().sum::<f64>() / n as f64;
        let m2 = draws.iter().map(|v| v * v).sum::<f64>() / n as f64;
        let m3 = draws.iter().map(|v| v * v * v).sum::<f64>() / n as f64;
        assert!(m1.abs() < 0.005, "m1={m1}");
        assert!((m2 - 1.0).abs() < 0.01, "m2={m2}");
        assert!((m3 - 1.0).abs() < 0.02, "m3={m3}");
    }

    #[test]
    fn identical_rows_give_zero_stats() {
        // Centering kills constant rows; only the rounding of the row mean
        // survives (~1e-16 per entry).
        let rows = Array2::from_elem((12, 3), 4.2);
        let draws = bootstrap_statistics(
            rows.view(),
            MultiplierKind::Rademacher,
            200,
            Aggregate::MaxAbs,
            9,
        )
        .unwrap();
        assert!(draws.stats().iter().all(|&s| s.abs() <= 1e-12));
    }

    #[test]
    fn two_point_enumeration_matches_hand_values() {
        // rows (a, -a): centered rows are (a, -a); patterns (±1, ±1) give
        // ξ† ∈ {0, ±√2·a}.
        let a = 0.7;
        let rows = array![[a], [-a]];
        let draws = bootstrap_statistics_enumerated(rows.view(), Aggregate::MaxAbs).unwrap();
        assert_eq!(draws.n_draws(), 4);
        let sqrt2a = (2.0f64).sqrt() * a;
        // b=0 → (-1,-1): 0. b=1 → (+1,-1): √2a. b=2 → (-1,+1): √2a. b=3 → (+1,+1): 0.
        assert!(draws.stats()[0].abs() < 1e-15);
        assert!((draws.stats()[1] - sqrt2a).abs() < 1e-12);
        assert!((draws.stats()[2] - sqrt2a).abs() < 1e-12);
        assert!(draws.stats()[3].abs() < 1e-15);
    }

    #[test]
    fn top_one_equals_max_abs_per_draw() {
        let rows = array![
            [0.3, -1.1, 0.4],
            [1.2, 0.0, -0.3],
            [-0.5, 0.9, 2.0],
            [0.1, -0.2, 0.3],
            [0.0, 1.0, -1.0]
        ];
        let a = bootstrap_statistics(
            rows.view(),
            MultiplierKind::Mammen,
            150,
            Aggregate::MaxAbs,
            5,
        )
        .unwrap();
        let b = bootstrap_statistics(
            rows.view(),
            MultiplierKind::Mammen,
            150,
            Aggregate::TopTSum(1),
            5,
        )
        .unwrap();
        assert_eq!(a.stats(), b.stats());
    }

    #[test]
    fn config_errors() {
        let rows = Array2::zeros((5, 2));
        assert!(bootstrap_statistics(
            rows.view(),
            MultiplierKind::Rademacher,
            99,
            Aggregate::MaxAbs,
            0
        )
        .is_err());
        assert!(bootstrap_statistics(
            rows.view(),
            MultiplierKind::Rademacher,
            100,
            Aggregate::TopTSum(3),
            0
        )
        .is_err());
    }

    #[test]
    fn critical_value_order_statistic() {
        let stats: Vec<f64> = (1..=100).map(|v| v as f64).collect();
        let draws = BootstrapDraws::new(stats, Aggregate::MaxAbs);
        // 5th largest of 1..=100 is 96.
        assert_eq!(critical_value(&draws, 0.05).unwrap(), 96.0);
        // The k = N boundary of the order statistic is the minimum. (No
        // alpha < 1 reaches it through the public call: ⌊Nα⌋ <= N-1.)
        assert_eq!(kth_largest(draws.stats(), 100), 1.0);
        assert_eq!(critical_value(&draws, 0.9999999).unwrap(), 2.0);
        // Constant stats return the constant.
        let constant = BootstrapDraws::new(vec![2.5; 100], Aggregate::MaxAbs);
        assert_eq!(critical_value(&constant, 0.05).unwrap(), 2.5);
        // ⌊Nα⌋ = 0 is a configuration error.
        assert!(critical_value(&draws, 0.001).is_err());
    }

    #[test]
    fn p_value_add_one_convention() {
        let draws = BootstrapDraws::new(vec![1.0, 2.0, 3.0, 4.0], Aggregate::MaxAbs);
        assert_eq!(p_value(&draws, 2.5), 0.6);
        assert_eq!(p_value(&draws, 10.0), 0.2); // 1/(N+1)
        assert_eq!(p_value(&draws, 0.5), 1.0);
    }

    proptest::proptest! {
        #[test]
        fn p_value_at_critical_value_respects_level(seed in 0u64..1_000_000, alpha in 0.01f64..0.9) {
            // On distinct stats, p(cv) <= α + 1/(N+1).
            let mut s = RandomStream::new(seed, 77);
            let stats: Vec<f64> = (0..500).map(|_| s.standard_normal().abs()).collect();
            let draws = BootstrapDraws::new(stats, Aggregate::MaxAbs);
            let cv = critical_value(&draws, alpha).unwrap();
            let p = p_value(&draws, cv);
            proptest::prop_assert!(p <= alpha + 1.0 / 501.0, "alpha={}, p={}", alpha, p);
        }

        #[test]
        fn kth_largest_matches_sort_oracle(seed in 0u64..1_000_000, k in 1usize..50) {
            let mut s = RandomStream::new(seed, 78);
            let values: Vec<f64> = (0..50).map(|_| s.standard_normal()).collect();
            let mut sorted = values.clone();
            sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
            proptest::prop_assert_eq!(kth_largest(&values, k), sorted[k - 1]);
        }
    }

    #[test]
    fn paired_path_matches_explicit_rows() {
        let mut s = RandomStream::new(21, 0);
        let eps = Array2::from_shape_fn((15, 3), |_| s.standard_normal());
        let delta = Array2::from_shape_fn((15, 4), |_| s.standard_normal());
        let rows = kronecker_rows(eps.view(), delta.view());
        for kind in [
            MultiplierKind::Gaussian,
            MultiplierKind::Mammen,
            MultiplierKind::Rademacher,
        ] {
            let a =
                bootstrap_statistics(rows.view(), kind, 128, Aggregate::MaxAbs, 13).unwrap();
            let b = bootstrap_statistics_paired(
                eps.view(),
                delta.view(),
                kind,
                128,
                Aggregate::MaxAbs,
                13,
            )
            .unwrap();
            for (x, y) in a.stats().iter().zip(b.stats()) {
                assert!((x - y).abs() < 1e-10 * (1.0 + x.abs()));
            }
        }
    }

    #[test]
    fn draw_vector_consistent_with_statistics() {
        let mut s = RandomStream::new(31, 0);
        let rows = Array2::from_shape_fn((10, 4), |_| s.standard_normal());
        let draws = bootstrap_statistics(
            rows.view(),
            MultiplierKind::Rademacher,
            120,
            Aggregate::MaxAbs,
            99,
        )
        .unwrap();
        for b in [0usize, 7, 63, 119] {
            let xi = bootstrap_draw_vector(rows.view(), MultiplierKind::Rademacher, 99, b as u64);
            let agg = Aggregate::MaxAbs.apply(&xi);
            assert!((agg - draws.stats()[b]).abs() < 1e-12);
        }
    }

    #[test]
    fn gaussian_draws_have_conditional_moments_of_rows() {
        // With Gaussian multipliers each coordinate of ξ† is exactly
        // N(0, sample-variance of that coordinate) given the rows.
        let mut s = RandomStream::new(41, 0);
        let rows = Array2::from_shape_fn((20, 3), |_| s.standard_normal() * 1.3 + 0.4);
        let n_mc = 100_000usize;
        let d = rows.ncols();

        let mut sums = vec![0.0; d];
        let mut sqs = vec![0.0; d];
        for b in 0..n_mc {
            let xi = bootstrap_draw_vector(rows.view(), MultiplierKind::Gaussian, 4242, b as u64);
            for j in 0..d {
                sums[j] += xi[j];
                sqs[j] += xi[j] * xi[j];
            }
        }
        let mean_row = rows.mean_axis(Axis(0)).unwrap();
        for j in 0..d {
            let target_var = rows
                .column(j)
                .iter()
                .map(|&v| (v - mean_row[j]).powi(2))
                .sum::<f64>()
                / rows.nrows() as f64;
            let mc_mean = sums[j] / n_mc as f64;
            let mc_var = sqs[j] / n_mc as f64 - mc_mean * mc_mean;
            let se_mean = (target_var / n_mc as f64).sqrt();
            let se_var = target_var * (2.0 / n_mc as f64).sqrt();
            assert!(mc_mean.abs() < 3.0 * se_mean, "coord {j}: mean {mc_mean}");
            assert!(
                (mc_var - target_var).abs() < 3.0 * se_var,
                "coord {j}: var {mc_var} vs {target_var}"
            );
        }
    }
}
