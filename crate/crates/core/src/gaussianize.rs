//! Rank-to-normal transforms.
//!
//! `gaussianize_full` maps each column of a sample to standard-normal scores
//! through its own empirical CDF: the entry with (maximal, tie-sharing) rank
//! r among n becomes Φ⁻¹(r/(n+1)). The n/(n+1) deflation keeps every score
//! finite; scores depend on the data only through within-column ranks, so
//! they are invariant under strictly increasing transforms of any column.
//!
//! `gaussianize_truncated` is the split-sample variant: the ECDF is built
//! from a reference set of n₁ rows and evaluated on out-of-sample points,
//! with the value clamped to [1/n₁, (n₁-1)/n₁] before applying Φ⁻¹ so that
//! points outside the reference range still map to finite scores.

use ndarray::Array2;

use crate::data::DataMatrix;
use crate::error::{Error, Result};
use crate::normal;
use crate::stream::RandomStream;

/// Which transform produced a [`GaussianizedSample`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransformMode {
    FullSample,
    /// Scores built against a separate reference sample (clamped ECDF).
    Truncated,
}

/// Per-column tie diagnostics from a transform.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TieReport {
    pub column: usize,
    /// Number of groups of 2+ equal values in the source column.
    pub tied_groups: usize,
}

/// Normal scores for one data block, plus transform provenance.
#[derive(Debug, Clone)]
pub struct GaussianizedSample {
    pub scores: Array2<f64>,
    pub mode: TransformMode,
    /// Sample size of the reference set whose ECDF built the scores.
    pub source_n_ref: usize,
    pub ties: Vec<TieReport>,
}

impl GaussianizedSample {
    pub fn n(&self) -> usize {
        self.scores.nrows()
    }

    pub fn k(&self) -> usize {
        self.scores.ncols()
    }
}

/// Options for the full-sample transform.
#[derive(Debug, Clone, Default)]
pub struct GaussianizeOptions {
    /// Break ties by adding seeded uniform noise of magnitude
    /// 1e-9 × column range before ranking.
    pub jitter_seed: Option<u64>,
}

/// Full-sample transform of every column of `data`.
pub fn gaussianize_full(data: &DataMatrix) -> Result<GaussianizedSample> {
    gaussianize_full_with(data, &GaussianizeOptions::default())
}

pub fn gaussianize_full_with(
    data: &DataMatrix,
    opts: &GaussianizeOptions,
) -> Result<GaussianizedSample> {
    let n = data.n();
    let k = data.k();
    let mut scores = Array2::zeros((n, k));
    let mut ties = Vec::new();

    for j in 0..k {
        let col = data.column(j);
        let mut values: Vec<f64> = col.to_vec();
        check_non_constant(&values, j, "full-sample transform")?;

        if let Some(seed) = opts.jitter_seed {
            apply_jitter(&mut values, j, seed);
        }

        let (ranks, tied_groups) = max_ranks(&values);
        if tied_groups > 0 {
            ties.push(TieReport {
                column: j,
                tied_groups,
            });
        }
        for (i, r) in ranks.into_iter().enumerate() {
            scores[[i, j]] = normal::quantile(r as f64 / (n as f64 + 1.0));
        }
    }

    Ok(GaussianizedSample {
        scores,
        mode: TransformMode::FullSample,
        source_n_ref: n,
        ties,
    })
}

/// Transform `target` columns through the clamped ECDF of `reference`.
pub fn gaussianize_truncated(
    target: &DataMatrix,
    reference: &DataMatrix,
) -> Result<GaussianizedSample> {
    if target.k() != reference.k() {
        return Err(Error::shape(format!(
            "target has {} columns but reference has {}",
            target.k(),
            reference.k()
        )));
    }
    let n1 = reference.n();
    let lo = 1.0 / n1 as f64;
    let hi = (n1 as f64 - 1.0) / n1 as f64;

    let mut scores = Array2::zeros((target.n(), target.k()));
    for j in 0..target.k() {
        let mut sorted: Vec<f64> = reference.column(j).to_vec();
        check_non_constant(&sorted, j, "truncated transform reference")?;
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());

        for (i, &x) in target.column(j).iter().enumerate() {
            let count = sorted.partition_point(|&r| r <= x);
            let f = (count as f64 / n1 as f64).clamp(lo, hi);
            scores[[i, j]] = normal::quantile(f);
        }
    }

    Ok(GaussianizedSample {
        scores,
        mode: TransformMode::Truncated,
        source_n_ref: n1,
        ties: Vec::new(),
    })
}

fn check_non_constant(values: &[f64], column: usize, context: &str) -> Result<()> {
    let first = values[0];
    if values.iter().all(|&v| v == first) {
        return Err(Error::DegenerateColumn {
            column,
            context: context.to_string(),
        });
    }
    Ok(())
}

fn apply_jitter(values: &mut [f64], column: usize, seed: u64) {
    let (min, max) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    let magnitude = 1e-9 * (max - min);
    let mut stream = RandomStream::new(seed, 0).substream(column as u64);
    for v in values.iter_mut() {
        *v += magnitude * stream.uniform01();
    }
}

/// Maximal (indicator-count) ranks of `values`, 1-based, ties sharing the
/// rank of the last member of their run. Also returns the tied-group count.
fn max_ranks(values: &[f64]) -> (Vec<usize>, usize) {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap());

    let mut ranks = vec![0usize; n];
    let mut tied_groups = 0;
    let mut start = 0;
    while start < n {
        let mut end = start;
        while end + 1 < n && values[order[end + 1]] == values[order[start]] {
            end += 1;
        }
        if end > start {
            tied_groups += 1;
        }
        // Every member of the run counts all run members as "<= itself".
        for &i in &order[start..=end] {
            ranks[i] = end + 1;
        }
        start = end + 1;
    }
    (ranks, tied_groups)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::normal::std_normal_quantile;
    use ndarray::array;

    fn matrix(cols: Vec<Vec<f64>>) -> DataMatrix {
        let n = cols[0].len();
        let k = cols.len();
        let mut m = Array2::zeros((n, k));
        for (j, col) in cols.iter().enumerate() {
            for (i, &v) in col.iter().enumerate() {
                m[[i, j]] = v;
            }
        }
        DataMatrix::new(m).unwrap()
    }

    #[test]
    fn three_point_column_maps_to_quartile_scores() {
        let data = matrix(vec![vec![3.0, 1.0, 2.0]]);
        let g = gaussianize_full(&data).unwrap();
        let q75 = std_normal_quantile(0.75).unwrap();
        assert!((g.scores[[0, 0]] - q75).abs() < 1e-12);
        assert!((g.scores[[1, 0]] + q75).abs() < 1e-12);
        assert_eq!(g.scores[[2, 0]], 0.0);
        assert!((g.scores[[0, 0]] - 0.6744898).abs() < 1e-7);
    }

    #[test]
    fn monotone_transform_leaves_scores_bit_identical() {
        let mut stream = RandomStream::new(5, 1);
        let raw: Vec<f64> = (0..200).map(|_| stream.standard_normal()).collect();
        let data = matrix(vec![raw.clone()]);
        let mapped = matrix(vec![raw.iter().map(|&x| x.exp()).collect()]);
        let a = gaussianize_full(&data).unwrap();
        let b = gaussianize_full(&mapped).unwrap();
        assert_eq!(a.scores, b.scores);
    }

    #[test]
    fn score_bound_and_sorted_grid_at_n_1000() {
        let mut stream = RandomStream::new(6, 1);
        let raw: Vec<f64> = (0..1000).map(|_| stream.standard_normal()).collect();
        let data = matrix(vec![raw]);
        let g = gaussianize_full(&data).unwrap();
        let n = 1000.0;
        let bound = std_normal_quantile(n / (n + 1.0)).unwrap();
        assert!((bound - 3.0902).abs() < 1e-3);
        assert!(bound <= (2.0 * (n + 1.0).ln()).sqrt());
        let max = g.scores.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
        assert!((max - bound).abs() < 1e-12);

        // Tie-free column: sorted scores equal the rank grid to 1e-12.
        let mut sorted: Vec<f64> = g.scores.column(0).to_vec();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (r, &s) in sorted.iter().enumerate() {
            let want = std_normal_quantile((r as f64 + 1.0) / (n + 1.0)).unwrap();
            assert!((s - want).abs() < 1e-12);
        }

        // Symmetry of the grid: column mean is 0 to 1e-10.
        let mean = g.scores.column(0).sum() / n;
        assert!(mean.abs() < 1e-10);
    }

    #[test]
    fn constant_column_is_rejected_with_index() {
        let data = matrix(vec![vec![1.0, 2.0, 3.0], vec![7.0, 7.0, 7.0]]);
        match gaussianize_full(&data) {
            Err(Error::DegenerateColumn { column, .. }) => assert_eq!(column, 1),
            other => panic!("expected degenerate column error, got {other:?}"),
        }
    }

    #[test]
    fn ties_share_max_rank_and_are_reported() {
        let data = matrix(vec![vec![1.0, 2.0, 2.0, 3.0]]);
        let g = gaussianize_full(&data).unwrap();
        // values 2.0 share the indicator-count rank 3 -> Φ⁻¹(3/5).
        let q = std_normal_quantile(0.6).unwrap();
        assert_eq!(g.scores[[1, 0]], g.scores[[2, 0]]);
        assert!((g.scores[[1, 0]] - q).abs() < 1e-12);
        assert_eq!(g.ties, vec![TieReport { column: 0, tied_groups: 1 }]);
    }

    #[test]
    fn jitter_breaks_ties_deterministically() {
        let data = matrix(vec![vec![1.0, 2.0, 2.0, 3.0]]);
        let opts = GaussianizeOptions {
            jitter_seed: Some(11),
        };
        let a = gaussianize_full_with(&data, &opts).unwrap();
        let b = gaussianize_full_with(&data, &opts).unwrap();
        assert_eq!(a.scores, b.scores);
        assert!(a.ties.is_empty());
        assert_ne!(a.scores[[1, 0]], a.scores[[2, 0]]);
    }

    #[test]
    fn truncated_clamps_out_of_range_points() {
        let reference = matrix(vec![vec![1.0, 2.0, 3.0, 4.0]]);
        let target = matrix(vec![vec![0.5, 2.5, 9.0]]);
        let g = gaussianize_truncated(&target, &reference).unwrap();
        let lo = std_normal_quantile(0.25).unwrap();
        let hi = std_normal_quantile(0.75).unwrap();
        assert!((g.scores[[0, 0]] - lo).abs() < 1e-12);
        assert_eq!(g.scores[[1, 0]], 0.0);
        assert!((g.scores[[2, 0]] - hi).abs() < 1e-12);
        assert_eq!(g.mode, TransformMode::Truncated);
        assert_eq!(g.source_n_ref, 4);
    }

    #[test]
    fn truncated_scores_respect_log_bound() {
        let mut stream = RandomStream::new(8, 3);
        let reference = matrix(vec![(0..50).map(|_| stream.standard_normal()).collect()]);
        let target = matrix(vec![(0..200)
            .map(|_| 10.0 * stream.standard_normal())
            .collect()]);
        let g = gaussianize_truncated(&target, &reference).unwrap();
        let bound = (2.0 * 50.0f64.ln()).sqrt();
        for &s in g.scores.iter() {
            assert!(s.abs() <= bound);
        }
    }

    #[test]
    fn truncated_rejects_constant_reference() {
        let reference =
            DataMatrix::new(array![[1.0], [1.0], [1.0]]).unwrap();
        let target = DataMatrix::new(array![[0.0], [1.0], [2.0]]).unwrap();
        assert!(gaussianize_truncated(&target, &reference).is_err());
    }
}
