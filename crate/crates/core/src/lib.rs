//! Rank-based independence and conditional-independence tests for
//! high-dimensional data.
//!
//! Every test in this crate follows the same recipe: transform each data
//! column to standard-normal scores through its empirical CDF, form
//! per-observation Kronecker contribution vectors, take a max-type statistic
//! of their mean, and calibrate the critical value with a multiplier
//! bootstrap. Three front-line tests are provided:
//!
//! - [`ind::independence_test`] — tests `X ⊥ Y` from the cross-covariance of
//!   the Gaussianized blocks.
//! - [`ci_lasso::ci_lasso_test`] — tests `X ⊥ Y | Z` from the residuals of
//!   per-column Lasso regressions on the Gaussianized controls.
//! - [`ci_fnn::ci_fnn_test`] — tests `X ⊥ Y | Z` from the residuals of small
//!   feedforward-network regressions under a three-way sample split.
//!
//! [`simgen`] provides the seeded scenario generators used by the benchmark
//! harness in the companion CLI crate.

pub mod bootstrap;
pub mod ci_fnn;
pub mod ci_lasso;
pub mod data;
pub mod error;
pub mod fnn;
pub mod gaussianize;
pub mod ind;
pub mod lasso;
pub mod normal;
pub mod report;
pub mod simgen;
pub mod stream;

pub use bootstrap::{BootstrapDraws, MultiplierKind};
pub use data::DataMatrix;
pub use error::{Error, Result};
pub use report::TestReport;
pub use stream::RandomStream;
