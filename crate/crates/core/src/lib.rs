//! Numerical laboratory for single-split (Moran-type) hypothesis tests.
//!
//! The crate builds the split test and its competitors for location
//! families, evaluates their power functions by Monte Carlo and closed form,
//! calibrates Neyman-Pearson tests against discrete Bayes mixtures, and
//! diagnoses the tail condition under which the split test is dominated.
//!
//! Module map:
//!
//! - [`families`]: location families `f(x - theta)` with CDFs, quantiles and samplers.
//! - [`model`]: data models (a pair of split statistics, or a d-dim Gaussian sample).
//! - [`stat_tests`]: the test functions themselves.
//! - [`power`]: power functions, curves, dominance scans and regularity checks.
//! - [`bayes`]: priors, mixture likelihood ratios, NP calibration, the grid oracle
//!   and the dominating blend search.
//! - [`conditions`]: tail likelihood-ratio diagnostics.

pub mod bayes;
pub mod conditions;
mod error;
pub mod families;
pub mod mc;
pub mod model;
pub mod power;
pub mod quad;
pub mod roots;

pub use error::{LabError, Result};
pub use families::{GaussianFamilyD, LocationFamily1D, Shift};
pub use model::{DataModel, GaussianSampleModel, PairModel};
pub use power::{PowerEstimate, PowerMethod};
pub use stat_tests::Test;
