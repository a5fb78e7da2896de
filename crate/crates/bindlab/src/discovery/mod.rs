//! Binding-head discovery: attention features, an L1 logistic solver, and
//! item-grouped cross-validated selection with a stability rule.

pub mod cv;
pub mod features;
pub mod logistic;
pub mod planted;

use crate::error::Result;
use crate::model::checkpoint::Checkpoint;
use crate::world::pairs::FactorialPair;

pub use cv::{default_lambda_grid, grouped_cv_select, grouped_folds, HeadCandidate, COEF_ZERO_TOL};
pub use features::{build_feature_matrix, extract_features, FeatureMatrix, HeadFeatures};
pub use logistic::{fit_l1_logistic, fit_l1_logistic_warm, LogisticFit};
pub use planted::plant_synthetic_features;

/// The full discovery pipeline with default settings: extract features from
/// every pair, then grouped 5-fold selection with the 3-of-5 stability rule.
pub fn discover_heads(
    checkpoint: &Checkpoint,
    pairs: &[FactorialPair],
    seed: u64,
) -> Result<Vec<HeadCandidate>> {
    let features = build_feature_matrix(checkpoint, pairs)?;
    grouped_cv_select(&features, &default_lambda_grid(), 5, 3, seed)
}
