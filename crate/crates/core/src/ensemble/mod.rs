//! Weighted-average ensemble: member scores combined with weights on the
//! probability simplex, then a softmax.

mod model;
mod weights;

pub use model::{parse_weight_report, report_weights, EnsembleManifest, EnsembleModel, ManifestMember};
pub use weights::{
    check_simplex, combine_scores, ensemble_forward, fit_weights, weight_loss_and_gradient, EnsembleWeights, FitConfig,
    FitOutcome, SIMPLEX_TOLERANCE,
};
