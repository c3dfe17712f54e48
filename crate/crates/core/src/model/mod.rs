//! Severity regression: scaling, boosted trees, feature elimination,
//! optional oversampling, and participant-level cross-validation.

pub mod cv;
pub mod gbm;
pub mod rfe;
pub mod scaler;
pub mod smote;
pub mod tree;

pub use cv::{lopo_cv, train_model, CvReport, FoldReport, VideoPrediction};
pub use gbm::{fit_gbm, BoostedEnsemble, GbmModel, Predictions, MODEL_FORMAT_VERSION};
pub use rfe::boost_rfe;
pub use scaler::{apply_scaler, fit_scaler, ScalerParams};
pub use smote::smote_oversample;
pub use tree::{fit_tree, Leaf, RegressionTree, SplitNode};
