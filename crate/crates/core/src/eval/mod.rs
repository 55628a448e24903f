//! One-pass evaluation with success and precision curves, the mixing-weight
//! search, and the six-row ablation.

pub mod experiments;
pub mod metrics;
pub mod ope;

pub use experiments::{
    ablation_table, grid_search_lambda, AblationModels, AblationRow, AblationTable,
    AblationVariant, LambdaRow, LambdaSearch, LAMBDA_GRID,
};
pub use metrics::{
    center_error, iou, iou_thresholds, precision_at, precision_curve, success_auc, success_curve,
};
pub use ope::{
    aggregate, run_ope, track_sequence, Averaging, Dataset, EvalReport, GroundTruthReplay,
    SequenceResult, SequenceTracker, SiameseTracker, StaticTracker,
};
