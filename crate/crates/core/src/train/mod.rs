//! Offline training: balanced logistic loss on response maps, pair
//! sampling, momentum SGD for each branch, the joint mode, and the
//! classification pretraining that stands in for an ImageNet backbone.

pub mod branches;
pub mod labels;
pub mod pretrain;
pub mod sampler;
pub mod sgd;

pub use branches::{
    appearance_objective, fit_appearance, fit_semantic, joint_objective, optimize,
    semantic_objective, train_appearance, train_joint, train_semantic, LossLog, LossRecord,
    ResponseBias,
};
pub use labels::{logistic_loss, make_label_map, LabelMap};
pub use pretrain::{pretrain_snet_classifier, Classifier, PretrainReport};
pub use sampler::{PairSampler, TrainingPair};
pub use sgd::{LrPhase, Momentum, SgdConfig};
