//! Appearance network, frozen semantic network, channel attention and
//! fusion, all shaped by a [`NetworkProfile`].

pub mod attention;
pub mod convnet;
pub mod params;
pub mod profile;
pub mod response;
pub mod semantic;

pub use attention::{attention_weights, grid_spans, AttentionMlp, AttentionParams};
pub use convnet::{ANet, ConvNet, Layer, SNet};
pub use params::Parameterized;
pub use profile::{shape_chain, LayerSpec, NetworkProfile};
pub use response::{appearance_response, ResponseMap};
pub use semantic::{
    crop_center_features, fuse, semantic_correlate, semantic_response, semantic_search,
    semantic_target, FusionParams, SemanticHead, SemanticTarget, SemanticVariant,
};
