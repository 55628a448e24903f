//! Online tracking: context crops, per-sequence target caches and the
//! three-scale search.

pub mod crop;
pub mod dump;
pub mod state;

pub use crop::{channel_mean, crop_with_context, exemplar_side, sample_patch, search_side};
pub use dump::ResponseDumpWriter;
pub use state::{
    attention_csv, combine_responses, dump_attention, hann_window, normalize_jointly, AttentionRow,
    ScaleResponses, TrackConfig, TrackerModels, TrackerState,
};
