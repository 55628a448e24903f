//! On-disk formats and the synthetic data generators.

pub mod classification;
pub mod pnm;
pub mod sequence;
pub mod synthetic;
pub mod weights;

pub use classification::{load_classification_set, write_classification_set};
pub use pnm::{decode_pnm, encode_pgm, encode_ppm, load_image, save_ppm};
pub use sequence::{
    format_groundtruth, format_track, list_sequence_dirs, load_sequence, parse_groundtruth,
    write_sequence, FrameStore, Sequence,
};
pub use synthetic::{
    classification_set, generate_synthetic, random_specs, ShapeClass, SuiteConfig, SyntheticSpec,
};
pub use weights::{load_weights, save_weights, WeightsFile};
