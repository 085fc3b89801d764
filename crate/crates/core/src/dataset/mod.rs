//! Burst dataset synthesis, labeling and storage.

mod build;
mod container;
mod ingest;
mod scene;
mod sequence;
mod stats;

pub use build::{
    build_dataset, check_label_share, generate_sequence, load_source_frames, load_split, read_dataset_config,
    read_dataset_manifest, sequence_seed, DatasetConfig, DatasetEntry, DatasetManifest, FrameSource, Split,
    DATASET_MANIFEST, LABEL_SHARE_MIN_SEQUENCES,
};
pub use container::{read_sequence, sequence_manifest, write_sequence, MANIFEST_FILE, PIPELINE_VERSION};
pub use ingest::{center_crop, decode_ppm, encode_ppm, ingest_frames};
pub use scene::{frame_offsets, generate_scene_sequence, Scene, SceneConfig, MAX_MOTION_PX};
pub use sequence::{label_gt_base, redraw_noise, synthesize_sequence, BurstSequence, LabelMetric};
pub use stats::{autocorrelation_width, measure_blur_width, measure_noise_std};
