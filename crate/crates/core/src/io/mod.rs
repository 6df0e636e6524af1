//! Persistence: IDX datasets, network weights, feature dumps, summaries,
//! configs, CSV reports and SVG plots. Every writer is atomic.

mod atomic;
mod config;
mod feature_blob;
mod idx;
mod report;
mod summaries;
mod svg;
mod weights;

pub use atomic::{read_bytes, write_atomic};
pub use config::{
    DataSection, ExperimentConfig, FeatureFamily, FeatureRequest, GridCell, GridSection,
    ModelSection, OutputSection, SummariesSection, TrainSection,
};
pub use feature_blob::{
    encode_feature_blob, is_feature_blob, parse_feature_blob, read_feature_blob,
    write_feature_blob, FeatureBlob, FEATURE_MAGIC, FEATURE_VERSION,
};
pub use idx::{
    encode_idx_images, encode_idx_labels, parse_idx, read_idx, read_idx_images, read_idx_labels,
    write_idx_images, write_idx_labels, IdxData, ImageSplit, MnistFiles, IMAGES_MAGIC,
    LABELS_MAGIC,
};
pub use report::{
    encode_report_csv, format_float, parse_report_csv, read_report_csv, write_report_csv,
    ReportRow, MIN_SIGNIFICANT_DIGITS, REPORT_COLUMNS,
};
pub use summaries::{read_summaries, write_summaries, SummaryFile};
pub use svg::{emit_power_plot, plot_top, XAxis};
pub use weights::{
    decode_f32_blob, encode_f32_blob, load_network, manifest_path, read_f32_blob, read_manifest,
    round_to_f32, save_network, test_vectors_for, verify_test_vectors, write_f32_blob,
    LayerDescriptor, TestVectors, TrainingMetadata, WeightManifest, FORMAT_VERSION, MANIFEST_FILE,
    TEST_VECTOR_COUNT, TEST_VECTOR_TOLERANCE,
};
