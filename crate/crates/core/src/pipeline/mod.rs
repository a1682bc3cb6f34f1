//! Data ingestion, splitting, synthetic data, training, and evaluation.

pub mod data;
pub mod synth;
pub mod train;

pub use data::{
    load_manifest, read_features, read_features_file, read_manifest, stratified_split,
    write_features, write_features_file, write_manifest, FeatureBank, FeatureRecord, ManifestEntry,
    SceneInfo,
};
pub use synth::{city_prototypes, generate_synthetic, make_nested_taxonomy, SynthConfig};
pub use train::{
    evaluate, train, EpochLog, EvalReport, HierarchyMetrics, SceneLabelMode, TrainConfig,
    TrainOutcome,
};
