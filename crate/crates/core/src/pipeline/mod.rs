//! Training, segmentation, evaluation and benchmarking over frame sequences.

pub mod bench;
pub mod commands;
pub mod config;
pub mod core;

pub use self::bench::{
    run_bench, run_default_bench, BenchReport, BenchRow, FeatureSet, TrainingTrace,
};
pub use self::commands::{
    cmd_bench, cmd_eval, cmd_overlay, cmd_segment, cmd_synth, cmd_train, load_model, EvalReport,
    FrameReport, MODEL_FILE, STATS_FILE,
};
pub use self::config::{
    GmmSettings, KMeansSettings, Method, PipelineConfig, CONFIG_VERSION, PINNED_BETA,
};
pub use self::core::{
    frame_features, segment_stack, sequence_features, train, train_on_stacks, ClusterModel,
    ModelFile, Segmentation, Trained,
};
