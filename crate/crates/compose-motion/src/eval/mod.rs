//! Evaluation suite: feature extraction, Frechet feature distance,
//! recognition accuracy, diversity metrics, and the ablation harness.

mod ablation;
mod classifier;
mod features;
mod metrics;
mod stats;

pub use ablation::{
    evaluate_generated, hex_prefix, run_ablation, subseed, AblationConfig, ArmReport, ArmSpec, EvalParams, ExtractorKind,
    RefineSettings,
};
pub use classifier::{accuracy, ClassifierConfig, PairClassifier};
pub use features::{
    extract_features, extract_sequence_features, handcrafted_features, FeatureExtractor, HANDCRAFTED_DIM,
};
pub use metrics::{bootstrap_half_width, diversity, multimodality, MetricsReport};
pub use stats::{fid, gaussian_stats, matrix_sqrt_psd, GaussianStats};
