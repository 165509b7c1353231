//! Behaviour-based object classification from free-play attempts, with a
//! confusion matrix and a 2-D MDS view of the last hidden layer.

mod baseline;
mod confusion;
mod export;
mod mds;

pub use baseline::{
    build_classifier, embed_last_hidden, evaluate, freeplay_split, run_baseline, split_records, to_samples, train_baseline,
    BaselineConfig, BaselineResult, LabeledSamples, BASELINE_HIDDEN,
};
pub use confusion::{ClassMetrics, ConfusionMatrix, Metrics};
pub use export::{confusion_csv, confusion_svg, embedding_csv, embedding_svg, export_confusion, export_embedding};
pub use mds::{mds_embed, MdsEmbedding};
