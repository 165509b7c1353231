//! Episode classifier, embedding outliers and novel-class decisions.

mod cnn;
mod detect;
mod episodes;
mod experiment;

pub use cnn::{cnn_specs, split_known, train_cnn, CnnConfig, CnnModel, EMBED_DIM, EMBED_LAYER};
pub use detect::{
    cosine_distance, detect, outlier_set, EmbeddingSet, NoveltyVerdict, OutlierSet, DEFAULT_THRESHOLD, MIN_BATCH,
    Z_THRESHOLD,
};
pub use episodes::{pad_episode, pad_rows, split_class, ClassSplit, PaddedEpisode, DEV_EPISODES, TRAIN_EPISODES};
pub use experiment::{
    condition_name, detect_batch, expected_novel, plurality, probe_batch, probes_for, run_experiment_matrix, self_test,
    wilson_interval, Datasets, DevConfusion, ExperimentConfig, ExperimentResults, SummaryRow, Trial, BATCH_EPISODES,
    CONDITIONS, PROBE_CLASSES,
};
