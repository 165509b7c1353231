//! Analytic desk-scale stacking environment.
//!
//! A theme object is dropped at a coordinate on top of a destination cube,
//! pushed by a small release jitter whose direction follows the object's
//! rotational symmetry, and either stays supported or falls off beside the
//! cube. Free-play datasets are built from ten-attempt episodes in which the
//! object keeps whatever orientation it settled in.

mod dataset;
mod features;
pub mod geometry;
mod objects;
mod sim;

pub use dataset::{
    generate_freeplay, group_episodes, load_records, read_records_csv, save_records, write_records_csv, DatasetManifest,
    DATASET_FORMAT, LAYOUT_VERSION,
};
pub use features::{FeatureLayout, Field};
pub use objects::{parse_class_list, Axis, ClassName, Contact, ObjectClass, Orientation, RestPose, REST_TOLERANCE};
pub use sim::{
    apply_jitter, initial_pose, label_contact, place_and_settle, run_episode, sample_episode, AttemptContext,
    AttemptRecord, Episode, EpisodeOutcome, EpisodeRunner, Outcome, PlacementAction, Pose, DEST_HALF, JITTER_SLIDE, MAX_ATTEMPTS,
    PLACEMENT_SCALE, SUPPORT_MARGIN,
};
