//! Class-incremental transfer: a base classifier over cube, sphere and egg
//! is extended one class at a time, either by growing a hidden layer per
//! step (dynamic) or by only widening the head of a fixed-depth network
//! (static). A flat/round concept head can be grown on the final model.

mod concept;
mod curriculum;

pub use concept::{concept_samples, fit_concept_head, train_concept_head, ConceptConfig, ConceptReport, CONCEPT_LABELS};
pub use curriculum::{
    run_curriculum, samples_per_class, train_base, transfer_step, BaseReport, CurriculumResult, CurriculumStep,
    FreezePolicy, StepReport, TransferConfig, TransferMode, TransferReport, BASE_CLASSES, CURRICULUM,
    STATIC_HIDDEN,
};
