//! Partial distribution alignment on synthetic shifted mixtures.
//!
//! A linear softmax classifier is trained on labeled source data while an
//! adaptive plan decides, batch by batch, which target samples are worth
//! matching under a feature + label cost.

pub mod data;
pub mod labelwise;
pub mod model;
pub mod train;

pub use data::{generate_synthetic_shift, stratified_batch, LabeledDataset, ShiftConfig, ShiftedPair};
pub use labelwise::{labelwise_aggregate, LabelwisePlan};
pub use model::{build_alignment_cost, evaluate_accuracy, one_hot, FixedPlanObjective, LinearClassifier};
pub use train::{train_aot_classifier, train_source_only, IterationRecord, TrainConfig, TrainingHistory};
