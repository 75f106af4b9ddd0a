//! Gold-truth generation, dataset handling, fine-tuning and evaluation.

mod dataset;
mod evaluate;
mod finetune;
mod teacher;

pub use dataset::{frame_name, gold_name, SequenceDataset, Split, GOLD_DIR, MANIFEST};
pub use evaluate::{evaluate, EvalReport};
pub use finetune::{
    fine_tune, fine_tune_observed, validation_loss, EpochReport, FineTuneConfig, FineTuneOutcome, StopReason, Timing, TrainingLog,
};
pub use teacher::{generate_gold, AnalyticTeacher, FileTeacher, FlowPredictor, NoisyTeacher, TeacherOracle, TeacherPredictor, ZeroFlow};
