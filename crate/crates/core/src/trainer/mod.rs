//! Tabular softmax policies over synthetic problems: generation, supervised
//! and policy-gradient training, exact evaluation and diagnostics.

pub mod diagnostics;
pub mod grpo;
pub mod policy;
pub mod tasks;
pub mod train;

pub use diagnostics::{
    calibration_table, difficulty_profile, directional_derivative, entropy_report, eval_pass_at_n,
    greedy_confidence_histogram, pareto_frontier, EntropyReport, FrontierPoint, Histogram,
};
pub use grpo::{grpo_step, train_grpo, GrpoConfig, GrpoStepStats};
pub use policy::PolicyTable;
pub use tasks::{generate_tasks, split_ids, Problem, TaskGenConfig, TaskSet};
pub use train::{train, EpochSnapshot, EvalConfig, TrainConfig, TrainingTrajectory};
