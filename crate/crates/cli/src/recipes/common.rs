//! Parameter blocks and report helpers shared by the trainer recipes.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use passn_core::trainer::{
    generate_tasks, train, EvalConfig, Histogram, PolicyTable, TaskGenConfig, TaskSet, TrainConfig, TrainingTrajectory,
};
use passn_core::LossSpec;

use crate::error::{config, LabResult};
use crate::report::{Report, Table};

/// Synthetic task set; its seed derives from the root seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TaskBlock {
    pub problem_count: usize,
    pub answer_count: usize,
    pub difficulty_levels: Vec<f64>,
    pub label_noise: f64,
    pub max_correct: usize,
    pub shared_easy_answer: bool,
}

impl Default for TaskBlock {
    fn default() -> Self {
        Self {
            problem_count: 200,
            answer_count: 256,
            difficulty_levels: vec![1.0; 3],
            label_noise: 0.3,
            max_correct: 1,
            shared_easy_answer: false,
        }
    }
}

impl TaskBlock {
    pub fn generate(&self, seed: u64) -> LabResult<TaskSet> {
        Ok(generate_tasks(&TaskGenConfig {
            problem_count: self.problem_count,
            answer_count: self.answer_count,
            difficulty_levels: self.difficulty_levels.clone(),
            label_noise: self.label_noise,
            max_correct: self.max_correct,
            shared_easy_answer: self.shared_easy_answer,
            seed,
        })?)
    }
}

/// Supervised training schedule and evaluation grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainBlock {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    /// Gradient steps per epoch; one pass over the problems when absent.
    pub steps_per_epoch: Option<usize>,
    pub budgets: Vec<u64>,
    pub histogram_bins: usize,
}

impl Default for TrainBlock {
    fn default() -> Self {
        Self {
            learning_rate: 8.0,
            epochs: 4,
            batch_size: 8,
            steps_per_epoch: Some(100),
            budgets: vec![1, 4, 16, 64, 256, 1024],
            histogram_bins: 20,
        }
    }
}

impl TrainBlock {
    pub fn config(&self, loss: LossSpec, seed: u64) -> TrainConfig {
        let mut c = TrainConfig::new(loss, self.learning_rate, self.epochs, self.batch_size, seed);
        c.steps_per_epoch = self.steps_per_epoch;
        c.eval = EvalConfig {
            budgets: self.budgets.clone(),
            histogram_bins: self.histogram_bins,
            ..EvalConfig::default()
        };
        c
    }

    pub fn require_budgets(&self, needed: &[u64]) -> LabResult<()> {
        match needed.iter().find(|n| !self.budgets.contains(n)) {
            Some(n) => Err(config(format!("train.budgets must contain N = {n}"))),
            None => Ok(()),
        }
    }
}

/// Train one supervised run from the uniform policy.
pub fn run_supervised(
    tasks: &TaskSet,
    block: &TrainBlock,
    loss: LossSpec,
    seed: u64,
) -> LabResult<(PolicyTable, TrainingTrajectory)> {
    Ok(train(&PolicyTable::uniform(tasks), tasks, &block.config(loss, seed))?)
}

pub fn resolved<P: Serialize>(params: &P) -> Value {
    serde_json::to_value(params).expect("params serialize")
}

/// Coverage, greedy confidence, entropy and filter counts per epoch.
pub fn trajectory_rows(report: &mut Report, run: &str, traj: &TrainingTrajectory) {
    for s in &traj.snapshots {
        let e = Some(s.epoch);
        for (n, c) in s.coverage.iter() {
            report.row(run, "coverage", c, Some(n), e);
        }
        report.row(run, "mean_greedy_confidence", s.mean_greedy_confidence, None, e);
        report.row(run, "mean_entropy", s.mean_entropy, None, e);
        report.row(run, "kept", s.kept as f64, None, e);
        report.row(run, "filtered", s.filtered as f64, None, e);
    }
}

pub const TRAJECTORY_COLUMNS: [&str; 6] = ["run", "epoch", "n", "coverage", "mean_greedy_conf", "mean_entropy"];

pub fn trajectory_table(runs: &[(String, &TrainingTrajectory)]) -> Table {
    let mut t = Table::new("trajectory.csv", &TRAJECTORY_COLUMNS);
    for (run, traj) in runs {
        for s in &traj.snapshots {
            for (n, c) in s.coverage.iter() {
                t.push(vec![
                    run.clone(),
                    s.epoch.to_string(),
                    n.to_string(),
                    c.to_string(),
                    s.mean_greedy_confidence.to_string(),
                    s.mean_entropy.to_string(),
                ]);
            }
        }
    }
    t
}

pub const HISTOGRAM_COLUMNS: [&str; 5] = ["run", "epoch", "bin_lo", "bin_hi", "fraction"];

pub fn push_histogram(t: &mut Table, run: &str, epoch: usize, h: &Histogram) {
    let total = h.total().max(1) as f64;
    for (i, &c) in h.counts.iter().enumerate() {
        t.push(vec![
            run.into(),
            epoch.to_string(),
            h.edges[i].to_string(),
            h.edges[i + 1].to_string(),
            (c as f64 / total).to_string(),
        ]);
    }
}

pub fn coverage_at(traj: &TrainingTrajectory, n: u64) -> Vec<f64> {
    traj.snapshots
        .iter()
        .map(|s| s.coverage.get(n).expect("budget in eval grid"))
        .collect()
}

pub fn non_decreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] >= w[0])
}

pub fn strictly_increasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] > w[0])
}

/// Final value strictly below the maximum over earlier entries.
pub fn final_below_earlier_peak(v: &[f64]) -> bool {
    match v.split_last() {
        Some((last, earlier)) if !earlier.is_empty() => {
            *last < earlier.iter().copied().fold(f64::NEG_INFINITY, f64::max)
        }
        _ => false,
    }
}
