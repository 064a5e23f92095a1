//! Group-relative policy gradient against supervised baselines.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use passn_core::trainer::{train_grpo, EvalConfig, GrpoConfig, PolicyTable};
use passn_core::LossSpec;

use super::common::*;
use super::Ctx;
use crate::config::parse_params;
use crate::error::LabResult;
use crate::report::params;
use crate::report::Report;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GrpoBlock {
    pub group_size: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub steps_per_epoch: Option<usize>,
    pub budgets: Vec<u64>,
    /// Budget whose coverage is tracked against its own peak.
    pub tracked_n: u64,
}

impl Default for GrpoBlock {
    fn default() -> Self {
        Self {
            group_size: 8,
            learning_rate: 16.0,
            epochs: 12,
            batch_size: 8,
            steps_per_epoch: Some(25),
            budgets: vec![1, 4, 16, 64, 256],
            tracked_n: 64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GrpoParams {
    pub tasks: TaskBlock,
    pub grpo: GrpoBlock,
    /// Supervised runs on the same tasks for comparison.
    pub baselines: Vec<LossSpec>,
    pub baseline_train: TrainBlock,
}

impl Default for GrpoParams {
    fn default() -> Self {
        Self {
            tasks: TaskBlock {
                answer_count: 16,
                ..TaskBlock::default()
            },
            grpo: GrpoBlock::default(),
            baselines: vec![LossSpec::Ce, LossSpec::Dco { n: 4 }],
            baseline_train: TrainBlock {
                budgets: vec![1, 4, 16, 64, 256],
                ..TrainBlock::default()
            },
        }
    }
}

pub fn run(ctx: &Ctx, raw: &Value) -> LabResult<(Report, Value)> {
    let p: GrpoParams = parse_params(raw)?;
    let g = &p.grpo;
    if !g.budgets.contains(&g.tracked_n) {
        return Err(crate::error::config("grpo.budgets must contain tracked_n"));
    }
    let tasks = p.tasks.generate(ctx.seed_for("tasks"))?;
    let config = GrpoConfig {
        group_size: g.group_size,
        learning_rate: g.learning_rate,
        epochs: g.epochs,
        batch_size: g.batch_size,
        seed: ctx.seed_for("grpo"),
        steps_per_epoch: g.steps_per_epoch,
        train_ids: None,
        eval: EvalConfig {
            budgets: g.budgets.clone(),
            ..EvalConfig::default()
        },
    };
    let (_, traj) = train_grpo(&PolicyTable::uniform(&tasks), &tasks, &config)?;
    let seed = ctx.seed_for("train");
    let baselines = ctx.grid(&p.baselines, |&l| run_supervised(&tasks, &p.baseline_train, l, seed))?;

    let mut report = Report::new("grpo_compare");
    let run = params(&[("method", format!("grpo{}", g.group_size))]);
    for s in &traj.snapshots {
        let e = Some(s.epoch);
        for (n, c) in s.coverage.iter() {
            report.row(&run, "coverage", c, Some(n), e);
        }
        report.row(&run, "mean_mode_confidence", s.mean_greedy_confidence, None, e);
        report.row(&run, "informative_groups", s.kept as f64, None, e);
        report.row(&run, "skipped_groups", s.filtered as f64, None, e);
    }
    let mut refs = vec![(format!("grpo{}", g.group_size), &traj)];
    let mut finals = BTreeMap::new();
    for (loss, (_, bt)) in p.baselines.iter().zip(&baselines) {
        let label = loss.label();
        trajectory_rows(&mut report, &params(&[("method", label.clone())]), bt);
        finals.insert(label.clone(), bt.snapshots.last().unwrap().mean_greedy_confidence);
        refs.push((label, bt));
    }
    let mode: Vec<f64> = traj.snapshots.iter().map(|s| s.mean_greedy_confidence).collect();
    let tracked = coverage_at(&traj, g.tracked_n);
    report.summarize("grpo_mode_confidence_by_epoch", &mode);
    report.summarize("grpo_tracked_coverage_by_epoch", &tracked);
    report.summarize("mode_confidence_increasing", strictly_increasing(&mode));
    report.summarize("tracked_final_below_peak", final_below_earlier_peak(&tracked));
    report.summarize("baseline_final_mean_greedy_confidence", &finals);
    report.tables.push(trajectory_table(&refs));
    Ok((report, resolved(&p)))
}
