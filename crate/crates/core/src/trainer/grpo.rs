//! Group-relative policy gradient on tabular policies.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::numeric::sample_index;
use crate::rng::{stream, StreamRng};
use crate::trainer::policy::PolicyTable;
use crate::trainer::tasks::TaskSet;
use crate::trainer::train::{apply_row_grads, divergence_guard, snapshot, EvalConfig, TrainingTrajectory, WeightedIds};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GrpoConfig {
    pub group_size: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    #[serde(default)]
    pub steps_per_epoch: Option<usize>,
    #[serde(default)]
    pub train_ids: Option<Vec<usize>>,
    #[serde(default)]
    pub eval: EvalConfig,
}

impl GrpoConfig {
    pub fn validate(&self) -> Result<()> {
        if self.group_size < 2 {
            return Err(domain(format!("group size {} must be >= 2", self.group_size)));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(domain("learning rate must be positive"));
        }
        if self.epochs == 0 || self.batch_size == 0 || self.steps_per_epoch == Some(0) {
            return Err(domain("epochs, batch size and steps per epoch must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GrpoStepStats {
    /// Groups with mixed rewards, which produced a gradient.
    pub informative: u64,
    /// Groups skipped because every reward was equal.
    pub skipped: u64,
}

fn grpo_update(
    policy: &mut PolicyTable,
    tasks: &TaskSet,
    batch: &[usize],
    group_size: usize,
    learning_rate: f64,
    rng: &mut StreamRng,
) -> GrpoStepStats {
    let mut stats = GrpoStepStats::default();
    // descent-convention gradients: -sum_i A_i (e_{a_i} - s)
    let mut grads: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for &x in batch {
        let problem = &tasks.problems()[x];
        let s = policy.probs(x);
        let answers: Vec<usize> = (0..group_size).map(|_| sample_index(&s, rng.random::<f64>())).collect();
        let rewards: Vec<f64> = answers
            .iter()
            .map(|&a| if problem.training_reward(a) { 1.0 } else { 0.0 })
            .collect();
        let mean = rewards.iter().sum::<f64>() / group_size as f64;
        if rewards.iter().all(|&r| r == rewards[0]) {
            stats.skipped += 1;
            continue;
        }
        stats.informative += 1;
        let row = grads.entry(x).or_insert_with(|| vec![0.0; s.len()]);
        for (&a, &r) in answers.iter().zip(&rewards) {
            let adv = r - mean;
            for (g, sj) in row.iter_mut().zip(&s) {
                *g += adv * sj;
            }
            row[a] -= adv;
        }
    }
    let step = learning_rate / (batch.len() * group_size) as f64;
    apply_row_grads(policy, &grads, step);
    stats
}

/// One policy-gradient step over `batch`: sample a group of answers per
/// problem, baseline rewards by the group mean, skip all-equal groups and
/// ascend `sum_i A_i grad log pi(a_i)`, scaled by `lr / (|batch| * group)`.
pub fn grpo_step(
    policy: &PolicyTable,
    tasks: &TaskSet,
    batch: &[usize],
    group_size: usize,
    learning_rate: f64,
    seed: u64,
) -> Result<(PolicyTable, GrpoStepStats)> {
    policy.check_shape(tasks)?;
    tasks.check_ids(batch)?;
    if group_size < 2 {
        return Err(domain(format!("group size {group_size} must be >= 2")));
    }
    let mut next = policy.clone();
    let mut rng = stream(seed, "trainer.grpo_step", 0);
    let stats = grpo_update(&mut next, tasks, batch, group_size, learning_rate, &mut rng);
    divergence_guard(&next, 0, 0)?;
    Ok((next, stats))
}

/// Repeated [`grpo_step`]s on batches drawn proportional to sampling weight.
/// Snapshot `kept`/`filtered` count informative/skipped groups.
pub fn train_grpo(
    policy: &PolicyTable,
    tasks: &TaskSet,
    config: &GrpoConfig,
) -> Result<(PolicyTable, TrainingTrajectory)> {
    config.validate()?;
    policy.check_shape(tasks)?;
    let train_ids: Vec<usize> = match &config.train_ids {
        Some(ids) => ids.clone(),
        None => (0..tasks.len()).collect(),
    };
    let sampler = WeightedIds::new(tasks, &train_ids)?;
    if let Some(ids) = &config.eval.ids {
        tasks.check_ids(ids)?;
    }
    let steps = config
        .steps_per_epoch
        .unwrap_or_else(|| sampler.len().div_ceil(config.batch_size));
    let mut policy = policy.clone();
    let mut rng = stream(config.seed, "trainer.grpo", 0);
    let mut trajectory = TrainingTrajectory::default();
    for epoch in 1..=config.epochs {
        let mut totals = GrpoStepStats::default();
        for step in 0..steps {
            let batch: Vec<usize> = (0..config.batch_size).map(|_| sampler.draw(&mut rng)).collect();
            let s = grpo_update(
                &mut policy,
                tasks,
                &batch,
                config.group_size,
                config.learning_rate,
                &mut rng,
            );
            totals.informative += s.informative;
            totals.skipped += s.skipped;
            divergence_guard(&policy, epoch, step)?;
        }
        trajectory.snapshots.push(snapshot(
            &policy,
            tasks,
            &config.eval,
            epoch,
            totals.informative,
            totals.skipped,
        )?);
    }
    Ok((policy, trajectory))
}
