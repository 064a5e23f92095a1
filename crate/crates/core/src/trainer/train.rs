//! Supervised training of tabular policies under CE / DCO / focal losses.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::coverage::CoverageCurve;
use crate::error::{domain, Error, Result};
use crate::losses::{dco_factor, FilterPolicy, LossSpec};
use crate::rng::{stream, StreamRng};
use crate::trainer::diagnostics::{
    calibration_table_on, entropy_report_on, eval_pass_at_n_on, greedy_confidence_histogram_on, greedy_confidences,
    Histogram,
};
use crate::trainer::policy::PolicyTable;
use crate::trainer::tasks::TaskSet;

/// Replacement draws allowed per batch slot before a step goes out short.
pub const MAX_DRAWS_PER_SLOT: usize = 16;

pub fn default_eval_budgets() -> Vec<u64> {
    vec![1, 4, 16, 64, 256]
}

fn default_bins() -> usize {
    20
}

fn default_top_k() -> usize {
    1
}

/// Evaluation settings shared by every trainer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalConfig {
    #[serde(default = "default_eval_budgets")]
    pub budgets: Vec<u64>,
    /// Problems scored in snapshots; all when absent.
    #[serde(default)]
    pub ids: Option<Vec<usize>>,
    #[serde(default = "default_bins")]
    pub histogram_bins: usize,
    #[serde(default = "default_top_k")]
    pub calibration_top_k: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            budgets: default_eval_budgets(),
            ids: None,
            histogram_bins: default_bins(),
            calibration_top_k: default_top_k(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub loss: LossSpec,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    /// Applied to DCO-family losses only; `None` trains on every example.
    #[serde(default)]
    pub filter: Option<FilterPolicy>,
    pub seed: u64,
    /// Defaults to one pass: `ceil(|train| / batch_size)`.
    #[serde(default)]
    pub steps_per_epoch: Option<usize>,
    /// Problems drawn for training; all when absent.
    #[serde(default)]
    pub train_ids: Option<Vec<usize>>,
    #[serde(default)]
    pub eval: EvalConfig,
}

impl TrainConfig {
    pub fn new(loss: LossSpec, learning_rate: f64, epochs: usize, batch_size: usize, seed: u64) -> Self {
        Self {
            loss,
            learning_rate,
            epochs,
            batch_size,
            filter: loss.dco_budget().map(|_| FilterPolicy::direct_answer()),
            seed,
            steps_per_epoch: None,
            train_ids: None,
            eval: EvalConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.loss.validate()?;
        if matches!(self.loss, LossSpec::Grpo { .. }) {
            return Err(Error::Contract("use train_grpo for policy-gradient training".into()));
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

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochSnapshot {
    /// 1-based.
    pub epoch: usize,
    pub coverage: CoverageCurve,
    pub greedy_histogram: Histogram,
    pub mean_greedy_confidence: f64,
    pub mean_entropy: f64,
    pub entropy_sem: f64,
    pub calibration: Vec<f64>,
    /// Examples that contributed a gradient this epoch.
    pub kept: u64,
    /// Examples dropped by the filter this epoch.
    pub filtered: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingTrajectory {
    pub snapshots: Vec<EpochSnapshot>,
}

/// Problem sampler proportional to `sampling_weight`.
pub(crate) struct WeightedIds {
    ids: Vec<usize>,
    cumulative: Vec<f64>,
}

impl WeightedIds {
    pub(crate) fn new(tasks: &TaskSet, ids: &[usize]) -> Result<Self> {
        if ids.is_empty() {
            return Err(domain("no problems to train on"));
        }
        tasks.check_ids(ids)?;
        let mut acc = 0.0;
        let cumulative = ids
            .iter()
            .map(|&x| {
                acc += tasks.problems()[x].sampling_weight;
                acc
            })
            .collect();
        Ok(Self {
            ids: ids.to_vec(),
            cumulative,
        })
    }

    pub(crate) fn draw(&self, rng: &mut StreamRng) -> usize {
        let u = rng.random::<f64>() * self.cumulative.last().unwrap();
        let i = self.cumulative.partition_point(|&c| c <= u);
        self.ids[i.min(self.ids.len() - 1)]
    }

    pub(crate) fn len(&self) -> usize {
        self.ids.len()
    }
}

pub(crate) fn snapshot(
    policy: &PolicyTable,
    tasks: &TaskSet,
    eval: &EvalConfig,
    epoch: usize,
    kept: u64,
    filtered: u64,
) -> Result<EpochSnapshot> {
    let all: Vec<usize>;
    let ids = match &eval.ids {
        Some(ids) => ids.as_slice(),
        None => {
            all = (0..tasks.len()).collect();
            &all
        }
    };
    let edges = Histogram::uniform_edges(eval.histogram_bins.max(1));
    let greedy = greedy_confidences(policy, ids);
    let entropy = entropy_report_on(policy, tasks, ids)?;
    Ok(EpochSnapshot {
        epoch,
        coverage: eval_pass_at_n_on(policy, tasks, ids, &eval.budgets)?,
        greedy_histogram: greedy_confidence_histogram_on(policy, tasks, ids, &edges)?,
        mean_greedy_confidence: greedy.iter().sum::<f64>() / greedy.len() as f64,
        mean_entropy: entropy.mean,
        entropy_sem: entropy.sem,
        calibration: calibration_table_on(policy, tasks, ids, eval.calibration_top_k)?,
        kept,
        filtered,
    })
}

/// Add `scale * (s - onehot(y))`-style row gradients to the policy.
pub(crate) fn apply_row_grads(policy: &mut PolicyTable, grads: &BTreeMap<usize, Vec<f64>>, step: f64) {
    let mut bias_grad: Option<Vec<f64>> = policy.bias().map(|b| vec![0.0; b.len()]);
    for (&x, g) in grads {
        for (z, gj) in policy.row_mut(x).iter_mut().zip(g) {
            *z -= step * gj;
        }
        if let Some(bg) = bias_grad.as_mut() {
            for (a, gj) in bg.iter_mut().zip(g) {
                *a += gj;
            }
        }
    }
    if let (Some(bg), Some(b)) = (bias_grad, policy.bias_mut()) {
        for (z, gj) in b.iter_mut().zip(&bg) {
            *z -= step * gj;
        }
    }
}

pub(crate) fn divergence_guard(policy: &PolicyTable, epoch: usize, step: usize) -> Result<()> {
    match policy.find_non_finite() {
        Some(loc) => Err(Error::Divergence(format!("{loc} at epoch {epoch}, step {step}"))),
        None => Ok(()),
    }
}

/// Mini-batch gradient descent with gradient `w * (softmax - onehot(y))` per
/// example, where `w` is the loss's logit weight at the current confidence.
///
/// For DCO-family losses with a filter, examples with `F(N', p) < eps` are
/// dropped and, when the filter asks for replacement, redrawn (up to
/// [`MAX_DRAWS_PER_SLOT`] draws per slot). Confidences are read from the
/// parameters at batch-assembly time. Gradients are averaged over the
/// configured batch size.
pub fn train(policy: &PolicyTable, tasks: &TaskSet, config: &TrainConfig) -> Result<(PolicyTable, TrainingTrajectory)> {
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
    let filter = match (config.filter, config.loss.dco_budget()) {
        (Some(f), Some(n)) => Some((f, n)),
        _ => None,
    };
    let steps = config
        .steps_per_epoch
        .unwrap_or_else(|| sampler.len().div_ceil(config.batch_size));
    let step_size = config.learning_rate / config.batch_size as f64;

    let mut policy = policy.clone();
    let mut rng = stream(config.seed, "trainer.supervised", 0);
    let mut trajectory = TrainingTrajectory::default();
    for epoch in 1..=config.epochs {
        let (mut kept, mut filtered) = (0u64, 0u64);
        for step in 0..steps {
            let mut grads: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
            let mut slots = 0;
            let mut draws = 0;
            while slots < config.batch_size && draws < config.batch_size * MAX_DRAWS_PER_SLOT {
                draws += 1;
                let x = sampler.draw(&mut rng);
                let y = tasks.problems()[x].training_target(&mut rng);
                let s = policy.probs(x);
                let p = s[y];
                if let Some((f, n)) = filter {
                    if dco_factor(p, n)? < f.threshold_eps {
                        filtered += 1;
                        if !f.replacement {
                            slots += 1;
                        }
                        continue;
                    }
                }
                let w = config.loss.logit_weight(p)?;
                let row = grads.entry(x).or_insert_with(|| vec![0.0; s.len()]);
                for (g, sj) in row.iter_mut().zip(&s) {
                    *g += w * sj;
                }
                row[y] -= w;
                slots += 1;
                kept += 1;
            }
            apply_row_grads(&mut policy, &grads, step_size);
            divergence_guard(&policy, epoch, step)?;
        }
        trajectory
            .snapshots
            .push(snapshot(&policy, tasks, &config.eval, epoch, kept, filtered)?);
    }
    Ok((policy, trajectory))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trainer::tasks::Problem;

    fn single(r: usize) -> TaskSet {
        TaskSet::new(vec![Problem {
            answer_count: r,
            correct: vec![0],
            difficulty: 1,
            sampling_weight: 1.0,
            noisy_label: None,
        }])
        .unwrap()
    }

    #[test]
    fn ce_drives_confidence_up_monotonically() {
        let tasks = single(4);
        let mut cfg = TrainConfig::new(LossSpec::Ce, 1.0, 30, 1, 0);
        cfg.eval.budgets = vec![1];
        let (_, traj) = train(&PolicyTable::uniform(&tasks), &tasks, &cfg).unwrap();
        let p: Vec<f64> = traj.snapshots.iter().map(|s| s.coverage.get(1).unwrap()).collect();
        assert!(p.windows(2).all(|w| w[1] > w[0]));
        assert!(*p.last().unwrap() > 0.95);
    }

    #[test]
    fn ce_dco1_focal0_are_bitwise_identical() {
        let tasks =
            crate::trainer::tasks::generate_tasks(&crate::trainer::tasks::TaskGenConfig::new(30, 6, 3, 9)).unwrap();
        let pol = PolicyTable::uniform_shared(&tasks).unwrap();
        let run = |loss| {
            let cfg = TrainConfig::new(loss, 0.7, 3, 4, 42);
            train(&pol, &tasks, &cfg).unwrap()
        };
        let ce = run(LossSpec::Ce);
        assert_eq!(ce, run(LossSpec::Dco { n: 1 }));
        assert_eq!(ce, run(LossSpec::Focal { gamma: 0.0 }));
    }

    #[test]
    fn filtered_dco_plateaus_at_threshold() {
        let tasks = single(512);
        let lr = 0.2;
        let mut cfg = TrainConfig::new(LossSpec::Dco { n: 256 }, lr, 200, 1, 3);
        cfg.eval.budgets = vec![1];
        let (_, traj) = train(&PolicyTable::uniform(&tasks), &tasks, &cfg).unwrap();
        let p = traj.snapshots.last().unwrap().coverage.get(1).unwrap();
        // root of F(256, p) = 0.3, by bisection on the decreasing factor
        let (mut lo, mut hi) = (1e-4, 0.5);
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if dco_factor(mid, 256).unwrap() > 0.3 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        // the last admitted step moves log p by at most lr * F
        assert!(p >= lo && p <= lo * (lr * 0.31f64).exp(), "plateau at {p}, root {lo}");
        assert_eq!(traj.snapshots.last().unwrap().kept, 0);
    }

    #[test]
    fn rejects_bad_config() {
        let tasks = single(2);
        let pol = PolicyTable::uniform(&tasks);
        let bad = TrainConfig::new(LossSpec::Ce, 0.0, 1, 1, 0);
        assert!(train(&pol, &tasks, &bad).is_err());
        let grpo = TrainConfig::new(LossSpec::Grpo { group: 4 }, 1.0, 1, 1, 0);
        assert!(matches!(train(&pol, &tasks, &grpo), Err(Error::Contract(_))));
    }

    #[test]
    fn divergence_is_reported() {
        let tasks = single(3);
        let mut pol = PolicyTable::uniform(&tasks);
        divergence_guard(&pol, 1, 0).unwrap();
        pol.row_mut(0)[2] = f64::INFINITY;
        let err = divergence_guard(&pol, 1, 0).unwrap_err();
        assert!(
            matches!(err, Error::Divergence(ref m) if m.contains("(0, 2)")),
            "{err:?}"
        );
    }
}
