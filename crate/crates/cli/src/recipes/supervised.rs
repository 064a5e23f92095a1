//! Recipes over tabular softmax policies on synthetic task sets.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use passn_core::trainer::{
    difficulty_profile, directional_derivative, eval_pass_at_n, pareto_frontier, split_ids, train, PolicyTable,
    Problem, TaskSet,
};
use passn_core::{CoverageCurve, LossSpec};

use super::common::*;
use super::Ctx;
use crate::config::parse_params;
use crate::error::{config, LabResult};
use crate::report::{params, Report, Table};

fn loss_for_budget(n: u64) -> LossSpec {
    if n == 1 {
        LossSpec::Ce
    } else {
        LossSpec::Dco { n }
    }
}

// ---------------------------------------------------------------- toy models

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ToyParams {
    pub budgets: Vec<u64>,
    /// Confidence the hedging model puts on the correct answer.
    pub hedge_confidence: f64,
}

impl Default for ToyParams {
    fn default() -> Self {
        Self {
            budgets: vec![1, 2, 4, 16, 64, 256, 1024, 4096],
            hedge_confidence: 0.1,
        }
    }
}

/// Two problems with answers {0, 1}; answer `x` is correct on problem `x`.
fn two_problems() -> LabResult<TaskSet> {
    let p = |c| Problem {
        answer_count: 2,
        correct: vec![c],
        difficulty: 1,
        sampling_weight: 1.0,
        noisy_label: None,
    };
    Ok(TaskSet::new(vec![p(0), p(1)])?)
}

pub fn toy_models(_ctx: &Ctx, raw: &Value) -> LabResult<(Report, Value)> {
    let p: ToyParams = parse_params(raw)?;
    if !(p.hedge_confidence > 0.0 && p.hedge_confidence < 1.0) {
        return Err(config("hedge_confidence must lie in (0, 1)"));
    }
    let tasks = two_problems()?;
    let h = p.hedge_confidence;
    // confident: always answer 0; hedging: little mass on the right answer
    let confident = PolicyTable::from_probabilities(&[vec![1.0, 0.0], vec![1.0, 0.0]])?;
    let hedging = PolicyTable::from_probabilities(&[vec![h, 1.0 - h], vec![1.0 - h, h]])?;
    let c1 = eval_pass_at_n(&confident, &tasks, &p.budgets)?;
    let c2 = eval_pass_at_n(&hedging, &tasks, &p.budgets)?;
    let mut report = Report::new("toy_models");
    for (name, c) in [("confident", &c1), ("hedging", &c2)] {
        for (n, v) in c.iter() {
            report.row(&params(&[("model", name.into())]), "coverage", v, Some(n), None);
        }
    }
    let nmax = *p
        .budgets
        .iter()
        .max()
        .ok_or_else(|| config("budgets must be non-empty"))?;
    report.summarize("confident_coverage", c1.iter().map(|(_, v)| v).collect::<Vec<_>>());
    report.summarize("confident_constant_half", c1.iter().all(|(_, v)| v == 0.5));
    report.summarize("hedging_pass1", c2.get(1));
    report.summarize("hedging_at_max_n", c2.get(nmax));
    Ok((report, resolved(&p)))
}

// -------------------------------------------------------- misalignment table

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CeParams {
    pub tasks: TaskBlock,
    pub train: TrainBlock,
}

pub fn misalignment_table(ctx: &Ctx, raw: &Value) -> LabResult<(Report, Value)> {
    let p: CeParams = parse_params(raw)?;
    p.train.require_budgets(&[1, 256])?;
    let tasks = p.tasks.generate(ctx.seed_for("tasks"))?;
    let (_, traj) = run_supervised(&tasks, &p.train, LossSpec::Ce, ctx.seed_for("train"))?;
    let mut report = Report::new("misalignment_table");
    let run = params(&[("loss", "ce".into())]);
    trajectory_rows(&mut report, &run, &traj);
    let pass1 = coverage_at(&traj, 1);
    let pass256 = coverage_at(&traj, 256);
    report.summarize("pass1_by_epoch", &pass1);
    report.summarize("pass256_by_epoch", &pass256);
    report.summarize("pass1_non_decreasing", non_decreasing(&pass1));
    report.summarize("pass256_final_below_peak", final_below_earlier_peak(&pass256));
    report.tables.push(trajectory_table(&[("ce".into(), &traj)]));
    Ok((report, resolved(&p)))
}

// -------------------------------------------------------------- dco frontier

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FrontierParams {
    pub tasks: TaskBlock,
    pub train: TrainBlock,
    /// Training budgets `N'`; 1 trains with CE.
    pub n_train: Vec<u64>,
}

impl Default for FrontierParams {
    fn default() -> Self {
        Self {
            tasks: TaskBlock::default(),
            train: TrainBlock::default(),
            n_train: vec![1, 16, 256],
        }
    }
}

pub fn dco_frontier(ctx: &Ctx, raw: &Value) -> LabResult<(Report, Value)> {
    let p: FrontierParams = parse_params(raw)?;
    let mut grid = p.n_train.clone();
    grid.sort_unstable();
    grid.dedup();
    let (&lo, &hi) = match (grid.first(), grid.last()) {
        (Some(lo), Some(hi)) if lo >= &1 => (lo, hi),
        _ => return Err(config("n_train must be non-empty and positive")),
    };
    p.train.require_budgets(&[1, hi])?;
    let tasks = p.tasks.generate(ctx.seed_for("tasks"))?;
    let seed = ctx.seed_for("train");
    let runs = ctx.grid(&grid, |&n| run_supervised(&tasks, &p.train, loss_for_budget(n), seed))?;

    let mut report = Report::new("dco_frontier");
    let mut curves: BTreeMap<u64, CoverageCurve> = BTreeMap::new();
    let mut greedy = BTreeMap::new();
    let mut traj_refs = Vec::new();
    for (&n_train, (_, traj)) in grid.iter().zip(&runs) {
        let run = params(&[("n_train", n_train.to_string())]);
        trajectory_rows(&mut report, &run, traj);
        let last = traj.snapshots.last().expect("at least one epoch");
        curves.insert(n_train, last.coverage.clone());
        greedy.insert(n_train.to_string(), last.mean_greedy_confidence);
        traj_refs.push((format!("n_train={n_train}"), traj));
    }
    let frontier = pareto_frontier(&curves)?;
    let mut header = vec!["n".to_string()];
    header.extend(grid.iter().map(|n| format!("n_train_{n}")));
    header.extend(["frontier".to_string(), "best_n_train".to_string()]);
    let mut pareto = Table::with_header("pareto.csv", header);
    for f in &frontier {
        report.row("frontier", "frontier_coverage", f.value, Some(f.n), None);
        report.row("frontier", "frontier_n_train", f.best_train_n as f64, Some(f.n), None);
        let mut rec = vec![f.n.to_string()];
        rec.extend(grid.iter().map(|t| curves[t].get(f.n).unwrap().to_string()));
        rec.push(f.value.to_string());
        rec.push(f.best_train_n.to_string());
        pareto.push(rec);
    }
    let argmax: Vec<u64> = frontier.iter().map(|f| f.best_train_n).collect();
    let at = |t: u64, n: u64| curves[&t].get(n).unwrap();
    report.summarize("frontier_argmax", &argmax);
    report.summarize("argmax_non_decreasing", argmax.windows(2).all(|w| w[1] >= w[0]));
    report.summarize("largest_beats_smallest_at_largest_n", at(hi, hi) > at(lo, hi));
    report.summarize("smallest_beats_largest_at_n1", at(lo, 1) > at(hi, 1));
    report.summarize("final_mean_greedy_confidence", &greedy);
    report.tables.push(pareto);
    report.tables.push(trajectory_table(&traj_refs));
    Ok((report, resolved(&p)))
}

// ------------------------------------------------------- overconfidence hist

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossGridParams {
    pub tasks: TaskBlock,
    pub train: TrainBlock,
    pub losses: Vec<LossSpec>,
}

impl Default for LossGridParams {
    fn default() -> Self {
        Self {
            tasks: TaskBlock::default(),
            train: TrainBlock::default(),
            losses: vec![LossSpec::Ce, LossSpec::Dco { n: 16 }, LossSpec::Dco { n: 256 }],
        }
    }
}

fn run_losses(ctx: &Ctx, p: &LossGridParams) -> LabResult<Vec<(PolicyTable, passn_core::trainer::TrainingTrajectory)>> {
    if p.losses.is_empty() {
        return Err(config("losses must be non-empty"));
    }
    for l in &p.losses {
        if matches!(l, LossSpec::Grpo { .. }) {
            return Err(config("GRPO runs belong to grpo_compare"));
        }
    }
    let tasks = p.tasks.generate(ctx.seed_for("tasks"))?;
    let seed = ctx.seed_for("train");
    ctx.grid(&p.losses, |&l| run_supervised(&tasks, &p.train, l, seed))
}

pub fn overconfidence_hist(ctx: &Ctx, raw: &Value) -> LabResult<(Report, Value)> {
    let p: LossGridParams = parse_params(raw)?;
    let runs = run_losses(ctx, &p)?;
    let mut report = Report::new("overconfidence_hist");
    let mut hist = Table::new("histograms.csv", &HISTOGRAM_COLUMNS);
    let mut finals = Vec::new();
    for (loss, (_, traj)) in p.losses.iter().zip(&runs) {
        let label = loss.label();
        let run = params(&[("loss", label.clone())]);
        for s in &traj.snapshots {
            report.row(
                &run,
                "mean_greedy_confidence",
                s.mean_greedy_confidence,
                None,
                Some(s.epoch),
            );
            push_histogram(&mut hist, &label, s.epoch, &s.greedy_histogram);
        }
        finals.push((label, traj.snapshots.last().unwrap().mean_greedy_confidence));
    }
    let values: Vec<f64> = finals.iter().map(|f| f.1).collect();
    report.summarize(
        "final_mean_greedy_confidence",
        finals.iter().cloned().collect::<BTreeMap<_, _>>(),
    );
    report.summarize("decreasing_in_listed_order", values.windows(2).all(|w| w[0] > w[1]));
    report.tables.push(hist);
    Ok((report, resolved(&p)))
}

// ------------------------------------------------------------- focal compare

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FocalParams {
    pub tasks: TaskBlock,
    pub train: TrainBlock,
    pub gammas: Vec<f64>,
    pub dco_n: Vec<u64>,
}

impl Default for FocalParams {
    fn default() -> Self {
        Self {
            tasks: TaskBlock::default(),
            train: TrainBlock::default(),
            gammas: vec![0.0, 1.0, 2.0, 5.0],
            dco_n: vec![16],
        }
    }
}

pub fn focal_compare(ctx: &Ctx, raw: &Value) -> LabResult<(Report, Value)> {
    let p: FocalParams = parse_params(raw)?;
    let mut losses = vec![LossSpec::Ce];
    losses.extend(p.gammas.iter().map(|&gamma| LossSpec::Focal { gamma }));
    losses.extend(p.dco_n.iter().map(|&n| LossSpec::Dco { n }));
    let grid = LossGridParams {
        tasks: p.tasks.clone(),
        train: p.train.clone(),
        losses: losses.clone(),
    };
    let runs = run_losses(ctx, &grid)?;
    let mut report = Report::new("focal_compare");
    let mut greedy = BTreeMap::new();
    let mut refs = Vec::new();
    for (loss, (_, traj)) in losses.iter().zip(&runs) {
        let label = loss.label();
        let last = traj.snapshots.last().unwrap();
        let run = params(&[("loss", label.clone())]);
        for (n, c) in last.coverage.iter() {
            report.row(&run, "coverage", c, Some(n), Some(last.epoch));
        }
        report.row(
            &run,
            "mean_greedy_confidence",
            last.mean_greedy_confidence,
            None,
            Some(last.epoch),
        );
        report.row(&run, "mean_entropy", last.mean_entropy, None, Some(last.epoch));
        greedy.insert(label.clone(), last.mean_greedy_confidence);
        refs.push((label, traj));
    }
    let focal0_matches_ce = losses
        .iter()
        .position(|l| *l == LossSpec::Focal { gamma: 0.0 })
        .map(|i| runs[i].1 == runs[0].1);
    report.summarize("final_mean_greedy_confidence", &greedy);
    report.summarize("focal0_bitwise_ce", focal0_matches_ce);
    report.tables.push(trajectory_table(&refs));
    Ok((report, resolved(&p)))
}

// --------------------------------------------------------- entropy diversity

pub fn entropy_diversity(ctx: &Ctx, raw: &Value) -> LabResult<(Report, Value)> {
    #[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
    #[serde(default, deny_unknown_fields)]
    struct EntropyParams {
        tasks: TaskBlock,
        train: TrainBlock,
        n_train: Vec<u64>,
    }
    impl Default for EntropyParams {
        fn default() -> Self {
            Self {
                tasks: TaskBlock::default(),
                train: TrainBlock::default(),
                n_train: vec![1, 4, 16, 64, 256],
            }
        }
    }
    let p: EntropyParams = parse_params(raw)?;
    let grid = LossGridParams {
        tasks: p.tasks.clone(),
        train: p.train.clone(),
        losses: p.n_train.iter().map(|&n| loss_for_budget(n)).collect(),
    };
    let runs = run_losses(ctx, &grid)?;
    let mut report = Report::new("entropy_diversity");
    let mut finals = Vec::new();
    for (&n_train, (_, traj)) in p.n_train.iter().zip(&runs) {
        let run = params(&[("n_train", n_train.to_string())]);
        for s in &traj.snapshots {
            report.row(&run, "mean_entropy", s.mean_entropy, None, Some(s.epoch));
            report.row(&run, "entropy_sem", s.entropy_sem, None, Some(s.epoch));
        }
        finals.push(traj.snapshots.last().unwrap().mean_entropy);
    }
    report.summarize("final_mean_entropy", &finals);
    report.summarize("entropy_non_decreasing_in_n_train", non_decreasing(&finals));
    Ok((report, resolved(&p)))
}

// ---------------------------------------------------------- difficulty probe

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProbeParams {
    pub tasks: TaskBlock,
    pub train: TrainBlock,
    /// Fraction of problems used for training; the rest is the test set.
    pub train_fraction: f64,
    /// `N` values at which the test loss is differentiated.
    pub n_values: Vec<u64>,
}

impl Default for ProbeParams {
    fn default() -> Self {
        Self {
            tasks: TaskBlock {
                problem_count: 300,
                answer_count: 256,
                difficulty_levels: vec![1.0; 4],
                label_noise: 0.0,
                max_correct: 4,
                shared_easy_answer: true,
            },
            train: TrainBlock {
                epochs: 8,
                steps_per_epoch: Some(50),
                budgets: vec![1, 16, 256],
                ..TrainBlock::default()
            },
            train_fraction: 0.7,
            n_values: vec![1, 16, 256],
        }
    }
}

/// Directional derivative of the held-out `-log C^N` loss along the CE update
/// of easy training problems (toward their first correct answer), tracked per
/// epoch; plus per-level confidence and `F` at the end.
pub fn difficulty_probe(ctx: &Ctx, raw: &Value) -> LabResult<(Report, Value)> {
    let p: ProbeParams = parse_params(raw)?;
    if !(p.train_fraction > 0.0 && p.train_fraction < 1.0) {
        return Err(config("train_fraction must lie in (0, 1)"));
    }
    let tasks = p.tasks.generate(ctx.seed_for("tasks"))?;
    let (train_ids, test_ids) = split_ids(tasks.len(), p.train_fraction, ctx.seed_for("split"));
    let probe: Vec<(usize, usize)> = train_ids
        .iter()
        .filter(|&&x| tasks.problems()[x].difficulty == 1)
        .map(|&x| (x, tasks.problems()[x].correct[0]))
        .collect();
    if probe.is_empty() || test_ids.is_empty() {
        return Err(config("split leaves no easy training problems or no test problems"));
    }
    let mut config = p.train.config(LossSpec::Ce, 0);
    config.epochs = 1;
    config.train_ids = Some(train_ids.clone());
    config.eval.ids = Some(test_ids.clone());

    let mut report = Report::new("difficulty_probe");
    let mut policy = PolicyTable::uniform_shared(&tasks)?;
    let mut signs: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for epoch in 0..=p.train.epochs {
        if epoch > 0 {
            config.seed = ctx.seed_for(&format!("train.epoch{epoch}"));
            let (next, traj) = train(&policy, &tasks, &config)?;
            policy = next;
            for (n, c) in traj.snapshots[0].coverage.iter() {
                report.row("split=test", "coverage", c, Some(n), Some(epoch));
            }
        }
        for &n in &p.n_values {
            let d = directional_derivative(&policy, &tasks, &probe, &test_ids, n)?;
            report.row("split=test", "directional_derivative", d, Some(n), Some(epoch));
            signs.entry(n.to_string()).or_default().push(d);
        }
    }
    for &n in &p.n_values {
        for s in difficulty_profile(&policy, &tasks, n)? {
            let run = params(&[("level", s.level.to_string())]);
            report.row(
                &run,
                "mean_confidence",
                s.mean_confidence,
                Some(n),
                Some(p.train.epochs),
            );
            report.row(&run, "mean_factor", s.mean_factor, Some(n), Some(p.train.epochs));
        }
    }
    let flips: BTreeMap<&String, bool> = signs
        .iter()
        .map(|(n, d)| (n, d[0] < 0.0 && *d.last().unwrap() > 0.0))
        .collect();
    report.summarize("sign_flip_by_n", flips);
    report.summarize("directional_derivative_by_n", &signs);
    Ok((report, resolved(&p)))
}
