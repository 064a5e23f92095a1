//! Proof-search recipes on synthetic tactic trees.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use passn_core::proof::{
    analytic_coverage, chain_env, ensemble_search, mixed_env, pass_at_n_search, train_step_policy, MixedEnvConfig,
    StepPolicy, StepTrainConfig, DEFAULT_MAX_DEPTH,
};

use super::common::resolved;
use super::Ctx;
use crate::config::parse_params;
use crate::error::{config, LabResult};
use crate::report::{params, Report, Table};

// ------------------------------------------------------------------ scaling

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainCase {
    /// Proof length `k`.
    pub length: usize,
    pub budgets: Vec<u64>,
    /// Independent pass@N trials per budget.
    pub trials: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScalingParams {
    /// Tactics per state; a uniform policy then has `N_eff = branching`.
    pub branching: usize,
    pub cases: Vec<ChainCase>,
    pub max_depth: u32,
}

impl Default for ScalingParams {
    fn default() -> Self {
        Self {
            branching: 4,
            cases: vec![
                ChainCase {
                    length: 2,
                    budgets: vec![1, 4, 16],
                    trials: 20_000,
                },
                ChainCase {
                    length: 4,
                    budgets: vec![1, 4, 16],
                    trials: 200_000,
                },
            ],
            max_depth: DEFAULT_MAX_DEPTH,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
struct ScalingPoint {
    length: usize,
    n: u64,
    measured: f64,
    analytic: f64,
    standard_error: f64,
    z_score: f64,
    /// measured / (N / N_eff^k)
    width_ratio: f64,
}

pub fn scaling(ctx: &Ctx, raw: &Value) -> LabResult<(Report, Value)> {
    let p: ScalingParams = parse_params(raw)?;
    let jobs: Vec<(usize, u64, usize)> = p
        .cases
        .iter()
        .flat_map(|c| c.budgets.iter().map(move |&n| (c.length, n, c.trials)))
        .collect();
    if jobs.is_empty() || jobs.iter().any(|j| j.2 == 0) {
        return Err(config("scaling needs at least one case with positive trials"));
    }
    let points = ctx.grid(&jobs, |&(length, n, trials)| {
        let env = chain_env(p.branching, length)?;
        let policy = StepPolicy::uniform(&env);
        let seed = ctx.seed_for(&format!("scaling.k{length}.n{n}"));
        let report = pass_at_n_search(&policy, &env, &vec![0; trials], n, p.max_depth, seed)?;
        let analytic = analytic_coverage(&policy, &env, 0, n, p.max_depth)?;
        let standard_error = (analytic * (1.0 - analytic) / trials as f64).sqrt();
        let measured = report.success_fraction;
        Ok(ScalingPoint {
            length,
            n,
            measured,
            analytic,
            standard_error,
            z_score: (measured - analytic) / standard_error,
            width_ratio: measured / (n as f64 / (p.branching as f64).powi(length as i32)),
        })
    })?;
    let mut report = Report::new("tree_scaling");
    for s in &points {
        let run = params(&[("branching", p.branching.to_string()), ("length", s.length.to_string())]);
        report.row(&run, "measured", s.measured, Some(s.n), None);
        report.row(&run, "analytic", s.analytic, Some(s.n), None);
        report.row(&run, "standard_error", s.standard_error, Some(s.n), None);
        report.row(&run, "z_score", s.z_score, Some(s.n), None);
        report.row(&run, "width_ratio", s.width_ratio, Some(s.n), None);
    }
    report.summarize("points", &points);
    report.summarize("max_abs_z", points.iter().map(|s| s.z_score.abs()).fold(0.0, f64::max));
    Ok((report, resolved(&p)))
}

// ----------------------------------------------------------------- ensemble

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MixedEnvBlock {
    pub branching: usize,
    pub long_count: usize,
    pub long_length: usize,
    pub short_count: usize,
    pub short_length: usize,
    pub long_tactics: usize,
}

impl Default for MixedEnvBlock {
    fn default() -> Self {
        Self {
            branching: 16,
            long_count: 20,
            long_length: 6,
            short_count: 20,
            short_length: 2,
            long_tactics: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrainFamily {
    Long,
    Short,
    All,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnsembleParams {
    pub env: MixedEnvBlock,
    pub n_eff: Vec<u64>,
    pub epochs: usize,
    pub learning_rate: f64,
    /// Golden proofs used for training; every theorem is searched.
    pub train_on: TrainFamily,
    /// Rollouts per theorem for a single policy; split evenly in the ensemble.
    pub total_budget: u64,
    pub max_depth: u32,
}

impl Default for EnsembleParams {
    fn default() -> Self {
        Self {
            env: MixedEnvBlock::default(),
            n_eff: vec![1, 2, 4, 8, 16, 32],
            epochs: 30,
            learning_rate: 1.0,
            train_on: TrainFamily::Long,
            total_budget: 1536,
            max_depth: DEFAULT_MAX_DEPTH,
        }
    }
}

pub fn ensemble(ctx: &Ctx, raw: &Value) -> LabResult<(Report, Value)> {
    let p: EnsembleParams = parse_params(raw)?;
    let k = p.n_eff.len() as u64;
    if k == 0 || !p.total_budget.is_multiple_of(k) {
        return Err(config("total_budget must split evenly over a non-empty n_eff grid"));
    }
    let e = &p.env;
    let mixed = mixed_env(&MixedEnvConfig {
        branching: e.branching,
        long_count: e.long_count,
        long_length: e.long_length,
        short_count: e.short_count,
        short_length: e.short_length,
        long_tactics: e.long_tactics,
        seed: ctx.seed_for("env"),
    })?;
    let env = &mixed.env;
    let proof_ids = match p.train_on {
        TrainFamily::Long => mixed.long.clone(),
        TrainFamily::Short => mixed.short.clone(),
        TrainFamily::All => mixed.long.iter().chain(&mixed.short).copied().collect(),
    };
    let train_seed = ctx.seed_for("train");
    let policies = ctx.grid(&p.n_eff, |&n_eff| {
        let mut c = StepTrainConfig::stepwise(n_eff, p.epochs, p.learning_rate, train_seed);
        if n_eff == 1 {
            c.filter = None;
        }
        c.proof_ids = Some(proof_ids.clone());
        Ok(train_step_policy(&StepPolicy::uniform_shared(env), env, &c)?)
    })?;

    let theorems = env.theorems();
    let search_seed = ctx.seed_for("search");
    let singles = ctx.grid(&policies, |pol| {
        Ok(pass_at_n_search(
            pol,
            env,
            &theorems,
            p.total_budget,
            p.max_depth,
            search_seed,
        )?)
    })?;
    let per_policy = p.total_budget / k;
    let ens = ensemble_search(&policies, env, &theorems, per_policy, p.max_depth, search_seed)?;

    let family_rate =
        |solved: &[bool], ids: &[usize]| ids.iter().filter(|&&i| solved[i]).count() as f64 / ids.len().max(1) as f64;
    let mut report = Report::new("tree_ensemble");
    let mut table = Table::new("search.csv", &["theorem", "policy", "solved", "depth"]);
    let mut single = BTreeMap::new();
    let n_total = Some(p.total_budget);
    for ((&n_eff, pol), s) in p.n_eff.iter().zip(&policies).zip(&singles) {
        let run = params(&[("policy", format!("n_eff={n_eff}"))]);
        report.row(&run, "success_fraction", s.success_fraction, n_total, None);
        report.row(&run, "long_success", family_rate(&s.solved, &mixed.long), n_total, None);
        report.row(
            &run,
            "short_success",
            family_rate(&s.solved, &mixed.short),
            n_total,
            None,
        );
        let states: Vec<usize> = mixed
            .long
            .iter()
            .flat_map(|&i| env.replay(&env.golden_proofs()[i]).expect("golden proofs replay"))
            .collect();
        let pr = states.iter().map(|&s| pol.participation_ratio(s)).sum::<f64>() / states.len().max(1) as f64;
        report.row(&run, "mean_participation_ratio", pr, None, None);
        single.insert(n_eff.to_string(), s.success_fraction);
        for (i, (solved, depth)) in s.solved.iter().zip(&s.depth).enumerate() {
            table.push(vec![
                i.to_string(),
                format!("n_eff={n_eff}"),
                solved.to_string(),
                depth.map(|d| d.to_string()).unwrap_or_default(),
            ]);
        }
    }
    for (&n_eff, solved) in p.n_eff.iter().zip(&ens.attribution) {
        for (i, s) in solved.iter().enumerate() {
            table.push(vec![
                i.to_string(),
                format!("ensemble:n_eff={n_eff}"),
                s.to_string(),
                String::new(),
            ]);
        }
    }
    let run = params(&[("policy", "ensemble".into())]);
    report.row(&run, "success_fraction", ens.success_fraction, n_total, None);
    report.row(
        &run,
        "long_success",
        family_rate(&ens.solved, &mixed.long),
        n_total,
        None,
    );
    report.row(
        &run,
        "short_success",
        family_rate(&ens.solved, &mixed.short),
        n_total,
        None,
    );
    let best = singles.iter().map(|s| s.success_fraction).fold(0.0, f64::max);
    report.summarize("single_success", &single);
    report.summarize("best_single_success", best);
    report.summarize("ensemble_success", ens.success_fraction);
    report.summarize("ensemble_ge_best_single", ens.success_fraction >= best);
    report.tables.push(table);
    Ok((report, resolved(&p)))
}
