//! Named experiment recipes. Each is a pure function of its parameters and
//! the root seed; sub-experiments draw seeds by labeled derivation.

mod bounds;
mod common;
mod cot;
mod grpo;
mod supervised;
mod tree;

use rayon::prelude::*;
use serde_json::Value;

use passn_core::rng::derive_seed;

use crate::error::{config, LabResult};
use crate::report::Report;

pub use bounds::BoundsParams;

/// Registry entry printed by `list-recipes`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RecipeInfo {
    pub name: &'static str,
    pub description: &'static str,
    /// The figure or table the recipe is a desk-scale analogue of.
    pub anchor: &'static str,
}

type Runner = fn(&Ctx, &Value) -> LabResult<(Report, Value)>;

struct Entry {
    info: RecipeInfo,
    run: Runner,
}

const fn entry(name: &'static str, description: &'static str, anchor: &'static str, run: Runner) -> Entry {
    Entry {
        info: RecipeInfo {
            name,
            description,
            anchor,
        },
        run,
    }
}

static REGISTRY: &[Entry] = &[
    entry(
        "bounds_sweep",
        "upper and lower bounds on the optimal max confidence over N",
        "optimal-confidence bound figure",
        bounds::run,
    ),
    entry(
        "toy_models",
        "pass@N of the confident and the hedging two-problem models",
        "two-problem misalignment example",
        supervised::toy_models,
    ),
    entry(
        "misalignment_table",
        "CE training on noisy tasks: pass@1 rises while pass@256 falls",
        "pass@N-vs-epoch misalignment table",
        supervised::misalignment_table,
    ),
    entry(
        "dco_frontier",
        "pass@N curves of CE/DCO(N') models and their Pareto frontier",
        "Pareto-frontier figure",
        supervised::dco_frontier,
    ),
    entry(
        "overconfidence_hist",
        "greedy-confidence histograms per epoch for CE and DCO",
        "greedy-confidence histogram figure",
        supervised::overconfidence_hist,
    ),
    entry(
        "focal_compare",
        "focal loss baselines against CE and DCO",
        "focal-loss baseline table",
        supervised::focal_compare,
    ),
    entry(
        "entropy_diversity",
        "output entropy of models trained with growing N'",
        "output-entropy diagnostic figure",
        supervised::entropy_diversity,
    ),
    entry(
        "difficulty_probe",
        "directional derivative of test loss along easy-problem updates, and per-level F",
        "directional-derivative and data-difficulty diagnostics",
        supervised::difficulty_probe,
    ),
    entry(
        "tree_scaling",
        "Monte-Carlo vs analytic pass@N on uniform tactic chains",
        "search-tree width model",
        tree::scaling,
    ),
    entry(
        "tree_ensemble",
        "step-wise DCO policies over N_eff and their ensemble at equal budget",
        "theorem-proving ensemble table",
        tree::ensemble,
    ),
    entry(
        "cot_dcoa",
        "CE vs approximate DCO on a toy chain-of-thought model",
        "reasoning-model confidence drift and discard figures",
        cot::run,
    ),
    entry(
        "grpo_compare",
        "group-relative policy gradient against supervised baselines",
        "policy-gradient overconfidence figure",
        grpo::run,
    ),
];

/// Registered recipes in their stable listing order.
pub fn list() -> Vec<RecipeInfo> {
    REGISTRY.iter().map(|e| e.info).collect()
}

/// Shared run context: root seed and worker pool.
pub struct Ctx {
    pub seed: u64,
    pool: rayon::ThreadPool,
}

/// Environment variable capping the worker count of grid recipes.
pub const THREADS_ENV: &str = "PASSN_LAB_THREADS";

impl Ctx {
    pub fn new(seed: u64, threads: Option<usize>) -> LabResult<Self> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads.unwrap_or(0))
            .build()
            .map_err(|e| config(format!("cannot start worker pool: {e}")))?;
        Ok(Self { seed, pool })
    }

    /// Worker cap from [`THREADS_ENV`]; `None` lets the pool pick.
    pub fn threads_from_env() -> LabResult<Option<usize>> {
        match std::env::var(THREADS_ENV) {
            Err(_) => Ok(None),
            Ok(v) => match v.trim().parse::<usize>() {
                Ok(n) if n > 0 => Ok(Some(n)),
                _ => Err(config(format!("{THREADS_ENV} must be a positive integer, got {v:?}"))),
            },
        }
    }

    /// Seed of the sub-experiment `label`.
    pub fn seed_for(&self, label: &str) -> u64 {
        derive_seed(self.seed, label)
    }

    /// Run independent jobs on the pool; results come back in input order.
    pub fn grid<T, R, F>(&self, items: &[T], f: F) -> LabResult<Vec<R>>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> LabResult<R> + Sync + Send,
    {
        self.pool.install(|| items.par_iter().map(&f).collect())
    }
}

/// Run a recipe; returns its report (rows sorted) and the resolved
/// parameters with defaults filled in.
pub fn execute(name: &str, params: &Value, ctx: &Ctx) -> LabResult<(Report, Value)> {
    let entry = REGISTRY
        .iter()
        .find(|e| e.info.name == name)
        .ok_or_else(|| config(format!("unknown recipe {name:?}; see list-recipes")))?;
    let (mut report, resolved) = (entry.run)(ctx, params)?;
    report.sort_rows();
    Ok((report, resolved))
}
