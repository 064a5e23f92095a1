//! Sampled proof search: rollouts, pass@N and ensembles.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::numeric::{hit_probability, sample_index};
use crate::proof::env::{ProofEnv, Transition};
use crate::proof::policy::StepPolicy;
use crate::rng::{derive_seed, stream, StreamRng};

pub const DEFAULT_MAX_DEPTH: u32 = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum Outcome {
    /// Proof closed by the `depth`-th tactic.
    Qed {
        depth: u32,
    },
    /// The `depth`-th tactic was rejected.
    Invalid {
        depth: u32,
    },
    DepthLimit,
}

impl Outcome {
    pub fn is_qed(&self) -> bool {
        matches!(self, Outcome::Qed { .. })
    }
}

fn check_start(env: &ProofEnv, start: usize) -> Result<()> {
    if start >= env.state_count() {
        return Err(domain(format!("unknown start state {start}")));
    }
    Ok(())
}

pub(crate) fn rollout_with(
    policy: &StepPolicy,
    env: &ProofEnv,
    start: usize,
    max_depth: u32,
    rng: &mut StreamRng,
) -> Outcome {
    let mut state = start;
    for depth in 1..=max_depth {
        let t = sample_index(&policy.probs(state), rng.random::<f64>());
        match env.step(state, t) {
            Transition::Qed => return Outcome::Qed { depth },
            Transition::Invalid => return Outcome::Invalid { depth },
            Transition::Next(s) => state = s,
        }
    }
    Outcome::DepthLimit
}

/// One sampled proof attempt; reproducible for a fixed seed.
pub fn rollout(policy: &StepPolicy, env: &ProofEnv, start: usize, max_depth: u32, seed: u64) -> Result<Outcome> {
    policy.check_shape(env)?;
    check_start(env, start)?;
    if max_depth == 0 {
        return Err(domain("max depth must be at least 1"));
    }
    Ok(rollout_with(
        policy,
        env,
        start,
        max_depth,
        &mut stream(seed, "proof.rollout", 0),
    ))
}

/// Exact probability that one rollout from `start` reaches QED within
/// `max_depth` steps, by propagating the state distribution.
pub fn success_probability(policy: &StepPolicy, env: &ProofEnv, start: usize, max_depth: u32) -> Result<f64> {
    policy.check_shape(env)?;
    check_start(env, start)?;
    let mut dist = vec![0.0; env.state_count()];
    dist[start] = 1.0;
    let mut qed = 0.0;
    for _ in 0..max_depth {
        let mut next = vec![0.0; env.state_count()];
        for (s, &mass) in dist.iter().enumerate() {
            if mass == 0.0 {
                continue;
            }
            for (t, p) in policy.probs(s).into_iter().enumerate() {
                match env.step(s, t) {
                    Transition::Qed => qed += mass * p,
                    Transition::Next(n) => next[n] += mass * p,
                    Transition::Invalid => {}
                }
            }
        }
        dist = next;
    }
    Ok(qed.min(1.0))
}

/// Exact pass@N coverage of one theorem.
pub fn analytic_coverage(policy: &StepPolicy, env: &ProofEnv, start: usize, n: u64, max_depth: u32) -> Result<f64> {
    Ok(hit_probability(
        success_probability(policy, env, start, max_depth)?,
        n as f64,
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchReport {
    pub solved: Vec<bool>,
    /// Depth of the first successful rollout per theorem.
    pub depth: Vec<Option<u32>>,
    pub success_fraction: f64,
}

fn search_one(
    policy: &StepPolicy,
    env: &ProofEnv,
    start: usize,
    n: u64,
    max_depth: u32,
    rng: &mut StreamRng,
) -> Option<u32> {
    (0..n).find_map(|_| match rollout_with(policy, env, start, max_depth, rng) {
        Outcome::Qed { depth } => Some(depth),
        _ => None,
    })
}

fn search_seeded(
    policy: &StepPolicy,
    env: &ProofEnv,
    theorems: &[usize],
    n: u64,
    max_depth: u32,
    seed: u64,
) -> SearchReport {
    let depth: Vec<Option<u32>> = theorems
        .iter()
        .enumerate()
        .map(|(i, &start)| {
            let mut rng = stream(seed, "proof.search", i as u64);
            search_one(policy, env, start, n, max_depth, &mut rng)
        })
        .collect();
    let solved: Vec<bool> = depth.iter().map(Option::is_some).collect();
    let success_fraction = solved.iter().filter(|&&s| s).count() as f64 / theorems.len().max(1) as f64;
    SearchReport {
        solved,
        depth,
        success_fraction,
    }
}

fn check_search(policy: &StepPolicy, env: &ProofEnv, theorems: &[usize], n: u64, max_depth: u32) -> Result<()> {
    policy.check_shape(env)?;
    if n == 0 || max_depth == 0 {
        return Err(domain("N and max depth must be at least 1"));
    }
    if theorems.is_empty() {
        return Err(domain("no theorems to search"));
    }
    theorems.iter().try_for_each(|&s| check_start(env, s))
}

/// A theorem counts as solved iff any of `n` independent rollouts reaches
/// QED. Theorems may repeat; each entry is an independent trial.
pub fn pass_at_n_search(
    policy: &StepPolicy,
    env: &ProofEnv,
    theorems: &[usize],
    n: u64,
    max_depth: u32,
    seed: u64,
) -> Result<SearchReport> {
    check_search(policy, env, theorems, n, max_depth)?;
    Ok(search_seeded(policy, env, theorems, n, max_depth, seed))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleReport {
    pub solved: Vec<bool>,
    /// `attribution[k][i]`: policy `k` solved theorem `i`.
    pub attribution: Vec<Vec<bool>>,
    pub success_fraction: f64,
    pub total_budget: u64,
}

/// Every policy searches every theorem with `per_policy_n` rollouts; a
/// theorem is solved iff any policy solves it. Policy 0 uses the same random
/// streams as [`pass_at_n_search`] with this seed.
pub fn ensemble_search(
    policies: &[StepPolicy],
    env: &ProofEnv,
    theorems: &[usize],
    per_policy_n: u64,
    max_depth: u32,
    seed: u64,
) -> Result<EnsembleReport> {
    if policies.is_empty() {
        return Err(domain("ensemble needs at least one policy"));
    }
    for p in policies {
        check_search(p, env, theorems, per_policy_n, max_depth)?;
    }
    let attribution: Vec<Vec<bool>> = policies
        .iter()
        .enumerate()
        .map(|(k, p)| {
            let s = if k == 0 {
                seed
            } else {
                derive_seed(seed, &format!("ensemble.{k}"))
            };
            search_seeded(p, env, theorems, per_policy_n, max_depth, s).solved
        })
        .collect();
    let solved: Vec<bool> = (0..theorems.len()).map(|i| attribution.iter().any(|a| a[i])).collect();
    let success_fraction = solved.iter().filter(|&&s| s).count() as f64 / theorems.len() as f64;
    Ok(EnsembleReport {
        solved,
        attribution,
        success_fraction,
        total_budget: per_policy_n * policies.len() as u64,
    })
}
