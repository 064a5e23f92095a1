//! Synthetic theorem proving: tactic trees with golden proofs, step-wise
//! coverage-weighted training, and sampled pass@N search.

pub mod env;
pub mod policy;
pub mod search;
pub mod train;

use rand::Rng;
use serde::{Deserialize, Serialize};

pub use env::{generate_env, GoldenProof, ProofEnv, Transition};
pub use policy::StepPolicy;
pub use search::{
    analytic_coverage, ensemble_search, pass_at_n_search, rollout, success_probability, EnsembleReport, Outcome,
    SearchReport, DEFAULT_MAX_DEPTH,
};
pub use train::{full_proof_dco_weight, step_confidences, train_step_policy, StepLoss, StepTrainConfig};

use crate::error::{domain, Result};
use crate::rng::stream;

/// A single golden chain of `length` steps over `branching` tactics where
/// every off-path tactic is INVALID. A uniform policy solves it with
/// probability `branching^-length` per rollout.
pub fn chain_env(branching: usize, length: usize) -> Result<ProofEnv> {
    if branching == 0 || length == 0 {
        return Err(domain("branching and length must be positive"));
    }
    let transitions = (0..length)
        .map(|s| {
            let mut row = vec![Transition::Invalid; branching];
            row[0] = if s + 1 == length {
                Transition::Qed
            } else {
                Transition::Next(s + 1)
            };
            row
        })
        .collect();
    ProofEnv::from_parts(
        branching,
        transitions,
        vec![GoldenProof {
            start: 0,
            tactics: vec![0; length],
        }],
    )
}

/// Two theorem families over one tactic set: long proofs whose golden
/// tactics come from the first `long_tactics` tactics, and short proofs whose
/// golden tactics come from the rest. Off-path tactics are INVALID.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixedEnvConfig {
    pub branching: usize,
    pub long_count: usize,
    pub long_length: usize,
    pub short_count: usize,
    pub short_length: usize,
    pub long_tactics: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MixedEnv {
    pub env: ProofEnv,
    /// Golden-proof indices of the long family.
    pub long: Vec<usize>,
    /// Golden-proof indices of the short family.
    pub short: Vec<usize>,
}

pub fn mixed_env(config: &MixedEnvConfig) -> Result<MixedEnv> {
    let c = config;
    if c.long_tactics == 0 || c.long_tactics >= c.branching {
        return Err(domain("long_tactics must leave tactics for the short family"));
    }
    if c.long_length == 0 || c.short_length == 0 {
        return Err(domain("proof lengths must be positive"));
    }
    let mut rng = stream(c.seed, "proof.mixed_env", 0);
    let mut transitions: Vec<Vec<Transition>> = Vec::new();
    let mut golden = Vec::new();
    let mut family = |count: usize, length: usize, lo: usize, hi: usize, golden: &mut Vec<GoldenProof>| {
        for _ in 0..count {
            let start = transitions.len();
            let tactics: Vec<usize> = (0..length).map(|_| rng.random_range(lo..hi)).collect();
            for (i, &t) in tactics.iter().enumerate() {
                let mut row = vec![Transition::Invalid; c.branching];
                row[t] = if i + 1 == length {
                    Transition::Qed
                } else {
                    Transition::Next(start + i + 1)
                };
                transitions.push(row);
            }
            golden.push(GoldenProof { start, tactics });
        }
    };
    family(c.long_count, c.long_length, 0, c.long_tactics, &mut golden);
    family(c.short_count, c.short_length, c.long_tactics, c.branching, &mut golden);
    let env = ProofEnv::from_parts(c.branching, transitions, golden)?;
    Ok(MixedEnv {
        env,
        long: (0..c.long_count).collect(),
        short: (c.long_count..c.long_count + c.short_count).collect(),
    })
}
