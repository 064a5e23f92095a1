//! Supervised training of step policies on golden proofs.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::losses::{dco_factor, full_proof_factor, FilterPolicy};
use crate::proof::env::{GoldenProof, ProofEnv};
use crate::proof::policy::StepPolicy;
use crate::rng::stream;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StepLoss {
    /// Each step weighted by `F(N_eff, p(step))`; `n_eff = 1` is CE.
    Stepwise { n_eff: u64 },
    /// Every step of a proof weighted by `F(N, prod_i p(step_i))`.
    FullProof { n: u64 },
}

impl StepLoss {
    fn budget(&self) -> u64 {
        match *self {
            StepLoss::Stepwise { n_eff } => n_eff,
            StepLoss::FullProof { n } => n,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepTrainConfig {
    pub loss: StepLoss,
    pub epochs: usize,
    pub learning_rate: f64,
    /// Golden proofs per gradient step.
    #[serde(default = "one")]
    pub batch_size: usize,
    pub seed: u64,
    /// Drop weights whose `F` falls below the threshold (no replacement:
    /// every golden proof is visited once per epoch).
    #[serde(default)]
    pub filter: Option<FilterPolicy>,
    /// Indices into the environment's golden proofs; all when absent.
    #[serde(default)]
    pub proof_ids: Option<Vec<usize>>,
}

fn one() -> usize {
    1
}

impl StepTrainConfig {
    pub fn stepwise(n_eff: u64, epochs: usize, learning_rate: f64, seed: u64) -> Self {
        Self {
            loss: StepLoss::Stepwise { n_eff },
            epochs,
            learning_rate,
            batch_size: 1,
            seed,
            filter: Some(FilterPolicy::direct_answer()),
            proof_ids: None,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.loss.budget() == 0 {
            return Err(domain("N_eff / N must be at least 1"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(domain("learning rate must be positive"));
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(domain("epochs and batch size must be positive"));
        }
        Ok(())
    }
}

/// Per-step confidences of a golden proof under `policy`.
pub fn step_confidences(policy: &StepPolicy, env: &ProofEnv, proof: &GoldenProof) -> Result<Vec<f64>> {
    let states = env.replay(proof)?;
    Ok(states
        .iter()
        .zip(&proof.tactics)
        .map(|(&s, &t)| policy.probs(s)[t])
        .collect())
}

/// `F(N, prod p)` over the proof's steps: the gradient weight of the naive
/// whole-proof coverage loss.
pub fn full_proof_dco_weight(policy: &StepPolicy, env: &ProofEnv, proof: &GoldenProof, n: u64) -> Result<f64> {
    policy.check_shape(env)?;
    full_proof_factor(&step_confidences(policy, env, proof)?, n)
}

/// Gradient descent on golden `(state, tactic)` steps with CE gradients
/// scaled by the configured coverage weight. Proofs are shuffled each epoch
/// and the step is `lr / batch_size` per proof.
pub fn train_step_policy(policy: &StepPolicy, env: &ProofEnv, config: &StepTrainConfig) -> Result<StepPolicy> {
    config.validate()?;
    policy.check_shape(env)?;
    let mut ids: Vec<usize> = match &config.proof_ids {
        Some(ids) => ids.clone(),
        None => (0..env.golden_proofs().len()).collect(),
    };
    if ids.is_empty() {
        return Err(domain("no golden proofs to train on"));
    }
    if let Some(&bad) = ids.iter().find(|&&i| i >= env.golden_proofs().len()) {
        return Err(domain(format!("golden proof {bad} does not exist")));
    }
    let paths: Vec<Vec<usize>> = env
        .golden_proofs()
        .iter()
        .map(|p| env.replay(p))
        .collect::<Result<_>>()?;
    let step = config.learning_rate / config.batch_size as f64;
    let threshold = config.filter.map(|f| f.threshold_eps);

    let mut policy = policy.clone();
    let mut rng = stream(config.seed, "proof.train", 0);
    for epoch in 1..=config.epochs {
        ids.shuffle(&mut rng);
        for (b, chunk) in ids.chunks(config.batch_size).enumerate() {
            // (state, tactic, weight) read before any update in this batch
            let mut updates: Vec<(usize, usize, f64, Vec<f64>)> = Vec::new();
            for &i in chunk {
                let proof = &env.golden_proofs()[i];
                let steps: Vec<(usize, usize, Vec<f64>)> = paths[i]
                    .iter()
                    .zip(&proof.tactics)
                    .map(|(&s, &t)| (s, t, policy.probs(s)))
                    .collect();
                match config.loss {
                    StepLoss::Stepwise { n_eff } => {
                        for (s, t, probs) in steps {
                            let w = dco_factor(probs[t], n_eff)?;
                            if threshold.is_none_or(|eps| w >= eps) {
                                updates.push((s, t, w, probs));
                            }
                        }
                    }
                    StepLoss::FullProof { n } => {
                        let conf: Vec<f64> = steps.iter().map(|(_, t, p)| p[*t]).collect();
                        let w = full_proof_factor(&conf, n)?;
                        if threshold.is_none_or(|eps| w >= eps) {
                            updates.extend(steps.into_iter().map(|(s, t, p)| (s, t, w, p)));
                        }
                    }
                }
            }
            let mut bias_grad = policy.bias().map(|b| vec![0.0; b.len()]);
            for (s, t, w, probs) in updates {
                let row = policy.row_mut(s);
                for (j, pj) in probs.iter().enumerate() {
                    let g = w * (pj - if j == t { 1.0 } else { 0.0 });
                    row[j] -= step * g;
                    if let Some(bg) = bias_grad.as_mut() {
                        bg[j] += g;
                    }
                }
            }
            if let (Some(bg), Some(bias)) = (bias_grad, policy.bias_mut()) {
                for (z, g) in bias.iter_mut().zip(bg) {
                    *z -= step * g;
                }
            }
            if let Some(loc) = policy.find_non_finite() {
                return Err(Error::Divergence(format!("{loc} at epoch {epoch}, batch {b}")));
            }
        }
    }
    Ok(policy)
}
