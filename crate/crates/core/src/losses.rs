//! Coverage-aligned training losses.
//!
//! `dco_loss(p, N) = -log(1 - (1 - p)^N)` is the negative log probability of
//! drawing the target at least once in `N` samples. Its gradient is the
//! cross-entropy gradient scaled by the overconfidence factor
//!
//! ```text
//! F(N, p) = N (1 - p)^(N-1) p / (1 - (1 - p)^N)
//! ```
//!
//! which is 1 for `N = 1` and collapses towards 0 once `p` exceeds roughly
//! `1/N`. The step-wise and full-proof variants reuse `F` with a per-step
//! branching budget or a whole-proof probability.

use serde::{Deserialize, Serialize};

use crate::coverage::neg_log_coverage_single;
use crate::error::{check_budget, check_probability, domain, Error, Result};

/// Below this confidence `F` is returned as exactly 1 (its limit at 0).
pub const F_SMALL_P: f64 = 1e-12;

/// Default replacement threshold on `F` for direct-answer training.
pub const DEFAULT_DIRECT_THRESHOLD: f64 = 0.3;
/// Default discard threshold on `F` for Monte-Carlo marginal training.
pub const DEFAULT_MARGINAL_THRESHOLD: f64 = 0.01;

/// Which per-example loss a trainer optimizes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LossSpec {
    Ce,
    Dco { n: u64 },
    DcoStep { n_eff: u64 },
    DcoFullProof { n: u64 },
    Focal { gamma: f64 },
    Grpo { group: u64 },
}

impl LossSpec {
    /// Budget fed to `F` for the coverage-aligned kinds; `None` otherwise.
    pub fn dco_budget(&self) -> Option<u64> {
        match *self {
            LossSpec::Dco { n } | LossSpec::DcoFullProof { n } => Some(n),
            LossSpec::DcoStep { n_eff } => Some(n_eff),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            LossSpec::Ce => Ok(()),
            LossSpec::Dco { n } | LossSpec::DcoFullProof { n } => check_budget(n),
            LossSpec::DcoStep { n_eff } => check_budget(n_eff),
            LossSpec::Focal { gamma } if gamma >= 0.0 && gamma.is_finite() => Ok(()),
            LossSpec::Focal { gamma } => Err(domain(format!("focal gamma {gamma} must be >= 0"))),
            LossSpec::Grpo { group } if group >= 2 => Ok(()),
            LossSpec::Grpo { group } => Err(domain(format!("GRPO group size {group} must be >= 2"))),
        }
    }

    /// Weight `w` such that the gradient of this loss w.r.t. the logits equals
    /// `w * (softmax - onehot(target))`, given the target confidence `p`.
    ///
    /// For CE, `DCO(1)` and `Focal(0)` this is exactly `1.0`, so the three
    /// produce bit-identical updates.
    pub fn logit_weight(&self, p: f64) -> Result<f64> {
        match *self {
            LossSpec::Ce => Ok(1.0),
            LossSpec::Dco { n } | LossSpec::DcoFullProof { n } => dco_factor(p, n),
            LossSpec::DcoStep { n_eff } => dco_factor(p, n_eff),
            LossSpec::Focal { gamma } => focal_logit_weight(p, gamma),
            LossSpec::Grpo { .. } => Err(Error::Contract("GRPO has no supervised per-example weight".into())),
        }
    }

    /// Scalar loss value at target confidence `p`.
    pub fn loss(&self, p: f64) -> Result<f64> {
        match *self {
            LossSpec::Ce => dco_loss(p, 1),
            LossSpec::Dco { n } | LossSpec::DcoFullProof { n } => dco_loss(p, n),
            LossSpec::DcoStep { n_eff } => dco_loss(p, n_eff),
            LossSpec::Focal { gamma } => focal_loss(p, gamma),
            LossSpec::Grpo { .. } => Err(Error::Contract("GRPO has no supervised loss".into())),
        }
    }

    pub fn label(&self) -> String {
        match *self {
            LossSpec::Ce => "ce".into(),
            LossSpec::Dco { n } => format!("dco{n}"),
            LossSpec::DcoStep { n_eff } => format!("dco_step{n_eff}"),
            LossSpec::DcoFullProof { n } => format!("dco_full{n}"),
            LossSpec::Focal { gamma } => format!("focal{gamma}"),
            LossSpec::Grpo { group } => format!("grpo{group}"),
        }
    }
}

/// Replacement rule applied to examples whose `F` falls below a threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterPolicy {
    pub threshold_eps: f64,
    /// Replace filtered examples with fresh draws to keep the batch full.
    pub replacement: bool,
}

impl FilterPolicy {
    pub fn new(threshold_eps: f64, replacement: bool) -> Result<Self> {
        if !(threshold_eps > 0.0 && threshold_eps < 1.0) {
            return Err(domain(format!("filter threshold {threshold_eps} must lie in (0, 1)")));
        }
        Ok(Self {
            threshold_eps,
            replacement,
        })
    }

    pub fn direct_answer() -> Self {
        Self {
            threshold_eps: DEFAULT_DIRECT_THRESHOLD,
            replacement: true,
        }
    }

    pub fn marginal() -> Self {
        Self {
            threshold_eps: DEFAULT_MARGINAL_THRESHOLD,
            replacement: true,
        }
    }
}

impl Default for FilterPolicy {
    fn default() -> Self {
        Self::direct_answer()
    }
}

fn check_open_confidence(p: f64) -> Result<()> {
    if p == 0.0 {
        return Err(Error::InfiniteLoss("confidence is exactly zero".into()));
    }
    if !(p > 0.0 && p <= 1.0) {
        return Err(domain(format!("confidence {p} is not in (0, 1]")));
    }
    Ok(())
}

/// `-log(1 - (1 - p)^N)`.
pub fn dco_loss(p: f64, n: u64) -> Result<f64> {
    check_open_confidence(p)?;
    if n == 1 {
        // keep CE exact rather than routing through expm1
        return Ok(-p.ln());
    }
    neg_log_coverage_single(p, n)
}

/// `d/dp dco_loss(p, N) = -F(N, p) / p`.
pub fn dco_dloss_dp(p: f64, n: u64) -> Result<f64> {
    check_open_confidence(p)?;
    Ok(-dco_factor(p, n)? / p)
}

/// The overconfidence factor `F(N, p)`.
pub fn dco_factor(p: f64, n: u64) -> Result<f64> {
    check_probability("confidence", p)?;
    check_budget(n)?;
    if n == 1 || p < F_SMALL_P {
        return Ok(1.0);
    }
    if p == 1.0 {
        return Ok(0.0);
    }
    let nf = n as f64;
    let log_q = (-p).ln_1p();
    let numer = nf * p * ((nf - 1.0) * log_q).exp();
    let denom = -(nf * log_q).exp_m1();
    Ok((numer / denom).clamp(0.0, 1.0))
}

/// Step-wise factor `F(N_eff, p_step)`.
pub fn stepwise_factor(p_step: f64, n_eff: u64) -> Result<f64> {
    dco_factor(p_step, n_eff)
}

/// `F(N, prod_i p_i)` for a whole proof; the product is taken in log space.
pub fn full_proof_factor(step_probs: &[f64], n: u64) -> Result<f64> {
    if step_probs.is_empty() {
        return Err(domain("a proof needs at least one step"));
    }
    let mut log_prod = 0.0;
    for &p in step_probs {
        if !(p > 0.0 && p <= 1.0) {
            return Err(domain(format!("step confidence {p} is not in (0, 1]")));
        }
        log_prod += p.ln();
    }
    dco_factor(log_prod.exp(), n)
}

/// Focal loss `-(1 - p)^gamma log p`.
pub fn focal_loss(p: f64, gamma: f64) -> Result<f64> {
    check_open_confidence(p)?;
    check_gamma(gamma)?;
    Ok(-(1.0 - p).powf(gamma) * p.ln())
}

/// `d/dp` of the focal loss: `gamma (1-p)^(gamma-1) log p - (1-p)^gamma / p`.
pub fn focal_dloss_dp(p: f64, gamma: f64) -> Result<f64> {
    check_open_confidence(p)?;
    check_gamma(gamma)?;
    let q = 1.0 - p;
    // the first term vanishes at gamma = 0 and, for every gamma, at p = 1
    let first = if gamma == 0.0 || p == 1.0 {
        0.0
    } else {
        gamma * q.powf(gamma - 1.0) * p.ln()
    };
    Ok(first - q.powf(gamma) / p)
}

/// `-p * focal_dloss_dp`, written so that `gamma = 0` yields exactly 1.
pub fn focal_logit_weight(p: f64, gamma: f64) -> Result<f64> {
    check_open_confidence(p)?;
    check_gamma(gamma)?;
    let q = 1.0 - p;
    if gamma == 0.0 {
        return Ok(1.0);
    }
    let second = if p == 1.0 {
        0.0
    } else {
        gamma * p * q.powf(gamma - 1.0) * p.ln()
    };
    Ok(q.powf(gamma) - second)
}

fn check_gamma(gamma: f64) -> Result<()> {
    if !(gamma >= 0.0 && gamma.is_finite()) {
        return Err(domain(format!("focal gamma {gamma} must be finite and >= 0")));
    }
    Ok(())
}

/// Split indices by whether `F(N, confidence)` clears the threshold.
/// Kept indices preserve their original order.
pub fn filter_batch(confidences: &[f64], spec: &LossSpec, policy: &FilterPolicy) -> Result<(Vec<usize>, Vec<usize>)> {
    let n = spec
        .dco_budget()
        .ok_or_else(|| Error::Contract(format!("filtering requires a DCO-family loss, got {spec:?}")))?;
    let mut kept = Vec::new();
    let mut dropped = Vec::new();
    for (i, &p) in confidences.iter().enumerate() {
        if dco_factor(p, n)? >= policy.threshold_eps {
            kept.push(i);
        } else {
            dropped.push(i);
        }
    }
    Ok((kept, dropped))
}
