//! Per-state tactic policies.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::numeric::softmax;
use crate::proof::env::ProofEnv;

/// `p(tactic | state) = softmax(theta_state + b)` with an optional tactic
/// bias `b` shared by all states, which carries what training on one
/// theorem implies for states never seen in training.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepPolicy {
    rows: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    bias: Option<Vec<f64>>,
}

impl StepPolicy {
    pub fn uniform(env: &ProofEnv) -> Self {
        Self {
            rows: vec![vec![0.0; env.branching()]; env.state_count()],
            bias: None,
        }
    }

    pub fn uniform_shared(env: &ProofEnv) -> Self {
        Self {
            bias: Some(vec![0.0; env.branching()]),
            ..Self::uniform(env)
        }
    }

    pub fn from_rows(rows: Vec<Vec<f64>>, bias: Option<Vec<f64>>) -> Result<Self> {
        let b = rows.first().map_or(0, Vec::len);
        if b == 0 || rows.iter().any(|r| r.len() != b) {
            return Err(domain("step policy rows must be non-empty and equally long"));
        }
        if let Some(bias) = &bias {
            if bias.len() != b {
                return Err(Error::LengthMismatch {
                    expected: b,
                    actual: bias.len(),
                });
            }
        }
        if rows
            .iter()
            .flatten()
            .chain(bias.iter().flatten())
            .any(|z| !z.is_finite())
        {
            return Err(domain("step policy logits must be finite"));
        }
        Ok(Self { rows, bias })
    }

    /// Policy that plays the golden tactic with probability `confidence` on
    /// every golden-path state (`1.0` means deterministic) and spreads the
    /// rest uniformly; other states stay uniform.
    pub fn along_golden(env: &ProofEnv, confidence: f64) -> Result<Self> {
        if !(confidence > 0.0 && confidence <= 1.0) {
            return Err(domain("confidence must be in (0, 1]"));
        }
        let b = env.branching();
        let mut rows = vec![vec![0.0; b]; env.state_count()];
        for proof in env.golden_proofs() {
            for (state, &t) in env.replay(proof)?.iter().zip(&proof.tactics) {
                let row = &mut rows[*state];
                if confidence == 1.0 || b == 1 {
                    row.iter_mut().for_each(|z| *z = -1e3);
                    row[t] = 0.0;
                } else {
                    let rest = (1.0 - confidence) / (b - 1) as f64;
                    row.iter_mut().for_each(|z| *z = rest.ln());
                    row[t] = confidence.ln();
                }
            }
        }
        Self::from_rows(rows, None)
    }

    pub fn check_shape(&self, env: &ProofEnv) -> Result<()> {
        if self.rows.len() != env.state_count() {
            return Err(Error::LengthMismatch {
                expected: env.state_count(),
                actual: self.rows.len(),
            });
        }
        if self.rows[0].len() != env.branching() {
            return Err(Error::LengthMismatch {
                expected: env.branching(),
                actual: self.rows[0].len(),
            });
        }
        Ok(())
    }

    pub fn state_count(&self) -> usize {
        self.rows.len()
    }

    pub fn row(&self, state: usize) -> &[f64] {
        &self.rows[state]
    }

    pub fn bias(&self) -> Option<&[f64]> {
        self.bias.as_deref()
    }

    pub(crate) fn row_mut(&mut self, state: usize) -> &mut [f64] {
        &mut self.rows[state]
    }

    pub(crate) fn bias_mut(&mut self) -> Option<&mut Vec<f64>> {
        self.bias.as_mut()
    }

    pub fn probs(&self, state: usize) -> Vec<f64> {
        match &self.bias {
            Some(b) => {
                let z: Vec<f64> = self.rows[state].iter().zip(b).map(|(t, b)| t + b).collect();
                softmax(&z)
            }
            None => softmax(&self.rows[state]),
        }
    }

    /// `(sum p^2)^-1`: the effective number of tactics a state spreads over.
    pub fn participation_ratio(&self, state: usize) -> f64 {
        1.0 / self.probs(state).iter().map(|p| p * p).sum::<f64>()
    }

    pub(crate) fn find_non_finite(&self) -> Option<String> {
        for (s, row) in self.rows.iter().enumerate() {
            if let Some(t) = row.iter().position(|z| !z.is_finite()) {
                return Some(format!("logit (state {s}, tactic {t})"));
            }
        }
        let b = self.bias.as_ref()?;
        b.iter()
            .position(|z| !z.is_finite())
            .map(|t| format!("shared bias {t}"))
    }
}
