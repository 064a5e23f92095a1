//! Tabular softmax policy `p(y|x) = softmax(theta_x + b)`.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::numeric::softmax;
use crate::trainer::tasks::{Problem, TaskSet};

/// Per-problem logits plus an optional answer bias shared by every problem.
///
/// The shared bias is the only channel through which training on one problem
/// moves the predictions on another; without it each row is independent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyTable {
    rows: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    bias: Option<Vec<f64>>,
}

impl PolicyTable {
    /// All-zero logits (uniform rows) shaped like `tasks`.
    pub fn uniform(tasks: &TaskSet) -> Self {
        Self {
            rows: tasks.problems().iter().map(|p| vec![0.0; p.answer_count]).collect(),
            bias: None,
        }
    }

    /// Uniform rows plus a zero shared bias; every problem must have the same
    /// answer count.
    pub fn uniform_shared(tasks: &TaskSet) -> Result<Self> {
        let r = tasks.problems()[0].answer_count;
        if tasks.problems().iter().any(|p| p.answer_count != r) {
            return Err(domain("a shared bias needs a common answer count"));
        }
        Ok(Self {
            bias: Some(vec![0.0; r]),
            ..Self::uniform(tasks)
        })
    }

    pub fn from_rows(rows: Vec<Vec<f64>>, bias: Option<Vec<f64>>) -> Result<Self> {
        if rows.iter().any(|r| r.is_empty()) {
            return Err(domain("policy rows must be non-empty"));
        }
        if rows
            .iter()
            .flatten()
            .chain(bias.iter().flatten())
            .any(|z| !z.is_finite())
        {
            return Err(domain("policy logits must be finite"));
        }
        if let Some(b) = &bias {
            if let Some(r) = rows.iter().find(|r| r.len() != b.len()) {
                return Err(Error::LengthMismatch {
                    expected: b.len(),
                    actual: r.len(),
                });
            }
        }
        Ok(Self { rows, bias })
    }

    /// Policy whose rows put the given probabilities on each answer.
    pub fn from_probabilities(probs: &[Vec<f64>]) -> Result<Self> {
        let rows = probs
            .iter()
            .map(|row| {
                let total: f64 = row.iter().sum();
                if row.iter().any(|&p| !(0.0..=1.0).contains(&p)) || (total - 1.0).abs() > 1e-10 {
                    return Err(domain("probability rows must lie on the simplex"));
                }
                // zero mass maps to a logit low enough to vanish after softmax
                Ok(row.iter().map(|&p| if p > 0.0 { p.ln() } else { -1e3 }).collect())
            })
            .collect::<Result<Vec<Vec<f64>>>>()?;
        Self::from_rows(rows, None)
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn row(&self, x: usize) -> &[f64] {
        &self.rows[x]
    }

    pub fn bias(&self) -> Option<&[f64]> {
        self.bias.as_deref()
    }

    pub(crate) fn row_mut(&mut self, x: usize) -> &mut [f64] {
        &mut self.rows[x]
    }

    pub(crate) fn bias_mut(&mut self) -> Option<&mut Vec<f64>> {
        self.bias.as_mut()
    }

    /// Effective logits `theta_x + b`.
    pub fn logits(&self, x: usize) -> Vec<f64> {
        match &self.bias {
            Some(b) => self.rows[x].iter().zip(b).map(|(t, b)| t + b).collect(),
            None => self.rows[x].clone(),
        }
    }

    pub fn probs(&self, x: usize) -> Vec<f64> {
        softmax(&self.logits(x))
    }

    /// Probability that one sample for problem `x` passes the verifier.
    pub fn correct_mass(&self, x: usize, problem: &Problem) -> f64 {
        let s = self.probs(x);
        problem.correct.iter().map(|&a| s[a]).sum::<f64>().min(1.0)
    }

    /// Check that rows and answer counts line up with `tasks`.
    pub fn check_shape(&self, tasks: &TaskSet) -> Result<()> {
        if self.rows.len() != tasks.len() {
            return Err(Error::LengthMismatch {
                expected: tasks.len(),
                actual: self.rows.len(),
            });
        }
        for (row, p) in self.rows.iter().zip(tasks.problems()) {
            if row.len() != p.answer_count {
                return Err(Error::LengthMismatch {
                    expected: p.answer_count,
                    actual: row.len(),
                });
            }
        }
        Ok(())
    }

    /// First non-finite parameter, if any, as a readable location.
    pub(crate) fn find_non_finite(&self) -> Option<String> {
        for (x, row) in self.rows.iter().enumerate() {
            if let Some(j) = row.iter().position(|z| !z.is_finite()) {
                return Some(format!("logit ({x}, {j}) = {}", row[j]));
            }
        }
        let b = self.bias.as_ref()?;
        b.iter()
            .position(|z| !z.is_finite())
            .map(|j| format!("shared bias {j} = {}", b[j]))
    }
}
