//! Synthetic tactic trees with embedded golden proofs.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::rng::stream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Transition {
    Next(usize),
    Invalid,
    Qed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldenProof {
    pub start: usize,
    pub tactics: Vec<usize>,
}

impl GoldenProof {
    pub fn len(&self) -> usize {
        self.tactics.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tactics.is_empty()
    }
}

/// Explicit state graph: `transitions[state][tactic]`, every state offering
/// the same `branching` tactics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawEnv", into = "RawEnv")]
pub struct ProofEnv {
    branching: usize,
    transitions: Vec<Vec<Transition>>,
    golden: Vec<GoldenProof>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEnv {
    branching: usize,
    transitions: Vec<Vec<Transition>>,
    golden_proofs: Vec<GoldenProof>,
}

impl TryFrom<RawEnv> for ProofEnv {
    type Error = Error;

    fn try_from(raw: RawEnv) -> Result<Self> {
        ProofEnv::from_parts(raw.branching, raw.transitions, raw.golden_proofs)
    }
}

impl From<ProofEnv> for RawEnv {
    fn from(env: ProofEnv) -> Self {
        RawEnv {
            branching: env.branching,
            transitions: env.transitions,
            golden_proofs: env.golden,
        }
    }
}

impl ProofEnv {
    /// Validate and assemble an environment. Every golden proof must replay
    /// to QED exactly at its last tactic.
    pub fn from_parts(branching: usize, transitions: Vec<Vec<Transition>>, golden: Vec<GoldenProof>) -> Result<Self> {
        if branching == 0 || transitions.is_empty() {
            return Err(Error::InvalidEnv("need at least one state and one tactic".into()));
        }
        let states = transitions.len();
        for (s, row) in transitions.iter().enumerate() {
            if row.len() != branching {
                return Err(Error::InvalidEnv(format!(
                    "state {s} has {} tactics, expected {branching}",
                    row.len()
                )));
            }
            if let Some(Transition::Next(t)) = row.iter().find(|t| matches!(t, Transition::Next(n) if *n >= states)) {
                return Err(Error::InvalidEnv(format!("state {s} points at unknown state {t}")));
            }
        }
        let env = Self {
            branching,
            transitions,
            golden,
        };
        for (i, proof) in env.golden.iter().enumerate() {
            env.replay(proof)
                .map_err(|e| Error::InvalidEnv(format!("golden proof {i}: {e}")))?;
        }
        Ok(env)
    }

    pub fn branching(&self) -> usize {
        self.branching
    }

    pub fn state_count(&self) -> usize {
        self.transitions.len()
    }

    pub fn golden_proofs(&self) -> &[GoldenProof] {
        &self.golden
    }

    pub fn step(&self, state: usize, tactic: usize) -> Transition {
        self.transitions[state][tactic]
    }

    /// States visited by `proof`, one per tactic; errors unless the proof
    /// reaches QED exactly at its last tactic.
    pub fn replay(&self, proof: &GoldenProof) -> Result<Vec<usize>> {
        if proof.tactics.is_empty() {
            return Err(domain("proof has no tactics"));
        }
        if proof.start >= self.state_count() {
            return Err(domain(format!("unknown start state {}", proof.start)));
        }
        let mut state = proof.start;
        let mut visited = Vec::with_capacity(proof.len());
        for (i, &t) in proof.tactics.iter().enumerate() {
            if t >= self.branching {
                return Err(domain(format!("tactic {t} out of range")));
            }
            visited.push(state);
            let last = i + 1 == proof.len();
            match (self.step(state, t), last) {
                (Transition::Qed, true) => return Ok(visited),
                (Transition::Next(n), false) => state = n,
                (Transition::Qed, false) => return Err(domain(format!("QED early at step {}", i + 1))),
                (Transition::Next(_), true) => return Err(domain("proof ends before QED")),
                (Transition::Invalid, _) => return Err(domain(format!("invalid tactic at step {}", i + 1))),
            }
        }
        unreachable!("loop returns on the last tactic")
    }

    /// Histogram of golden proof lengths, indexed by length.
    pub fn length_histogram(&self) -> Vec<usize> {
        let top = self.golden.iter().map(GoldenProof::len).max().unwrap_or(0);
        let mut h = vec![0; top + 1];
        for p in &self.golden {
            h[p.len()] += 1;
        }
        h
    }

    pub fn theorems(&self) -> Vec<usize> {
        self.golden.iter().map(|p| p.start).collect()
    }
}

/// Random environment with one golden path per requested length.
///
/// Each path gets its own fresh states, so `sum(lengths) <= state_count` is
/// required. Off-path edges are INVALID with probability
/// `1 - valid_fraction` and otherwise lead to a uniformly chosen state.
pub fn generate_env(
    state_count: usize,
    branching: usize,
    golden_lengths: &[usize],
    valid_fraction: f64,
    seed: u64,
) -> Result<ProofEnv> {
    if state_count == 0 || branching == 0 {
        return Err(domain("state count and branching must be positive"));
    }
    if !(0.0..=1.0).contains(&valid_fraction) {
        return Err(domain(format!("valid fraction {valid_fraction} is not in [0, 1]")));
    }
    if golden_lengths.contains(&0) {
        return Err(domain("golden proofs need at least one tactic"));
    }
    let needed: usize = golden_lengths.iter().sum();
    if needed > state_count {
        return Err(Error::Infeasible(format!(
            "{needed} states needed for the golden paths, only {state_count} available"
        )));
    }
    let mut rng = stream(seed, "proof.generate_env", 0);
    let mut order: Vec<usize> = (0..state_count).collect();
    order.shuffle(&mut rng);

    let mut transitions: Vec<Vec<Option<Transition>>> = vec![vec![None; branching]; state_count];
    let mut golden = Vec::with_capacity(golden_lengths.len());
    let mut next_free = 0;
    for &k in golden_lengths {
        let path = &order[next_free..next_free + k];
        next_free += k;
        let tactics: Vec<usize> = (0..k).map(|_| rng.random_range(0..branching)).collect();
        for i in 0..k {
            transitions[path[i]][tactics[i]] = Some(if i + 1 == k {
                Transition::Qed
            } else {
                Transition::Next(path[i + 1])
            });
        }
        golden.push(GoldenProof {
            start: path[0],
            tactics,
        });
    }
    let transitions = transitions
        .into_iter()
        .map(|row| {
            row.into_iter()
                .map(|t| {
                    t.unwrap_or_else(|| {
                        if rng.random::<f64>() < valid_fraction {
                            Transition::Next(rng.random_range(0..state_count))
                        } else {
                            Transition::Invalid
                        }
                    })
                })
                .collect()
        })
        .collect();
    ProofEnv::from_parts(branching, transitions, golden)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_replayable() {
        let a = generate_env(40, 5, &[1, 2, 2, 4, 7], 0.5, 3).unwrap();
        assert_eq!(a, generate_env(40, 5, &[1, 2, 2, 4, 7], 0.5, 3).unwrap());
        for p in a.golden_proofs() {
            assert_eq!(a.replay(p).unwrap().len(), p.len());
        }
        assert_eq!(a.length_histogram(), vec![0, 1, 2, 0, 1, 0, 0, 1]);
    }

    #[test]
    fn infeasible_embedding() {
        assert!(matches!(generate_env(5, 2, &[3, 3], 1.0, 0), Err(Error::Infeasible(_))));
    }

    #[test]
    fn zero_valid_fraction_leaves_only_golden_edges() {
        let env = generate_env(4, 3, &[2], 0.0, 1).unwrap();
        let live = (0..4)
            .flat_map(|s| (0..3).map(move |t| (s, t)))
            .filter(|&(s, t)| env.step(s, t) != Transition::Invalid)
            .count();
        assert_eq!(live, 2);
    }

    #[test]
    fn json_round_trip_and_validation() {
        let env = generate_env(10, 3, &[2, 3], 0.4, 9).unwrap();
        let s = serde_json::to_string(&env).unwrap();
        assert_eq!(serde_json::from_str::<ProofEnv>(&s).unwrap(), env);
        let broken = r#"{"branching":1,"transitions":[["invalid"]],"golden_proofs":[{"start":0,"tactics":[0]}]}"#;
        assert!(serde_json::from_str::<ProofEnv>(broken).is_err());
    }

    #[test]
    fn replay_errors() {
        let env = ProofEnv::from_parts(
            2,
            vec![
                vec![Transition::Next(1), Transition::Invalid],
                vec![Transition::Qed, Transition::Qed],
            ],
            vec![],
        )
        .unwrap();
        assert!(env
            .replay(&GoldenProof {
                start: 0,
                tactics: vec![0, 0]
            })
            .is_ok());
        assert!(env
            .replay(&GoldenProof {
                start: 0,
                tactics: vec![1]
            })
            .is_err());
        assert!(env
            .replay(&GoldenProof {
                start: 0,
                tactics: vec![0]
            })
            .is_err());
        assert!(env
            .replay(&GoldenProof {
                start: 1,
                tactics: vec![0, 0]
            })
            .is_err());
    }
}
