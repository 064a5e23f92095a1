//! Shared fixtures for the benchmarks.

use passn_core::proof::{generate_env, ProofEnv, StepPolicy};
use passn_core::trainer::{generate_tasks, TaskGenConfig, TaskSet};
use passn_core::AccuracyProfile;

/// `k` accuracies decaying geometrically from 0.4, summing below 1.
pub fn decaying_profile(k: usize) -> AccuracyProfile {
    let raw: Vec<f64> = (0..k).map(|i| 0.4 * 0.7f64.powi(i as i32)).collect();
    let total: f64 = raw.iter().sum();
    let scale = if total > 0.95 { 0.95 / total } else { 1.0 };
    AccuracyProfile::new(raw.iter().map(|p| p * scale).collect()).expect("valid profile")
}

/// The default synthetic task set used by the supervised recipes.
pub fn standard_tasks(seed: u64) -> TaskSet {
    generate_tasks(&TaskGenConfig::new(200, 256, 3, seed)).expect("valid task config")
}

/// A proof environment with a mix of short and long golden proofs.
pub fn proof_fixture(seed: u64) -> (ProofEnv, StepPolicy) {
    let env = generate_env(200, 8, &[2, 4, 6], 0.7, seed).expect("feasible environment");
    let policy = StepPolicy::along_golden(&env, 0.5).expect("valid confidence");
    (env, policy)
}
