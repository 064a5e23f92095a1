//! Pass@N coverage: exact per-problem and dataset coverage, the unbiased
//! combinatorial estimator, and the negative-log-coverage test loss.
//!
//! All powers `(1 - p)^N` go through `log1p`/`expm1` so budgets in the
//! thousands neither underflow nor lose the small-`p` digits.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{check_budget, check_probability, domain, Error, Result};
use crate::numeric::hit_probability;

/// Coverage as a function of the sample budget N.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CoverageCurve {
    entries: BTreeMap<u64, f64>,
}

impl CoverageCurve {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, n: u64, coverage: f64) -> Result<()> {
        check_budget(n)?;
        check_probability("coverage", coverage)?;
        self.entries.insert(n, coverage);
        Ok(())
    }

    pub fn get(&self, n: u64) -> Option<f64> {
        self.entries.get(&n).copied()
    }

    pub fn budgets(&self) -> impl Iterator<Item = u64> + '_ {
        self.entries.keys().copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (u64, f64)> + '_ {
        self.entries.iter().map(|(&n, &c)| (n, c))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

impl FromIterator<(u64, f64)> for CoverageCurve {
    fn from_iter<I: IntoIterator<Item = (u64, f64)>>(iter: I) -> Self {
        Self {
            entries: iter.into_iter().collect(),
        }
    }
}

/// Per-problem empirical tally: `c` correct out of `n` samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleTally {
    n: u64,
    c: u64,
}

impl SampleTally {
    pub fn new(n: u64, c: u64) -> Result<Self> {
        if n == 0 {
            return Err(domain("tally needs at least one sample"));
        }
        if c > n {
            return Err(domain(format!("correct count {c} exceeds sample count {n}")));
        }
        Ok(Self { n, c })
    }

    pub fn samples(&self) -> u64 {
        self.n
    }

    pub fn correct(&self) -> u64 {
        self.c
    }
}

/// `1 - (1 - p)^N` for a single problem with success probability `p`.
pub fn coverage_single(p: f64, n: u64) -> Result<f64> {
    check_probability("p", p)?;
    check_budget(n)?;
    Ok(hit_probability(p, n as f64))
}

/// Mean of per-problem coverage over a dataset.
pub fn coverage_dataset(per_problem_p: &[f64], n: u64) -> Result<f64> {
    if per_problem_p.is_empty() {
        return Err(domain("coverage of an empty dataset is undefined"));
    }
    let mut total = 0.0;
    for &p in per_problem_p {
        total += coverage_single(p, n)?;
    }
    Ok(total / per_problem_p.len() as f64)
}

/// Single-problem map from pass@1 to pass@N. A strictly increasing bijection
/// of `[0, 1]`, so single-problem rankings agree across all budgets.
pub fn coverage_from_pass1(c1: f64, n: u64) -> Result<f64> {
    check_probability("pass@1 coverage", c1)?;
    coverage_single(c1, n)
}

/// Unbiased estimator `1 - C(n - c, N) / C(n, N)`.
///
/// The ratio of binomials is the telescoping product
/// `prod_{i<N} (n - c - i) / (n - i)`, accumulated as a sum of logs.
pub fn pass_at_n_estimate(tally: SampleTally, n: u64) -> Result<f64> {
    check_budget(n)?;
    if n > tally.n {
        return Err(domain(format!("budget N = {n} exceeds the {} samples drawn", tally.n)));
    }
    let wrong = tally.n - tally.c;
    if wrong < n {
        // every size-N subset contains a correct sample
        return Ok(1.0);
    }
    let log_ratio: f64 = (0..n)
        .map(|i| {
            let num = (wrong - i) as f64;
            let den = (tally.n - i) as f64;
            (-(den - num) / den).ln_1p()
        })
        .sum();
    Ok(-log_ratio.exp_m1())
}

/// `-sum_x log C^N(x)`; the coverage-based test loss.
pub fn neg_log_coverage_loss(per_problem_p: &[f64], n: u64) -> Result<f64> {
    let mut total = 0.0;
    for (i, &p) in per_problem_p.iter().enumerate() {
        total += neg_log_coverage_single(p, n).map_err(|e| match e {
            Error::InfiniteLoss(_) => Error::InfiniteLoss(format!("problem {i} has zero coverage")),
            other => other,
        })?;
    }
    Ok(total)
}

/// `-log(1 - (1 - p)^N)`, switching formulas so both tails keep full precision.
pub(crate) fn neg_log_coverage_single(p: f64, n: u64) -> Result<f64> {
    check_probability("p", p)?;
    check_budget(n)?;
    if p == 0.0 {
        return Err(Error::InfiniteLoss("coverage is exactly zero".into()));
    }
    let log_miss = n as f64 * (-p).ln_1p();
    let miss = log_miss.exp();
    if miss < 0.5 {
        Ok(-(-miss).ln_1p())
    } else {
        Ok(-(-log_miss.exp_m1()).ln())
    }
}
