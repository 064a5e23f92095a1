//! Coverage-optimal confidence allocation.
//!
//! Given the probability `p_i` that the i-th ranked answer is correct, the
//! expected pass@N coverage of a confidence vector `c` is
//! `sum_i p_i (1 - (1 - c_i)^N)`. For `N > 1` it is maximized on the simplex
//! by a water-filling allocation over a prefix of size `r`:
//!
//! ```text
//! c_i = 1 - (r - 1) p_i^(-a) / sum_{t<=r} p_t^(-a),   a = 1 / (N - 1)
//! ```
//!
//! with `r` the largest support on which every `c_i` stays positive.
//! [`brute_force_optimal`] is an independent grid-plus-descent oracle.

use serde::{Deserialize, Serialize};

use crate::error::{check_budget, domain, Error, Result};
use crate::numeric::hit_probability;

/// Strict-feasibility margin for the support scan.
const SUPPORT_TOL: f64 = 1e-14;

/// Non-increasing, strictly positive accuracies with total mass at most 1.
/// The missing mass `1 - sum p_i` is the tail `eps`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct AccuracyProfile {
    p: Vec<f64>,
}

impl AccuracyProfile {
    pub fn new(p: Vec<f64>) -> Result<Self> {
        if p.is_empty() {
            return Err(domain("accuracy profile is empty"));
        }
        if let Some(bad) = p.iter().find(|&&x| !(x > 0.0 && x <= 1.0)) {
            return Err(domain(format!("accuracy {bad} is not in (0, 1]")));
        }
        if p.windows(2).any(|w| w[1] > w[0]) {
            return Err(domain("accuracies must be non-increasing"));
        }
        let total: f64 = p.iter().sum();
        if total > 1.0 + 1e-12 {
            return Err(domain(format!("accuracies sum to {total} > 1")));
        }
        Ok(Self { p })
    }

    pub fn values(&self) -> &[f64] {
        &self.p
    }

    pub fn len(&self) -> usize {
        self.p.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p.is_empty()
    }

    /// Probability mass not covered by any listed answer.
    pub fn tail_mass(&self) -> f64 {
        (1.0 - self.p.iter().sum::<f64>()).max(0.0)
    }
}

impl TryFrom<Vec<f64>> for AccuracyProfile {
    type Error = Error;
    fn try_from(p: Vec<f64>) -> Result<Self> {
        Self::new(p)
    }
}

impl From<AccuracyProfile> for Vec<f64> {
    fn from(a: AccuracyProfile) -> Self {
        a.p
    }
}

/// A point on the probability simplex.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct ConfidenceProfile {
    phat: Vec<f64>,
}

impl ConfidenceProfile {
    pub const SUM_TOL: f64 = 1e-10;

    pub fn new(phat: Vec<f64>) -> Result<Self> {
        if phat.is_empty() {
            return Err(domain("confidence profile is empty"));
        }
        if let Some(bad) = phat.iter().find(|&&x| !(0.0..=1.0).contains(&x)) {
            return Err(domain(format!("confidence {bad} is not in [0, 1]")));
        }
        let total: f64 = phat.iter().sum();
        if (total - 1.0).abs() > Self::SUM_TOL {
            return Err(domain(format!("confidences sum to {total}, not 1")));
        }
        Ok(Self { phat })
    }

    pub fn one_hot(len: usize, index: usize) -> Self {
        let mut phat = vec![0.0; len];
        phat[index] = 1.0;
        Self { phat }
    }

    pub fn values(&self) -> &[f64] {
        &self.phat
    }

    pub fn len(&self) -> usize {
        self.phat.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phat.is_empty()
    }

    pub fn max(&self) -> f64 {
        self.phat.iter().copied().fold(0.0, f64::max)
    }

    /// Number of strictly positive entries.
    pub fn support(&self) -> usize {
        self.phat.iter().filter(|&&x| x > 0.0).count()
    }
}

impl TryFrom<Vec<f64>> for ConfidenceProfile {
    type Error = Error;
    fn try_from(p: Vec<f64>) -> Result<Self> {
        Self::new(p)
    }
}

impl From<ConfidenceProfile> for Vec<f64> {
    fn from(c: ConfidenceProfile) -> Self {
        c.phat
    }
}

fn check_lengths(acc: &AccuracyProfile, conf: &ConfidenceProfile) -> Result<()> {
    if acc.len() != conf.len() {
        return Err(Error::LengthMismatch {
            expected: acc.len(),
            actual: conf.len(),
        });
    }
    Ok(())
}

/// `sum_i p_i (1 - (1 - c_i)^N)`; the tail mass never contributes.
pub fn expected_coverage(acc: &AccuracyProfile, conf: &ConfidenceProfile, n: u64) -> Result<f64> {
    check_lengths(acc, conf)?;
    check_budget(n)?;
    Ok(coverage_of(acc.values(), conf.values(), n as f64))
}

fn coverage_of(p: &[f64], c: &[f64], n: f64) -> f64 {
    p.iter().zip(c).map(|(&pi, &ci)| pi * hit_probability(ci, n)).sum()
}

/// Coverage-maximizing confidences for `N` passes.
///
/// `N = 1` puts all mass on the first answer. For `N > 1` the support size
/// is found by an ascending scan; the allocation is computed from
/// `v_i = expm1(a * ln(p_1 / p_i))`, which keeps full precision when `a` is
/// tiny (budgets up to ~1e6):
///
/// ```text
/// c_i = (1 + V - (r - 1) v_i) / (r + V),   V = sum_{t<=r} v_t
/// ```
pub fn optimal_confidences(acc: &AccuracyProfile, n: u64) -> Result<ConfidenceProfile> {
    check_budget(n)?;
    let p = acc.values();
    if n == 1 {
        return Ok(ConfidenceProfile::one_hot(p.len(), 0));
    }
    let alpha = 1.0 / (n - 1) as f64;
    let log_p1 = p[0].ln();
    let v: Vec<f64> = p.iter().map(|&pi| (alpha * (log_p1 - pi.ln())).exp_m1()).collect();

    let mut support = 1;
    let mut prefix = v[0];
    for r in 2..=p.len() {
        prefix += v[r - 1];
        let rf = r as f64;
        let last = (1.0 + prefix - (rf - 1.0) * v[r - 1]) / (rf + prefix);
        if last > SUPPORT_TOL {
            support = r;
        }
    }

    let big_v: f64 = v[..support].iter().sum();
    let rf = support as f64;
    let mut phat = vec![0.0; p.len()];
    for i in 0..support {
        phat[i] = ((1.0 + big_v - (rf - 1.0) * v[i]) / (rf + big_v)).max(0.0);
    }
    let total: f64 = phat.iter().sum();
    for x in phat.iter_mut() {
        *x /= total;
    }
    ConfidenceProfile::new(phat)
}

/// Largest budget of answers the brute-force oracle will enumerate.
pub const BRUTE_FORCE_MAX_ANSWERS: usize = 5;
pub const BRUTE_FORCE_MAX_RESOLUTION: u32 = 200;

/// Exhaustive simplex-grid search with spacing `1 / resolution`, refined by
/// pairwise mass-transfer coordinate ascent from the best grid point.
pub fn brute_force_optimal(acc: &AccuracyProfile, n: u64, resolution: u32) -> Result<ConfidenceProfile> {
    check_budget(n)?;
    let r = acc.len();
    if r > BRUTE_FORCE_MAX_ANSWERS {
        return Err(Error::Guard(format!(
            "brute force limited to {BRUTE_FORCE_MAX_ANSWERS} answers, got {r}"
        )));
    }
    if resolution == 0 || resolution > BRUTE_FORCE_MAX_RESOLUTION {
        return Err(Error::Guard(format!(
            "resolution {resolution} outside 1..={BRUTE_FORCE_MAX_RESOLUTION}"
        )));
    }
    let p = acc.values();
    let nf = n as f64;
    let step = 1.0 / resolution as f64;

    let mut best = vec![0.0; r];
    let mut best_value = f64::NEG_INFINITY;
    let mut counts = vec![0u32; r];
    enumerate_compositions(resolution, 0, &mut counts, &mut |cells| {
        let c: Vec<f64> = cells.iter().map(|&k| k as f64 * step).collect();
        let value = coverage_of(p, &c, nf);
        if value > best_value {
            best_value = value;
            best = c;
        }
    });

    let refined = pairwise_ascent(p, best, nf);
    let total: f64 = refined.iter().sum();
    ConfidenceProfile::new(refined.into_iter().map(|x| x / total).collect())
}

fn enumerate_compositions(remaining: u32, idx: usize, counts: &mut [u32], visit: &mut impl FnMut(&[u32])) {
    if idx == counts.len() - 1 {
        counts[idx] = remaining;
        visit(counts);
        return;
    }
    for k in 0..=remaining {
        counts[idx] = k;
        enumerate_compositions(remaining - k, idx + 1, counts, visit);
    }
}

/// Move mass between coordinate pairs with an exact 1-D golden-section
/// search; the objective is concave along every such direction.
fn pairwise_ascent(p: &[f64], mut c: Vec<f64>, n: f64) -> Vec<f64> {
    let r = c.len();
    for _sweep in 0..200 {
        let start = coverage_of(p, &c, n);
        for i in 0..r {
            for j in 0..r {
                if i == j {
                    continue;
                }
                // t in [-c_i, c_j]: c_i += t, c_j -= t
                let (lo, hi) = (-c[i], c[j]);
                if hi - lo <= 0.0 {
                    continue;
                }
                let pair = |t: f64| {
                    p[i] * hit_probability((c[i] + t).clamp(0.0, 1.0), n)
                        + p[j] * hit_probability((c[j] - t).clamp(0.0, 1.0), n)
                };
                let t = golden_section_max(pair, lo, hi);
                if pair(t) > pair(0.0) {
                    c[i] = (c[i] + t).max(0.0);
                    c[j] = (c[j] - t).max(0.0);
                }
            }
        }
        if coverage_of(p, &c, n) - start < 1e-16 {
            break;
        }
    }
    c
}

fn golden_section_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = b - inv_phi * (b - a);
    let mut x2 = a + inv_phi * (b - a);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..200 {
        if (b - a).abs() < 1e-15 {
            break;
        }
        if f1 < f2 {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + inv_phi * (b - a);
            f2 = f(x2);
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - inv_phi * (b - a);
            f1 = f(x1);
        }
    }
    let mid = 0.5 * (a + b);
    // endpoints matter when the optimum sits on the boundary
    [a, mid, b].into_iter().max_by(|x, y| f(*x).total_cmp(&f(*y))).unwrap()
}

/// Result of the calibration-order check.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OrderCheck {
    pub aligned: bool,
    /// First pair `(i, j)`, `i < j`, with `p_i > p_j` but `c_i < c_j`
    /// (0-based indices).
    pub witness: Option<(usize, usize)>,
}

/// Confidence must be non-increasing wherever accuracy strictly decreases.
pub fn check_order_alignment(acc: &AccuracyProfile, conf: &ConfidenceProfile) -> Result<OrderCheck> {
    check_lengths(acc, conf)?;
    let p = acc.values();
    let c = conf.values();
    for i in 0..p.len() {
        for j in i + 1..p.len() {
            if p[i] > p[j] && c[i] < c[j] {
                return Ok(OrderCheck {
                    aligned: false,
                    witness: Some((i, j)),
                });
            }
        }
    }
    Ok(OrderCheck {
        aligned: true,
        witness: None,
    })
}

/// Change in expected coverage from swapping the confidences at `pair`.
/// Non-negative for any misordered pair: the exchange argument behind
/// calibration of optimal policies.
pub fn swap_gain(acc: &AccuracyProfile, conf: &ConfidenceProfile, pair: (usize, usize), n: u64) -> Result<f64> {
    check_lengths(acc, conf)?;
    let (i, j) = pair;
    if i >= conf.len() || j >= conf.len() {
        return Err(domain(format!("swap pair {pair:?} out of range")));
    }
    let before = expected_coverage(acc, conf, n)?;
    let mut swapped = conf.values().to_vec();
    swapped.swap(i, j);
    let after = expected_coverage(acc, &ConfidenceProfile { phat: swapped }, n)?;
    Ok(after - before)
}
