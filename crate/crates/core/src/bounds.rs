//! Upper and lower bounds on the maximum confidence of a coverage-optimal
//! policy.
//!
//! The upper bound `u(N, p1, eps, k)` is the largest optimal max-confidence
//! over all calibrated accuracy profiles with top accuracy `p1` and
//! `sum_{i<=k} p_i = 1 - eps`. Two regimes:
//!
//! * Case k (full support): closed form in `p1`.
//! * Case j (support of size `j < k`): the extremal profile is
//!   `(p1 x (j-1), q, p x (k-j))`, where `(q, p)` solve
//!   `(j-1)(p^-a - p1^-a) = q^-a` with the mass constraint; `q` is found by
//!   bisection and `u = q^-a / ((j-1) p1^-a + q^-a)`.
//!
//! The lower bounds depend on the top two accuracies only.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

/// Bisection tolerance on `q`.
pub const BISECTION_TOL: f64 = 1e-12;
pub const BISECTION_MAX_ITER: usize = 200;
/// Grid size of the fallback bracket scan.
pub const FALLBACK_SCAN_POINTS: usize = 10_000;

/// Parameters of a bound query. `p2` is only read by the lower bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundQuery {
    pub p1: f64,
    pub p2: f64,
    pub eps: f64,
    pub k: u32,
    pub n: u64,
}

impl BoundQuery {
    pub fn new(p1: f64, p2: f64, eps: f64, k: u32, n: u64) -> Self {
        Self { p1, p2, eps, k, n }
    }

    /// Preconditions of the upper bound.
    pub fn validate_upper(&self) -> Result<()> {
        let BoundQuery { p1, eps, k, n, .. } = *self;
        if !(p1 > 0.0 && p1 < 1.0) {
            return Err(domain(format!("p1 = {p1} must lie in (0, 1)")));
        }
        if !(eps > 0.0 && eps < 1.0 - p1) {
            return Err(domain(format!("eps = {eps} must lie in (0, 1 - p1)")));
        }
        if k < 2 {
            return Err(domain(format!("support budget k = {k} must be >= 2")));
        }
        if n < 2 {
            return Err(domain(format!("N = {n} must be >= 2")));
        }
        // p1 is the largest of k accuracies summing to 1 - eps
        if p1 < (1.0 - eps) / k as f64 * (1.0 - 1e-12) {
            return Err(domain(format!(
                "p1 = {p1} is below (1 - eps)/k; no calibrated profile exists"
            )));
        }
        Ok(())
    }

    pub fn validate_lower(&self) -> Result<()> {
        check_lower_args(self.p1, self.p2, self.n as f64)
    }

    fn alpha(&self) -> f64 {
        1.0 / (self.n - 1) as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "case", content = "j", rename_all = "snake_case")]
pub enum BoundCase {
    CaseK,
    CaseJ(u32),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundResult {
    pub value: f64,
    pub case: BoundCase,
    /// `(q, p)` of the extremal Case-j profile.
    pub witness: Option<(f64, f64)>,
}

/// `((j - 2)/(j - 1))^(N - 1)`, defined as 0 for `j = 2`.
fn shrink_factor(j: u32, n: u64) -> f64 {
    if j <= 2 {
        return 0.0;
    }
    let ratio = (j - 2) as f64 / (j - 1) as f64;
    ((n - 1) as f64 * ratio.ln()).exp()
}

/// `(1 - eps)/k <= p1 < (1 - eps)/(k - 1 + ((k-2)/(k-1))^(N-1))`.
pub fn case_k_applies(query: &BoundQuery) -> bool {
    let BoundQuery { p1, eps, k, n, .. } = *query;
    let mass = 1.0 - eps;
    let lower = mass / k as f64;
    let upper = mass / ((k - 1) as f64 + shrink_factor(k, n));
    lower <= p1 && p1 < upper
}

/// `u(N, p1, eps, k)`.
pub fn upper_bound(query: &BoundQuery) -> Result<BoundResult> {
    query.validate_upper()?;
    let BoundQuery { p1, eps, k, .. } = *query;
    let alpha = query.alpha();

    if case_k_applies(query) {
        // residual accuracy of the k-th answer: 1 + p1 - eps - k p1
        let residual = 1.0 - eps - (k - 1) as f64 * p1;
        // u = ratio / ((k-1) + ratio), ratio = (p1 / residual)^a
        let ratio = (alpha * (p1 / residual).ln()).exp();
        return Ok(BoundResult {
            value: ratio / ((k - 1) as f64 + ratio),
            case: BoundCase::CaseK,
            witness: None,
        });
    }

    for j in 2..k {
        if let Some((q, p)) = solve_case_j(query, j)? {
            // u = 1 / ((j-1) (q/p1)^a + 1)
            let scaled = (alpha * (q / p1).ln()).exp();
            return Ok(BoundResult {
                value: 1.0 / ((j - 1) as f64 * scaled + 1.0),
                case: BoundCase::CaseJ(j),
                witness: Some((q, p)),
            });
        }
    }
    // the single-answer regime is impossible for eps > 0; surface it loudly
    Err(Error::Infeasible(format!("no Case-k or Case-j solution for {query:?}")))
}

/// Residual of the Case-j stationarity condition at `q`:
/// `(j-1)(p^-a - p1^-a) - q^-a` with `p` from the mass constraint.
/// Increasing in `q` on the admissible interval.
pub fn case_j_residual(query: &BoundQuery, j: u32, q: f64) -> f64 {
    let BoundQuery { p1, eps, k, .. } = *query;
    let p = (1.0 - eps - (j - 1) as f64 * p1 - q) / (k - j) as f64;
    case_j_residual_at(query, j, q, p)
}

fn case_j_residual_at(query: &BoundQuery, j: u32, q: f64, p: f64) -> f64 {
    let alpha = query.alpha();
    let p1 = query.p1;
    // scale every term by p1^a so nothing overflows when a is large
    let pow = |x: f64| (-alpha * (x / p1).ln()).exp();
    (j - 1) as f64 * (pow(p) - 1.0) - pow(q)
}

/// Solve the Case-j system for `(q, p)` or report that it has no solution.
///
/// The search runs over `t = ln p` with `q = rest - (k - j) p`: at large `N`
/// the root sits at exponentially small `p`, which a grid in `q` cannot
/// resolve. The residual is decreasing in `t`.
fn solve_case_j(query: &BoundQuery, j: u32) -> Result<Option<(f64, f64)>> {
    let BoundQuery { p1, eps, k, n, .. } = *query;
    let rest = 1.0 - eps - (j - 1) as f64 * p1;
    if rest <= 0.0 {
        return Ok(None);
    }
    let tail = (k - j) as f64;
    let shrink = shrink_factor(j, n) * p1;
    // q >= p, q > shrink  bound p from above; q <= p1, p > 0 from below
    let p_hi = (rest / (tail + 1.0)).min((rest - shrink) / tail);
    let p_lo = ((rest - p1) / tail).max(f64::MIN_POSITIVE);
    if !(p_lo < p_hi) {
        return Ok(None);
    }
    let q_of = |p: f64| rest - tail * p;
    // negated so the bracketing helpers see an increasing function
    let h = |t: f64| {
        let p = t.exp();
        -case_j_residual_at(query, j, q_of(p), p)
    };
    let (lo, hi) = (p_lo.ln(), p_hi.ln());
    let monotone = is_monotone_increasing(&h, lo, hi);
    let root = if monotone && h(lo) <= 0.0 && h(hi) >= 0.0 {
        Some(bisect(&h, lo, hi))
    } else if monotone {
        None
    } else {
        bracket_scan(&h, lo, hi)
    };

    Ok(root.and_then(|t| {
        let p = t.exp();
        let q = q_of(p);
        // strict lower bound on q from u < 1/(j-1)
        let ok = q > shrink && q <= p1 && q >= p && p > 0.0;
        ok.then_some((q, p))
    }))
}

fn is_monotone_increasing(g: &impl Fn(f64) -> f64, lo: f64, hi: f64) -> bool {
    const PROBES: usize = 64;
    let mut prev = g(lo);
    for i in 1..=PROBES {
        let x = lo + (hi - lo) * i as f64 / PROBES as f64;
        let v = g(x);
        if v < prev {
            return false;
        }
        prev = v;
    }
    true
}

fn bisect(g: &impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..BISECTION_MAX_ITER {
        if hi - lo <= BISECTION_TOL * hi.max(1e-300) {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if g(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// First sign change on a uniform grid, refined by bisection.
fn bracket_scan(g: &impl Fn(f64) -> f64, lo: f64, hi: f64) -> Option<f64> {
    let mut x_prev = lo;
    let mut g_prev = g(lo);
    for i in 1..=FALLBACK_SCAN_POINTS {
        let x = lo + (hi - lo) * i as f64 / FALLBACK_SCAN_POINTS as f64;
        let v = g(x);
        if g_prev <= 0.0 && v >= 0.0 {
            return Some(bisect(g, x_prev, x));
        }
        x_prev = x;
        g_prev = v;
    }
    None
}

fn check_lower_args(p1: f64, p2: f64, n: f64) -> Result<()> {
    if !(p2 > 0.0 && p2 < p1 && p1 < 1.0) {
        return Err(domain(format!("need 0 < p2 < p1 < 1, got p1 = {p1}, p2 = {p2}")));
    }
    if !(n > 1.0) {
        return Err(domain(format!("N = {n} must exceed 1")));
    }
    Ok(())
}

/// `(p2/p1)^(1/(N-1))` in log space; tends to 0 as `N -> 1+`.
fn ratio_root(p1: f64, p2: f64, n: f64) -> f64 {
    ((p2 / p1).ln() / (n - 1.0)).exp()
}

/// Smallest integer `s` with `p1 + s p2 >= 1`.
pub fn filler_count(p1: f64, p2: f64) -> u64 {
    let mut s = ((1.0 - p1) / p2).ceil().max(1.0) as u64;
    while s > 1 && p1 + (s - 1) as f64 * p2 >= 1.0 {
        s -= 1;
    }
    while p1 + s as f64 * p2 < 1.0 {
        s += 1;
    }
    s
}

/// `1 - s a / (s + a)` with `a = (p2/p1)^(1/(N-1))`. `N` is real so the
/// `N -> 1+` limit can be probed.
pub fn lower_bound_integer_s(p1: f64, p2: f64, n: f64) -> Result<f64> {
    check_lower_args(p1, p2, n)?;
    let s = filler_count(p1, p2) as f64;
    let a = ratio_root(p1, p2, n);
    Ok(1.0 - s * a / (s + a))
}

/// The closed form with `s` relaxed to `(1 - p1 + p2)/p2`; never tighter
/// than [`lower_bound_integer_s`].
pub fn lower_bound_closed(p1: f64, p2: f64, n: f64) -> Result<f64> {
    check_lower_args(p1, p2, n)?;
    let a = ratio_root(p1, p2, n);
    let m = 1.0 - p1 + p2;
    Ok(1.0 - m * a / (m + a * p2))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(p1: f64, eps: f64, k: u32, n: u64) -> BoundQuery {
        BoundQuery::new(p1, 0.0, eps, k, n)
    }

    #[test]
    fn case_k_condition_examples() {
        for n in [2, 3, 10, 500] {
            assert!(case_k_applies(&q(0.5, 0.25, 2, n)));
        }
        let eps = 0.1;
        let k = 4;
        let edge = (1.0 - eps) / k as f64;
        assert!(case_k_applies(&q(edge, eps, k, 3)));
        assert!(!case_k_applies(&q(edge * (1.0 - 1e-9), eps, k, 3)));
    }

    #[test]
    fn upper_bound_examples() {
        let r = upper_bound(&q(0.5, 0.25, 2, 2)).unwrap();
        assert_eq!(r.case, BoundCase::CaseK);
        assert!((r.value - 2.0 / 3.0).abs() < 1e-15);

        for k in [2u32, 3, 5] {
            let eps = 0.2;
            let p1 = (1.0 - eps) / k as f64;
            let r = upper_bound(&q(p1, eps, k, 2)).unwrap();
            assert!((r.value - 1.0 / k as f64).abs() < 1e-12, "k = {k}: {}", r.value);
        }
    }

    #[test]
    fn upper_bound_rejects_invalid_queries() {
        assert!(upper_bound(&q(0.5, 0.6, 2, 2)).is_err());
        assert!(upper_bound(&q(0.5, 0.2, 1, 2)).is_err());
        assert!(upper_bound(&q(0.5, 0.2, 2, 1)).is_err());
        assert!(upper_bound(&q(0.1, 0.2, 4, 2)).is_err());
    }

    #[test]
    fn case_j_witness_solves_its_system() {
        // p1 well above (1 - eps)/(k - 1) forces a truncated support
        let query = q(0.45, 0.1, 5, 8);
        let r = upper_bound(&query).unwrap();
        let BoundCase::CaseJ(j) = r.case else {
            panic!("expected Case j, got {:?}", r.case)
        };
        let (qq, pp) = r.witness.unwrap();
        let alpha = 1.0 / 7.0;
        let mass = (j - 1) as f64 * 0.45 + qq + (5 - j) as f64 * pp;
        assert!((mass - 0.9).abs() < 1e-12);
        let stat = (j - 1) as f64 * (pp.powf(-alpha) - 0.45f64.powf(-alpha)) - qq.powf(-alpha);
        assert!(stat.abs() < 1e-10, "residual {stat}");
        assert!(r.value >= 1.0 / j as f64 && r.value < 1.0 / (j - 1) as f64);
    }

    #[test]
    fn case_j_root_at_vanishing_p() {
        // root needs p near 1e-22, beyond any grid in q
        let query = q(0.2932309351742377, 0.22622451878846217, 5, 100);
        let r = upper_bound(&query).unwrap();
        assert_eq!(r.case, BoundCase::CaseJ(3));
        let (qq, pp) = r.witness.unwrap();
        assert!(pp > 0.0 && pp < 1e-15, "p = {pp}");
        assert!(case_j_residual_at(&query, 3, qq, pp).abs() < 1e-10);
        for n in [100, 200, 512] {
            assert!(upper_bound(&q(0.2932309351742377, 0.22622451878846217, 5, n)).is_ok());
        }
    }

    #[test]
    fn lower_bound_examples() {
        assert_eq!(filler_count(0.5, 0.25), 2);
        assert!((lower_bound_integer_s(0.5, 0.25, 2.0).unwrap() - 0.6).abs() < 1e-15);
        assert!((lower_bound_closed(0.5, 0.25, 2.0).unwrap() - 4.0 / 7.0).abs() < 1e-15);
        assert_eq!(lower_bound_closed(0.5, 0.25, 1.0 + 1e-6).unwrap(), 1.0);
        assert_eq!(lower_bound_integer_s(0.5, 0.25, 1.0 + 1e-6).unwrap(), 1.0);
        assert!(lower_bound_closed(0.25, 0.5, 2.0).is_err());
        assert!(lower_bound_closed(0.5, 0.25, 1.0).is_err());
    }

    #[test]
    fn filler_count_handles_exact_hits() {
        // 0.4 + 3 * 0.2 = 1 exactly in rationals
        assert_eq!(filler_count(0.4, 0.2), 3);
        assert_eq!(filler_count(0.9, 0.05), 2);
    }
}
