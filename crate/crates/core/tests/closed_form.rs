mod support;

use num_bigint::BigUint;
use proptest::prelude::*;

use passn_core::coverage::{coverage_single, pass_at_n_estimate};
use passn_core::losses::{dco_dloss_dp, dco_factor, dco_loss, focal_dloss_dp, focal_loss};
use passn_core::{LossSpec, SampleTally};
use support::exact::{self, rel_err, Dyadic};

fn dyadic_grid() -> Vec<Dyadic> {
    let mut v = vec![
        Dyadic::new(1, 20),
        Dyadic::new(3, 12),
        Dyadic::new(1, 10),
        Dyadic::new(1, 4),
    ];
    v.extend((1..16).map(|a| Dyadic::new(a, 4)));
    v.extend([Dyadic::new(1023, 10), Dyadic::new((1 << 20) - 1, 20)]);
    v
}

const BUDGETS: [u64; 10] = [1, 2, 3, 7, 16, 64, 100, 256, 1000, 4096];

#[test]
fn oracle_hand_values() {
    // 1 - 0.75^2 = 7/16
    let p = Dyadic::new(1, 2);
    assert_eq!(exact::coverage(p, 2), 7.0 / 16.0);
    // F(2, 1/4) = 2 * 1/4 * 3/4 / (7/16) = 6/7
    assert!((exact::dco_factor(p, 2) - 6.0 / 7.0).abs() < 1e-16);
    assert_eq!(exact::ratio(&BigUint::from(1u8), &BigUint::from(3u8)), 1.0 / 3.0);
}

#[test]
fn closed_forms_match_exact_rationals() {
    for p in dyadic_grid() {
        let x = p.value();
        for n in BUDGETS {
            let c = coverage_single(x, n).unwrap();
            assert!(rel_err(c, exact::coverage(p, n)) < 1e-12, "coverage p={x} N={n}");
            let f = dco_factor(x, n).unwrap();
            assert!(rel_err(f, exact::dco_factor(p, n)) < 1e-10, "F p={x} N={n}: {f}");
            let l = dco_loss(x, n).unwrap();
            assert!(rel_err(l, exact::dco_loss(p, n)) < 1e-10, "loss p={x} N={n}: {l}");
        }
        for gamma in 0..6u32 {
            let fl = focal_loss(x, gamma as f64).unwrap();
            assert!(
                rel_err(fl, exact::focal_loss(p, gamma)) < 1e-12,
                "focal p={x} g={gamma}"
            );
        }
    }
}

fn binomial(n: u64, k: u64) -> BigUint {
    if k > n {
        return BigUint::from(0u8);
    }
    let mut acc = BigUint::from(1u8);
    for i in 0..k {
        acc = acc * BigUint::from(n - i) / BigUint::from(i + 1);
    }
    acc
}

#[test]
fn estimator_matches_exact_binomials() {
    for (n, c) in [(10u64, 3u64), (64, 1), (200, 17), (500, 250), (1000, 999)] {
        for big_n in [1u64, 2, 5, 10, 50, 200] {
            if big_n > n {
                continue;
            }
            let got = pass_at_n_estimate(SampleTally::new(n, c).unwrap(), big_n).unwrap();
            let all = binomial(n, big_n);
            let miss = binomial(n - c, big_n);
            let want = exact::ratio(&(&all - &miss), &all);
            assert!(rel_err(got, want) < 1e-10, "n={n} c={c} N={big_n}: {got} vs {want}");
        }
    }
}

fn central_difference(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    (f(x + h) - f(x - h)) / (2.0 * h)
}

proptest! {
    #[test]
    fn coverage_is_monotone(p in 1e-6f64..1.0, q in 1e-6f64..1.0, n in 1u64..5000, m in 1u64..5000) {
        let (lo, hi) = if p <= q { (p, q) } else { (q, p) };
        let (a, b) = if n <= m { (n, m) } else { (m, n) };
        let c = coverage_single(lo, a).unwrap();
        prop_assert!((0.0..=1.0).contains(&c));
        prop_assert!(coverage_single(hi, a).unwrap() >= c);
        prop_assert!(coverage_single(lo, b).unwrap() >= c);
    }

    #[test]
    fn factor_is_a_shrinking_weight(p in 0.05f64..0.95, n in 1u64..4096) {
        let f = dco_factor(p, n).unwrap();
        // underflows to 0 once (1 - p)^(N - 1) leaves the f64 range
        prop_assert!((0.0..=1.0).contains(&f));
        prop_assert!(dco_factor(p, n + 1).unwrap() <= f * (1.0 + 1e-12));
    }

    #[test]
    fn unit_weight_kinds_are_bitwise_ce(p in 1e-9f64..1.0) {
        let ce = LossSpec::Ce.logit_weight(p).unwrap();
        prop_assert_eq!(ce.to_bits(), LossSpec::Dco { n: 1 }.logit_weight(p).unwrap().to_bits());
        prop_assert_eq!(ce.to_bits(), LossSpec::Focal { gamma: 0.0 }.logit_weight(p).unwrap().to_bits());
        prop_assert_eq!(LossSpec::Ce.loss(p).unwrap(), LossSpec::Dco { n: 1 }.loss(p).unwrap());
    }

    #[test]
    fn dco_gradient_matches_finite_differences(p in 0.01f64..0.99, n in 1u64..512) {
        let h = 1e-6 * p.min(1.0 - p);
        let fd = central_difference(|x| dco_loss(x, n).unwrap(), p, h);
        let g = dco_dloss_dp(p, n).unwrap();
        prop_assume!(g.abs() > 1e-200);
        prop_assert!(rel_err(g, fd) < 1e-5, "p={} N={}: {} vs {}", p, n, g, fd);
    }

    #[test]
    fn focal_gradient_matches_finite_differences(p in 0.01f64..0.99, gamma in 0.0f64..6.0) {
        let h = 1e-6 * p.min(1.0 - p);
        let fd = central_difference(|x| focal_loss(x, gamma).unwrap(), p, h);
        let g = focal_dloss_dp(p, gamma).unwrap();
        prop_assert!(rel_err(g, fd) < 1e-5, "p={} gamma={}: {} vs {}", p, gamma, g, fd);
    }

    #[test]
    fn estimator_is_monotone_and_exact_at_one(n in 1u64..400, c_frac in 0.0f64..1.0, k_frac in 0.0f64..1.0) {
        let c = (c_frac * n as f64) as u64;
        let big_n = 1 + (k_frac * (n - 1) as f64) as u64;
        let e = pass_at_n_estimate(SampleTally::new(n, c).unwrap(), big_n).unwrap();
        prop_assert!((0.0..=1.0).contains(&e));
        if c < n {
            prop_assert!(pass_at_n_estimate(SampleTally::new(n, c + 1).unwrap(), big_n).unwrap() >= e);
        }
        let one = pass_at_n_estimate(SampleTally::new(n, c).unwrap(), 1).unwrap();
        prop_assert!((one - c as f64 / n as f64).abs() < 1e-12);
    }
}
