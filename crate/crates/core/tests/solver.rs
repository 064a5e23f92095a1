use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use passn_core::bounds::{lower_bound_closed, lower_bound_integer_s, upper_bound};
use passn_core::optimal::{
    brute_force_optimal, check_order_alignment, expected_coverage, optimal_confidences, swap_gain,
};
use passn_core::{AccuracyProfile, BoundQuery, ConfidenceProfile};

/// Random non-increasing accuracies of length `k` with tail mass in
/// `(0.01, 0.5)` and a strict gap between the first two.
fn random_profile(rng: &mut impl Rng, k: usize) -> Vec<f64> {
    loop {
        let mass = 1.0 - rng.random_range(0.01..0.5);
        let mut w: Vec<f64> = (0..k).map(|_| rng.random::<f64>() + 1e-3).collect();
        w.sort_by(|a, b| b.total_cmp(a));
        let s: f64 = w.iter().sum();
        let p: Vec<f64> = w.iter().map(|x| x / s * mass).collect();
        if k == 1 || p[0] > p[1] * (1.0 + 1e-6) {
            return p;
        }
    }
}

#[test]
fn solver_matches_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..40 {
        let k = rng.random_range(1..=4);
        let acc = AccuracyProfile::new(random_profile(&mut rng, k)).unwrap();
        for n in [2u64, 5, 50] {
            let opt = expected_coverage(&acc, &optimal_confidences(&acc, n).unwrap(), n).unwrap();
            let bf = expected_coverage(&acc, &brute_force_optimal(&acc, n, 60).unwrap(), n).unwrap();
            assert!(opt >= bf - 1e-9, "{acc:?} N={n}: {opt} < {bf}");
        }
    }
}

#[test]
fn upper_bound_dominates_solver_max_confidence() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..100 {
        let k = rng.random_range(2..=5);
        let p = random_profile(&mut rng, k);
        let acc = AccuracyProfile::new(p.clone()).unwrap();
        let eps = acc.tail_mass();
        for n in [2u64, 3, 10, 100] {
            let top = optimal_confidences(&acc, n).unwrap().max();
            let up = upper_bound(&BoundQuery::new(p[0], p[1], eps, k as u32, n))
                .unwrap()
                .value;
            assert!(top <= up + 1e-9, "{p:?} N={n}: {top} > upper {up}");
            assert!(
                lower_bound_closed(p[0], p[1], n as f64).unwrap()
                    <= lower_bound_integer_s(p[0], p[1], n as f64).unwrap() + 1e-12
            );
        }
    }
}

/// Number of answers the lower-bound argument keeps: the top one plus `s`
/// copies of `p2`, `s` smallest with `p1 + s p2 >= 1`.
fn lower_bound_support(p1: f64, p2: f64) -> usize {
    ((1.0 - p1) / p2).ceil() as usize + 1
}

#[test]
fn lower_bounds_hold_when_support_fits() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut checked = 0;
    while checked < 100 {
        let k = rng.random_range(2..=5);
        let p = random_profile(&mut rng, k);
        if k > lower_bound_support(p[0], p[1]) {
            continue;
        }
        checked += 1;
        let acc = AccuracyProfile::new(p.clone()).unwrap();
        for n in [2u64, 3, 10, 100, 1000] {
            let top = optimal_confidences(&acc, n).unwrap().max();
            let lo = lower_bound_integer_s(p[0], p[1], n as f64).unwrap();
            assert!(lo <= top + 1e-9, "{p:?} N={n}: lower {lo} > {top}");
        }
    }
}

// More small answers than the argument keeps: at large N each one still
// claims nearly a 1/k share, pulling the top confidence under the bound.
#[test]
fn lower_bound_fails_with_many_small_answers() {
    let p = [
        0.3212254403942142,
        0.25027541235560413,
        0.14349203804651195,
        0.0732804555018845,
        0.02021979143380236,
    ];
    assert!(p.len() > lower_bound_support(p[0], p[1]));
    let top = optimal_confidences(&AccuracyProfile::new(p.to_vec()).unwrap(), 100)
        .unwrap()
        .max();
    let lo = lower_bound_closed(p[0], p[1], 100.0).unwrap();
    assert!((top - 0.208562).abs() < 1e-5, "{top}");
    assert!(lo > top + 5e-3, "{lo} vs {top}");
}

proptest! {
    #[test]
    fn optimum_is_calibrated_and_beats_simple_allocations(
        raw in proptest::collection::vec(0.01f64..1.0, 1..6),
        tail in 0.0f64..0.5,
        n in 1u64..2000,
    ) {
        let mut w = raw;
        w.sort_by(|a, b| b.total_cmp(a));
        let s: f64 = w.iter().sum();
        let acc = AccuracyProfile::new(w.iter().map(|x| x / s * (1.0 - tail)).collect()).unwrap();
        let c = optimal_confidences(&acc, n).unwrap();
        prop_assert!((c.values().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(check_order_alignment(&acc, &c).unwrap().aligned);
        let best = expected_coverage(&acc, &c, n).unwrap();
        let one_hot = ConfidenceProfile::one_hot(acc.len(), 0);
        let uniform = ConfidenceProfile::new(vec![1.0 / acc.len() as f64; acc.len()]).unwrap();
        prop_assert!(best >= expected_coverage(&acc, &one_hot, n).unwrap() - 1e-12);
        prop_assert!(best >= expected_coverage(&acc, &uniform, n).unwrap() - 1e-12);
    }

    #[test]
    fn fixing_a_misordered_pair_never_hurts(
        a in 0.05f64..0.5, b in 0.05f64..0.5, c1 in 0.0f64..1.0, n in 1u64..200,
    ) {
        prop_assume!((a - b).abs() > 1e-6);
        let (hi, lo) = if a > b { (a, b) } else { (b, a) };
        let acc = AccuracyProfile::new(vec![hi, lo]).unwrap();
        // put less confidence on the more accurate answer
        let small = c1.min(1.0 - c1);
        let conf = ConfidenceProfile::new(vec![small, 1.0 - small]).unwrap();
        prop_assert!(swap_gain(&acc, &conf, (0, 1), n).unwrap() >= -1e-15);
    }
}
