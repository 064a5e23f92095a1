//! Sampling-based simulators checked against their exact counterparts.

use passn_core::cot::{
    build_dcoa_batch, exact_marginal, generate_cot_data, mc_marginal, train_cot, CotLoss, CotTrainConfig, DcoaParams,
    Triplet,
};
use passn_core::coverage::pass_at_n_estimate;
use passn_core::losses::dco_factor;
use passn_core::numeric::sample_index;
use passn_core::proof::{
    analytic_coverage, chain_env, pass_at_n_search, train_step_policy, StepPolicy, StepTrainConfig, DEFAULT_MAX_DEPTH,
};
use passn_core::rng::stream;
use passn_core::trainer::{directional_derivative, eval_pass_at_n, generate_tasks, PolicyTable, TaskGenConfig};
use passn_core::SampleTally;
use rand::Rng;

#[test]
fn exact_pass_at_n_matches_sampling_estimate() {
    let tasks = generate_tasks(&TaskGenConfig::new(50, 8, 3, 4)).unwrap();
    let mut rng = stream(9, "test.policy", 0);
    let rows: Vec<Vec<f64>> = (0..tasks.len())
        .map(|_| (0..8).map(|_| rng.random_range(-2.0..2.0)).collect())
        .collect();
    let pol = PolicyTable::from_rows(rows, None).unwrap();
    // 2000 draws per problem, 10^5 in total
    let draws = 2000u64;
    let budgets = [1u64, 4, 16];
    let exact = eval_pass_at_n(&pol, &tasks, &budgets).unwrap();
    let mut est = [0.0; 3];
    let mut var = [0.0; 3];
    for (x, problem) in tasks.problems().iter().enumerate() {
        let probs = pol.probs(x);
        let mut sampler = stream(21, "test.draws", x as u64);
        let hits = (0..draws)
            .filter(|_| problem.is_correct(sample_index(&probs, sampler.random::<f64>())))
            .count() as u64;
        let theta = pol.correct_mass(x, problem);
        for (i, &n) in budgets.iter().enumerate() {
            est[i] += pass_at_n_estimate(SampleTally::new(draws, hits).unwrap(), n).unwrap();
            // U-statistic of degree n: variance <= (n / draws) theta (1 - theta)
            var[i] += n as f64 / draws as f64 * theta * (1.0 - theta);
        }
    }
    let m = tasks.len() as f64;
    for (i, &n) in budgets.iter().enumerate() {
        let se = var[i].sqrt() / m;
        let got = est[i] / m;
        let want = exact.get(n).unwrap();
        assert!((got - want).abs() <= 3.0 * se, "N={n}: {got} vs {want} (se {se})");
    }
}

#[test]
fn directional_derivative_sign_conventions() {
    let tasks = generate_tasks(&TaskGenConfig::new(40, 6, 2, 2)).unwrap();
    let pol = PolicyTable::uniform(&tasks);
    let test: Vec<usize> = (0..20).collect();
    // own-loss probe at N = 1 is a descent direction
    let own: Vec<(usize, usize)> = test.iter().map(|&x| (x, tasks.problems()[x].correct[0])).collect();
    assert!(directional_derivative(&pol, &tasks, &own, &test, 1).unwrap() < 0.0);
    // probes on rows absent from the test set share no parameters
    let other: Vec<(usize, usize)> = (20..40).map(|x| (x, 0)).collect();
    assert_eq!(directional_derivative(&pol, &tasks, &other, &test, 16).unwrap(), 0.0);
    // ...unless the shared bias couples them
    let shared = PolicyTable::uniform_shared(&tasks).unwrap();
    assert_ne!(directional_derivative(&shared, &tasks, &other, &test, 16).unwrap(), 0.0);
}

#[test]
fn sampled_search_matches_analytic_coverage() {
    let env = chain_env(4, 2).unwrap();
    let pol = StepPolicy::uniform(&env);
    let trials = 20_000;
    let theorems = vec![0; trials];
    for n in [1u64, 4, 16] {
        let want = analytic_coverage(&pol, &env, 0, n, DEFAULT_MAX_DEPTH).unwrap();
        assert!((want - (1.0 - (15.0f64 / 16.0).powi(n as i32))).abs() < 1e-12);
        let got = pass_at_n_search(&pol, &env, &theorems, n, DEFAULT_MAX_DEPTH, n)
            .unwrap()
            .success_fraction;
        let se = (want * (1.0 - want) / trials as f64).sqrt();
        assert!((got - want).abs() <= 3.0 * se, "N={n}: {got} vs {want}");
    }
}

#[test]
fn stepwise_training_spreads_mass_over_n_eff_tactics() {
    let b = 32;
    let env = chain_env(b, 1).unwrap();
    for n_eff in [2u64, 4, 8, 16] {
        // only max(N_eff, 2) tactics are plausible a priori
        let plausible = (n_eff as usize).max(2);
        let row: Vec<f64> = (0..b).map(|t| if t < plausible { 0.0 } else { -20.0 }).collect();
        let pol = StepPolicy::from_rows(vec![row], None).unwrap();
        let trained = train_step_policy(&pol, &env, &StepTrainConfig::stepwise(n_eff, 200, 0.5, 0)).unwrap();
        let ratio = trained.participation_ratio(0) / n_eff as f64;
        assert!((0.5..=1.5).contains(&ratio), "N_eff={n_eff}: ratio {ratio}");
    }
}

#[test]
fn mc_marginal_is_unbiased() {
    let (model, _) = generate_cot_data(3, 4, 6, 1.0, 17).unwrap();
    let k = 16;
    let seeds = 1000;
    for (x, y) in [(0, 0), (1, 3), (2, 5)] {
        let exact = exact_marginal(&model, x, y).unwrap();
        let est: Vec<f64> = (0..seeds)
            .map(|s| mc_marginal(&model, x, y, k, s).unwrap().value)
            .collect();
        let mean = est.iter().sum::<f64>() / seeds as f64;
        let pooled = (exact * (1.0 - exact) / (k as f64 * seeds as f64)).sqrt();
        assert!((mean - exact).abs() <= 3.0 * pooled, "({x},{y}): {mean} vs {exact}");
        // empirical spread of single estimates vs the binomial formula
        let sd = (est.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (seeds - 1) as f64).sqrt();
        let binom = (exact * (1.0 - exact) / k as f64).sqrt();
        assert!((sd / binom - 1.0).abs() < 0.2, "({x},{y}): sd {sd} vs {binom}");
    }
}

#[test]
fn dcoa_batch_discards_exactly_low_factor_candidates() {
    let (model, data) = generate_cot_data(40, 4, 4, 1.5, 3).unwrap();
    let stream_of = |reps: usize| data.iter().copied().cycle().take(reps * data.len());
    let params = DcoaParams::new(1000, 64, 5);
    let batch = build_dcoa_batch(&model, stream_of(3), &params).unwrap();
    assert!(!batch.complete);
    for e in &batch.evaluated {
        assert_eq!(e.factor, dco_factor(e.estimate.value, 64).unwrap());
        assert_eq!(e.kept, e.factor >= 0.01);
    }
    assert_eq!(batch.discarded, batch.evaluated.iter().filter(|e| !e.kept).count());
    assert!(batch.discarded > 0 && batch.discarded < batch.evaluated.len());

    // estimates are multiples of 1/K: 6/64 is kept, 7/64 and 0.1 are not
    assert!(dco_factor(6.0 / 64.0, 64).unwrap() >= 0.01);
    assert!(dco_factor(7.0 / 64.0, 64).unwrap() < 0.01);
    assert!(dco_factor(0.1, 64).unwrap() < 0.01);
}

#[test]
fn dcoa_batch_boundary_at_one_tenth() {
    // answer 0 has marginal exactly 0.1; K = 10 so one hit gives estimate 0.1
    let model = passn_core::cot::CoTModel::from_probabilities(&[vec![1.0]], &[vec![vec![0.1, 0.9]]]).unwrap();
    let t = Triplet {
        problem: 0,
        trace: 0,
        answer: 0,
    };
    let mut params = DcoaParams::new(1, 64, 0);
    params.k = 10;
    let mut seen = [false; 2];
    for seed in 0..200 {
        params.seed = seed;
        let b = build_dcoa_batch(&model, [t], &params).unwrap();
        let e = b.evaluated[0];
        if e.estimate.value == 0.1 {
            seen[0] = true;
            assert!(!e.kept && b.discarded == 1);
        } else if e.estimate.value == 0.0 {
            seen[1] = true;
            assert!(e.kept && b.discarded == 0);
        }
    }
    assert_eq!(seen, [true, true]);
}

#[test]
fn dcoa_discards_grow_and_drift_stays_below_ce() {
    let (model, data) = generate_cot_data(100, 4, 16, 0.5, 11).unwrap();
    let run = |loss| {
        let mut c = CotTrainConfig::new(loss, 20, 8.0, 8, 13);
        c.k = 64;
        train_cot(&model, &data, &c).unwrap().1
    };
    let ce = run(CotLoss::Ce);
    let dcoa = run(CotLoss::Dcoa { n: 64 });
    assert!(ce.drift() > 0.0);
    assert!(dcoa.drift() < ce.drift(), "{} vs {}", dcoa.drift(), ce.drift());
    let discards: Vec<f64> = dcoa.epochs[1..].iter().map(|e| e.discarded as f64).collect();
    let smooth: Vec<f64> = discards.windows(5).map(|w| w.iter().sum::<f64>() / 5.0).collect();
    assert!(smooth.windows(2).all(|w| w[1] >= w[0]), "{discards:?}");
    assert!(smooth[smooth.len() - 1] > smooth[0] + 10.0, "{discards:?}");
    assert!(ce.epochs.iter().all(|e| e.discarded == 0));
}
