use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};

use passn_bench::{proof_fixture, standard_tasks};
use passn_core::cot::{build_dcoa_batch, generate_cot_data, DcoaParams};
use passn_core::proof::{pass_at_n_search, rollout, DEFAULT_MAX_DEPTH};
use passn_core::trainer::{eval_pass_at_n, train, PolicyTable, TrainConfig};
use passn_core::LossSpec;

fn trainer(c: &mut Criterion) {
    let tasks = standard_tasks(1);
    let policy = PolicyTable::uniform(&tasks);
    let mut g = c.benchmark_group("trainer");
    for (name, loss) in [("ce", LossSpec::Ce), ("dco256", LossSpec::Dco { n: 256 })] {
        let mut config = TrainConfig::new(loss, 8.0, 1, 8, 3);
        config.steps_per_epoch = Some(25);
        config.eval.budgets = vec![1, 256];
        g.bench_function(format!("epoch_25_steps_{name}"), |b| {
            b.iter(|| train(black_box(&policy), &tasks, &config).unwrap())
        });
    }
    g.bench_function("eval_pass_at_n", |b| {
        b.iter(|| eval_pass_at_n(black_box(&policy), &tasks, &[1, 16, 256, 4096]).unwrap())
    });
    g.finish();
}

fn proof_search(c: &mut Criterion) {
    let (env, policy) = proof_fixture(2);
    let starts: Vec<usize> = env.golden_proofs().iter().map(|p| p.start).collect();
    let mut g = c.benchmark_group("proof");
    g.bench_function("rollout", |b| {
        b.iter(|| rollout(&policy, &env, black_box(starts[2]), DEFAULT_MAX_DEPTH, 5).unwrap())
    });
    g.bench_function("pass_at_64_search", |b| {
        b.iter(|| pass_at_n_search(&policy, &env, black_box(&starts), 64, DEFAULT_MAX_DEPTH, 5).unwrap())
    });
    g.finish();
}

fn dcoa(c: &mut Criterion) {
    let (model, data) = generate_cot_data(100, 4, 16, 0.5, 4).unwrap();
    c.bench_function("dcoa_batch_of_8", |b| {
        b.iter(|| build_dcoa_batch(&model, black_box(data.iter().copied()), &DcoaParams::new(8, 64, 6)).unwrap())
    });
}

criterion_group!(benches, trainer, proof_search, dcoa);
criterion_main!(benches);
