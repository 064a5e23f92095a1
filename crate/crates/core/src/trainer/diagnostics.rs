//! Exact evaluation and diagnostics for tabular policies.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::coverage::{coverage_single, CoverageCurve};
use crate::error::{domain, Error, Result};
use crate::losses::dco_factor;
use crate::numeric::{argmax, entropy, mean_and_sem};
use crate::trainer::policy::PolicyTable;
use crate::trainer::tasks::TaskSet;

fn all_ids(tasks: &TaskSet) -> Vec<usize> {
    (0..tasks.len()).collect()
}

fn check(policy: &PolicyTable, tasks: &TaskSet, ids: &[usize]) -> Result<()> {
    policy.check_shape(tasks)?;
    tasks.check_ids(ids)?;
    if ids.is_empty() {
        return Err(domain("no problems to evaluate"));
    }
    Ok(())
}

/// Exact dataset coverage at each budget: per-problem success probability is
/// the policy mass on the correct set, so no sampling is involved.
pub fn eval_pass_at_n(policy: &PolicyTable, tasks: &TaskSet, budgets: &[u64]) -> Result<CoverageCurve> {
    eval_pass_at_n_on(policy, tasks, &all_ids(tasks), budgets)
}

pub fn eval_pass_at_n_on(
    policy: &PolicyTable,
    tasks: &TaskSet,
    ids: &[usize],
    budgets: &[u64],
) -> Result<CoverageCurve> {
    check(policy, tasks, ids)?;
    let mass: Vec<f64> = ids
        .iter()
        .map(|&x| policy.correct_mass(x, &tasks.problems()[x]))
        .collect();
    let mut curve = CoverageCurve::new();
    for &n in budgets {
        let mut total = 0.0;
        for &p in &mass {
            total += coverage_single(p, n)?;
        }
        curve.insert(n, (total / mass.len() as f64).clamp(0.0, 1.0))?;
    }
    Ok(curve)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
    /// Values outside `[edges[0], edges[last]]`.
    pub out_of_range: u64,
}

impl Histogram {
    /// Bins are `[e_i, e_{i+1})`, except the last which also includes its
    /// right edge.
    pub fn new(edges: &[f64]) -> Result<Self> {
        if edges.len() < 2 || edges.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(domain("histogram edges must be strictly increasing, at least two"));
        }
        Ok(Self {
            edges: edges.to_vec(),
            counts: vec![0; edges.len() - 1],
            out_of_range: 0,
        })
    }

    pub fn uniform_edges(bins: usize) -> Vec<f64> {
        (0..=bins).map(|i| i as f64 / bins as f64).collect()
    }

    pub fn add(&mut self, v: f64) {
        let last = *self.edges.last().unwrap();
        if !(v >= self.edges[0] && v <= last) {
            self.out_of_range += 1;
            return;
        }
        let bin = if v == last {
            self.counts.len() - 1
        } else {
            self.edges.partition_point(|&e| e <= v) - 1
        };
        self.counts[bin] += 1;
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum::<u64>() + self.out_of_range
    }
}

/// Greedy answer's confidence for each listed problem.
pub fn greedy_confidences(policy: &PolicyTable, ids: &[usize]) -> Vec<f64> {
    ids.iter()
        .map(|&x| {
            let s = policy.probs(x);
            s[argmax(&s)]
        })
        .collect()
}

pub fn greedy_confidence_histogram(policy: &PolicyTable, tasks: &TaskSet, bin_edges: &[f64]) -> Result<Histogram> {
    greedy_confidence_histogram_on(policy, tasks, &all_ids(tasks), bin_edges)
}

pub fn greedy_confidence_histogram_on(
    policy: &PolicyTable,
    tasks: &TaskSet,
    ids: &[usize],
    bin_edges: &[f64],
) -> Result<Histogram> {
    check(policy, tasks, ids)?;
    let mut h = Histogram::new(bin_edges)?;
    for c in greedy_confidences(policy, ids) {
        h.add(c);
    }
    Ok(h)
}

pub fn mean_greedy_confidence(policy: &PolicyTable, tasks: &TaskSet, ids: &[usize]) -> Result<f64> {
    check(policy, tasks, ids)?;
    Ok(mean_and_sem(&greedy_confidences(policy, ids)).0)
}

/// Accuracy at each confidence rank: entry `i` is the fraction of problems
/// whose `(i+1)`-th most confident answer passes the verifier. Ties in
/// confidence keep the lower answer index first.
pub fn calibration_table(policy: &PolicyTable, tasks: &TaskSet, top_k: usize) -> Result<Vec<f64>> {
    calibration_table_on(policy, tasks, &all_ids(tasks), top_k)
}

pub fn calibration_table_on(policy: &PolicyTable, tasks: &TaskSet, ids: &[usize], top_k: usize) -> Result<Vec<f64>> {
    check(policy, tasks, ids)?;
    if let Some(&x) = ids.iter().find(|&&x| tasks.problems()[x].answer_count < top_k) {
        return Err(domain(format!(
            "top_k = {top_k} exceeds the answer count of problem {x}"
        )));
    }
    let mut hits = vec![0usize; top_k];
    for &x in ids {
        let s = policy.probs(x);
        let mut order: Vec<usize> = (0..s.len()).collect();
        order.sort_by(|&a, &b| s[b].total_cmp(&s[a]).then(a.cmp(&b)));
        for (rank, &a) in order.iter().take(top_k).enumerate() {
            if tasks.problems()[x].is_correct(a) {
                hits[rank] += 1;
            }
        }
    }
    Ok(hits.iter().map(|&h| h as f64 / ids.len() as f64).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropyReport {
    /// Nats, one per problem.
    pub per_problem: Vec<f64>,
    pub mean: f64,
    pub sem: f64,
}

pub fn entropy_report(policy: &PolicyTable, tasks: &TaskSet) -> Result<EntropyReport> {
    entropy_report_on(policy, tasks, &all_ids(tasks))
}

pub fn entropy_report_on(policy: &PolicyTable, tasks: &TaskSet, ids: &[usize]) -> Result<EntropyReport> {
    check(policy, tasks, ids)?;
    let per_problem: Vec<f64> = ids.iter().map(|&x| entropy(&policy.probs(x))).collect();
    let (mean, sem) = mean_and_sem(&per_problem);
    Ok(EntropyReport { per_problem, mean, sem })
}

/// Derivative of the test loss `-sum_t log C^N(t)` along the descent
/// direction of cross-entropy on the probe pairs `(problem, target)`.
///
/// Negative values mean a CE step on the probe batch lowers the test loss.
/// Only parameters shared between probe and test problems contribute: rows
/// of problems that appear in both sets, and the shared bias if present.
pub fn directional_derivative(
    policy: &PolicyTable,
    tasks: &TaskSet,
    probe: &[(usize, usize)],
    test_ids: &[usize],
    n: u64,
) -> Result<f64> {
    check(policy, tasks, test_ids)?;
    let probe_ids: Vec<usize> = probe.iter().map(|&(x, _)| x).collect();
    tasks.check_ids(&probe_ids)?;
    for &(x, y) in probe {
        if y >= tasks.problems()[x].answer_count {
            return Err(domain(format!("probe target {y} out of range for problem {x}")));
        }
    }

    // g = -sum grad CE, per row and for the bias
    let mut g_rows: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for &(x, y) in probe {
        let s = policy.probs(x);
        let row = g_rows.entry(x).or_insert_with(|| vec![0.0; s.len()]);
        for (j, sj) in s.iter().enumerate() {
            row[j] -= sj;
        }
        row[y] += 1.0;
    }
    let g_bias: Option<Vec<f64>> = policy.bias().map(|b| {
        let mut acc = vec![0.0; b.len()];
        for row in g_rows.values() {
            for (a, v) in acc.iter_mut().zip(row) {
                *a += v;
            }
        }
        acc
    });

    let mut total = 0.0;
    for &t in test_ids {
        let problem = &tasks.problems()[t];
        let s = policy.probs(t);
        let p: f64 = problem.correct.iter().map(|&a| s[a]).sum::<f64>().min(1.0);
        if p == 0.0 {
            return Err(Error::InfiniteLoss(format!("test problem {t} has zero coverage")));
        }
        // dL/dz_j = -(F/p) * s_j * (1[j in S] - p)
        let scale = -dco_factor(p, n)? / p;
        let grad: Vec<f64> = s
            .iter()
            .enumerate()
            .map(|(j, sj)| {
                let ind = if problem.is_correct(j) { 1.0 } else { 0.0 };
                scale * sj * (ind - p)
            })
            .collect();
        if let Some(row) = g_rows.get(&t) {
            total += grad.iter().zip(row).map(|(a, b)| a * b).sum::<f64>();
        }
        if let Some(gb) = &g_bias {
            total += grad.iter().zip(gb).map(|(a, b)| a * b).sum::<f64>();
        }
    }
    Ok(total)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrontierPoint {
    pub n: u64,
    /// Training budget `N'` whose curve attains the maximum.
    pub best_train_n: u64,
    pub value: f64,
}

/// Pointwise maximum over training budgets; ties go to the smaller `N'`.
pub fn pareto_frontier(curves: &BTreeMap<u64, CoverageCurve>) -> Result<Vec<FrontierPoint>> {
    let (_, first) = curves.iter().next().ok_or_else(|| domain("no curves to combine"))?;
    let grid: Vec<u64> = first.budgets().collect();
    for (n_train, c) in curves {
        if !c.budgets().eq(grid.iter().copied()) {
            return Err(domain(format!("curve for N' = {n_train} uses a different N grid")));
        }
    }
    Ok(grid
        .iter()
        .map(|&n| {
            let mut best: Option<FrontierPoint> = None;
            for (&n_train, c) in curves {
                let v = c.get(n).unwrap();
                if best.is_none_or(|b| v > b.value) {
                    best = Some(FrontierPoint {
                        n,
                        best_train_n: n_train,
                        value: v,
                    });
                }
            }
            best.unwrap()
        })
        .collect())
}

/// Mean confidence on the training target and mean `F(N, .)` per difficulty
/// level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelStat {
    pub level: u32,
    pub count: usize,
    pub mean_confidence: f64,
    pub mean_factor: f64,
}

pub fn difficulty_profile(policy: &PolicyTable, tasks: &TaskSet, n: u64) -> Result<Vec<LevelStat>> {
    policy.check_shape(tasks)?;
    let mut out = Vec::new();
    for (i, &count) in tasks.level_histogram().iter().enumerate() {
        if count == 0 {
            continue;
        }
        let level = i as u32 + 1;
        let mut conf = 0.0;
        let mut factor = 0.0;
        for x in tasks.ids_at_level(level) {
            let problem = &tasks.problems()[x];
            let p = match problem.noisy_label {
                Some(y) => policy.probs(x)[y],
                None => policy.correct_mass(x, problem),
            };
            conf += p;
            factor += dco_factor(p, n)?;
        }
        out.push(LevelStat {
            level,
            count,
            mean_confidence: conf / count as f64,
            mean_factor: factor / count as f64,
        });
    }
    Ok(out)
}
