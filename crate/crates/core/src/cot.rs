//! Toy chain-of-thought model: categorical reasoning traces followed by an
//! answer. The trace-marginalized answer confidence is available exactly
//! (small T and R) and by Monte Carlo, which is what approximate DCO
//! training on reasoning models has to rely on.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::losses::{dco_factor, DEFAULT_MARGINAL_THRESHOLD};
use crate::numeric::{argmax, sample_index, softmax};
use crate::rng::{stream, StreamRng};
use crate::trainer::Histogram;

/// Upper bound on traces and answers per problem, so the exact marginal stays
/// cheap enough to serve as an oracle.
pub const MAX_CATEGORIES: usize = 32;

/// Default Monte-Carlo sample count per confidence estimate.
pub const DEFAULT_MC_SAMPLES: usize = 64;

/// Logits of `p(c|x)` (one row per problem) and `p(y|c,x)` (one row per
/// problem and trace).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoTModel {
    trace_logits: Vec<Vec<f64>>,
    answer_logits: Vec<Vec<Vec<f64>>>,
}

impl CoTModel {
    pub fn from_logits(trace_logits: Vec<Vec<f64>>, answer_logits: Vec<Vec<Vec<f64>>>) -> Result<Self> {
        if trace_logits.is_empty() || trace_logits.len() != answer_logits.len() {
            return Err(domain("need one trace row and one answer block per problem"));
        }
        let t = trace_logits[0].len();
        let r = answer_logits[0].first().map_or(0, Vec::len);
        if t == 0 || r == 0 {
            return Err(domain("traces and answers must be non-empty"));
        }
        if t > MAX_CATEGORIES || r > MAX_CATEGORIES {
            return Err(Error::Guard(format!(
                "{t} traces x {r} answers exceeds the {MAX_CATEGORIES}-category limit"
            )));
        }
        for (x, (tr, block)) in trace_logits.iter().zip(&answer_logits).enumerate() {
            if tr.len() != t || block.len() != t || block.iter().any(|row| row.len() != r) {
                return Err(domain(format!("problem {x} has an inconsistent shape")));
            }
        }
        let finite = trace_logits.iter().flatten().all(|z| z.is_finite())
            && answer_logits.iter().flatten().flatten().all(|z| z.is_finite());
        if !finite {
            return Err(domain("logits must be finite"));
        }
        Ok(Self {
            trace_logits,
            answer_logits,
        })
    }

    /// Build from probability tables; zero entries become very negative logits.
    pub fn from_probabilities(traces: &[Vec<f64>], answers: &[Vec<Vec<f64>>]) -> Result<Self> {
        fn logits(row: &[f64]) -> Result<Vec<f64>> {
            let total: f64 = row.iter().sum();
            if row.iter().any(|&p| !(0.0..=1.0).contains(&p)) || (total - 1.0).abs() > 1e-10 {
                return Err(domain("probability rows must lie on the simplex"));
            }
            Ok(row.iter().map(|&p| if p > 0.0 { p.ln() } else { -1e3 }).collect())
        }
        let t = traces.iter().map(|r| logits(r)).collect::<Result<Vec<_>>>()?;
        let a = answers
            .iter()
            .map(|block| block.iter().map(|r| logits(r)).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        Self::from_logits(t, a)
    }

    /// Gaussian logits with standard deviation `scale`.
    pub fn random(problems: usize, traces: usize, answers: usize, scale: f64, seed: u64) -> Result<Self> {
        if !(scale >= 0.0 && scale.is_finite()) {
            return Err(domain("logit scale must be finite and non-negative"));
        }
        let mut rng = stream(seed, "cot.random_model", 0);
        let mut normal = || scale * rng.sample::<f64, _>(StandardNormal);
        let t = (0..problems).map(|_| (0..traces).map(|_| normal()).collect()).collect();
        let a = (0..problems)
            .map(|_| (0..traces).map(|_| (0..answers).map(|_| normal()).collect()).collect())
            .collect();
        Self::from_logits(t, a)
    }

    pub fn problem_count(&self) -> usize {
        self.trace_logits.len()
    }

    pub fn trace_count(&self) -> usize {
        self.trace_logits[0].len()
    }

    pub fn answer_count(&self) -> usize {
        self.answer_logits[0][0].len()
    }

    pub fn trace_probs(&self, x: usize) -> Vec<f64> {
        softmax(&self.trace_logits[x])
    }

    pub fn answer_probs(&self, x: usize, c: usize) -> Vec<f64> {
        softmax(&self.answer_logits[x][c])
    }

    /// Exact `p(y|x)` for every answer.
    pub fn marginal_row(&self, x: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.answer_count()];
        for (c, pc) in self.trace_probs(x).into_iter().enumerate() {
            for (o, py) in out.iter_mut().zip(self.answer_probs(x, c)) {
                *o += pc * py;
            }
        }
        out
    }

    fn check_problem(&self, x: usize) -> Result<()> {
        if x >= self.problem_count() {
            return Err(domain(format!("problem {x} out of range")));
        }
        Ok(())
    }

    fn check_answer(&self, x: usize, y: usize) -> Result<()> {
        self.check_problem(x)?;
        if y >= self.answer_count() {
            return Err(domain(format!("answer {y} out of range")));
        }
        Ok(())
    }

    /// Answer counts from `k` sampled (trace, answer) pairs.
    fn sample_answers(&self, x: usize, k: usize, rng: &mut StreamRng) -> Vec<usize> {
        let traces = self.trace_probs(x);
        let answers: Vec<Vec<f64>> = (0..self.trace_count()).map(|c| self.answer_probs(x, c)).collect();
        let mut counts = vec![0; self.answer_count()];
        for _ in 0..k {
            let c = sample_index(&traces, rng.random::<f64>());
            counts[sample_index(&answers[c], rng.random::<f64>())] += 1;
        }
        counts
    }

    fn find_non_finite(&self) -> Option<String> {
        for (x, row) in self.trace_logits.iter().enumerate() {
            if row.iter().any(|z| !z.is_finite()) {
                return Some(format!("trace logits of problem {x}"));
            }
        }
        for (x, block) in self.answer_logits.iter().enumerate() {
            for (c, row) in block.iter().enumerate() {
                if row.iter().any(|z| !z.is_finite()) {
                    return Some(format!("answer logits of problem {x}, trace {c}"));
                }
            }
        }
        None
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub value: f64,
    pub sample_count: usize,
    /// Binomial standard error `sqrt(v (1 - v) / K)`.
    pub standard_error: f64,
}

impl McEstimate {
    fn from_count(hits: usize, k: usize) -> Self {
        let value = hits as f64 / k as f64;
        Self {
            value,
            sample_count: k,
            standard_error: (value * (1.0 - value) / k as f64).sqrt(),
        }
    }
}

/// `p(y|x) = sum_c p(c|x) p(y|c,x)`.
pub fn exact_marginal(model: &CoTModel, x: usize, y: usize) -> Result<f64> {
    model.check_answer(x, y)?;
    Ok(model.marginal_row(x)[y])
}

/// Fraction of `k` sampled completions whose answer is `y`.
pub fn mc_marginal(model: &CoTModel, x: usize, y: usize, k: usize, seed: u64) -> Result<McEstimate> {
    model.check_answer(x, y)?;
    if k == 0 {
        return Err(domain("need at least one Monte-Carlo sample"));
    }
    let counts = model.sample_answers(x, k, &mut stream(seed, "cot.mc_marginal", 0));
    Ok(McEstimate::from_count(counts[y], k))
}

/// Most frequent answer among `k` samples (ties to the lowest index) and its
/// frequency.
pub fn mode_confidence(model: &CoTModel, x: usize, k: usize, seed: u64) -> Result<(usize, McEstimate)> {
    model.check_problem(x)?;
    if k == 0 {
        return Err(domain("need at least one Monte-Carlo sample"));
    }
    let counts = model.sample_answers(x, k, &mut stream(seed, "cot.mode_confidence", 0));
    let freq: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
    let y = argmax(&freq);
    Ok((y, McEstimate::from_count(counts[y], k)))
}

/// Exact mode of the marginal and its probability.
pub fn exact_mode(model: &CoTModel, x: usize) -> Result<(usize, f64)> {
    model.check_problem(x)?;
    let row = model.marginal_row(x);
    let y = argmax(&row);
    Ok((y, row[y]))
}

/// A supervised `(problem, trace, answer)` triplet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Triplet {
    pub problem: usize,
    pub trace: usize,
    pub answer: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Evaluated {
    pub triplet: Triplet,
    /// Position in the candidate stream.
    pub position: usize,
    pub estimate: McEstimate,
    pub factor: f64,
    pub kept: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DcoaBatch {
    /// Evaluated candidates in stream order, kept or not.
    pub evaluated: Vec<Evaluated>,
    pub discarded: usize,
    /// False when the stream ran out before `batch_size` candidates were kept.
    pub complete: bool,
}

impl DcoaBatch {
    pub fn kept(&self) -> impl Iterator<Item = &Evaluated> {
        self.evaluated.iter().filter(|e| e.kept)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DcoaParams {
    pub batch_size: usize,
    pub n: u64,
    pub k: usize,
    /// Keep a candidate iff `F(n, estimate) >= threshold`.
    pub threshold: f64,
    pub seed: u64,
}

impl DcoaParams {
    pub fn new(batch_size: usize, n: u64, seed: u64) -> Self {
        Self {
            batch_size,
            n,
            k: DEFAULT_MC_SAMPLES,
            threshold: DEFAULT_MARGINAL_THRESHOLD,
            seed,
        }
    }
}

fn evaluate(model: &CoTModel, t: Triplet, position: usize, params: &DcoaParams, salt: u64) -> Result<Evaluated> {
    model.check_answer(t.problem, t.answer)?;
    if t.trace >= model.trace_count() {
        return Err(domain(format!("trace {} out of range", t.trace)));
    }
    // one estimate per candidate, reused for the filter and the gradient weight
    let mut rng = stream(params.seed ^ salt, "cot.dcoa_candidate", position as u64);
    let counts = model.sample_answers(t.problem, params.k, &mut rng);
    let estimate = McEstimate::from_count(counts[t.answer], params.k);
    let factor = dco_factor(estimate.value, params.n)?;
    Ok(Evaluated {
        triplet: t,
        position,
        estimate,
        factor,
        kept: factor >= params.threshold,
    })
}

/// Consume candidates in order until `batch_size` are kept.
///
/// Each candidate's answer confidence is a `k`-sample Monte-Carlo estimate
/// drawn from its own random stream (keyed by stream position), so the
/// outcome does not depend on evaluation order.
pub fn build_dcoa_batch<I>(model: &CoTModel, candidates: I, params: &DcoaParams) -> Result<DcoaBatch>
where
    I: IntoIterator<Item = Triplet>,
{
    build_from(model, candidates.into_iter().enumerate(), params, 0)
}

fn build_from<I>(model: &CoTModel, candidates: I, params: &DcoaParams, salt: u64) -> Result<DcoaBatch>
where
    I: Iterator<Item = (usize, Triplet)>,
{
    if params.batch_size == 0 || params.k == 0 {
        return Err(domain("batch size and sample count must be positive"));
    }
    if params.n == 0 {
        return Err(domain("N' must be at least 1"));
    }
    if !(0.0..=1.0).contains(&params.threshold) {
        return Err(domain("threshold must be in [0, 1]"));
    }
    let mut evaluated = Vec::new();
    let mut kept = 0;
    let mut discarded = 0;
    for (position, t) in candidates {
        let e = evaluate(model, t, position, params, salt)?;
        if e.kept {
            kept += 1;
        } else {
            discarded += 1;
        }
        evaluated.push(e);
        if kept == params.batch_size {
            break;
        }
    }
    Ok(DcoaBatch {
        evaluated,
        discarded,
        complete: kept == params.batch_size,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CotLoss {
    Ce,
    /// Approximate DCO with Monte-Carlo marginal confidence.
    Dcoa {
        n: u64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CotTrainConfig {
    pub loss: CotLoss,
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    pub seed: u64,
    #[serde(default = "default_bins")]
    pub histogram_bins: usize,
}

fn default_k() -> usize {
    DEFAULT_MC_SAMPLES
}

fn default_threshold() -> f64 {
    DEFAULT_MARGINAL_THRESHOLD
}

fn default_bins() -> usize {
    20
}

impl CotTrainConfig {
    pub fn new(loss: CotLoss, epochs: usize, learning_rate: f64, batch_size: usize, seed: u64) -> Self {
        Self {
            loss,
            epochs,
            learning_rate,
            batch_size,
            k: DEFAULT_MC_SAMPLES,
            threshold: DEFAULT_MARGINAL_THRESHOLD,
            seed,
            histogram_bins: default_bins(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CotEpoch {
    /// 0 for the untrained model.
    pub epoch: usize,
    /// Exact mode confidence per problem.
    pub mode_histogram: Histogram,
    pub mean_mode_confidence: f64,
    /// Mean exact confidence on the training answers.
    pub mean_target_confidence: f64,
    pub kept: usize,
    pub discarded: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CotTrajectory {
    /// `epochs + 1` entries; the first describes the model before training.
    pub epochs: Vec<CotEpoch>,
}

impl CotTrajectory {
    /// Change in mean mode confidence from the untrained model to the end.
    pub fn drift(&self) -> f64 {
        self.epochs.last().unwrap().mean_mode_confidence - self.epochs[0].mean_mode_confidence
    }
}

fn cot_snapshot(
    model: &CoTModel,
    data: &[Triplet],
    epoch: usize,
    bins: usize,
    kept: usize,
    discarded: usize,
) -> Result<CotEpoch> {
    let mut hist = Histogram::new(&Histogram::uniform_edges(bins.max(1)))?;
    let mut total = 0.0;
    for x in 0..model.problem_count() {
        let (_, p) = exact_mode(model, x)?;
        hist.add(p);
        total += p;
    }
    let target = data
        .iter()
        .map(|t| model.marginal_row(t.problem)[t.answer])
        .sum::<f64>()
        / data.len() as f64;
    Ok(CotEpoch {
        epoch,
        mode_histogram: hist,
        mean_mode_confidence: total / model.problem_count() as f64,
        mean_target_confidence: target,
        kept,
        discarded,
    })
}

/// Gradient descent on golden triplets. Each epoch shuffles the data into a
/// candidate stream; under `Dcoa` batches come from [`build_dcoa_batch`] and
/// each kept triplet's CE gradient (trace and answer logits) is scaled by
/// `F(N', estimate)`. Under `Ce` every triplet is kept with weight 1.
pub fn train_cot(model: &CoTModel, data: &[Triplet], config: &CotTrainConfig) -> Result<(CoTModel, CotTrajectory)> {
    if data.is_empty() {
        return Err(domain("no training triplets"));
    }
    if config.epochs == 0 || config.batch_size == 0 {
        return Err(domain("epochs and batch size must be positive"));
    }
    if !(config.learning_rate > 0.0 && config.learning_rate.is_finite()) {
        return Err(domain("learning rate must be positive"));
    }
    for t in data {
        model.check_answer(t.problem, t.answer)?;
        if t.trace >= model.trace_count() {
            return Err(domain(format!("trace {} out of range", t.trace)));
        }
    }
    let mut model = model.clone();
    let mut order_rng = stream(config.seed, "cot.train_order", 0);
    let mut trajectory = CotTrajectory {
        epochs: vec![cot_snapshot(&model, data, 0, config.histogram_bins, 0, 0)?],
    };
    let step = config.learning_rate / config.batch_size as f64;
    for epoch in 1..=config.epochs {
        let mut order: Vec<usize> = (0..data.len()).collect();
        order.shuffle(&mut order_rng);
        let (mut kept_total, mut discarded_total) = (0, 0);
        let mut pos = 0;
        while pos < order.len() {
            let batch: Vec<(Triplet, f64)> = match config.loss {
                CotLoss::Ce => {
                    let end = (pos + config.batch_size).min(order.len());
                    let b = order[pos..end].iter().map(|&i| (data[i], 1.0)).collect();
                    pos = end;
                    b
                }
                CotLoss::Dcoa { n } => {
                    let params = DcoaParams {
                        batch_size: config.batch_size,
                        n,
                        k: config.k,
                        threshold: config.threshold,
                        seed: config.seed,
                    };
                    let stream_iter = order[pos..].iter().enumerate().map(|(j, &i)| (pos + j, data[i]));
                    let b = build_from(&model, stream_iter, &params, epoch as u64)?;
                    pos += b.evaluated.len();
                    discarded_total += b.discarded;
                    b.kept().map(|e| (e.triplet, e.factor)).collect()
                }
            };
            kept_total += batch.len();
            apply_cot_batch(&mut model, &batch, step);
            if let Some(loc) = model.find_non_finite() {
                return Err(Error::Divergence(format!("{loc} at epoch {epoch}")));
            }
        }
        trajectory.epochs.push(cot_snapshot(
            &model,
            data,
            epoch,
            config.histogram_bins,
            kept_total,
            discarded_total,
        )?);
    }
    Ok((model, trajectory))
}

fn apply_cot_batch(model: &mut CoTModel, batch: &[(Triplet, f64)], step: f64) {
    // probabilities are read before any update in the batch
    let grads: Vec<(Triplet, f64, Vec<f64>, Vec<f64>)> = batch
        .iter()
        .map(|&(t, w)| {
            (
                t,
                w,
                model.trace_probs(t.problem),
                model.answer_probs(t.problem, t.trace),
            )
        })
        .collect();
    for (t, w, pt, pa) in grads {
        let tr = &mut model.trace_logits[t.problem];
        for (j, p) in pt.iter().enumerate() {
            tr[j] -= step * w * (p - if j == t.trace { 1.0 } else { 0.0 });
        }
        let ar = &mut model.answer_logits[t.problem][t.trace];
        for (j, p) in pa.iter().enumerate() {
            ar[j] -= step * w * (p - if j == t.answer { 1.0 } else { 0.0 });
        }
    }
}

/// Random model plus one golden triplet per problem (trace and answer drawn
/// uniformly).
pub fn generate_cot_data(
    problems: usize,
    traces: usize,
    answers: usize,
    logit_scale: f64,
    seed: u64,
) -> Result<(CoTModel, Vec<Triplet>)> {
    let model = CoTModel::random(problems, traces, answers, logit_scale, seed)?;
    let mut rng = stream(seed, "cot.golden", 0);
    let data = (0..problems)
        .map(|x| Triplet {
            problem: x,
            trace: rng.random_range(0..traces),
            answer: rng.random_range(0..answers),
        })
        .collect();
    Ok((model, data))
}
