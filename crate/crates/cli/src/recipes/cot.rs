//! CE vs approximate DCO on a toy chain-of-thought model.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use passn_core::cot::{generate_cot_data, train_cot, CotLoss, CotTrainConfig, CotTrajectory};
use passn_core::losses::DEFAULT_MARGINAL_THRESHOLD;

use super::common::{push_histogram, resolved, HISTOGRAM_COLUMNS};
use super::Ctx;
use crate::config::parse_params;
use crate::error::LabResult;
use crate::report::{params, Report, Table};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CotParams {
    pub problems: usize,
    pub traces: usize,
    pub answers: usize,
    /// Standard deviation of the random initial logits.
    pub logit_scale: f64,
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    /// `N'` of the approximate DCO run.
    pub n: u64,
    /// Monte-Carlo samples per confidence estimate.
    pub k: usize,
    pub threshold: f64,
}

impl Default for CotParams {
    fn default() -> Self {
        Self {
            problems: 100,
            traces: 4,
            answers: 16,
            logit_scale: 0.5,
            epochs: 20,
            learning_rate: 8.0,
            batch_size: 8,
            n: 64,
            k: 64,
            threshold: DEFAULT_MARGINAL_THRESHOLD,
        }
    }
}

fn rows(report: &mut Report, hist: &mut Table, run: &str, traj: &CotTrajectory) {
    let key = params(&[("loss", run.into())]);
    for e in &traj.epochs {
        let ep = Some(e.epoch);
        report.row(&key, "mean_mode_confidence", e.mean_mode_confidence, None, ep);
        report.row(&key, "mean_target_confidence", e.mean_target_confidence, None, ep);
        report.row(&key, "kept", e.kept as f64, None, ep);
        report.row(&key, "discarded", e.discarded as f64, None, ep);
        push_histogram(hist, run, e.epoch, &e.mode_histogram);
    }
}

pub fn run(ctx: &Ctx, raw: &Value) -> LabResult<(Report, Value)> {
    let p: CotParams = parse_params(raw)?;
    let (model, data) = generate_cot_data(p.problems, p.traces, p.answers, p.logit_scale, ctx.seed_for("model"))?;
    let losses = [CotLoss::Ce, CotLoss::Dcoa { n: p.n }];
    let seed = ctx.seed_for("train");
    let runs = ctx.grid(&losses, |&loss| {
        let mut c = CotTrainConfig::new(loss, p.epochs, p.learning_rate, p.batch_size, seed);
        c.k = p.k;
        c.threshold = p.threshold;
        Ok(train_cot(&model, &data, &c)?.1)
    })?;
    let (ce, dcoa) = (&runs[0], &runs[1]);
    let mut report = Report::new("cot_dcoa");
    let mut hist = Table::new("histograms.csv", &HISTOGRAM_COLUMNS);
    rows(&mut report, &mut hist, "ce", ce);
    rows(&mut report, &mut hist, &format!("dcoa{}", p.n), dcoa);
    report.summarize("drift_ce", ce.drift());
    report.summarize("drift_dcoa", dcoa.drift());
    report.summarize("dcoa_drift_below_ce", dcoa.drift() < ce.drift());
    report.summarize(
        "dcoa_discarded_by_epoch",
        dcoa.epochs.iter().map(|e| e.discarded).collect::<Vec<_>>(),
    );
    report.tables.push(hist);
    Ok((report, resolved(&p)))
}
