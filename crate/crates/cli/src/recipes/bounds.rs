//! Upper/lower bound sweep over N.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use passn_core::bounds::{lower_bound_closed, lower_bound_integer_s, upper_bound};
use passn_core::{BoundCase, BoundQuery};

use super::common::resolved;
use super::Ctx;
use crate::config::parse_params;
use crate::error::{config, LabResult};
use crate::report::{params, Report, Table};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoundsParams {
    pub p1: f64,
    pub p2: f64,
    pub eps: f64,
    pub k: u32,
    pub n_min: u64,
    pub n_max: u64,
}

impl Default for BoundsParams {
    fn default() -> Self {
        Self {
            p1: 0.5,
            p2: 0.25,
            eps: 0.25,
            k: 2,
            n_min: 2,
            n_max: 512,
        }
    }
}

/// One sweep point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundPoint {
    pub n: u64,
    pub upper: f64,
    pub case: BoundCase,
    pub lower_integer_s: f64,
    pub lower_closed: f64,
}

fn case_code(c: BoundCase) -> u32 {
    match c {
        BoundCase::CaseK => 0,
        BoundCase::CaseJ(j) => j,
    }
}

impl BoundsParams {
    pub fn sweep(&self) -> LabResult<Vec<BoundPoint>> {
        if self.n_min < 2 || self.n_max < self.n_min {
            return Err(config("need 2 <= n_min <= n_max"));
        }
        (self.n_min..=self.n_max)
            .map(|n| {
                let q = BoundQuery::new(self.p1, self.p2, self.eps, self.k, n);
                let up = upper_bound(&q)?;
                Ok(BoundPoint {
                    n,
                    upper: up.value,
                    case: up.case,
                    lower_integer_s: lower_bound_integer_s(self.p1, self.p2, n as f64)?,
                    lower_closed: lower_bound_closed(self.p1, self.p2, n as f64)?,
                })
            })
            .collect()
    }

    /// `n, upper, lower_closed, lower_integer_s, case`; `case` is 0 for
    /// Case k and `j` for Case j.
    pub fn table(points: &[BoundPoint]) -> Table {
        let mut t = Table::new("bounds.csv", &["n", "upper", "lower_closed", "lower_integer_s", "case"]);
        for p in points {
            t.push(vec![
                p.n.to_string(),
                p.upper.to_string(),
                p.lower_closed.to_string(),
                p.lower_integer_s.to_string(),
                case_code(p.case).to_string(),
            ]);
        }
        t
    }
}

pub fn run(_ctx: &Ctx, raw: &Value) -> LabResult<(Report, Value)> {
    let p: BoundsParams = parse_params(raw)?;
    let points = p.sweep()?;
    let mut report = Report::new("bounds_sweep");
    let key = params(&[
        ("p1", p.p1.to_string()),
        ("p2", p.p2.to_string()),
        ("eps", p.eps.to_string()),
        ("k", p.k.to_string()),
    ]);
    for b in &points {
        report.row(&key, "upper", b.upper, Some(b.n), None);
        report.row(&key, "upper_case", case_code(b.case) as f64, Some(b.n), None);
        report.row(&key, "lower_integer_s", b.lower_integer_s, Some(b.n), None);
        report.row(&key, "lower_closed", b.lower_closed, Some(b.n), None);
    }
    let upper: Vec<f64> = points.iter().map(|b| b.upper).collect();
    let li: Vec<f64> = points.iter().map(|b| b.lower_integer_s).collect();
    let lc: Vec<f64> = points.iter().map(|b| b.lower_closed).collect();
    report.summarize("upper_at_n_min", upper[0]);
    report.summarize("lower_integer_s_at_n_min", li[0]);
    report.summarize("lower_closed_at_n_min", lc[0]);
    report.summarize("upper_non_increasing", upper.windows(2).all(|w| w[1] <= w[0]));
    report.summarize(
        "lower_decreasing",
        li.windows(2).all(|w| w[1] < w[0]) && lc.windows(2).all(|w| w[1] < w[0]),
    );
    report.summarize("lower_closed_near_one", lower_bound_closed(p.p1, p.p2, 1.0 + 1e-6)?);
    report.tables.push(BoundsParams::table(&points));
    Ok((report, resolved(&p)))
}
