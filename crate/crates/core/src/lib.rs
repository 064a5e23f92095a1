//! Numerical core for studying training objectives under the pass@N
//! test-time strategy.
//!
//! * [`coverage`]: exact and estimated pass@N coverage.
//! * [`losses`]: the coverage-aligned (DCO) loss family, its overconfidence
//!   factor, focal loss and the batch filter.
//! * [`optimal`]: coverage-optimal confidence allocation and its oracle.
//! * [`bounds`]: upper/lower bounds on optimal max confidence.
//! * [`trainer`]: tabular softmax policies trained with CE / DCO / focal /
//!   group-relative policy gradients, plus diagnostics.
//! * [`proof`]: synthetic tactic trees, step-wise training and rollout search.
//! * [`cot`]: toy chain-of-thought model with Monte-Carlo marginals.

// `!(a < b)` is used on purpose so NaN inputs fail the check
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod cot;
pub mod coverage;
pub mod error;
pub mod losses;
pub mod numeric;
pub mod optimal;
pub mod proof;
pub mod rng;
pub mod trainer;

pub use bounds::{BoundCase, BoundQuery, BoundResult};
pub use coverage::{CoverageCurve, SampleTally};
pub use error::{Error, Result};
pub use losses::{FilterPolicy, LossSpec};
pub use optimal::{AccuracyProfile, ConfidenceProfile};
