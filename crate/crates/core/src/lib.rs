//! Activity prediction for link streams.
//!
//! Given a stream of timestamped undirected interactions, this crate
//! predicts how many interactions each node pair will produce over a future
//! time window. The prediction index is a learned non-negative linear
//! combination of normalized structural, hybrid, and temporal similarity
//! metrics; a globally extrapolated link budget is allocated across pairs
//! proportionally to that index, and predictions are scored with a
//! fractional (min/max) confusion protocol.

pub mod classes;
pub mod config;
pub mod error;
pub mod eval;
pub mod export;
pub mod learn;
pub mod metrics;
pub mod pipeline;
pub mod predict;
pub mod stream;
pub mod sweep;

pub use error::{Error, Result};
pub use eval::{Confusion, EvaluationReport};
pub use learn::{LearnerConfig, PeriodSchedule};
pub use metrics::{MetricId, ScoreTable};
pub use predict::{ActivityPrediction, WeightVector};
pub use stream::{Interval, Link, LinkStream, Node, NodePair};
