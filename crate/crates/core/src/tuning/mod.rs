//! Training the scorer from n-best lists.
//!
//! Pairs of hypotheses are drawn from each n-best list with one of three
//! criteria ([`Criterion`]), pooled across iterations with decaying weights
//! ([`PairPool`]) and fitted by minimizing a weighted hinge loss with an L1
//! penalty ([`objective`], [`optimize`]). [`Trainer`] runs the whole loop.

mod objective;
mod optimize;
mod pairs;
mod pool;
mod trainer;

use thiserror::Error;

use crate::decoder::DecodeError;
use crate::metrics::MetricsError;

pub use objective::{objective, objective_value, pair_accuracy};
pub use optimize::{optimize, optimize_observed, OptimizeResult, OptimizerSettings};
pub use pairs::{
    generate_pairs_br, generate_pairs_bw, generate_pairs_pw, pair_seed, Criterion, PwParams,
};
pub use pool::{read_pool, weighted_combine, write_pool, PairPool};
pub use trainer::{
    l1_sweep, read_report, train, write_report, IterationReport, SweepResult, Trainer,
    TrainerConfig, TrainerState, L1_SWEEP,
};

#[derive(Debug, Error)]
pub enum TuningError {
    #[error("no training pairs")]
    EmptyPool,
    #[error("objective is not finite at the starting point ({0})")]
    NonFiniteObjective(f64),
    #[error("{0}")]
    InvalidConfig(String),
    #[error("decoding failed in iteration {iteration}: {source}")]
    Decode {
        iteration: usize,
        #[source]
        source: DecodeError,
    },
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}
