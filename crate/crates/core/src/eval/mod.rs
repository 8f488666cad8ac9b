//! Event-time metrics, the random-guess baseline, the cosine-similarity
//! time probe, ranked-date scoring, and the objective ablation runner.

mod ablation;
mod metrics;
mod probe;
mod recovery;

use thiserror::Error;

use crate::model::ModelError;
use crate::objectives::ObjectiveError;
use crate::temporal::TemporalError;

pub use ablation::{
    predict_events, read_events, run_ablation, write_events, write_results_csv, AblationData,
    AblationRow, EventExample,
};
pub use metrics::{
    accuracy, average_precision, mae, map, mrr, random_guess, reciprocal_rank, Prediction,
};
pub use probe::{
    probe_representation, rank_by_cosine, similarity_rank, top2_time_scope, RankedDates,
};
pub use recovery::{temporal_recovery, timestamp_accuracy};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("no predictions to score")]
    EmptyInput,
    #[error(transparent)]
    Temporal(#[from] TemporalError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Objective(#[from] ObjectiveError),
}
