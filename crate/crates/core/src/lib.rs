//! Temporal tagging, time-aware pretraining objectives, a small trainable
//! transformer encoder, and event-time evaluation.
//!
//! Pipeline: [`temporal::tag`] → [`corpus::tokenize`] →
//! [`objectives::DatasetBuilder`] → [`model::pretrain`] →
//! [`model::finetune`] → [`eval`].

pub mod corpus;
pub mod eval;
pub mod model;
pub mod objectives;
pub mod synth;
pub mod temporal;

pub use corpus::{Document, TaggedDocument, TokenizerConfig, Vocab};
pub use eval::{EventExample, Prediction, RankedDates};
pub use model::{Checkpoint, Model, ModelConfig, TrainConfig};
pub use objectives::{DatasetRecord, LabelSpace, Objective, ObjectiveParams, ObjectiveSet};
pub use temporal::{Granularity, TemporalExpression, TimePoint};
