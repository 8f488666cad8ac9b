//! A small transformer encoder with MLM, DTP, TIR and classifier heads,
//! trained with hand-written backpropagation and AdamW.

mod checkpoint;
mod encoder;
pub mod gradcheck;
mod heads;
mod ops;
mod optim;
mod params;
mod real;
mod train;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

pub use checkpoint::{
    load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, Checkpoint,
};
pub use encoder::Forward;
pub use heads::{HeadOutput, LossParts, Targets};
pub use optim::{adamw_step, AdamWState};
pub use params::{ModelConfig, ParamStore, Tensor};
pub use real::{gemm, MatMut, MatRef, Real};
pub use train::{
    finetune, finetune_input, predict_dtp, predict_proba, pretrain, write_loss_log,
    ClassifierExample, DynamicSource, ExampleSource, LossRecord, TrainConfig, TrainOutcome,
};

use params::{init_params, Layout};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("sequence of {len} tokens exceeds max_len {max_len}")]
    SequenceTooLong { len: usize, max_len: usize },
    #[error("token id {id} outside vocabulary of {vocab_size}")]
    UnknownTokenId { id: u32, vocab_size: usize },
    #[error("empty input sequence")]
    EmptyInput,
    #[error("non-finite gradient in tensor {0}")]
    NonFiniteGradient(String),
    #[error("label {label} outside {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },
    #[error("model has no {0} head")]
    MissingHead(&'static str),
    #[error("invalid targets: {0}")]
    Target(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Configuration, parameters, and the tensor layout that ties them together.
#[derive(Debug, Clone, PartialEq)]
pub struct Model<F> {
    pub config: ModelConfig,
    pub params: ParamStore<F>,
    pub(crate) layout: Layout,
}

impl<F: Real> Model<F> {
    /// Random initialization seeded from `config.seed`.
    pub fn init(config: ModelConfig) -> Result<Self, ModelError> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let (layout, params) = init_params(&config, &mut rng);
        Ok(Model {
            config,
            params,
            layout,
        })
    }

    /// Builds a model around existing parameters whose names and shapes
    /// must match `config`.
    pub fn from_params(config: ModelConfig, params: ParamStore<F>) -> Result<Self, ModelError> {
        config.validate()?;
        let (layout, expected, _) = params::layout_and_shapes::<F>(&config);
        if expected.tensors.len() != params.tensors.len() {
            return Err(ModelError::Config(format!(
                "expected {} tensors, got {}",
                expected.tensors.len(),
                params.tensors.len()
            )));
        }
        for (e, p) in expected.tensors.iter().zip(&params.tensors) {
            if e.name != p.name || e.shape != p.shape || p.data.len() != e.data.len() {
                return Err(ModelError::Config(format!(
                    "tensor {} {:?} does not match {} {:?}",
                    p.name, p.shape, e.name, e.shape
                )));
            }
        }
        Ok(Model {
            config,
            params,
            layout,
        })
    }

    /// Per-position hidden states, `len × d_model`. Dropout is active only
    /// in `train_mode`, drawn from a stream seeded by `seed`.
    pub fn encode(&self, ids: &[u32], train_mode: bool, seed: u64) -> Result<Vec<F>, ModelError> {
        let fwd = if train_mode {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            self.forward(ids, Some(&mut rng))?
        } else {
            self.forward::<ChaCha8Rng>(ids, None)?
        };
        Ok(fwd.hidden)
    }

    /// Replaces the classifier head with a fresh `classes`-way one.
    pub fn with_classifier(&self, classes: usize, seed: u64) -> Result<Self, ModelError> {
        let mut config = self.config.clone();
        config.classifier_classes = Some(classes);
        config.seed = seed;
        let mut fresh = Model::<F>::init(config)?;
        for t in &mut fresh.params.tensors {
            if t.name.starts_with("head.cls") {
                continue;
            }
            if let Some(old) = self.params.by_name(&t.name) {
                t.data.clone_from(&old.data);
            }
        }
        Ok(fresh)
    }

    pub fn cast<G: Real>(&self) -> Model<G> {
        Model {
            config: self.config.clone(),
            params: self.params.cast(),
            layout: self.layout.clone(),
        }
    }

    pub fn parameter_count(&self) -> usize {
        self.params.len()
    }
}
