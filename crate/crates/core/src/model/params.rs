use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{ModelError, Real};

/// Encoder hyperparameters. Every tensor shape follows from these fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub vocab_size: usize,
    pub max_len: usize,
    pub d_model: usize,
    pub n_layers: usize,
    pub n_heads: usize,
    pub d_ff: usize,
    pub dropout_prob: f64,
    /// Size of the timestamp-prediction head, when present.
    pub dtp_classes: Option<usize>,
    /// Size of the fine-tuning classifier, when present.
    pub classifier_classes: Option<usize>,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            vocab_size: 1000,
            max_len: 128,
            d_model: 128,
            n_layers: 2,
            n_heads: 4,
            d_ff: 512,
            dropout_prob: 0.1,
            dtp_classes: None,
            classifier_classes: None,
            seed: 0,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |msg: String| Err(ModelError::Config(msg));
        if self.d_model == 0 || self.n_heads == 0 || !self.d_model.is_multiple_of(self.n_heads) {
            return bad(format!(
                "d_model {} not divisible by n_heads {}",
                self.d_model, self.n_heads
            ));
        }
        if self.max_len < 8 {
            return bad(format!("max_len {} < 8", self.max_len));
        }
        if !(0.0..1.0).contains(&self.dropout_prob) {
            return bad(format!("dropout_prob {} outside [0, 1)", self.dropout_prob));
        }
        if self.vocab_size == 0 || self.d_ff == 0 {
            return bad("vocab_size and d_ff must be positive".into());
        }
        if self.dtp_classes == Some(0) || self.classifier_classes == Some(0) {
            return bad("head sizes must be positive".into());
        }
        Ok(())
    }

    /// Closed-form parameter count:
    ///
    /// ```text
    /// V·d + L·d                                  embeddings
    /// + n_layers · (4d² + 4d + 2·d·f + f + d + 4d)  attention, FFN, two norms
    /// + 2d                                       final norm
    /// + d·V + V                                  MLM head
    /// + 2d·2 + 2                                 TIR head
    /// + d·K + K                                  DTP head (optional)
    /// + d·C + C                                  classifier (optional)
    /// ```
    pub fn parameter_count(&self) -> usize {
        let (v, l, d, f) = (self.vocab_size, self.max_len, self.d_model, self.d_ff);
        let layer = 4 * d * d + 4 * d + 2 * d * f + f + d + 4 * d;
        let head = |k: Option<usize>| k.map_or(0, |k| d * k + k);
        v * d
            + l * d
            + self.n_layers * layer
            + 2 * d
            + d * v
            + v
            + 4 * d
            + 2
            + head(self.dtp_classes)
            + head(self.classifier_classes)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<F> {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<F>,
}

/// Parameter (or gradient) tensors in a fixed manifest order.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamStore<F> {
    pub tensors: Vec<Tensor<F>>,
}

impl<F: Real> ParamStore<F> {
    pub fn zeros_like(&self) -> Self {
        ParamStore {
            tensors: self
                .tensors
                .iter()
                .map(|t| Tensor {
                    name: t.name.clone(),
                    shape: t.shape.clone(),
                    data: vec![F::zero(); t.data.len()],
                })
                .collect(),
        }
    }

    pub fn fill_zero(&mut self) {
        for t in &mut self.tensors {
            t.data.iter_mut().for_each(|x| *x = F::zero());
        }
    }

    pub fn len(&self) -> usize {
        self.tensors.iter().map(|t| t.data.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn by_name(&self, name: &str) -> Option<&Tensor<F>> {
        self.tensors.iter().find(|t| t.name == name)
    }

    pub fn by_name_mut(&mut self, name: &str) -> Option<&mut Tensor<F>> {
        self.tensors.iter_mut().find(|t| t.name == name)
    }

    pub fn cast<G: Real>(&self) -> ParamStore<G> {
        ParamStore {
            tensors: self
                .tensors
                .iter()
                .map(|t| Tensor {
                    name: t.name.clone(),
                    shape: t.shape.clone(),
                    data: t
                        .data
                        .iter()
                        .map(|x| G::from_f64(x.to_f64().unwrap()).unwrap())
                        .collect(),
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Linear {
    pub weight: usize,
    pub bias: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct LayerIdx {
    pub ln1: Linear,
    pub q: Linear,
    pub k: Linear,
    pub v: Linear,
    pub out: Linear,
    pub ln2: Linear,
    pub ffn_in: Linear,
    pub ffn_out: Linear,
}

/// Tensor indices into a [`ParamStore`]. For norms, `weight` is gamma and
/// `bias` is beta.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct Layout {
    pub token_emb: usize,
    pub pos_emb: usize,
    pub layers: Vec<LayerIdx>,
    pub final_ln: Linear,
    pub mlm: Linear,
    pub tir: Linear,
    pub dtp: Option<Linear>,
    pub cls: Option<Linear>,
}

enum Init {
    Normal,
    Zeros,
    Ones,
}

struct Builder<F> {
    tensors: Vec<Tensor<F>>,
    specs: Vec<Init>,
}

impl<F: Real> Builder<F> {
    fn add(&mut self, name: String, shape: Vec<usize>, init: Init) -> usize {
        let n = shape.iter().product();
        self.tensors.push(Tensor {
            name,
            shape,
            data: vec![F::zero(); n],
        });
        self.specs.push(init);
        self.tensors.len() - 1
    }

    fn linear(&mut self, prefix: &str, rows: usize, cols: usize) -> Linear {
        Linear {
            weight: self.add(format!("{prefix}.weight"), vec![rows, cols], Init::Normal),
            bias: self.add(format!("{prefix}.bias"), vec![cols], Init::Zeros),
        }
    }

    fn norm(&mut self, prefix: &str, d: usize) -> Linear {
        Linear {
            weight: self.add(format!("{prefix}.gamma"), vec![d], Init::Ones),
            bias: self.add(format!("{prefix}.beta"), vec![d], Init::Zeros),
        }
    }
}

pub(crate) fn layout_and_shapes<F: Real>(cfg: &ModelConfig) -> (Layout, ParamStore<F>, Vec<bool>) {
    let mut b = Builder {
        tensors: Vec::new(),
        specs: Vec::new(),
    };
    let d = cfg.d_model;
    let token_emb = b.add(
        "embeddings.token".into(),
        vec![cfg.vocab_size, d],
        Init::Normal,
    );
    let pos_emb = b.add(
        "embeddings.position".into(),
        vec![cfg.max_len, d],
        Init::Normal,
    );
    let layers = (0..cfg.n_layers)
        .map(|i| {
            let p = format!("layer.{i}");
            LayerIdx {
                ln1: b.norm(&format!("{p}.ln1"), d),
                q: b.linear(&format!("{p}.attn.q"), d, d),
                k: b.linear(&format!("{p}.attn.k"), d, d),
                v: b.linear(&format!("{p}.attn.v"), d, d),
                out: b.linear(&format!("{p}.attn.out"), d, d),
                ln2: b.norm(&format!("{p}.ln2"), d),
                ffn_in: b.linear(&format!("{p}.ffn.in"), d, cfg.d_ff),
                ffn_out: b.linear(&format!("{p}.ffn.out"), cfg.d_ff, d),
            }
        })
        .collect();
    let final_ln = b.norm("final_ln", d);
    let mlm = b.linear("head.mlm", d, cfg.vocab_size);
    let tir = b.linear("head.tir", 2 * d, 2);
    let dtp = cfg.dtp_classes.map(|k| b.linear("head.dtp", d, k));
    let cls = cfg.classifier_classes.map(|k| b.linear("head.cls", d, k));
    let normal = b.specs.iter().map(|s| matches!(s, Init::Normal)).collect();
    for (t, s) in b.tensors.iter_mut().zip(&b.specs) {
        if matches!(s, Init::Ones) {
            t.data.iter_mut().for_each(|x| *x = F::one());
        }
    }
    (
        Layout {
            token_emb,
            pos_emb,
            layers,
            final_ln,
            mlm,
            tir,
            dtp,
            cls,
        },
        ParamStore { tensors: b.tensors },
        normal,
    )
}

pub(crate) const INIT_STD: f64 = 0.02;

/// Draws N(0, 0.02²) for weight matrices and embeddings; biases start at
/// zero and norm gains at one.
pub(crate) fn init_params<F: Real, R: Rng>(
    cfg: &ModelConfig,
    rng: &mut R,
) -> (Layout, ParamStore<F>) {
    let (layout, mut store, normal) = layout_and_shapes::<F>(cfg);
    let dist = Normal::new(0.0, INIT_STD).expect("valid std");
    for (t, is_normal) in store.tensors.iter_mut().zip(normal) {
        if is_normal {
            t.data
                .iter_mut()
                .for_each(|x| *x = F::lit(dist.sample(rng)));
        }
    }
    (layout, store)
}
