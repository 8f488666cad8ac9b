//! Pretraining and fine-tuning loops.

use std::borrow::Cow;
use std::io::Write;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::heads::{LossParts, Targets};
use super::optim::{adamw_step, AdamWState};
use super::{Model, ModelError};
use crate::corpus::{pretokenize, TaggedDocument, TokenizerConfig, Vocab, CLS, SEP};
use crate::objectives::{
    mix_seed, rng_from_seed, DatasetBuilder, DatasetRecord, Objective, ObjectiveSet,
};
use crate::temporal::TimePoint;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub grad_accumulation: usize,
    pub epochs: usize,
    pub betas: (f64, f64),
    pub eps: f64,
    pub weight_decay: f64,
    pub objectives: ObjectiveSet,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 3e-5,
            batch_size: 8,
            grad_accumulation: 8,
            epochs: 10,
            betas: (0.9, 0.999),
            eps: 1e-8,
            weight_decay: 0.01,
            objectives: ObjectiveSet::new([Objective::Tamlm, Objective::Dtp]).expect("consistent"),
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |m: String| Err(ModelError::Config(m));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!(
                "learning_rate {} must be positive",
                self.learning_rate
            ));
        }
        if self.batch_size == 0 || self.grad_accumulation == 0 {
            return bad("batch_size and grad_accumulation must be at least 1".into());
        }
        let (b1, b2) = self.betas;
        if !((0.0..1.0).contains(&b1) && (0.0..1.0).contains(&b2))
            || self.eps <= 0.0
            || self.weight_decay < 0.0
        {
            return bad("adam betas in [0, 1), eps > 0, weight_decay ≥ 0".into());
        }
        self.objectives
            .validate()
            .map_err(|e| ModelError::Config(e.to_string()))
    }

    /// Examples per optimizer step.
    pub fn step_size(&self) -> usize {
        self.batch_size * self.grad_accumulation
    }
}

/// One line of the loss log.
#[derive(Debug, Clone, PartialEq)]
pub struct LossRecord {
    pub step: usize,
    pub objective: String,
    pub loss: f64,
}

pub fn write_loss_log<W: Write>(mut w: W, log: &[LossRecord]) -> std::io::Result<()> {
    writeln!(w, "step,objective,loss")?;
    for r in log {
        writeln!(w, "{},{},{}", r.step, r.objective, r.loss)?;
    }
    Ok(())
}

pub struct TrainOutcome {
    pub model: Model<f32>,
    pub log: Vec<LossRecord>,
    pub steps: usize,
}

/// Supplies the records of each epoch: fixed, or rebuilt per epoch so that
/// masking and replacement are redrawn.
pub trait ExampleSource {
    fn records(&self, epoch: u64) -> Result<Cow<'_, [DatasetRecord]>, ModelError>;
}

impl ExampleSource for [DatasetRecord] {
    fn records(&self, _epoch: u64) -> Result<Cow<'_, [DatasetRecord]>, ModelError> {
        Ok(Cow::Borrowed(self))
    }
}

impl ExampleSource for Vec<DatasetRecord> {
    fn records(&self, _epoch: u64) -> Result<Cow<'_, [DatasetRecord]>, ModelError> {
        Ok(Cow::Borrowed(self))
    }
}

/// Rebuilds the dataset from tagged documents at every epoch.
pub struct DynamicSource<'a> {
    pub builder: DatasetBuilder<'a>,
    pub docs: &'a [TaggedDocument],
}

impl ExampleSource for DynamicSource<'_> {
    fn records(&self, epoch: u64) -> Result<Cow<'_, [DatasetRecord]>, ModelError> {
        let (records, _) = self
            .builder
            .build_all(self.docs, epoch)
            .map_err(|e| ModelError::Target(e.to_string()))?;
        Ok(Cow::Owned(records))
    }
}

fn targets_of<'r>(
    rec: &'r DatasetRecord,
    objectives: &ObjectiveSet,
) -> Result<Targets<'r>, ModelError> {
    let missing = |what: &str| {
        ModelError::Target(format!(
            "record {} lacks {what} required by {objectives}",
            rec.doc_id
        ))
    };
    let mut t = Targets::default();
    if objectives.masks() {
        t.mlm_labels = Some(
            rec.mlm_labels
                .as_deref()
                .ok_or_else(|| missing("mlm_labels"))?,
        );
    }
    if objectives.contains(Objective::Dtp) {
        t.dtp_label = Some(rec.dtp_label.ok_or_else(|| missing("dtp_label"))?);
    }
    if objectives.contains(Objective::Tir) {
        t.slots = Some(rec.slots.as_deref().ok_or_else(|| missing("slots"))?);
    }
    Ok(t)
}

struct Item<'r> {
    id: &'r str,
    ids: &'r [u32],
    targets: Targets<'r>,
}

/// Shared optimizer loop. The step gradient is the mean of per-example
/// gradients, so splitting a step into micro-batches changes nothing.
fn run<F>(
    model: &mut Model<f32>,
    cfg: &TrainConfig,
    log: &mut Vec<LossRecord>,
    mut epoch_items: F,
) -> Result<usize, ModelError>
where
    F: FnMut(u64, &mut dyn FnMut(&[Item<'_>]) -> Result<(), ModelError>) -> Result<(), ModelError>,
{
    let mut state = AdamWState::new(&model.params);
    let mut grads = model.params.zeros_like();
    let mut steps = 0usize;
    let step_size = cfg.step_size();
    for epoch in 0..cfg.epochs as u64 {
        epoch_items(epoch, &mut |items: &[Item<'_>]| {
            let mut order: Vec<usize> = (0..items.len()).collect();
            order.shuffle(&mut rng_from_seed(mix_seed(cfg.seed, "shuffle", epoch)));
            for chunk in order.chunks(step_size) {
                grads.fill_zero();
                let scale = 1.0 / chunk.len() as f32;
                let mut sums = LossParts::default();
                for &i in chunk {
                    let item = &items[i];
                    let mut rng = rng_from_seed(mix_seed(cfg.seed ^ 0x6472_6f70, item.id, epoch));
                    let fwd = model.forward(item.ids, Some(&mut rng))?;
                    let parts =
                        model.loss_and_grad(&fwd, &item.targets, scale, Some(&mut grads))?;
                    let acc = |s: &mut Option<f64>, p: Option<f64>| {
                        if let Some(p) = p {
                            *s = Some(s.unwrap_or(0.0) + p);
                        }
                    };
                    acc(&mut sums.mlm, parts.mlm);
                    acc(&mut sums.dtp, parts.dtp);
                    acc(&mut sums.tir, parts.tir);
                    acc(&mut sums.cls, parts.cls);
                }
                adamw_step(
                    &mut model.params,
                    &grads,
                    &mut state,
                    cfg.learning_rate,
                    cfg.betas,
                    cfg.eps,
                    cfg.weight_decay,
                )?;
                steps += 1;
                let n = chunk.len() as f64;
                let mlm_name = if cfg.objectives.contains(Objective::Tamlm) {
                    "TAMLM"
                } else {
                    "MLM"
                };
                for (name, v) in [
                    (mlm_name, sums.mlm),
                    ("DTP", sums.dtp),
                    ("TIR", sums.tir),
                    ("CLS", sums.cls),
                ] {
                    if let Some(v) = v {
                        log.push(LossRecord {
                            step: steps,
                            objective: name.into(),
                            loss: v / n,
                        });
                    }
                }
                log.push(LossRecord {
                    step: steps,
                    objective: "joint".into(),
                    loss: sums.joint() / n,
                });
            }
            Ok(())
        })?;
    }
    Ok(steps)
}

/// Trains every head selected by `cfg.objectives` on records from `source`.
pub fn pretrain<S: ExampleSource + ?Sized>(
    model: Model<f32>,
    source: &S,
    cfg: &TrainConfig,
) -> Result<TrainOutcome, ModelError> {
    cfg.validate()?;
    if cfg.objectives.contains(Objective::Dtp) && model.layout.dtp.is_none() {
        return Err(ModelError::MissingHead("dtp"));
    }
    let mut model = model;
    let mut log = Vec::new();
    let steps = run(&mut model, cfg, &mut log, |epoch, body| {
        let records = source.records(epoch)?;
        let items = records
            .iter()
            .map(|r| {
                Ok(Item {
                    id: &r.doc_id,
                    ids: &r.input_ids,
                    targets: targets_of(r, &cfg.objectives)?,
                })
            })
            .collect::<Result<Vec<_>, ModelError>>()?;
        body(&items)
    })?;
    Ok(TrainOutcome { model, log, steps })
}

/// A fine-tuning input with its class index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierExample {
    pub id: String,
    pub input_ids: Vec<u32>,
    pub label: usize,
}

/// `[CLS] text [SEP]`, or `[CLS] text [SEP] render(ts) document [SEP]` when
/// a supporting document is given; truncated to `max_len` keeping the final
/// `[SEP]`.
pub fn finetune_input(
    vocab: &Vocab,
    tokenizer: &TokenizerConfig,
    text: &str,
    document: Option<(&TimePoint, &str)>,
    max_len: usize,
) -> Vec<u32> {
    let ids = |s: &str| {
        pretokenize(s, tokenizer)
            .into_iter()
            .map(|(w, _, _)| vocab.id(&w))
            .collect::<Vec<_>>()
    };
    let mut out = vec![CLS];
    out.extend(ids(text));
    out.push(SEP);
    if let Some((ts, doc)) = document {
        out.extend(ids(&ts.render()));
        out.extend(ids(doc));
        out.push(SEP);
    }
    if out.len() > max_len {
        out.truncate(max_len.max(2) - 1);
        out.push(SEP);
    }
    out
}

/// Attaches a fresh `classes`-way classifier over `h_[CLS]` and trains the
/// whole network on `examples`. `cfg.objectives` is ignored.
pub fn finetune(
    model: &Model<f32>,
    examples: &[ClassifierExample],
    classes: usize,
    cfg: &TrainConfig,
) -> Result<TrainOutcome, ModelError> {
    cfg.validate()?;
    if let Some(e) = examples.iter().find(|e| e.label >= classes) {
        return Err(ModelError::LabelOutOfRange {
            label: e.label,
            classes,
        });
    }
    let mut model = model.with_classifier(classes, cfg.seed)?;
    let mut log = Vec::new();
    let steps = run(&mut model, cfg, &mut log, |_, body| {
        let items: Vec<Item<'_>> = examples
            .iter()
            .map(|e| Item {
                id: &e.id,
                ids: &e.input_ids,
                targets: Targets {
                    class_label: Some(e.label),
                    ..Targets::default()
                },
            })
            .collect();
        body(&items)
    })?;
    Ok(TrainOutcome { model, log, steps })
}

/// Classifier probabilities in inference mode.
pub fn predict_proba(model: &Model<f32>, ids: &[u32]) -> Result<Vec<f32>, ModelError> {
    let lin = model.layout.cls.ok_or(ModelError::MissingHead("cls"))?;
    let hidden = model.encode(ids, false, 0)?;
    Ok(model.head_probs(lin, &hidden[..model.config.d_model]))
}

/// Timestamp-head probabilities in inference mode.
pub fn predict_dtp(model: &Model<f32>, ids: &[u32]) -> Result<Vec<f32>, ModelError> {
    let lin = model.layout.dtp.ok_or(ModelError::MissingHead("dtp"))?;
    let hidden = model.encode(ids, false, 0)?;
    Ok(model.head_probs(lin, &hidden[..model.config.d_model]))
}
