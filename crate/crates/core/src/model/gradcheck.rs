//! Central finite-difference check of the analytic gradients.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{Model, ModelConfig, ModelError, Targets};
use crate::objectives::IGNORE;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub worst_tensor: String,
    pub checked: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GradCheckCase {
    /// Masked-token plus timestamp heads, all tensors.
    JointTamlmDtp,
    /// Boundary-pair replacement head, all tensors.
    Tir,
    /// Joint loss, embedding tensors only.
    EmbeddingsOnly,
}

pub const FD_STEP: f64 = 1e-5;
/// Denominator floor of the relative error, so coordinates with
/// near-vanishing gradient compare in absolute terms.
pub const REL_FLOOR: f64 = 1e-6;

/// `d_model = 8`, one layer, vocabulary 16, no dropout.
pub fn tiny_config() -> ModelConfig {
    ModelConfig {
        vocab_size: 16,
        max_len: 8,
        d_model: 8,
        n_layers: 1,
        n_heads: 2,
        d_ff: 16,
        dropout_prob: 0.0,
        dtp_classes: Some(4),
        classifier_classes: None,
        seed: 5,
    }
}

/// The tiny model with parameters spread by N(0, 0.3²) so that gradients
/// are well above finite-difference noise.
pub fn tiny_model() -> Model<f64> {
    let mut model = Model::<f64>::init(tiny_config()).expect("valid config");
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let noise = Normal::new(0.0, 0.3).expect("valid std");
    for t in &mut model.params.tensors {
        t.data.iter_mut().for_each(|x| *x += noise.sample(&mut rng));
    }
    model
}

fn loss(model: &Model<f64>, ids: &[u32], targets: &Targets<'_>) -> Result<f64, ModelError> {
    let fwd = model.forward::<ChaCha8Rng>(ids, None)?;
    Ok(model.loss_and_grad(&fwd, targets, 1.0, None)?.joint())
}

/// Compares analytic and numeric gradients on every coordinate of the
/// tensors accepted by `select`.
pub fn check_gradients(
    model: &Model<f64>,
    ids: &[u32],
    targets: &Targets<'_>,
    select: impl Fn(&str) -> bool,
    h: f64,
) -> Result<GradCheckReport, ModelError> {
    let fwd = model.forward::<ChaCha8Rng>(ids, None)?;
    let mut grads = model.params.zeros_like();
    model.loss_and_grad(&fwd, targets, 1.0, Some(&mut grads))?;

    let mut probe = model.clone();
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst_tensor: String::new(),
        checked: 0,
    };
    for ti in 0..probe.params.tensors.len() {
        if !select(&probe.params.tensors[ti].name) {
            continue;
        }
        for j in 0..probe.params.tensors[ti].data.len() {
            let orig = probe.params.tensors[ti].data[j];
            probe.params.tensors[ti].data[j] = orig + h;
            let up = loss(&probe, ids, targets)?;
            probe.params.tensors[ti].data[j] = orig - h;
            let down = loss(&probe, ids, targets)?;
            probe.params.tensors[ti].data[j] = orig;
            let numeric = (up - down) / (2.0 * h);
            let analytic = grads.tensors[ti].data[j];
            let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_FLOOR);
            if rel > report.max_rel_error {
                report.max_rel_error = rel;
                report.worst_tensor = probe.params.tensors[ti].name.clone();
            }
            report.checked += 1;
        }
    }
    Ok(report)
}

/// Runs one of the fixed check cases over a 6-token sequence.
pub fn grad_check(case: GradCheckCase) -> Result<GradCheckReport, ModelError> {
    let model = tiny_model();
    let ids = [2u32, 7, 4, 11, 4, 3];
    let labels: [i64; 6] = [IGNORE, IGNORE, 9, IGNORE, 12, IGNORE];
    let slots = [[1usize, 3, 1], [3, 5, 0]];
    let joint = Targets {
        mlm_labels: Some(&labels),
        dtp_label: Some(2),
        ..Targets::default()
    };
    match case {
        GradCheckCase::JointTamlmDtp => check_gradients(&model, &ids, &joint, |_| true, FD_STEP),
        GradCheckCase::Tir => {
            let t = Targets {
                slots: Some(&slots),
                ..Targets::default()
            };
            check_gradients(&model, &ids, &t, |_| true, FD_STEP)
        }
        GradCheckCase::EmbeddingsOnly => check_gradients(
            &model,
            &ids,
            &joint,
            |name| name.starts_with("embeddings."),
            FD_STEP,
        ),
    }
}
