//! Task heads over encoder states and their cross-entropy losses.

use super::encoder::{pair_mut, Forward};
use super::ops::{cross_entropy, linear, linear_backward, softmax_row};
use super::params::Linear;
use super::{Model, ModelError, ParamStore, Real};
use crate::objectives::IGNORE;

/// Supervision attached to one sequence. Absent fields switch heads off.
#[derive(Debug, Clone, Copy, Default)]
pub struct Targets<'a> {
    pub mlm_labels: Option<&'a [i64]>,
    pub dtp_label: Option<usize>,
    /// `[left, right, label]`, label 1 = replaced.
    pub slots: Option<&'a [[usize; 3]]>,
    pub class_label: Option<usize>,
}

/// Per-head losses of one example; `None` for inactive heads.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LossParts {
    pub mlm: Option<f64>,
    pub dtp: Option<f64>,
    pub tir: Option<f64>,
    pub cls: Option<f64>,
}

impl LossParts {
    /// Unweighted sum of the active parts.
    pub fn joint(&self) -> f64 {
        [self.mlm, self.dtp, self.tir, self.cls]
            .into_iter()
            .flatten()
            .sum()
    }
}

/// Result of a head: loss, logits (row-major), and per-row probabilities.
pub struct HeadOutput<F> {
    pub loss: F,
    pub logits: Vec<F>,
    pub probs: Vec<F>,
}

impl<F: Real> Model<F> {
    fn head(&self, lin: Linear) -> (&[F], &[F]) {
        (
            &self.params.tensors[lin.weight].data,
            &self.params.tensors[lin.bias].data,
        )
    }

    #[allow(clippy::too_many_arguments)]
    fn run_head(
        &self,
        lin: Linear,
        x: &[F],
        rows: usize,
        d_in: usize,
        targets: &[usize],
        scale: F,
        grads: Option<&mut ParamStore<F>>,
    ) -> (HeadOutput<F>, Option<Vec<F>>) {
        let (w, b) = self.head(lin);
        let d_out = b.len();
        let logits = linear(x, rows, w, b, d_in, d_out);
        let (loss, dlogits, probs) = cross_entropy(&logits, d_out, targets, scale);
        let dx = grads.map(|g| {
            let (dw, db) = pair_mut(g, lin);
            linear_backward(x, &dlogits, rows, w, d_in, d_out, dw, db)
        });
        (
            HeadOutput {
                loss,
                logits,
                probs,
            },
            dx,
        )
    }

    /// Masked-token prediction over positions whose label is not
    /// [`IGNORE`]. With no labeled position the loss is zero.
    pub fn mlm_loss(&self, hidden: &[F], labels: &[i64]) -> HeadOutput<F> {
        self.mlm_part(hidden, labels, F::one(), None).0
    }

    /// K-way timestamp classification over `h_[CLS]`.
    pub fn dtp_loss(&self, h_cls: &[F], label: usize) -> Result<HeadOutput<F>, ModelError> {
        let lin = self.layout.dtp.ok_or(ModelError::MissingHead("dtp"))?;
        let k = self.params.tensors[lin.bias].data.len();
        if label >= k {
            return Err(ModelError::LabelOutOfRange { label, classes: k });
        }
        Ok(self
            .run_head(lin, h_cls, 1, self.config.d_model, &[label], F::one(), None)
            .0)
    }

    /// Replaced/kept classification from concatenated boundary states.
    pub fn tir_loss(&self, hidden: &[F], slots: &[[usize; 3]]) -> HeadOutput<F> {
        self.tir_part(hidden, slots, F::one(), None).0
    }

    fn mlm_part(
        &self,
        hidden: &[F],
        labels: &[i64],
        scale: F,
        grads: Option<&mut ParamStore<F>>,
    ) -> (HeadOutput<F>, Option<Vec<F>>) {
        let d = self.config.d_model;
        let positions: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] != IGNORE).collect();
        if positions.is_empty() {
            let out = HeadOutput {
                loss: F::zero(),
                logits: Vec::new(),
                probs: Vec::new(),
            };
            return (out, grads.map(|_| vec![F::zero(); hidden.len()]));
        }
        let mut x = Vec::with_capacity(positions.len() * d);
        for &p in &positions {
            x.extend_from_slice(&hidden[p * d..(p + 1) * d]);
        }
        let targets: Vec<usize> = positions.iter().map(|&p| labels[p] as usize).collect();
        let (out, dx) = self.run_head(
            self.layout.mlm,
            &x,
            positions.len(),
            d,
            &targets,
            scale,
            grads,
        );
        let dh = dx.map(|dx| {
            let mut dh = vec![F::zero(); hidden.len()];
            for (r, &p) in positions.iter().enumerate() {
                dh[p * d..(p + 1) * d].copy_from_slice(&dx[r * d..(r + 1) * d]);
            }
            dh
        });
        (out, dh)
    }

    fn tir_part(
        &self,
        hidden: &[F],
        slots: &[[usize; 3]],
        scale: F,
        grads: Option<&mut ParamStore<F>>,
    ) -> (HeadOutput<F>, Option<Vec<F>>) {
        let d = self.config.d_model;
        if slots.is_empty() {
            let out = HeadOutput {
                loss: F::zero(),
                logits: Vec::new(),
                probs: Vec::new(),
            };
            return (out, grads.map(|_| vec![F::zero(); hidden.len()]));
        }
        let mut x = Vec::with_capacity(slots.len() * 2 * d);
        for s in slots {
            x.extend_from_slice(&hidden[s[0] * d..(s[0] + 1) * d]);
            x.extend_from_slice(&hidden[s[1] * d..(s[1] + 1) * d]);
        }
        let targets: Vec<usize> = slots.iter().map(|s| s[2].min(1)).collect();
        let (out, dx) = self.run_head(
            self.layout.tir,
            &x,
            slots.len(),
            2 * d,
            &targets,
            scale,
            grads,
        );
        let dh = dx.map(|dx| {
            let mut dh = vec![F::zero(); hidden.len()];
            for (r, s) in slots.iter().enumerate() {
                for (side, &pos) in [s[0], s[1]].iter().enumerate() {
                    let src = &dx[r * 2 * d + side * d..r * 2 * d + (side + 1) * d];
                    dh[pos * d..(pos + 1) * d]
                        .iter_mut()
                        .zip(src)
                        .for_each(|(a, b)| *a += *b);
                }
            }
            dh
        });
        (out, dh)
    }

    fn check_targets(&self, fwd: &Forward<F>, t: &Targets<'_>) -> Result<(), ModelError> {
        let len = fwd.len();
        if let Some(labels) = t.mlm_labels {
            if labels.len() != len {
                return Err(ModelError::Target(format!(
                    "{} labels for {} positions",
                    labels.len(),
                    len
                )));
            }
            if let Some(&bad) = labels
                .iter()
                .find(|&&l| l != IGNORE && (l < 0 || l as usize >= self.config.vocab_size))
            {
                return Err(ModelError::Target(format!(
                    "mlm label {bad} outside vocabulary"
                )));
            }
        }
        if let Some(slots) = t.slots {
            if let Some(s) = slots
                .iter()
                .find(|s| s[0] >= len || s[1] >= len || s[2] > 1)
            {
                return Err(ModelError::Target(format!(
                    "slot {s:?} invalid for length {len}"
                )));
            }
        }
        let check_label = |label: Option<usize>,
                           lin: Option<Linear>,
                           name: &'static str|
         -> Result<(), ModelError> {
            if let Some(label) = label {
                let lin = lin.ok_or(ModelError::MissingHead(name))?;
                let k = self.params.tensors[lin.bias].data.len();
                if label >= k {
                    return Err(ModelError::LabelOutOfRange { label, classes: k });
                }
            }
            Ok(())
        };
        check_label(t.dtp_label, self.layout.dtp, "dtp")?;
        check_label(t.class_label, self.layout.cls, "cls")
    }

    /// Losses of every active head; with `grads`, also backpropagates
    /// `scale · d(joint)/dθ` through heads and encoder.
    pub fn loss_and_grad(
        &self,
        fwd: &Forward<F>,
        targets: &Targets<'_>,
        scale: F,
        mut grads: Option<&mut ParamStore<F>>,
    ) -> Result<LossParts, ModelError> {
        self.check_targets(fwd, targets)?;
        let d = self.config.d_model;
        let want_grad = grads.is_some();
        let mut dh = want_grad.then(|| vec![F::zero(); fwd.hidden.len()]);
        let mut parts = LossParts::default();
        let add = |dh: &mut Option<Vec<F>>, part: Option<Vec<F>>| {
            if let (Some(acc), Some(p)) = (dh.as_mut(), part) {
                acc.iter_mut().zip(&p).for_each(|(a, b)| *a += *b);
            }
        };

        if let Some(labels) = targets.mlm_labels {
            let (out, g) = self.mlm_part(&fwd.hidden, labels, scale, grads.as_deref_mut());
            parts.mlm = out.loss.to_f64();
            add(&mut dh, g);
        }
        if let Some(slots) = targets.slots {
            let (out, g) = self.tir_part(&fwd.hidden, slots, scale, grads.as_deref_mut());
            parts.tir = out.loss.to_f64();
            add(&mut dh, g);
        }
        if let Some(label) = targets.dtp_label {
            let lin = self.layout.dtp.expect("checked");
            let (out, g) = self.run_head(
                lin,
                &fwd.hidden[..d],
                1,
                d,
                &[label],
                scale,
                grads.as_deref_mut(),
            );
            parts.dtp = out.loss.to_f64();
            if let (Some(acc), Some(g)) = (dh.as_mut(), g) {
                acc[..d].iter_mut().zip(&g).for_each(|(a, b)| *a += *b);
            }
        }
        if let Some(label) = targets.class_label {
            let lin = self.layout.cls.expect("checked");
            let mut h = fwd.hidden[..d].to_vec();
            if let Some(m) = &fwd.cls_drop {
                h.iter_mut().zip(m).for_each(|(v, k)| *v *= *k);
            }
            let (out, g) = self.run_head(lin, &h, 1, d, &[label], scale, grads.as_deref_mut());
            parts.cls = out.loss.to_f64();
            if let (Some(acc), Some(mut g)) = (dh.as_mut(), g) {
                if let Some(m) = &fwd.cls_drop {
                    g.iter_mut().zip(m).for_each(|(v, k)| *v *= *k);
                }
                acc[..d].iter_mut().zip(&g).for_each(|(a, b)| *a += *b);
            }
        }
        if let (Some(dh), Some(g)) = (dh, grads) {
            self.backward(fwd, &dh, g);
        }
        Ok(parts)
    }

    /// Class probabilities of a classification head over `h_[CLS]`.
    pub(crate) fn head_probs(&self, lin: Linear, h_cls: &[F]) -> Vec<F> {
        let (w, b) = self.head(lin);
        let mut logits = linear(h_cls, 1, w, b, self.config.d_model, b.len());
        softmax_row(&mut logits, None);
        logits
    }
}
