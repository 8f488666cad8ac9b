use super::EvalError;
use crate::corpus::{tokenize, TaggedDocument, TokenizerConfig, Vocab, CLS, MASK, SEP};
use crate::model::Model;
use crate::objectives::IGNORE;

/// Token-level accuracy of restoring temporal expressions: each expression
/// of each document is masked as a whole (one expression at a time) and its
/// tokens are predicted by the MLM head. Returns `(accuracy %, tokens)`.
pub fn temporal_recovery(
    model: &Model<f32>,
    docs: &[TaggedDocument],
    vocab: &Vocab,
    tokenizer: &TokenizerConfig,
) -> Result<(f64, usize), EvalError> {
    let v = model.config.vocab_size;
    let (mut hits, mut total) = (0usize, 0usize);
    for d in docs {
        let tk = tokenize(&d.doc, vocab, &d.expressions, tokenizer)
            .map_err(crate::objectives::ObjectiveError::from)?;
        let mut base = vec![CLS];
        base.extend_from_slice(&tk.token_ids);
        base.push(SEP);
        for g in &tk.temporal_groups {
            let mut ids = base.clone();
            let mut labels = vec![IGNORE; ids.len()];
            for p in g.start + 1..g.end + 1 {
                labels[p] = i64::from(ids[p]);
                ids[p] = MASK;
            }
            let hidden = model.encode(&ids, false, 0)?;
            let out = model.mlm_loss(&hidden, &labels);
            for (r, p) in (g.start + 1..g.end + 1).enumerate() {
                let row = &out.logits[r * v..(r + 1) * v];
                let best = (0..v).fold(0, |b, i| if row[i] > row[b] { i } else { b });
                hits += usize::from(best as i64 == labels[p]);
                total += 1;
            }
        }
    }
    if total == 0 {
        return Err(EvalError::EmptyInput);
    }
    Ok((100.0 * hits as f64 / total as f64, total))
}

/// Percentage of documents whose timestamp class is the DTP head's argmax.
pub fn timestamp_accuracy(
    model: &Model<f32>,
    docs: &[TaggedDocument],
    vocab: &Vocab,
    tokenizer: &TokenizerConfig,
    space: &crate::objectives::LabelSpace,
) -> Result<f64, EvalError> {
    if docs.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    let mut hits = 0usize;
    for d in docs {
        let tk = tokenize(&d.doc, vocab, &d.expressions, tokenizer)
            .map_err(crate::objectives::ObjectiveError::from)?;
        let mut ids = vec![CLS];
        ids.extend_from_slice(&tk.token_ids);
        ids.push(SEP);
        let probs = crate::model::predict_dtp(model, &ids)?;
        let best = (0..probs.len()).fold(0, |b, i| if probs[i] > probs[b] { i } else { b });
        hits += usize::from(best == space.index(&d.doc.timestamp)?);
    }
    Ok(100.0 * hits as f64 / docs.len() as f64)
}
