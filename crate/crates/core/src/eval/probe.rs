use std::collections::BTreeSet;

use super::EvalError;
use crate::corpus::{TokenizerConfig, Vocab};
use crate::model::{finetune_input, Model};
use crate::objectives::LabelSpace;
use crate::temporal::TimePoint;

/// Candidate dates ordered by similarity to a query.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedDates {
    pub query: String,
    /// Scores are non-increasing; zero-vector candidates come last with
    /// score `-inf`.
    pub ranked: Vec<(TimePoint, f64)>,
    pub relevant: BTreeSet<TimePoint>,
    /// Candidates whose (or whose query's) representation had zero norm.
    pub zero_vectors: Vec<TimePoint>,
}

impl RankedDates {
    pub fn with_relevant(mut self, relevant: impl IntoIterator<Item = TimePoint>) -> Self {
        self.relevant = relevant.into_iter().collect();
        self
    }

    pub fn rank_of(&self, t: &TimePoint) -> Option<usize> {
        self.ranked.iter().position(|(p, _)| p == t).map(|i| i + 1)
    }
}

/// `h_[CLS]` of `[CLS] text [SEP]` in inference mode.
pub fn probe_representation(
    model: &Model<f32>,
    vocab: &Vocab,
    tokenizer: &TokenizerConfig,
    text: &str,
) -> Result<Vec<f32>, EvalError> {
    let ids = finetune_input(vocab, tokenizer, text, None, model.config.max_len);
    let hidden = model.encode(&ids, false, 0)?;
    Ok(hidden[..model.config.d_model].to_vec())
}

fn norm(v: &[f32]) -> f64 {
    v.iter()
        .map(|&x| f64::from(x) * f64::from(x))
        .sum::<f64>()
        .sqrt()
}

/// Orders candidates by cosine similarity to `query`, ties by earlier time.
pub fn rank_by_cosine(
    query_text: &str,
    query: &[f32],
    candidates: &[(TimePoint, Vec<f32>)],
) -> RankedDates {
    let qn = norm(query);
    let mut scored = Vec::with_capacity(candidates.len());
    let mut zero = Vec::new();
    for (t, v) in candidates {
        let vn = norm(v);
        if qn == 0.0 || vn == 0.0 {
            zero.push(*t);
            continue;
        }
        let dot: f64 = query
            .iter()
            .zip(v)
            .map(|(&a, &b)| f64::from(a) * f64::from(b))
            .sum();
        scored.push((*t, dot / (qn * vn)));
    }
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    zero.sort();
    scored.extend(zero.iter().map(|&t| (t, f64::NEG_INFINITY)));
    RankedDates {
        query: query_text.to_string(),
        ranked: scored,
        relevant: BTreeSet::new(),
        zero_vectors: zero,
    }
}

/// Ranks every point of `space` by the cosine similarity between the
/// query's representation and that of the point's rendered string.
pub fn similarity_rank(
    model: &Model<f32>,
    vocab: &Vocab,
    tokenizer: &TokenizerConfig,
    query: &str,
    space: &LabelSpace,
) -> Result<RankedDates, EvalError> {
    let q = probe_representation(model, vocab, tokenizer, query)?;
    let candidates = space
        .points()
        .map(|t| {
            Ok((
                t,
                probe_representation(model, vocab, tokenizer, &t.render())?,
            ))
        })
        .collect::<Result<Vec<_>, EvalError>>()?;
    Ok(rank_by_cosine(query, &q, &candidates))
}

/// The two most probable classes as a chronologically ordered scope.
pub fn top2_time_scope(probs: &[f32], space: &LabelSpace) -> Option<(TimePoint, TimePoint)> {
    if probs.is_empty() || probs.len() != space.size() {
        return None;
    }
    let mut idx: Vec<usize> = (0..probs.len()).collect();
    idx.sort_by(|&a, &b| probs[b].total_cmp(&probs[a]).then(a.cmp(&b)));
    let first = space.point(idx[0])?;
    let second = idx.get(1).and_then(|&i| space.point(i)).unwrap_or(first);
    Some((first.min(second), first.max(second)))
}
