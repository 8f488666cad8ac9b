use crate::temporal::{TemporalExpression, TimePoint};

use super::{CorpusError, Document, Vocab};

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TokenizerConfig {
    pub lowercase: bool,
    /// Sequence cap including `[CLS]` and `[SEP]`; `None` keeps every token.
    pub max_len: Option<usize>,
}

/// A temporal expression mapped onto a contiguous, non-empty token range
/// `[start, end)` of the document tokens.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TemporalGroup {
    pub expr_index: usize,
    pub start: usize,
    pub end: usize,
    pub resolvable: bool,
    pub normalized: Option<TimePoint>,
}

impl TemporalGroup {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end == self.start
    }

    pub fn contains(&self, pos: usize) -> bool {
        (self.start..self.end).contains(&pos)
    }
}

/// Document tokens without specials. Indices in `temporal_groups` refer to
/// positions in `token_ids`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenizedDoc {
    pub doc_id: String,
    pub token_ids: Vec<u32>,
    pub token_spans: Vec<(usize, usize)>,
    pub temporal_groups: Vec<TemporalGroup>,
}

impl TokenizedDoc {
    pub fn len(&self) -> usize {
        self.token_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.token_ids.is_empty()
    }

    /// Group index owning each token, if any.
    pub fn group_of(&self) -> Vec<Option<usize>> {
        let mut owner = vec![None; self.len()];
        for (gi, g) in self.temporal_groups.iter().enumerate() {
            for slot in &mut owner[g.start..g.end] {
                *slot = Some(gi);
            }
        }
        owner
    }
}

/// Splits `text` into words (maximal alphanumeric runs) and single
/// punctuation marks, dropping whitespace. Spans are code-point offsets.
pub fn pretokenize(text: &str, config: &TokenizerConfig) -> Vec<(String, usize, usize)> {
    let mut out = Vec::new();
    let mut word_start: Option<usize> = None;
    let mut word = String::new();
    let mut n = 0usize;
    for (i, c) in text.chars().enumerate() {
        n = i + 1;
        if c.is_alphanumeric() {
            word_start.get_or_insert(i);
            word.push(c);
            continue;
        }
        if let Some(s) = word_start.take() {
            out.push((std::mem::take(&mut word), s, i));
        }
        if !c.is_whitespace() {
            out.push((c.to_string(), i, i + 1));
        }
    }
    if let Some(s) = word_start {
        out.push((word, s, n));
    }
    if config.lowercase {
        for (w, _, _) in &mut out {
            *w = w.to_lowercase();
        }
    }
    out
}

/// Tokenizes `doc.text` and aligns each expression with the minimal token
/// range covering its span.
///
/// With a length cap, tokens beyond `max_len - 2` are dropped along with any
/// group that does not fit entirely.
pub fn tokenize(
    doc: &Document,
    vocab: &Vocab,
    exprs: &[TemporalExpression],
    config: &TokenizerConfig,
) -> Result<TokenizedDoc, CorpusError> {
    let words = pretokenize(&doc.text, config);
    let mut token_spans: Vec<(usize, usize)> = words.iter().map(|(_, s, e)| (*s, *e)).collect();
    let mut token_ids: Vec<u32> = words.iter().map(|(w, _, _)| vocab.id(w)).collect();

    let mut temporal_groups: Vec<TemporalGroup> = Vec::new();
    for (index, e) in exprs.iter().enumerate() {
        let (start, end) = covering_range(&token_spans, e.span_start, e.span_end);
        if start >= end {
            return Err(CorpusError::Alignment {
                index,
                surface: e.surface.clone(),
            });
        }
        if temporal_groups.last().is_some_and(|g| g.end > start) {
            continue;
        }
        temporal_groups.push(TemporalGroup {
            expr_index: index,
            start,
            end,
            resolvable: e.resolvable && e.normalized.is_some(),
            normalized: e.normalized,
        });
    }
    if let Some(max_len) = config.max_len {
        let cap = max_len.saturating_sub(2);
        if token_ids.len() > cap {
            token_ids.truncate(cap);
            token_spans.truncate(cap);
            temporal_groups.retain(|g| g.end <= cap);
        }
    }
    Ok(TokenizedDoc {
        doc_id: doc.id.clone(),
        token_ids,
        token_spans,
        temporal_groups,
    })
}

/// Tokens overlapping `[start, end)`, as a half-open index range.
fn covering_range(spans: &[(usize, usize)], start: usize, end: usize) -> (usize, usize) {
    let first = spans.partition_point(|s| s.1 <= start);
    let last = spans.partition_point(|s| s.0 < end);
    (first, last.max(first))
}
