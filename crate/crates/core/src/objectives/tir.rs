//! Temporal information replacement: swap expressions for same-granularity
//! alternatives and label each slot by its boundary tokens.

use std::collections::BTreeSet;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::rng_from_seed;
use crate::corpus::{
    pretokenize, Document, TaggedDocument, TokenizedDoc, TokenizerConfig, Vocab, CLS, SEP,
};
use crate::temporal::{normalize_surface, Granularity, TimePoint};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct PoolEntry {
    pub time: TimePoint,
    pub surface: String,
}

/// Resolvable expressions of a corpus, grouped by granularity, deduplicated
/// on `(surface, time)` and sorted by time then surface.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ExpressionPool {
    pools: [Vec<PoolEntry>; 3],
}

fn slot(g: Granularity) -> usize {
    match g {
        Granularity::Year => 0,
        Granularity::Month => 1,
        Granularity::Day => 2,
    }
}

impl ExpressionPool {
    pub fn get(&self, g: Granularity) -> &[PoolEntry] {
        &self.pools[slot(g)]
    }

    pub fn is_empty(&self) -> bool {
        self.pools.iter().all(Vec::is_empty)
    }
}

pub fn collect_expression_pool<'a, I>(docs: I) -> ExpressionPool
where
    I: IntoIterator<Item = &'a TaggedDocument>,
{
    let mut sets: [BTreeSet<PoolEntry>; 3] = Default::default();
    for d in docs {
        for e in &d.expressions {
            if let (true, Some(t)) = (e.resolvable, e.normalized) {
                sets[slot(t.granularity())].insert(PoolEntry {
                    time: t,
                    surface: e.surface.clone(),
                });
            }
        }
    }
    ExpressionPool {
        pools: sets.map(|s| s.into_iter().collect()),
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TirSlot {
    /// Sequence index of the token just before the expression.
    pub boundary_left: usize,
    /// Sequence index of the token just after the expression.
    pub boundary_right: usize,
    pub replaced: bool,
    pub original: TimePoint,
    /// In-context value of the substituted surface, when replaced.
    pub replacement: Option<TimePoint>,
    /// Selected for replacement but no admissible candidate existed.
    pub forced_kept: bool,
}

/// `[CLS] timestamp-tokens [SEP] document-tokens [SEP]` with slot labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TirExample {
    pub input_ids: Vec<u32>,
    pub slots: Vec<TirSlot>,
    /// Number of leading positions (through the prefix `[SEP]`) that are
    /// never replaced or predicted.
    pub prefix_len: usize,
}

const REJECTION_TRIES: usize = 32;

/// Picks a same-granularity pool entry whose value, read against the
/// document's anchor, differs from `original`.
fn pick_replacement<R: Rng>(
    candidates: &[PoolEntry],
    original: &TimePoint,
    anchor: &TimePoint,
    rng: &mut R,
) -> Option<(String, TimePoint)> {
    let admissible = |e: &PoolEntry| -> Option<TimePoint> {
        if e.time == *original {
            return None;
        }
        let value = normalize_surface(&e.surface, anchor).ok()?;
        (value != *original && value.granularity() == original.granularity()).then_some(value)
    };
    if candidates.is_empty() {
        return None;
    }
    for _ in 0..REJECTION_TRIES {
        let e = &candidates[rng.random_range(0..candidates.len())];
        if let Some(v) = admissible(e) {
            return Some((e.surface.clone(), v));
        }
    }
    let all: Vec<(usize, TimePoint)> = candidates
        .iter()
        .enumerate()
        .filter_map(|(i, e)| admissible(e).map(|v| (i, v)))
        .collect();
    if all.is_empty() {
        return None;
    }
    let (i, v) = all[rng.random_range(0..all.len())];
    Some((candidates[i].surface.clone(), v))
}

/// Builds a TIR example. Each resolvable expression is replaced with
/// probability `replace_prob`. `max_len` caps the combined sequence; slots
/// that do not fit are dropped.
#[allow(clippy::too_many_arguments)]
pub fn build_tir(
    doc: &Document,
    tokdoc: &TokenizedDoc,
    pool: &ExpressionPool,
    replace_prob: f64,
    vocab: &Vocab,
    config: &TokenizerConfig,
    max_len: Option<usize>,
    seed: u64,
) -> TirExample {
    let mut rng: ChaCha8Rng = rng_from_seed(seed);
    let to_ids = |text: &str| -> Vec<u32> {
        pretokenize(text, config)
            .into_iter()
            .map(|(w, _, _)| vocab.id(&w))
            .collect()
    };

    let mut input_ids = vec![CLS];
    input_ids.extend(to_ids(&doc.timestamp.render()));
    input_ids.push(SEP);
    let prefix_len = input_ids.len();

    let mut slots = Vec::new();
    // Sequence ranges of each slot's expression, parallel to `slots`.
    let mut ranges = Vec::new();
    let mut cursor = 0usize;
    for g in &tokdoc.temporal_groups {
        let (true, Some(original)) = (g.resolvable, g.normalized) else {
            continue;
        };
        input_ids.extend_from_slice(&tokdoc.token_ids[cursor..g.start]);
        cursor = g.end;
        let mut slot = TirSlot {
            boundary_left: input_ids.len() - 1,
            boundary_right: 0,
            replaced: false,
            original,
            replacement: None,
            forced_kept: false,
        };
        let start = input_ids.len();
        let mut replaced_ids = None;
        if rng.random::<f64>() < replace_prob {
            let candidates = pool.get(original.granularity());
            match pick_replacement(candidates, &original, &doc.timestamp, &mut rng) {
                Some((surface, value)) => {
                    let ids = to_ids(&surface);
                    if !ids.is_empty() {
                        slot.replaced = true;
                        slot.replacement = Some(value);
                        replaced_ids = Some(ids);
                    } else {
                        slot.forced_kept = true;
                    }
                }
                None => slot.forced_kept = true,
            }
        }
        match replaced_ids {
            Some(ids) => input_ids.extend(ids),
            None => input_ids.extend_from_slice(&tokdoc.token_ids[g.start..g.end]),
        }
        slot.boundary_right = input_ids.len();
        ranges.push((start, input_ids.len()));
        slots.push(slot);
    }
    input_ids.extend_from_slice(&tokdoc.token_ids[cursor..]);

    if let Some(max_len) = max_len {
        let cap = max_len.saturating_sub(1).max(prefix_len);
        if input_ids.len() > cap {
            input_ids.truncate(cap);
            let keep = ranges.iter().take_while(|r| r.1 <= cap).count();
            slots.truncate(keep);
        }
    }
    input_ids.push(SEP);
    TirExample {
        input_ids,
        slots,
        prefix_len,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{build_vocab, tokenize};

    fn tagged(id: &str, ts: &str, text: &str) -> TaggedDocument {
        TaggedDocument::tag(Document {
            id: id.into(),
            timestamp: ts.parse().unwrap(),
            text: text.into(),
        })
    }

    fn figure2() -> (TaggedDocument, ExpressionPool, Vocab, TokenizedDoc) {
        let doc = tagged(
            "fig2",
            "2007-02-23",
            "The charges date to 1993, and prosecutors said yesterday they would not retry.",
        );
        let other = tagged("other", "2004-05-01", "Elections were held in 2003 again.");
        let pool = collect_expression_pool([&doc, &other]);
        let cfg = TokenizerConfig::default();
        let vocab = build_vocab([&doc.doc, &other.doc], &cfg, 200, 1).unwrap();
        let tok = tokenize(&doc.doc, &vocab, &doc.expressions, &cfg).unwrap();
        (doc, pool, vocab, tok)
    }

    #[test]
    fn pool_groups_and_dedups() {
        let a = tagged(
            "a",
            "2007-02-23",
            "In 1993 and in 2003, yesterday. Also 1993.",
        );
        let b = tagged("b", "2007-03-01", "Back in 1993, recently.");
        let pool = collect_expression_pool([&a, &b]);
        let years: Vec<_> = pool
            .get(Granularity::Year)
            .iter()
            .map(|e| e.surface.as_str())
            .collect();
        assert_eq!(years, ["1993", "2003"]);
        assert_eq!(pool.get(Granularity::Day).len(), 1);
        assert!(pool.get(Granularity::Month).is_empty());
        let none = tagged("c", "2007-03-01", "Nothing in the 1990s.");
        assert!(collect_expression_pool([&none]).is_empty());
    }

    #[test]
    fn figure_replacement() {
        let (doc, pool, vocab, tok) = figure2();
        let cfg = TokenizerConfig::default();
        // "1993" always has the candidate "2003"; "yesterday" has no other day.
        let ex = build_tir(&doc.doc, &tok, &pool, 1.0, &vocab, &cfg, None, 7);
        assert_eq!(ex.slots.len(), 2);
        assert!(ex.slots[0].replaced);
        assert_eq!(ex.slots[0].replacement, Some(TimePoint::year(2003)));
        let s = &ex.slots[0];
        assert_eq!(
            &ex.input_ids[s.boundary_left + 1..s.boundary_right],
            [vocab.id("2003")]
        );
        assert!(!ex.slots[1].replaced && ex.slots[1].forced_kept);
    }

    #[test]
    fn zero_probability_keeps_document() {
        let (doc, pool, vocab, tok) = figure2();
        let ex = build_tir(
            &doc.doc,
            &tok,
            &pool,
            0.0,
            &vocab,
            &TokenizerConfig::default(),
            None,
            1,
        );
        assert!(ex.slots.iter().all(|s| !s.replaced && !s.forced_kept));
        assert_eq!(
            &ex.input_ids[ex.prefix_len..ex.input_ids.len() - 1],
            tok.token_ids.as_slice()
        );
    }

    #[test]
    fn prefix_is_rendered_timestamp_and_outside_slots() {
        let (doc, pool, vocab, tok) = figure2();
        let cfg = TokenizerConfig::default();
        let ex = build_tir(&doc.doc, &tok, &pool, 0.5, &vocab, &cfg, None, 3);
        let prefix: Vec<u32> = pretokenize("February 23, 2007", &cfg)
            .into_iter()
            .map(|t| vocab.id(&t.0))
            .collect();
        assert_eq!(ex.input_ids[0], CLS);
        assert_eq!(&ex.input_ids[1..ex.prefix_len - 1], prefix.as_slice());
        assert_eq!(ex.input_ids[ex.prefix_len - 1], SEP);
        for s in &ex.slots {
            assert!(s.boundary_left >= ex.prefix_len - 1);
            assert!(s.boundary_left < s.boundary_right && s.boundary_right < ex.input_ids.len());
        }
    }

    #[test]
    fn edge_boundaries_use_sep() {
        let doc = tagged("e", "2007-02-23", "1993");
        let cfg = TokenizerConfig::default();
        let vocab = build_vocab([&doc.doc], &cfg, 20, 1).unwrap();
        let tok = tokenize(&doc.doc, &vocab, &doc.expressions, &cfg).unwrap();
        let ex = build_tir(
            &doc.doc,
            &tok,
            &ExpressionPool::default(),
            1.0,
            &vocab,
            &cfg,
            None,
            0,
        );
        let s = &ex.slots[0];
        assert_eq!(ex.input_ids[s.boundary_left], SEP);
        assert_eq!(ex.input_ids[s.boundary_right], SEP);
        assert_eq!(s.boundary_right, ex.input_ids.len() - 1);
        assert!(s.forced_kept);
    }

    #[test]
    fn length_cap_drops_late_slots() {
        let (doc, pool, vocab, tok) = figure2();
        let cfg = TokenizerConfig::default();
        // prefix 6 tokens; keep 8 document tokens: up to and past "1993".
        let ex = build_tir(&doc.doc, &tok, &pool, 0.0, &vocab, &cfg, Some(15), 0);
        assert_eq!(ex.input_ids.len(), 15);
        assert_eq!(ex.slots.len(), 1);
        assert_eq!(*ex.input_ids.last().unwrap(), SEP);
    }
}
