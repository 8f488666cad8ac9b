use std::collections::HashMap;
use std::io::{BufRead, Write};

use sha2::{Digest, Sha256};

use super::tokenize::{pretokenize, TokenizerConfig};
use super::{CorpusError, Document};

pub const PAD: u32 = 0;
pub const UNK: u32 = 1;
pub const CLS: u32 = 2;
pub const SEP: u32 = 3;
pub const MASK: u32 = 4;
pub const NUM_SPECIALS: u32 = 5;
pub const SPECIAL_TOKENS: [&str; 5] = ["[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"];

/// Dense token ↔ id mapping with the special tokens at fixed ids `0..5`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocab {
    tokens: Vec<String>,
    ids: HashMap<String, u32>,
}

impl Vocab {
    /// Builds a vocabulary from regular tokens; specials are prepended.
    pub fn from_tokens<I, S>(tokens: I) -> Result<Self, CorpusError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let all = SPECIAL_TOKENS
            .iter()
            .map(|s| s.to_string())
            .chain(tokens.into_iter().map(Into::into));
        Self::from_full_list(all.collect())
    }

    fn from_full_list(tokens: Vec<String>) -> Result<Self, CorpusError> {
        for (i, s) in SPECIAL_TOKENS.iter().enumerate() {
            if tokens.get(i).map(String::as_str) != Some(*s) {
                return Err(CorpusError::Vocab(format!("id {i} must be {s}")));
            }
        }
        let mut ids = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if t.is_empty() || t.chars().any(char::is_whitespace) {
                return Err(CorpusError::Vocab(format!("invalid token {t:?} at id {i}")));
            }
            if ids.insert(t.clone(), i as u32).is_some() {
                return Err(CorpusError::Vocab(format!("duplicate token {t:?}")));
            }
        }
        Ok(Vocab { tokens, ids })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> u32 {
        self.ids.get(token).copied().unwrap_or(UNK)
    }

    pub fn get(&self, token: &str) -> Option<u32> {
        self.ids.get(token).copied()
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    /// One token per line, line number = id.
    pub fn write<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for t in &self.tokens {
            writeln!(w, "{t}")?;
        }
        Ok(())
    }

    pub fn read<R: BufRead>(r: R) -> Result<Self, CorpusError> {
        let tokens = r.lines().collect::<Result<Vec<_>, _>>()?;
        Self::from_full_list(tokens)
    }

    /// Hex SHA-256 of the vocabulary file contents.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        for t in &self.tokens {
            h.update(t.as_bytes());
            h.update(b"\n");
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Word-level vocabulary: tokens with frequency ≥ `min_freq`, ranked by
/// descending frequency then lexicographically, cut to `max_size` entries
/// including the specials.
pub fn build_vocab<'a, I>(
    docs: I,
    config: &TokenizerConfig,
    max_size: usize,
    min_freq: usize,
) -> Result<Vocab, CorpusError>
where
    I: IntoIterator<Item = &'a Document>,
{
    if max_size <= NUM_SPECIALS as usize {
        return Err(CorpusError::Vocab(format!(
            "max_size {max_size} leaves no room beyond specials"
        )));
    }
    if min_freq == 0 {
        return Err(CorpusError::Vocab("min_freq must be at least 1".into()));
    }
    let mut counts: HashMap<String, usize> = HashMap::new();
    let mut n_docs = 0usize;
    for doc in docs {
        n_docs += 1;
        for (word, _, _) in pretokenize(&doc.text, config) {
            *counts.entry(word).or_default() += 1;
        }
    }
    if n_docs == 0 {
        return Err(CorpusError::EmptyCorpus);
    }
    let mut ranked: Vec<(String, usize)> = counts
        .into_iter()
        .filter(|(t, c)| *c >= min_freq && !SPECIAL_TOKENS.contains(&t.as_str()))
        .collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    ranked.truncate(max_size - NUM_SPECIALS as usize);
    Vocab::from_tokens(ranked.into_iter().map(|(t, _)| t))
}
