//! Timestamped documents, vocabulary, and word-level tokenization.

mod tokenize;
mod vocab;

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::temporal::{self, Granularity, TemporalExpression, TimePoint};

pub use tokenize::{pretokenize, tokenize, TemporalGroup, TokenizedDoc, TokenizerConfig};
pub use vocab::{build_vocab, Vocab, CLS, MASK, NUM_SPECIALS, PAD, SEP, SPECIAL_TOKENS, UNK};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("line {line}: malformed record: {reason}")]
    MalformedRecord { line: usize, reason: String },
    #[error("line {line}: invalid timestamp {value:?}")]
    InvalidTimestamp { line: usize, value: String },
    #[error("line {line}: duplicate document id {id:?}")]
    DuplicateId { line: usize, id: String },
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("vocabulary: {0}")]
    Vocab(String),
    #[error("expression {index} ({surface:?}) covers no token")]
    Alignment { index: usize, surface: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    pub id: String,
    /// Publication date, day granularity.
    pub timestamp: TimePoint,
    pub text: String,
}

#[derive(Deserialize)]
struct RawDocument {
    id: String,
    timestamp: String,
    text: String,
}

/// Streams documents from a JSONL file in file order.
pub fn load_corpus(
    path: impl AsRef<Path>,
) -> Result<impl Iterator<Item = Result<Document, CorpusError>>, CorpusError> {
    let reader = BufReader::new(File::open(path)?);
    Ok(read_corpus(reader))
}

/// Parses JSONL documents from any reader. Blank lines are skipped; ids must
/// be non-empty and unique.
pub fn read_corpus<R: BufRead>(reader: R) -> impl Iterator<Item = Result<Document, CorpusError>> {
    let mut seen = HashSet::new();
    reader.lines().enumerate().filter_map(move |(i, line)| {
        let line_no = i + 1;
        let line = match line {
            Ok(l) => l,
            Err(e) => return Some(Err(CorpusError::Io(e))),
        };
        if line.trim().is_empty() {
            return None;
        }
        Some(parse_document(&line, line_no).and_then(|doc| {
            if seen.insert(doc.id.clone()) {
                Ok(doc)
            } else {
                Err(CorpusError::DuplicateId {
                    line: line_no,
                    id: doc.id,
                })
            }
        }))
    })
}

fn parse_document(line: &str, line_no: usize) -> Result<Document, CorpusError> {
    let raw: RawDocument =
        serde_json::from_str(line).map_err(|e| CorpusError::MalformedRecord {
            line: line_no,
            reason: e.to_string(),
        })?;
    if raw.id.is_empty() {
        return Err(CorpusError::MalformedRecord {
            line: line_no,
            reason: "empty id".into(),
        });
    }
    let timestamp = parse_day(&raw.timestamp).ok_or(CorpusError::InvalidTimestamp {
        line: line_no,
        value: raw.timestamp.clone(),
    })?;
    Ok(Document {
        id: raw.id,
        timestamp,
        text: raw.text,
    })
}

fn parse_day(s: &str) -> Option<TimePoint> {
    s.parse::<TimePoint>()
        .ok()
        .filter(|t| t.granularity() == Granularity::Day)
}

/// A document together with its recognized, normalized expressions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaggedDocument {
    pub doc: Document,
    pub expressions: Vec<TemporalExpression>,
}

impl TaggedDocument {
    pub fn tag(doc: Document) -> Self {
        let expressions =
            temporal::tag(&doc.text, &doc.timestamp).expect("day-granularity timestamp");
        TaggedDocument { doc, expressions }
    }
}

#[derive(Serialize, Deserialize)]
struct ExpressionRecord {
    start: usize,
    end: usize,
    surface: String,
    normalized: Option<TimePoint>,
    granularity: Option<Granularity>,
}

/// Line format of the tagged corpus. `text` is carried along so that the
/// tagged file is self-sufficient for dataset building.
#[derive(Serialize, Deserialize)]
struct TaggedRecord {
    id: String,
    timestamp: TimePoint,
    expressions: Vec<ExpressionRecord>,
    text: String,
}

impl TaggedDocument {
    pub fn to_json_line(&self) -> String {
        let record = TaggedRecord {
            id: self.doc.id.clone(),
            timestamp: self.doc.timestamp,
            expressions: self
                .expressions
                .iter()
                .map(|e| ExpressionRecord {
                    start: e.span_start,
                    end: e.span_end,
                    surface: e.surface.clone(),
                    normalized: e.normalized,
                    granularity: e.normalized.map(|t| t.granularity()),
                })
                .collect(),
            text: self.doc.text.clone(),
        };
        serde_json::to_string(&record).expect("serializable record")
    }

    pub fn from_json_line(line: &str, line_no: usize) -> Result<Self, CorpusError> {
        let malformed = |reason: String| CorpusError::MalformedRecord {
            line: line_no,
            reason,
        };
        let rec: TaggedRecord = serde_json::from_str(line).map_err(|e| malformed(e.to_string()))?;
        if rec.timestamp.granularity() != Granularity::Day {
            return Err(CorpusError::InvalidTimestamp {
                line: line_no,
                value: rec.timestamp.to_string(),
            });
        }
        let n_chars = rec.text.chars().count();
        let mut expressions = Vec::with_capacity(rec.expressions.len());
        for e in rec.expressions {
            if e.start >= e.end || e.end > n_chars {
                return Err(malformed(format!(
                    "span {}..{} out of range",
                    e.start, e.end
                )));
            }
            expressions.push(TemporalExpression {
                span_start: e.start,
                span_end: e.end,
                surface: e.surface,
                resolvable: e.normalized.is_some(),
                normalized: e.normalized,
            });
        }
        Ok(TaggedDocument {
            doc: Document {
                id: rec.id,
                timestamp: rec.timestamp,
                text: rec.text,
            },
            expressions,
        })
    }
}

pub fn read_tagged(path: impl AsRef<Path>) -> Result<Vec<TaggedDocument>, CorpusError> {
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if !line.trim().is_empty() {
            out.push(TaggedDocument::from_json_line(&line, i + 1)?);
        }
    }
    Ok(out)
}

pub fn write_tagged<W: Write>(mut w: W, docs: &[TaggedDocument]) -> std::io::Result<()> {
    for d in docs {
        writeln!(w, "{}", d.to_json_line())?;
    }
    Ok(())
}

/// Serializes documents back to corpus JSONL.
pub fn write_corpus<W: Write>(mut w: W, docs: &[Document]) -> std::io::Result<()> {
    for d in docs {
        let v =
            serde_json::json!({"id": d.id, "timestamp": d.timestamp.to_string(), "text": d.text});
        writeln!(w, "{v}")?;
    }
    Ok(())
}
