use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::masking::{apply_plan, corrupt, plan_mlm, plan_tamlm};
use super::tir::{build_tir, ExpressionPool};
use super::{
    dtp_label, mix_seed, rng_from_seed, LabelSpace, Objective, ObjectiveError, ObjectiveSet, IGNORE,
};
use crate::corpus::{tokenize, CorpusError, TaggedDocument, TokenizerConfig, Vocab, CLS, SEP};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectiveParams {
    /// Fraction of temporal expressions sampled first (α).
    pub temporal_mask_ratio: f64,
    /// Overall token masking budget (β).
    pub mask_budget: f64,
    /// TIR replacement probability (p).
    pub replace_prob: f64,
}

impl Default for ObjectiveParams {
    fn default() -> Self {
        ObjectiveParams {
            temporal_mask_ratio: 0.3,
            mask_budget: 0.15,
            replace_prob: 0.5,
        }
    }
}

impl ObjectiveParams {
    pub fn validate(&self) -> Result<(), ObjectiveError> {
        let check = |name, value: f64, ok: bool| {
            if ok {
                Ok(())
            } else {
                Err(ObjectiveError::BadParameter { name, value })
            }
        };
        check(
            "alpha",
            self.temporal_mask_ratio,
            (0.0..=1.0).contains(&self.temporal_mask_ratio),
        )?;
        check(
            "beta",
            self.mask_budget,
            self.mask_budget > 0.0 && self.mask_budget < 1.0,
        )?;
        check(
            "p",
            self.replace_prob,
            (0.0..=1.0).contains(&self.replace_prob),
        )
    }
}

/// One line of a dataset file. Absent objectives omit their field.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetRecord {
    pub doc_id: String,
    pub input_ids: Vec<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mlm_labels: Option<Vec<i64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dtp_label: Option<usize>,
    /// `[left, right, label]` with label 1 = replaced, 0 = kept.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slots: Option<Vec<[usize; 3]>>,
}

impl DatasetRecord {
    pub fn write_jsonl<W: Write>(mut w: W, records: &[DatasetRecord]) -> std::io::Result<()> {
        for r in records {
            serde_json::to_writer(&mut w, r)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn read_jsonl<R: BufRead>(r: R) -> Result<Vec<DatasetRecord>, CorpusError> {
        let mut out = Vec::new();
        for (i, line) in r.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            out.push(
                serde_json::from_str(&line).map_err(|e| CorpusError::MalformedRecord {
                    line: i + 1,
                    reason: e.to_string(),
                })?,
            );
        }
        Ok(out)
    }
}

/// Aggregate counts printed by dataset building.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BuildStats {
    pub documents: usize,
    pub document_tokens: usize,
    pub masked: usize,
    pub documents_with_expressions: usize,
    /// Smallest per-document masked fraction among documents with expressions.
    pub min_masked_fraction_with_expressions: Option<f64>,
    pub slots: usize,
    pub replaced: usize,
    pub forced_kept: usize,
}

impl BuildStats {
    pub fn masked_fraction(&self) -> f64 {
        self.masked as f64 / self.document_tokens.max(1) as f64
    }

    pub fn replaced_fraction(&self) -> f64 {
        self.replaced as f64 / self.slots.max(1) as f64
    }
}

/// Turns tagged documents into dataset records for an objective set.
pub struct DatasetBuilder<'a> {
    pub objectives: ObjectiveSet,
    pub params: ObjectiveParams,
    pub space: Option<LabelSpace>,
    pub vocab: &'a Vocab,
    pub tokenizer: TokenizerConfig,
    pub pool: ExpressionPool,
    pub global_seed: u64,
}

impl<'a> DatasetBuilder<'a> {
    pub fn validate(&self) -> Result<(), ObjectiveError> {
        self.objectives.validate()?;
        self.params.validate()?;
        if self.objectives.contains(Objective::Dtp) && self.space.is_none() {
            return Err(ObjectiveError::InconsistentObjectives(
                self.objectives.clone(),
                "DTP needs a label space",
            ));
        }
        Ok(())
    }

    /// Builds one record; the seed is mixed from the global seed, the
    /// document id, and `epoch`.
    pub fn build(
        &self,
        tagged: &TaggedDocument,
        epoch: u64,
        stats: &mut BuildStats,
    ) -> Result<DatasetRecord, ObjectiveError> {
        let doc = &tagged.doc;
        let seed = mix_seed(self.global_seed, &doc.id, epoch);
        let tokdoc = tokenize(doc, self.vocab, &tagged.expressions, &self.tokenizer)?;
        let dtp = if self.objectives.contains(Objective::Dtp) {
            Some(dtp_label(
                &doc.timestamp,
                self.space.as_ref().expect("validated"),
            )?)
        } else {
            None
        };
        stats.documents += 1;
        stats.document_tokens += tokdoc.len();

        if self.objectives.contains(Objective::Tir) {
            let ex = build_tir(
                doc,
                &tokdoc,
                &self.pool,
                self.params.replace_prob,
                self.vocab,
                &self.tokenizer,
                self.tokenizer.max_len,
                seed,
            );
            stats.slots += ex.slots.len();
            stats.replaced += ex.slots.iter().filter(|s| s.replaced).count();
            stats.forced_kept += ex.slots.iter().filter(|s| s.forced_kept).count();
            let mut input_ids = ex.input_ids;
            let mlm_labels = if self.objectives.contains(Objective::Mlm) {
                // Mask document tokens that are neither inside nor bounding a slot.
                let body = ex.prefix_len..input_ids.len() - 1;
                let mut protected = vec![false; input_ids.len()];
                for s in &ex.slots {
                    for p in &mut protected[s.boundary_left..=s.boundary_right] {
                        *p = true;
                    }
                }
                let mut rng = rng_from_seed(seed ^ 0x4d4c_4d00);
                let n = body.len();
                let plan = plan_mlm(
                    n,
                    |i| !protected[body.start + i],
                    self.params.mask_budget,
                    &mut rng,
                );
                let mut labels = vec![IGNORE; input_ids.len()];
                corrupt(
                    &mut input_ids,
                    &mut labels,
                    &plan,
                    body.start,
                    self.vocab.len(),
                    &mut rng,
                );
                stats.masked += plan.len();
                Some(labels)
            } else {
                None
            };
            let slots = ex
                .slots
                .iter()
                .map(|s| [s.boundary_left, s.boundary_right, usize::from(s.replaced)])
                .collect();
            return Ok(DatasetRecord {
                doc_id: doc.id.clone(),
                input_ids,
                mlm_labels,
                dtp_label: dtp,
                slots: Some(slots),
            });
        }

        let mut rng = rng_from_seed(seed);
        let (input_ids, mlm_labels) = if self.objectives.masks() {
            let plan = if self.objectives.contains(Objective::Tamlm) {
                plan_tamlm(
                    &tokdoc,
                    self.params.temporal_mask_ratio,
                    self.params.mask_budget,
                    &mut rng,
                )
            } else {
                plan_mlm(tokdoc.len(), |_| true, self.params.mask_budget, &mut rng)
            };
            stats.masked += plan.len();
            if !tokdoc.temporal_groups.is_empty() && !tokdoc.is_empty() {
                let f = plan.len() as f64 / tokdoc.len() as f64;
                let m = stats.min_masked_fraction_with_expressions.get_or_insert(f);
                *m = m.min(f);
            }
            let ex = apply_plan(&tokdoc, &plan, self.vocab, &mut rng);
            (ex.input_ids, Some(ex.mlm_labels))
        } else {
            let mut ids = vec![CLS];
            ids.extend_from_slice(&tokdoc.token_ids);
            ids.push(SEP);
            (ids, None)
        };
        if !tokdoc.temporal_groups.is_empty() {
            stats.documents_with_expressions += 1;
        }
        Ok(DatasetRecord {
            doc_id: doc.id.clone(),
            input_ids,
            mlm_labels,
            dtp_label: dtp,
            slots: None,
        })
    }

    pub fn build_all(
        &self,
        docs: &[TaggedDocument],
        epoch: u64,
    ) -> Result<(Vec<DatasetRecord>, BuildStats), ObjectiveError> {
        self.validate()?;
        let mut stats = BuildStats::default();
        let records = docs
            .iter()
            .map(|d| self.build(d, epoch, &mut stats))
            .collect::<Result<_, _>>()?;
        Ok((records, stats))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{build_vocab, Document};
    use crate::objectives::collect_expression_pool;
    use crate::temporal::{Granularity, TimePoint};

    fn corpus() -> Vec<TaggedDocument> {
        [
            (
                "a",
                "2007-02-23",
                "The charges date to 1993, overturned last December, said yesterday.",
            ),
            (
                "b",
                "2003-06-01",
                "Elections in 2003 were held in May 2003 and again in 1999.",
            ),
            (
                "c",
                "1999-01-10",
                "No dates in this one at all, just words and more words.",
            ),
        ]
        .into_iter()
        .map(|(id, ts, text)| {
            TaggedDocument::tag(Document {
                id: id.into(),
                timestamp: ts.parse().unwrap(),
                text: text.into(),
            })
        })
        .collect()
    }

    fn builder<'a>(
        vocab: &'a Vocab,
        docs: &[TaggedDocument],
        objectives: &str,
    ) -> DatasetBuilder<'a> {
        DatasetBuilder {
            objectives: objectives.parse().unwrap(),
            params: ObjectiveParams::default(),
            space: Some(
                LabelSpace::new(
                    TimePoint::year(1990),
                    TimePoint::year(2010),
                    Granularity::Year,
                )
                .unwrap(),
            ),
            vocab,
            tokenizer: TokenizerConfig::default(),
            pool: collect_expression_pool(docs),
            global_seed: 11,
        }
    }

    #[test]
    fn tamlm_dtp_records() {
        let docs = corpus();
        let raw: Vec<_> = docs.iter().map(|d| &d.doc).collect();
        let vocab = build_vocab(raw, &TokenizerConfig::default(), 100, 1).unwrap();
        let b = builder(&vocab, &docs, "tamlm+dtp");
        let (records, stats) = b.build_all(&docs, 0).unwrap();
        assert_eq!(records.len(), 3);
        assert_eq!(records[0].dtp_label, Some(17));
        assert!(records
            .iter()
            .all(|r| r.mlm_labels.is_some() && r.slots.is_none()));
        assert!(stats.min_masked_fraction_with_expressions.unwrap() >= 0.15);
        let line = serde_json::to_string(&records[0]).unwrap();
        assert!(line.contains("-100") && !line.contains("slots"));
        let (again, _) = b.build_all(&docs, 0).unwrap();
        assert_eq!(records, again);
        let (epoch1, _) = b.build_all(&docs, 1).unwrap();
        assert_ne!(records, epoch1);
    }

    #[test]
    fn tir_records_and_no_expression_docs() {
        let docs = corpus();
        let raw: Vec<_> = docs.iter().map(|d| &d.doc).collect();
        let vocab = build_vocab(raw, &TokenizerConfig::default(), 100, 1).unwrap();
        let b = builder(&vocab, &docs, "mlm+tir");
        let (records, stats) = b.build_all(&docs, 0).unwrap();
        assert_eq!(records[2].slots.as_deref(), Some(&[][..]));
        assert!(records[0].slots.as_ref().unwrap().len() == 3);
        assert!(stats.slots == 6);
        let labels = records[0].mlm_labels.as_ref().unwrap();
        for s in records[0].slots.as_ref().unwrap() {
            assert!((s[0]..=s[1]).all(|p| labels[p] == IGNORE));
        }
        let b = builder(&vocab, &docs, "tir");
        let (records, _) = b.build_all(&docs, 0).unwrap();
        assert!(records.iter().all(|r| r.mlm_labels.is_none()));

        let empty: Vec<TaggedDocument> = corpus().into_iter().skip(2).collect();
        let b = builder(&vocab, &empty, "tir");
        let (records, stats) = b.build_all(&empty, 0).unwrap();
        assert!(records.iter().all(|r| r.slots.as_ref().unwrap().is_empty()));
        assert_eq!(stats.replaced, 0);
    }

    #[test]
    fn rejects_bad_configs() {
        let docs = corpus();
        let vocab = Vocab::from_tokens(["x"]).unwrap();
        let mut b = builder(&vocab, &docs, "dtp");
        b.space = None;
        assert!(b.build_all(&docs, 0).is_err());
        let mut b = builder(&vocab, &docs, "mlm");
        b.params.mask_budget = 1.0;
        assert!(b.build_all(&docs, 0).is_err());
        let mut b = builder(&vocab, &docs, "dtp");
        b.space = Some(
            LabelSpace::new(
                TimePoint::year(2000),
                TimePoint::year(2001),
                Granularity::Year,
            )
            .unwrap(),
        );
        assert!(matches!(
            b.build_all(&docs, 0),
            Err(ObjectiveError::OutOfLabelSpace { .. })
        ));
    }

    #[test]
    fn jsonl_round_trip() {
        let docs = corpus();
        let raw: Vec<_> = docs.iter().map(|d| &d.doc).collect();
        let vocab = build_vocab(raw, &TokenizerConfig::default(), 100, 1).unwrap();
        let (records, _) = builder(&vocab, &docs, "mlm+tir")
            .build_all(&docs, 0)
            .unwrap();
        let mut buf = Vec::new();
        DatasetRecord::write_jsonl(&mut buf, &records).unwrap();
        assert_eq!(DatasetRecord::read_jsonl(buf.as_slice()).unwrap(), records);
    }
}
