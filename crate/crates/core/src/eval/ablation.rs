use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{accuracy, mae, EvalError, Prediction};
use crate::corpus::{TaggedDocument, TokenizerConfig, Vocab};
use crate::model::{
    finetune, finetune_input, predict_proba, pretrain, ClassifierExample, DynamicSource, Model,
    ModelConfig, TrainConfig,
};
use crate::objectives::{
    collect_expression_pool, DatasetBuilder, LabelSpace, Objective, ObjectiveParams, ObjectiveSet,
};
use crate::temporal::TimePoint;

/// An event description with its occurrence time and, optionally, a
/// supporting document (timestamp, text).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventExample {
    pub id: String,
    pub text: String,
    pub time: TimePoint,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub document: Option<(TimePoint, String)>,
}

impl EventExample {
    pub fn to_classifier(
        &self,
        vocab: &Vocab,
        tokenizer: &TokenizerConfig,
        space: &LabelSpace,
        max_len: usize,
    ) -> Result<ClassifierExample, EvalError> {
        let doc = self.document.as_ref().map(|(t, s)| (t, s.as_str()));
        Ok(ClassifierExample {
            id: self.id.clone(),
            input_ids: finetune_input(vocab, tokenizer, &self.text, doc, max_len),
            label: space.index(&self.time)?,
        })
    }
}

/// Argmax predictions of a fine-tuned classifier over `space`.
pub fn predict_events(
    model: &Model<f32>,
    events: &[EventExample],
    vocab: &Vocab,
    tokenizer: &TokenizerConfig,
    space: &LabelSpace,
) -> Result<Vec<Prediction>, EvalError> {
    events
        .iter()
        .map(|e| {
            let ex = e.to_classifier(vocab, tokenizer, space, model.config.max_len)?;
            let probs = predict_proba(model, &ex.input_ids)?;
            let best = (0..probs.len()).fold(0, |b, i| if probs[i] > probs[b] { i } else { b });
            let predicted = space.point(best).expect("classifier sized to the space");
            Ok(Prediction {
                predicted,
                gold: e.time,
                granularity: space.granularity(),
            })
        })
        .collect()
}

/// Everything an ablation run pretrains and evaluates on.
pub struct AblationData<'a> {
    pub docs: &'a [TaggedDocument],
    pub vocab: &'a Vocab,
    pub tokenizer: TokenizerConfig,
    pub params: ObjectiveParams,
    /// Label space of the DTP head.
    pub pretrain_space: LabelSpace,
    /// Label space of the fine-tuned event-time classifier.
    pub event_space: LabelSpace,
    pub train: &'a [EventExample],
    pub test: &'a [EventExample],
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationRow {
    pub configuration: String,
    pub metric: String,
    pub granularity: String,
    pub value: f64,
}

/// Pretrains one model per objective set from identical seeds, fine-tunes
/// each on the event-time training set, and scores the test set.
pub fn run_ablation(
    data: &AblationData<'_>,
    combinations: &[ObjectiveSet],
    model_config: &ModelConfig,
    pretrain_config: &TrainConfig,
    finetune_config: &TrainConfig,
) -> Result<Vec<AblationRow>, EvalError> {
    let pool = collect_expression_pool(data.docs);
    let g = data.event_space.granularity();
    let train: Vec<ClassifierExample> = data
        .train
        .iter()
        .map(|e| {
            e.to_classifier(
                data.vocab,
                &data.tokenizer,
                &data.event_space,
                model_config.max_len,
            )
        })
        .collect::<Result<_, _>>()?;
    let mut rows = Vec::new();
    for objectives in combinations {
        let mut cfg = model_config.clone();
        cfg.dtp_classes = objectives
            .contains(Objective::Dtp)
            .then(|| data.pretrain_space.size());
        cfg.classifier_classes = None;
        let source = DynamicSource {
            builder: DatasetBuilder {
                objectives: objectives.clone(),
                params: data.params,
                space: Some(data.pretrain_space),
                vocab: data.vocab,
                tokenizer: data.tokenizer.clone(),
                pool: pool.clone(),
                global_seed: pretrain_config.seed,
            },
            docs: data.docs,
        };
        let tc = TrainConfig {
            objectives: objectives.clone(),
            ..pretrain_config.clone()
        };
        let pre = pretrain(Model::init(cfg)?, &source, &tc)?;
        let tuned = finetune(&pre.model, &train, data.event_space.size(), finetune_config)?;
        let preds = predict_events(
            &tuned.model,
            data.test,
            data.vocab,
            &data.tokenizer,
            &data.event_space,
        )?;
        for (metric, value) in [("ACC", accuracy(&preds)?), ("MAE", mae(&preds, g)?)] {
            rows.push(AblationRow {
                configuration: objectives.to_string(),
                metric: metric.into(),
                granularity: g.as_str().into(),
                value,
            });
        }
    }
    Ok(rows)
}

pub fn write_results_csv<W: Write>(mut w: W, rows: &[AblationRow]) -> std::io::Result<()> {
    writeln!(w, "configuration,metric,granularity,value")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{}",
            r.configuration, r.metric, r.granularity, r.value
        )?;
    }
    Ok(())
}

/// Reads event JSONL; blank lines are skipped.
pub fn read_events<R: std::io::BufRead>(
    r: R,
) -> Result<Vec<EventExample>, crate::corpus::CorpusError> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let e: EventExample = serde_json::from_str(&line).map_err(|e| {
            crate::corpus::CorpusError::MalformedRecord {
                line: i + 1,
                reason: e.to_string(),
            }
        })?;
        out.push(e);
    }
    Ok(out)
}

pub fn write_events<W: Write>(mut w: W, events: &[EventExample]) -> std::io::Result<()> {
    for e in events {
        writeln!(w, "{}", serde_json::to_string(e).expect("serializable"))?;
    }
    Ok(())
}
