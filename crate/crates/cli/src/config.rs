//! Run configuration: a sectioned `key = value` file, overridden by flags.
//!
//! ```ini
//! seed = 7
//!
//! [tokenizer]
//! lowercase = false
//! max_len = 128
//!
//! [objectives]
//! set = TAMLM+DTP
//! temporal_mask_ratio = 0.3
//! mask_budget = 0.15
//! replace_prob = 0.5
//!
//! [labels]            ; timestamp-prediction classes
//! start = 1987-01
//! end = 2007-06
//! granularity = month
//!
//! [event_labels]      ; fine-tuning classes
//! start = 1987
//! end = 2007
//! granularity = year
//!
//! [model]
//! d_model = 128
//!
//! [pretrain]
//! learning_rate = 3e-5
//!
//! [finetune]
//! learning_rate = 2e-5
//! ```

use std::path::Path;
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use ini::{Ini, Properties};
use timeaware_core::{
    Granularity, LabelSpace, ModelConfig, ObjectiveParams, ObjectiveSet, TimePoint,
    TokenizerConfig, TrainConfig,
};

const SECTIONS: &[(&str, &[&str])] = &[
    ("", &["seed"]),
    (
        "paths",
        &[
            "corpus",
            "tagged",
            "vocab",
            "dataset",
            "checkpoint",
            "events",
            "train_events",
            "test_events",
        ],
    ),
    ("tokenizer", &["lowercase", "max_len"]),
    (
        "objectives",
        &["set", "temporal_mask_ratio", "mask_budget", "replace_prob"],
    ),
    ("labels", &["start", "end", "granularity"]),
    ("event_labels", &["start", "end", "granularity"]),
    (
        "model",
        &[
            "max_len",
            "d_model",
            "n_layers",
            "n_heads",
            "d_ff",
            "dropout_prob",
        ],
    ),
    ("pretrain", TRAIN_KEYS),
    ("finetune", TRAIN_KEYS),
    ("vocab", &["max_size", "min_freq"]),
];

const TRAIN_KEYS: &[&str] = &[
    "learning_rate",
    "batch_size",
    "grad_accumulation",
    "epochs",
    "beta1",
    "beta2",
    "eps",
    "weight_decay",
];

#[derive(Debug, Clone, Default)]
pub struct Paths {
    pub corpus: Option<String>,
    pub tagged: Option<String>,
    pub vocab: Option<String>,
    pub dataset: Option<String>,
    pub checkpoint: Option<String>,
    pub events: Option<String>,
    pub train_events: Option<String>,
    pub test_events: Option<String>,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub seed: u64,
    pub paths: Paths,
    pub tokenizer: TokenizerConfig,
    pub objectives: ObjectiveSet,
    pub params: ObjectiveParams,
    pub labels: Option<LabelSpace>,
    pub event_labels: Option<LabelSpace>,
    pub model: ModelConfig,
    pub pretrain: TrainConfig,
    pub finetune: TrainConfig,
    pub vocab_max_size: usize,
    pub vocab_min_freq: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            paths: Paths::default(),
            tokenizer: TokenizerConfig {
                lowercase: false,
                max_len: Some(128),
            },
            objectives: TrainConfig::default().objectives,
            params: ObjectiveParams::default(),
            labels: None,
            event_labels: None,
            model: ModelConfig::default(),
            pretrain: TrainConfig::default(),
            finetune: TrainConfig {
                learning_rate: 2e-5,
                batch_size: 16,
                grad_accumulation: 1,
                epochs: 3,
                ..TrainConfig::default()
            },
            vocab_max_size: 30_000,
            vocab_min_freq: 1,
        }
    }
}

fn parse<T: FromStr>(section: &str, key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value
        .trim()
        .parse()
        .map_err(|e| anyhow!("[{section}] {key} = {value:?}: {e}"))
}

fn set<T: FromStr>(props: Option<&Properties>, section: &str, key: &str, slot: &mut T) -> Result<()>
where
    T::Err: std::fmt::Display,
{
    if let Some(v) = props.and_then(|p| p.get(key)) {
        *slot = parse(section, key, v)?;
    }
    Ok(())
}

fn set_path(props: Option<&Properties>, key: &str, slot: &mut Option<String>) {
    if let Some(v) = props.and_then(|p| p.get(key)) {
        *slot = Some(v.trim().to_string());
    }
}

fn train_block(props: Option<&Properties>, section: &str, t: &mut TrainConfig) -> Result<()> {
    set(props, section, "learning_rate", &mut t.learning_rate)?;
    set(props, section, "batch_size", &mut t.batch_size)?;
    set(
        props,
        section,
        "grad_accumulation",
        &mut t.grad_accumulation,
    )?;
    set(props, section, "epochs", &mut t.epochs)?;
    set(props, section, "beta1", &mut t.betas.0)?;
    set(props, section, "beta2", &mut t.betas.1)?;
    set(props, section, "eps", &mut t.eps)?;
    set(props, section, "weight_decay", &mut t.weight_decay)?;
    Ok(())
}

fn space_block(props: Option<&Properties>, section: &str) -> Result<Option<LabelSpace>> {
    let Some(p) = props else { return Ok(None) };
    let (Some(start), Some(end)) = (p.get("start"), p.get("end")) else {
        bail!("[{section}] needs start and end");
    };
    let start: TimePoint = parse(section, "start", start)?;
    let end: TimePoint = parse(section, "end", end)?;
    let g: Granularity = match p.get("granularity") {
        Some(g) => parse(section, "granularity", g)?,
        None => start.granularity(),
    };
    Ok(Some(
        LabelSpace::new(start, end, g).map_err(|e| anyhow!("[{section}]: {e}"))?,
    ))
}

impl RunConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let ini = Ini::load_from_file(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        Self::from_ini(&ini)
    }

    pub fn parse_str(text: &str) -> Result<Self> {
        Self::from_ini(&Ini::load_from_str(text).context("parsing config")?)
    }

    fn from_ini(ini: &Ini) -> Result<Self> {
        for (section, props) in ini.iter() {
            let name = section.unwrap_or("");
            let Some((_, keys)) = SECTIONS.iter().find(|(s, _)| *s == name) else {
                bail!("unknown config section [{name}]");
            };
            if let Some((k, _)) = props.iter().find(|(k, _)| !keys.contains(k)) {
                bail!("unknown key {k:?} in section [{name}]");
            }
        }
        let mut c = RunConfig::default();
        let sec = |name: &str| ini.section(Some(name));
        set(Some(ini.general_section()), "", "seed", &mut c.seed)?;
        let p = sec("paths");
        set_path(p, "corpus", &mut c.paths.corpus);
        set_path(p, "tagged", &mut c.paths.tagged);
        set_path(p, "vocab", &mut c.paths.vocab);
        set_path(p, "dataset", &mut c.paths.dataset);
        set_path(p, "checkpoint", &mut c.paths.checkpoint);
        set_path(p, "events", &mut c.paths.events);
        set_path(p, "train_events", &mut c.paths.train_events);
        set_path(p, "test_events", &mut c.paths.test_events);

        let t = sec("tokenizer");
        set(t, "tokenizer", "lowercase", &mut c.tokenizer.lowercase)?;
        if let Some(v) = t.and_then(|p| p.get("max_len")) {
            c.tokenizer.max_len = if v.trim() == "none" {
                None
            } else {
                Some(parse("tokenizer", "max_len", v)?)
            };
        }
        let o = sec("objectives");
        if let Some(v) = o.and_then(|p| p.get("set")) {
            c.objectives = v
                .trim()
                .parse()
                .map_err(|e| anyhow!("[objectives] set = {v:?}: {e}"))?;
        }
        set(
            o,
            "objectives",
            "temporal_mask_ratio",
            &mut c.params.temporal_mask_ratio,
        )?;
        set(o, "objectives", "mask_budget", &mut c.params.mask_budget)?;
        set(o, "objectives", "replace_prob", &mut c.params.replace_prob)?;
        c.labels = space_block(sec("labels"), "labels")?;
        c.event_labels = space_block(sec("event_labels"), "event_labels")?;

        let m = sec("model");
        set(m, "model", "max_len", &mut c.model.max_len)?;
        set(m, "model", "d_model", &mut c.model.d_model)?;
        set(m, "model", "n_layers", &mut c.model.n_layers)?;
        set(m, "model", "n_heads", &mut c.model.n_heads)?;
        set(m, "model", "d_ff", &mut c.model.d_ff)?;
        set(m, "model", "dropout_prob", &mut c.model.dropout_prob)?;
        train_block(sec("pretrain"), "pretrain", &mut c.pretrain)?;
        train_block(sec("finetune"), "finetune", &mut c.finetune)?;
        let v = sec("vocab");
        set(v, "vocab", "max_size", &mut c.vocab_max_size)?;
        set(v, "vocab", "min_freq", &mut c.vocab_min_freq)?;
        c.set_seed(c.seed);
        c.validate()?;
        Ok(c)
    }

    /// The global seed feeds dataset construction, initialization, and
    /// both training loops.
    pub fn set_seed(&mut self, seed: u64) {
        self.seed = seed;
        self.model.seed = seed;
        self.pretrain.seed = seed;
        self.finetune.seed = seed;
    }

    pub fn validate(&self) -> Result<()> {
        self.params
            .validate()
            .map_err(|e| anyhow!("[objectives]: {e}"))?;
        self.objectives
            .validate()
            .map_err(|e| anyhow!("[objectives]: {e}"))?;
        if let Some(n) = self.tokenizer.max_len {
            if n > self.model.max_len {
                bail!(
                    "[tokenizer] max_len {n} exceeds [model] max_len {}",
                    self.model.max_len
                );
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_sections_and_defaults() {
        let c = RunConfig::parse_str(
            "seed = 9\n[objectives]\nset = MLM+TIR\nreplace_prob = 0.4\n[labels]\nstart = 1987\nend = 2007\n\
             [pretrain]\nlearning_rate = 1e-3\n[model]\nd_model = 64\n",
        )
        .unwrap();
        assert_eq!(c.seed, 9);
        assert_eq!(c.pretrain.seed, 9);
        assert_eq!(c.objectives.to_string(), "MLM+TIR");
        assert_eq!(c.params.replace_prob, 0.4);
        assert_eq!(c.labels.unwrap().size(), 21);
        assert_eq!(c.pretrain.learning_rate, 1e-3);
        assert_eq!(c.finetune.learning_rate, 2e-5);
        assert_eq!(c.finetune.batch_size, 16);
        assert_eq!(c.model.d_model, 64);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        assert!(RunConfig::parse_str("[model]\nwidth = 3\n").is_err());
        assert!(RunConfig::parse_str("[nope]\n").is_err());
        assert!(RunConfig::parse_str("[objectives]\nmask_budget = 2\n").is_err());
        assert!(RunConfig::parse_str("[objectives]\nset = MLM+TAMLM\n").is_err());
        assert!(RunConfig::parse_str("[labels]\nstart = 1990\nend = 1980\n").is_err());
    }
}
