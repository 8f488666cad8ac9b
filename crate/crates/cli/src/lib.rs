//! The `timeaware` command line: tag → build-vocab → build-dataset →
//! pretrain → finetune → eval / probe / baseline, plus synthetic corpora
//! and the objective ablation.

pub mod config;

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Deserialize;
use timeaware_core::corpus::{build_vocab, load_corpus, read_tagged, write_corpus, write_tagged};
use timeaware_core::eval::{
    accuracy, mae, map, mrr, predict_events, random_guess, read_events, run_ablation,
    similarity_rank, write_events, write_results_csv, AblationData, AblationRow,
};
use timeaware_core::model::{
    finetune, load_checkpoint, pretrain, write_checkpoint, write_loss_log, ClassifierExample,
    DynamicSource, TrainOutcome,
};
use timeaware_core::objectives::{collect_expression_pool, DatasetBuilder};
use timeaware_core::synth::{synth_corpus, synth_events, EventSynthConfig, SynthConfig};
use timeaware_core::{
    Checkpoint, DatasetRecord, EventExample, Granularity, LabelSpace, Model, Objective,
    ObjectiveSet, Prediction, TaggedDocument, TimePoint, Vocab,
};

pub use config::RunConfig;

#[derive(Debug, Parser)]
#[command(
    name = "timeaware",
    version,
    about = "Time-aware pretraining, fine-tuning and evaluation"
)]
pub struct Cli {
    /// Sectioned key = value configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Global seed; overrides the config file.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output file (standard output when omitted, where allowed).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Recognize and normalize temporal expressions in a corpus.
    Tag {
        #[arg(long)]
        corpus: Option<PathBuf>,
    },
    /// Build a frequency-ranked vocabulary from a tagged corpus.
    BuildVocab {
        #[arg(long)]
        tagged: Option<PathBuf>,
        #[arg(long)]
        max_size: Option<usize>,
        #[arg(long)]
        min_freq: Option<usize>,
    },
    /// Build pretraining records for an objective set.
    BuildDataset {
        #[arg(long)]
        tagged: Option<PathBuf>,
        #[arg(long)]
        vocab: Option<PathBuf>,
        #[arg(long)]
        objectives: Option<ObjectiveSet>,
        #[arg(long, default_value_t = 0)]
        epoch: u64,
    },
    /// Train the encoder on the selected objectives.
    Pretrain(PretrainArgs),
    /// Fine-tune a classifier over the event label space.
    Finetune {
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        events: Option<PathBuf>,
        #[command(flatten)]
        train: TrainOverrides,
    },
    /// Score predictions (ACC, MAE) from a classifier or a predictions file.
    Eval {
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        events: Option<PathBuf>,
        /// JSONL of {"predicted": ..., "gold": ...}.
        #[arg(long, conflicts_with = "checkpoint")]
        predictions: Option<PathBuf>,
        #[arg(long)]
        granularity: Option<Granularity>,
    },
    /// Rank label-space dates by cosine similarity to queries.
    Probe {
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        query: Vec<String>,
        /// Rank every event text; reports MRR and MAP against event times.
        #[arg(long)]
        events: Option<PathBuf>,
        #[command(flatten)]
        space: SpaceArgs,
    },
    /// Random-guess baseline over the event label space.
    Baseline {
        #[arg(long)]
        events: Option<PathBuf>,
        #[arg(long, default_value_t = 1000)]
        trials: usize,
        #[command(flatten)]
        space: SpaceArgs,
    },
    /// Generate a synthetic corpus (or event set with --events).
    Synth(SynthArgs),
    /// Pretrain, fine-tune and score one model per objective set.
    Ablate {
        #[arg(long)]
        tagged: Option<PathBuf>,
        #[arg(long)]
        vocab: Option<PathBuf>,
        #[arg(long)]
        train_events: Option<PathBuf>,
        #[arg(long)]
        test_events: Option<PathBuf>,
        /// Comma-separated objective sets; defaults to the six-row matrix.
        #[arg(long, value_delimiter = ',')]
        combos: Vec<ObjectiveSet>,
    },
}

#[derive(Debug, Args)]
pub struct PretrainArgs {
    /// Fixed records from build-dataset.
    #[arg(long, conflicts_with = "tagged")]
    pub dataset: Option<PathBuf>,
    /// Tagged corpus; records are rebuilt every epoch.
    #[arg(long)]
    pub tagged: Option<PathBuf>,
    #[arg(long)]
    pub vocab: Option<PathBuf>,
    #[arg(long)]
    pub objectives: Option<ObjectiveSet>,
    /// Continue from an existing checkpoint instead of random initialization.
    #[arg(long)]
    pub init: Option<PathBuf>,
    #[command(flatten)]
    pub train: TrainOverrides,
}

#[derive(Debug, Args)]
pub struct TrainOverrides {
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// CSV loss log; defaults to `<out>.loss.csv`.
    #[arg(long)]
    pub loss_log: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SpaceArgs {
    #[arg(long)]
    pub start: Option<TimePoint>,
    #[arg(long)]
    pub end: Option<TimePoint>,
    #[arg(long)]
    pub granularity: Option<Granularity>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 2000)]
    pub docs: usize,
    /// Defaults to `[labels]` for documents, `[event_labels]` for events.
    #[arg(long)]
    pub start: Option<TimePoint>,
    #[arg(long)]
    pub end: Option<TimePoint>,
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
    /// Generate this many events instead of documents (years of --start..--end).
    #[arg(long)]
    pub events: Option<usize>,
}

/// Writes to `path` atomically (temp file in the same directory, then
/// rename), or to standard output.
pub fn write_output(
    path: Option<&Path>,
    f: impl FnOnce(&mut dyn Write) -> Result<()>,
) -> Result<()> {
    match path {
        Some(path) => {
            let dir = path
                .parent()
                .filter(|p| !p.as_os_str().is_empty())
                .unwrap_or(Path::new("."));
            let tmp =
                temp_file(dir).with_context(|| format!("creating file in {}", dir.display()))?;
            {
                let mut w = BufWriter::new(tmp.as_file());
                f(&mut w)?;
                w.flush()?;
            }
            tmp.persist(path)
                .with_context(|| format!("writing {}", path.display()))?;
            Ok(())
        }
        None => {
            let stdout = io::stdout();
            let mut w = stdout.lock();
            f(&mut w)?;
            w.flush()?;
            Ok(())
        }
    }
}

#[cfg(unix)]
fn temp_file(dir: &Path) -> io::Result<tempfile::NamedTempFile> {
    use std::os::unix::fs::PermissionsExt;
    tempfile::Builder::new()
        .permissions(std::fs::Permissions::from_mode(0o644))
        .tempfile_in(dir)
}

#[cfg(not(unix))]
fn temp_file(dir: &Path) -> io::Result<tempfile::NamedTempFile> {
    tempfile::NamedTempFile::new_in(dir)
}

fn need<'a>(flag: &'a Option<PathBuf>, config: &'a Option<String>, name: &str) -> Result<PathBuf> {
    flag.clone()
        .or_else(|| config.as_ref().map(PathBuf::from))
        .ok_or_else(|| anyhow!("missing --{name} (or [paths] {})", name.replace('-', "_")))
}

fn need_out(out: &Option<PathBuf>) -> Result<&Path> {
    out.as_deref()
        .ok_or_else(|| anyhow!("this command needs --out"))
}

fn read_vocab(path: &Path) -> Result<Vocab> {
    let f = File::open(path).with_context(|| format!("opening vocabulary {}", path.display()))?;
    Vocab::read(BufReader::new(f)).with_context(|| format!("reading vocabulary {}", path.display()))
}

fn tagged(path: &Path) -> Result<Vec<TaggedDocument>> {
    read_tagged(path).with_context(|| format!("reading tagged corpus {}", path.display()))
}

fn events(path: &Path) -> Result<Vec<EventExample>> {
    let f = File::open(path).with_context(|| format!("opening events {}", path.display()))?;
    read_events(BufReader::new(f)).with_context(|| format!("reading events {}", path.display()))
}

fn checkpoint(path: &Path) -> Result<Checkpoint> {
    load_checkpoint(path).with_context(|| format!("reading checkpoint {}", path.display()))
}

fn checkpoint_vocab(c: &Checkpoint) -> Result<&Vocab> {
    c.vocab
        .as_ref()
        .ok_or_else(|| anyhow!("checkpoint carries no vocabulary"))
}

fn save(out: &Path, ckpt: &Checkpoint) -> Result<()> {
    write_output(Some(out), |w| Ok(write_checkpoint(w, ckpt)?))
}

fn save_log(loss_log: &Option<PathBuf>, out: &Path, outcome: &TrainOutcome) -> Result<()> {
    let path = loss_log.clone().unwrap_or_else(|| {
        let mut s = out.as_os_str().to_owned();
        s.push(".loss.csv");
        PathBuf::from(s)
    });
    write_output(Some(&path), |w| Ok(write_loss_log(w, &outcome.log)?))
}

fn apply(t: &TrainOverrides, cfg: &mut timeaware_core::TrainConfig) {
    if let Some(e) = t.epochs {
        cfg.epochs = e;
    }
    if let Some(lr) = t.lr {
        cfg.learning_rate = lr;
    }
    if let Some(b) = t.batch_size {
        cfg.batch_size = b;
    }
}

fn space_from(args: &SpaceArgs, fallback: &[Option<&LabelSpace>]) -> Result<LabelSpace> {
    match (args.start, args.end) {
        (Some(start), Some(end)) => {
            let g = args.granularity.unwrap_or(start.granularity());
            Ok(LabelSpace::new(start, end, g)?)
        }
        (None, None) => fallback
            .iter()
            .flatten()
            .next()
            .map(|s| *(*s))
            .ok_or_else(|| anyhow!("no label space: pass --start/--end or declare [event_labels]")),
        _ => bail!("--start and --end go together"),
    }
}

fn event_space(cfg: &RunConfig) -> Result<LabelSpace> {
    cfg.event_labels
        .ok_or_else(|| anyhow!("declare the fine-tuning label space under [event_labels]"))
}

#[derive(Deserialize)]
struct PredictionLine {
    predicted: TimePoint,
    gold: TimePoint,
}

fn print_metrics(rows: &[AblationRow]) {
    for r in rows {
        eprintln!(
            "{:<12} {:<4} {:<6} {:.4}",
            r.configuration, r.metric, r.granularity, r.value
        );
    }
}

/// Executes one parsed command line.
pub fn run(cli: Cli) -> Result<()> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.set_seed(seed);
    }
    let out = cli.out.as_deref();
    match &cli.command {
        Command::Tag { corpus } => {
            let path = need(corpus, &cfg.paths.corpus, "corpus")?;
            let docs = load_corpus(&path)
                .with_context(|| format!("opening corpus {}", path.display()))?
                .map(|d| d.map(TaggedDocument::tag))
                .collect::<Result<Vec<_>, _>>()
                .with_context(|| format!("in {}", path.display()))?;
            write_output(out, |w| Ok(write_tagged(w, &docs)?))?;
            eprintln!(
                "tagged {} documents, {} expressions",
                docs.len(),
                docs.iter().map(|d| d.expressions.len()).sum::<usize>()
            );
        }
        Command::BuildVocab {
            tagged: t,
            max_size,
            min_freq,
        } => {
            let docs = tagged(&need(t, &cfg.paths.tagged, "tagged")?)?;
            let vocab = build_vocab(
                docs.iter().map(|d| &d.doc),
                &cfg.tokenizer,
                max_size.unwrap_or(cfg.vocab_max_size),
                min_freq.unwrap_or(cfg.vocab_min_freq),
            )?;
            write_output(out, |w| Ok(vocab.write(w)?))?;
            eprintln!(
                "vocabulary of {} tokens, sha256 {}",
                vocab.len(),
                vocab.hash()
            );
        }
        Command::BuildDataset {
            tagged: t,
            vocab,
            objectives,
            epoch,
        } => {
            let docs = tagged(&need(t, &cfg.paths.tagged, "tagged")?)?;
            let vocab = read_vocab(&need(vocab, &cfg.paths.vocab, "vocab")?)?;
            let builder = DatasetBuilder {
                objectives: objectives.clone().unwrap_or(cfg.objectives.clone()),
                params: cfg.params,
                space: cfg.labels,
                vocab: &vocab,
                tokenizer: cfg.tokenizer.clone(),
                pool: collect_expression_pool(&docs),
                global_seed: cfg.seed,
            };
            let (records, stats) = builder.build_all(&docs, *epoch)?;
            write_output(out, |w| Ok(DatasetRecord::write_jsonl(w, &records)?))?;
            eprintln!("documents {}", stats.documents);
            eprintln!("masked fraction {:.4}", stats.masked_fraction());
            if let Some(m) = stats.min_masked_fraction_with_expressions {
                eprintln!("min masked fraction (documents with expressions) {m:.4}");
            }
            if stats.slots > 0 {
                eprintln!(
                    "slots {}  replaced fraction {:.4}  forced kept {}",
                    stats.slots,
                    stats.replaced_fraction(),
                    stats.forced_kept
                );
            }
        }
        Command::Pretrain(args) => cmd_pretrain(&cfg, args, need_out(&cli.out)?)?,
        Command::Finetune {
            checkpoint: c,
            events: e,
            train,
        } => {
            let out = need_out(&cli.out)?;
            let base = checkpoint(&need(c, &cfg.paths.checkpoint, "checkpoint")?)?;
            let vocab = checkpoint_vocab(&base)?;
            let space = event_space(&cfg)?;
            let evs = events(&need(e, &cfg.paths.train_events, "events")?)?;
            let examples = evs
                .iter()
                .map(|e| e.to_classifier(vocab, &cfg.tokenizer, &space, base.model.config.max_len))
                .collect::<Result<Vec<ClassifierExample>, _>>()?;
            let mut tc = cfg.finetune.clone();
            apply(train, &mut tc);
            let outcome = finetune(&base.model, &examples, space.size(), &tc)?;
            save(
                out,
                &Checkpoint {
                    model: outcome.model.clone(),
                    vocab: base.vocab.clone(),
                },
            )?;
            save_log(&train.loss_log, out, &outcome)?;
            eprintln!(
                "fine-tuned {} steps over {} classes",
                outcome.steps,
                space.size()
            );
        }
        Command::Eval {
            checkpoint: c,
            events: e,
            predictions,
            granularity,
        } => {
            let (name, preds, g) = if let Some(p) = predictions {
                let text = std::fs::read_to_string(p)
                    .with_context(|| format!("reading {}", p.display()))?;
                let mut preds = Vec::new();
                for (i, line) in text
                    .lines()
                    .enumerate()
                    .filter(|(_, l)| !l.trim().is_empty())
                {
                    let l: PredictionLine = serde_json::from_str(line)
                        .with_context(|| format!("{} line {}", p.display(), i + 1))?;
                    let g = granularity
                        .or(cfg.event_labels.as_ref().map(LabelSpace::granularity))
                        .unwrap_or(l.gold.granularity());
                    preds.push(Prediction {
                        predicted: l.predicted,
                        gold: l.gold,
                        granularity: g,
                    });
                }
                let g = preds
                    .first()
                    .map(|p| p.granularity)
                    .unwrap_or(Granularity::Year);
                ("predictions".to_string(), preds, g)
            } else {
                let path = need(c, &cfg.paths.checkpoint, "checkpoint")?;
                let ckpt = checkpoint(&path)?;
                let space = event_space(&cfg)?;
                let evs = events(&need(e, &cfg.paths.test_events, "events")?)?;
                let preds = predict_events(
                    &ckpt.model,
                    &evs,
                    checkpoint_vocab(&ckpt)?,
                    &cfg.tokenizer,
                    &space,
                )?;
                let name = path
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_default();
                (name, preds, granularity.unwrap_or(space.granularity()))
            };
            let rows = [("ACC", accuracy(&preds)?), ("MAE", mae(&preds, g)?)]
                .into_iter()
                .map(|(m, v)| AblationRow {
                    configuration: name.clone(),
                    metric: m.into(),
                    granularity: g.to_string(),
                    value: v,
                })
                .collect::<Vec<_>>();
            print_metrics(&rows);
            write_output(out, |w| Ok(write_results_csv(w, &rows)?))?;
        }
        Command::Probe {
            checkpoint: c,
            query,
            events: e,
            space,
        } => {
            let ckpt = checkpoint(&need(c, &cfg.paths.checkpoint, "checkpoint")?)?;
            let vocab = checkpoint_vocab(&ckpt)?;
            let space = space_from(space, &[cfg.event_labels.as_ref(), cfg.labels.as_ref()])?;
            let mut lists = Vec::new();
            for q in query {
                lists.push(similarity_rank(
                    &ckpt.model,
                    vocab,
                    &cfg.tokenizer,
                    q,
                    &space,
                )?);
            }
            let evs = match e {
                Some(p) => events(p)?,
                None => Vec::new(),
            };
            for ev in &evs {
                let gold = ev.time.truncate(space.granularity())?;
                lists.push(
                    similarity_rank(&ckpt.model, vocab, &cfg.tokenizer, &ev.text, &space)?
                        .with_relevant([gold]),
                );
            }
            if lists.is_empty() {
                bail!("probe needs --query or --events");
            }
            write_output(out, |w| {
                writeln!(w, "query,rank,time,score")?;
                for l in &lists {
                    for (i, (t, s)) in l.ranked.iter().enumerate() {
                        writeln!(
                            w,
                            "{},{},{},{}",
                            serde_json::to_string(&l.query)?,
                            i + 1,
                            t,
                            s
                        )?;
                    }
                }
                Ok(())
            })?;
            if !evs.is_empty() {
                let scored = &lists[query.len()..];
                eprintln!(
                    "MRR {:.4}  MAP {:.4}  over {} events",
                    mrr(scored)?,
                    map(scored)?,
                    scored.len()
                );
            }
        }
        Command::Baseline {
            events: e,
            trials,
            space,
        } => {
            let space = space_from(space, &[cfg.event_labels.as_ref(), cfg.labels.as_ref()])?;
            let golds = events(&need(e, &cfg.paths.test_events, "events")?)?
                .iter()
                .map(|e| e.time.truncate(space.granularity()))
                .collect::<Result<Vec<_>, _>>()?;
            let (acc, err) = random_guess(&space, &golds, *trials, cfg.seed)?;
            let g = space.granularity().to_string();
            let rows = vec![
                AblationRow {
                    configuration: "RG".into(),
                    metric: "ACC".into(),
                    granularity: g.clone(),
                    value: acc,
                },
                AblationRow {
                    configuration: "RG".into(),
                    metric: "MAE".into(),
                    granularity: g,
                    value: err,
                },
            ];
            print_metrics(&rows);
            write_output(out, |w| Ok(write_results_csv(w, &rows)?))?;
        }
        Command::Synth(a) => {
            let span = |space: Option<&LabelSpace>, start: &str, end: &str| {
                let default = |s: &str| s.parse::<TimePoint>().expect("valid default");
                (
                    a.start
                        .or(space.map(|s| s.start()))
                        .unwrap_or_else(|| default(start)),
                    a.end
                        .or(space.map(|s| s.end()))
                        .unwrap_or_else(|| default(end)),
                )
            };
            if let Some(n) = a.events {
                let (start, end) = span(cfg.event_labels.as_ref(), "1987", "2007");
                let evs = synth_events(&EventSynthConfig {
                    events: n,
                    start_year: start.year_value(),
                    end_year: end.year_value(),
                    noise: a.noise,
                    seed: cfg.seed,
                    ..EventSynthConfig::default()
                })
                .map_err(|e| anyhow!(e))?;
                write_output(out, |w| Ok(write_events(w, &evs)?))?;
            } else {
                let (start, end) = span(cfg.labels.as_ref(), "1987-01", "1990-12");
                let docs = synth_corpus(&SynthConfig {
                    docs: a.docs,
                    start,
                    end,
                    noise: a.noise,
                    seed: cfg.seed,
                    ..SynthConfig::default()
                })
                .map_err(|e| anyhow!(e))?;
                write_output(out, |w| Ok(write_corpus(w, &docs)?))?;
            }
        }
        Command::Ablate {
            tagged: t,
            vocab,
            train_events,
            test_events,
            combos,
        } => {
            let docs = tagged(&need(t, &cfg.paths.tagged, "tagged")?)?;
            let vocab = read_vocab(&need(vocab, &cfg.paths.vocab, "vocab")?)?;
            let train = events(&need(
                train_events,
                &cfg.paths.train_events,
                "train-events",
            )?)?;
            let test = events(&need(test_events, &cfg.paths.test_events, "test-events")?)?;
            let pretrain_space = cfg
                .labels
                .ok_or_else(|| anyhow!("declare [labels] for the DTP head"))?;
            let combos = if combos.is_empty() {
                ObjectiveSet::ablation_matrix()
            } else {
                combos.clone()
            };
            let data = AblationData {
                docs: &docs,
                vocab: &vocab,
                tokenizer: cfg.tokenizer.clone(),
                params: cfg.params,
                pretrain_space,
                event_space: event_space(&cfg)?,
                train: &train,
                test: &test,
            };
            let model_cfg = timeaware_core::ModelConfig {
                vocab_size: vocab.len(),
                ..cfg.model.clone()
            };
            let rows = run_ablation(&data, &combos, &model_cfg, &cfg.pretrain, &cfg.finetune)?;
            print_metrics(&rows);
            write_output(out, |w| Ok(write_results_csv(w, &rows)?))?;
        }
    }
    Ok(())
}

fn cmd_pretrain(cfg: &RunConfig, args: &PretrainArgs, out: &Path) -> Result<()> {
    let vocab = read_vocab(&need(&args.vocab, &cfg.paths.vocab, "vocab")?)?;
    let objectives = args.objectives.clone().unwrap_or(cfg.objectives.clone());
    let mut tc = timeaware_core::TrainConfig {
        objectives: objectives.clone(),
        ..cfg.pretrain.clone()
    };
    apply(&args.train, &mut tc);
    let dtp = objectives.contains(Objective::Dtp);
    let space = cfg.labels;
    if dtp && space.is_none() {
        bail!("DTP needs a label space under [labels]");
    }
    let model = match &args.init {
        Some(p) => {
            let c = checkpoint(p)?;
            if checkpoint_vocab(&c)?.hash() != vocab.hash() {
                bail!(
                    "checkpoint {} was trained with a different vocabulary",
                    p.display()
                );
            }
            if dtp && c.model.config.dtp_classes != space.as_ref().map(LabelSpace::size) {
                bail!(
                    "checkpoint {} has no DTP head of the declared size",
                    p.display()
                );
            }
            c.model
        }
        None => Model::init(timeaware_core::ModelConfig {
            vocab_size: vocab.len(),
            dtp_classes: if dtp {
                space.as_ref().map(LabelSpace::size)
            } else {
                None
            },
            classifier_classes: None,
            ..cfg.model.clone()
        })?,
    };
    let dataset = args.dataset.clone().or_else(|| {
        if args.tagged.is_none() {
            cfg.paths.dataset.as_ref().map(PathBuf::from)
        } else {
            None
        }
    });
    let outcome = if let Some(path) = dataset {
        let f = File::open(&path).with_context(|| format!("opening dataset {}", path.display()))?;
        let records = DatasetRecord::read_jsonl(BufReader::new(f))
            .with_context(|| format!("reading {}", path.display()))?;
        pretrain(model, &records, &tc)?
    } else {
        let docs = tagged(&need(&args.tagged, &cfg.paths.tagged, "tagged")?)?;
        let source = DynamicSource {
            builder: DatasetBuilder {
                objectives,
                params: cfg.params,
                space,
                vocab: &vocab,
                tokenizer: cfg.tokenizer.clone(),
                pool: collect_expression_pool(&docs),
                global_seed: cfg.seed,
            },
            docs: &docs,
        };
        pretrain(model, &source, &tc)?
    };
    save(
        out,
        &Checkpoint {
            model: outcome.model.clone(),
            vocab: Some(vocab),
        },
    )?;
    save_log(&args.train.loss_log, out, &outcome)?;
    if let Some(last) = outcome.log.iter().rev().find(|r| r.objective == "joint") {
        eprintln!(
            "pretrained {} steps, final joint loss {:.4}",
            outcome.steps, last.loss
        );
    } else {
        eprintln!("pretrained 0 steps");
    }
    Ok(())
}
