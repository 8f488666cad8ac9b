//! Acceptance gate: one line per criterion, nonzero exit if any fails.
//!
//! Criteria cover the calendar, masking and replacement laws, gradient
//! correctness, the random-guess baseline, three learnability runs on
//! synthetic corpora, metric oracles, and end-to-end determinism. Each
//! criterion also has a wall-clock budget.

use std::collections::BTreeSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::Rng;
use timeaware_core::corpus::{
    build_vocab, tokenize, Document, TaggedDocument, TokenizerConfig, CLS, MASK, SEP,
};
use timeaware_core::eval::{
    accuracy, average_precision, mae, map, mrr, random_guess, reciprocal_rank, similarity_rank,
    temporal_recovery, timestamp_accuracy, EventExample, Prediction, RankedDates,
};
use timeaware_core::model::gradcheck::{grad_check, GradCheckCase};
use timeaware_core::model::{
    finetune, pretrain, ClassifierExample, DynamicSource, Model, ModelConfig, TrainConfig,
};
use timeaware_core::objectives::{
    apply_plan, build_tir, ceil_count, collect_expression_pool, mix_seed, plan_tamlm,
    rng_from_seed, DatasetBuilder, LabelSpace, MaskAction, ObjectiveParams,
};
use timeaware_core::synth::{
    filler_words, synth_corpus, synth_events, EventSynthConfig, SynthConfig,
};
use timeaware_core::temporal::{distance, tag, Granularity, TimePoint, MONTH_NAMES};

type Outcome = Result<String, String>;

/// Id, name, wall-clock budget in seconds, check.
type Criterion = (u32, &'static str, u64, fn() -> Outcome);

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

// ---------------------------------------------------------------------------
// 1. calendar oracle

/// Day-by-day enumeration of 1600-01-01 ..= 2100-12-31, sharing no code
/// with the library's calendar.
struct DayTable {
    days: Vec<(i32, u8, u8)>,
}

fn oracle_leap(y: i32) -> bool {
    (y % 4 == 0 && y % 100 != 0) || y % 400 == 0
}

fn oracle_month_len(y: i32, m: u8) -> u8 {
    match m {
        4 | 6 | 9 | 11 => 30,
        2 if oracle_leap(y) => 29,
        2 => 28,
        _ => 31,
    }
}

impl DayTable {
    fn new() -> Self {
        let mut days = Vec::new();
        let (mut y, mut m, mut d) = (1600, 1u8, 1u8);
        while y <= 2100 {
            days.push((y, m, d));
            d += 1;
            if d > oracle_month_len(y, m) {
                d = 1;
                m += 1;
                if m > 12 {
                    m = 1;
                    y += 1;
                }
            }
        }
        DayTable { days }
    }

    fn index(&self, key: (i32, u8, u8)) -> usize {
        self.days.binary_search(&key).expect("date in table")
    }

    /// 1600-01-01 was a Saturday; 0 = Monday.
    fn weekday(i: usize) -> usize {
        (i + 5) % 7
    }
}

fn month_step(y: i32, m: u8, delta: i64) -> (i32, u8) {
    let (mut y, mut m) = (y, m);
    for _ in 0..delta.unsigned_abs() {
        if delta > 0 {
            m += 1;
            if m > 12 {
                m = 1;
                y += 1;
            }
        } else if m == 1 {
            m = 12;
            y -= 1;
        } else {
            m -= 1;
        }
    }
    (y, m)
}

fn month_walk_distance(a: (i32, u8), b: (i32, u8)) -> u64 {
    let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
    let mut cur = lo;
    let mut n = 0;
    while cur != hi {
        cur = month_step(cur.0, cur.1, 1);
        n += 1;
    }
    n
}

const WEEKDAYS: [&str; 7] = [
    "Monday",
    "Tuesday",
    "Wednesday",
    "Thursday",
    "Friday",
    "Saturday",
    "Sunday",
];

fn tp_day(t: (i32, u8, u8)) -> TimePoint {
    TimePoint::day(t.0, t.1, t.2).unwrap()
}

fn tp_month(t: (i32, u8)) -> TimePoint {
    TimePoint::month(t.0, t.1).unwrap()
}

fn criterion_calendar() -> Outcome {
    let table = DayTable::new();
    let mut rng = rng_from_seed(1);
    let mut mismatches = Vec::new();
    let lo = table.index((1650, 1, 1));
    let hi = table.index((2050, 12, 31));
    for case in 0..1000 {
        let kind = case % 4;
        let i = rng.random_range(0..table.days.len());
        let (y, m, d) = table.days[i];
        let t = tp_day((y, m, d));
        match kind {
            0 => {
                let g = Granularity::ALL[rng.random_range(0..3)];
                let got = t.truncate(g).map_err(|e| e.to_string())?;
                let want = match g {
                    Granularity::Year => TimePoint::year(y),
                    Granularity::Month => tp_month((y, m)),
                    Granularity::Day => t,
                };
                if got != want {
                    mismatches.push(format!("truncate({t}, {g}) = {got}, want {want}"));
                }
            }
            1 => {
                let j = rng.random_range(0..table.days.len());
                let (y2, m2, d2) = table.days[j];
                let u = tp_day((y2, m2, d2));
                let g = Granularity::ALL[rng.random_range(0..3)];
                let got = distance(&t, &u, g).map_err(|e| e.to_string())?;
                let want = match g {
                    Granularity::Day => i.abs_diff(j) as u64,
                    Granularity::Month => month_walk_distance((y, m), (y2, m2)),
                    Granularity::Year => y.abs_diff(y2) as u64,
                };
                if got != want {
                    mismatches.push(format!("distance({t}, {u}, {g}) = {got}, want {want}"));
                }
            }
            _ => {
                let i = rng.random_range(lo..=hi);
                let (y, m, d) = table.days[i];
                let anchor = tp_day((y, m, d));
                let (text, want) = relative_case(&table, i, &mut rng);
                let exprs = tag(&text, &anchor).map_err(|e| e.to_string())?;
                let got = match exprs.as_slice() {
                    [e] if e.span_start == 0 && e.span_end == text.chars().count() => e.normalized,
                    _ => None,
                };
                if got != Some(want) {
                    mismatches.push(format!(
                        "normalize({text:?} @ {anchor}) = {got:?}, want {want}"
                    ));
                }
            }
        }
    }
    ensure(
        mismatches.is_empty(),
        format!(
            "{} mismatches, first: {}",
            mismatches.len(),
            mismatches.first().map_or("", |s| s)
        ),
    )?;
    Ok("1000 cases (truncate, distance, normalize), 0 mismatches".into())
}

fn relative_case<R: Rng>(table: &DayTable, i: usize, rng: &mut R) -> (String, TimePoint) {
    let (y, m, _) = table.days[i];
    let day = |j: usize| tp_day(table.days[j]);
    match rng.random_range(0..13) {
        0 => ("yesterday".into(), day(i - 1)),
        1 => ("today".into(), day(i)),
        2 => ("tomorrow".into(), day(i + 1)),
        3 => {
            let n = rng.random_range(1..1000);
            (format!("{n} days ago"), day(i - n))
        }
        4 => {
            let n = rng.random_range(1..1000);
            (format!("in {n} days"), day(i + n))
        }
        5 => {
            let n = rng.random_range(1..100);
            (format!("{n} weeks ago"), day(i - 7 * n))
        }
        6 => {
            let w = rng.random_range(0..7);
            let j = (1..=7)
                .map(|k| i - k)
                .find(|&j| DayTable::weekday(j) == w)
                .unwrap();
            (format!("last {}", WEEKDAYS[w]), day(j))
        }
        7 => {
            let w = rng.random_range(0..7);
            let j = (1..=7)
                .map(|k| i + k)
                .find(|&j| DayTable::weekday(j) == w)
                .unwrap();
            (format!("next {}", WEEKDAYS[w]), day(j))
        }
        8 => {
            let n = rng.random_range(1..200) as i64;
            (format!("{n} months ago"), tp_month(month_step(y, m, -n)))
        }
        9 => {
            let (word, delta) = if rng.random::<bool>() {
                ("last", -1)
            } else {
                ("next", 1)
            };
            (format!("{word} month"), tp_month(month_step(y, m, delta)))
        }
        10 => {
            let target = rng.random_range(1..=12u8);
            let back = (1..=12)
                .map(|k| month_step(y, m, -k))
                .find(|&(_, mm)| mm == target)
                .unwrap();
            (
                format!("last {}", MONTH_NAMES[target as usize - 1]),
                tp_month(back),
            )
        }
        11 => {
            let j = rng.random_range(0..table.days.len());
            let (yy, mm, dd) = table.days[j];
            (
                format!("{} {dd}, {yy}", MONTH_NAMES[mm as usize - 1]),
                day(j),
            )
        }
        _ => {
            let j = rng.random_range(0..table.days.len());
            let (yy, mm, dd) = table.days[j];
            (format!("{yy:04}-{mm:02}-{dd:02}"), day(j))
        }
    }
}

// ---------------------------------------------------------------------------
// 2-4. masking and replacement laws

fn random_expression<R: Rng>(rng: &mut R) -> String {
    let month = MONTH_NAMES[rng.random_range(0..12)];
    let year = rng.random_range(1950..=2010);
    match rng.random_range(0..9) {
        0 => format!("in {month} {year}"),
        1 => format!("{month} {}, {year}", rng.random_range(1..=28)),
        2 => format!("{year}"),
        3 => "yesterday".into(),
        4 => format!("{} days ago", rng.random_range(2..30)),
        5 => format!("last {}", WEEKDAYS[rng.random_range(0..7)]),
        6 => format!("next {month}"),
        7 => "the 1990s".into(),
        _ => format!(
            "{year}-{:02}-{:02}",
            rng.random_range(1..=12),
            rng.random_range(1..=28)
        ),
    }
}

/// Documents of 10..80 filler words with 0..6 temporal expressions.
fn random_documents(n: usize, seed: u64) -> Vec<TaggedDocument> {
    let words = filler_words(200);
    let mut rng = rng_from_seed(seed);
    (0..n)
        .map(|i| {
            let len = rng.random_range(10..80);
            let mut parts: Vec<String> = (0..len)
                .map(|_| words[rng.random_range(0..words.len())].clone())
                .collect();
            for _ in 0..rng.random_range(0..=6) {
                let at = rng.random_range(0..=parts.len());
                parts.insert(at, format!(", {} ,", random_expression(&mut rng)));
            }
            let ts = TimePoint::day(
                rng.random_range(1980..2010),
                rng.random_range(1..=12),
                rng.random_range(1..=28),
            )
            .unwrap();
            TaggedDocument::tag(Document {
                id: format!("r{i}"),
                timestamp: ts,
                text: parts.join(" "),
            })
        })
        .collect()
}

struct MaskTally {
    positions: usize,
    mask: usize,
    random: usize,
    keep: usize,
    applied_mismatch: usize,
}

fn masking_runs() -> Result<(String, MaskTally), String> {
    let docs = random_documents(500, 2);
    let tok = TokenizerConfig::default();
    let vocab =
        build_vocab(docs.iter().map(|d| &d.doc), &tok, 10_000, 1).map_err(|e| e.to_string())?;
    let (alpha, beta) = (0.3, 0.15);
    let mut violations = Vec::new();
    let mut tally = MaskTally {
        positions: 0,
        mask: 0,
        random: 0,
        keep: 0,
        applied_mismatch: 0,
    };
    let mut with_expr = 0;
    for d in &docs {
        let td = tokenize(&d.doc, &vocab, &d.expressions, &tok).map_err(|e| e.to_string())?;
        let owner = td.group_of();
        let n = td.len();
        let non_temporal = owner.iter().filter(|o| o.is_none()).count();
        if !td.temporal_groups.is_empty() {
            with_expr += 1;
        }
        for s in 0..20u64 {
            let mut rng = rng_from_seed(mix_seed(s, &d.doc.id, 0));
            let plan = plan_tamlm(&td, alpha, beta, &mut rng);
            let sampled: BTreeSet<usize> = plan.sampled_expressions.iter().copied().collect();
            let sampled_tokens: usize = sampled.iter().map(|&g| td.temporal_groups[g].len()).sum();
            let budget = ceil_count(beta, n);
            let need_fill = budget.saturating_sub(sampled_tokens);
            if need_fill > non_temporal {
                violations.push(format!(
                    "{}: budget cannot be met by non-temporal tokens",
                    d.doc.id
                ));
            }
            let want = budget.max(sampled_tokens);
            if plan.len() != want {
                violations.push(format!(
                    "{} seed {s}: masked {} != max({budget}, {sampled_tokens})",
                    d.doc.id,
                    plan.len()
                ));
            }
            if sampled.len() != ceil_count(alpha, td.temporal_groups.len()) {
                violations.push(format!("{}: sampled {} groups", d.doc.id, sampled.len()));
            }
            let masked: BTreeSet<usize> = plan.masked_positions.iter().copied().collect();
            if masked.len() != plan.len() {
                violations.push(format!("{}: duplicate positions", d.doc.id));
            }
            for (gi, g) in td.temporal_groups.iter().enumerate() {
                let hit = (g.start..g.end).filter(|p| masked.contains(p)).count();
                if sampled.contains(&gi) && hit != g.len() {
                    violations.push(format!("{}: sampled group {gi} partially masked", d.doc.id));
                }
                if !sampled.contains(&gi) && hit != 0 {
                    violations.push(format!("{}: unsampled group {gi} touched", d.doc.id));
                }
            }
            let ex = apply_plan(&td, &plan, &vocab, &mut rng);
            for (&p, &a) in plan.masked_positions.iter().zip(&plan.actions) {
                tally.positions += 1;
                let (orig, got) = (td.token_ids[p], ex.input_ids[p + 1]);
                match a {
                    MaskAction::Mask => {
                        tally.mask += 1;
                        tally.applied_mismatch += usize::from(got != MASK);
                    }
                    MaskAction::Random => tally.random += 1,
                    MaskAction::Keep => {
                        tally.keep += 1;
                        tally.applied_mismatch += usize::from(got != orig);
                    }
                }
                tally.applied_mismatch += usize::from(ex.mlm_labels[p + 1] != i64::from(orig));
            }
            let labelled = ex.mlm_labels.iter().filter(|&&l| l >= 0).count();
            tally.applied_mismatch += usize::from(labelled != plan.len());
        }
    }
    ensure(
        violations.is_empty(),
        format!(
            "{} violations, first: {}",
            violations.len(),
            violations.first().map_or("", |s| s)
        ),
    )?;
    Ok((
        format!("500 docs x 20 seeds ({with_expr} docs with expressions), 0 violations"),
        tally,
    ))
}

fn criterion_budget() -> Outcome {
    masking_runs().map(|(s, _)| s)
}

fn criterion_801010() -> Outcome {
    let (_, t) = masking_runs()?;
    ensure(
        t.positions >= 10_000,
        format!("only {} masked positions", t.positions),
    )?;
    ensure(
        t.applied_mismatch == 0,
        format!(
            "{} applied tokens disagree with their action",
            t.applied_mismatch
        ),
    )?;
    let f = |k: usize| k as f64 / t.positions as f64;
    let (m, r, k) = (f(t.mask), f(t.random), f(t.keep));
    ensure(
        (m - 0.8).abs() <= 0.02 && (r - 0.1).abs() <= 0.015 && (k - 0.1).abs() <= 0.015,
        format!("MASK {m:.4} RANDOM {r:.4} KEEP {k:.4}"),
    )?;
    Ok(format!(
        "{} positions: MASK {m:.4} RANDOM {r:.4} KEEP {k:.4}",
        t.positions
    ))
}

fn criterion_tir() -> Outcome {
    let docs = random_documents(1200, 4);
    let tok = TokenizerConfig::default();
    let vocab =
        build_vocab(docs.iter().map(|d| &d.doc), &tok, 10_000, 1).map_err(|e| e.to_string())?;
    let pool = collect_expression_pool(&docs);
    let (mut slots, mut replaced, mut bad, mut forced) = (0usize, 0usize, Vec::new(), 0usize);
    let mut epoch = 0;
    while slots < 10_000 {
        for d in &docs {
            let td = tokenize(&d.doc, &vocab, &d.expressions, &tok).map_err(|e| e.to_string())?;
            let ex = build_tir(
                &d.doc,
                &td,
                &pool,
                0.5,
                &vocab,
                &tok,
                None,
                mix_seed(9, &d.doc.id, epoch),
            );
            let prefix: Vec<u32> = std::iter::once(CLS)
                .chain(
                    timeaware_core::corpus::pretokenize(&d.doc.timestamp.render(), &tok)
                        .into_iter()
                        .map(|(w, _, _)| vocab.id(&w)),
                )
                .chain(std::iter::once(SEP))
                .collect();
            if ex.input_ids[..ex.prefix_len] != prefix[..] {
                bad.push(format!("{}: prefix altered", d.doc.id));
            }
            for s in &ex.slots {
                slots += 1;
                forced += usize::from(s.forced_kept);
                if s.boundary_left + 1 < ex.prefix_len {
                    bad.push(format!("{}: slot inside prefix", d.doc.id));
                }
                if s.replaced {
                    replaced += 1;
                    match s.replacement {
                        Some(r)
                            if r.granularity() == s.original.granularity() && r != s.original => {}
                        other => bad.push(format!(
                            "{}: {} replaced by {other:?}",
                            d.doc.id, s.original
                        )),
                    }
                } else if s.replacement.is_some() {
                    bad.push(format!("{}: kept slot has replacement", d.doc.id));
                }
            }
        }
        epoch += 1;
    }
    ensure(
        bad.is_empty(),
        format!(
            "{} violations, first: {}",
            bad.len(),
            bad.first().map_or("", |s| s)
        ),
    )?;
    let frac = replaced as f64 / slots as f64;
    ensure(
        (frac - 0.5).abs() <= 0.02,
        format!("replaced fraction {frac:.4} over {slots} slots ({forced} forced kept)"),
    )?;
    Ok(format!("{slots} slots: replaced {frac:.4}, {forced} forced kept, all same-granularity and changed, prefix intact"))
}

// ---------------------------------------------------------------------------
// 5-6

fn criterion_gradcheck() -> Outcome {
    let mut parts = Vec::new();
    for (name, case) in [
        ("TAMLM+DTP", GradCheckCase::JointTamlmDtp),
        ("TIR", GradCheckCase::Tir),
        ("embeddings", GradCheckCase::EmbeddingsOnly),
    ] {
        let r = grad_check(case).map_err(|e| e.to_string())?;
        ensure(
            r.max_rel_error < 1e-4,
            format!(
                "{name}: max rel error {:.3e} in {}",
                r.max_rel_error, r.worst_tensor
            ),
        )?;
        parts.push(format!(
            "{name} {:.2e} ({} coords)",
            r.max_rel_error, r.checked
        ));
    }
    Ok(format!("max rel error: {}", parts.join(", ")))
}

fn criterion_random_guess() -> Outcome {
    let space = LabelSpace::new(
        TimePoint::year(1987),
        TimePoint::year(2007),
        Granularity::Year,
    )
    .map_err(|e| e.to_string())?;
    let golds: Vec<TimePoint> = (0..50).flat_map(|_| space.points()).collect();
    let (acc, err) = random_guess(&space, &golds, 1000, 6).map_err(|e| e.to_string())?;
    let (acc0, mae0) = (100.0 / 21.0, (21.0f64 * 21.0 - 1.0) / 63.0);
    ensure(
        (acc - acc0).abs() <= 0.3 && (err - mae0).abs() <= 0.15,
        format!("ACC {acc:.3} vs {acc0:.3}, MAE {err:.3} vs {mae0:.3}"),
    )?;
    Ok(format!(
        "ACC {acc:.3} (analytic {acc0:.3}), MAE {err:.3} (analytic {mae0:.3})"
    ))
}

// ---------------------------------------------------------------------------
// 7-9. learnability on synthetic corpora

const TOK: TokenizerConfig = TokenizerConfig {
    lowercase: false,
    max_len: Some(128),
};

struct Synth {
    train: Vec<TaggedDocument>,
    test: Vec<TaggedDocument>,
    space: LabelSpace,
}

fn synth(noise: f64) -> Result<Synth, String> {
    let cfg = SynthConfig {
        noise,
        seed: 1,
        ..SynthConfig::default()
    };
    let train = synth_corpus(&cfg)?
        .into_iter()
        .map(TaggedDocument::tag)
        .collect();
    let test = synth_corpus(&SynthConfig {
        docs: 480,
        seed: 2,
        ..cfg.clone()
    })?
    .into_iter()
    .map(|mut d| {
        d.id = format!("heldout-{}", d.id);
        TaggedDocument::tag(d)
    })
    .collect();
    Ok(Synth {
        train,
        test,
        space: cfg.space()?,
    })
}

fn desk_train(objectives: &str, epochs: usize) -> TrainConfig {
    TrainConfig {
        learning_rate: 1e-3,
        batch_size: 16,
        grad_accumulation: 1,
        epochs,
        objectives: objectives.parse().expect("valid set"),
        seed: 3,
        ..TrainConfig::default()
    }
}

fn pretrain_on(
    s: &Synth,
    vocab: &timeaware_core::Vocab,
    objectives: &str,
    epochs: usize,
) -> Result<Model<f32>, String> {
    let set: timeaware_core::ObjectiveSet = objectives.parse()?;
    let dtp = set.contains(timeaware_core::Objective::Dtp);
    let builder = DatasetBuilder {
        objectives: set,
        params: ObjectiveParams::default(),
        space: Some(s.space),
        vocab,
        tokenizer: TOK,
        pool: collect_expression_pool(&s.train),
        global_seed: 7,
    };
    let cfg = ModelConfig {
        vocab_size: vocab.len(),
        dtp_classes: dtp.then(|| s.space.size()),
        seed: 1,
        ..ModelConfig::default()
    };
    let source = DynamicSource {
        builder,
        docs: &s.train,
    };
    let model = Model::init(cfg).map_err(|e| e.to_string())?;
    Ok(pretrain(model, &source, &desk_train(objectives, epochs))
        .map_err(|e| e.to_string())?
        .model)
}

fn criterion_dtp() -> Outcome {
    let mut accs = Vec::new();
    for noise in [0.0, 1.0] {
        let s = synth(noise)?;
        let vocab = build_vocab(s.train.iter().map(|d| &d.doc), &TOK, 5000, 1)
            .map_err(|e| e.to_string())?;
        let model = pretrain_on(&s, &vocab, "TAMLM+DTP", 5)?;
        accs.push(
            timestamp_accuracy(&model, &s.test, &vocab, &TOK, &s.space)
                .map_err(|e| e.to_string())?,
        );
    }
    let chance = 100.0 / 48.0;
    let msg = format!("held-out ACC {:.2}% at noise 0 (need >= 90), {:.2}% at noise 1 (need <= {:.2}); chance {chance:.2}%", accs[0], accs[1], 3.0 * chance);
    ensure(accs[0] >= 90.0 && accs[1] <= 3.0 * chance, msg.clone())?;
    Ok(msg)
}

fn criterion_tamlm_vs_mlm() -> Outcome {
    let s = synth(0.0)?;
    let vocab =
        build_vocab(s.train.iter().map(|d| &d.doc), &TOK, 5000, 1).map_err(|e| e.to_string())?;
    let mut acc = Vec::new();
    for obj in ["TAMLM", "MLM"] {
        let model = pretrain_on(&s, &vocab, obj, 3)?;
        acc.push(temporal_recovery(&model, &s.test, &vocab, &TOK).map_err(|e| e.to_string())?);
    }
    let msg = format!(
        "temporal-token recovery TAMLM {:.2}% vs MLM {:.2}% over {} tokens (gap {:.2}, need >= 5)",
        acc[0].0,
        acc[1].0,
        acc[0].1,
        acc[0].0 - acc[1].0
    );
    ensure(acc[0].0 - acc[1].0 >= 5.0, msg.clone())?;
    Ok(msg)
}

fn criterion_probe() -> Outcome {
    let s = synth(0.0)?;
    let train = synth_events(&EventSynthConfig {
        events: 420,
        seed: 5,
        ..Default::default()
    })?;
    let test = synth_events(&EventSynthConfig {
        events: 210,
        seed: 6,
        ..Default::default()
    })?;
    let as_doc = |e: &EventExample| Document {
        id: e.id.clone(),
        timestamp: TimePoint::day(2000, 1, 1).unwrap(),
        text: e.text.clone(),
    };
    let event_docs: Vec<Document> = train.iter().map(as_doc).collect();
    let vocab = build_vocab(
        s.train.iter().map(|d| &d.doc).chain(&event_docs),
        &TOK,
        5000,
        1,
    )
    .map_err(|e| e.to_string())?;
    let years = LabelSpace::new(
        TimePoint::year(1987),
        TimePoint::year(2007),
        Granularity::Year,
    )
    .map_err(|e| e.to_string())?;
    let base = pretrain_on(&s, &vocab, "TAMLM+DTP", 2)?;
    let examples = train
        .iter()
        .map(|e| e.to_classifier(&vocab, &TOK, &years, 128))
        .collect::<Result<Vec<ClassifierExample>, _>>()
        .map_err(|e| e.to_string())?;
    let ft = TrainConfig {
        learning_rate: 5e-4,
        batch_size: 16,
        grad_accumulation: 1,
        epochs: 10,
        seed: 4,
        ..TrainConfig::default()
    };
    let tuned = finetune(&base, &examples, years.size(), &ft)
        .map_err(|e| e.to_string())?
        .model;
    let lists = test
        .iter()
        .map(
            |e| Ok(similarity_rank(&tuned, &vocab, &TOK, &e.text, &years)?.with_relevant([e.time])),
        )
        .collect::<Result<Vec<RankedDates>, timeaware_core::eval::EvalError>>()
        .map_err(|e| e.to_string())?;
    ensure(
        lists.iter().all(|l| l.ranked.len() == 21),
        "ranking is not over 21 candidates",
    )?;
    let score = mrr(&lists).map_err(|e| e.to_string())?;
    let rg: f64 = (1..=21).map(|r| 1.0 / r as f64).sum::<f64>() / 21.0;
    let msg = format!(
        "MRR {score:.4} over {} held-out events (need >= 0.5; random {rg:.4})",
        lists.len()
    );
    ensure(score >= 0.5, msg.clone())?;
    Ok(msg)
}

// ---------------------------------------------------------------------------
// 10. metric oracles

fn oracle_distance(a: &TimePoint, b: &TimePoint, g: Granularity) -> u64 {
    let key = |t: &TimePoint| (t.year_value(), t.month_value().unwrap_or(1));
    match g {
        Granularity::Year => {
            let (mut lo, hi) = if a.year_value() <= b.year_value() {
                (a.year_value(), b.year_value())
            } else {
                (b.year_value(), a.year_value())
            };
            let mut n = 0;
            while lo < hi {
                lo += 1;
                n += 1;
            }
            n
        }
        Granularity::Month => month_walk_distance(key(a), key(b)),
        Granularity::Day => unreachable!("not enumerated"),
    }
}

fn oracle_acc_mae(preds: &[Prediction], g: Granularity) -> (f64, f64) {
    let same = |p: &Prediction| match g {
        Granularity::Year => p.predicted.year_value() == p.gold.year_value(),
        _ => {
            p.predicted.year_value() == p.gold.year_value()
                && p.predicted.month_value() == p.gold.month_value()
        }
    };
    let hits = preds.iter().filter(|p| same(p)).count() as f64;
    let total: u64 = preds
        .iter()
        .map(|p| oracle_distance(&p.predicted, &p.gold, g))
        .sum();
    (
        hits * 100.0 / preds.len() as f64,
        total as f64 / preds.len() as f64,
    )
}

fn oracle_ap(order: &[usize], relevant: &BTreeSet<usize>) -> f64 {
    let mut sum = 0.0;
    for (k, item) in order.iter().enumerate() {
        if relevant.contains(item) {
            let above = order[..=k].iter().filter(|x| relevant.contains(x)).count();
            sum += above as f64 / (k + 1) as f64;
        }
    }
    sum / relevant.len() as f64
}

fn ranked(order: &[usize], relevant: &BTreeSet<usize>) -> RankedDates {
    let t = |i: usize| TimePoint::year(2000 + i as i32);
    RankedDates {
        query: String::new(),
        ranked: order
            .iter()
            .enumerate()
            .map(|(r, &i)| (t(i), -(r as f64)))
            .collect(),
        relevant: relevant.iter().map(|&i| t(i)).collect(),
        zero_vectors: Vec::new(),
    }
}

fn criterion_metrics() -> Outcome {
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-12;
    let mut checked = 0usize;
    let domain = [
        tp_month((2000, 11)),
        tp_month((2000, 12)),
        tp_month((2001, 1)),
    ];
    for n in 1..=6usize {
        for code in 0..9usize.pow(n as u32) {
            let mut c = code;
            let preds: Vec<Prediction> = (0..n)
                .map(|_| {
                    let (p, g) = (domain[c % 3], domain[(c / 3) % 3]);
                    c /= 9;
                    Prediction {
                        predicted: p,
                        gold: g,
                        granularity: Granularity::Month,
                    }
                })
                .collect();
            for g in [Granularity::Month, Granularity::Year] {
                let preds: Vec<Prediction> = preds
                    .iter()
                    .map(|p| Prediction {
                        granularity: g,
                        ..*p
                    })
                    .collect();
                let (a, m) = oracle_acc_mae(&preds, g);
                let (ga, gm) = (
                    accuracy(&preds).map_err(|e| e.to_string())?,
                    mae(&preds, g).map_err(|e| e.to_string())?,
                );
                ensure(
                    close(a, ga) && close(m, gm),
                    format!("acc/mae mismatch on {preds:?}"),
                )?;
                checked += 1;
            }
        }
    }
    for len in 1..=6usize {
        let order: Vec<usize> = (0..len).collect();
        let mut lists = Vec::new();
        let mut want_ap = Vec::new();
        for mask in 1..(1u32 << len) {
            let rel: BTreeSet<usize> = (0..len).filter(|i| mask & (1 << i) != 0).collect();
            let l = ranked(&order, &rel);
            let ap = oracle_ap(&order, &rel);
            ensure(
                close(average_precision(&l), ap),
                format!("AP mismatch len {len} mask {mask:b}"),
            )?;
            let first = *rel.iter().next().unwrap();
            ensure(
                close(reciprocal_rank(&l), 1.0 / (first + 1) as f64),
                format!("RR mismatch len {len} mask {mask:b}"),
            )?;
            lists.push(l);
            want_ap.push(ap);
            checked += 2;
        }
        let want_map = want_ap.iter().sum::<f64>() / want_ap.len() as f64;
        ensure(
            close(map(&lists).map_err(|e| e.to_string())?, want_map),
            format!("MAP mismatch at len {len}"),
        )?;
        let singles: Vec<RankedDates> = (0..len)
            .map(|i| ranked(&order, &BTreeSet::from([i])))
            .collect();
        let want_mrr = (0..len).map(|i| 1.0 / (i + 1) as f64).sum::<f64>() / len as f64;
        ensure(
            close(mrr(&singles).map_err(|e| e.to_string())?, want_mrr),
            format!("MRR mismatch at len {len}"),
        )?;
    }
    let mut rng = rng_from_seed(10);
    for _ in 0..1000 {
        let n = rng.random_range(7..200);
        let g = if rng.random::<bool>() {
            Granularity::Month
        } else {
            Granularity::Year
        };
        let t = |rng: &mut rand_chacha::ChaCha8Rng| {
            tp_month((rng.random_range(1990..2000), rng.random_range(1..=12)))
        };
        let preds: Vec<Prediction> = (0..n)
            .map(|_| Prediction {
                predicted: t(&mut rng),
                gold: t(&mut rng),
                granularity: g,
            })
            .collect();
        let (a, m) = oracle_acc_mae(&preds, g);
        ensure(
            close(a, accuracy(&preds).map_err(|e| e.to_string())?)
                && close(m, mae(&preds, g).map_err(|e| e.to_string())?),
            "random acc/mae mismatch",
        )?;
        let len = rng.random_range(7..40);
        let mut order: Vec<usize> = (0..len).collect();
        rand::seq::SliceRandom::shuffle(order.as_mut_slice(), &mut rng);
        let rel: BTreeSet<usize> = (0..len)
            .filter(|_| rng.random::<f64>() < 0.3)
            .chain([order[len - 1]])
            .collect();
        let l = ranked(&order, &rel);
        ensure(
            close(average_precision(&l), oracle_ap(&order, &rel)),
            "random AP mismatch",
        )?;
        let first = order.iter().position(|x| rel.contains(x)).unwrap();
        ensure(
            close(reciprocal_rank(&l), 1.0 / (first + 1) as f64),
            "random RR mismatch",
        )?;
        checked += 3;
    }
    Ok(format!(
        "{checked} comparisons against enumeration oracles, all exact to 1e-12"
    ))
}

// ---------------------------------------------------------------------------
// 11. end-to-end determinism through the binary

const TINY_CONFIG: &str = "seed = 11
[labels]
start = 1987-01
end = 1990-12
[model]
d_model = 32
n_layers = 1
n_heads = 2
d_ff = 64
max_len = 128
[pretrain]
learning_rate = 1e-3
epochs = 2
batch_size = 8
grad_accumulation = 2
";

fn pipeline(dir: &Path) -> Result<Vec<(String, Vec<u8>)>, String> {
    std::fs::write(dir.join("run.ini"), TINY_CONFIG).map_err(|e| e.to_string())?;
    let steps: [&[&str]; 6] = [
        &["synth", "--docs", "200", "--out", "corpus.jsonl"],
        &["tag", "--corpus", "corpus.jsonl", "--out", "tagged.jsonl"],
        &[
            "build-vocab",
            "--tagged",
            "tagged.jsonl",
            "--out",
            "vocab.txt",
        ],
        &[
            "build-dataset",
            "--tagged",
            "tagged.jsonl",
            "--vocab",
            "vocab.txt",
            "--objectives",
            "TAMLM+DTP",
            "--out",
            "dataset.jsonl",
        ],
        &[
            "build-dataset",
            "--tagged",
            "tagged.jsonl",
            "--vocab",
            "vocab.txt",
            "--objectives",
            "MLM+TIR",
            "--out",
            "tir.jsonl",
        ],
        &[
            "pretrain",
            "--dataset",
            "dataset.jsonl",
            "--vocab",
            "vocab.txt",
            "--objectives",
            "TAMLM+DTP",
            "--out",
            "model.ckpt",
        ],
    ];
    for args in steps {
        let out = Command::new(env!("CARGO_BIN_EXE_timeaware"))
            .current_dir(dir)
            .args(["--config", "run.ini"])
            .args(args)
            .output()
            .map_err(|e| e.to_string())?;
        ensure(
            out.status.success(),
            format!("{args:?}: {}", String::from_utf8_lossy(&out.stderr)),
        )?;
    }
    [
        "tagged.jsonl",
        "dataset.jsonl",
        "tir.jsonl",
        "model.ckpt",
        "model.ckpt.loss.csv",
    ]
    .iter()
    .map(|f| {
        Ok((
            f.to_string(),
            std::fs::read(dir.join(f)).map_err(|e| e.to_string())?,
        ))
    })
    .collect()
}

fn criterion_determinism() -> Outcome {
    let (a, b) = (
        tempfile::tempdir().map_err(|e| e.to_string())?,
        tempfile::tempdir().map_err(|e| e.to_string())?,
    );
    let (fa, fb) = (pipeline(a.path())?, pipeline(b.path())?);
    for ((name, x), (_, y)) in fa.iter().zip(&fb) {
        ensure(x == y, format!("{name} differs between runs"))?;
    }
    let sizes: Vec<String> = fa
        .iter()
        .map(|(n, d)| format!("{n} {}B", d.len()))
        .collect();
    Ok(format!("two runs byte-identical: {}", sizes.join(", ")))
}

// ---------------------------------------------------------------------------

fn main() {
    let criteria: [Criterion; 11] = [
        (1, "calendar oracle", 10, criterion_calendar),
        (2, "TAMLM budget law", 30, criterion_budget),
        (3, "80/10/10 law", 30, criterion_801010),
        (4, "TIR laws", 30, criterion_tir),
        (5, "gradient check", 60, criterion_gradcheck),
        (6, "random-guess reproduction", 10, criterion_random_guess),
        (7, "learnability (DTP)", 600, criterion_dtp),
        (
            8,
            "learnability (TAMLM vs MLM)",
            1200,
            criterion_tamlm_vs_mlm,
        ),
        (9, "probe sanity", 600, criterion_probe),
        (10, "metric oracles", 30, criterion_metrics),
        (11, "determinism", 300, criterion_determinism),
    ];
    let filter: Vec<u32> = std::env::args()
        .skip(1)
        .filter_map(|a| a.parse().ok())
        .collect();
    let mut failed = 0;
    for (id, name, budget, run) in criteria {
        if !filter.is_empty() && !filter.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or(p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or("panic".into()))
        });
        let took = start.elapsed();
        let result = match result {
            Ok(msg) if took > Duration::from_secs(budget) => Err(format!("{msg}; over budget")),
            r => r,
        };
        let (tag, msg) = match &result {
            Ok(m) => ("PASS", m),
            Err(m) => ("FAIL", m),
        };
        failed += usize::from(result.is_err());
        println!(
            "{tag} [{id:>2}] {name}: {msg} ({:.1}s / {budget}s)",
            took.as_secs_f64()
        );
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
