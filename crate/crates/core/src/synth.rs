//! Synthetic corpora whose text carries timestamp-correlated tokens, used
//! to check that the objectives are learnable.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::corpus::Document;
use crate::eval::EventExample;
use crate::objectives::{rng_from_seed, LabelSpace};
use crate::temporal::{Granularity, TimePoint, MONTH_NAMES};

const CONSONANTS: &[u8] = b"bdfgklmnprstvz";
const VOWELS: &[u8] = b"aeiou";
const RESERVED: &[&str] = &[
    "one", "two", "three", "four", "five", "six", "seven", "eight", "nine", "ten", "eleven",
    "twelve", "late", "mid", "early", "ago", "in", "the", "last", "next", "week", "month", "year",
    "days", "today",
];

/// `size` distinct lowercase pseudo-words that no recognizer rule reacts
/// to. Independent of any seed, so vocabularies are comparable across runs.
pub fn filler_words(size: usize) -> Vec<String> {
    let mut rng = rng_from_seed(0x6669_6c6c);
    let mut out = Vec::with_capacity(size);
    let mut seen = std::collections::HashSet::new();
    while out.len() < size {
        let syllables = rng.random_range(2..=3);
        let w: String = (0..syllables)
            .flat_map(|_| {
                let c = CONSONANTS[rng.random_range(0..CONSONANTS.len())] as char;
                let v = VOWELS[rng.random_range(0..VOWELS.len())] as char;
                [c, v]
            })
            .collect();
        if !RESERVED.contains(&w.as_str()) && seen.insert(w.clone()) {
            out.push(w);
        }
    }
    out
}

/// Marker token of a time point: `ed198705` for months, `yr1987` for years,
/// `dy19870512` for days.
pub fn marker_token(t: &TimePoint) -> String {
    match (t.month_value(), t.day_value()) {
        (Some(m), Some(d)) => format!("dy{:04}{m:02}{d:02}", t.year_value()),
        (Some(m), None) => format!("ed{:04}{m:02}", t.year_value()),
        _ => format!("yr{:04}", t.year_value()),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub docs: usize,
    /// First and last month of the timestamp span.
    pub start: TimePoint,
    pub end: TimePoint,
    /// Probability that each correlated element is drawn from a random
    /// class instead of the document's own.
    pub noise: f64,
    pub filler_vocab: usize,
    pub words_per_sentence: (usize, usize),
    /// Correlated temporal expressions per document.
    pub correlated: usize,
    /// Uncorrelated temporal expressions per document.
    pub decoys: usize,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            docs: 2000,
            start: TimePoint::month(1987, 1).expect("valid"),
            end: TimePoint::month(1990, 12).expect("valid"),
            noise: 0.0,
            filler_vocab: 300,
            words_per_sentence: (5, 9),
            correlated: 2,
            decoys: 1,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn space(&self) -> Result<LabelSpace, String> {
        let start = self
            .start
            .truncate(Granularity::Month)
            .map_err(|e| e.to_string())?;
        let end = self
            .end
            .truncate(Granularity::Month)
            .map_err(|e| e.to_string())?;
        LabelSpace::new(start, end, Granularity::Month).map_err(|e| e.to_string())
    }
}

fn sentence<R: Rng>(
    rng: &mut R,
    words: &[String],
    range: (usize, usize),
    inserts: &[String],
) -> String {
    let n = rng.random_range(range.0..=range.1.max(range.0));
    let mut parts: Vec<String> = (0..n)
        .map(|_| words[rng.random_range(0..words.len())].clone())
        .collect();
    for ins in inserts {
        let at = rng.random_range(0..=parts.len());
        parts.insert(at, ins.clone());
    }
    let mut s = parts.join(" ");
    s.push_str(" .");
    s
}

fn content_expression<R: Rng>(rng: &mut R, t: &TimePoint) -> String {
    let month = MONTH_NAMES[t.month_value().unwrap_or(1) as usize - 1];
    match rng.random_range(0..3) {
        0 => format!("in {month} {}", t.year_value()),
        1 => format!(
            "on {month} {}, {}",
            rng.random_range(1..=28),
            t.year_value()
        ),
        _ => format!("during {month} {}", t.year_value()),
    }
}

/// Documents with one timestamp per month class in round-robin order (so
/// every class appears once `docs ≥ K`), a marker token, correlated
/// month-year expressions, and uncorrelated decoys.
pub fn synth_corpus(cfg: &SynthConfig) -> Result<Vec<Document>, String> {
    if !(0.0..=1.0).contains(&cfg.noise) {
        return Err(format!("noise {} outside [0, 1]", cfg.noise));
    }
    let space = cfg.space()?;
    let k = space.size();
    let words = filler_words(cfg.filler_vocab.max(1));
    let mut rng = rng_from_seed(cfg.seed);
    let mut classes: Vec<usize> = (0..cfg.docs).map(|i| i % k).collect();
    classes.shuffle(&mut rng);
    let mut out = Vec::with_capacity(cfg.docs);
    for (i, &class) in classes.iter().enumerate() {
        let month = space.point(class).expect("in range");
        let ts = TimePoint::day(
            month.year_value(),
            month.month_value().expect("month granularity"),
            rng.random_range(1..=28),
        )
        .expect("valid day");
        let pick = |rng: &mut rand_chacha::ChaCha8Rng| {
            if rng.random::<f64>() < cfg.noise {
                space.point(rng.random_range(0..k)).expect("in range")
            } else {
                month
            }
        };
        let marker = marker_token(&pick(&mut rng));
        let mut sentences = vec![sentence(
            &mut rng,
            &words,
            cfg.words_per_sentence,
            &[marker],
        )];
        for _ in 0..cfg.correlated {
            let t = pick(&mut rng);
            let e = content_expression(&mut rng, &t);
            sentences.push(sentence(&mut rng, &words, cfg.words_per_sentence, &[e]));
        }
        for _ in 0..cfg.decoys {
            let t = TimePoint::month(rng.random_range(1950..=2010), rng.random_range(1..=12))
                .expect("valid");
            let e = if rng.random::<bool>() {
                format!("back in {}", t.year_value())
            } else {
                content_expression(&mut rng, &t)
            };
            sentences.push(sentence(&mut rng, &words, cfg.words_per_sentence, &[e]));
        }
        sentences.shuffle(&mut rng);
        out.push(Document {
            id: format!("synth-{i:06}"),
            timestamp: ts,
            text: sentences.join(" "),
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EventSynthConfig {
    pub events: usize,
    pub start_year: i32,
    pub end_year: i32,
    /// Probability that the year numeral is drawn from a random year.
    pub noise: f64,
    pub filler_vocab: usize,
    pub words: (usize, usize),
    pub seed: u64,
}

impl Default for EventSynthConfig {
    fn default() -> Self {
        EventSynthConfig {
            events: 420,
            start_year: 1987,
            end_year: 2007,
            noise: 0.0,
            filler_vocab: 300,
            words: (6, 12),
            seed: 0,
        }
    }
}

/// Event descriptions whose text contains the numeral of the event's year,
/// years assigned round-robin over the span.
pub fn synth_events(cfg: &EventSynthConfig) -> Result<Vec<EventExample>, String> {
    if cfg.end_year < cfg.start_year {
        return Err(format!(
            "empty year span {}..{}",
            cfg.start_year, cfg.end_year
        ));
    }
    let k = (cfg.end_year - cfg.start_year + 1) as usize;
    let words = filler_words(cfg.filler_vocab.max(1));
    let mut rng = rng_from_seed(cfg.seed ^ 0x6576_656e);
    let mut out = Vec::with_capacity(cfg.events);
    for i in 0..cfg.events {
        let year = cfg.start_year + (i % k) as i32;
        let shown = if rng.random::<f64>() < cfg.noise {
            cfg.start_year + rng.random_range(0..k) as i32
        } else {
            year
        };
        let text = sentence(&mut rng, &words, cfg.words, &[shown.to_string()]);
        out.push(EventExample {
            id: format!("event-{i:05}"),
            text,
            time: TimePoint::year(year),
            document: None,
        });
    }
    out.shuffle(&mut rng);
    Ok(out)
}
