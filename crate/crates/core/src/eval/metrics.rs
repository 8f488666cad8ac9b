use rand::Rng;

use super::{EvalError, RankedDates};
use crate::objectives::{rng_from_seed, LabelSpace};
use crate::temporal::{distance, Granularity, TimePoint};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Prediction {
    pub predicted: TimePoint,
    pub gold: TimePoint,
    pub granularity: Granularity,
}

/// Percentage of predictions equal to the gold time at their granularity.
pub fn accuracy(preds: &[Prediction]) -> Result<f64, EvalError> {
    if preds.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    let mut hits = 0usize;
    for p in preds {
        if p.predicted.truncate(p.granularity)? == p.gold.truncate(p.granularity)? {
            hits += 1;
        }
    }
    Ok(100.0 * hits as f64 / preds.len() as f64)
}

/// Mean absolute distance in units of `g`.
pub fn mae(preds: &[Prediction], g: Granularity) -> Result<f64, EvalError> {
    if preds.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    let mut total = 0u64;
    for p in preds {
        total += distance(&p.predicted, &p.gold, g)?;
    }
    Ok(total as f64 / preds.len() as f64)
}

/// Mean accuracy and MAE of uniform guesses over `space`, averaged over
/// `trials` independent rounds.
pub fn random_guess(
    space: &LabelSpace,
    golds: &[TimePoint],
    trials: usize,
    seed: u64,
) -> Result<(f64, f64), EvalError> {
    if golds.is_empty() || trials == 0 {
        return Err(EvalError::EmptyInput);
    }
    let g = space.granularity();
    let k = space.size();
    let mut rng = rng_from_seed(seed);
    let (mut acc, mut err) = (0.0, 0.0);
    let mut preds = Vec::with_capacity(golds.len());
    for _ in 0..trials {
        preds.clear();
        for gold in golds {
            let predicted = space.point(rng.random_range(0..k)).expect("index in range");
            preds.push(Prediction {
                predicted,
                gold: *gold,
                granularity: g,
            });
        }
        acc += accuracy(&preds)?;
        err += mae(&preds, g)?;
    }
    Ok((acc / trials as f64, err / trials as f64))
}

/// `1 / rank` of the first relevant item, 0 if none is listed.
pub fn reciprocal_rank(list: &RankedDates) -> f64 {
    list.ranked
        .iter()
        .position(|(t, _)| list.relevant.contains(t))
        .map_or(0.0, |i| 1.0 / (i + 1) as f64)
}

/// Mean over relevant items of precision at their rank, 0 with no
/// relevant items.
pub fn average_precision(list: &RankedDates) -> f64 {
    if list.relevant.is_empty() {
        return 0.0;
    }
    let mut found = 0usize;
    let mut sum = 0.0;
    for (i, (t, _)) in list.ranked.iter().enumerate() {
        if list.relevant.contains(t) {
            found += 1;
            sum += found as f64 / (i + 1) as f64;
        }
    }
    sum / list.relevant.len() as f64
}

pub fn mrr(lists: &[RankedDates]) -> Result<f64, EvalError> {
    if lists.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    Ok(lists.iter().map(reciprocal_rank).sum::<f64>() / lists.len() as f64)
}

pub fn map(lists: &[RankedDates]) -> Result<f64, EvalError> {
    if lists.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    Ok(lists.iter().map(average_precision).sum::<f64>() / lists.len() as f64)
}
