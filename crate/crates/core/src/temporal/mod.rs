//! Temporal expressions: recognition, normalization, and calendar values.

pub mod calendar;
mod normalize;
mod recognize;
mod rules;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use normalize::normalize_surface;
pub use recognize::recognize;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TemporalError {
    #[error("no normalization rule applies to {0:?}")]
    UnresolvableExpression(String),
    #[error("cannot refine {from} to the finer granularity {to}")]
    GranularityRefinement { from: Granularity, to: Granularity },
    #[error("invalid calendar date {0}")]
    InvalidDate(String),
    #[error("anchor must have day granularity, got {0}")]
    AnchorNotDay(TimePoint),
}

/// Calendar resolution. Ordered coarse to fine: `Year < Month < Day`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Granularity {
    Year,
    Month,
    Day,
}

impl Granularity {
    pub const ALL: [Granularity; 3] = [Granularity::Year, Granularity::Month, Granularity::Day];

    pub fn as_str(self) -> &'static str {
        match self {
            Granularity::Year => "year",
            Granularity::Month => "month",
            Granularity::Day => "day",
        }
    }
}

impl fmt::Display for Granularity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Granularity {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "year" | "y" => Ok(Granularity::Year),
            "month" | "m" => Ok(Granularity::Month),
            "day" | "d" => Ok(Granularity::Day),
            other => Err(format!("unknown granularity {other:?}")),
        }
    }
}

pub const MONTH_NAMES: [&str; 12] = [
    "January",
    "February",
    "March",
    "April",
    "May",
    "June",
    "July",
    "August",
    "September",
    "October",
    "November",
    "December",
];

/// A civil calendar value at an explicit granularity.
///
/// The granularity is carried by which fields are present, so a month without
/// a year-month or a day without a month cannot be represented. Ordering is
/// chronological, with a coarser point sorting before its refinements.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TimePoint {
    year: i32,
    month: Option<u8>,
    day: Option<u8>,
}

impl TimePoint {
    pub fn year(year: i32) -> Self {
        TimePoint {
            year,
            month: None,
            day: None,
        }
    }

    pub fn month(year: i32, month: u8) -> Result<Self, TemporalError> {
        if !(1..=12).contains(&month) {
            return Err(TemporalError::InvalidDate(format!("{year:04}-{month:02}")));
        }
        Ok(TimePoint {
            year,
            month: Some(month),
            day: None,
        })
    }

    pub fn day(year: i32, month: u8, day: u8) -> Result<Self, TemporalError> {
        if !(1..=12).contains(&month) || day == 0 || day > calendar::days_in_month(year, month) {
            return Err(TemporalError::InvalidDate(format!(
                "{year:04}-{month:02}-{day:02}"
            )));
        }
        Ok(TimePoint {
            year,
            month: Some(month),
            day: Some(day),
        })
    }

    /// Day-granularity point for a day number (days since 1970-01-01).
    pub fn from_day_number(days: i64) -> Self {
        let (y, m, d) = calendar::civil_from_days(days);
        TimePoint {
            year: y,
            month: Some(m),
            day: Some(d),
        }
    }

    pub fn year_value(&self) -> i32 {
        self.year
    }

    pub fn month_value(&self) -> Option<u8> {
        self.month
    }

    pub fn day_value(&self) -> Option<u8> {
        self.day
    }

    pub fn granularity(&self) -> Granularity {
        match (self.month, self.day) {
            (_, Some(_)) => Granularity::Day,
            (Some(_), None) => Granularity::Month,
            _ => Granularity::Year,
        }
    }

    /// Drops fields finer than `g`.
    pub fn truncate(&self, g: Granularity) -> Result<TimePoint, TemporalError> {
        if g > self.granularity() {
            return Err(TemporalError::GranularityRefinement {
                from: self.granularity(),
                to: g,
            });
        }
        Ok(match g {
            Granularity::Year => TimePoint::year(self.year),
            Granularity::Month => TimePoint {
                year: self.year,
                month: self.month,
                day: None,
            },
            Granularity::Day => *self,
        })
    }

    /// Linear position on the contiguous `g`-sequence: years, months since
    /// year 0, or day numbers.
    pub fn index(&self, g: Granularity) -> Result<i64, TemporalError> {
        let t = self.truncate(g)?;
        Ok(match g {
            Granularity::Year => i64::from(t.year),
            Granularity::Month => i64::from(t.year) * 12 + i64::from(t.month.unwrap_or(1)) - 1,
            Granularity::Day => {
                calendar::days_from_civil(t.year, t.month.unwrap_or(1), t.day.unwrap_or(1))
            }
        })
    }

    /// Inverse of [`TimePoint::index`].
    pub fn from_index(index: i64, g: Granularity) -> TimePoint {
        match g {
            Granularity::Year => TimePoint::year(index as i32),
            Granularity::Month => TimePoint {
                year: index.div_euclid(12) as i32,
                month: Some(index.rem_euclid(12) as u8 + 1),
                day: None,
            },
            Granularity::Day => TimePoint::from_day_number(index),
        }
    }

    /// Day-granularity point `n` days later (negative for earlier).
    pub(crate) fn add_days(&self, n: i64) -> Result<TimePoint, TemporalError> {
        Ok(TimePoint::from_day_number(
            self.index(Granularity::Day)? + n,
        ))
    }

    /// Canonical English surface form.
    pub fn render(&self) -> String {
        match (self.month, self.day) {
            (Some(m), Some(d)) => {
                format!("{} {}, {}", MONTH_NAMES[usize::from(m) - 1], d, self.year)
            }
            (Some(m), None) => format!("{} {}", MONTH_NAMES[usize::from(m) - 1], self.year),
            _ => self.year.to_string(),
        }
    }
}

/// Distance between `a` and `b` in units of `g`.
pub fn distance(a: &TimePoint, b: &TimePoint, g: Granularity) -> Result<u64, TemporalError> {
    Ok(a.index(g)?.abs_diff(b.index(g)?))
}

impl fmt::Display for TimePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}", self.year)?;
        if let Some(m) = self.month {
            write!(f, "-{m:02}")?;
        }
        if let Some(d) = self.day {
            write!(f, "-{d:02}")?;
        }
        Ok(())
    }
}

impl FromStr for TimePoint {
    type Err = TemporalError;

    /// Parses `YYYY`, `YYYY-MM`, or `YYYY-MM-DD`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || TemporalError::InvalidDate(s.to_string());
        let parts: Vec<&str> = s.trim().split('-').collect();
        let num = |p: &str| -> Result<i64, TemporalError> {
            if p.is_empty() || !p.bytes().all(|b| b.is_ascii_digit()) {
                return Err(bad());
            }
            p.parse::<i64>().map_err(|_| bad())
        };
        let year = i32::try_from(num(parts[0])?).map_err(|_| bad())?;
        if parts[0].len() != 4 {
            return Err(bad());
        }
        let small = |p: &str| -> Result<u8, TemporalError> {
            if p.len() != 2 {
                return Err(bad());
            }
            u8::try_from(num(p)?).map_err(|_| bad())
        };
        match parts.len() {
            1 => Ok(TimePoint::year(year)),
            2 => TimePoint::month(year, small(parts[1])?),
            3 => TimePoint::day(year, small(parts[1])?, small(parts[2])?),
            _ => Err(bad()),
        }
    }
}

impl Serialize for TimePoint {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for TimePoint {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// A recognized span of text, in code-point offsets, half-open.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TemporalExpression {
    pub span_start: usize,
    pub span_end: usize,
    pub surface: String,
    pub normalized: Option<TimePoint>,
    pub resolvable: bool,
}

/// Recognizes every expression in `text` and resolves the resolvable ones
/// against `anchor`. After tagging, `resolvable` holds exactly when
/// `normalized` is present.
pub fn tag(text: &str, anchor: &TimePoint) -> Result<Vec<TemporalExpression>, TemporalError> {
    if anchor.granularity() != Granularity::Day {
        return Err(TemporalError::AnchorNotDay(*anchor));
    }
    let mut exprs = recognize(text);
    for e in &mut exprs {
        if e.resolvable {
            match normalize(e, anchor) {
                Ok(t) => e.normalized = Some(t),
                Err(_) => e.resolvable = false,
            }
        }
    }
    Ok(exprs)
}

/// Resolves a recognized expression against a day-granularity anchor.
pub fn normalize(
    expr: &TemporalExpression,
    anchor: &TimePoint,
) -> Result<TimePoint, TemporalError> {
    normalize_surface(&expr.surface, anchor)
}
