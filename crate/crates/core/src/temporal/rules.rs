//! The rule inventory shared by the recognizer and the normalizer.
//!
//! Each rule is a regex body with named groups. The recognizer wraps every
//! body in word boundaries and scans; the normalizer anchors the body and
//! matches one surface string.

use std::sync::LazyLock;

use regex::Regex;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Rule {
    MonthDayYear,
    MonthYear,
    IsoDate,
    Deictic,
    LastNext,
    Ago,
    InFuture,
    Weekday,
    BareYear,
    Vague,
}

const MONTH: &str =
    "January|February|March|April|May|June|July|August|September|October|November|December";
const WEEKDAY: &str = "Monday|Tuesday|Wednesday|Thursday|Friday|Saturday|Sunday";
const NUM: &str = r"\d{1,3}|(?i:one|two|three|four|five|six|seven|eight|nine|ten|eleven|twelve)";
const UNIT: &str = r"(?i:days?|weeks?|months?|years?)";

fn body(rule: Rule) -> String {
    match rule {
        Rule::MonthDayYear => {
            format!(r"(?P<mon>{MONTH})\s+(?P<d>\d{{1,2}}),?\s+(?P<y>\d{{4}})")
        }
        Rule::MonthYear => format!(r"(?P<mon>{MONTH})\s+(?P<y>\d{{4}})"),
        Rule::IsoDate => r"(?P<y>\d{4})(?P<s1>[-/])(?P<m>\d{2})(?P<s2>[-/])(?P<d>\d{2})".into(),
        Rule::Deictic => r"(?P<w>(?i:today|yesterday|tomorrow))".into(),
        Rule::LastNext => {
            format!(r"(?P<dir>(?i:last|next))\s+(?P<what>{MONTH}|{WEEKDAY}|(?i:week|month|year))")
        }
        Rule::Ago => format!(r"(?P<n>{NUM})\s+(?P<unit>{UNIT})\s+(?i:ago)"),
        Rule::InFuture => format!(r"(?i:in)\s+(?P<n>{NUM})\s+(?P<unit>{UNIT})"),
        Rule::Weekday => format!(r"(?P<wd>{WEEKDAY})"),
        Rule::BareYear => r"(?P<y>[12]\d{3})".into(),
        Rule::Vague => {
            r"(?:(?:the\s+)?(?:(?:early|mid|late)[-\s])?\d{3}0s|(?i:in recent years|recent years|recently))"
                .into()
        }
    }
}

/// Rules in priority order, used to break ties between equal-length matches.
pub(crate) const RULES: [Rule; 10] = [
    Rule::MonthDayYear,
    Rule::MonthYear,
    Rule::IsoDate,
    Rule::Deictic,
    Rule::LastNext,
    Rule::Ago,
    Rule::InFuture,
    Rule::Weekday,
    Rule::BareYear,
    Rule::Vague,
];

pub(crate) static SCANNERS: LazyLock<Vec<(Rule, Regex)>> = LazyLock::new(|| {
    RULES
        .iter()
        .map(|&r| {
            (
                r,
                Regex::new(&format!(r"\b(?:{})\b", body(r))).expect("rule regex"),
            )
        })
        .collect()
});

pub(crate) static MATCHERS: LazyLock<Vec<(Rule, Regex)>> = LazyLock::new(|| {
    RULES
        .iter()
        .map(|&r| {
            (
                r,
                Regex::new(&format!(r"^(?:{})$", body(r))).expect("rule regex"),
            )
        })
        .collect()
});

pub(crate) fn month_number(name: &str) -> Option<u8> {
    super::MONTH_NAMES
        .iter()
        .position(|m| m.eq_ignore_ascii_case(name))
        .map(|i| i as u8 + 1)
}

/// 0 = Monday … 6 = Sunday.
pub(crate) fn weekday_number(name: &str) -> Option<u8> {
    [
        "monday",
        "tuesday",
        "wednesday",
        "thursday",
        "friday",
        "saturday",
        "sunday",
    ]
    .iter()
    .position(|w| w.eq_ignore_ascii_case(name))
    .map(|i| i as u8)
}

pub(crate) fn parse_count(s: &str) -> Option<i64> {
    if let Ok(n) = s.parse::<i64>() {
        return Some(n);
    }
    let words = [
        "one", "two", "three", "four", "five", "six", "seven", "eight", "nine", "ten", "eleven",
        "twelve",
    ];
    words
        .iter()
        .position(|w| w.eq_ignore_ascii_case(s))
        .map(|i| i as i64 + 1)
}
