use regex::Captures;

use super::calendar::weekday_from_days;
use super::rules::{month_number, parse_count, weekday_number, Rule, MATCHERS};
use super::{Granularity, TemporalError, TimePoint};

/// Resolves one expression surface against a day-granularity anchor.
///
/// The result carries the expression's own granularity: a bare year is a
/// `Year`, "last December" a `Month`, "yesterday" a `Day`.
pub fn normalize_surface(surface: &str, anchor: &TimePoint) -> Result<TimePoint, TemporalError> {
    if anchor.granularity() != Granularity::Day {
        return Err(TemporalError::AnchorNotDay(*anchor));
    }
    let unresolvable = || TemporalError::UnresolvableExpression(surface.to_string());
    let text = surface.trim();
    for (rule, re) in MATCHERS.iter() {
        if let Some(caps) = re.captures(text) {
            return resolve(*rule, &caps, anchor).ok_or_else(unresolvable);
        }
    }
    Err(unresolvable())
}

fn resolve(rule: Rule, caps: &Captures<'_>, anchor: &TimePoint) -> Option<TimePoint> {
    let group = |name: &str| caps.name(name).map(|m| m.as_str());
    let num = |name: &str| group(name).and_then(|s| s.parse::<i64>().ok());
    match rule {
        Rule::MonthDayYear => TimePoint::day(
            num("y")? as i32,
            month_number(group("mon")?)?,
            u8::try_from(num("d")?).ok()?,
        )
        .ok(),
        Rule::MonthYear => TimePoint::month(num("y")? as i32, month_number(group("mon")?)?).ok(),
        Rule::IsoDate => {
            if group("s1")? != group("s2")? {
                return None;
            }
            TimePoint::day(
                num("y")? as i32,
                u8::try_from(num("m")?).ok()?,
                u8::try_from(num("d")?).ok()?,
            )
            .ok()
        }
        Rule::Deictic => {
            let offset = match group("w")?.to_ascii_lowercase().as_str() {
                "today" => 0,
                "yesterday" => -1,
                _ => 1,
            };
            anchor.add_days(offset).ok()
        }
        Rule::LastNext => {
            let forward = group("dir")?.eq_ignore_ascii_case("next");
            let what = group("what")?;
            if let Some(month) = month_number(what).filter(|_| is_capitalized(what)) {
                Some(shift_to_month(anchor, month, forward))
            } else if let Some(wd) = weekday_number(what).filter(|_| is_capitalized(what)) {
                shift_to_weekday(anchor, wd, forward)
            } else {
                let sign = if forward { 1 } else { -1 };
                shift_by_unit(anchor, &what.to_ascii_lowercase(), sign)
            }
        }
        Rule::Ago | Rule::InFuture => {
            let n = parse_count(group("n")?)?;
            let sign = if rule == Rule::Ago { -n } else { n };
            shift_by_unit(
                anchor,
                group("unit")?.to_ascii_lowercase().trim_end_matches('s'),
                sign,
            )
        }
        Rule::Weekday => shift_to_weekday(anchor, weekday_number(group("wd")?)?, false),
        Rule::BareYear => Some(TimePoint::year(num("y")? as i32)),
        Rule::Vague => None,
    }
}

fn is_capitalized(s: &str) -> bool {
    s.chars().next().is_some_and(char::is_uppercase)
}

/// Most recent `month` strictly before the anchor's month, or the earliest
/// strictly after it when `forward`.
fn shift_to_month(anchor: &TimePoint, month: u8, forward: bool) -> TimePoint {
    let anchor_month = anchor.month_value().expect("day anchor");
    let year = anchor.year_value();
    let year = match (forward, month > anchor_month, month < anchor_month) {
        (false, _, true) => year,
        (false, _, false) => year - 1,
        (true, true, _) => year,
        (true, false, _) => year + 1,
    };
    TimePoint::month(year, month).expect("valid month")
}

/// Nearest `weekday` strictly before (or after) the anchor day.
fn shift_to_weekday(anchor: &TimePoint, weekday: u8, forward: bool) -> Option<TimePoint> {
    let day = anchor.index(Granularity::Day).ok()?;
    let current = i64::from(weekday_from_days(day));
    let target = i64::from(weekday);
    let offset = if forward {
        (target - current - 1).rem_euclid(7) + 1
    } else {
        -((current - target - 1).rem_euclid(7) + 1)
    };
    Some(TimePoint::from_day_number(day + offset))
}

fn shift_by_unit(anchor: &TimePoint, unit: &str, n: i64) -> Option<TimePoint> {
    match unit {
        "day" => anchor.add_days(n).ok(),
        "week" => anchor.add_days(7 * n).ok(),
        "month" => {
            let idx = anchor.index(Granularity::Month).ok()? + n;
            Some(TimePoint::from_index(idx, Granularity::Month))
        }
        "year" => Some(TimePoint::year(
            anchor.year_value() + i32::try_from(n).ok()?,
        )),
        _ => None,
    }
}
