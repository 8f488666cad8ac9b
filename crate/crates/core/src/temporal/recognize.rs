use super::normalize::normalize_surface;
use super::rules::{RULES, SCANNERS};
use super::{TemporalExpression, TimePoint};

/// Finds temporal expressions in `text`.
///
/// Candidate matches from every rule are resolved greedily: earliest start
/// wins, then the longest match, then rule priority. The result is sorted and
/// non-overlapping. Offsets are code points. `normalized` is left empty;
/// `resolvable` reports whether a normalization rule exists for the surface.
pub fn recognize(text: &str) -> Vec<TemporalExpression> {
    let mut candidates: Vec<(usize, usize, usize)> = Vec::new();
    for (priority, (_, re)) in SCANNERS.iter().enumerate() {
        debug_assert_eq!(SCANNERS[priority].0, RULES[priority]);
        for m in re.find_iter(text) {
            candidates.push((m.start(), m.end(), priority));
        }
    }
    candidates.sort_by(|a, b| {
        a.0.cmp(&b.0)
            .then((b.1 - b.0).cmp(&(a.1 - a.0)))
            .then(a.2.cmp(&b.2))
    });

    let char_at = byte_to_char_table(text);
    // Resolvability does not depend on the anchor for any rule.
    let probe_anchor = TimePoint::day(2000, 1, 1).expect("valid date");
    let mut out = Vec::new();
    let mut cursor = 0usize;
    for (start, end, _) in candidates {
        if start < cursor {
            continue;
        }
        cursor = end;
        let surface = &text[start..end];
        out.push(TemporalExpression {
            span_start: char_at[start],
            span_end: char_at[end],
            surface: surface.to_string(),
            normalized: None,
            resolvable: normalize_surface(surface, &probe_anchor).is_ok(),
        });
    }
    out
}

fn byte_to_char_table(text: &str) -> Vec<usize> {
    let mut table = vec![0usize; text.len() + 1];
    let mut chars = 0;
    for (b, c) in text.char_indices() {
        for slot in &mut table[b..b + c.len_utf8()] {
            *slot = chars;
        }
        chars += 1;
    }
    table[text.len()] = chars;
    table
}

#[cfg(test)]
mod tests {
    use super::*;

    fn surfaces(text: &str) -> Vec<String> {
        recognize(text).into_iter().map(|e| e.surface).collect()
    }

    #[test]
    fn figure_example() {
        let text = "The charges date to 1993, when he was convicted. The conviction was \
                    overturned last December, and prosecutors said yesterday they would not retry.";
        assert_eq!(surfaces(text), ["1993", "last December", "yesterday"]);
    }

    #[test]
    fn empty_text() {
        assert!(recognize("").is_empty());
    }

    #[test]
    fn mixed_absolute_and_relative() {
        assert_eq!(
            surfaces("He arrived on March 5, 1999 and left two weeks ago."),
            ["March 5, 1999", "two weeks ago"]
        );
    }

    #[test]
    fn inventory_coverage() {
        let text = "On 2007/02/23 and 2007-02-22, in May 2001, on Monday, next week, \
                    last year, 3 days ago, in 2 months, today, tomorrow, next Friday.";
        assert_eq!(
            surfaces(text),
            [
                "2007/02/23",
                "2007-02-22",
                "May 2001",
                "Monday",
                "next week",
                "last year",
                "3 days ago",
                "in 2 months",
                "today",
                "tomorrow",
                "next Friday"
            ]
        );
    }

    #[test]
    fn unresolvable_flagged() {
        let exprs = recognize("Prices rose in the 1990s and recently fell.");
        assert_eq!(exprs.len(), 2);
        assert!(exprs.iter().all(|e| !e.resolvable));
        // Impossible dates are spans without a normalization.
        let exprs = recognize("Filed February 30, 2007.");
        assert_eq!(exprs[0].surface, "February 30, 2007");
        assert!(!exprs[0].resolvable);
    }

    #[test]
    fn no_match_inside_words() {
        assert!(recognize("code ed198703 and x2001y").is_empty());
        assert!(recognize("they may march").is_empty());
    }

    #[test]
    fn code_point_offsets() {
        let text = "Café opened in 1993.";
        let e = &recognize(text)[0];
        let slice: String = text
            .chars()
            .skip(e.span_start)
            .take(e.span_end - e.span_start)
            .collect();
        assert_eq!(slice, "1993");
        assert_eq!((e.span_start, e.span_end), (15, 19));
    }
}
