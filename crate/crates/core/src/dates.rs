//! Rule-based extraction of calendar dates.
//!
//! Supported forms: `Month D, YYYY`, `Month D YYYY`, `D Month YYYY`,
//! `YYYY-MM-DD`, `MM/DD/YYYY`, year-less `Month D`, bare weekday names,
//! `last <weekday>`, `next <weekday>`, `yesterday`, `today` and `tomorrow`.
//! Month names may be abbreviated (`Jan.`, `Sept`) and days may carry an
//! ordinal suffix (`16th`).

use std::sync::OnceLock;

use chrono::{Datelike, Duration, NaiveDate, Weekday};
use regex::Regex;
use serde::Serialize;

use crate::corpus::Corpus;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum DateKind {
    /// Fully specified in the text.
    Absolute,
    /// Needs the publication date to resolve.
    Relative,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DateMatch {
    /// Character range `[start, end)` in the input.
    pub span: (usize, usize),
    pub kind: DateKind,
    #[serde(rename = "date")]
    pub resolved: Option<NaiveDate>,
}

const MONTH: &str = r"(january|february|march|april|may|june|july|august|september|october|november|december|jan|feb|mar|apr|jun|jul|aug|sept|sep|oct|nov|dec)\.?";
const DAY: &str = r"(\d{1,2})(?:st|nd|rd|th)?";
const WEEKDAY: &str = r"(monday|tuesday|wednesday|thursday|friday|saturday|sunday)";

#[derive(Debug, Clone, Copy)]
enum Rule {
    MonthDayYear,
    DayMonthYear,
    Iso,
    Us,
    MonthDay,
    ShiftedWeekday,
    Weekday,
    Deictic,
}

fn rules() -> &'static [(Rule, Regex)] {
    static RULES: OnceLock<Vec<(Rule, Regex)>> = OnceLock::new();
    RULES.get_or_init(|| {
        let ci = |p: String| Regex::new(&format!("(?i){p}")).expect("valid date pattern");
        vec![
            (Rule::MonthDayYear, ci(format!(r"\b{MONTH}\s+{DAY},?\s+(\d{{4}})\b"))),
            (Rule::DayMonthYear, ci(format!(r"\b{DAY}\s+{MONTH},?\s+(\d{{4}})\b"))),
            (Rule::Iso, ci(r"\b(\d{4})-(\d{2})-(\d{2})\b".into())),
            (Rule::Us, ci(r"\b(\d{1,2})/(\d{1,2})/(\d{4})\b".into())),
            (Rule::MonthDay, ci(format!(r"\b{MONTH}\s+{DAY}\b"))),
            (Rule::ShiftedWeekday, ci(format!(r"\b(last|next)\s+{WEEKDAY}\b"))),
            (Rule::Weekday, ci(format!(r"\b{WEEKDAY}\b"))),
            (Rule::Deictic, ci(r"\b(yesterday|today|tomorrow)\b".into())),
        ]
    })
}

fn month_number(name: &str) -> Option<u32> {
    let n = name.trim_end_matches('.').to_lowercase();
    let m = match &n[..3.min(n.len())] {
        "jan" => 1,
        "feb" => 2,
        "mar" => 3,
        "apr" => 4,
        "may" => 5,
        "jun" => 6,
        "jul" => 7,
        "aug" => 8,
        "sep" => 9,
        "oct" => 10,
        "nov" => 11,
        "dec" => 12,
        _ => return None,
    };
    Some(m)
}

fn weekday(name: &str) -> Option<Weekday> {
    name.to_lowercase().parse().ok()
}

/// Nearest occurrence of `target` on or before `anchor` (0 to 6 days back).
fn weekday_on_or_before(anchor: NaiveDate, target: Weekday) -> NaiveDate {
    let back = (anchor.weekday().num_days_from_monday() + 7 - target.num_days_from_monday()) % 7;
    anchor - Duration::days(back as i64)
}

/// `last <weekday>`: most recent occurrence strictly before `anchor`.
fn weekday_before(anchor: NaiveDate, target: Weekday) -> NaiveDate {
    weekday_on_or_before(anchor - Duration::days(1), target)
}

/// `next <weekday>`: nearest occurrence strictly after `anchor`.
fn weekday_after(anchor: NaiveDate, target: Weekday) -> NaiveDate {
    let fwd = (target.num_days_from_monday() + 7 - anchor.weekday().num_days_from_monday()) % 7;
    anchor + Duration::days(if fwd == 0 { 7 } else { fwd as i64 })
}

fn num(s: &str) -> Option<u32> {
    s.parse().ok()
}

/// Resolves one regex hit; `None` means the text named an impossible date.
fn resolve(rule: Rule, caps: &regex::Captures<'_>, anchor: Option<NaiveDate>) -> Option<(DateKind, Option<NaiveDate>)> {
    use DateKind::*;
    let ymd = |y: i32, m: u32, d: u32| NaiveDate::from_ymd_opt(y, m, d);
    match rule {
        Rule::MonthDayYear => {
            let date = ymd(num(&caps[3])? as i32, month_number(&caps[1])?, num(&caps[2])?)?;
            Some((Absolute, Some(date)))
        }
        Rule::DayMonthYear => {
            let date = ymd(num(&caps[3])? as i32, month_number(&caps[2])?, num(&caps[1])?)?;
            Some((Absolute, Some(date)))
        }
        Rule::Iso => {
            let date = ymd(num(&caps[1])? as i32, num(&caps[2])?, num(&caps[3])?)?;
            Some((Absolute, Some(date)))
        }
        Rule::Us => {
            let date = ymd(num(&caps[3])? as i32, num(&caps[1])?, num(&caps[2])?)?;
            Some((Absolute, Some(date)))
        }
        Rule::MonthDay => {
            let (m, d) = (month_number(&caps[1])?, num(&caps[2])?);
            // Reject impossible month/day pairs even without an anchor (2000 is a leap year).
            ymd(2000, m, d)?;
            match anchor {
                Some(a) => Some((Relative, Some(ymd(a.year(), m, d)?))),
                None => Some((Relative, None)),
            }
        }
        Rule::ShiftedWeekday => {
            let wd = weekday(&caps[2])?;
            let date = anchor.map(|a| {
                if caps[1].eq_ignore_ascii_case("last") {
                    weekday_before(a, wd)
                } else {
                    weekday_after(a, wd)
                }
            });
            Some((Relative, date))
        }
        Rule::Weekday => {
            let wd = weekday(&caps[1])?;
            Some((Relative, anchor.map(|a| weekday_on_or_before(a, wd))))
        }
        Rule::Deictic => {
            let shift = match caps[1].to_lowercase().as_str() {
                "yesterday" => -1,
                "today" => 0,
                _ => 1,
            };
            Some((Relative, anchor.map(|a| a + Duration::days(shift))))
        }
    }
}

/// Extracts non-overlapping date expressions. When candidates overlap the
/// longest wins; equal lengths go to the earlier start. An impossible date
/// still claims its span, so `February 29, 2017` yields nothing rather than
/// a year-less `February 29`.
pub fn extract_dates(text: &str, publish_date: Option<NaiveDate>) -> Vec<DateMatch> {
    type Candidate = (usize, usize, Option<(DateKind, Option<NaiveDate>)>);
    let mut candidates: Vec<Candidate> = Vec::new();
    for (rule, re) in rules() {
        for caps in re.captures_iter(text) {
            let m = caps.get(0).expect("whole match");
            candidates.push((m.start(), m.end(), resolve(*rule, &caps, publish_date)));
        }
    }
    candidates.sort_by(|a, b| (b.1 - b.0).cmp(&(a.1 - a.0)).then(a.0.cmp(&b.0)));
    let mut chosen: Vec<Candidate> = Vec::new();
    for c in candidates {
        if chosen.iter().all(|k| c.1 <= k.0 || c.0 >= k.1) {
            chosen.push(c);
        }
    }
    chosen.sort_by_key(|c| c.0);
    let to_char = |byte: usize| text[..byte].chars().count();
    chosen
        .into_iter()
        .filter_map(|(s, e, r)| r.map(|(kind, resolved)| (s, e, kind, resolved)))
        .map(|(s, e, kind, resolved)| DateMatch {
            span: (to_char(s), to_char(e)),
            kind,
            resolved,
        })
        .collect()
}

/// Fills every article's `mentioned_dates` with its sorted, deduplicated
/// resolved dates.
pub fn annotate_corpus_dates(corpus: &mut Corpus) {
    for a in corpus.articles_mut() {
        let mut dates: Vec<NaiveDate> = extract_dates(&a.text, a.publish_date)
            .into_iter()
            .filter_map(|m| m.resolved)
            .collect();
        dates.sort();
        dates.dedup();
        a.mentioned_dates = dates;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Article;
    use proptest::prelude::*;

    fn d(s: &str) -> NaiveDate {
        NaiveDate::parse_from_str(s, "%Y-%m-%d").unwrap()
    }

    #[test]
    fn absolute_month_day_year() {
        let m = extract_dates("It happened on July 16, 2022 in town.", None);
        assert_eq!(m.len(), 1);
        assert_eq!(m[0].kind, DateKind::Absolute);
        assert_eq!(m[0].resolved, Some(d("2022-07-16")));
        assert_eq!(m[0].span, (15, 28));
    }

    #[test]
    fn yesterday_needs_anchor() {
        let m = extract_dates("He arrived yesterday.", Some(d("2017-01-27")));
        assert_eq!(m[0].kind, DateKind::Relative);
        assert_eq!(m[0].resolved, Some(d("2017-01-26")));
        let m = extract_dates("He arrived yesterday.", None);
        assert_eq!(m[0].kind, DateKind::Relative);
        assert_eq!(m[0].resolved, None);
    }

    #[test]
    fn invalid_calendar_date_is_skipped() {
        assert!(extract_dates("on February 30, 2021", None).is_empty());
        assert!(extract_dates("on 2021-13-01", None).is_empty());
        let m = extract_dates("February 29, 2020", None);
        assert_eq!(m[0].resolved, Some(d("2020-02-29")));
    }

    #[test]
    fn weekdays() {
        // 2017-01-26 is a Thursday.
        let p = Some(d("2017-01-26"));
        let one = |t: &str| extract_dates(t, p)[0].resolved.unwrap();
        assert_eq!(one("on Monday"), d("2017-01-23"));
        assert_eq!(one("on Thursday"), d("2017-01-26"));
        assert_eq!(one("last Thursday"), d("2017-01-19"));
        assert_eq!(one("next Thursday"), d("2017-02-02"));
        assert_eq!(one("next Friday"), d("2017-01-27"));
        assert_eq!(one("last Friday"), d("2017-01-20"));
    }

    #[test]
    fn longest_match_wins() {
        let m = extract_dates("Jan. 5th 2020 and next Monday", Some(d("2020-01-10")));
        assert_eq!(m.len(), 2);
        assert_eq!(m[0].resolved, Some(d("2020-01-05")));
        assert_eq!(m[1].resolved, Some(d("2020-01-13")));
    }

    #[test]
    fn corpus_dates_are_deduplicated() {
        let mut corpus = Corpus::new();
        let (a, _) = Article::new(
            "a",
            "July 16, 2022 was hot. Again, July 16, 2022. Yesterday too.",
            Some(d("2022-07-20")),
            vec![],
        );
        corpus.push(a).unwrap();
        let (b, _) = Article::new("b", "Nothing dated here.", None, vec![]);
        corpus.push(b).unwrap();
        annotate_corpus_dates(&mut corpus);
        assert_eq!(corpus.get(0).mentioned_dates, vec![d("2022-07-16"), d("2022-07-19")]);
        assert!(corpus.get(1).mentioned_dates.is_empty());
    }

    fn arb_date() -> impl Strategy<Value = NaiveDate> {
        (0i64..20_000).prop_map(|n| d("1990-01-01") + Duration::days(n))
    }

    proptest! {
        #[test]
        fn deictic_offsets(p in arb_date()) {
            let m = extract_dates("yesterday and tomorrow", Some(p));
            prop_assert_eq!(m[0].resolved, Some(p - Duration::days(1)));
            prop_assert_eq!(m[1].resolved, Some(p + Duration::days(1)));
        }

        #[test]
        fn matches_never_overlap(words in proptest::collection::vec(
            prop_oneof![
                Just("July"), Just("16,"), Just("2022"), Just("16"), Just("last"),
                Just("Monday"), Just("yesterday"), Just("2020-02-29"), Just("1/2/2003"),
                Just("the"), Just("May"), Just("4"), Just("next"),
            ], 0..30), p in proptest::option::of(arb_date())) {
            let text = words.join(" ");
            let m = extract_dates(&text, p);
            let len = text.chars().count();
            for pair in m.windows(2) {
                prop_assert!(pair[0].span.1 <= pair[1].span.0);
            }
            prop_assert!(m.iter().all(|x| x.span.0 < x.span.1 && x.span.1 <= len));
            for x in &m {
                if x.kind == DateKind::Absolute {
                    prop_assert!(x.resolved.is_some());
                }
                if p.is_some() {
                    prop_assert!(x.resolved.is_some());
                }
            }
            prop_assert_eq!(m, extract_dates(&text, p));
        }
    }
}
