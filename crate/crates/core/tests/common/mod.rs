#![allow(dead_code)]

use std::path::{Path, PathBuf};

use celetrip::corpus::Article;
use celetrip::dates::extract_dates;
use celetrip::geo::{build_gazetteer_index, match_locations, resolve_containment, GazetteerIndex};
use chrono::NaiveDate;

pub fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn rows(name: &str) -> Vec<Vec<String>> {
    std::fs::read_to_string(fixture(name))
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#') && !l.trim().is_empty())
        .map(|l| l.split('\t').map(String::from).collect())
        .collect()
}

/// A fixture case whose extracted output differs from the expected one.
#[derive(Debug)]
pub struct Mismatch {
    pub input: String,
    pub expected: String,
    pub got: String,
}

/// Runs every date fixture case; returns the case count and the failures.
pub fn run_date_fixture() -> (usize, Vec<Mismatch>) {
    let cases = rows("dates.tsv");
    let mut failures = Vec::new();
    for row in &cases {
        let publish = (!row[1].is_empty()).then(|| row[1].parse::<NaiveDate>().unwrap());
        let expected = row.get(2).cloned().unwrap_or_default();
        let got = extract_dates(&row[0], publish)
            .iter()
            .map(|m| m.resolved.map_or("?".to_string(), |d| d.to_string()))
            .collect::<Vec<_>>()
            .join(",");
        if got != expected {
            failures.push(Mismatch {
                input: format!("{} @ {}", row[0], row[1]),
                expected,
                got,
            });
        }
    }
    (cases.len(), failures)
}

pub fn gazetteer() -> GazetteerIndex {
    build_gazetteer_index(fixture("gazetteer.tsv")).unwrap()
}

pub fn run_location_fixture() -> (usize, Vec<Mismatch>) {
    let index = gazetteer();
    let cases = rows("locations.tsv");
    let mut failures = Vec::new();
    for row in &cases {
        let (article, _) = Article::new("fixture", row[0].clone(), None, vec![]);
        let got = resolve_containment(&match_locations(&article, &index), &index).join("|");
        let expected = row.get(1).cloned().unwrap_or_default();
        if got != expected {
            failures.push(Mismatch {
                input: row[0].clone(),
                expected,
                got,
            });
        }
    }
    (cases.len(), failures)
}
