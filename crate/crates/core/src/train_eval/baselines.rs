use std::collections::{BTreeSet, HashMap};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::corpus::{select_articles, select_articles_for_date, Corpus, TripInstance};
use crate::geo::CorpusLocations;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BaselineMethod {
    LocFre,
    LocJaccard,
}

impl std::str::FromStr for BaselineMethod {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_lowercase().as_str() {
            "locfre" => Ok(Self::LocFre),
            "locjaccard" => Ok(Self::LocJaccard),
            other => Err(format!("unknown baseline {other:?} (expected locfre or locjaccard)")),
        }
    }
}

/// Index of the highest score; ties go to the lexicographically smallest
/// name.
pub fn argmax_by_name(scored: &[(&str, f64)]) -> Option<usize> {
    (0..scored.len()).reduce(|best, i| {
        let (bn, bs) = scored[best];
        let (n, s) = scored[i];
        if s > bs || (s == bs && n < bn) {
            i
        } else {
            best
        }
    })
}

pub fn jaccard(a: &BTreeSet<usize>, b: &BTreeSet<usize>) -> f64 {
    let union = a.union(b).count();
    if union == 0 {
        0.0
    } else {
        a.intersection(b).count() as f64 / union as f64
    }
}

fn group(instances: &[TripInstance]) -> Vec<Vec<usize>> {
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut pos: HashMap<(&str, NaiveDate), usize> = HashMap::new();
    for (i, inst) in instances.iter().enumerate() {
        let g = *pos.entry((inst.celebrity.as_str(), inst.date)).or_insert_with(|| {
            groups.push(Vec::new());
            groups.len() - 1
        });
        groups[g].push(i);
    }
    groups
}

/// Top-1 prediction per (celebrity, date): exactly one candidate of each
/// group is predicted positive.
pub fn baseline_predictions(
    method: BaselineMethod,
    instances: &[TripInstance],
    corpus: &Corpus,
    locations: &CorpusLocations,
) -> Vec<bool> {
    let mut out = vec![false; instances.len()];
    for members in group(instances) {
        let first = &instances[members[0]];
        let a_cd = select_articles(corpus, &first.celebrity, first.date);
        let scores: Vec<f64> = match method {
            BaselineMethod::LocFre => members
                .iter()
                .map(|&i| locations.mention_count(&a_cd, &instances[i].location) as f64)
                .collect(),
            BaselineMethod::LocJaccard => {
                let a_d = select_articles_for_date(corpus, first.date);
                let a_c: BTreeSet<usize> = a_cd.iter().copied().collect();
                members
                    .iter()
                    .map(|&i| {
                        let loc = &instances[i].location;
                        let a_loc: BTreeSet<usize> = a_d
                            .iter()
                            .copied()
                            .filter(|&a| locations.candidates(a).contains(loc))
                            .collect();
                        jaccard(&a_loc, &a_c)
                    })
                    .collect()
            }
        };
        let scored: Vec<(&str, f64)> = members
            .iter()
            .zip(&scores)
            .map(|(&i, &s)| (instances[i].location.as_str(), s))
            .collect();
        if let Some(best) = argmax_by_name(&scored) {
            out[members[best]] = true;
        }
    }
    out
}

pub fn baseline_locfre(instances: &[TripInstance], corpus: &Corpus, locations: &CorpusLocations) -> Vec<bool> {
    baseline_predictions(BaselineMethod::LocFre, instances, corpus, locations)
}

pub fn baseline_locjaccard(instances: &[TripInstance], corpus: &Corpus, locations: &CorpusLocations) -> Vec<bool> {
    baseline_predictions(BaselineMethod::LocJaccard, instances, corpus, locations)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn argmax_and_ties() {
        assert_eq!(argmax_by_name(&[("A", 5.0), ("B", 2.0)]), Some(0));
        assert_eq!(argmax_by_name(&[("B", 3.0), ("A", 3.0)]), Some(1));
        assert_eq!(argmax_by_name(&[("Solo", 0.0)]), Some(0));
        assert_eq!(argmax_by_name(&[]), None);
    }

    #[test]
    fn jaccard_cases() {
        let s = |v: &[usize]| v.iter().copied().collect::<BTreeSet<_>>();
        assert_eq!(jaccard(&s(&[1, 2]), &s(&[1, 2])), 1.0);
        assert_eq!(jaccard(&s(&[1]), &s(&[2])), 0.0);
        assert!((jaccard(&s(&[1, 2]), &s(&[2, 3])) - 1.0 / 3.0).abs() < 1e-15);
    }
}
