use std::collections::BTreeSet;

use chrono::NaiveDate;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::TripInstance;
use crate::error::{Error, Result};

pub fn default_split_date() -> NaiveDate {
    NaiveDate::from_ymd_opt(2019, 7, 1).expect("valid date")
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Split {
    pub train: Vec<TripInstance>,
    pub val: Vec<TripInstance>,
    pub test: Vec<TripInstance>,
}

/// Instances dated on or after `split_date` form the test set. A seeded
/// `val_frac` of the remaining (celebrity, date) groups, at least one,
/// forms the validation set, so a day's candidates never straddle sets.
pub fn split_dataset(instances: &[TripInstance], split_date: NaiveDate, val_frac: f64, seed: u64) -> Result<Split> {
    if !(0.0..1.0).contains(&val_frac) {
        return Err(Error::Config {
            field: "val_frac",
            msg: format!("must lie in [0, 1), got {val_frac}"),
        });
    }
    let (test, rest): (Vec<_>, Vec<_>) = instances.iter().cloned().partition(|i| i.date >= split_date);
    let groups: BTreeSet<(NaiveDate, String)> = rest.iter().map(|i| (i.date, i.celebrity.clone())).collect();
    let mut groups: Vec<_> = groups.into_iter().collect();
    groups.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_val = if val_frac > 0.0 {
        ((groups.len() as f64 * val_frac).round() as usize).max(1)
    } else {
        0
    };
    let val_groups: BTreeSet<_> = groups.into_iter().take(n_val).collect();
    let (val, train): (Vec<_>, Vec<_>) = rest
        .into_iter()
        .partition(|i| val_groups.contains(&(i.date, i.celebrity.clone())));
    for (name, side) in [("train", &train), ("test", &test)] {
        if side.is_empty() {
            return Err(Error::Training(format!("empty {name} set")));
        }
    }
    if val_frac > 0.0 && val.is_empty() {
        return Err(Error::Training("empty validation set".into()));
    }
    Ok(Split { train, val, test })
}
