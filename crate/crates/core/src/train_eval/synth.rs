//! Planted-trip corpus generator.
//!
//! Each generated day has one target celebrity and `candidates_per_day`
//! candidate locations, each mentioned in its own articles:
//!
//! * the visited location appears next to the celebrity and a trip verb
//!   (`visited`, `arrived in`, `landed in`), or, for implicit trips, only
//!   as the host of an event that a second same-day article says the
//!   celebrity spoke at;
//! * decoys appear in trips by other people, in neutral sentences about the
//!   celebrity, or as hosts of events the celebrity never attends.
//!
//! On half of the days one decoy is mentioned more often than the visited
//! location, so mention counting alone cannot solve the task. Location,
//! event and person names are random strings.

use std::collections::{BTreeSet, HashSet};

use chrono::{Duration, NaiveDate};
use ndarray::Array2;
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{Article, Corpus, DictionaryTagger, GroundTruth, MentionType};
use crate::dates::annotate_corpus_dates;
use crate::error::Result;
use crate::features::WordVectors;
use crate::geo::{FeatureClass, GazetteerEntry, GazetteerIndex};
use crate::kb::{KnowledgeBase, Triple};
use crate::text;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub n_days: usize,
    pub candidates_per_day: usize,
    /// Number of distinct filler words.
    pub vocab: usize,
    pub seed: u64,
    pub implicit_frac: f64,
    pub n_celebrities: usize,
    /// Fixed target celebrity names; random names are drawn when empty.
    pub celebrity_names: Vec<String>,
    pub start: NaiveDate,
    pub kb_dim: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_days: 200,
            candidates_per_day: 5,
            vocab: 120,
            seed: 7,
            implicit_frac: 0.2,
            n_celebrities: 3,
            celebrity_names: Vec::new(),
            start: NaiveDate::from_ymd_opt(2019, 1, 1).expect("valid date"),
            kb_dim: 50,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SynthDay {
    pub celebrity: String,
    pub date: NaiveDate,
    pub visited: String,
    pub implicit: bool,
    /// A decoy outnumbers the visited location in mentions.
    pub decoy_heavy: bool,
    pub candidates: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct SynthData {
    /// Tagged and date-annotated.
    pub corpus: Corpus,
    pub ground_truth: Vec<GroundTruth>,
    pub gazetteer: GazetteerIndex,
    pub kb: KnowledgeBase,
    pub days: Vec<SynthDay>,
    pub tagger: DictionaryTagger,
}

impl SynthData {
    /// First date of the last `frac` of days.
    pub fn split_date(&self, frac: f64) -> NaiveDate {
        let n = self.days.len();
        let test = ((n as f64 * frac).round() as usize).clamp(1, n);
        self.days[n - test].date
    }

    pub fn is_implicit(&self, celebrity: &str, date: NaiveDate, location: &str) -> bool {
        self.days
            .iter()
            .any(|d| d.implicit && d.celebrity == celebrity && d.date == date && d.visited == location)
    }
}

const RESERVED: &[&str] = &[
    "jan", "feb", "mar", "apr", "may", "jun", "jul", "aug", "sep", "sept", "oct", "nov", "dec", "mon", "tue", "wed",
    "thu", "fri", "sat", "sun", "today", "visit", "land", "arriv",
];

struct Namer {
    rng: ChaCha8Rng,
    used: HashSet<String>,
}

impl Namer {
    const ONSETS: &'static [&'static str] = &[
        "b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z", "br", "dr", "kr", "st", "tr",
    ];
    const VOWELS: &'static [&'static str] = &["a", "e", "i", "o", "u", "ia", "ou"];

    /// A fresh lowercase word whose stem differs from every earlier word's.
    fn word(&mut self, syllables: usize) -> String {
        loop {
            let w: String = (0..syllables)
                .map(|_| {
                    format!(
                        "{}{}",
                        Self::ONSETS.choose(&mut self.rng).expect("non-empty"),
                        Self::VOWELS.choose(&mut self.rng).expect("non-empty")
                    )
                })
                .collect();
            let stem = text::stem(&w);
            let clash = text::stopwords().contains(w.as_str())
                || RESERVED.iter().any(|r| w.starts_with(r) || stem.starts_with(r));
            if !clash && self.used.insert(stem) {
                return w;
            }
        }
    }

    fn name(&mut self, syllables: usize) -> String {
        let w = self.word(syllables);
        let mut c = w.chars();
        let first = c.next().expect("non-empty").to_uppercase();
        first.chain(c).collect()
    }
}

struct DayWriter<'a> {
    rng: &'a mut ChaCha8Rng,
    filler: &'a [String],
    date: NaiveDate,
    day: usize,
    articles: Vec<Article>,
}

impl DayWriter<'_> {
    fn filler(&mut self, lo: usize, hi: usize) -> String {
        let n = self.rng.random_range(lo..=hi);
        self.filler
            .choose_multiple(self.rng, n)
            .cloned()
            .collect::<Vec<_>>()
            .join(" ")
    }

    fn filler_sentence(&mut self) -> String {
        let body = self.filler(4, 7);
        let mut c = body.chars();
        let first = c.next().expect("non-empty").to_uppercase();
        format!("{}.", first.chain(c).collect::<String>())
    }

    fn push(&mut self, mut sentences: Vec<String>, extra_filler: usize) {
        for _ in 0..extra_filler {
            let s = self.filler_sentence();
            let at = self.rng.random_range(1..=sentences.len());
            sentences.insert(at, s);
        }
        let id = format!("d{:04}-{:02}", self.day, self.articles.len());
        let (a, _) = Article::new(id, sentences.join(" "), Some(self.date), vec![]);
        self.articles.push(a);
    }
}

const TRIP_VERBS: &[&str] = &["visited", "arrived in", "landed in"];
const NEUTRAL_VERBS: &[&str] = &["criticized", "praised", "discussed", "mentioned", "questioned"];
const CELEB_NEUTRAL: &[&str] = &[
    "spoke with aides about",
    "met reporters about",
    "commented on",
    "wrote about",
];
const EVENT_KINDS: &[&str] = &["Summit", "Forum", "Expo", "Festival", "Congress"];

/// Generates the corpus, ground truth, gazetteer and knowledge base.
pub fn synth_generate(cfg: &SynthConfig) -> Result<SynthData> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut namer = Namer {
        rng: ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed),
        used: HashSet::new(),
    };
    for w in TRIP_VERBS
        .iter()
        .chain(NEUTRAL_VERBS)
        .chain(CELEB_NEUTRAL)
        .chain(EVENT_KINDS)
    {
        for t in text::name_stems(w) {
            namer.used.insert(t);
        }
    }
    for t in cfg.celebrity_names.iter().flat_map(|c| text::name_stems(c)) {
        namer.used.insert(t);
    }
    let filler: Vec<String> = (0..cfg.vocab.max(8)).map(|_| namer.word(2)).collect();
    let celebrities: Vec<String> = if cfg.celebrity_names.is_empty() {
        (0..cfg.n_celebrities.max(1))
            .map(|_| format!("{} {}", namer.name(2), namer.name(3)))
            .collect()
    } else {
        cfg.celebrity_names.clone()
    };
    let others: Vec<String> = (0..15)
        .map(|_| format!("{} {}", namer.name(2), namer.name(2)))
        .collect();
    let n_locations = (cfg.candidates_per_day * 40).max(60);
    let places: Vec<String> = (0..n_locations).map(|_| namer.name(3)).collect();

    let mut tagger = DictionaryTagger::new();
    for p in celebrities.iter().chain(&others) {
        tagger.add(p, MentionType::Person);
    }
    let mut triples = Vec::new();
    let mut corpus = Corpus::new();
    let mut ground_truth = Vec::new();
    let mut days = Vec::new();

    for day in 0..cfg.n_days {
        let date = cfg.start + Duration::days(day as i64);
        let celebrity = celebrities.choose(&mut rng).expect("non-empty").clone();
        let candidates: Vec<String> = places
            .choose_multiple(&mut rng, cfg.candidates_per_day.max(1))
            .cloned()
            .collect();
        let visited = candidates[0].clone();
        let implicit = rng.random_bool(cfg.implicit_frac.clamp(0.0, 1.0));
        let decoy_heavy = cfg.candidates_per_day > 1 && day % 2 == 0;
        let mut w = DayWriter {
            rng: &mut rng,
            filler: &filler,
            date,
            day,
            articles: Vec::new(),
        };

        let mut event = |w: &mut DayWriter<'_>, host: &str, triples: &mut Vec<Triple>| -> String {
            let kind = EVENT_KINDS.choose(w.rng).expect("non-empty");
            let name = format!("{} {kind}", namer.name(2));
            tagger.add(&name, MentionType::Event);
            triples.push(Triple {
                head: name.replace(' ', "_"),
                relation: "held_in".into(),
                tail: host.to_string(),
            });
            name
        };

        // Visited location.
        let true_mentions = if implicit {
            let ev = event(&mut w, &visited, &mut triples);
            let neutral = CELEB_NEUTRAL.choose(w.rng).expect("non-empty");
            let f = w.filler(2, 4);
            let f2 = w.filler(1, 3);
            w.push(
                vec![
                    format!("{celebrity} {neutral} {f}."),
                    format!("The {ev} opened in {visited} {f2}."),
                ],
                1,
            );
            let f = w.filler(1, 3);
            w.push(vec![format!("{celebrity} delivered a speech at the {ev} {f}.")], 1);
            1
        } else {
            let n_articles = w.rng.random_range(1..=2);
            for _ in 0..n_articles {
                let verb = TRIP_VERBS.choose(w.rng).expect("non-empty");
                let f = w.filler(2, 4);
                let extra = w.rng.random_range(1..=2);
                w.push(vec![format!("{celebrity} {verb} {visited} {f}.")], extra);
            }
            n_articles
        };

        // Decoys.
        for (k, decoy) in candidates.iter().enumerate().skip(1) {
            let n_articles = if decoy_heavy && k == 1 { true_mentions + 1 } else { 1 };
            let style = w.rng.random_range(0..3);
            for _ in 0..n_articles {
                let neutral = CELEB_NEUTRAL.choose(w.rng).expect("non-empty");
                match style {
                    0 => {
                        let other = others.choose(w.rng).expect("non-empty");
                        let verb = TRIP_VERBS.choose(w.rng).expect("non-empty");
                        let (f, f2) = (w.filler(2, 4), w.filler(2, 4));
                        w.push(
                            vec![
                                format!("{celebrity} {neutral} {f}."),
                                format!("{other} {verb} {decoy} {f2}."),
                            ],
                            1,
                        );
                    }
                    1 => {
                        let verb = NEUTRAL_VERBS.choose(w.rng).expect("non-empty");
                        let f = w.filler(2, 4);
                        let extra = w.rng.random_range(1..=2);
                        w.push(vec![format!("{celebrity} {verb} {decoy} {f}.")], extra);
                    }
                    _ => {
                        let ev = event(&mut w, decoy, &mut triples);
                        let (f, f2) = (w.filler(2, 4), w.filler(1, 3));
                        w.push(
                            vec![
                                format!("{celebrity} {neutral} {f}."),
                                format!("The {ev} opened in {decoy} {f2}."),
                            ],
                            1,
                        );
                        let f = w.filler(2, 4);
                        w.push(vec![format!("The {ev} attracted {f}.")], 1);
                    }
                }
            }
        }

        let mut articles = std::mem::take(&mut w.articles);
        articles.shuffle(&mut rng);
        for a in articles {
            corpus.push(a)?;
        }
        ground_truth.push(GroundTruth {
            celebrity: celebrity.clone(),
            date,
            visited: BTreeSet::from([visited.clone()]),
        });
        days.push(SynthDay {
            celebrity,
            date,
            visited,
            implicit,
            decoy_heavy,
            candidates,
        });
    }

    tagger.tag_corpus(&mut corpus);
    annotate_corpus_dates(&mut corpus);

    let gazetteer = GazetteerIndex::from_entries(
        places
            .iter()
            .enumerate()
            .map(|(i, p)| GazetteerEntry {
                id: format!("L{i:04}"),
                canonical: p.clone(),
                aliases: vec![],
                admin_chain: vec![],
                feature_class: FeatureClass::City,
            })
            .collect(),
    )?;

    for (i, c) in celebrities.iter().chain(&others).enumerate() {
        triples.push(Triple {
            head: c.replace(' ', "_"),
            relation: "member_of".into(),
            tail: format!("Party_{}", i % 3),
        });
    }
    let mut kb_rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0xcb);
    let mut entity_ids: Vec<String> = triples.iter().flat_map(|t| [t.head.clone(), t.tail.clone()]).collect();
    entity_ids.sort();
    entity_ids.dedup();
    let relation_ids = vec!["held_in".to_string(), "member_of".to_string()];
    let mut embed = |n: usize| Array2::from_shape_fn((n, cfg.kb_dim), |_| kb_rng.random_range(-0.5..0.5));
    let entities = WordVectors::new(entity_ids.clone(), embed(entity_ids.len()))?;
    let relations = WordVectors::new(relation_ids.clone(), embed(relation_ids.len()))?;
    let kb = KnowledgeBase::new(triples, entities, relations)?;

    Ok(SynthData {
        corpus,
        ground_truth,
        gazetteer,
        kb,
        days,
        tagger,
    })
}
