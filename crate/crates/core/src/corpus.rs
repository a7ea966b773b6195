//! Article ingestion, article selection for a (celebrity, date) query and
//! trip-instance construction.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::io::BufRead;
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::CorpusLocations;
use crate::text::{self, RawToken};

/// Entity categories carried by mention annotations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum MentionType {
    Person,
    Norp,
    #[serde(alias = "FAC")]
    Facility,
    #[serde(alias = "ORG")]
    Organization,
    #[serde(alias = "GPE", alias = "LOC")]
    GpeLoc,
    Event,
    Date,
}

impl MentionType {
    /// Types that become entity nodes in a trip graph.
    pub fn is_entity(self) -> bool {
        matches!(
            self,
            MentionType::Person | MentionType::Norp | MentionType::Facility | MentionType::Organization
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntityMention {
    pub surface: String,
    #[serde(rename = "type")]
    pub kind: MentionType,
    #[serde(rename = "sentence")]
    pub sentence_index: usize,
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone)]
pub struct Article {
    pub id: String,
    pub text: String,
    pub publish_date: Option<NaiveDate>,
    /// Stems per sentence, stopwords removed.
    pub sentences: Vec<Vec<String>>,
    /// Original tokens per sentence; mention spans index into these.
    pub raw_sentences: Vec<Vec<RawToken>>,
    pub mentions: Vec<EntityMention>,
    /// Resolved dates found in the text; see [`crate::dates::annotate_corpus_dates`].
    pub mentioned_dates: Vec<NaiveDate>,
}

impl Article {
    /// Builds an article from raw text, dropping mentions whose span falls
    /// outside its sentence. Returns the dropped mentions' descriptions.
    pub fn new(
        id: impl Into<String>,
        text: impl Into<String>,
        publish_date: Option<NaiveDate>,
        mentions: Vec<EntityMention>,
    ) -> (Self, Vec<String>) {
        let text = text.into();
        let raw_sentences = text::split_sentences(&text);
        let sentences = raw_sentences
            .iter()
            .map(|s| text::stem_tokens(s.iter().map(|t| t.text.as_str())))
            .collect();
        let mut dropped = Vec::new();
        let mentions = mentions
            .into_iter()
            .filter(|m| {
                let ok = m.start < m.end && raw_sentences.get(m.sentence_index).is_some_and(|s| m.end <= s.len());
                if !ok {
                    dropped.push(format!(
                        "mention {:?} span {}..{} outside sentence {}",
                        m.surface, m.start, m.end, m.sentence_index
                    ));
                }
                ok
            })
            .collect();
        let article = Article {
            id: id.into(),
            text,
            publish_date,
            sentences,
            raw_sentences,
            mentions,
            mentioned_dates: Vec::new(),
        };
        (article, dropped)
    }

    /// Normalized tokens of one sentence.
    pub fn normalized_sentence(&self, index: usize) -> Vec<String> {
        self.raw_sentences[index]
            .iter()
            .map(|t| text::normalize_token(&t.text))
            .collect()
    }

    /// Whether every token of `name` appears, in order and adjacent, inside
    /// one sentence (case-insensitive, whole tokens).
    pub fn mentions_name(&self, name: &str) -> bool {
        let needle = text::normalize_name(name);
        if needle.is_empty() {
            return false;
        }
        (0..self.raw_sentences.len()).any(|i| !text::find_token_run(&self.normalized_sentence(i), &needle).is_empty())
    }

    /// Whether the article counts as being about date `d`.
    pub fn is_about_date(&self, d: NaiveDate) -> bool {
        self.publish_date == Some(d) || self.mentioned_dates.contains(&d)
    }
}

#[derive(Debug, Deserialize)]
struct ArticleRecord {
    id: String,
    text: String,
    #[serde(default)]
    publish_date: Option<String>,
    #[serde(default)]
    mentions: Vec<EntityMention>,
}

/// Serializable form of an article, one JSON object per corpus line.
#[derive(Debug, Clone, Serialize)]
pub struct ArticleLine<'a> {
    pub id: &'a str,
    pub text: &'a str,
    pub publish_date: Option<String>,
    pub mentions: &'a [EntityMention],
}

/// Articles indexed by id. Immutable after loading.
#[derive(Debug, Clone, Default)]
pub struct Corpus {
    articles: Vec<Article>,
    by_id: HashMap<String, usize>,
    pub warnings: Vec<String>,
}

impl Corpus {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds an article; fails on a duplicate id.
    pub fn push(&mut self, article: Article) -> Result<usize> {
        if self.by_id.contains_key(&article.id) {
            return Err(Error::Invalid(format!("duplicate article id {:?}", article.id)));
        }
        let idx = self.articles.len();
        self.by_id.insert(article.id.clone(), idx);
        self.articles.push(article);
        Ok(idx)
    }

    pub fn len(&self) -> usize {
        self.articles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.articles.is_empty()
    }

    pub fn articles(&self) -> &[Article] {
        &self.articles
    }

    pub(crate) fn articles_mut(&mut self) -> &mut [Article] {
        &mut self.articles
    }

    pub fn get(&self, idx: usize) -> &Article {
        &self.articles[idx]
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.by_id.get(id).copied()
    }

    pub fn by_id(&self, id: &str) -> Option<&Article> {
        self.index_of(id).map(|i| &self.articles[i])
    }

    /// Writes the corpus in its JSONL interchange form.
    pub fn write_jsonl<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        for a in &self.articles {
            let line = ArticleLine {
                id: &a.id,
                text: &a.text,
                publish_date: a.publish_date.map(|d| d.to_string()),
                mentions: &a.mentions,
            };
            serde_json::to_writer(&mut w, &line)?;
            writeln!(w)?;
        }
        Ok(())
    }
}

/// Loads a JSONL corpus: one `{id, text, publish_date, mentions}` object per
/// line. Blank lines are skipped. An unparseable date loads the article with
/// no publish date and records a warning.
pub fn load_corpus(path: impl AsRef<Path>) -> Result<Corpus> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_corpus(std::io::BufReader::new(file), path)
}

pub fn read_corpus<R: BufRead>(reader: R, path: &Path) -> Result<Corpus> {
    let mut corpus = Corpus::new();
    let mut first_line: HashMap<String, usize> = HashMap::new();
    for (i, line) in reader.lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: ArticleRecord =
            serde_json::from_str(&line).map_err(|e| Error::parse(path, lineno, e.to_string()))?;
        if let Some(&first) = first_line.get(&record.id) {
            return Err(Error::DuplicateArticle {
                id: record.id,
                first,
                second: lineno,
            });
        }
        first_line.insert(record.id.clone(), lineno);
        let publish_date = match record.publish_date.as_deref() {
            None => None,
            Some(s) => match NaiveDate::parse_from_str(s.trim(), "%Y-%m-%d") {
                Ok(d) => Some(d),
                Err(_) => {
                    let msg = format!(
                        "{}:{lineno}: article {:?} has unparseable publish_date {s:?}",
                        path.display(),
                        record.id
                    );
                    log::warn!("{msg}");
                    corpus.warnings.push(msg);
                    None
                }
            },
        };
        let (article, dropped) = Article::new(record.id, record.text, publish_date, record.mentions);
        for d in dropped {
            let msg = format!("{}:{lineno}: {d}", path.display());
            log::warn!("{msg}");
            corpus.warnings.push(msg);
        }
        corpus.push(article)?;
    }
    Ok(corpus)
}

/// Articles published on `date` or mentioning it (`A_d`), regardless of who
/// they are about.
pub fn select_articles_for_date(corpus: &Corpus, date: NaiveDate) -> Vec<usize> {
    corpus
        .articles
        .iter()
        .enumerate()
        .filter(|(_, a)| a.is_about_date(date))
        .map(|(i, _)| i)
        .collect()
}

/// Articles about `date` that mention the celebrity's full name (`A_{c,d}`).
/// Requires [`crate::dates::annotate_corpus_dates`] to have run.
pub fn select_articles(corpus: &Corpus, celebrity: &str, date: NaiveDate) -> Vec<usize> {
    corpus
        .articles
        .iter()
        .enumerate()
        .filter(|(_, a)| a.is_about_date(date) && a.mentions_name(celebrity))
        .map(|(i, _)| i)
        .collect()
}

/// Subset of `a_cd` whose extracted candidate locations include `loc`
/// (`A_{c,d,loc}`).
pub fn select_articles_for_location(a_cd: &[usize], loc: &str, locations: &CorpusLocations) -> Vec<usize> {
    a_cd.iter()
        .copied()
        .filter(|&i| locations.candidates(i).iter().any(|c| c == loc))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Positive,
    Negative,
}

impl Label {
    pub fn as_f64(self) -> f64 {
        match self {
            Label::Positive => 1.0,
            Label::Negative => 0.0,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Label::Positive => "positive",
            Label::Negative => "negative",
        })
    }
}

/// One classification row: does `celebrity` visit `location` on `date`?
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TripInstance {
    pub celebrity: String,
    pub location: String,
    pub date: NaiveDate,
    pub article_ids: Vec<String>,
    pub label: Option<Label>,
}

/// Visited locations for one (celebrity, date).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroundTruth {
    pub celebrity: String,
    pub date: NaiveDate,
    pub visited: BTreeSet<String>,
}

/// A ground-truth visit whose location never showed up as a candidate.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MissedTrip {
    pub celebrity: String,
    pub date: NaiveDate,
    pub location: String,
    pub reason: &'static str,
}

/// Reads `celebrity,date,location` rows (with header) and groups them by
/// (celebrity, date) in first-seen order.
pub fn load_ground_truth(path: impl AsRef<Path>) -> Result<Vec<GroundTruth>> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::parse(path, 0, e.to_string()))?;
    let mut groups: Vec<GroundTruth> = Vec::new();
    let mut pos: HashMap<(String, NaiveDate), usize> = HashMap::new();
    for (i, rec) in reader.records().enumerate() {
        let lineno = i + 2;
        let rec = rec.map_err(|e| Error::parse(path, lineno, e.to_string()))?;
        if rec.len() < 3 {
            return Err(Error::parse(path, lineno, "expected celebrity,date,location"));
        }
        let date = NaiveDate::parse_from_str(&rec[1], "%Y-%m-%d")
            .map_err(|e| Error::parse(path, lineno, format!("bad date {:?}: {e}", &rec[1])))?;
        let key = (rec[0].to_string(), date);
        let idx = *pos.entry(key.clone()).or_insert_with(|| {
            groups.push(GroundTruth {
                celebrity: key.0.clone(),
                date,
                visited: BTreeSet::new(),
            });
            groups.len() - 1
        });
        groups[idx].visited.insert(rec[2].to_string());
    }
    Ok(groups)
}

/// Writes ground truth as `celebrity,date,location` rows with a header.
pub fn write_ground_truth<W: std::io::Write>(w: W, ground_truth: &[GroundTruth]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let io = |e: csv::Error| Error::Invalid(format!("writing ground truth: {e}"));
    out.write_record(["celebrity", "date", "location"]).map_err(io)?;
    for g in ground_truth {
        for v in &g.visited {
            out.write_record([g.celebrity.as_str(), &g.date.to_string(), v.as_str()])
                .map_err(io)?;
        }
    }
    out.flush()
        .map_err(|e| Error::Invalid(format!("writing ground truth: {e}")))
}

/// One JSON object per line.
pub fn write_instances<W: std::io::Write>(mut w: W, instances: &[TripInstance]) -> std::io::Result<()> {
    for inst in instances {
        serde_json::to_writer(&mut w, inst)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn load_instances(path: impl AsRef<Path>) -> Result<Vec<TripInstance>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::parse(path, i + 1, e.to_string()))?);
    }
    Ok(out)
}

fn name_key(name: &str) -> String {
    text::normalize_name(name).join(" ")
}

/// Candidate locations with their supporting articles for one (c, d).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DayCandidates {
    pub celebrity: String,
    pub date: NaiveDate,
    /// `A_{c,d}` as corpus indices.
    pub articles: Vec<usize>,
    /// Candidate canonical names in first-seen order, each with `A_{c,d,loc}`.
    pub candidates: Vec<(String, Vec<usize>)>,
}

/// Candidate generation: select `A_{c,d}`, collect all extracted locations,
/// and attach each candidate's article subset.
pub fn day_candidates(corpus: &Corpus, locations: &CorpusLocations, celebrity: &str, date: NaiveDate) -> DayCandidates {
    let articles = select_articles(corpus, celebrity, date);
    let pooled = locations.pooled_candidates(&articles);
    let candidates = pooled
        .into_iter()
        .map(|loc| {
            let subset = select_articles_for_location(&articles, &loc, locations);
            (loc, subset)
        })
        .filter(|(_, subset)| !subset.is_empty())
        .collect();
    DayCandidates {
        celebrity: celebrity.to_string(),
        date,
        articles,
        candidates,
    }
}

/// Labels every candidate of every ground-truth (c, d). Ground-truth places
/// that were never extracted are returned as missed trips.
pub fn build_trip_instances(
    corpus: &Corpus,
    locations: &CorpusLocations,
    ground_truth: &[GroundTruth],
) -> (Vec<TripInstance>, Vec<MissedTrip>) {
    let mut instances = Vec::new();
    let mut missed = Vec::new();
    for gt in ground_truth {
        let day = day_candidates(corpus, locations, &gt.celebrity, gt.date);
        let visited: BTreeMap<String, &String> = gt.visited.iter().map(|v| (name_key(v), v)).collect();
        if day.candidates.is_empty() {
            log::info!(
                "no candidates for {} on {}; {} trip(s) missed",
                gt.celebrity,
                gt.date,
                gt.visited.len()
            );
        }
        let mut found = BTreeSet::new();
        for (loc, subset) in &day.candidates {
            let key = name_key(loc);
            let positive = visited.contains_key(&key);
            if positive {
                found.insert(key);
            }
            instances.push(TripInstance {
                celebrity: gt.celebrity.clone(),
                location: loc.clone(),
                date: gt.date,
                article_ids: subset.iter().map(|&i| corpus.get(i).id.clone()).collect(),
                label: Some(if positive { Label::Positive } else { Label::Negative }),
            });
        }
        for (key, original) in &visited {
            if !found.contains(key) {
                log::info!("missed trip: {} {} {}", gt.celebrity, gt.date, original);
                missed.push(MissedTrip {
                    celebrity: gt.celebrity.clone(),
                    date: gt.date,
                    location: (*original).clone(),
                    reason: "location not among extracted candidates",
                });
            }
        }
    }
    (instances, missed)
}

/// Exact-match tagger over a fixed surface list, used when a corpus ships
/// without annotations.
#[derive(Debug, Clone, Default)]
pub struct DictionaryTagger {
    entries: HashMap<Vec<String>, MentionType>,
    max_len: usize,
}

impl DictionaryTagger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, surface: &str, kind: MentionType) {
        let key = text::normalize_name(surface);
        if key.is_empty() {
            return;
        }
        self.max_len = self.max_len.max(key.len());
        self.entries.insert(key, kind);
    }

    /// Longest-match tagging of every sentence.
    pub fn tag(&self, article: &Article) -> Vec<EntityMention> {
        let mut out = Vec::new();
        for (si, sent) in article.raw_sentences.iter().enumerate() {
            let norm: Vec<String> = sent.iter().map(|t| text::normalize_token(&t.text)).collect();
            let mut i = 0;
            while i < norm.len() {
                let mut hit = None;
                for len in (1..=self.max_len.min(norm.len() - i)).rev() {
                    if let Some(&kind) = self.entries.get(&norm[i..i + len]) {
                        hit = Some((len, kind));
                        break;
                    }
                }
                match hit {
                    Some((len, kind)) => {
                        let surface = sent[i..i + len]
                            .iter()
                            .map(|t| t.text.as_str())
                            .collect::<Vec<_>>()
                            .join(" ");
                        out.push(EntityMention {
                            surface,
                            kind,
                            sentence_index: si,
                            start: i,
                            end: i + len,
                        });
                        i += len;
                    }
                    None => i += 1,
                }
            }
        }
        out
    }

    /// Tags every article that has no mentions yet.
    pub fn tag_corpus(&self, corpus: &mut Corpus) {
        for a in corpus.articles_mut() {
            if a.mentions.is_empty() {
                a.mentions = self.tag(a);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    fn d(s: &str) -> NaiveDate {
        NaiveDate::parse_from_str(s, "%Y-%m-%d").unwrap()
    }

    fn read(s: &str) -> Result<Corpus> {
        read_corpus(Cursor::new(s.to_string()), Path::new("mem.jsonl"))
    }

    #[test]
    fn loads_two_lines() {
        let c = read(
            "{\"id\":\"a\",\"text\":\"Hello there.\",\"publish_date\":\"2017-01-26\"}\n\
             {\"id\":\"b\",\"text\":\"Bye.\",\"publish_date\":null}\n",
        )
        .unwrap();
        assert_eq!(c.len(), 2);
        assert_eq!(c.by_id("a").unwrap().publish_date, Some(d("2017-01-26")));
        assert_eq!(c.by_id("b").unwrap().publish_date, None);
    }

    #[test]
    fn empty_file_is_empty_corpus() {
        assert!(read("").unwrap().is_empty());
    }

    #[test]
    fn duplicate_id_names_id_and_lines() {
        let err = read("{\"id\":\"x\",\"text\":\"a\"}\n{\"id\":\"y\",\"text\":\"b\"}\n{\"id\":\"x\",\"text\":\"c\"}\n")
            .unwrap_err();
        match err {
            Error::DuplicateArticle { id, first, second } => {
                assert_eq!((id.as_str(), first, second), ("x", 1, 3))
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn bad_date_warns_and_loads() {
        let c = read("{\"id\":\"x\",\"text\":\"a\",\"publish_date\":\"26/01/2017\"}\n").unwrap();
        assert_eq!(c.len(), 1);
        assert!(c.get(0).publish_date.is_none());
        assert_eq!(c.warnings.len(), 1);
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let err = read("{\"id\":\"x\",\"text\":\"a\"}\nnot json\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
    }

    #[test]
    fn mention_types_accept_short_aliases() {
        let c = read(
            "{\"id\":\"x\",\"text\":\"Obama met NATO.\",\"mentions\":[{\"surface\":\"NATO\",\"type\":\"ORG\",\"sentence\":0,\"start\":2,\"end\":3},{\"surface\":\"bad\",\"type\":\"PERSON\",\"sentence\":4,\"start\":0,\"end\":1}]}\n",
        )
        .unwrap();
        let a = c.get(0);
        assert_eq!(a.mentions.len(), 1);
        assert_eq!(a.mentions[0].kind, MentionType::Organization);
        assert_eq!(c.warnings.len(), 1);
    }

    #[test]
    fn whole_name_matching() {
        let (a, _) = Article::new("1", "Donald Trump spoke in Philadelphia.", None, vec![]);
        assert!(a.mentions_name("Donald Trump"));
        assert!(a.mentions_name("donald trump"));
        let (b, _) = Article::new("2", "Crowds gathered at Trump Tower.", None, vec![]);
        assert!(!b.mentions_name("Donald Trump"));
        let (c, _) = Article::new("3", "Donald met Trump.", None, vec![]);
        assert!(!c.mentions_name("Donald Trump"));
    }

    #[test]
    fn dictionary_tagger_longest_match() {
        let mut tagger = DictionaryTagger::new();
        tagger.add("G7", MentionType::Event);
        tagger.add("G7 summit", MentionType::Event);
        tagger.add("Angela Merkel", MentionType::Person);
        let (a, _) = Article::new("1", "Angela Merkel's team praised the G7 summit.", None, vec![]);
        let m = tagger.tag(&a);
        assert_eq!(m.len(), 2);
        assert_eq!(m[0].surface, "Angela Merkel's");
        assert_eq!((m[1].start, m[1].end), (5, 7));
    }
}
