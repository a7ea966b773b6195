//! Gazetteer-backed location extraction with containment resolution.
//!
//! Gazetteer TSV columns:
//! `id<TAB>canonical<TAB>aliases (|-separated)<TAB>admin_chain (>-separated)<TAB>feature_class`.
//! The admin chain lists ancestor canonical names from the top down, e.g.
//! `United States>New York State`. Lines starting with `#` and a header row
//! whose first field is `id` are skipped.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::io::BufRead;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::{Article, Corpus};
use crate::error::{Error, Result};
use crate::text;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureClass {
    Other,
    Country,
    Region,
    City,
}

impl FeatureClass {
    /// Higher is more specific; used to break surface-form ties.
    fn specificity(self) -> u8 {
        match self {
            FeatureClass::City => 3,
            FeatureClass::Region => 2,
            FeatureClass::Country => 1,
            FeatureClass::Other => 0,
        }
    }
}

impl FromStr for FeatureClass {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim().to_lowercase().as_str() {
            "country" => Ok(FeatureClass::Country),
            "region" => Ok(FeatureClass::Region),
            "city" => Ok(FeatureClass::City),
            "other" | "" => Ok(FeatureClass::Other),
            other => Err(format!("unknown feature class {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GazetteerEntry {
    pub id: String,
    pub canonical: String,
    pub aliases: Vec<String>,
    pub admin_chain: Vec<String>,
    pub feature_class: FeatureClass,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LocationMention {
    pub surface: String,
    pub canonical: String,
    pub gazetteer_id: String,
    pub sentence_index: usize,
    pub token_span: (usize, usize),
}

/// Case-insensitive longest-match index over canonical names and aliases.
#[derive(Debug, Clone, Default)]
pub struct GazetteerIndex {
    entries: Vec<GazetteerEntry>,
    by_surface: HashMap<Vec<String>, usize>,
    by_canonical: HashMap<String, usize>,
    /// Lowercased canonical names of all transitive ancestors, per entry.
    ancestors: Vec<HashSet<String>>,
    max_len: usize,
}

fn canon_key(name: &str) -> String {
    text::normalize_name(name).join(" ")
}

impl GazetteerIndex {
    pub fn from_entries(entries: Vec<GazetteerEntry>) -> Result<Self> {
        let mut by_canonical = HashMap::new();
        let mut ids = HashSet::new();
        for (i, e) in entries.iter().enumerate() {
            if e.canonical.trim().is_empty() {
                return Err(Error::Gazetteer(format!("entry {} has empty canonical", e.id)));
            }
            if !ids.insert(e.id.clone()) {
                return Err(Error::Gazetteer(format!("duplicate id {}", e.id)));
            }
            by_canonical.entry(canon_key(&e.canonical)).or_insert(i);
        }

        // Parent edges: every chain member that names a known entry.
        let parents: Vec<Vec<usize>> = entries
            .iter()
            .map(|e| {
                e.admin_chain
                    .iter()
                    .filter_map(|a| by_canonical.get(&canon_key(a)).copied())
                    .collect()
            })
            .collect();
        if let Some(cycle) = find_cycle(&parents) {
            let ids: Vec<&str> = cycle.iter().map(|&i| entries[i].id.as_str()).collect();
            return Err(Error::Gazetteer(format!(
                "cyclic admin_chain through ids {}",
                ids.join(" -> ")
            )));
        }
        let ancestors = (0..entries.len())
            .map(|i| {
                let mut seen = HashSet::new();
                let mut names: HashSet<String> = entries[i].admin_chain.iter().map(|a| canon_key(a)).collect();
                let mut stack = parents[i].clone();
                while let Some(p) = stack.pop() {
                    if seen.insert(p) {
                        names.insert(canon_key(&entries[p].canonical));
                        names.extend(entries[p].admin_chain.iter().map(|a| canon_key(a)));
                        stack.extend(&parents[p]);
                    }
                }
                names
            })
            .collect();

        let mut index = GazetteerIndex {
            entries,
            by_surface: HashMap::new(),
            by_canonical,
            ancestors,
            max_len: 0,
        };
        for i in 0..index.entries.len() {
            let e = &index.entries[i];
            let surfaces: Vec<Vec<String>> = std::iter::once(&e.canonical)
                .chain(&e.aliases)
                .map(|s| text::normalize_name(s))
                .filter(|k| !k.is_empty())
                .collect();
            for key in surfaces {
                index.max_len = index.max_len.max(key.len());
                match index.by_surface.get(&key) {
                    Some(&j) if !index.prefer(i, j) => {}
                    _ => {
                        index.by_surface.insert(key, i);
                    }
                }
            }
        }
        Ok(index)
    }

    /// Whether entry `a` should win a shared surface form over entry `b`.
    fn prefer(&self, a: usize, b: usize) -> bool {
        let (ea, eb) = (&self.entries[a], &self.entries[b]);
        let (sa, sb) = (ea.feature_class.specificity(), eb.feature_class.specificity());
        sa > sb || (sa == sb && ea.id < eb.id)
    }

    pub fn entries(&self) -> &[GazetteerEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Looks up a surface form (canonical or alias), case-insensitively.
    pub fn lookup(&self, surface: &str) -> Option<&GazetteerEntry> {
        self.by_surface
            .get(&text::normalize_name(surface))
            .map(|&i| &self.entries[i])
    }

    pub fn by_canonical(&self, canonical: &str) -> Option<&GazetteerEntry> {
        self.by_canonical.get(&canon_key(canonical)).map(|&i| &self.entries[i])
    }

    /// Whether `ancestor` lies on `place`'s administrative chain.
    pub fn is_ancestor(&self, ancestor: &str, place: &str) -> bool {
        match self.by_canonical.get(&canon_key(place)) {
            Some(&i) => self.ancestors[i].contains(&canon_key(ancestor)),
            None => false,
        }
    }

    /// Every surface form of a canonical name (itself plus aliases).
    pub fn surfaces(&self, canonical: &str) -> Vec<String> {
        match self.by_canonical(canonical) {
            Some(e) => std::iter::once(e.canonical.clone())
                .chain(e.aliases.iter().cloned())
                .collect(),
            None => vec![canonical.to_string()],
        }
    }
}

/// Returns the ids along one cycle in the parent graph, if any.
fn find_cycle(parents: &[Vec<usize>]) -> Option<Vec<usize>> {
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        New,
        Active,
        Done,
    }
    fn visit(n: usize, parents: &[Vec<usize>], marks: &mut [Mark], path: &mut Vec<usize>) -> Option<Vec<usize>> {
        marks[n] = Mark::Active;
        path.push(n);
        for &p in &parents[n] {
            match marks[p] {
                Mark::Active => {
                    let start = path.iter().position(|&x| x == p).expect("on path");
                    let mut cycle = path[start..].to_vec();
                    cycle.push(p);
                    return Some(cycle);
                }
                Mark::New => {
                    if let Some(c) = visit(p, parents, marks, path) {
                        return Some(c);
                    }
                }
                Mark::Done => {}
            }
        }
        path.pop();
        marks[n] = Mark::Done;
        None
    }
    let mut marks = vec![Mark::New; parents.len()];
    for n in 0..parents.len() {
        if marks[n] == Mark::New {
            if let Some(c) = visit(n, parents, &mut marks, &mut Vec::new()) {
                return Some(c);
            }
        }
    }
    None
}

fn split_list(field: &str, sep: char) -> Vec<String> {
    field
        .split(sep)
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(String::from)
        .collect()
}

pub fn build_gazetteer_index(path: impl AsRef<Path>) -> Result<GazetteerIndex> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_gazetteer(std::io::BufReader::new(file), path)
}

pub fn read_gazetteer<R: BufRead>(reader: R, path: &Path) -> Result<GazetteerIndex> {
    let mut entries = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if i == 0 && cols[0].trim() == "id" {
            continue;
        }
        if cols.len() != 5 {
            return Err(Error::parse(
                path,
                i + 1,
                format!("expected 5 tab-separated columns, found {}", cols.len()),
            ));
        }
        let feature_class = cols[4].parse().map_err(|e| Error::parse(path, i + 1, e))?;
        entries.push(GazetteerEntry {
            id: cols[0].trim().to_string(),
            canonical: cols[1].trim().to_string(),
            aliases: split_list(cols[2], '|'),
            admin_chain: split_list(cols[3], '>'),
            feature_class,
        });
    }
    GazetteerIndex::from_entries(entries)
}

/// Longest-match scan of every sentence. Possessive `'s` is stripped before
/// lookup and matches never overlap.
pub fn match_locations(article: &Article, index: &GazetteerIndex) -> Vec<LocationMention> {
    let mut out = Vec::new();
    for (si, sent) in article.raw_sentences.iter().enumerate() {
        let norm: Vec<String> = sent.iter().map(|t| text::normalize_token(&t.text)).collect();
        let mut i = 0;
        while i < norm.len() {
            let mut hit = None;
            if !norm[i].is_empty() {
                for len in (1..=index.max_len.min(norm.len() - i)).rev() {
                    if let Some(&e) = index.by_surface.get(&norm[i..i + len]) {
                        hit = Some((len, e));
                        break;
                    }
                }
            }
            match hit {
                Some((len, e)) => {
                    let entry = &index.entries[e];
                    let surface = sent[i..i + len]
                        .iter()
                        .map(|t| t.text.as_str())
                        .collect::<Vec<_>>()
                        .join(" ");
                    out.push(LocationMention {
                        surface,
                        canonical: entry.canonical.clone(),
                        gazetteer_id: entry.id.clone(),
                        sentence_index: si,
                        token_span: (i, i + len),
                    });
                    i += len;
                }
                None => i += 1,
            }
        }
    }
    out
}

/// Drops every location that is an administrative ancestor of another
/// co-occurring location. Survivors keep first-mention order.
pub fn resolve_containment(mentions: &[LocationMention], index: &GazetteerIndex) -> Vec<String> {
    let mut names: Vec<String> = Vec::new();
    for m in mentions {
        if !names.contains(&m.canonical) {
            names.push(m.canonical.clone());
        }
    }
    resolve_names(&names, index)
}

fn resolve_names(names: &[String], index: &GazetteerIndex) -> Vec<String> {
    names
        .iter()
        .filter(|a| !names.iter().any(|b| b != *a && index.is_ancestor(a, b)))
        .cloned()
        .collect()
}

/// Where containment is resolved.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ContainmentScope {
    /// Per article, before candidates are pooled across articles.
    #[default]
    Article,
    /// Once over the pooled candidates of a (celebrity, date).
    Pool,
}

/// Location mentions and candidate sets for every article in a corpus.
#[derive(Debug, Clone)]
pub struct CorpusLocations {
    mentions: Vec<Vec<LocationMention>>,
    candidates: Vec<Vec<String>>,
    scope: ContainmentScope,
    index: GazetteerIndex,
}

impl CorpusLocations {
    pub fn extract(corpus: &Corpus, index: &GazetteerIndex, scope: ContainmentScope) -> Self {
        let mentions: Vec<Vec<LocationMention>> = corpus.articles().iter().map(|a| match_locations(a, index)).collect();
        let candidates = mentions
            .iter()
            .map(|m| match scope {
                ContainmentScope::Article => resolve_containment(m, index),
                ContainmentScope::Pool => {
                    let mut names: Vec<String> = Vec::new();
                    for x in m {
                        if !names.contains(&x.canonical) {
                            names.push(x.canonical.clone());
                        }
                    }
                    names
                }
            })
            .collect();
        Self {
            mentions,
            candidates,
            scope,
            index: index.clone(),
        }
    }

    pub fn mentions(&self, article: usize) -> &[LocationMention] {
        &self.mentions[article]
    }

    pub fn candidates(&self, article: usize) -> &[String] {
        &self.candidates[article]
    }

    pub fn gazetteer(&self) -> &GazetteerIndex {
        &self.index
    }

    /// Union of the candidate sets of `articles`, first-seen order.
    pub fn pooled_candidates(&self, articles: &[usize]) -> Vec<String> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        for &a in articles {
            for c in &self.candidates[a] {
                if seen.insert(c.clone()) {
                    out.push(c.clone());
                }
            }
        }
        match self.scope {
            ContainmentScope::Article => out,
            ContainmentScope::Pool => resolve_names(&out, &self.index),
        }
    }

    /// Number of mentions of `canonical` across `articles`.
    pub fn mention_count(&self, articles: &[usize], canonical: &str) -> usize {
        articles
            .iter()
            .map(|&a| self.mentions[a].iter().filter(|m| m.canonical == canonical).count())
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    const FIXTURE: &str = "id\tcanonical\taliases\tadmin_chain\tfeature_class
us\tUnited States\tUSA|U.S.\t\tcountry
ny\tNew York\t\tUnited States\tregion
nyc\tNew York City\tNYC\tUnited States>New York\tcity
nk\tNorth Korea\tDPRK\t\tcountry
fr\tFrance\t\t\tcountry
par\tParis\t\tFrance\tcity
ber\tBerlin\t\tGermany\tcity
";

    fn index() -> GazetteerIndex {
        read_gazetteer(Cursor::new(FIXTURE), Path::new("fixture.tsv")).unwrap()
    }

    fn mentions(text: &str) -> Vec<LocationMention> {
        let (a, _) = Article::new("a", text, None, vec![]);
        match_locations(&a, &index())
    }

    #[test]
    fn canonicals_and_aliases_resolve() {
        let idx = index();
        assert_eq!(idx.len(), 7);
        assert_eq!(idx.lookup("nyc").unwrap().canonical, "New York City");
        assert_eq!(idx.lookup("PARIS").unwrap().id, "par");
        assert!(idx.lookup("London").is_none());
    }

    #[test]
    fn cycle_is_rejected_with_ids() {
        let bad = "a\tAlpha\t\tBeta\tregion\nb\tBeta\t\tAlpha\tregion\n";
        let err = read_gazetteer(Cursor::new(bad), Path::new("bad.tsv")).unwrap_err();
        let msg = err.to_string();
        assert!(
            msg.contains("cyclic") && msg.contains('a') && msg.contains('b'),
            "{msg}"
        );
    }

    #[test]
    fn possessive_is_stripped() {
        let m = mentions("North Korea's missile test worried Paris.");
        assert_eq!(m[0].canonical, "North Korea");
        assert_eq!(m[0].token_span, (0, 2));
        assert_eq!(m[1].canonical, "Paris");
    }

    #[test]
    fn longest_match_wins() {
        let m = mentions("The New York City mayor spoke.");
        assert_eq!(m.len(), 1);
        assert_eq!(m[0].canonical, "New York City");
    }

    #[test]
    fn no_place_no_mentions() {
        assert!(mentions("Nothing to see.").is_empty());
    }

    #[test]
    fn containment() {
        let idx = index();
        let m = mentions("He flew from the United States to New York.");
        assert_eq!(resolve_containment(&m, &idx), vec!["New York"]);
        let m = mentions("Paris and Berlin.");
        assert_eq!(resolve_containment(&m, &idx), vec!["Paris", "Berlin"]);
        let m = mentions("The United States said so.");
        assert_eq!(resolve_containment(&m, &idx), vec!["United States"]);
        // Transitive: the city suppresses both the state and the country.
        let m = mentions("United States, New York and NYC.");
        assert_eq!(resolve_containment(&m, &idx), vec!["New York City"]);
    }

    #[test]
    fn tie_prefers_specific_class_then_id() {
        let entries = vec![
            GazetteerEntry {
                id: "z".into(),
                canonical: "Georgia".into(),
                aliases: vec![],
                admin_chain: vec![],
                feature_class: FeatureClass::Country,
            },
            GazetteerEntry {
                id: "y".into(),
                canonical: "Georgia".into(),
                aliases: vec![],
                admin_chain: vec!["United States".into()],
                feature_class: FeatureClass::Region,
            },
            GazetteerEntry {
                id: "b".into(),
                canonical: "Springfield".into(),
                aliases: vec![],
                admin_chain: vec![],
                feature_class: FeatureClass::City,
            },
            GazetteerEntry {
                id: "a".into(),
                canonical: "Springfield".into(),
                aliases: vec![],
                admin_chain: vec![],
                feature_class: FeatureClass::City,
            },
        ];
        let idx = GazetteerIndex::from_entries(entries).unwrap();
        assert_eq!(idx.lookup("georgia").unwrap().id, "y");
        assert_eq!(idx.lookup("springfield").unwrap().id, "a");
    }
}
