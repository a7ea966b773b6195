//! Word-article graphs for candidate locations and trip graphs for days.

use std::collections::HashMap;

use ndarray::Array2;

use crate::corpus::{Article, Corpus, MentionType};
use crate::error::{Error, Result};
use crate::features::{TfidfModel, WordVectors};
use crate::text;

pub const DEFAULT_WINDOW: usize = 15;

/// Heterogeneous graph over unique stems and the articles of one candidate.
/// Word nodes come first, in first-occurrence order.
#[derive(Debug, Clone, PartialEq)]
pub struct WordArticleGraph {
    pub word_nodes: Vec<String>,
    pub article_nodes: Vec<String>,
    /// Symmetric 0/1 adjacency with unit diagonal, words then articles.
    pub adjacency: Array2<f64>,
    pub x_w: Array2<f64>,
    pub x_a: Array2<f64>,
    pub lw_idx: Vec<usize>,
    pub cw_idx: Vec<usize>,
}

impl WordArticleGraph {
    pub fn num_nodes(&self) -> usize {
        self.word_nodes.len() + self.article_nodes.len()
    }
}

fn name_indices(names: &[&str], index: &HashMap<&str, usize>) -> Vec<usize> {
    let mut out: Vec<usize> = names
        .iter()
        .flat_map(|n| text::name_stems(n))
        .filter_map(|s| index.get(s.as_str()).copied())
        .collect();
    out.sort_unstable();
    out.dedup();
    out
}

/// Builds the graph for `articles` (`A_{c,d,loc}`).
///
/// `location_names` holds the canonical name and every surface form that
/// matched it; `lw_idx` collects the word nodes of all their stems. Two
/// stems are linked when they lie within `window` consecutive stems of one
/// sentence.
pub fn build_word_article_graph(
    articles: &[&Article],
    location_names: &[&str],
    celebrity: &str,
    wv: &WordVectors,
    tfidf: &TfidfModel,
    window: usize,
) -> Result<WordArticleGraph> {
    if articles.is_empty() {
        return Err(Error::Graph("no articles for location".into()));
    }
    if window < 2 {
        return Err(Error::Graph(format!("window must be at least 2, got {window}")));
    }
    let mut word_nodes: Vec<String> = Vec::new();
    let mut index: HashMap<&str, usize> = HashMap::new();
    for a in articles {
        for s in a.sentences.iter().flatten() {
            if !index.contains_key(s.as_str()) {
                index.insert(s, word_nodes.len());
                word_nodes.push(s.clone());
            }
        }
    }
    let lw_idx = name_indices(location_names, &index);
    let cw_idx = name_indices(&[celebrity], &index);
    if lw_idx.is_empty() {
        return Err(Error::Graph(format!(
            "no word node for location {:?}",
            location_names.first().copied().unwrap_or_default()
        )));
    }
    if cw_idx.is_empty() {
        return Err(Error::Graph(format!("no word node for celebrity {celebrity:?}")));
    }

    let (iota, tau) = (word_nodes.len(), articles.len());
    let mut adj = Array2::<f64>::eye(iota + tau);
    for (ai, a) in articles.iter().enumerate() {
        for sent in &a.sentences {
            let ids: Vec<usize> = sent.iter().map(|s| index[s.as_str()]).collect();
            for (i, &u) in ids.iter().enumerate() {
                adj[[u, iota + ai]] = 1.0;
                adj[[iota + ai, u]] = 1.0;
                for &v in &ids[i + 1..(i + window).min(ids.len())] {
                    adj[[u, v]] = 1.0;
                    adj[[v, u]] = 1.0;
                }
            }
        }
    }

    let mut x_w = Array2::zeros((iota, wv.dim()));
    for (i, w) in word_nodes.iter().enumerate() {
        if let Some(v) = wv.get(w) {
            x_w.row_mut(i).assign(&v);
        }
    }
    let mut x_a = Array2::zeros((tau, tfidf.dim()));
    for (i, a) in articles.iter().enumerate() {
        x_a.row_mut(i).assign(&tfidf.transform(a));
    }
    Ok(WordArticleGraph {
        word_nodes,
        article_nodes: articles.iter().map(|a| a.id.clone()).collect(),
        adjacency: adj,
        x_w,
        x_a,
        lw_idx,
        cw_idx,
    })
}

/// An entity or event node of a trip graph, keyed by its normalized surface.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TripNode {
    pub key: String,
    pub surface: String,
    pub kind: MentionType,
    /// Candidate locations (by index) whose articles mention this node.
    pub locations: Vec<usize>,
}

/// Graph over the candidate locations of one (celebrity, date) plus the
/// entities and events found in their articles.
#[derive(Debug, Clone, PartialEq)]
pub struct TripGraph {
    pub locations: Vec<String>,
    pub entities: Vec<TripNode>,
    pub events: Vec<TripNode>,
}

impl TripGraph {
    pub fn num_nodes(&self) -> usize {
        self.locations.len() + self.entities.len() + self.events.len()
    }

    /// Symmetric adjacency with self-loops; rows are locations, then
    /// entities, then events.
    pub fn adjacency(&self) -> Array2<f64> {
        let n = self.num_nodes();
        let k = self.locations.len();
        let mut adj = Array2::eye(n);
        let others = self.entities.iter().chain(&self.events);
        for (i, node) in others.enumerate() {
            for &l in &node.locations {
                adj[[k + i, l]] = 1.0;
                adj[[l, k + i]] = 1.0;
            }
        }
        adj
    }
}

/// Links each candidate location to the person, group, facility and
/// organization mentions (entity nodes) and event mentions (event nodes) in
/// its article subset.
pub fn build_trip_graph(candidates: &[(String, Vec<usize>)], corpus: &Corpus) -> Result<TripGraph> {
    if candidates.is_empty() {
        return Err(Error::Graph("trip graph needs at least one location".into()));
    }
    let mut entities: Vec<TripNode> = Vec::new();
    let mut events: Vec<TripNode> = Vec::new();
    let mut ent_pos: HashMap<String, usize> = HashMap::new();
    let mut eve_pos: HashMap<String, usize> = HashMap::new();
    for (li, (_, articles)) in candidates.iter().enumerate() {
        for &ai in articles {
            for m in &corpus.get(ai).mentions {
                let (nodes, pos) = if m.kind.is_entity() {
                    (&mut entities, &mut ent_pos)
                } else if m.kind == MentionType::Event {
                    (&mut events, &mut eve_pos)
                } else {
                    continue;
                };
                let key = text::normalize_name(&m.surface).join(" ");
                if key.is_empty() {
                    continue;
                }
                let i = *pos.entry(key.clone()).or_insert_with(|| {
                    nodes.push(TripNode {
                        key,
                        surface: m.surface.clone(),
                        kind: m.kind,
                        locations: Vec::new(),
                    });
                    nodes.len() - 1
                });
                if !nodes[i].locations.contains(&li) {
                    nodes[i].locations.push(li);
                }
            }
        }
    }
    Ok(TripGraph {
        locations: candidates.iter().map(|(l, _)| l.clone()).collect(),
        entities,
        events,
    })
}
