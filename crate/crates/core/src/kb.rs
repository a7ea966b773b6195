//! Offline knowledge base: triples, pre-trained entity/relation embeddings,
//! strict entity linking and 1-hop entity sub-graphs.

use std::collections::HashMap;
use std::io::BufRead;
use std::path::Path;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::features::{load_word_vectors, WordVectors};
use crate::text;

pub const DEFAULT_KB_DIM: usize = 50;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Triple {
    pub head: String,
    pub relation: String,
    pub tail: String,
}

#[derive(Debug, Clone)]
pub struct KnowledgeBase {
    triples: Vec<Triple>,
    /// Triple indices touching each entity (as head or tail).
    incident: HashMap<String, Vec<usize>>,
    labels: HashMap<String, String>,
    entities: WordVectors,
    relations: WordVectors,
}

fn label_key(label: &str) -> String {
    text::normalize_name(label).join(" ")
}

impl KnowledgeBase {
    /// Entity ids double as labels once `_` becomes a space, so
    /// `Angela_Merkel` links from "Angela Merkel".
    pub fn new(triples: Vec<Triple>, entities: WordVectors, relations: WordVectors) -> Result<Self> {
        if entities.dim() != relations.dim() && !entities.is_empty() && !relations.is_empty() {
            return Err(Error::Invalid(format!(
                "entity dim {} differs from relation dim {}",
                entities.dim(),
                relations.dim()
            )));
        }
        let mut incident: HashMap<String, Vec<usize>> = HashMap::new();
        let mut labels = HashMap::new();
        for (i, t) in triples.iter().enumerate() {
            incident.entry(t.head.clone()).or_default().push(i);
            if t.tail != t.head {
                incident.entry(t.tail.clone()).or_default().push(i);
            }
        }
        let ids = incident.keys().cloned().chain(entities.words().iter().cloned());
        for id in ids.collect::<Vec<_>>() {
            let key = label_key(&id.replace('_', " "));
            if !key.is_empty() {
                labels.entry(key).or_insert(id);
            }
        }
        Ok(Self {
            triples,
            incident,
            labels,
            entities,
            relations,
        })
    }

    /// Loads the triples TSV and the two embedding files, plus an optional
    /// `id<TAB>label` file adding extra link labels.
    pub fn load(
        triples: impl AsRef<Path>,
        entity_vectors: impl AsRef<Path>,
        relation_vectors: impl AsRef<Path>,
        labels: Option<&Path>,
    ) -> Result<Self> {
        let path = triples.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let triples = read_triples(std::io::BufReader::new(file), path)?;
        let mut kb = Self::new(
            triples,
            load_word_vectors(entity_vectors)?,
            load_word_vectors(relation_vectors)?,
        )?;
        if let Some(path) = labels {
            let raw = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            for (i, line) in raw.lines().enumerate() {
                if line.trim().is_empty() {
                    continue;
                }
                let (id, label) = line
                    .split_once('\t')
                    .ok_or_else(|| Error::parse(path, i + 1, "expected id<TAB>label"))?;
                kb.add_label(id.trim(), label.trim());
            }
        }
        Ok(kb)
    }

    pub fn add_label(&mut self, id: &str, label: &str) {
        let key = label_key(label);
        if !key.is_empty() {
            self.labels.insert(key, id.to_string());
        }
    }

    pub fn dim(&self) -> usize {
        if self.entities.is_empty() {
            self.relations.dim()
        } else {
            self.entities.dim()
        }
    }

    pub fn triples(&self) -> &[Triple] {
        &self.triples
    }

    pub fn contains(&self, id: &str) -> bool {
        self.incident.contains_key(id) || self.entities.get(id).is_some()
    }

    fn entity_vector(&self, id: &str) -> Vec<f64> {
        self.entities
            .get(id)
            .map(|v| v.to_vec())
            .unwrap_or_else(|| vec![0.0; self.dim()])
    }

    fn relation_vector(&self, id: &str) -> Vec<f64> {
        self.relations
            .get(id)
            .map(|v| v.to_vec())
            .unwrap_or_else(|| vec![0.0; self.dim()])
    }
}

pub fn read_triples<R: BufRead>(reader: R, path: &Path) -> Result<Vec<Triple>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').map(str::trim).collect();
        match cols.as_slice() {
            [h, r, t] if !h.is_empty() && !r.is_empty() && !t.is_empty() => out.push(Triple {
                head: h.to_string(),
                relation: r.to_string(),
                tail: t.to_string(),
            }),
            _ => return Err(Error::parse(path, i + 1, "expected head<TAB>relation<TAB>tail")),
        }
    }
    Ok(out)
}

/// Exact match of the normalized surface (lowercased, possessive and
/// punctuation stripped) against knowledge-base labels.
pub fn link_entity(surface: &str, kb: &KnowledgeBase) -> Option<String> {
    kb.labels.get(&label_key(surface)).cloned()
}

/// 1-hop neighbourhood of one entity.
#[derive(Debug, Clone, PartialEq)]
pub struct EntitySubgraph {
    pub center: String,
    /// `nodes[0]` is the center.
    pub nodes: Vec<String>,
    pub relations: Vec<String>,
    /// `(head node, relation, tail node)` as indices into `nodes` / `relations`.
    pub edges: Vec<(usize, usize, usize)>,
    pub node_init: Array2<f64>,
    pub relation_init: Array2<f64>,
}

impl EntitySubgraph {
    /// `(neighbour node, relation)` for every edge touching the center,
    /// ignoring direction.
    pub fn incident(&self) -> Vec<(usize, usize)> {
        self.edges
            .iter()
            .filter_map(|&(h, r, t)| match (h == 0, t == 0) {
                (true, _) => Some((t, r)),
                (false, true) => Some((h, r)),
                _ => None,
            })
            .collect()
    }

    /// Stacked neighbour and relation embeddings for the incident edges.
    pub fn incident_matrices(&self) -> (Array2<f64>, Array2<f64>) {
        let inc = self.incident();
        let d = self.node_init.ncols();
        let mut u = Array2::zeros((inc.len(), d));
        let mut l = Array2::zeros((inc.len(), d));
        for (i, &(n, r)) in inc.iter().enumerate() {
            u.row_mut(i).assign(&self.node_init.row(n));
            l.row_mut(i).assign(&self.relation_init.row(r));
        }
        (u, l)
    }
}

/// `None` when `entity` is unknown to the knowledge base.
pub fn build_entity_subgraph(entity: &str, kb: &KnowledgeBase) -> Option<EntitySubgraph> {
    if !kb.contains(entity) {
        return None;
    }
    let mut nodes = vec![entity.to_string()];
    let mut relations: Vec<String> = Vec::new();
    let mut edges = Vec::new();
    fn position(list: &mut Vec<String>, id: &str) -> usize {
        list.iter().position(|x| x == id).unwrap_or_else(|| {
            list.push(id.to_string());
            list.len() - 1
        })
    }
    for &ti in kb.incident.get(entity).map(Vec::as_slice).unwrap_or_default() {
        let t = &kb.triples[ti];
        let h = position(&mut nodes, &t.head);
        let tl = position(&mut nodes, &t.tail);
        let r = position(&mut relations, &t.relation);
        edges.push((h, r, tl));
    }
    let d = kb.dim();
    let mut node_init = Array2::zeros((nodes.len(), d));
    for (i, n) in nodes.iter().enumerate() {
        node_init.row_mut(i).assign(&ndarray::Array1::from(kb.entity_vector(n)));
    }
    let mut relation_init = Array2::zeros((relations.len(), d));
    for (i, r) in relations.iter().enumerate() {
        relation_init
            .row_mut(i)
            .assign(&ndarray::Array1::from(kb.relation_vector(r)));
    }
    Some(EntitySubgraph {
        center: entity.to_string(),
        nodes,
        relations,
        edges,
        node_init,
        relation_init,
    })
}
