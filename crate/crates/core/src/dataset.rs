//! Per-day model inputs assembled from trip instances.

use std::collections::HashMap;

use chrono::{Duration, NaiveDate};
use ndarray::{Array1, Array2};

use crate::corpus::{Corpus, TripInstance};
use crate::error::Result;
use crate::features::{sentence_vector, TfidfModel, WordVectors};
use crate::geo::CorpusLocations;
use crate::graphs::{build_trip_graph, build_word_article_graph, TripNode};
use crate::kb::{build_entity_subgraph, link_entity, KnowledgeBase};
use crate::model::{EntityInput, EventInput, TripInput};
use crate::text;

/// Shared resources for turning instances into model inputs.
pub struct FeatureContext<'a> {
    pub corpus: &'a Corpus,
    pub locations: &'a CorpusLocations,
    pub word_vectors: &'a WordVectors,
    pub tfidf: &'a TfidfModel,
    pub kb: Option<&'a KnowledgeBase>,
    pub window: usize,
    pub q: usize,
    by_date: HashMap<NaiveDate, Vec<usize>>,
}

impl<'a> FeatureContext<'a> {
    pub fn new(
        corpus: &'a Corpus,
        locations: &'a CorpusLocations,
        word_vectors: &'a WordVectors,
        tfidf: &'a TfidfModel,
        kb: Option<&'a KnowledgeBase>,
        window: usize,
        q: usize,
    ) -> Self {
        let mut by_date: HashMap<NaiveDate, Vec<usize>> = HashMap::new();
        for (i, a) in corpus.articles().iter().enumerate() {
            if let Some(d) = a.publish_date {
                by_date.entry(d).or_default().push(i);
            }
        }
        Self {
            corpus,
            locations,
            word_vectors,
            tfidf,
            kb,
            window,
            q,
            by_date,
        }
    }

    fn published_on(&self, d: NaiveDate) -> &[usize] {
        self.by_date.get(&d).map(Vec::as_slice).unwrap_or_default()
    }

    fn entity_input(&self, node: &TripNode) -> EntityInput {
        let subgraph = self
            .kb
            .and_then(|kb| link_entity(&node.surface, kb).and_then(|id| build_entity_subgraph(&id, kb)))
            .map(|g| g.incident_matrices());
        EntityInput {
            name: node.surface.clone(),
            init: sentence_vector(&text::name_stems(&node.surface), self.word_vectors),
            subgraph,
        }
    }

    /// Sentence vectors of every sentence naming the event in articles
    /// published on `date`, and daily counts of articles naming it.
    fn event_input(&self, node: &TripNode, date: NaiveDate) -> EventInput {
        let needle = text::normalize_name(&node.surface);
        let mut rows: Vec<Array1<f64>> = Vec::new();
        for &ai in self.published_on(date) {
            let a = self.corpus.get(ai);
            for si in 0..a.raw_sentences.len() {
                if !text::find_token_run(&a.normalized_sentence(si), &needle).is_empty() {
                    rows.push(sentence_vector(&a.sentences[si], self.word_vectors));
                }
            }
        }
        let q = self.q as i64;
        let counts = (-q..=q)
            .map(|off| {
                self.published_on(date + Duration::days(off))
                    .iter()
                    .filter(|&&ai| self.corpus.get(ai).mentions_name(&node.surface))
                    .count() as f64
            })
            .collect();
        let dim = self.word_vectors.dim();
        let mut sentences = Array2::zeros((rows.len(), dim));
        for (i, r) in rows.iter().enumerate() {
            sentences.row_mut(i).assign(r);
        }
        EventInput {
            name: node.surface.clone(),
            init: sentence_vector(&text::name_stems(&node.surface), self.word_vectors),
            sentences,
            counts,
        }
    }
}

/// One (celebrity, date) ready for the model.
#[derive(Debug, Clone)]
pub struct DaySample {
    pub celebrity: String,
    pub date: NaiveDate,
    pub locations: Vec<String>,
    /// Index of each location's instance in the source list.
    pub instance_idx: Vec<usize>,
    /// 0/1 per location when every instance carries a label.
    pub labels: Option<Vec<f64>>,
    pub input: TripInput,
}

/// An instance left out of the samples, with the reason.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DroppedInstance {
    pub index: usize,
    pub reason: String,
}

/// Groups instances by (celebrity, date) in first-seen order and builds a
/// sample per group. Instances whose word-article graph cannot be built are
/// dropped and reported.
pub fn build_samples(
    instances: &[TripInstance],
    ctx: &FeatureContext<'_>,
) -> Result<(Vec<DaySample>, Vec<DroppedInstance>)> {
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut pos: HashMap<(&str, NaiveDate), usize> = HashMap::new();
    for (i, inst) in instances.iter().enumerate() {
        let g = *pos.entry((inst.celebrity.as_str(), inst.date)).or_insert_with(|| {
            groups.push(Vec::new());
            groups.len() - 1
        });
        groups[g].push(i);
    }

    let mut samples = Vec::new();
    let mut dropped = Vec::new();
    for members in groups {
        let first = &instances[members[0]];
        let mut graphs = Vec::new();
        let mut kept = Vec::new();
        let mut candidates = Vec::new();
        for &i in &members {
            let inst = &instances[i];
            let articles: Vec<usize> = match inst
                .article_ids
                .iter()
                .map(|id| ctx.corpus.index_of(id).ok_or(id))
                .collect::<std::result::Result<_, _>>()
            {
                Ok(a) => a,
                Err(id) => {
                    dropped.push(DroppedInstance {
                        index: i,
                        reason: format!("unknown article id {id}"),
                    });
                    continue;
                }
            };
            let mut names: Vec<String> = vec![inst.location.clone()];
            for &a in &articles {
                for m in ctx.locations.mentions(a) {
                    if m.canonical == inst.location && !names.contains(&m.surface) {
                        names.push(m.surface.clone());
                    }
                }
            }
            let name_refs: Vec<&str> = names.iter().map(String::as_str).collect();
            let refs: Vec<&crate::corpus::Article> = articles.iter().map(|&a| ctx.corpus.get(a)).collect();
            match build_word_article_graph(
                &refs,
                &name_refs,
                &inst.celebrity,
                ctx.word_vectors,
                ctx.tfidf,
                ctx.window,
            ) {
                Ok(g) => {
                    graphs.push(g);
                    kept.push(i);
                    candidates.push((inst.location.clone(), articles));
                }
                Err(e) => {
                    log::warn!("dropping {} / {} / {}: {e}", inst.celebrity, inst.date, inst.location);
                    dropped.push(DroppedInstance {
                        index: i,
                        reason: e.to_string(),
                    });
                }
            }
        }
        if kept.is_empty() {
            continue;
        }
        let trip = build_trip_graph(&candidates, ctx.corpus)?;
        let entities = trip.entities.iter().map(|n| ctx.entity_input(n)).collect();
        let events = trip.events.iter().map(|n| ctx.event_input(n, first.date)).collect();
        let labels = kept
            .iter()
            .map(|&i| instances[i].label.map(|l| l.as_f64()))
            .collect::<Option<Vec<f64>>>();
        samples.push(DaySample {
            celebrity: first.celebrity.clone(),
            date: first.date,
            locations: trip.locations.clone(),
            instance_idx: kept,
            labels,
            input: TripInput {
                graphs,
                entities,
                events,
                adjacency: trip.adjacency(),
            },
        });
    }
    Ok((samples, dropped))
}
