use celetrip_tensor::{Tape, Tensor};
use ndarray::{Array1, Array2};

use super::{ContextParams, GatParams, Linear, Model};
use crate::error::{Error, Result};
use crate::graphs::WordArticleGraph;

const LEAKY_SLOPE: f64 = 0.2;
const ELU_ALPHA: f64 = 1.0;

fn linear<'t>(tape: &'t Tape, model: &Model, l: Linear, x: Tensor<'t>) -> Result<Tensor<'t>> {
    let w = tape.param(&model.params, l.w);
    let b = tape.param(&model.params, l.b);
    Ok(x.matmul(w)?.add(b)?)
}

fn row(v: &Array1<f64>) -> Array2<f64> {
    v.clone().insert_axis(ndarray::Axis(0))
}

/// Word rows projected with the word projection stacked on article rows
/// projected with the article projection.
pub fn project_nodes<'t>(tape: &'t Tape, model: &Model, x_w: &Array2<f64>, x_a: &Array2<f64>) -> Result<Tensor<'t>> {
    let words = linear(tape, model, model.ids.word_proj, tape.try_constant(x_w.clone())?)?;
    let articles = linear(tape, model, model.ids.article_proj, tape.try_constant(x_a.clone())?)?;
    Ok(Tensor::concat_rows(&[words, articles])?)
}

/// Single-head graph attention. Returns the updated node states and the
/// `N × N` attention matrix, whose row `i` is a distribution over the
/// neighbours of node `i` (self included via the adjacency's diagonal).
pub fn gat_layer<'t>(
    tape: &'t Tape,
    model: &Model,
    layer: GatParams,
    h: Tensor<'t>,
    adjacency: &Array2<f64>,
) -> Result<(Tensor<'t>, Tensor<'t>)> {
    let n = h.shape().0;
    if adjacency.dim() != (n, n) {
        return Err(Error::Graph(format!(
            "adjacency {:?} does not match {n} nodes",
            adjacency.dim()
        )));
    }
    if let Some(i) = (0..n).find(|&i| adjacency[[i, i]] == 0.0) {
        return Err(Error::Graph(format!("node {i} has no self-loop")));
    }
    let p = |id| tape.param(&model.params, id);
    let wh = h.matmul(p(layer.w))?;
    let src = wh.matmul(p(layer.a_src))?;
    let dst = wh.matmul(p(layer.a_dst))?.t()?;
    let attn = src.add(dst)?.leaky_relu(LEAKY_SLOPE)?.masked_softmax_rows(adjacency)?;
    let out = attn.matmul(wh)?.elu(ELU_ALPHA)?;
    Ok((out, attn))
}

/// Node states just before the readout, with the surviving `lw`/`cw`
/// indices.
pub fn location_node_states<'t>(
    tape: &'t Tape,
    model: &Model,
    graph: &WordArticleGraph,
) -> Result<(Tensor<'t>, Vec<usize>, Vec<usize>)> {
    let mut h = project_nodes(tape, model, &graph.x_w, &graph.x_a)?;
    let mut adj = graph.adjacency.clone();
    let mut lw = graph.lw_idx.clone();
    let mut cw = graph.cw_idx.clone();
    for block in 0..model.config.blocks {
        h = gat_layer(tape, model, model.ids.loc_gat[block], h, &adj)?.0;
        if model.config.use_oriented_pooling {
            let pooled = super::oriented_pooling(tape, model, block, h, &adj, &lw, &cw)?;
            h = pooled.h;
            adj = pooled.adjacency;
            lw = pooled.lw_idx;
            cw = pooled.cw_idx;
        }
    }
    Ok((h, lw, cw))
}

/// Location embedding (`1 × F`): GAT/pooling blocks, max readout, then a
/// linear map to the trip-graph width.
pub fn location_module<'t>(tape: &'t Tape, model: &Model, graph: &WordArticleGraph) -> Result<Tensor<'t>> {
    let (h, _, _) = location_node_states(tape, model, graph)?;
    linear(tape, model, model.ids.loc_out, h.max_rows()?)
}

/// One CompGCN aggregation over the center's incident edges.
///
/// `neighbours` and `relations` hold one row per incident edge. With no
/// edges the result is `tanh(0) = 0`.
pub fn compgcn_layer<'t>(
    tape: &'t Tape,
    model: &Model,
    neighbours: &Array2<f64>,
    relations: &Array2<f64>,
) -> Result<Tensor<'t>> {
    let ContextParams::Full { entity, .. } = model.ids.context else {
        return Err(Error::Invalid("entity module is disabled".into()));
    };
    let kb = model.config.kb_dim;
    if neighbours.nrows() == 0 {
        return Ok(tape.constant(Array2::zeros((1, kb))));
    }
    let p = |id| tape.param(&model.params, id);
    let rel = tape.try_constant(relations.clone())?.matmul(p(entity.w_edge))?;
    let msgs = tape
        .try_constant(neighbours.clone())?
        .mul(rel)?
        .matmul(p(entity.w_es))?;
    let ones = tape.constant(Array2::ones((1, neighbours.nrows())));
    Ok(ones.matmul(msgs)?.tanh()?)
}

/// Precomputed inputs for one entity node.
#[derive(Debug, Clone, PartialEq)]
pub struct EntityInput {
    pub name: String,
    /// Mean word vector of the surface stems (zero if all unknown).
    pub init: Array1<f64>,
    /// Neighbour and relation embeddings of the incident knowledge-base
    /// edges; `None` when the entity is not linked.
    pub subgraph: Option<(Array2<f64>, Array2<f64>)>,
}

/// Entity embedding (`1 × F`). When entity modules are disabled this is a
/// projection of the initial embedding alone.
pub fn entity_module<'t>(tape: &'t Tape, model: &Model, entity: &EntityInput) -> Result<Tensor<'t>> {
    let init = tape.try_constant(row(&entity.init))?;
    match model.ids.context {
        ContextParams::InitOnly { entity: l, .. } => linear(tape, model, l, init),
        ContextParams::Full { entity: params, .. } => {
            let agg = match &entity.subgraph {
                Some((u, l)) => compgcn_layer(tape, model, u, l)?,
                None => tape.constant(Array2::zeros((1, model.config.kb_dim))),
            };
            let joined = Tensor::concat_cols(&[init, agg])?.tanh()?;
            linear(tape, model, params.proj, joined)
        }
    }
}

/// Precomputed inputs for one event node.
#[derive(Debug, Clone, PartialEq)]
pub struct EventInput {
    pub name: String,
    /// Mean word vector of the event surface stems.
    pub init: Array1<f64>,
    /// One sentence vector per sentence mentioning the event on the query
    /// date (possibly zero rows).
    pub sentences: Array2<f64>,
    /// Daily article counts from `d - Q` to `d + Q`.
    pub counts: Array1<f64>,
}

/// Sentence attention weights `λ` (`s × 1`), or `None` without sentences.
pub fn event_attention<'t>(tape: &'t Tape, model: &Model, sentences: &Array2<f64>) -> Result<Option<Tensor<'t>>> {
    let ContextParams::Full { event, .. } = model.ids.context else {
        return Err(Error::Invalid("event module is disabled".into()));
    };
    if sentences.nrows() == 0 {
        return Ok(None);
    }
    let p = |id| tape.param(&model.params, id);
    let v = tape.try_constant(sentences.clone())?;
    let mu = v.matmul(p(event.w_eve))?.add(p(event.b_eve))?.sigmoid()?;
    Ok(Some(mu.matmul(p(event.zeta))?.softmax_cols()?))
}

/// Event embedding (`1 × F`): attention-pooled sentence vectors fused with
/// the article-count embedding through a skip connection.
pub fn event_module<'t>(tape: &'t Tape, model: &Model, event: &EventInput) -> Result<Tensor<'t>> {
    let params = match model.ids.context {
        ContextParams::InitOnly { event: l, .. } => {
            return linear(tape, model, l, tape.try_constant(row(&event.init))?)
        }
        ContextParams::Full { event, .. } => event,
    };
    if event.counts.len() != model.config.count_dim() {
        return Err(Error::Invalid(format!(
            "event {:?} has {} daily counts, expected {}",
            event.name,
            event.counts.len(),
            model.config.count_dim()
        )));
    }
    let pooled = match event_attention(tape, model, &event.sentences)? {
        Some(lambda) => lambda.t()?.matmul(tape.try_constant(event.sentences.clone())?)?,
        None => tape.constant(Array2::zeros((1, model.config.word_dim))),
    };
    let h_z = linear(tape, model, params.psi1, tape.try_constant(row(&event.counts))?)?;
    let fused = linear(tape, model, params.psi2, Tensor::concat_cols(&[h_z, pooled])?)?.tanh()?;
    Ok(fused.add(h_z)?)
}

/// Everything the classifier needs for one (celebrity, date).
#[derive(Debug, Clone, PartialEq)]
pub struct TripInput {
    pub graphs: Vec<WordArticleGraph>,
    pub entities: Vec<EntityInput>,
    pub events: Vec<EventInput>,
    /// Trip-graph adjacency with self-loops over locations, entities, events.
    pub adjacency: Array2<f64>,
}

/// Visit probability for every candidate location (`k × 1`).
pub fn trip_forward<'t>(tape: &'t Tape, model: &Model, input: &TripInput) -> Result<Tensor<'t>> {
    let k = input.graphs.len();
    if k == 0 {
        return Err(Error::Graph("trip graph has no locations".into()));
    }
    let mut rows = Vec::with_capacity(k + input.entities.len() + input.events.len());
    for g in &input.graphs {
        rows.push(location_module(tape, model, g)?);
    }
    for e in &input.entities {
        rows.push(entity_module(tape, model, e)?);
    }
    for e in &input.events {
        rows.push(event_module(tape, model, e)?);
    }
    let mut h = Tensor::concat_rows(&rows)?;
    for &layer in &model.ids.trip_gat {
        h = gat_layer(tape, model, layer, h, &input.adjacency)?.0;
    }
    let logits = linear(tape, model, model.ids.out, h.gather_rows(&(0..k).collect::<Vec<_>>())?)?;
    let positive = tape.constant(ndarray::array![[0.0], [1.0]]);
    Ok(logits.softmax_rows()?.matmul(positive)?)
}

/// Mean binary cross-entropy of one day's predictions.
pub fn trip_loss<'t>(probs: Tensor<'t>, labels: &[f64], pos_weight: f64) -> Result<Tensor<'t>> {
    Ok(probs.weighted_bce_loss(labels, pos_weight)?)
}
