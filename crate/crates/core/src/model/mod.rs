//! Learned layers of the itinerary classifier.
//!
//! All layers use the row convention `X·W + b`: node features are rows and a
//! weight of shape `in × out` maps `in`-wide rows to `out`-wide rows.

mod config;
mod layers;
mod pooling;

pub use config::ModelConfig;
pub use layers::{
    compgcn_layer, entity_module, event_attention, event_module, gat_layer, location_module, location_node_states,
    project_nodes, trip_forward, trip_loss, EntityInput, EventInput, TripInput,
};
pub use pooling::{normalized_adjacency, oriented_pooling, select_kept, Pooled};

use celetrip_tensor::{ParamId, ParamStore};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct Linear {
    pub w: ParamId,
    pub b: ParamId,
}

#[derive(Debug, Clone, Copy)]
pub struct GatParams {
    pub w: ParamId,
    pub a_src: ParamId,
    pub a_dst: ParamId,
}

#[derive(Debug, Clone, Copy)]
pub struct PoolParams {
    pub w_score: ParamId,
    pub w_alpha: ParamId,
}

#[derive(Debug, Clone, Copy)]
pub struct EntityParams {
    pub w_edge: ParamId,
    pub w_es: ParamId,
    pub proj: Linear,
}

#[derive(Debug, Clone, Copy)]
pub struct EventParams {
    pub w_eve: ParamId,
    pub b_eve: ParamId,
    pub zeta: ParamId,
    pub psi1: Linear,
    pub psi2: Linear,
}

/// Entity/event modules, or plain projections of the initial embeddings
/// when they are ablated.
#[derive(Debug, Clone, Copy)]
pub enum ContextParams {
    Full { entity: EntityParams, event: EventParams },
    InitOnly { entity: Linear, event: Linear },
}

#[derive(Debug, Clone)]
pub struct ParamIds {
    pub word_proj: Linear,
    pub article_proj: Linear,
    pub loc_gat: Vec<GatParams>,
    pub loc_pool: Vec<PoolParams>,
    pub loc_out: Linear,
    pub context: ContextParams,
    pub trip_gat: Vec<GatParams>,
    pub out: Linear,
}

/// Parameter layout as `(name, rows, cols, is_bias)`, in creation order.
fn layout(c: &ModelConfig) -> Vec<(String, usize, usize, bool)> {
    let mut v = Vec::new();
    let linear = |v: &mut Vec<_>, name: &str, i: usize, o: usize| {
        v.push((format!("{name}.w"), i, o, false));
        v.push((format!("{name}.b"), 1, o, true));
    };
    let (h, f, d, kb) = (c.hidden_dim, c.f_dim, c.word_dim, c.kb_dim);
    linear(&mut v, "word_proj", d, h);
    linear(&mut v, "article_proj", c.article_dim, h);
    for b in 0..c.blocks {
        v.push((format!("loc.gat{b}.w"), h, h, false));
        v.push((format!("loc.gat{b}.a_src"), h, 1, false));
        v.push((format!("loc.gat{b}.a_dst"), h, 1, false));
        if c.use_oriented_pooling {
            v.push((format!("loc.pool{b}.w_score"), h, 1, false));
            v.push((format!("loc.pool{b}.w_alpha"), 2, 1, false));
        }
    }
    linear(&mut v, "loc.out", h, f);
    if c.use_entity_event {
        v.push(("ent.w_edge".into(), kb, kb, false));
        v.push(("ent.w_es".into(), kb, kb, false));
        linear(&mut v, "ent.proj", d + kb, f);
        v.push(("eve.w".into(), d, d, false));
        v.push(("eve.b".into(), 1, d, true));
        v.push(("eve.zeta".into(), d, 1, false));
        linear(&mut v, "eve.psi1", c.count_dim(), f);
        linear(&mut v, "eve.psi2", f + d, f);
    } else {
        linear(&mut v, "ent.init", d, f);
        linear(&mut v, "eve.init", d, f);
    }
    for l in 0..c.trip_layers {
        v.push((format!("trip.gat{l}.w"), f, f, false));
        v.push((format!("trip.gat{l}.a_src"), f, 1, false));
        v.push((format!("trip.gat{l}.a_dst"), f, 1, false));
    }
    linear(&mut v, "out", f, 2);
    v
}

#[derive(Debug, Clone)]
pub struct Model {
    pub config: ModelConfig,
    pub params: ParamStore,
    pub ids: ParamIds,
}

impl Model {
    /// Glorot-uniform weights and zero biases from a seeded generator.
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParamStore::new();
        for (name, r, c, bias) in layout(&config) {
            if bias {
                params.zeros(name, r, c);
            } else {
                params.glorot(name, r, c, &mut rng);
            }
        }
        Self::from_params(config, params)
    }

    /// Binds an existing store (e.g. from a checkpoint), checking every
    /// parameter's presence and shape.
    pub fn from_params(config: ModelConfig, params: ParamStore) -> Result<Self> {
        config.validate()?;
        for (name, r, c, _) in layout(&config) {
            let id = params
                .id(&name)
                .ok_or_else(|| Error::Invalid(format!("missing parameter {name}")))?;
            let shape = params.get(id).dim();
            if shape != (r, c) {
                return Err(Error::Invalid(format!(
                    "parameter {name} has shape {shape:?}, expected {:?}",
                    (r, c)
                )));
            }
        }
        let id = |n: String| params.id(&n).expect("checked above");
        let lin = |n: &str| Linear {
            w: id(format!("{n}.w")),
            b: id(format!("{n}.b")),
        };
        let gat = |prefix: &str, i: usize| GatParams {
            w: id(format!("{prefix}{i}.w")),
            a_src: id(format!("{prefix}{i}.a_src")),
            a_dst: id(format!("{prefix}{i}.a_dst")),
        };
        let context = if config.use_entity_event {
            ContextParams::Full {
                entity: EntityParams {
                    w_edge: id("ent.w_edge".into()),
                    w_es: id("ent.w_es".into()),
                    proj: lin("ent.proj"),
                },
                event: EventParams {
                    w_eve: id("eve.w".into()),
                    b_eve: id("eve.b".into()),
                    zeta: id("eve.zeta".into()),
                    psi1: lin("eve.psi1"),
                    psi2: lin("eve.psi2"),
                },
            }
        } else {
            ContextParams::InitOnly {
                entity: lin("ent.init"),
                event: lin("eve.init"),
            }
        };
        let ids = ParamIds {
            word_proj: lin("word_proj"),
            article_proj: lin("article_proj"),
            loc_gat: (0..config.blocks).map(|b| gat("loc.gat", b)).collect(),
            loc_pool: if config.use_oriented_pooling {
                (0..config.blocks)
                    .map(|b| PoolParams {
                        w_score: id(format!("loc.pool{b}.w_score")),
                        w_alpha: id(format!("loc.pool{b}.w_alpha")),
                    })
                    .collect()
            } else {
                Vec::new()
            },
            loc_out: lin("loc.out"),
            context,
            trip_gat: (0..config.trip_layers).map(|l| gat("trip.gat", l)).collect(),
            out: lin("out"),
        };
        Ok(Self { config, params, ids })
    }
}
