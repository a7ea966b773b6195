use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Architecture hyperparameters. Everything here is stored in checkpoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    /// Word-vector width.
    pub word_dim: usize,
    /// TF-IDF width of article features.
    pub article_dim: usize,
    /// Knowledge-base embedding width.
    pub kb_dim: usize,
    pub hidden_dim: usize,
    /// Node width of the trip graph.
    pub f_dim: usize,
    /// GAT + pooling repetitions in the location module.
    pub blocks: usize,
    /// Fraction of nodes kept by each pooling step.
    pub epsilon: f64,
    /// Days on each side of the query date in the event count vector.
    pub q: usize,
    pub trip_layers: usize,
    pub use_oriented_pooling: bool,
    pub use_entity_event: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            word_dim: 100,
            article_dim: 1000,
            kb_dim: 50,
            hidden_dim: 128,
            f_dim: 128,
            blocks: 2,
            epsilon: 0.5,
            q: 7,
            trip_layers: 2,
            use_oriented_pooling: true,
            use_entity_event: true,
        }
    }
}

impl ModelConfig {
    pub fn count_dim(&self) -> usize {
        2 * self.q + 1
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("word_dim", self.word_dim),
            ("kb_dim", self.kb_dim),
            ("hidden_dim", self.hidden_dim),
            ("f_dim", self.f_dim),
            ("blocks", self.blocks),
        ];
        for (field, v) in positive {
            if v == 0 {
                return Err(Error::Config {
                    field,
                    msg: "must be positive".into(),
                });
            }
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::Config {
                field: "epsilon",
                msg: format!("must lie in (0, 1), got {}", self.epsilon),
            });
        }
        Ok(())
    }
}
