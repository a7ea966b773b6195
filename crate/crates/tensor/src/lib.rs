//! Dense 2-D `f64` tensors recorded on a reverse-mode differentiation tape.
//!
//! Every value is a matrix; vectors are `1 x n` rows or `n x 1` columns.
//! Binary elementwise ops broadcast a row or column vector against a matrix
//! and nothing more general.
//!
//! ```
//! use celetrip_tensor::{ParamStore, Tape};
//! use ndarray::array;
//!
//! let mut store = ParamStore::new();
//! let w = store.insert("w", array![[2.0], [-1.0]]);
//! let tape = Tape::new();
//! let x = tape.constant(array![[1.0, 3.0]]);
//! let y = x.matmul(tape.param(&store, w)).unwrap().tanh().unwrap();
//! let grads = tape.backward(y.sum().unwrap()).unwrap();
//! assert_eq!(grads.get(w).unwrap().shape(), &[2, 1]);
//! ```

mod adam;
pub mod checkpoint;
mod error;
mod params;
mod tape;

pub use adam::{AdamConfig, AdamState};
pub use error::{Result, Shape, TensorError};
pub use params::{Gradients, ParamId, ParamStore};
pub use tape::{Tape, Tensor};

/// Binary cross-entropy clips probabilities into `[PROB_CLIP, 1 - PROB_CLIP]`.
pub const PROB_CLIP: f64 = 1e-7;
