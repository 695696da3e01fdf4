//! High-order dynamic Chebyshev graph convolution (HDGCN).
//!
//! The crate bundles a small dense tensor type with a define-by-run
//! autodiff tape, sparse graph utilities, the multi-vote cross-attention
//! block, the HDGCN model itself, an AdaBelief training loop and loaders
//! for node- and graph-classification data.
//!
//! ```
//! use hdgcn::graph::{figure1_graph, GraphInput};
//! use hdgcn::model::{HdgcnConfig, HdgcnModel};
//! use hdgcn::Tensor;
//!
//! let graph = figure1_graph();
//! let input = GraphInput::new(graph.adjacency.normalize().unwrap(), Tensor::identity(5)).unwrap();
//! let cfg = HdgcnConfig { input_dim: 5, hidden: 8, forward_key_dim: 8,
//!                         backward_key_dim: 8, supernodes: 3, ..Default::default() };
//! let model = HdgcnModel::new(cfg, 7).unwrap();
//! let out = model.predict(&input).unwrap();
//! assert_eq!(out.logits.shape(), (5, 2));
//! assert_eq!(out.traces.len(), 3);
//! ```

pub mod data;
mod error;
pub mod gradcheck;
pub mod graph;
pub mod model;
pub mod mvcattn;
pub mod optim;
mod param;
pub mod tape;
mod tensor;

pub use error::{Error, Result};
pub use param::{glorot_uniform, ParamId, ParamSet, Parameter};
pub use tape::{Activation, Gradients, Tape, Var};
pub use tensor::Tensor;
