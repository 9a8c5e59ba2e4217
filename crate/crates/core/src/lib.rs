//! Node-classification training for graph convolutional networks with
//! Poisson-clock node selection.
//!
//! The pieces, bottom up:
//!
//! * [`graph`]: sparse graph storage, the normalized propagation operator and
//!   induced-subgraph views.
//! * [`clock`]: per-node exponential clocks and active sets.
//! * [`regularizers`]: Dropout, DropEdge, DropNode and clock-driven node
//!   selection behind one planning interface.
//! * [`engine`]: dense kernels, a small reverse-mode tape, the two-layer GCN,
//!   masked cross-entropy and Adam.
//! * [`trainer`]: per-epoch training and continuous-time renewal training.
//! * [`data`]: the text dataset format and a stochastic block model generator.

// `!(x > 0.0)` is used on purpose: it also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod clock;
pub mod data;
pub mod dense;
pub mod engine;
pub mod error;
pub mod graph;
pub mod mask;
pub mod regularizers;
pub mod trainer;

pub use dense::Matrix;
pub use error::{Error, Result};
pub use graph::{Graph, GraphInput, NormalizedAdjacency, SparseMatrix, Splits, SubgraphView};
pub use mask::NodeMask;
