//! Dense/sparse kernels, the reverse-mode tape, the two-layer GCN, masked
//! cross-entropy and the Adam optimizer.

pub mod adam;
pub mod gcn;
pub mod loss;
pub mod tape;

pub use adam::{Adam, AdamConfig};
pub use gcn::{GcnConfig, Model};
pub use loss::{masked_cross_entropy, softmax_rows};
pub use tape::{Gradients, Tape, Var};
