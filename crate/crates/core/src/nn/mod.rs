//! Dense networks with exact reverse-mode gradients, the Adam optimizer,
//! and a little-endian binary parameter layout.

mod adam;
pub mod codec;
mod mlp;

pub use adam::{Adam, AdamConfig};
pub use mlp::{param_count, Activation, ForwardTrace, Gradients, Mlp};
