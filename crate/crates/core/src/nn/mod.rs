//! Dense MLP, explicit backward pass and Adam.

pub mod adam;
pub mod mlp;

pub use adam::{adam_step, adam_update, AdamConfig, AdamState};
pub use mlp::{mlp_backward, mlp_forward, Activation, ForwardCache, Layer, MlpParams};
