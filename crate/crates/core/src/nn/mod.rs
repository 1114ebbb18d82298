//! Parameter storage, two-layer MLP blocks, initialization, Adam and the
//! step learning-rate schedule.

mod adam;
mod checkpoint;
mod mlp;
mod params;
mod schedule;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use checkpoint::{Checkpoint, Entry};
pub use mlp::{mlp_forward, BnParams, MlpParams};
pub use params::{glorot_uniform, Bound, ParamId, ParamStore};
pub use schedule::{lr_at_epoch, Hyper};
