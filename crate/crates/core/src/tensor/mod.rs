//! Dense tensors with a reverse-mode tape.
//!
//! Everything is row-major. The only broadcast is a row-wise bias add; every
//! other binary op requires equal shapes. Ragged "segment" ops cover the
//! per-query action slates, whose sizes differ between rows of a batch.

mod checkpoint;
mod init;
mod optim;
mod scalar;
mod tape;
#[allow(clippy::module_inception)]
mod tensor;

pub use checkpoint::{read_checkpoint, write_checkpoint, CHECKPOINT_VERSION};
pub use init::xavier_init;
pub use optim::{AdamConfig, ParamId, ParameterStore};
pub use scalar::Real;
pub use tape::{Gradients, Tape, Var};
pub use tensor::Tensor;

#[cfg(test)]
pub(crate) mod gradcheck;
