//! Dense 2-D tensors on a reverse-mode differentiation tape.
//!
//! Every value is an `ndarray::Array2`; scalars are `1 x 1`, vectors used as
//! biases or BN parameters are `1 x d` rows. Operations append a record to a
//! [`Tape`] and return a [`Var`] handle. [`Tape::backward`] walks the records
//! in reverse exactly once.

mod gradcheck;
mod ops;
mod tape;

pub use gradcheck::{finite_difference_check, finite_difference_coordinates, Coordinate, GradCheck};
pub use ops::BatchNormState;
pub use tape::{Gradients, Mode, Tape, Var};
