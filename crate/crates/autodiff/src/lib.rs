//! Minimal reverse-mode automatic differentiation on dense arrays.
//!
//! A [`Tape`] records operations on [`Var`] handles. [`Tape::grad`] walks the
//! record backwards; with `create_graph` the backward pass is recorded too,
//! which is what gradient penalties such as R1 need.

pub mod array;
mod float;
mod tape;

pub use array::Array;
pub use float::Float;
pub use tape::{softplus, Tape, Var};
