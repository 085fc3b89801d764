//! Minimal reverse-mode differentiation over flat `f32`/`f64` tensors,
//! covering the operators the frame selection network uses.

mod checkpoint;
mod grad_check;
mod kernels;
mod params;
mod suite;
mod tape;

pub use checkpoint::{load_params, save_params, CHECKPOINT_FORMAT, CHECKPOINT_MANIFEST};
pub use grad_check::{analytic_grads, grad_check, rel_error, GradCheckReport, ScalarFn, REL_ERROR_FLOOR};
pub use kernels::window_offsets;
pub use params::{AdamConfig, Param, ParamStore};
pub use suite::{primitive_inputs, primitive_suite, Primitive, SuiteEntry, PRIMITIVES};
pub use tape::{Scalar, Tape, Var, COSINE_EPS, PROB_FLOOR};

#[cfg(test)]
mod tests;
