//! Small dense numerical kernels shared across modules.

pub(crate) mod nelder_mead;
pub(crate) mod simplex;
