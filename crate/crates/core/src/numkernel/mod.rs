//! Dense f64 vectors and matrices, a reverse-mode tape and a
//! finite-difference gradient checker.

mod gradcheck;
mod tape;
mod tensor;

pub use gradcheck::{grad_check, relative_error, GradCheckReport, REL_ERROR_FLOOR};
pub use tape::{Gradients, ParamId, Tape, Var};
pub use tensor::{cosine, elementwise, matvec, DenseMatrix, DenseVector, Elementwise};
