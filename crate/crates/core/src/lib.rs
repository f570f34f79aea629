//! Operator-algebraic machinery on truncated Verma modules over sl(2) and
//! the gaze-steered image dynamics built on it.

pub mod cutoff;
pub mod dynamics;
pub mod error;
pub mod laurent;
pub mod linalg;
pub mod qpft;
pub mod render;
pub mod scalar;
pub mod session;
pub mod symmetries;
pub mod verma;

pub use error::{DroemError, Result};
pub use scalar::{GaussQ, Rational, Scalar, C64, Q};
pub use verma::{adjoint, commutator, make_module, DiagSymbol, LinOp, PolyState, ScalarMode, TruncatedVermaModule, Weight};
