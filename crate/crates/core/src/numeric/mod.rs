//! Dense matrices, activations, parameter storage and the finite-difference
//! gradient oracle.

mod activation;
mod gradcheck;
mod init;
mod matrix;
mod params;
mod scalar;

pub use activation::{
    sigmoid, sigmoid_in_place, sigmoid_scalar, softmax, tanh, tanh_in_place, tanh_scalar,
};
pub(crate) use activation::softmax_unchecked;
pub use gradcheck::{grad_check, GradCheckReport, RELATIVE_ERROR_FLOOR};
pub use init::{Initializer, INIT_RANGE};
pub use matrix::{dot, Matrix};
pub use params::ParamStore;
pub use scalar::Scalar;
