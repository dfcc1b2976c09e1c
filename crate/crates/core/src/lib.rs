//! Two-scale compliance optimization of a phase field and a periodic
//! microstructure in plane-strain linear elasticity.

pub mod eps;
pub mod error;
pub mod fem;
pub mod gradient;
pub mod homog;
pub mod optim;
pub mod sharp;
pub mod state;
pub mod tensor;

pub use error::{Error, Result};
