//! Periodic cell problems and the homogenized elasticity tensor.

pub mod cell;
pub mod table;

pub use cell::{
    homogenized_tensor, solve_correctors, CellProblem, CorrectorSet, MicroSamples, UNIT_STRAINS,
};
pub use table::{CStarTable, CoefficientMode, Coefficients, ExactCoefficients, Level};
