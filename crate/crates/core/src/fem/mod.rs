//! Structured Q1 finite elements on the macro domain and the periodic cell.

pub mod assembly;
pub mod field;
pub mod grid;
pub mod integrate;
pub mod mesh;
pub mod solver;
pub mod sparse;

pub use assembly::{
    assemble_elasticity, assemble_elasticity_general, QuadCoefficient, QuadContext,
};
pub use field::{DisplacementField, PeriodicScalarField, ScalarField, VectorField};
pub use grid::StructuredGrid;
pub use mesh::{BoundaryEdge, CellMesh, EdgeTag, MacroMesh, Side};
pub use solver::{solve_spd, Constraint, SolveOptions, SolveReport};
pub use sparse::CsrMatrix;
