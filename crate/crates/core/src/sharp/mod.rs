//! Sharp-interface configurations: interfaces, velocity fields and their
//! flows, transported states and shape derivatives.

pub mod derivative;
pub mod design;
pub mod flow;
pub mod interface;
pub mod variation;

pub use derivative::{
    c_tilde, fit_multipliers, micro_variation, perimeter_variation, shape_derivative,
    smto_residual, smto_rows, solve_z, transported_sensitivity, volume_rates, MicroVariation,
    MultiplierFit, ShapeDerivative, SmtoRow,
};
pub use design::{eval_js, MicroState, SharpCost, SharpDesign, SharpProblem, SharpState};
pub use flow::{flow, flow_point, FlowPoint};
pub use interface::{extract_interface, Domain, InterfacePolyline, Segment};
pub use variation::{certify_m, certify_phi, Certificate, Check, VariationField, VelocityKind};
