//! Polyhedral sets in H- and V-representation and the small dense LP/QP
//! kernels every other module is built on.

mod generators;
mod lp;
mod polyhedron;
mod project;
mod qp;

pub use generators::{
    min_norm_weighted, ri_margin, vrep_membership, vrep_ri_membership, vrep_support, GeneratorSet, MinNorm,
    RI_TOL,
};
pub use lp::{lp_solve, lp_solve_with, LinearProgram, LpOptions, LpOutcome, LpStatus};
pub use polyhedron::Polyhedron;
pub use project::project_onto_polyhedron;
pub use qp::CoefficientLsq;
