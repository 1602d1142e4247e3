//! KL exponents of the lifted problem: prediction from assumed exponents of
//! `phi`, empirical estimation from sampled (gap, residual) pairs, and
//! first-order solver runs whose convergence rates reflect the exponent.

mod predict;
mod sampling;
mod solvers;

pub use predict::{beta, predict_exponent, strict_complementarity, ExponentInputs};
pub use sampling::{estimate_exponent, lemma61_probe, sample_scatter, KlFitReport, LemmaProbe, ScatterConfig, ScatterSample};
pub use solvers::{fit_rate, run_first_order, Iterate, Rate, SolverConfig, SolverTrace, StepRule, Variant};

/// Stationarity threshold used by the entry checks of this module.
pub const TAU: f64 = 1e-8;
