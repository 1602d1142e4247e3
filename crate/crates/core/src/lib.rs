//! Variational toolkit for problems of the form `min f(x) + g(x)` with `g`
//! polyhedral and `dom g` inside the nonnegative orthant, together with
//! their square reparameterization `Phi(y) = f(y∘y) + g(y∘y)`.
//!
//! The crate is organised bottom-up:
//!
//! * [`polyhedra`]: dense LP/QP kernels and H-/V-representation queries.
//! * [`polyfunc`]: polyhedral functions, smooth quadratics and subdifferentials.
//! * [`reparam`]: the lifted problem and its first-order residual.
//! * [`second_order`]: second subderivatives on `S_I` and the stationarity
//!   correspondence certifier.
//! * [`kl_lab`]: KL exponent prediction, empirical estimation and solver runs.
//! * [`oracles`]: brute-force reference implementations and the self-test.

pub mod error;
pub mod ext;
pub mod kl_lab;
pub mod oracles;
pub mod polyfunc;
pub mod polyhedra;
pub mod reparam;
pub mod second_order;

pub use error::{Error, Result};
pub use ext::ExtReal;
pub use polyfunc::{CompositeProblem, PolyhedralFunction, SmoothFunction, SmoothQuadratic};
pub use polyhedra::{GeneratorSet, Polyhedron};

/// Default feasibility tolerance used by membership and LP feasibility queries.
pub const FEAS_TOL: f64 = 1e-9;
