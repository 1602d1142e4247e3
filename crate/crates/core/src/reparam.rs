//! The lifted problem `Phi(y) = phi(y∘y)`.
//!
//! `∂Phi(y)` is never built. Its distance to the origin is evaluated in
//! x-space as `2 · min_{z ∈ ∂g(y²)} ‖y ∘ (∇f(y²) + z)‖`, a weighted nearest
//! point query over the polyhedral set `∂g(y²)`.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::ext::ExtReal;
use crate::polyfunc::{g_eval, g_subdiff, phi_residual, CompositeProblem, PolyhedralFunction, SmoothFunction, TOL_ACTIVE};
use crate::polyhedra::min_norm_weighted;
use crate::FEAS_TOL;

/// Default threshold for `|y_i|` to count as nonzero (strict inequality).
pub const TOL_SUPPORT: f64 = 1e-8;

/// `I = {i : |y_i| > tol}` and its complement, both ascending.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SupportSet {
    pub active: Vec<usize>,
    pub inactive: Vec<usize>,
}

impl SupportSet {
    pub fn contains(&self, i: usize) -> bool {
        self.active.binary_search(&i).is_ok()
    }

    pub fn is_empty(&self) -> bool {
        self.active.is_empty()
    }
}

pub fn support_set(y: &DVector<f64>, tol_support: f64) -> SupportSet {
    let (active, inactive) = (0..y.len()).partition(|&i| y[i].abs() > tol_support);
    SupportSet { active, inactive }
}

/// `T(y) = y ∘ y`.
pub fn square(y: &DVector<f64>) -> DVector<f64> {
    y.component_mul(y)
}

#[derive(Debug, Clone)]
pub struct LiftedPoint {
    pub y: DVector<f64>,
    pub x: DVector<f64>,
    pub support: SupportSet,
    pub in_domain: bool,
}

impl LiftedPoint {
    pub fn new(g: &PolyhedralFunction, y: &DVector<f64>, tol_support: f64) -> Self {
        let x = square(y);
        let in_domain = g.domain().contains(&x, FEAS_TOL);
        Self {
            y: y.clone(),
            x,
            support: support_set(y, tol_support),
            in_domain,
        }
    }

    /// `min_{i ∈ I} |y_i|`; second-order conclusions are only as reliable as
    /// this is large compared to the support tolerance.
    pub fn min_support_magnitude(&self) -> Option<f64> {
        self.support
            .active
            .iter()
            .map(|&i| self.y[i].abs())
            .min_by(|a, b| a.partial_cmp(b).unwrap())
    }
}

/// `Phi(y) = f(y²) + g(y²)`.
pub fn lift_eval<F: SmoothFunction>(p: &CompositeProblem<F>, y: &DVector<f64>) -> ExtReal {
    let x = square(y);
    g_eval(&p.g, &x) + p.f.value(&x)
}

#[derive(Debug, Clone)]
pub struct LiftedResidual {
    /// `dist(0, ∂Phi(y))`.
    pub value: f64,
    /// Minimizer `z* ∈ ∂g(y²)` of the inner weighted query; `2 y ∘ (∇f + z*)`
    /// is a least-norm element of `∂Phi(y)` on the support of `y`.
    pub witness: DVector<f64>,
}

pub fn lifted_residual<F: SmoothFunction>(p: &CompositeProblem<F>, y: &DVector<f64>) -> Result<LiftedResidual> {
    if y.len() != p.dim() {
        return Err(Error::dims("y length differs from problem dimension"));
    }
    let x = square(y);
    let sub = match g_subdiff(&p.g, &x, TOL_ACTIVE) {
        Ok(s) => s,
        Err(Error::OutOfDomain { violation }) => return Err(Error::OutOfLiftedDomain { violation }),
        Err(e) => return Err(e),
    };
    let weights = y.abs();
    let out = min_norm_weighted(&sub.set, &p.f.gradient(&x), &weights)?;
    Ok(LiftedResidual {
        value: 2.0 * out.value,
        witness: out.minimizer,
    })
}

#[derive(Debug, Clone)]
pub struct StationarityReport {
    pub in_domain: bool,
    pub support: SupportSet,
    pub min_support_magnitude: Option<f64>,
    pub lifted_residual: Option<f64>,
    pub phi_residual: Option<f64>,
    pub stationary_for_lifted: bool,
    pub stationary_for_phi: bool,
}

pub fn classify_first_order<F: SmoothFunction>(
    p: &CompositeProblem<F>,
    y: &DVector<f64>,
    tol: f64,
) -> Result<StationarityReport> {
    let point = LiftedPoint::new(&p.g, y, TOL_SUPPORT);
    if !point.in_domain {
        return Ok(StationarityReport {
            in_domain: false,
            min_support_magnitude: point.min_support_magnitude(),
            support: point.support,
            lifted_residual: None,
            phi_residual: None,
            stationary_for_lifted: false,
            stationary_for_phi: false,
        });
    }
    let lifted = lifted_residual(p, y)?.value;
    let phi = phi_residual(p, &point.x)?;
    Ok(StationarityReport {
        in_domain: true,
        min_support_magnitude: point.min_support_magnitude(),
        support: point.support,
        lifted_residual: Some(lifted),
        phi_residual: Some(phi),
        stationary_for_lifted: lifted <= tol,
        stationary_for_phi: phi <= tol,
    })
}
