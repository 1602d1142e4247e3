use nalgebra::DVector;

use super::TAU;
use crate::error::{Error, Result};
use crate::polyfunc::{phi_residual, phi_subdiff, CompositeProblem, SmoothFunction};
use crate::polyhedra::vrep_ri_membership;

/// Assumed exponents of `phi` at `x̄`: KL exponent `alpha`, error-bound
/// exponent `gamma`, and whether strict complementarity holds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExponentInputs {
    pub alpha: f64,
    pub gamma: f64,
    pub strict: bool,
}

fn check_ranges(alpha: f64, gamma: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidRange(format!("alpha = {alpha} must lie in (0, 1)")));
    }
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(Error::InvalidRange(format!("gamma = {gamma} must lie in (0, 1]")));
    }
    Ok(())
}

/// `β = 1 - γ(1 - α)`.
pub fn beta(alpha: f64, gamma: f64) -> Result<f64> {
    check_ranges(alpha, gamma)?;
    Ok(1.0 - gamma * (1.0 - alpha))
}

/// KL exponent of the lifted problem at `ȳ`: `max{α, ½}` under strict
/// complementarity, otherwise `(1 + β)/2`.
pub fn predict_exponent(inputs: ExponentInputs) -> Result<f64> {
    let b = beta(inputs.alpha, inputs.gamma)?;
    Ok(if inputs.strict {
        inputs.alpha.max(0.5)
    } else {
        0.5 * (1.0 + b)
    })
}

/// `0 ∈ ri ∂phi(x̄)` at a stationary point `x̄`.
pub fn strict_complementarity<F: SmoothFunction>(p: &CompositeProblem<F>, xbar: &DVector<f64>) -> Result<bool> {
    let residual = phi_residual(p, xbar)?;
    if residual > TAU {
        return Err(Error::NotAStationaryPoint { residual });
    }
    vrep_ri_membership(&phi_subdiff(p, xbar)?, &DVector::zeros(p.dim()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polyfunc::{PolyhedralFunction, SmoothQuadratic};
    use crate::polyhedra::Polyhedron;

    fn v(xs: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(xs)
    }

    fn orthant_problem(target: &[f64]) -> CompositeProblem {
        CompositeProblem::new(
            SmoothQuadratic::distance_to(&v(target)),
            PolyhedralFunction::indicator(Polyhedron::orthant(target.len())).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn prediction_examples() {
        let p = |alpha, gamma, strict| predict_exponent(ExponentInputs { alpha, gamma, strict }).unwrap();
        assert_eq!(p(0.5, 1.0, true), 0.5);
        assert_eq!(p(0.5, 1.0, false), 0.75);
        assert_eq!(p(0.9, 1.0, true), 0.9);
        assert_eq!(p(0.3, 1.0, true), 0.5);
    }

    #[test]
    fn prediction_ranges() {
        for (a, g) in [(0.0, 1.0), (1.0, 1.0), (0.5, 0.0), (0.5, 1.5), (f64::NAN, 1.0)] {
            assert!(matches!(
                predict_exponent(ExponentInputs { alpha: a, gamma: g, strict: false }),
                Err(Error::InvalidRange(_))
            ));
        }
    }

    #[test]
    fn strict_complementarity_examples() {
        assert!(strict_complementarity(&orthant_problem(&[1.0]), &v(&[1.0])).unwrap());
        assert!(!strict_complementarity(&orthant_problem(&[0.0]), &v(&[0.0])).unwrap());
        assert!(strict_complementarity(&orthant_problem(&[1.0, -1.0]), &v(&[1.0, 0.0])).unwrap());
    }

    #[test]
    fn strict_complementarity_needs_stationarity() {
        assert!(matches!(
            strict_complementarity(&orthant_problem(&[1.0]), &v(&[0.0])),
            Err(Error::NotAStationaryPoint { .. })
        ));
    }
}
