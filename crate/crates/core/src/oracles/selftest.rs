//! Oracle-agreement suite behind the `selftest` command.

use std::time::{Duration, Instant};

use nalgebra::DVector;

use super::instances::{random_lp, random_nonsmooth, rng, InstanceKind, InstanceShape};
use super::{enumerate_vertices, fd_second_subderivative, grid_min_norm, lifted_retraction, subgradient_inequality_check, OracleConfig};
use crate::error::{Error, Result};
use crate::ext::ExtReal;
use crate::polyfunc::{g_eval, g_subdiff, PolyhedralFunction, SmoothFunction, SmoothQuadratic, TOL_ACTIVE};
use crate::polyhedra::{min_norm_weighted, project_onto_polyhedron, LpStatus, Polyhedron};
use crate::reparam::{lifted_residual, support_set, TOL_SUPPORT};
use crate::second_order::{correspondence_check, d2_lifted_g, normal_vec, CorrespondenceConfig};
use crate::CompositeProblem;

#[derive(Debug, Clone)]
pub struct SelftestCase {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone)]
pub struct SelftestReport {
    pub cases: Vec<SelftestCase>,
    pub elapsed: Duration,
}

impl SelftestReport {
    pub fn all_passed(&self) -> bool {
        self.cases.iter().all(|c| c.passed)
    }
}

/// Runs every oracle-agreement check with seeds derived from `seed`.
pub fn selftest(seed: u64) -> SelftestReport {
    let start = Instant::now();
    let checks: [(&'static str, fn(u64) -> Result<String>); 6] = [
        ("lp-vs-vertex-enumeration", lp_vs_vertices),
        ("min-norm-vs-grid", min_norm_vs_grid),
        ("second-subderivative-vs-quotients", d2_vs_quotients),
        ("subdifferential-generators-are-subgradients", generators_are_subgradients),
        ("projection-idempotence", projection_idempotence),
        ("stationarity-correspondence", correspondence),
    ];
    let cases = checks
        .iter()
        .map(|(name, check)| match check(seed) {
            Ok(detail) => SelftestCase {
                name,
                passed: true,
                detail,
            },
            Err(e) => SelftestCase {
                name,
                passed: false,
                detail: e.to_string(),
            },
        })
        .collect();
    SelftestReport {
        cases,
        elapsed: start.elapsed(),
    }
}

fn fail(msg: String) -> Error {
    Error::NumericalFailure(msg)
}

fn lp_vs_vertices(seed: u64) -> Result<String> {
    let count = 100;
    for s in 0..count {
        let (p, c) = random_lp(seed.wrapping_mul(1000).wrapping_add(s));
        let truth = enumerate_vertices(&p)?
            .iter()
            .map(|v| c.dot(v))
            .fold(f64::NEG_INFINITY, f64::max);
        let out = p.maximize(&c)?;
        if out.status != LpStatus::Optimal {
            return Err(fail(format!("instance {s}: simplex reported {:?}", out.status)));
        }
        let got = out.value.to_f64();
        if (got - truth).abs() > 1e-9 * (1.0 + truth.abs()) {
            return Err(fail(format!("instance {s}: simplex {got} vs vertices {truth}")));
        }
    }
    Ok(format!("{count} random LPs agree to 1e-9"))
}

fn min_norm_vs_grid(seed: u64) -> Result<String> {
    let cfg = OracleConfig::default();
    let mut compared = 0;
    for s in 0..40 {
        let inst = random_nonsmooth(seed.wrapping_mul(1000).wrapping_add(s), InstanceShape::default(), InstanceKind::Generic)?;
        let sub = g_subdiff(&inst.problem.g, &inst.x, TOL_ACTIVE)?.set;
        let grad = inst.problem.f.gradient(&inst.x);
        let weights = inst.y.abs();
        let grid = match grid_min_norm(&sub, &grad, &weights, &cfg) {
            Ok(g) => g,
            Err(Error::TooLarge(_)) => continue,
            Err(e) => return Err(e),
        };
        let fast = min_norm_weighted(&sub, &grad, &weights)?.value;
        if fast > grid.value + 1e-9 || fast < grid.value - grid.tolerance {
            return Err(fail(format!(
                "instance {s}: active-set {fast} vs grid {} (tolerance {})",
                grid.value, grid.tolerance
            )));
        }
        let lifted = lifted_residual(&inst.problem, &inst.y)?.value;
        if (lifted - 2.0 * fast).abs() > 1e-12 * (1.0 + lifted) {
            return Err(fail(format!("instance {s}: lifted residual {lifted} vs 2·{fast}")));
        }
        compared += 1;
    }
    Ok(format!("{compared} weighted nearest-point queries within grid tolerance"))
}

fn designed_d2_cases() -> Result<Vec<(&'static str, PolyhedralFunction, DVector<f64>, DVector<f64>, DVector<f64>)>> {
    let v = |xs: &[f64]| DVector::from_column_slice(xs);
    let mut point = Polyhedron::full(1);
    point.push_eq(&v(&[1.0]), 0.0);
    Ok(vec![
        (
            "orthant",
            PolyhedralFunction::indicator(Polyhedron::orthant(2))?,
            v(&[1.0, 0.0]),
            v(&[0.0, -3.0]),
            v(&[0.0, 1.0]),
        ),
        (
            "simplex",
            PolyhedralFunction::indicator(Polyhedron::unit_simplex(2))?,
            v(&[1.0, 0.0]),
            v(&[1.0, 0.0]),
            v(&[0.0, 1.0]),
        ),
        ("point", PolyhedralFunction::indicator(point)?, v(&[0.0]), v(&[0.0]), v(&[1.0])),
    ])
}

/// Evaluates the LP formula and the difference-quotient oracle on the
/// designed cases; returns `(name, formula, quotient)` triples.
pub(crate) fn d2_designed_comparison(cfg: &OracleConfig) -> Result<Vec<(&'static str, ExtReal, ExtReal)>> {
    let mut out = Vec::new();
    for (name, g, ybar, v, w) in designed_d2_cases()? {
        let value = d2_lifted_g(&g, &ybar, &v, &w)?;
        let lambda = (&ybar * 2.0).component_mul(&v);
        let support = support_set(&ybar, TOL_SUPPORT);
        let retract = lifted_retraction(&g, &support);
        let h = |y: &DVector<f64>| g_eval(&g, &y.component_mul(y));
        let fd = fd_second_subderivative(&h, &ybar, &lambda, &w, cfg, Some(&retract))?;
        out.push((name, value, fd.value));
    }
    Ok(out)
}

fn d2_vs_quotients(_seed: u64) -> Result<String> {
    let rows = d2_designed_comparison(&OracleConfig::default())?;
    let expected = [ExtReal::Finite(0.0), ExtReal::Finite(2.0), ExtReal::PosInf];
    for ((name, value, fd), want) in rows.iter().zip(expected) {
        let close = match (value, want) {
            (ExtReal::Finite(a), ExtReal::Finite(b)) => (a - b).abs() <= 1e-9,
            (a, b) => *a == b,
        };
        if !close {
            return Err(fail(format!("{name}: formula gives {value}, expected {want}")));
        }
        let agrees = match (value, fd) {
            (ExtReal::Finite(a), ExtReal::Finite(b)) => (a - b).abs() <= 0.05 * (1.0 + a.abs()),
            (a, b) => a == b,
        };
        if !agrees {
            return Err(fail(format!("{name}: formula {value} vs quotients {fd}")));
        }
    }
    Ok("orthant 0, simplex 2, point +inf; quotients agree".into())
}

fn generators_are_subgradients(seed: u64) -> Result<String> {
    let cfg = OracleConfig {
        perturbations: 16,
        seed,
        ..OracleConfig::default()
    };
    let mut checked = 0;
    for s in 0..30 {
        let inst = random_nonsmooth(seed.wrapping_mul(1000).wrapping_add(s), InstanceShape::default(), InstanceKind::Generic)?;
        let sub = g_subdiff(&inst.problem.g, &inst.x, TOL_ACTIVE)?.set;
        let base = &sub.points()[0];
        let mut members: Vec<DVector<f64>> = sub.points().to_vec();
        members.extend(sub.rays().iter().map(|r| base + r));
        members.extend(sub.lines().iter().flat_map(|l| [base + l, base - l]));
        for m in &members {
            if !subgradient_inequality_check(&inst.problem.g, &inst.x, m, &cfg)? {
                return Err(fail(format!("instance {s}: generated element {m:?} violates the subgradient inequality")));
            }
            checked += 1;
        }
    }
    Ok(format!("{checked} generated subgradients pass"))
}

fn projection_idempotence(seed: u64) -> Result<String> {
    let mut r = rng(seed);
    for s in 0..50 {
        let (p, _) = random_lp(seed.wrapping_mul(1000).wrapping_add(s));
        let z = normal_vec(&mut r, p.dim()) * 3.0;
        let once = project_onto_polyhedron(&p, &z)?;
        let twice = project_onto_polyhedron(&p, &once)?;
        if (&once - &twice).amax() > 1e-9 || !p.contains(&once, 1e-9) {
            return Err(fail(format!("instance {s}: projection not idempotent")));
        }
    }
    Ok("50 projections idempotent to 1e-9".into())
}

fn correspondence(seed: u64) -> Result<String> {
    let v = |xs: &[f64]| DVector::from_column_slice(xs);
    let cfg = CorrespondenceConfig { seed, ..Default::default() };
    let ls = CompositeProblem::new(
        SmoothQuadratic::distance_to(&v(&[1.0, -1.0])),
        PolyhedralFunction::indicator(Polyhedron::orthant(2))?,
    )?;
    let spurious = correspondence_check(&ls, &v(&[0.0, 0.0]), &cfg)?;
    if !spurious.stationary_for_lifted || spurious.stationary_for_phi {
        return Err(fail("origin not classified as a spurious lifted stationary point".into()));
    }
    correspondence_check(&ls, &v(&[1.0, 0.0]), &cfg)?;
    let kinds = [InstanceKind::Stationary, InstanceKind::LiftedOnly, InstanceKind::Generic];
    let shape = InstanceShape {
        max_n: 5,
        ..Default::default()
    };
    let trials = 60;
    for s in 0..trials {
        let inst = random_nonsmooth(seed.wrapping_mul(1000).wrapping_add(s), shape, kinds[s as usize % 3])?;
        correspondence_check(&inst.problem, &inst.y, &cfg)?;
    }
    Ok(format!("designed cases plus {trials} random instances consistent"))
}
