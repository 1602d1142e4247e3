//! Projected gradient on `phi` and gradient descent on the lifted problem for
//! the two lift classes where `Phi` is tractable: `g = ι_{R^n_+}` (the lift
//! is unconstrained and smooth) and `g = ι_{simplex}` (the lift lives on a
//! sphere).

use nalgebra::DVector;

use super::sampling::fit_line;
use crate::error::{Error, Result};
use crate::polyfunc::{phi_residual, CompositeProblem, PolyhedralFunction, SmoothQuadratic, SmoothFunction};
use crate::polyhedra::project_onto_polyhedron;
use crate::reparam::square;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    Original,
    Lifted,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepRule {
    /// `1/L` for the original problem, Armijo from `0.1` for the lifted one.
    Auto,
    Fixed(f64),
    Armijo { initial: f64, shrink: f64, c1: f64 },
}

const LIFTED_ARMIJO: StepRule = StepRule::Armijo {
    initial: 0.1,
    shrink: 0.5,
    c1: 1e-4,
};

#[derive(Debug, Clone, Copy)]
pub struct SolverConfig {
    pub steps: usize,
    pub step_rule: StepRule,
    /// Optimal value used for gaps; defaults to the smallest value on the trace.
    pub best_value: Option<f64>,
    /// Stop once the residual drops to this level.
    pub residual_tol: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            steps: 10_000,
            step_rule: StepRule::Auto,
            best_value: None,
            residual_tol: 1e-10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Iterate {
    pub k: usize,
    pub gap: f64,
    pub residual: f64,
    pub step: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Rate {
    /// `gap_k ≈ C ρ^k`.
    Linear { rho: f64, r_squared: f64 },
    /// `gap_k ≈ C k^{-power}`.
    Sublinear { power: f64, r_squared: f64 },
}

#[derive(Debug, Clone)]
pub struct SolverTrace {
    pub iterates: Vec<Iterate>,
    pub variant: Variant,
    pub final_point: DVector<f64>,
    /// `None` when the trace is too short or stalls (see [`fit_rate`]).
    pub rate: Option<Rate>,
}

#[derive(Debug, Clone, Copy)]
enum LiftClass {
    Orthant,
    Sphere { radius: f64 },
}

fn lift_class(g: &PolyhedralFunction) -> Option<LiftClass> {
    if !g.is_indicator() {
        return None;
    }
    let dom = g.domain();
    let n = dom.dim();
    if dom.n_ineq() != n {
        return None;
    }
    let mut seen = vec![false; n];
    for r in 0..n {
        let row = dom.ineq_row(r);
        if dom.b_ineq()[r] != 0.0 {
            return None;
        }
        let i = row.iamax();
        let only_i = (0..n).all(|k| k == i || row[k] == 0.0);
        if !(only_i && row[i] < 0.0) || seen[i] {
            return None;
        }
        seen[i] = true;
    }
    match dom.n_eq() {
        0 => Some(LiftClass::Orthant),
        1 => {
            let a = dom.eq_row(0);
            let total = dom.b_eq()[0] / a[0];
            let uniform = a.iter().all(|v| *v == a[0]) && a[0] != 0.0;
            (uniform && total > 0.0).then(|| LiftClass::Sphere { radius: total.sqrt() })
        }
        _ => None,
    }
}

struct Raw {
    values: Vec<f64>,
    residuals: Vec<f64>,
    steps: Vec<f64>,
    point: DVector<f64>,
}

fn check_monotone(k: usize, previous: f64, current: f64) -> Result<()> {
    if current > previous + 1e-12 * (1.0 + previous.abs()) {
        return Err(Error::DivergenceDetected {
            iteration: k,
            previous,
            current,
        });
    }
    Ok(())
}

/// Runs `cfg.steps - 1` iterations from `start` (`x0` for the original
/// problem, `y0` for the lifted one) and records every iterate.
pub fn run_first_order(p: &CompositeProblem<SmoothQuadratic>, variant: Variant, start: &DVector<f64>, cfg: &SolverConfig) -> Result<SolverTrace> {
    if start.len() != p.dim() {
        return Err(Error::dims("start point length differs from problem dimension"));
    }
    if cfg.steps == 0 {
        return Err(Error::InvalidRange("steps must be positive".into()));
    }
    let raw = match variant {
        Variant::Original => {
            if !p.g.is_indicator() {
                return Err(Error::UnsupportedProblemClass(
                    "projected gradient needs g to be an indicator (no pieces)".into(),
                ));
            }
            run_projected(p, start, cfg)?
        }
        Variant::Lifted => match lift_class(&p.g) {
            Some(LiftClass::Orthant) => run_lifted(p, start, cfg, None)?,
            Some(LiftClass::Sphere { radius }) => run_lifted(p, start, cfg, Some(radius))?,
            None => {
                return Err(Error::UnsupportedProblemClass(
                    "lifted descent needs g = ι of the orthant or of a simplex {x >= 0, Σx = c}".into(),
                ))
            }
        },
    };
    let best = cfg
        .best_value
        .unwrap_or_else(|| raw.values.iter().copied().fold(f64::INFINITY, f64::min));
    let iterates: Vec<Iterate> = (0..raw.values.len())
        .map(|k| Iterate {
            k,
            gap: raw.values[k] - best,
            residual: raw.residuals[k],
            step: raw.steps[k],
        })
        .collect();
    let rate = fit_rate(&iterates).ok();
    Ok(SolverTrace {
        iterates,
        variant,
        final_point: raw.point,
        rate,
    })
}

fn run_projected(p: &CompositeProblem<SmoothQuadratic>, start: &DVector<f64>, cfg: &SolverConfig) -> Result<Raw> {
    let dom = p.g.domain();
    let mut x = project_onto_polyhedron(dom, start)?;
    let lip = p.f.lipschitz_bound();
    let default_t = if lip > 0.0 { 1.0 / lip } else { 1.0 };
    let mut raw = Raw {
        values: vec![p.f.value(&x)],
        residuals: vec![phi_residual(p, &x)?],
        steps: vec![0.0],
        point: x.clone(),
    };
    for k in 1..cfg.steps {
        if raw.residuals[k - 1] <= cfg.residual_tol {
            break;
        }
        let grad = p.f.gradient(&x);
        let fx = raw.values[k - 1];
        let (next, t) = match cfg.step_rule {
            StepRule::Auto => (project_onto_polyhedron(dom, &(&x - &grad * default_t))?, default_t),
            StepRule::Fixed(t) => (project_onto_polyhedron(dom, &(&x - &grad * t))?, t),
            StepRule::Armijo { initial, shrink, c1 } => {
                let mut t = initial;
                loop {
                    let cand = project_onto_polyhedron(dom, &(&x - &grad * t))?;
                    let decrease = (&cand - &x).norm_squared() * c1 / t;
                    if p.f.value(&cand) <= fx - decrease || t < 1e-20 {
                        break (cand, t);
                    }
                    t *= shrink;
                }
            }
        };
        if next == x {
            break;
        }
        let value = p.f.value(&next);
        check_monotone(k, fx, value)?;
        x = next;
        raw.values.push(value);
        raw.residuals.push(phi_residual(p, &x)?);
        raw.steps.push(t);
    }
    raw.point = x;
    Ok(raw)
}

/// Gradient (Riemannian on the sphere) of `Phi(y) = f(y²)`.
fn lifted_gradient(p: &CompositeProblem<SmoothQuadratic>, y: &DVector<f64>, radius: Option<f64>) -> DVector<f64> {
    let g = (y * 2.0).component_mul(&p.f.gradient(&square(y)));
    match radius {
        None => g,
        Some(r) => {
            let c = g.dot(y) / (r * r);
            g - y * c
        }
    }
}

fn lifted_step(y: &DVector<f64>, d: &DVector<f64>, t: f64, radius: Option<f64>) -> DVector<f64> {
    let z = y - d * t;
    match radius {
        None => z,
        Some(r) => {
            let nz = z.norm();
            z * (r / nz)
        }
    }
}

fn run_lifted(p: &CompositeProblem<SmoothQuadratic>, start: &DVector<f64>, cfg: &SolverConfig, radius: Option<f64>) -> Result<Raw> {
    let phi = |y: &DVector<f64>| p.f.value(&square(y));
    let mut y = match radius {
        None => start.clone(),
        Some(r) => {
            let n = start.norm();
            if n == 0.0 {
                return Err(Error::InvalidRange("start point must be nonzero on the sphere".into()));
            }
            start * (r / n)
        }
    };
    let rule = match cfg.step_rule {
        StepRule::Auto => LIFTED_ARMIJO,
        other => other,
    };
    let mut d = lifted_gradient(p, &y, radius);
    let mut raw = Raw {
        values: vec![phi(&y)],
        residuals: vec![d.norm()],
        steps: vec![0.0],
        point: y.clone(),
    };
    for k in 1..cfg.steps {
        if raw.residuals[k - 1] <= cfg.residual_tol {
            break;
        }
        let fy = raw.values[k - 1];
        let (next, t) = match rule {
            StepRule::Fixed(t) => (lifted_step(&y, &d, t, radius), t),
            StepRule::Armijo { initial, shrink, c1 } => {
                let dd = d.norm_squared();
                let mut t = initial;
                loop {
                    let cand = lifted_step(&y, &d, t, radius);
                    if phi(&cand) <= fy - c1 * t * dd || t < 1e-20 {
                        break (cand, t);
                    }
                    t *= shrink;
                }
            }
            StepRule::Auto => unreachable!(),
        };
        if next == y {
            break;
        }
        let value = phi(&next);
        check_monotone(k, fy, value)?;
        y = next;
        d = lifted_gradient(p, &y, radius);
        raw.values.push(value);
        raw.residuals.push(d.norm());
        raw.steps.push(t);
    }
    raw.point = y;
    Ok(raw)
}

pub const MIN_TRACE: usize = 20;

/// Fits `log gap` against `k` (linear rate) and against `log k` (sublinear
/// rate) on the second half of the positive-gap iterates and keeps the
/// better fit.
pub fn fit_rate(iterates: &[Iterate]) -> Result<Rate> {
    let positive: Vec<&Iterate> = iterates.iter().filter(|it| it.k >= 1 && it.gap > 0.0).collect();
    if positive.len() < MIN_TRACE {
        return Err(Error::InsufficientTrace(format!(
            "{} positive-gap iterates, need {MIN_TRACE}",
            positive.len()
        )));
    }
    let tail = &positive[positive.len() / 2..];
    let first = tail[0].gap;
    let last = tail[tail.len() - 1].gap;
    if !(last < first * (1.0 - 1e-9)) {
        return Err(Error::InsufficientTrace("gaps do not decay on the tail".into()));
    }
    let lin: Vec<(f64, f64)> = tail.iter().map(|it| (it.k as f64, it.gap.ln())).collect();
    let sub: Vec<(f64, f64)> = tail.iter().map(|it| ((it.k as f64).ln(), it.gap.ln())).collect();
    let (s_lin, _, r_lin) = fit_line(&lin);
    let (s_sub, _, r_sub) = fit_line(&sub);
    Ok(if r_lin >= r_sub {
        Rate::Linear {
            rho: s_lin.exp(),
            r_squared: r_lin,
        }
    } else {
        Rate::Sublinear {
            power: -s_sub,
            r_squared: r_sub,
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
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

    fn synthetic(gap: impl Fn(usize) -> f64) -> Vec<Iterate> {
        (0..200)
            .map(|k| Iterate {
                k,
                gap: gap(k),
                residual: 0.0,
                step: 1.0,
            })
            .collect()
    }

    #[test]
    fn synthetic_rates() {
        match fit_rate(&synthetic(|k| 0.9f64.powi(k as i32))).unwrap() {
            Rate::Linear { rho, .. } => assert!((0.88..=0.92).contains(&rho)),
            r => panic!("{r:?}"),
        }
        match fit_rate(&synthetic(|k| 1.0 / ((k * k) as f64).max(1.0))).unwrap() {
            Rate::Sublinear { power, .. } => assert!((1.9..=2.1).contains(&power)),
            r => panic!("{r:?}"),
        }
        assert!(matches!(fit_rate(&synthetic(|_| 1.0)), Err(Error::InsufficientTrace(_))));
        assert!(matches!(fit_rate(&synthetic(|_| 0.0)[..10]), Err(Error::InsufficientTrace(_))));
    }

    #[test]
    fn quartic_lift_is_sublinear() {
        let cfg = SolverConfig {
            best_value: Some(0.0),
            ..Default::default()
        };
        let tr = run_first_order(&orthant_problem(&[0.0]), Variant::Lifted, &v(&[0.5]), &cfg).unwrap();
        match tr.rate.unwrap() {
            Rate::Sublinear { power, .. } => assert!((1.7..=2.3).contains(&power), "{power}"),
            r => panic!("{r:?}"),
        }
    }

    #[test]
    fn strict_lift_is_linear() {
        let cfg = SolverConfig {
            best_value: Some(0.0),
            ..Default::default()
        };
        let tr = run_first_order(&orthant_problem(&[1.0]), Variant::Lifted, &v(&[0.5]), &cfg).unwrap();
        match tr.rate.unwrap() {
            Rate::Linear { rho, .. } => assert!(rho < 1.0),
            r => panic!("{r:?}"),
        }
        assert!((tr.final_point[0] - 1.0).abs() < 1e-8);
    }

    #[test]
    fn projected_gradient_reaches_projection() {
        let tr = run_first_order(&orthant_problem(&[1.0, -1.0]), Variant::Original, &v(&[2.0, 2.0]), &SolverConfig::default()).unwrap();
        assert!((&tr.final_point - v(&[1.0, 0.0])).amax() < 1e-12);
        assert!(tr.iterates.windows(2).all(|w| w[1].gap <= w[0].gap));
    }

    #[test]
    fn sphere_lift_minimizes_linear_function() {
        let p = CompositeProblem::new(
            SmoothQuadratic::linear(v(&[1.0, 2.0])),
            PolyhedralFunction::indicator(Polyhedron::unit_simplex(2)).unwrap(),
        )
        .unwrap();
        let tr = run_first_order(&p, Variant::Lifted, &v(&[1.0, 1.0]), &SolverConfig::default()).unwrap();
        let x = square(&tr.final_point);
        assert!((x[0] - 1.0).abs() < 1e-8 && x[1].abs() < 1e-8);
        // Renormalizing onto the sphere costs a few ulps per step.
        assert!(tr.iterates.windows(2).all(|w| w[1].gap <= w[0].gap + 1e-14));
    }

    #[test]
    fn unsupported_classes() {
        let mut d = Polyhedron::orthant(2);
        d.push_ineq(&v(&[1.0, 1.0]), 3.0);
        let p = CompositeProblem::new(SmoothQuadratic::linear(v(&[1.0, 2.0])), PolyhedralFunction::indicator(d).unwrap()).unwrap();
        assert!(matches!(
            run_first_order(&p, Variant::Lifted, &v(&[1.0, 1.0]), &SolverConfig::default()),
            Err(Error::UnsupportedProblemClass(_))
        ));
        let g = PolyhedralFunction::new(vec![(v(&[1.0]), 0.0)], Polyhedron::full(1)).unwrap();
        let p = CompositeProblem::new(SmoothQuadratic::linear(v(&[1.0])), g).unwrap();
        assert!(matches!(
            run_first_order(&p, Variant::Original, &v(&[1.0]), &SolverConfig::default()),
            Err(Error::UnsupportedProblemClass(_))
        ));
    }

    #[test]
    fn oversized_fixed_step_is_flagged() {
        let cfg = SolverConfig {
            step_rule: StepRule::Fixed(10.0),
            ..Default::default()
        };
        assert!(matches!(
            run_first_order(&orthant_problem(&[1.0]), Variant::Lifted, &v(&[0.5]), &cfg),
            Err(Error::DivergenceDetected { .. })
        ));
    }
}
