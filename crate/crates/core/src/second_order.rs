//! Second subderivative of the lifted problem on `S_I = {w : w_I = 0}` and
//! the stationarity correspondence between `Phi` and `phi`.
//!
//! On `S_I` the second subderivative of `H(y) = g(y²)` at `ȳ` for the
//! multiplier `λ = 2ȳ∘v` is the LP value
//!
//! ```text
//! 2 · sup { <w², p> : p ∈ ∂g(ȳ²), p_I = v_I }
//! ```
//!
//! and `d²Phi(y|0)(w)` adds `2<∇f(y²), w²>`. A lifted stationary point maps to
//! a stationary point of `phi` exactly when this is nonnegative on all of
//! `S_I`, which is decided by the feasibility of
//! `{λ ∈ ∂phi(y²) : λ_I = 0, λ_{I^c} >= 0}`.

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::ext::ExtReal;
use crate::polyfunc::{g_subdiff, phi_residual, CompositeProblem, PolyhedralFunction, SmoothFunction, TOL_ACTIVE};
use crate::polyhedra::{lp_solve, GeneratorSet, LinearProgram, LpStatus};
use crate::reparam::{lifted_residual, square, support_set, SupportSet, TOL_SUPPORT};
use crate::FEAS_TOL;

/// Standard normal vector.
pub(crate) fn normal_vec<R: rand::Rng>(rng: &mut R, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.sample(StandardNormal))
}

/// A certificate of lifted stationarity.
#[derive(Debug, Clone)]
pub struct Multiplier {
    /// `v ∈ ∂g(x)` with `v_I = -∇f(x)_I`.
    pub v: DVector<f64>,
    /// `2 y ∘ v`.
    pub lambda: DVector<f64>,
}

struct LiftedContext {
    x: DVector<f64>,
    support: SupportSet,
    subdiff: GeneratorSet,
}

fn lifted_context(g: &PolyhedralFunction, y: &DVector<f64>) -> Result<LiftedContext> {
    let x = square(y);
    let subdiff = match g_subdiff(g, &x, TOL_ACTIVE) {
        Ok(s) => s.set,
        Err(Error::OutOfDomain { violation }) => return Err(Error::OutOfLiftedDomain { violation }),
        Err(e) => return Err(e),
    };
    Ok(LiftedContext {
        x,
        support: support_set(y, TOL_SUPPORT),
        subdiff,
    })
}

/// LP over the coefficients of `∂g(x)` with `p_I` pinned to `target_I`.
fn pinned_lp(ctx: &LiftedContext, target: &DVector<f64>) -> (LinearProgram, Vec<DVector<f64>>) {
    let k = ctx.subdiff.n_coefficients();
    let mut lp = LinearProgram::new(k);
    let rows = ctx.subdiff.embed(&mut lp, 0);
    for &i in &ctx.support.active {
        lp.add_eq(rows[i].clone(), target[i]);
    }
    (lp, rows)
}

fn multiplier_from(ctx: &LiftedContext, y: &DVector<f64>, theta: &DVector<f64>) -> Multiplier {
    let v = ctx.subdiff.combine(theta);
    let lambda = (y * 2.0).component_mul(&v);
    Multiplier { v, lambda }
}

/// Some `v ∈ ∂g(y²)` with `v_I = -∇f(y²)_I`, or [`Error::NotStationary`].
pub fn stationarity_multiplier<F: SmoothFunction>(p: &CompositeProblem<F>, y: &DVector<f64>) -> Result<Multiplier> {
    multiplier_witnesses(p, y)?
        .into_iter()
        .next()
        .ok_or(Error::NotStationary)
}

/// Distinct multiplier witnesses: vertices of the multiplier LP maximizing
/// and minimizing each free coordinate `v_i`, `i ∉ I`. Empty iff `y` is not
/// lifted-stationary.
pub fn multiplier_witnesses<F: SmoothFunction>(p: &CompositeProblem<F>, y: &DVector<f64>) -> Result<Vec<Multiplier>> {
    if y.len() != p.dim() {
        return Err(Error::dims("y length differs from problem dimension"));
    }
    let ctx = lifted_context(&p.g, y)?;
    let target = -p.f.gradient(&ctx.x);
    let (lp, rows) = pinned_lp(&ctx, &target);
    let k = lp.dim();
    let mut objectives = vec![DVector::zeros(k)];
    for &i in &ctx.support.inactive {
        objectives.push(rows[i].clone());
        objectives.push(-&rows[i]);
    }
    let mut out: Vec<Multiplier> = Vec::new();
    for objective in objectives {
        let res = lp_solve(&lp.clone().maximize(objective))?;
        match res.status {
            LpStatus::Infeasible => return Ok(Vec::new()),
            LpStatus::Unbounded => continue,
            LpStatus::Optimal => {
                let m = multiplier_from(&ctx, y, res.witness.as_ref().unwrap());
                if out.iter().all(|o| (&o.v - &m.v).amax() > 1e-12) {
                    out.push(m);
                }
            }
        }
    }
    Ok(out)
}

/// `d²H(ȳ | 2ȳ∘v)(w)` for `H = g∘T` and `w ∈ S_I` (`w_I` is zeroed).
pub fn d2_lifted_g(g: &PolyhedralFunction, ybar: &DVector<f64>, v: &DVector<f64>, w: &DVector<f64>) -> Result<ExtReal> {
    if ybar.len() != g.dim() || v.len() != g.dim() || w.len() != g.dim() {
        return Err(Error::dims("ȳ, v and w must match g's dimension"));
    }
    let ctx = lifted_context(g, ybar)?;
    d2_in_context(&ctx, v, w)
}

fn d2_in_context(ctx: &LiftedContext, v: &DVector<f64>, w: &DVector<f64>) -> Result<ExtReal> {
    let (lp, rows) = pinned_lp(ctx, v);
    let mut c = DVector::zeros(lp.dim());
    for &i in &ctx.support.inactive {
        c += &rows[i] * (w[i] * w[i]);
    }
    let res = lp_solve(&lp.maximize(c))?;
    match res.status {
        LpStatus::Infeasible => Err(Error::InfeasibleMultiplier),
        LpStatus::Unbounded => Ok(ExtReal::PosInf),
        LpStatus::Optimal => Ok(res.value * 2.0),
    }
}

fn project_to_si(support: &SupportSet, w: &DVector<f64>) -> DVector<f64> {
    let mut w = w.clone();
    for &i in &support.active {
        w[i] = 0.0;
    }
    w
}

/// `d²Phi(y|0)(w) = d²G(y | -2y∘∇f(y²))(w) + 2<∇f(y²), w²>` for `w ∈ S_I`.
pub fn d2_lifted_objective_on_si<F: SmoothFunction>(
    p: &CompositeProblem<F>,
    y: &DVector<f64>,
    w: &DVector<f64>,
) -> Result<ExtReal> {
    if w.len() != p.dim() {
        return Err(Error::dims("w length differs from problem dimension"));
    }
    let witnesses = multiplier_witnesses(p, y)?;
    if witnesses.is_empty() {
        return Err(Error::NotStationary);
    }
    let ctx = lifted_context(&p.g, y)?;
    let w = project_to_si(&ctx.support, w);
    let grad = p.f.gradient(&ctx.x);
    let smooth = 2.0 * grad.dot(&square(&w));
    let mut first: Option<ExtReal> = None;
    for m in &witnesses {
        let val = d2_in_context(&ctx, &m.v, &w)? + smooth;
        match first {
            None => first = Some(val),
            Some(prev) => {
                let same = match (prev, val) {
                    (ExtReal::Finite(a), ExtReal::Finite(b)) => (a - b).abs() <= 1e-8 * (1.0 + a.abs()),
                    (a, b) => a == b,
                };
                if !same {
                    return Err(Error::WitnessDependence {
                        first: prev.to_f64(),
                        second: val.to_f64(),
                    });
                }
            }
        }
    }
    Ok(first.unwrap())
}

/// `d²Phi(y|0)(w)` for arbitrary `w` when `Phi` is smooth (`g = ι_{R^n_+}`):
/// `<w, ∇²Phi(y) w> = 4<y∘w, ∇²f(x) (y∘w)> + 2<∇f(x), w²>`.
pub fn d2_smooth_lift<F: SmoothFunction>(p: &CompositeProblem<F>, y: &DVector<f64>, w: &DVector<f64>) -> Result<f64> {
    let dom = p.g.domain();
    let pure_orthant = p.g.is_indicator() && dom.n_eq() == 0 && dom.n_ineq() == p.dim();
    if !pure_orthant {
        return Err(Error::UnsupportedProblemClass(
            "full-space second subderivative needs g = indicator of the orthant".into(),
        ));
    }
    let x = square(y);
    let yw = y.component_mul(w);
    Ok(4.0 * yw.dot(&(p.f.hessian(&x) * &yw)) + 2.0 * p.f.gradient(&x).dot(&square(w)))
}

#[derive(Debug, Clone, Copy)]
pub struct CorrespondenceConfig {
    pub tol: f64,
    /// Random directions in `S_I` for the sampling cross-check (coordinate
    /// directions are always included).
    pub samples: usize,
    pub seed: u64,
}

impl Default for CorrespondenceConfig {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            samples: 32,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CorrespondenceReport {
    pub stationary_for_lifted: bool,
    pub second_order_nonneg_on_si: bool,
    pub stationary_for_phi: bool,
    pub consistent: bool,
    /// `λ ∈ ∂phi(y²)` with `λ_I = 0`, `λ_{I^c} >= 0`, when one exists.
    pub witness_lambda: Option<DVector<f64>>,
    pub lifted_residual: f64,
    pub phi_residual: f64,
    pub support: SupportSet,
    /// Smallest sampled `d²Phi(y|0)(w)` over unit `w ∈ S_I` (lifted-stationary only).
    pub min_sampled_d2: Option<f64>,
    pub min_sampled_direction: Option<DVector<f64>>,
}

/// Decides both sides of the correspondence and fails with
/// [`Error::InconsistencyDetected`] if they disagree.
pub fn correspondence_check<F: SmoothFunction>(
    p: &CompositeProblem<F>,
    y: &DVector<f64>,
    cfg: &CorrespondenceConfig,
) -> Result<CorrespondenceReport> {
    if y.len() != p.dim() {
        return Err(Error::dims("y length differs from problem dimension"));
    }
    let ctx = lifted_context(&p.g, y)?;
    let n = p.dim();
    let grad = p.f.gradient(&ctx.x);

    let lifted = lifted_residual(p, y)?.value;
    let stationary_for_lifted = lifted <= cfg.tol * (1.0 + 2.0 * y.amax());

    // {λ = ∇f + p : p ∈ ∂g(x), λ_I = 0, λ_{I^c} >= 0}
    let zero_target = -grad.clone();
    let (mut lp, rows) = pinned_lp(&ctx, &zero_target);
    for &i in &ctx.support.inactive {
        lp.add_ge(rows[i].clone(), -grad[i]);
    }
    let res = lp_solve(&lp)?;
    let witness_lambda = match res.status {
        LpStatus::Optimal => Some(&grad + ctx.subdiff.combine(res.witness.as_ref().unwrap())),
        _ => None,
    };
    let second_order_nonneg_on_si = witness_lambda.is_some();

    let phi_res = phi_residual(p, &ctx.x)?;
    let stationary_for_phi = phi_res <= cfg.tol;

    let mut consistent = (stationary_for_lifted && second_order_nonneg_on_si) == stationary_for_phi;

    let mut min_sampled_d2 = None;
    let mut min_sampled_direction = None;
    if stationary_for_lifted && !ctx.support.inactive.is_empty() {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut directions: Vec<DVector<f64>> = ctx
            .support
            .inactive
            .iter()
            .map(|&i| {
                let mut e = DVector::zeros(n);
                e[i] = 1.0;
                e
            })
            .collect();
        for _ in 0..cfg.samples {
            let w = project_to_si(&ctx.support, &normal_vec(&mut rng, n));
            let norm = w.norm();
            if norm > 0.0 {
                directions.push(w / norm);
            }
        }
        let mut best = f64::INFINITY;
        let mut best_dir = None;
        for w in directions {
            match d2_lifted_objective_on_si(p, y, &w) {
                Ok(ExtReal::Finite(val)) if val < best => {
                    best = val;
                    best_dir = Some(w);
                }
                Ok(_) => {}
                // Tolerance-level stationarity can leave the multiplier LP infeasible.
                Err(Error::NotStationary) | Err(Error::InfeasibleMultiplier) => {}
                Err(e) => return Err(e),
            }
        }
        if best.is_finite() {
            min_sampled_d2 = Some(best);
            min_sampled_direction = best_dir;
            let scale = 1.0 + grad.amax();
            if second_order_nonneg_on_si && best < -1e3 * cfg.tol.max(FEAS_TOL) * scale {
                consistent = false;
            }
        }
    }

    let report = CorrespondenceReport {
        stationary_for_lifted,
        second_order_nonneg_on_si,
        stationary_for_phi,
        consistent,
        witness_lambda,
        lifted_residual: lifted,
        phi_residual: phi_res,
        support: ctx.support,
        min_sampled_d2,
        min_sampled_direction,
    };
    if !report.consistent {
        return Err(Error::InconsistencyDetected(Box::new(report)));
    }
    Ok(report)
}
