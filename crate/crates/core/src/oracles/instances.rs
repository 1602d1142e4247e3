//! Seeded random instances shared by the self-test and the test suites.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::polyfunc::{g_subdiff, CompositeProblem, PolyhedralFunction, SmoothFunction, SmoothQuadratic, TOL_ACTIVE};
use crate::polyhedra::Polyhedron;
use crate::second_order::normal_vec;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `{z >= 0, Σz <= U}` cut by `extra` random rows that keep the origin feasible.
pub fn random_bounded_polyhedron<R: Rng>(rng: &mut R, n: usize, extra: usize) -> Polyhedron {
    let mut p = Polyhedron::orthant(n);
    p.push_ineq(&DVector::from_element(n, 1.0), rng.gen_range(1.0..5.0));
    for _ in 0..extra {
        let a = normal_vec(rng, n);
        p.push_ineq(&a, rng.gen_range(0.2..2.0));
    }
    p
}

/// A bounded LP `max c·z` with `n <= 6` and at most 10 rows besides `z >= 0`.
pub fn random_lp(seed: u64) -> (Polyhedron, DVector<f64>) {
    let mut r = rng(seed);
    let n = r.gen_range(1..=6);
    let extra = r.gen_range(0..=(9usize).min(16 - n - 1));
    let p = random_bounded_polyhedron(&mut r, n, extra);
    let c = normal_vec(&mut r, n);
    (p, c)
}

fn random_psd<R: Rng>(rng: &mut R, n: usize) -> DMatrix<f64> {
    let rank = rng.gen_range(1..=n);
    let b = DMatrix::from_fn(rank, n, |_, _| rng.sample::<f64, _>(rand_distr::StandardNormal));
    b.transpose() * b / n as f64
}

/// `f` a random convex quadratic, `g = ι_{R^n_+}`, `y` random, `n <= 6`.
pub fn random_smooth_lift(seed: u64) -> (CompositeProblem, DVector<f64>) {
    let mut r = rng(seed);
    let n = r.gen_range(1..=6);
    let q = random_psd(&mut r, n);
    let lin = normal_vec(&mut r, n);
    let f = SmoothQuadratic::new(q, lin, r.gen_range(-1.0..1.0)).expect("square by construction");
    let g = PolyhedralFunction::indicator(Polyhedron::orthant(n)).expect("orthant is nonempty");
    let y = normal_vec(&mut r, n);
    (CompositeProblem::new(f, g).expect("dimensions agree"), y)
}

/// How `∇f(x)` is tied to `∂g(x)` in a generated instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InstanceKind {
    /// `-∇f(x) ∈ ∂g(x)`: `x` is stationary for `phi`.
    Stationary,
    /// `-∇f(x)_I` matches an element of `∂g(x)` on the support only, so `y`
    /// is lifted-stationary but `x` usually is not stationary for `phi`.
    LiftedOnly,
    /// `∇f(x)` unrelated to `∂g(x)`.
    Generic,
}

#[derive(Debug, Clone)]
pub struct NonsmoothInstance {
    pub problem: CompositeProblem,
    pub x: DVector<f64>,
    pub y: DVector<f64>,
    pub kind: InstanceKind,
}

/// Limits for [`random_nonsmooth`].
#[derive(Debug, Clone, Copy)]
pub struct InstanceShape {
    pub max_n: usize,
    pub max_pieces: usize,
    /// Rows of `dom g` including the appended nonnegativity rows.
    pub max_rows: usize,
    /// Active inequality rows at `x` (rays of `∂g(x)`).
    pub max_active_rows: usize,
}

impl Default for InstanceShape {
    fn default() -> Self {
        Self {
            max_n: 4,
            max_pieces: 4,
            max_rows: 6,
            max_active_rows: 3,
        }
    }
}

/// A polyhedral `g` built around a chosen point `x` with a prescribed mix
/// of active pieces, zero coordinates and active rows, a convex quadratic
/// `f` whose gradient at `x` is placed according to `kind`, and
/// `y = s∘√x` for random signs `s`.
pub fn random_nonsmooth(seed: u64, shape: InstanceShape, kind: InstanceKind) -> Result<NonsmoothInstance> {
    let mut r = rng(seed);
    let n = r.gen_range(1..=shape.max_n);
    let mut active_rows = 0usize;
    let x = DVector::from_fn(n, |_, _| {
        if active_rows < shape.max_active_rows && r.gen_bool(0.35) {
            active_rows += 1;
            0.0
        } else {
            r.gen_range(0.3..1.5)
        }
    });

    let n_pieces = r.gen_range(0..=shape.max_pieces);
    let n_active_pieces = if n_pieces == 0 { 0 } else { r.gen_range(1..=n_pieces) };
    let level = r.gen_range(-1.0..1.0);
    let pieces = (0..n_pieces)
        .map(|j| {
            let a = normal_vec(&mut r, n);
            let mut b = level - a.dot(&x);
            if j >= n_active_pieces {
                b -= r.gen_range(0.3..1.0);
            }
            (a, b)
        })
        .collect();

    let mut domain = Polyhedron::full(n);
    let spare = shape.max_rows.saturating_sub(n).min(2);
    let mut lines = 0;
    for _ in 0..r.gen_range(0..=spare) {
        let a = normal_vec(&mut r, n);
        let ax = a.dot(&x);
        if lines < 2 && r.gen_bool(0.2) {
            domain.push_eq(&a, ax);
            lines += 1;
        } else if active_rows < shape.max_active_rows && r.gen_bool(0.5) {
            domain.push_ineq(&a, ax);
            active_rows += 1;
        } else {
            domain.push_ineq(&a, ax + r.gen_range(0.3..1.0));
        }
    }
    let g = PolyhedralFunction::new(pieces, domain)?;

    let q = random_psd(&mut r, n);
    let sub = g_subdiff(&g, &x, TOL_ACTIVE)?.set;
    let mut p = DVector::zeros(n);
    let weights: Vec<f64> = (0..sub.points().len()).map(|_| r.gen_range(0.05..1.0)).collect();
    let total: f64 = weights.iter().sum();
    for (pt, w) in sub.points().iter().zip(&weights) {
        p += pt * (w / total);
    }
    for ray in sub.rays() {
        p += ray * r.gen_range(0.0..1.0);
    }
    for line in sub.lines() {
        p += line * r.gen_range(-1.0..1.0);
    }
    let grad = match kind {
        InstanceKind::Stationary => -p,
        InstanceKind::LiftedOnly => {
            let mut d = normal_vec(&mut r, n);
            for i in 0..n {
                if x[i] > 0.0 {
                    d[i] = 0.0;
                }
            }
            d - p
        }
        InstanceKind::Generic => normal_vec(&mut r, n),
    };
    let lin = &grad - &q * &x;
    let f = SmoothQuadratic::new(q, lin, 0.0)?;
    debug_assert!((f.gradient(&x) - &grad).amax() < 1e-10);
    let y = DVector::from_fn(n, |i, _| if r.gen_bool(0.5) { x[i].sqrt() } else { -x[i].sqrt() });
    Ok(NonsmoothInstance {
        problem: CompositeProblem::new(f, g)?,
        x,
        y,
        kind,
    })
}
