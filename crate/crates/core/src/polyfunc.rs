//! The composite problem `phi = f + g` with `f` smooth and `g` polyhedral.

use std::fmt::Debug;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::ext::ExtReal;
use crate::polyhedra::{min_norm_weighted, GeneratorSet, Polyhedron};
use crate::FEAS_TOL;

/// Default absolute activity tolerance for pieces and constraint rows.
pub const TOL_ACTIVE: f64 = 1e-8;

/// A `C²` function with exact value, gradient and Hessian.
pub trait SmoothFunction: Debug + Send + Sync {
    fn dim(&self) -> usize;
    fn value(&self, x: &DVector<f64>) -> f64;
    fn gradient(&self, x: &DVector<f64>) -> DVector<f64>;
    fn hessian(&self, x: &DVector<f64>) -> DMatrix<f64>;
}

/// `f(x) = ½<x, Qx> + <q, x> + r` with `Q` symmetric.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothQuadratic {
    q_mat: DMatrix<f64>,
    q_lin: DVector<f64>,
    r: f64,
}

impl SmoothQuadratic {
    /// `Q` is replaced by `(Q + Q^T)/2`.
    pub fn new(q_mat: DMatrix<f64>, q_lin: DVector<f64>, r: f64) -> Result<Self> {
        if !q_mat.is_square() {
            return Err(Error::dims(format!(
                "Q must be square, got {}x{}",
                q_mat.nrows(),
                q_mat.ncols()
            )));
        }
        if q_mat.nrows() != q_lin.len() {
            return Err(Error::dims(format!(
                "Q is {}x{} but q has length {}",
                q_mat.nrows(),
                q_mat.ncols(),
                q_lin.len()
            )));
        }
        if q_mat.iter().chain(q_lin.iter()).any(|v| !v.is_finite()) || !r.is_finite() {
            return Err(Error::NumericalFailure("quadratic data must be finite".into()));
        }
        let sym = (&q_mat + q_mat.transpose()) * 0.5;
        Ok(Self {
            q_mat: sym,
            q_lin,
            r,
        })
    }

    /// `½‖x - target‖²`.
    pub fn distance_to(target: &DVector<f64>) -> Self {
        let n = target.len();
        Self {
            q_mat: DMatrix::identity(n, n),
            q_lin: -target,
            r: 0.5 * target.norm_squared(),
        }
    }

    /// `<c, x>`.
    pub fn linear(c: DVector<f64>) -> Self {
        let n = c.len();
        Self {
            q_mat: DMatrix::zeros(n, n),
            q_lin: c,
            r: 0.0,
        }
    }

    pub fn q(&self) -> &DMatrix<f64> {
        &self.q_mat
    }

    pub fn linear_term(&self) -> &DVector<f64> {
        &self.q_lin
    }

    pub fn constant(&self) -> f64 {
        self.r
    }

    pub fn scaled(&self, t: f64) -> Self {
        Self {
            q_mat: &self.q_mat * t,
            q_lin: &self.q_lin * t,
            r: self.r * t,
        }
    }

    /// Smallest eigenvalue of `Q`.
    pub fn min_eigenvalue(&self) -> f64 {
        self.q_mat.clone().symmetric_eigen().eigenvalues.min()
    }

    /// Upper bound on the spectral norm of `Q` by power iteration.
    pub fn lipschitz_bound(&self) -> f64 {
        let n = self.q_mat.nrows();
        let mut v = DVector::from_fn(n, |i, _| 1.0 + 0.1 * i as f64);
        v /= v.norm();
        let mut est = 0.0;
        for _ in 0..500 {
            let w = &self.q_mat * &v;
            let nw = w.norm();
            if nw == 0.0 {
                return 0.0;
            }
            let next = nw;
            v = w / nw;
            if (next - est).abs() <= 1e-12 * next {
                est = next;
                break;
            }
            est = next;
        }
        // Power iteration approaches from below; pad slightly.
        est * (1.0 + 1e-9)
    }
}

impl SmoothFunction for SmoothQuadratic {
    fn dim(&self) -> usize {
        self.q_lin.len()
    }

    fn value(&self, x: &DVector<f64>) -> f64 {
        0.5 * x.dot(&(&self.q_mat * x)) + self.q_lin.dot(x) + self.r
    }

    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.q_mat * x + &self.q_lin
    }

    fn hessian(&self, _x: &DVector<f64>) -> DMatrix<f64> {
        self.q_mat.clone()
    }
}

/// `g(x) = max_j <a_j, x> + b_j` on `domain` (0 there if no pieces), `+∞`
/// elsewhere. The domain always lies in `R^n_+`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyhedralFunction {
    n: usize,
    pieces: Vec<(DVector<f64>, f64)>,
    domain: Polyhedron,
}

impl PolyhedralFunction {
    /// Appends `-z_i <= 0` for every coordinate not already carrying that row
    /// and rejects an empty domain.
    pub fn new(pieces: Vec<(DVector<f64>, f64)>, domain: Polyhedron) -> Result<Self> {
        let n = domain.dim();
        for (a, b) in &pieces {
            if a.len() != n {
                return Err(Error::dims(format!(
                    "piece of length {} in dimension {n}",
                    a.len()
                )));
            }
            if !b.is_finite() || a.iter().any(|v| !v.is_finite()) {
                return Err(Error::NumericalFailure("non-finite piece".into()));
            }
        }
        let mut domain = domain;
        for i in 0..n {
            let already = (0..domain.n_ineq()).any(|r| {
                let row = domain.ineq_row(r);
                let norm = row.norm();
                norm > 0.0
                    && domain.b_ineq()[r] == 0.0
                    && (0..n).all(|k| {
                        let target = if k == i { -1.0 } else { 0.0 };
                        (row[k] / norm - target).abs() <= 1e-14
                    })
            });
            if !already {
                let mut e = DVector::zeros(n);
                e[i] = -1.0;
                domain.push_ineq(&e, 0.0);
            }
        }
        if domain.is_empty()? {
            return Err(Error::EmptyDomain);
        }
        Ok(Self { n, pieces, domain })
    }

    pub fn indicator(domain: Polyhedron) -> Result<Self> {
        Self::new(Vec::new(), domain)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn pieces(&self) -> &[(DVector<f64>, f64)] {
        &self.pieces
    }

    pub fn domain(&self) -> &Polyhedron {
        &self.domain
    }

    /// True when `g` is the indicator of its domain.
    pub fn is_indicator(&self) -> bool {
        self.pieces.is_empty()
    }

    pub fn scaled(&self, t: f64) -> Self {
        Self {
            n: self.n,
            pieces: self.pieces.iter().map(|(a, b)| (a * t, b * t)).collect(),
            domain: self.domain.clone(),
        }
    }

    /// Value of the largest piece, ignoring the domain.
    pub fn max_piece(&self, x: &DVector<f64>) -> f64 {
        if self.pieces.is_empty() {
            return 0.0;
        }
        self.pieces
            .iter()
            .map(|(a, b)| a.dot(x) + b)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Subdifferential of `g` at a point together with an activity warning.
#[derive(Debug, Clone)]
pub struct Subdifferential {
    pub set: GeneratorSet,
    /// Some piece gap or row slack lies in `(tol_active, 10·tol_active]`, so
    /// the active set (and hence the returned set) is sensitive to the
    /// tolerance.
    pub near_degenerate: bool,
}

/// `g(x)`, `+∞` outside the domain (tolerance [`FEAS_TOL`]).
pub fn g_eval(g: &PolyhedralFunction, x: &DVector<f64>) -> ExtReal {
    g_eval_tol(g, x, FEAS_TOL)
}

pub fn g_eval_tol(g: &PolyhedralFunction, x: &DVector<f64>, tol: f64) -> ExtReal {
    if x.len() != g.n || !g.domain.contains(x, tol) {
        return ExtReal::PosInf;
    }
    ExtReal::Finite(g.max_piece(x))
}

/// `∂g(x) = conv{a_j : j active} + cone{active row normals} + span{equality normals}`.
pub fn g_subdiff(g: &PolyhedralFunction, x: &DVector<f64>, tol_active: f64) -> Result<Subdifferential> {
    if x.len() != g.n {
        return Err(Error::dims("point length differs from g's dimension"));
    }
    let violation = g.domain.max_violation(x);
    if violation > FEAS_TOL {
        return Err(Error::OutOfDomain { violation });
    }
    let near = |gap: f64| gap > tol_active && gap <= 10.0 * tol_active;
    let mut near_degenerate = false;

    let points = if g.pieces.is_empty() {
        vec![DVector::zeros(g.n)]
    } else {
        let vals: Vec<f64> = g.pieces.iter().map(|(a, b)| a.dot(x) + b).collect();
        let top = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut pts = Vec::new();
        for (j, v) in vals.iter().enumerate() {
            let gap = top - v;
            near_degenerate |= near(gap);
            if gap <= tol_active {
                pts.push(g.pieces[j].0.clone());
            }
        }
        pts
    };
    let slacks = g.domain.ineq_slacks(x);
    let mut rays = Vec::new();
    for (i, s) in slacks.iter().enumerate() {
        near_degenerate |= near(*s);
        if *s <= tol_active {
            rays.push(g.domain.ineq_row(i));
        }
    }
    let lines = (0..g.domain.n_eq()).map(|i| g.domain.eq_row(i)).collect();
    Ok(Subdifferential {
        set: GeneratorSet::new(g.n, points, rays, lines)?,
        near_degenerate,
    })
}

/// `phi = f + g` with matching dimensions.
#[derive(Debug, Clone)]
pub struct CompositeProblem<F = SmoothQuadratic> {
    pub f: F,
    pub g: PolyhedralFunction,
}

impl<F: SmoothFunction> CompositeProblem<F> {
    pub fn new(f: F, g: PolyhedralFunction) -> Result<Self> {
        if f.dim() != g.dim() {
            return Err(Error::dims(format!(
                "f has dimension {} but g has dimension {}",
                f.dim(),
                g.dim()
            )));
        }
        Ok(Self { f, g })
    }

    pub fn dim(&self) -> usize {
        self.g.dim()
    }

    /// `phi(x) = f(x) + g(x)`.
    pub fn eval(&self, x: &DVector<f64>) -> ExtReal {
        g_eval(&self.g, x) + self.f.value(x)
    }
}

/// `∂phi(x) = ∇f(x) + ∂g(x)`.
pub fn phi_subdiff<F: SmoothFunction>(p: &CompositeProblem<F>, x: &DVector<f64>) -> Result<GeneratorSet> {
    let sub = g_subdiff(&p.g, x, TOL_ACTIVE)?;
    Ok(sub.set.translate(&p.f.gradient(x)))
}

/// `dist(0, ∂phi(x))`.
pub fn phi_residual<F: SmoothFunction>(p: &CompositeProblem<F>, x: &DVector<f64>) -> Result<f64> {
    let set = phi_subdiff(p, x)?;
    let n = p.dim();
    Ok(min_norm_weighted(&set, &DVector::zeros(n), &DVector::from_element(n, 1.0))?.value)
}
