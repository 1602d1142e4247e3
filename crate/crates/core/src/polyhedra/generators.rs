use nalgebra::{DMatrix, DVector};

use super::lp::{lp_solve, LinearProgram, LpStatus};
use super::qp::CoefficientLsq;
use crate::error::{Error, Result};
use crate::ext::ExtReal;

/// Strict-positivity threshold of the relative-interior LP.
pub const RI_TOL: f64 = 1e-9;

/// `conv(points) + cone(rays) + span(lines)`.
///
/// Zero rays and lines are dropped at construction. The set is empty iff it
/// has no points.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorSet {
    n: usize,
    points: Vec<DVector<f64>>,
    rays: Vec<DVector<f64>>,
    lines: Vec<DVector<f64>>,
}

impl GeneratorSet {
    pub fn new(
        n: usize,
        points: Vec<DVector<f64>>,
        rays: Vec<DVector<f64>>,
        lines: Vec<DVector<f64>>,
    ) -> Result<Self> {
        if n == 0 {
            return Err(Error::dims("generator set dimension must be at least 1"));
        }
        for g in points.iter().chain(rays.iter()).chain(lines.iter()) {
            if g.len() != n {
                return Err(Error::dims(format!(
                    "generator of length {} in dimension {n}",
                    g.len()
                )));
            }
            if g.iter().any(|v| !v.is_finite()) {
                return Err(Error::NumericalFailure("non-finite generator".into()));
            }
        }
        let nonzero = |v: &DVector<f64>| v.amax() > 0.0;
        Ok(Self {
            n,
            points,
            rays: rays.into_iter().filter(nonzero).collect(),
            lines: lines.into_iter().filter(nonzero).collect(),
        })
    }

    pub fn point(p: DVector<f64>) -> Self {
        let n = p.len();
        Self {
            n,
            points: vec![p],
            rays: Vec::new(),
            lines: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn points(&self) -> &[DVector<f64>] {
        &self.points
    }

    pub fn rays(&self) -> &[DVector<f64>] {
        &self.rays
    }

    pub fn lines(&self) -> &[DVector<f64>] {
        &self.lines
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn is_bounded(&self) -> bool {
        self.rays.is_empty() && self.lines.is_empty()
    }

    /// Number of coefficients `(λ, μ, ν)`.
    pub fn n_coefficients(&self) -> usize {
        self.points.len() + self.rays.len() + self.lines.len()
    }

    /// Columns `[points | rays | lines]`.
    pub fn generator_matrix(&self) -> DMatrix<f64> {
        let cols: Vec<&DVector<f64>> = self
            .points
            .iter()
            .chain(self.rays.iter())
            .chain(self.lines.iter())
            .collect();
        let mut g = DMatrix::zeros(self.n, cols.len());
        for (j, c) in cols.iter().enumerate() {
            g.set_column(j, c);
        }
        g
    }

    /// Element of the set with coefficients `theta` ordered as the columns of
    /// [`Self::generator_matrix`].
    pub fn combine(&self, theta: &DVector<f64>) -> DVector<f64> {
        self.generator_matrix() * theta
    }

    /// Every point moved by `shift`.
    pub fn translate(&self, shift: &DVector<f64>) -> Self {
        Self {
            n: self.n,
            points: self.points.iter().map(|p| p + shift).collect(),
            rays: self.rays.clone(),
            lines: self.lines.clone(),
        }
    }

    pub fn with_extra(
        &self,
        points: Vec<DVector<f64>>,
        rays: Vec<DVector<f64>>,
        lines: Vec<DVector<f64>>,
    ) -> Result<Self> {
        let mut p = self.points.clone();
        p.extend(points);
        let mut r = self.rays.clone();
        r.extend(rays);
        let mut l = self.lines.clone();
        l.extend(lines);
        Self::new(self.n, p, r, l)
    }

    /// Appends the coefficient-space description `θ ∈ Δ × R_+ × R` of the set
    /// to `lp`, with coefficients at columns `offset..offset + k`. Returns the
    /// expression rows `z_i = Σ_j G_ij θ_j` as coefficient vectors of width
    /// `lp.dim()`.
    pub(crate) fn embed(&self, lp: &mut LinearProgram, offset: usize) -> Vec<DVector<f64>> {
        let width = lp.dim();
        let np = self.points.len();
        let nr = self.rays.len();
        let g = self.generator_matrix();
        let mut simplex = DVector::zeros(width);
        for j in 0..np {
            simplex[offset + j] = 1.0;
            lp.set_bounds(offset + j, 0.0, f64::INFINITY);
        }
        for j in 0..nr {
            lp.set_bounds(offset + np + j, 0.0, f64::INFINITY);
        }
        lp.add_eq(simplex, 1.0);
        (0..self.n)
            .map(|i| {
                let mut row = DVector::zeros(width);
                for j in 0..g.ncols() {
                    row[offset + j] = g[(i, j)];
                }
                row
            })
            .collect()
    }
}

/// Result of a weighted nearest-point query.
#[derive(Debug, Clone)]
pub struct MinNorm {
    pub value: f64,
    /// The element `z` of the set attaining `value`.
    pub minimizer: DVector<f64>,
    /// Coefficients of `minimizer` in generator order.
    pub coefficients: DVector<f64>,
    pub kkt_violation: f64,
}

/// `min_{z ∈ S} ‖weights ∘ (shift + z)‖`.
pub fn min_norm_weighted(
    set: &GeneratorSet,
    shift: &DVector<f64>,
    weights: &DVector<f64>,
) -> Result<MinNorm> {
    if set.is_empty() {
        return Err(Error::EmptySet);
    }
    if shift.len() != set.n || weights.len() != set.n {
        return Err(Error::dims("shift/weights length differs from set dimension"));
    }
    if weights.iter().any(|w| *w < 0.0 || !w.is_finite()) {
        return Err(Error::InvalidRange("weights must be finite and nonnegative".into()));
    }
    let g = set.generator_matrix();
    let w = DMatrix::from_diagonal(weights);
    let problem = CoefficientLsq {
        m: &w * &g,
        d: weights.component_mul(shift),
        n_simplex: set.points.len(),
        n_cone: set.rays.len(),
        n_free: set.lines.len(),
    };
    let sol = problem.solve(1e-13)?;
    let minimizer = &g * &sol.theta;
    let value = weights.component_mul(&(shift + &minimizer)).norm();
    Ok(MinNorm {
        value,
        minimizer,
        coefficients: sol.theta,
        kkt_violation: sol.kkt_violation,
    })
}

/// `dist(z, S) <= tol`.
pub fn vrep_membership(set: &GeneratorSet, z: &DVector<f64>, tol: f64) -> Result<bool> {
    let ones = DVector::from_element(set.n, 1.0);
    Ok(min_norm_weighted(set, &(-z), &ones)?.value <= tol)
}

/// `z ∈ ri(S)`, decided by maximizing the smallest coefficient over all
/// representations of `z`.
///
/// For a finite generator list, `z` lies in the relative interior exactly when
/// it admits a representation with every point and ray coefficient strictly
/// positive, redundant generators included.
pub fn vrep_ri_membership(set: &GeneratorSet, z: &DVector<f64>) -> Result<bool> {
    Ok(ri_margin(set, z)?.is_some_and(|t| t > RI_TOL))
}

/// Optimal `t` of the relative-interior LP, `None` if `z ∉ S`.
pub fn ri_margin(set: &GeneratorSet, z: &DVector<f64>) -> Result<Option<f64>> {
    if set.is_empty() {
        return Err(Error::EmptySet);
    }
    if z.len() != set.n {
        return Err(Error::dims("query point length differs from set dimension"));
    }
    let k = set.n_coefficients();
    let t_col = k;
    let mut lp = LinearProgram::new(k + 1);
    let rows = set.embed(&mut lp, 0);
    for (i, row) in rows.into_iter().enumerate() {
        lp.add_eq(row, z[i]);
    }
    lp.set_bounds(t_col, -1.0, 1.0);
    for j in 0..set.points.len() + set.rays.len() {
        let mut row = DVector::zeros(k + 1);
        row[j] = -1.0;
        row[t_col] = 1.0;
        lp.add_le(row, 0.0);
    }
    let mut c = DVector::zeros(k + 1);
    c[t_col] = 1.0;
    let out = lp_solve(&lp.maximize(c))?;
    Ok(match out.status {
        LpStatus::Optimal => out.value.finite(),
        _ => None,
    })
}

/// Support function `σ_S(w) = sup_{z ∈ S} <z, w>`.
pub fn vrep_support(set: &GeneratorSet, w: &DVector<f64>) -> Result<ExtReal> {
    if set.is_empty() {
        return Err(Error::EmptySet);
    }
    if w.len() != set.n {
        return Err(Error::dims("direction length differs from set dimension"));
    }
    let wn = w.norm();
    for r in &set.rays {
        if r.dot(w) > 1e-14 * r.norm() * wn {
            return Ok(ExtReal::PosInf);
        }
    }
    for l in &set.lines {
        if l.dot(w).abs() > 1e-14 * l.norm() * wn {
            return Ok(ExtReal::PosInf);
        }
    }
    let best = set
        .points
        .iter()
        .map(|p| p.dot(w))
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(ExtReal::Finite(best))
}
