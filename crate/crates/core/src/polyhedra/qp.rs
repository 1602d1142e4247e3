//! Active-set solver for the coefficient-space least-squares problem
//!
//! ```text
//! minimize   ½‖M θ + d‖²
//! subject to θ_S on the unit simplex, θ_C >= 0, θ_F free
//! ```
//!
//! where the columns of `M` are ordered `[S | C | F]`. This is the shape of
//! every nearest-point query over `conv(points) + cone(rays) + span(lines)`.
//!
//! The method keeps a passive set of coefficients allowed to move and solves
//! the equality-constrained subproblem on it with an SVD least-squares solve,
//! which tolerates the rank deficiency that redundant generators produce.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct CoefficientLsq {
    pub m: DMatrix<f64>,
    pub d: DVector<f64>,
    pub n_simplex: usize,
    pub n_cone: usize,
    pub n_free: usize,
}

#[derive(Debug, Clone)]
pub struct LsqSolution {
    pub theta: DVector<f64>,
    pub residual: DVector<f64>,
    /// Largest violation of the KKT sign conditions at `theta`.
    pub kkt_violation: f64,
}

impl CoefficientLsq {
    fn k(&self) -> usize {
        self.n_simplex + self.n_cone + self.n_free
    }

    fn is_simplex(&self, j: usize) -> bool {
        j < self.n_simplex
    }

    fn is_bounded(&self, j: usize) -> bool {
        j < self.n_simplex + self.n_cone
    }

    fn residual(&self, theta: &DVector<f64>) -> DVector<f64> {
        &self.m * theta + &self.d
    }

    /// Minimizes on the passive set with every other coefficient fixed at 0.
    fn solve_passive(&self, passive: &[bool], theta: &DVector<f64>) -> DVector<f64> {
        let k = self.k();
        let pivot = (0..self.n_simplex)
            .filter(|&j| passive[j])
            .max_by(|&a, &b| theta[a].partial_cmp(&theta[b]).unwrap());
        let cols: Vec<usize> = (0..k).filter(|&j| passive[j] && Some(j) != pivot).collect();
        let mut rhs = -self.d.clone();
        if let Some(p) = pivot {
            rhs -= self.m.column(p);
        }
        let mut z = DVector::zeros(k);
        if !cols.is_empty() {
            let mut a = DMatrix::zeros(self.m.nrows(), cols.len());
            for (c, &j) in cols.iter().enumerate() {
                let mut col = self.m.column(j).clone_owned();
                if let (true, Some(p)) = (self.is_simplex(j), pivot) {
                    col -= self.m.column(p);
                }
                a.set_column(c, &col);
            }
            let svd = a.svd(true, true);
            let smax = svd.singular_values.amax();
            let eps = 1e-13 * smax.max(1e-300) * (cols.len().max(self.m.nrows()) as f64);
            let sol = svd
                .solve(&rhs, eps)
                .unwrap_or_else(|_| DVector::zeros(cols.len()));
            for (c, &j) in cols.iter().enumerate() {
                z[j] = sol[c];
            }
        }
        if let Some(p) = pivot {
            let others: f64 = (0..self.n_simplex).filter(|&j| j != p).map(|j| z[j]).sum();
            z[p] = 1.0 - others;
        }
        z
    }

    /// Reduced gradients of the bounded coefficients (nonnegative at optimum).
    fn reduced(&self, theta: &DVector<f64>, passive: &[bool]) -> DVector<f64> {
        let g = self.m.transpose() * self.residual(theta);
        let mut eta = 0.0;
        let simplex_passive: Vec<usize> = (0..self.n_simplex).filter(|&j| passive[j]).collect();
        if !simplex_passive.is_empty() {
            eta = -simplex_passive.iter().map(|&j| g[j]).sum::<f64>() / simplex_passive.len() as f64;
        }
        let mut r = g;
        for j in 0..self.n_simplex {
            r[j] += eta;
        }
        r
    }

    fn kkt_scale(&self) -> f64 {
        let mn = self.m.norm();
        1.0 + mn * (mn + self.d.norm())
    }

    pub fn solve(&self, tol: f64) -> Result<LsqSolution> {
        let k = self.k();
        if self.m.ncols() != k || self.m.nrows() != self.d.len() {
            return Err(Error::dims("coefficient least-squares shapes disagree"));
        }
        let mut passive = vec![false; k];
        for j in (self.n_simplex + self.n_cone)..k {
            passive[j] = true;
        }
        let mut theta = DVector::zeros(k);
        if self.n_simplex > 0 {
            let start = (0..self.n_simplex)
                .min_by(|&a, &b| {
                    let ra = (self.m.column(a) + &self.d).norm();
                    let rb = (self.m.column(b) + &self.d).norm();
                    ra.partial_cmp(&rb).unwrap()
                })
                .unwrap();
            passive[start] = true;
            theta[start] = 1.0;
        }
        if self.n_free > 0 || self.n_simplex > 0 {
            let z = self.solve_passive(&passive, &theta);
            // Only free coordinates move; the single simplex weight stays at 1.
            for j in (self.n_simplex + self.n_cone)..k {
                theta[j] = z[j];
            }
        }

        let thresh = tol * self.kkt_scale();
        let mut blocked = vec![false; k];
        let cap = 50 + 10 * k * k;
        for _ in 0..cap {
            let r = self.reduced(&theta, &passive);
            let candidate = (0..self.n_simplex + self.n_cone)
                .filter(|&j| !passive[j] && !blocked[j] && r[j] < -thresh)
                .min_by(|&a, &b| r[a].partial_cmp(&r[b]).unwrap());
            let Some(t) = candidate else {
                let kkt_violation = self.kkt_violation(&theta, &passive);
                let residual = self.residual(&theta);
                return Ok(LsqSolution {
                    theta,
                    residual,
                    kkt_violation,
                });
            };
            passive[t] = true;
            let mut entered = false;
            let mut inner = 0;
            loop {
                inner += 1;
                if inner > 10 * k + 10 {
                    return Err(Error::NumericalFailure(
                        "active-set inner loop did not settle".into(),
                    ));
                }
                let z = self.solve_passive(&passive, &theta);
                let bad: Vec<usize> = (0..self.n_simplex + self.n_cone)
                    .filter(|&j| passive[j] && z[j] <= 0.0)
                    .collect();
                if bad.is_empty() {
                    theta = z;
                    entered = true;
                    break;
                }
                if !entered && bad.contains(&t) && theta[t] == 0.0 {
                    // The new coefficient would leave immediately: no progress.
                    passive[t] = false;
                    blocked[t] = true;
                    break;
                }
                let mut alpha = 1.0f64;
                for &j in &bad {
                    let denom = theta[j] - z[j];
                    if denom > 0.0 {
                        alpha = alpha.min(theta[j] / denom);
                    }
                }
                theta = &theta + (&z - &theta) * alpha;
                entered = true;
                for j in 0..self.n_simplex + self.n_cone {
                    if passive[j] && theta[j] <= 1e-15 {
                        theta[j] = 0.0;
                        passive[j] = false;
                    }
                }
                if (0..self.n_simplex).all(|j| !passive[j]) && self.n_simplex > 0 {
                    let j = (0..self.n_simplex)
                        .max_by(|&a, &b| theta[a].partial_cmp(&theta[b]).unwrap())
                        .unwrap();
                    passive[j] = true;
                }
            }
            if entered {
                blocked.iter_mut().for_each(|b| *b = false);
            }
        }
        Err(Error::NumericalFailure(format!(
            "active-set solver exceeded {cap} iterations"
        )))
    }

    fn kkt_violation(&self, theta: &DVector<f64>, passive: &[bool]) -> f64 {
        let r = self.reduced(theta, passive);
        let mut worst = 0.0f64;
        for j in 0..self.k() {
            if self.is_bounded(j) {
                let v = if theta[j] > 0.0 { r[j].abs() } else { -r[j] };
                worst = worst.max(v);
            } else {
                worst = worst.max(r[j].abs());
            }
        }
        worst / self.kkt_scale()
    }
}
