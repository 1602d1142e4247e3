use nalgebra::{DMatrix, DVector};

use super::lp::{lp_solve, LinearProgram, LpStatus};
use crate::error::{Error, Result};

/// `{z ∈ R^n : A_ineq z <= b_ineq, A_eq z = b_eq}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Polyhedron {
    n: usize,
    a_ineq: DMatrix<f64>,
    b_ineq: DVector<f64>,
    a_eq: DMatrix<f64>,
    b_eq: DVector<f64>,
}

impl Polyhedron {
    pub fn new(
        a_ineq: DMatrix<f64>,
        b_ineq: DVector<f64>,
        a_eq: DMatrix<f64>,
        b_eq: DVector<f64>,
    ) -> Result<Self> {
        let n = a_ineq.ncols();
        if n == 0 {
            return Err(Error::dims("polyhedron dimension must be at least 1"));
        }
        if a_eq.ncols() != n {
            return Err(Error::dims(format!(
                "A_ineq has {n} columns but A_eq has {}",
                a_eq.ncols()
            )));
        }
        if a_ineq.nrows() != b_ineq.len() || a_eq.nrows() != b_eq.len() {
            return Err(Error::dims("row counts of A and b disagree"));
        }
        let finite = a_ineq.iter().chain(b_ineq.iter()).chain(a_eq.iter()).chain(b_eq.iter()).all(|v| v.is_finite());
        if !finite {
            return Err(Error::NumericalFailure("polyhedron data must be finite".into()));
        }
        Ok(Self {
            n,
            a_ineq,
            b_ineq,
            a_eq,
            b_eq,
        })
    }

    /// The whole space `R^n`.
    pub fn full(n: usize) -> Self {
        Self {
            n,
            a_ineq: DMatrix::zeros(0, n),
            b_ineq: DVector::zeros(0),
            a_eq: DMatrix::zeros(0, n),
            b_eq: DVector::zeros(0),
        }
    }

    /// `R^n_+` written as `-z <= 0`.
    pub fn orthant(n: usize) -> Self {
        Self {
            n,
            a_ineq: -DMatrix::identity(n, n),
            b_ineq: DVector::zeros(n),
            a_eq: DMatrix::zeros(0, n),
            b_eq: DVector::zeros(0),
        }
    }

    /// Unit simplex `{z >= 0, sum z = 1}`.
    pub fn unit_simplex(n: usize) -> Self {
        Self {
            n,
            a_ineq: -DMatrix::identity(n, n),
            b_ineq: DVector::zeros(n),
            a_eq: DMatrix::from_element(1, n, 1.0),
            b_eq: DVector::from_element(1, 1.0),
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn a_ineq(&self) -> &DMatrix<f64> {
        &self.a_ineq
    }

    pub fn b_ineq(&self) -> &DVector<f64> {
        &self.b_ineq
    }

    pub fn a_eq(&self) -> &DMatrix<f64> {
        &self.a_eq
    }

    pub fn b_eq(&self) -> &DVector<f64> {
        &self.b_eq
    }

    pub fn n_ineq(&self) -> usize {
        self.a_ineq.nrows()
    }

    pub fn n_eq(&self) -> usize {
        self.a_eq.nrows()
    }

    pub fn ineq_row(&self, i: usize) -> DVector<f64> {
        self.a_ineq.row(i).transpose()
    }

    pub fn eq_row(&self, i: usize) -> DVector<f64> {
        self.a_eq.row(i).transpose()
    }

    /// Appends `a·z <= b`.
    pub fn push_ineq(&mut self, a: &DVector<f64>, b: f64) {
        let m = self.a_ineq.nrows();
        let mut grown = self.a_ineq.clone().insert_row(m, 0.0);
        grown.row_mut(m).copy_from(&a.transpose());
        self.a_ineq = grown;
        self.b_ineq = self.b_ineq.clone().push(b);
    }

    /// Appends `a·z = b`.
    pub fn push_eq(&mut self, a: &DVector<f64>, b: f64) {
        let m = self.a_eq.nrows();
        let mut grown = self.a_eq.clone().insert_row(m, 0.0);
        grown.row_mut(m).copy_from(&a.transpose());
        self.a_eq = grown;
        self.b_eq = self.b_eq.clone().push(b);
    }

    /// Slack `b_i - a_i·z` of every inequality row.
    pub fn ineq_slacks(&self, z: &DVector<f64>) -> DVector<f64> {
        &self.b_ineq - &self.a_ineq * z
    }

    pub fn max_violation(&self, z: &DVector<f64>) -> f64 {
        let mut worst = 0.0f64;
        for s in self.ineq_slacks(z).iter() {
            worst = worst.max(-s);
        }
        for r in (&self.a_eq * z - &self.b_eq).iter() {
            worst = worst.max(r.abs());
        }
        worst
    }

    /// Membership with tolerance `tol` on the largest violation.
    pub fn contains(&self, z: &DVector<f64>, tol: f64) -> bool {
        z.len() == self.n && self.max_violation(z) <= tol
    }

    pub(crate) fn feasibility_lp(&self) -> LinearProgram {
        let mut lp = LinearProgram::new(self.n);
        for i in 0..self.n_ineq() {
            lp.add_le(self.ineq_row(i), self.b_ineq[i]);
        }
        for i in 0..self.n_eq() {
            lp.add_eq(self.eq_row(i), self.b_eq[i]);
        }
        lp
    }

    /// Some point of the polyhedron, or `None` when it is empty.
    pub fn feasible_point(&self) -> Result<Option<DVector<f64>>> {
        let out = lp_solve(&self.feasibility_lp())?;
        Ok(match out.status {
            LpStatus::Optimal => out.witness,
            _ => None,
        })
    }

    pub fn is_empty(&self) -> Result<bool> {
        Ok(self.feasible_point()?.is_none())
    }

    /// Maximizes `c·z` over the polyhedron.
    pub fn maximize(&self, c: &DVector<f64>) -> Result<super::LpOutcome> {
        lp_solve(&self.feasibility_lp().maximize(c.clone()))
    }
}
