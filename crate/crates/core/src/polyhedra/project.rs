//! Euclidean projection onto an H-polyhedron by a primal active-set method.

use nalgebra::{DMatrix, DVector};

use super::polyhedron::Polyhedron;
use crate::error::{Error, Result};

/// Solves `min ½‖A_W^T μ‖² - <μ, A_W x - b_W>` and returns `μ`; the projection
/// onto `{A_W z = b_W}` is then `x - A_W^T μ`.
fn affine_multipliers(aw: &DMatrix<f64>, bw: &DVector<f64>, x: &DVector<f64>) -> DVector<f64> {
    let gram = aw * aw.transpose();
    let rhs = aw * x - bw;
    match gram.clone().cholesky() {
        Some(ch) => ch.solve(&rhs),
        None => gram
            .svd(true, true)
            .solve(&rhs, 1e-12)
            .unwrap_or_else(|_| DVector::zeros(rhs.len())),
    }
}

fn independent_rows(a: &DMatrix<f64>) -> Vec<usize> {
    let mut chosen: Vec<usize> = Vec::new();
    for i in 0..a.nrows() {
        let mut trial = chosen.clone();
        trial.push(i);
        let sub = a.select_rows(trial.iter());
        if sub.rank(1e-10 * (1.0 + sub.amax())) == trial.len() {
            chosen = trial;
        }
    }
    chosen
}

/// `argmin_{z ∈ P} ‖z - x‖`.
pub fn project_onto_polyhedron(p: &Polyhedron, x: &DVector<f64>) -> Result<DVector<f64>> {
    if x.len() != p.dim() {
        return Err(Error::dims("point length differs from polyhedron dimension"));
    }
    // Fast path: already feasible.
    if p.max_violation(x) == 0.0 {
        return Ok(x.clone());
    }
    let mut z = p.feasible_point()?.ok_or(Error::InfeasiblePolyhedron)?;
    let eq_rows = independent_rows(p.a_eq());
    let mut active: Vec<usize> = Vec::new();
    let cap = 100 + 20 * (p.n_ineq() + p.dim());
    let scale = 1.0 + x.amax();

    for _ in 0..cap {
        let mut idx_rows: Vec<DVector<f64>> = eq_rows.iter().map(|&i| p.eq_row(i)).collect();
        let mut rhs: Vec<f64> = eq_rows.iter().map(|&i| p.b_eq()[i]).collect();
        for &i in &active {
            idx_rows.push(p.ineq_row(i));
            rhs.push(p.b_ineq()[i]);
        }
        let (target, mu) = if idx_rows.is_empty() {
            (x.clone(), DVector::zeros(0))
        } else {
            let mut aw = DMatrix::zeros(idx_rows.len(), p.dim());
            for (r, row) in idx_rows.iter().enumerate() {
                aw.set_row(r, &row.transpose());
            }
            let bw = DVector::from_vec(rhs);
            let mu = affine_multipliers(&aw, &bw, x);
            (x - aw.transpose() * &mu, mu)
        };
        let step = &target - &z;
        if step.norm() <= 1e-13 * scale {
            z = target;
            let ineq_mu = mu.rows(eq_rows.len(), active.len());
            let most_negative = ineq_mu
                .iter()
                .enumerate()
                .filter(|(_, m)| **m < -1e-12 * scale)
                .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                .map(|(k, _)| k);
            match most_negative {
                None => return Ok(z),
                Some(k) => {
                    active.remove(k);
                }
            }
            continue;
        }
        let slacks = p.ineq_slacks(&z);
        let mut alpha = 1.0f64;
        let mut blocking: Option<usize> = None;
        for i in 0..p.n_ineq() {
            if active.contains(&i) {
                continue;
            }
            let ap = p.ineq_row(i).dot(&step);
            if ap > 1e-14 * step.norm() {
                let a = slacks[i].max(0.0) / ap;
                if a < alpha {
                    alpha = a;
                    blocking = Some(i);
                }
            }
        }
        z += step * alpha;
        if let Some(i) = blocking {
            active.push(i);
        }
    }
    Err(Error::NumericalFailure(format!(
        "projection active set exceeded {cap} iterations"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(xs: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(xs)
    }

    #[test]
    fn orthant_clamps() {
        let z = project_onto_polyhedron(&Polyhedron::orthant(2), &v(&[-1.0, 2.0])).unwrap();
        assert!((z - v(&[0.0, 2.0])).norm() < 1e-12);
    }

    #[test]
    fn hyperplane() {
        let mut p = Polyhedron::full(2);
        p.push_eq(&v(&[1.0, 1.0]), 2.0);
        let z = project_onto_polyhedron(&p, &v(&[0.0, 0.0])).unwrap();
        assert!((z.clone() - v(&[1.0, 1.0])).norm() < 1e-12);
        assert!((z.norm() - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn simplex_corner() {
        let z = project_onto_polyhedron(&Polyhedron::unit_simplex(3), &v(&[5.0, -1.0, -1.0])).unwrap();
        assert!((z - v(&[1.0, 0.0, 0.0])).norm() < 1e-12);
    }

    #[test]
    fn empty_polyhedron_is_reported() {
        let mut p = Polyhedron::orthant(1);
        p.push_ineq(&v(&[1.0]), -1.0);
        assert!(matches!(
            project_onto_polyhedron(&p, &v(&[0.0])),
            Err(Error::InfeasiblePolyhedron)
        ));
    }
}
