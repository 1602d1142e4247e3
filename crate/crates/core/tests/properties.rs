use nalgebra::DVector;
use proptest::prelude::*;
use sqlift::ext::ExtReal;
use sqlift::kl_lab::{predict_exponent, ExponentInputs};
use sqlift::oracles::instances::{random_lp, random_nonsmooth, InstanceKind, InstanceShape};
use sqlift::oracles::{fd_second_subderivative, grid_min_norm, lifted_retraction, subgradient_inequality_check, OracleConfig};
use sqlift::polyfunc::{g_eval, g_subdiff, phi_residual, SmoothFunction, TOL_ACTIVE};
use sqlift::polyhedra::{lp_solve, min_norm_weighted, project_onto_polyhedron, ri_margin, vrep_membership, vrep_ri_membership, vrep_support, LpStatus};
use sqlift::reparam::{lift_eval, lifted_residual, square, support_set, TOL_SUPPORT};
use sqlift::second_order::{d2_lifted_g, stationarity_multiplier};
use sqlift::{CompositeProblem, Error};

fn kind(k: u8) -> InstanceKind {
    [InstanceKind::Stationary, InstanceKind::LiftedOnly, InstanceKind::Generic][k as usize % 3]
}

fn shape() -> InstanceShape {
    InstanceShape {
        max_n: 5,
        ..Default::default()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn lp_is_deterministic_with_zero_duality_gap(seed in any::<u64>()) {
        let (p, c) = random_lp(seed);
        let a = p.maximize(&c).unwrap();
        let b = p.maximize(&c).unwrap();
        prop_assert_eq!(a.status, LpStatus::Optimal);
        prop_assert_eq!(&a.witness, &b.witness);
        prop_assert!(a.duality_gap().unwrap() <= 1e-9 * (1.0 + a.value.to_f64().abs()));
        prop_assert!(p.contains(a.witness.as_ref().unwrap(), 1e-9));
    }

    #[test]
    fn projection_is_idempotent_and_optimal(seed in any::<u64>(), z in prop::collection::vec(-3.0..3.0f64, 6)) {
        let (p, c) = random_lp(seed);
        let z = DVector::from_iterator(p.dim(), z.into_iter().take(p.dim()));
        let proj = project_onto_polyhedron(&p, &z).unwrap();
        prop_assert!(p.contains(&proj, 1e-9));
        let again = project_onto_polyhedron(&p, &proj).unwrap();
        prop_assert!((&again - &proj).amax() <= 1e-9);
        // Variational inequality against a vertex of P.
        let vertex = lp_solve(&{
            let mut lp = sqlift::polyhedra::LinearProgram::new(p.dim()).maximize(c);
            for i in 0..p.n_ineq() { lp.add_le(p.ineq_row(i), p.b_ineq()[i]); }
            lp
        }).unwrap().witness.unwrap();
        prop_assert!((&z - &proj).dot(&(&vertex - &proj)) <= 1e-8 * (1.0 + z.norm()));
    }

    #[test]
    fn grid_oracle_is_monotone_under_refinement(seed in any::<u64>()) {
        let inst = random_nonsmooth(seed, InstanceShape::default(), InstanceKind::Generic).unwrap();
        let sub = g_subdiff(&inst.problem.g, &inst.x, TOL_ACTIVE).unwrap().set;
        let grad = inst.problem.f.gradient(&inst.x);
        let coarse = OracleConfig { resolution: 8, ..Default::default() };
        let fine = OracleConfig { resolution: 16, ..Default::default() };
        let a = grid_min_norm(&sub, &grad, &inst.y.abs(), &coarse).unwrap().value;
        let b = grid_min_norm(&sub, &grad, &inst.y.abs(), &fine).unwrap().value;
        let qp = min_norm_weighted(&sub, &grad, &inst.y.abs()).unwrap().value;
        prop_assert!(b <= a + 1e-12);
        prop_assert!(qp <= b + 1e-9);
    }

    #[test]
    fn ri_membership_implies_membership(seed in any::<u64>(), pick in prop::collection::vec(0.0..1.0f64, 8)) {
        let inst = random_nonsmooth(seed, shape(), InstanceKind::Generic).unwrap();
        let set = g_subdiff(&inst.problem.g, &inst.x, TOL_ACTIVE).unwrap().set;
        let n = set.dim();
        let mut z = DVector::zeros(n);
        let total: f64 = pick.iter().take(set.points().len()).sum::<f64>().max(1e-9);
        for (p, w) in set.points().iter().zip(&pick) {
            z += p * (w / total);
        }
        for (r, w) in set.rays().iter().zip(pick.iter().rev()) {
            z += r * *w;
        }
        if vrep_ri_membership(&set, &z).unwrap() {
            prop_assert!(vrep_membership(&set, &z, 1e-9).unwrap());
        }
        prop_assert!(ri_margin(&set, &z).unwrap().is_some());
    }

    #[test]
    fn support_function_is_positively_homogeneous(seed in any::<u64>(), t in 0.1..10.0f64, w in prop::collection::vec(-1.0..1.0f64, 5)) {
        let inst = random_nonsmooth(seed, shape(), InstanceKind::Generic).unwrap();
        let set = g_subdiff(&inst.problem.g, &inst.x, TOL_ACTIVE).unwrap().set;
        let w = DVector::from_iterator(set.dim(), w.into_iter().take(set.dim()));
        let a = vrep_support(&set, &w).unwrap();
        let b = vrep_support(&set, &(&w * t)).unwrap();
        match (a, b) {
            (ExtReal::Finite(a), ExtReal::Finite(b)) => prop_assert!((b - t * a).abs() <= 1e-9 * (1.0 + b.abs())),
            (a, b) => prop_assert_eq!(a, b),
        }
    }

    #[test]
    fn lifted_residual_is_sign_blind(seed in any::<u64>(), flips in prop::collection::vec(any::<bool>(), 5)) {
        let inst = random_nonsmooth(seed, shape(), kind(seed as u8)).unwrap();
        let flipped = DVector::from_fn(inst.y.len(), |i, _| if flips[i] { -inst.y[i] } else { inst.y[i] });
        let a = lifted_residual(&inst.problem, &inst.y).unwrap().value;
        let b = lifted_residual(&inst.problem, &flipped).unwrap().value;
        prop_assert!((a - b).abs() <= 1e-12);
        prop_assert_eq!(lift_eval(&inst.problem, &inst.y), lift_eval(&inst.problem, &flipped));
    }

    #[test]
    fn residual_witness_reproduces_residual(seed in any::<u64>()) {
        let inst = random_nonsmooth(seed, shape(), kind(seed as u8)).unwrap();
        let res = lifted_residual(&inst.problem, &inst.y).unwrap();
        let grad = inst.problem.f.gradient(&inst.x);
        let again = 2.0 * inst.y.component_mul(&(grad + &res.witness)).norm();
        prop_assert!((again - res.value).abs() <= 1e-12 * (1.0 + res.value));
    }

    #[test]
    fn multiplier_exists_iff_residual_vanishes(seed in any::<u64>()) {
        let inst = random_nonsmooth(seed, shape(), kind(seed as u8)).unwrap();
        let res = lifted_residual(&inst.problem, &inst.y).unwrap().value;
        match stationarity_multiplier(&inst.problem, &inst.y) {
            Ok(m) => {
                prop_assert!(res <= 1e-8);
                let sub = g_subdiff(&inst.problem.g, &inst.x, TOL_ACTIVE).unwrap().set;
                prop_assert!(vrep_membership(&sub, &m.v, 1e-8).unwrap());
                let grad = inst.problem.f.gradient(&inst.x);
                for &i in &support_set(&inst.y, TOL_SUPPORT).active {
                    prop_assert!((m.v[i] + grad[i]).abs() <= 1e-8);
                }
            }
            Err(Error::NotStationary) => prop_assert!(res > 1e-10),
            Err(e) => prop_assert!(false, "{}", e),
        }
    }

    #[test]
    fn second_subderivative_is_quadratic_in_w(seed in any::<u64>(), t in 0.1..5.0f64, w in prop::collection::vec(-1.0..1.0f64, 5)) {
        let inst = random_nonsmooth(seed, shape(), InstanceKind::Stationary).unwrap();
        let m = stationarity_multiplier(&inst.problem, &inst.y).unwrap();
        let w = DVector::from_iterator(inst.y.len(), w.into_iter().take(inst.y.len()));
        let a = d2_lifted_g(&inst.problem.g, &inst.y, &m.v, &w).unwrap();
        let b = d2_lifted_g(&inst.problem.g, &inst.y, &m.v, &(&w * t)).unwrap();
        match (a, b) {
            (ExtReal::Finite(a), ExtReal::Finite(b)) => prop_assert!((b - t * t * a).abs() <= 1e-8 * (1.0 + b.abs())),
            (a, b) => prop_assert_eq!(a, b),
        }
    }

    #[test]
    fn difference_quotients_do_not_undercut_the_formula(seed in any::<u64>(), w in prop::collection::vec(-1.0..1.0f64, 5)) {
        let inst = random_nonsmooth(seed, shape(), InstanceKind::Stationary).unwrap();
        let g = &inst.problem.g;
        let m = stationarity_multiplier(&inst.problem, &inst.y).unwrap();
        let support = support_set(&inst.y, TOL_SUPPORT);
        let mut w = DVector::from_iterator(inst.y.len(), w.into_iter().take(inst.y.len()));
        for &i in &support.active {
            w[i] = 0.0;
        }
        if let ExtReal::Finite(value) = d2_lifted_g(g, &inst.y, &m.v, &w).unwrap() {
            let cfg = OracleConfig { perturbations: 16, t_grid: vec![1e-2, 3e-3, 1e-3], ..Default::default() };
            let retract = lifted_retraction(g, &support);
            let h = |y: &DVector<f64>| g_eval(g, &square(y));
            let fd = fd_second_subderivative(&h, &inst.y, &m.lambda, &w, &cfg, Some(&retract)).unwrap();
            let (_, smallest_t) = fd.per_t.last().copied().unwrap();
            if let ExtReal::Finite(q) = smallest_t {
                prop_assert!(q >= value - 0.05 * (1.0 + value.abs()), "quotient {} below formula {}", q, value);
            }
        }
    }

    #[test]
    fn generated_subgradients_satisfy_the_inequality(seed in any::<u64>()) {
        let inst = random_nonsmooth(seed, shape(), InstanceKind::Generic).unwrap();
        let sub = g_subdiff(&inst.problem.g, &inst.x, TOL_ACTIVE).unwrap().set;
        let cfg = OracleConfig { perturbations: 8, seed, ..Default::default() };
        let base = sub.points()[0].clone();
        for r in sub.rays() {
            prop_assert!(subgradient_inequality_check(&inst.problem.g, &inst.x, &(&base + r * 2.0), &cfg).unwrap());
        }
        for p in sub.points() {
            prop_assert!(subgradient_inequality_check(&inst.problem.g, &inst.x, p, &cfg).unwrap());
        }
    }

    #[test]
    fn phi_residual_scales_linearly(seed in any::<u64>(), t in 0.1..10.0f64) {
        let inst = random_nonsmooth(seed, shape(), InstanceKind::Generic).unwrap();
        let p = &inst.problem;
        let scaled = CompositeProblem::new(p.f.scaled(t), p.g.scaled(t)).unwrap();
        let a = phi_residual(p, &inst.x).unwrap();
        let b = phi_residual(&scaled, &inst.x).unwrap();
        prop_assert!((b - t * a).abs() <= 1e-9 * (1.0 + b));
    }

    #[test]
    fn predictor_is_monotone(a1 in 0.01..0.99f64, a2 in 0.01..0.99f64, g1 in 0.01..1.0f64, g2 in 0.01..1.0f64) {
        let (lo_a, hi_a) = if a1 <= a2 { (a1, a2) } else { (a2, a1) };
        let (lo_g, hi_g) = if g1 <= g2 { (g1, g2) } else { (g2, g1) };
        let p = |alpha, gamma, strict| predict_exponent(ExponentInputs { alpha, gamma, strict }).unwrap();
        for strict in [true, false] {
            prop_assert!(p(lo_a, lo_g, strict) <= p(hi_a, lo_g, strict));
        }
        prop_assert!(p(lo_a, hi_g, false) <= p(lo_a, lo_g, false));
        prop_assert!(p(lo_a, lo_g, false) >= p(lo_a, lo_g, true) - 1e-15);
    }
}

#[test]
fn lp_infeasible_and_unbounded_are_reported() {
    let (p, c) = random_lp(1);
    let mut infeasible = p.clone();
    infeasible.push_ineq(&DVector::from_element(p.dim(), -1.0), -1e6);
    assert_eq!(infeasible.maximize(&c).unwrap().status, LpStatus::Infeasible);
    let unbounded = sqlift::Polyhedron::orthant(p.dim());
    assert_eq!(unbounded.maximize(&DVector::from_element(p.dim(), 1.0)).unwrap().status, LpStatus::Unbounded);
}
