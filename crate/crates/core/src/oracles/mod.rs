//! Brute-force reference implementations.
//!
//! Nothing here shares code paths with the fast kernels beyond dense linear
//! algebra: vertices come from exhaustive basis enumeration, nearest points
//! from coefficient grids, second subderivatives from difference quotients.
//! Inputs beyond desk scale are refused with [`Error::TooLarge`].

pub mod instances;
mod selftest;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::ext::ExtReal;
use crate::polyfunc::{g_eval, PolyhedralFunction};
use crate::polyhedra::{project_onto_polyhedron, GeneratorSet, LpStatus, Polyhedron};
use crate::reparam::SupportSet;
use crate::second_order::normal_vec;

pub use selftest::{selftest, SelftestCase, SelftestReport};

#[derive(Debug, Clone)]
pub struct OracleConfig {
    /// Grid points per unit of the simplex coordinates (and per box length).
    pub resolution: usize,
    /// Ray coefficients range over `[0, coef_bound]`, line coefficients are solved exactly.
    pub coef_bound: f64,
    /// Step lengths for difference quotients, largest first.
    pub t_grid: Vec<f64>,
    /// Random perturbations per step length / random points per check.
    pub perturbations: usize,
    /// Difference quotients above this count as divergent.
    pub divergence: f64,
    pub seed: u64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            resolution: 16,
            coef_bound: 4.0,
            t_grid: vec![1e-1, 3e-2, 1e-2, 3e-3, 1e-3],
            perturbations: 64,
            divergence: 1e6,
            seed: 0,
        }
    }
}

impl OracleConfig {
    pub fn validate(&self) -> Result<()> {
        if self.resolution < 8 {
            return Err(Error::InvalidRange("oracle resolution must be at least 8".into()));
        }
        if !(self.coef_bound.is_finite() && self.coef_bound > 0.0) {
            return Err(Error::InvalidRange("coefficient bound must be finite and positive".into()));
        }
        if self.t_grid.is_empty() || self.t_grid.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
            return Err(Error::InvalidRange("t-grid must be nonempty and positive".into()));
        }
        Ok(())
    }
}

const VERTEX_MAX_DIM: usize = 8;
const VERTEX_MAX_ROWS: usize = 16;

/// All vertices of a bounded polyhedron by trying every `n`-subset of rows.
pub fn enumerate_vertices(p: &Polyhedron) -> Result<Vec<DVector<f64>>> {
    let n = p.dim();
    let rows = p.n_ineq() + p.n_eq();
    if n > VERTEX_MAX_DIM || rows > VERTEX_MAX_ROWS {
        return Err(Error::TooLarge(format!(
            "vertex enumeration needs n <= {VERTEX_MAX_DIM} and rows <= {VERTEX_MAX_ROWS}, got n = {n}, rows = {rows}"
        )));
    }
    if p.is_empty()? {
        return Ok(Vec::new());
    }
    for i in 0..n {
        for sign in [1.0, -1.0] {
            let mut c = DVector::zeros(n);
            c[i] = sign;
            if p.maximize(&c)?.status == LpStatus::Unbounded {
                return Err(Error::UnboundedPolyhedron);
            }
        }
    }
    let mut a = DMatrix::zeros(rows, n);
    let mut b = DVector::zeros(rows);
    for i in 0..p.n_ineq() {
        a.set_row(i, &p.ineq_row(i).transpose());
        b[i] = p.b_ineq()[i];
    }
    for i in 0..p.n_eq() {
        a.set_row(p.n_ineq() + i, &p.eq_row(i).transpose());
        b[p.n_ineq() + i] = p.b_eq()[i];
    }
    let scale = 1.0 + b.amax();
    let mut out: Vec<DVector<f64>> = Vec::new();
    for subset in combinations(rows, n) {
        let mut m = DMatrix::zeros(n, n);
        let mut rhs = DVector::zeros(n);
        for (r, &i) in subset.iter().enumerate() {
            m.set_row(r, &a.row(i));
            rhs[r] = b[i];
        }
        let sv = m.clone().singular_values();
        if sv.min() <= 1e-10 * sv.max().max(1e-300) {
            continue;
        }
        let Some(z) = m.lu().solve(&rhs) else { continue };
        if !p.contains(&z, 1e-9 * scale) {
            continue;
        }
        if out.iter().all(|v| (v - &z).amax() > 1e-9 * scale) {
            out.push(z);
        }
    }
    Ok(out)
}

fn combinations(m: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if k > m {
        return out;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        out.push(idx.clone());
        let Some(pos) = (0..k).rev().find(|&i| idx[i] != i + m - k) else {
            return out;
        };
        idx[pos] += 1;
        for j in pos + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// All compositions of `total` into `parts` nonnegative integers.
fn compositions(total: usize, parts: usize) -> Vec<Vec<usize>> {
    if parts == 0 {
        return if total == 0 { vec![Vec::new()] } else { Vec::new() };
    }
    if parts == 1 {
        return vec![vec![total]];
    }
    let mut out = Vec::new();
    for first in 0..=total {
        for mut rest in compositions(total - first, parts - 1) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

#[derive(Debug, Clone)]
pub struct GridMinNorm {
    /// Smallest grid value; an upper bound on the true minimum.
    pub value: f64,
    /// `2 · step · sqrt(#coordinates) · ‖W [points | rays]‖_F`: the true
    /// minimum is at least `value - tolerance` whenever the optimal ray
    /// coefficients lie in the box.
    pub tolerance: f64,
    pub step: f64,
}

const GRID_MAX_POINTS: usize = 4;
const GRID_MAX_RAYS: usize = 3;
const GRID_MAX_LINES: usize = 2;

/// `min ‖w ∘ (z + shift)‖` over `z ∈ set` by exhaustive search over
/// simplex × box coefficient grids; line coefficients are eliminated by an
/// exact orthogonal projection.
pub fn grid_min_norm(set: &GeneratorSet, shift: &DVector<f64>, weights: &DVector<f64>, cfg: &OracleConfig) -> Result<GridMinNorm> {
    cfg.validate()?;
    let n = set.dim();
    if shift.len() != n || weights.len() != n {
        return Err(Error::dims("shift and weights must match the set dimension"));
    }
    if set.is_empty() {
        return Err(Error::EmptySet);
    }
    let (k, r, l) = (set.points().len(), set.rays().len(), set.lines().len());
    if k > GRID_MAX_POINTS || r > GRID_MAX_RAYS || l > GRID_MAX_LINES {
        return Err(Error::TooLarge(format!(
            "grid oracle takes <= {GRID_MAX_POINTS} points, <= {GRID_MAX_RAYS} rays, <= {GRID_MAX_LINES} lines; got {k}, {r}, {l}"
        )));
    }
    let res = cfg.resolution;
    let wmat = DMatrix::from_diagonal(weights);
    let wp: Vec<DVector<f64>> = set.points().iter().map(|p| &wmat * p).collect();
    let wr: Vec<DVector<f64>> = set.rays().iter().map(|p| &wmat * p).collect();
    let ws = &wmat * shift;

    // Residual after the best line combination: (I - P) applied to the vector.
    let complement = if l == 0 {
        DMatrix::identity(n, n)
    } else {
        let mut lm = DMatrix::zeros(n, l);
        for (j, line) in set.lines().iter().enumerate() {
            lm.set_column(j, &(&wmat * line));
        }
        let pinv = lm
            .clone()
            .pseudo_inverse(1e-12)
            .map_err(|e| Error::NumericalFailure(e.to_string()))?;
        DMatrix::identity(n, n) - &lm * pinv
    };
    let wp: Vec<DVector<f64>> = wp.iter().map(|v| &complement * v).collect();
    let wr: Vec<DVector<f64>> = wr.iter().map(|v| &complement * v).collect();
    let ws = &complement * ws;

    let simplex_pts: Vec<DVector<f64>> = compositions(res, k)
        .into_iter()
        .map(|c| {
            let mut z = ws.clone();
            for (j, &cj) in c.iter().enumerate() {
                z += &wp[j] * (cj as f64 / res as f64);
            }
            z
        })
        .collect();
    let h_box = cfg.coef_bound / res as f64;
    let ray_offsets: Vec<DVector<f64>> = box_grid(res, r)
        .into_iter()
        .map(|c| {
            let mut z = DVector::zeros(n);
            for (j, &cj) in c.iter().enumerate() {
                z += &wr[j] * (cj as f64 * h_box);
            }
            z
        })
        .collect();
    let mut best = f64::INFINITY;
    for s in &simplex_pts {
        for o in &ray_offsets {
            let v = (s + o).norm_squared();
            if v < best {
                best = v;
            }
        }
    }
    let mut gmat = DMatrix::zeros(n, k + r);
    for (j, v) in wp.iter().chain(wr.iter()).enumerate() {
        gmat.set_column(j, v);
    }
    let step = (1.0 / res as f64).max(h_box);
    Ok(GridMinNorm {
        value: best.sqrt(),
        tolerance: 2.0 * step * ((k + r) as f64).sqrt() * gmat.norm(),
        step,
    })
}

fn box_grid(res: usize, dims: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for _ in 0..dims {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                (0..=res).map(move |c| {
                    let mut v = prefix.clone();
                    v.push(c);
                    v
                })
            })
            .collect();
    }
    out
}

#[derive(Debug, Clone)]
pub struct FdEstimate {
    /// Smallest quotient at the smallest step with a feasible arc, or `+∞`.
    pub value: ExtReal,
    /// Smallest quotient per step length.
    pub per_t: Vec<(f64, ExtReal)>,
}

/// Difference-quotient estimate of `d²H(ȳ|λ)(w)`:
///
/// ```text
/// min over w̃ near w of [H(ȳ + t w̃) - H(ȳ) - t<λ, w̃>] / (½ t²)
/// ```
///
/// for each `t` in the grid. `w̃` ranges over `w` plus random perturbations of
/// size `O(t)`. An optional `retract` maps a trial point to a nearby point of
/// `dom H` (or `None`), which lets curved domains such as circles be probed;
/// without it a domain of measure zero yields `+∞`.
pub fn fd_second_subderivative(
    h: &dyn Fn(&DVector<f64>) -> ExtReal,
    ybar: &DVector<f64>,
    lambda: &DVector<f64>,
    w: &DVector<f64>,
    cfg: &OracleConfig,
    retract: Option<&dyn Fn(&DVector<f64>) -> Option<DVector<f64>>>,
) -> Result<FdEstimate> {
    cfg.validate()?;
    let n = ybar.len();
    if lambda.len() != n || w.len() != n {
        return Err(Error::dims("ȳ, λ and w must have equal length"));
    }
    let base = match h(ybar) {
        ExtReal::Finite(v) => v,
        _ => {
            return Ok(FdEstimate {
                value: ExtReal::PosInf,
                per_t: Vec::new(),
            })
        }
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut ts = cfg.t_grid.clone();
    ts.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut per_t = Vec::with_capacity(ts.len());
    for &t in &ts {
        let radius = 2.0 * t * (1.0 + w.norm());
        let mut best = ExtReal::PosInf;
        for s in 0..=cfg.perturbations {
            let mut wt = w.clone();
            if s > 0 {
                let xi = normal_vec(&mut rng, n);
                let norm = xi.norm();
                if norm > 0.0 {
                    wt += xi * (radius * rng.gen::<f64>() / norm);
                }
            }
            let mut trial = ybar + &wt * t;
            if let Some(map) = retract {
                match map(&trial) {
                    Some(z) => trial = z,
                    None => continue,
                }
                wt = (&trial - ybar) / t;
                if (&wt - w).norm() > radius.max(t.sqrt() * (1.0 + w.norm())) {
                    continue;
                }
            }
            if let ExtReal::Finite(val) = h(&trial) {
                let q = (val - base - t * lambda.dot(&wt)) / (0.5 * t * t);
                if q <= cfg.divergence && ExtReal::Finite(q) < best {
                    best = ExtReal::Finite(q);
                }
            }
        }
        per_t.push((t, best));
    }
    let value = per_t.last().map(|&(_, v)| v).unwrap_or(ExtReal::PosInf);
    Ok(FdEstimate { value, per_t })
}

/// Retraction onto `{y : y∘y ∈ dom g}` that keeps `y_i` for `i` outside
/// `support`: `x_I` is replaced by its projection onto the slice of `dom g`
/// with `x_{I^c}` fixed, and square roots keep the signs of `y`.
pub fn lifted_retraction<'a>(g: &'a PolyhedralFunction, support: &'a SupportSet) -> impl Fn(&DVector<f64>) -> Option<DVector<f64>> + 'a {
    move |y: &DVector<f64>| {
        let n = y.len();
        let x = y.component_mul(y);
        let mut slice = g.domain().clone();
        for &i in &support.inactive {
            let mut e = DVector::zeros(n);
            e[i] = 1.0;
            slice.push_eq(&e, x[i]);
        }
        let x = project_onto_polyhedron(&slice, &x).ok()?;
        Some(DVector::from_fn(n, |i, _| {
            if support.inactive.contains(&i) {
                return y[i];
            }
            let r = x[i].max(0.0).sqrt();
            if y[i] < 0.0 {
                -r
            } else {
                r
            }
        }))
    }
}

/// Checks `g(z) >= g(x) + <v, z - x>` on projected random points at several
/// scales and on projected coordinate steps.
pub fn subgradient_inequality_check(g: &PolyhedralFunction, x: &DVector<f64>, v: &DVector<f64>, cfg: &OracleConfig) -> Result<bool> {
    let n = g.dim();
    if x.len() != n || v.len() != n {
        return Err(Error::dims("x and v must match g's dimension"));
    }
    let gx = match g_eval(g, x) {
        ExtReal::Finite(val) => val,
        _ => return Err(Error::OutOfDomain { violation: g.domain().max_violation(x) }),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut trials: Vec<DVector<f64>> = Vec::new();
    for scale in [1e-3, 1e-1, 0.5, 2.0] {
        for i in 0..n {
            for sign in [1.0, -1.0] {
                let mut z = x.clone();
                z[i] += sign * scale;
                trials.push(z);
            }
        }
        for _ in 0..cfg.perturbations {
            trials.push(x + normal_vec(&mut rng, n) * scale);
        }
    }
    for z in trials {
        let z = project_onto_polyhedron(g.domain(), &z)?;
        if let ExtReal::Finite(gz) = g_eval(g, &z) {
            let d = &z - x;
            let rhs = gx + v.dot(&d);
            if gz < rhs - 1e-9 * (1.0 + gx.abs() + v.norm() * d.norm()) {
                return Ok(false);
            }
        }
    }
    Ok(true)
}
