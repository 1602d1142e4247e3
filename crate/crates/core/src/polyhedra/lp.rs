//! Dense two-phase primal simplex with Bland's anti-cycling rule.
//!
//! Problems are stated as
//!
//! ```text
//! maximize    <c, z>
//! subject to  lower <= z <= upper
//!             A_eq z  = b_eq
//!             A_ineq z <= b_ineq
//! ```
//!
//! and converted to standard form `A s = b, s >= 0` by shifting, reflecting
//! or splitting each variable according to its bounds. Sizes are tiny (tens of
//! columns), so the full tableau is kept and pivoted in place.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::ext::ExtReal;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone)]
pub struct LpOutcome {
    pub status: LpStatus,
    /// Optimal value; `-inf` when infeasible, `+inf` when unbounded.
    pub value: ExtReal,
    /// Present iff `status == Optimal`.
    pub witness: Option<DVector<f64>>,
    /// Dual objective reconstructed from the final basis (Optimal only).
    pub dual_value: Option<f64>,
}

impl LpOutcome {
    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }

    pub fn duality_gap(&self) -> Option<f64> {
        match (self.value, self.dual_value) {
            (ExtReal::Finite(p), Some(d)) => Some((p - d).abs()),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct LpOptions {
    /// Phase-one objective threshold (scaled by the right-hand side) below
    /// which the problem is declared feasible.
    pub feas_tol: f64,
    pub pivot_tol: f64,
    pub cost_tol: f64,
    /// Hard cap on pivots per phase; `None` picks a size-dependent default.
    pub max_pivots: Option<usize>,
}

impl Default for LpOptions {
    fn default() -> Self {
        Self {
            feas_tol: crate::FEAS_TOL,
            pivot_tol: 1e-11,
            cost_tol: 1e-11,
            max_pivots: None,
        }
    }
}

/// A linear program in the bounded, mixed-constraint form above.
#[derive(Debug, Clone)]
pub struct LinearProgram {
    pub objective: DVector<f64>,
    pub lower: DVector<f64>,
    pub upper: DVector<f64>,
    pub eq: Vec<(DVector<f64>, f64)>,
    pub ineq: Vec<(DVector<f64>, f64)>,
}

impl LinearProgram {
    /// Free variables, zero objective, no constraints.
    pub fn new(n: usize) -> Self {
        Self {
            objective: DVector::zeros(n),
            lower: DVector::from_element(n, f64::NEG_INFINITY),
            upper: DVector::from_element(n, f64::INFINITY),
            eq: Vec::new(),
            ineq: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.objective.len()
    }

    pub fn maximize(mut self, c: DVector<f64>) -> Self {
        self.objective = c;
        self
    }

    pub fn nonnegative(mut self) -> Self {
        self.lower.fill(0.0);
        self
    }

    pub fn with_bounds(mut self, lower: DVector<f64>, upper: DVector<f64>) -> Self {
        self.lower = lower;
        self.upper = upper;
        self
    }

    pub fn set_bounds(&mut self, j: usize, lower: f64, upper: f64) {
        self.lower[j] = lower;
        self.upper[j] = upper;
    }

    pub fn add_eq(&mut self, row: DVector<f64>, rhs: f64) {
        self.eq.push((row, rhs));
    }

    pub fn add_le(&mut self, row: DVector<f64>, rhs: f64) {
        self.ineq.push((row, rhs));
    }

    pub fn add_ge(&mut self, row: DVector<f64>, rhs: f64) {
        self.ineq.push((-row, -rhs));
    }

    /// Largest violation of bounds and rows at `z`.
    pub fn max_violation(&self, z: &DVector<f64>) -> f64 {
        let mut worst = 0.0f64;
        for j in 0..self.dim() {
            worst = worst.max(self.lower[j] - z[j]).max(z[j] - self.upper[j]);
        }
        for (a, b) in &self.eq {
            worst = worst.max((a.dot(z) - b).abs());
        }
        for (a, b) in &self.ineq {
            worst = worst.max(a.dot(z) - b);
        }
        worst
    }

    fn validate(&self) -> Result<()> {
        let n = self.dim();
        if self.lower.len() != n || self.upper.len() != n {
            return Err(Error::dims(format!(
                "bounds have lengths {}/{} for {} variables",
                self.lower.len(),
                self.upper.len(),
                n
            )));
        }
        for (a, b) in self.eq.iter().chain(self.ineq.iter()) {
            if a.len() != n {
                return Err(Error::dims(format!(
                    "constraint row of length {} for {} variables",
                    a.len(),
                    n
                )));
            }
            if !b.is_finite() || a.iter().any(|v| !v.is_finite()) {
                return Err(Error::NumericalFailure("non-finite constraint data".into()));
            }
        }
        if self.objective.iter().any(|v| !v.is_finite()) {
            return Err(Error::NumericalFailure("non-finite objective".into()));
        }
        for j in 0..n {
            if self.lower[j].is_nan() || self.upper[j].is_nan() {
                return Err(Error::NumericalFailure("NaN bound".into()));
            }
        }
        Ok(())
    }
}

/// How an original variable is expressed through standard-form columns.
#[derive(Debug, Clone, Copy)]
enum VarMap {
    /// z = offset + s_k
    Shift { col: usize, offset: f64 },
    /// z = offset - s_k
    Reflect { col: usize, offset: f64 },
    /// z = s_k - s_{k+1}
    Split { col: usize },
}

struct StandardForm {
    a: DMatrix<f64>,
    b: DVector<f64>,
    c: DVector<f64>,
    c_offset: f64,
    maps: Vec<VarMap>,
    /// Row index whose slack column can serve as an initial basic variable.
    slack_basis: Vec<Option<usize>>,
}

fn to_standard_form(lp: &LinearProgram) -> Result<StandardForm> {
    let n = lp.dim();
    let mut maps = Vec::with_capacity(n);
    let mut ncols = 0usize;
    let mut bound_rows: Vec<(usize, f64)> = Vec::new();
    for j in 0..n {
        let (l, u) = (lp.lower[j], lp.upper[j]);
        if l > u {
            // Empty box: encode as an infeasible row on a fresh column.
            maps.push(VarMap::Shift { col: ncols, offset: l });
            bound_rows.push((ncols, u - l));
            ncols += 1;
        } else if l.is_finite() {
            maps.push(VarMap::Shift { col: ncols, offset: l });
            if u.is_finite() {
                bound_rows.push((ncols, u - l));
            }
            ncols += 1;
        } else if u.is_finite() {
            maps.push(VarMap::Reflect { col: ncols, offset: u });
            ncols += 1;
        } else {
            maps.push(VarMap::Split { col: ncols });
            ncols += 2;
        }
    }

    let substitute = |row: &DVector<f64>, rhs: f64| -> (Vec<f64>, f64) {
        let mut out = vec![0.0; ncols];
        let mut r = rhs;
        for (j, m) in maps.iter().enumerate() {
            let aj = row[j];
            match *m {
                VarMap::Shift { col, offset } => {
                    out[col] += aj;
                    r -= aj * offset;
                }
                VarMap::Reflect { col, offset } => {
                    out[col] -= aj;
                    r -= aj * offset;
                }
                VarMap::Split { col } => {
                    out[col] += aj;
                    out[col + 1] -= aj;
                }
            }
        }
        (out, r)
    };

    let mut rows: Vec<(Vec<f64>, f64, bool)> = Vec::new();
    for (a, b) in &lp.eq {
        let (r, rhs) = substitute(a, *b);
        rows.push((r, rhs, false));
    }
    for (a, b) in &lp.ineq {
        let (r, rhs) = substitute(a, *b);
        rows.push((r, rhs, true));
    }
    for &(col, width) in &bound_rows {
        let mut r = vec![0.0; ncols];
        r[col] = 1.0;
        rows.push((r, width, true));
    }

    let nslack = rows.iter().filter(|r| r.2).count();
    let total = ncols + nslack;
    let m = rows.len();
    let mut a = DMatrix::zeros(m, total);
    let mut b = DVector::zeros(m);
    let mut slack_basis = vec![None; m];
    let mut next_slack = ncols;
    for (i, (r, rhs, has_slack)) in rows.into_iter().enumerate() {
        let sign = if rhs < 0.0 { -1.0 } else { 1.0 };
        for (k, v) in r.into_iter().enumerate() {
            a[(i, k)] = sign * v;
        }
        b[i] = sign * rhs;
        if has_slack {
            a[(i, next_slack)] = sign;
            if sign > 0.0 {
                slack_basis[i] = Some(next_slack);
            }
            next_slack += 1;
        }
    }

    let mut c = DVector::zeros(total);
    let mut c_offset = 0.0;
    for (j, m) in maps.iter().enumerate() {
        let cj = lp.objective[j];
        match *m {
            VarMap::Shift { col, offset } => {
                c[col] += cj;
                c_offset += cj * offset;
            }
            VarMap::Reflect { col, offset } => {
                c[col] -= cj;
                c_offset += cj * offset;
            }
            VarMap::Split { col } => {
                c[col] += cj;
                c[col + 1] -= cj;
            }
        }
    }

    Ok(StandardForm {
        a,
        b,
        c,
        c_offset,
        maps,
        slack_basis,
    })
}

struct Tableau {
    /// m × (ncols + 1); last column is the right-hand side.
    t: DMatrix<f64>,
    basis: Vec<usize>,
    /// Columns allowed to enter the basis.
    allowed: Vec<bool>,
}

impl Tableau {
    fn rows(&self) -> usize {
        self.t.nrows()
    }

    fn rhs_col(&self) -> usize {
        self.t.ncols() - 1
    }

    fn pivot(&mut self, row: usize, col: usize) {
        let p = self.t[(row, col)];
        let ncols = self.t.ncols();
        for k in 0..ncols {
            self.t[(row, k)] /= p;
        }
        self.t[(row, col)] = 1.0;
        for i in 0..self.rows() {
            if i == row {
                continue;
            }
            let f = self.t[(i, col)];
            if f != 0.0 {
                for k in 0..ncols {
                    let v = self.t[(row, k)];
                    if v != 0.0 {
                        self.t[(i, k)] -= f * v;
                    }
                }
                self.t[(i, col)] = 0.0;
            }
        }
        self.basis[row] = col;
    }

    /// Reduced costs `c_j - c_B^T B^{-1} A_j` for a maximization objective.
    fn reduced_costs(&self, c: &DVector<f64>) -> DVector<f64> {
        let ncols = self.rhs_col();
        let mut r = DVector::zeros(ncols);
        for j in 0..ncols {
            let mut v = c[j];
            for (i, &bj) in self.basis.iter().enumerate() {
                v -= c[bj] * self.t[(i, j)];
            }
            r[j] = v;
        }
        r
    }

    /// Runs Bland-rule simplex iterations maximizing `c`. Returns `false` on
    /// unboundedness.
    fn optimize(&mut self, c: &DVector<f64>, opts: &LpOptions, cap: usize) -> Result<bool> {
        let cost_scale = 1.0 + c.amax();
        let rhs = self.rhs_col();
        for _ in 0..cap {
            let r = self.reduced_costs(c);
            let entering = (0..rhs).find(|&j| {
                self.allowed[j] && r[j] > opts.cost_tol * cost_scale && !self.basis.contains(&j)
            });
            let Some(col) = entering else {
                return Ok(true);
            };
            let mut best: Option<(usize, f64)> = None;
            for i in 0..self.rows() {
                let aij = self.t[(i, col)];
                if aij > opts.pivot_tol {
                    let ratio = self.t[(i, rhs)].max(0.0) / aij;
                    best = match best {
                        None => Some((i, ratio)),
                        Some((bi, br)) => {
                            let tie = (ratio - br).abs() <= 1e-12 * (1.0 + br.abs());
                            if ratio < br && !tie
                                || tie && self.basis[i] < self.basis[bi]
                            {
                                Some((i, ratio))
                            } else {
                                Some((bi, br))
                            }
                        }
                    };
                }
            }
            match best {
                None => return Ok(false),
                Some((row, _)) => self.pivot(row, col),
            }
        }
        Err(Error::NumericalFailure(format!(
            "simplex exceeded {cap} pivots"
        )))
    }
}

/// Solves `lp` (a maximization) with the two-phase simplex method.
pub fn lp_solve(lp: &LinearProgram) -> Result<LpOutcome> {
    lp_solve_with(lp, &LpOptions::default())
}

pub fn lp_solve_with(lp: &LinearProgram, opts: &LpOptions) -> Result<LpOutcome> {
    lp.validate()?;
    let sf = to_standard_form(lp)?;
    let m = sf.a.nrows();
    let ncols = sf.a.ncols();

    // Artificial columns only for rows without a usable slack.
    let needs_art: Vec<usize> = (0..m).filter(|&i| sf.slack_basis[i].is_none()).collect();
    let nart = needs_art.len();
    let width = ncols + nart;
    let mut t = DMatrix::zeros(m, width + 1);
    t.view_mut((0, 0), (m, ncols)).copy_from(&sf.a);
    for i in 0..m {
        t[(i, width)] = sf.b[i];
    }
    let mut basis = vec![0usize; m];
    for i in 0..m {
        if let Some(s) = sf.slack_basis[i] {
            basis[i] = s;
        }
    }
    for (k, &i) in needs_art.iter().enumerate() {
        t[(i, ncols + k)] = 1.0;
        basis[i] = ncols + k;
    }
    let mut tab = Tableau {
        t,
        basis,
        allowed: vec![true; width],
    };
    let cap = opts
        .max_pivots
        .unwrap_or(200 + 50 * (m + width));

    let b_scale = 1.0 + sf.b.amax();
    if nart > 0 {
        let mut c1 = DVector::zeros(width);
        for k in 0..nart {
            c1[ncols + k] = -1.0;
        }
        tab.optimize(&c1, opts, cap)?;
        let infeas: f64 = tab
            .basis
            .iter()
            .enumerate()
            .filter(|(_, &bj)| bj >= ncols)
            .map(|(i, _)| tab.t[(i, width)].max(0.0))
            .sum();
        if infeas > opts.feas_tol * b_scale {
            return Ok(LpOutcome {
                status: LpStatus::Infeasible,
                value: ExtReal::NegInf,
                witness: None,
                dual_value: None,
            });
        }
        // Drive artificials out of the basis; drop rows that are redundant.
        let mut i = 0;
        while i < tab.rows() {
            if tab.basis[i] >= ncols {
                let col = (0..ncols)
                    .filter(|&j| !tab.basis.contains(&j))
                    .max_by(|&a, &b| {
                        tab.t[(i, a)]
                            .abs()
                            .partial_cmp(&tab.t[(i, b)].abs())
                            .unwrap()
                    })
                    .filter(|&j| tab.t[(i, j)].abs() > 1e-9);
                match col {
                    Some(j) => {
                        tab.pivot(i, j);
                        i += 1;
                    }
                    None => {
                        tab.t = tab.t.clone().remove_row(i);
                        tab.basis.remove(i);
                    }
                }
            } else {
                i += 1;
            }
        }
        for k in 0..nart {
            tab.allowed[ncols + k] = false;
        }
    }

    let mut c2 = DVector::zeros(width);
    c2.rows_mut(0, ncols).copy_from(&sf.c);
    if !tab.optimize(&c2, opts, cap)? {
        return Ok(LpOutcome {
            status: LpStatus::Unbounded,
            value: ExtReal::PosInf,
            witness: None,
            dual_value: None,
        });
    }

    // Re-solve the final basis against the original data for a clean witness.
    let rows_kept = tab.rows();
    let mut s = DVector::zeros(ncols);
    for (i, &bj) in tab.basis.iter().enumerate() {
        if bj < ncols {
            s[bj] = tab.t[(i, width)].max(0.0);
        }
    }
    let kept_rows = kept_row_indices(&sf.a, &sf.b, &tab, ncols);
    let mut dual_value = None;
    if let Some(rows) = kept_rows {
        if rows.len() == rows_kept && tab.basis.iter().all(|&bj| bj < ncols) {
            let mut bmat = DMatrix::zeros(rows_kept, rows_kept);
            let mut brhs = DVector::zeros(rows_kept);
            let mut cb = DVector::zeros(rows_kept);
            for (r, &orig) in rows.iter().enumerate() {
                for (k, &bj) in tab.basis.iter().enumerate() {
                    bmat[(r, k)] = sf.a[(orig, bj)];
                }
                brhs[r] = sf.b[orig];
            }
            for (k, &bj) in tab.basis.iter().enumerate() {
                cb[k] = sf.c[bj];
            }
            let lu = bmat.clone().lu();
            if let Some(xb) = lu.solve(&brhs) {
                let ok = xb.iter().all(|v| *v >= -opts.feas_tol * b_scale);
                if ok {
                    let mut refined = DVector::zeros(ncols);
                    for (k, &bj) in tab.basis.iter().enumerate() {
                        refined[bj] = xb[k].max(0.0);
                    }
                    s = refined;
                }
            }
            if let Some(y) = bmat.transpose().lu().solve(&cb) {
                let mut dv = sf.c_offset;
                for (r, &orig) in rows.iter().enumerate() {
                    dv += sf.b[orig] * y[r];
                }
                dual_value = Some(dv);
            }
        }
    }

    let n = lp.dim();
    let mut z = DVector::zeros(n);
    for (j, m) in sf.maps.iter().enumerate() {
        z[j] = match *m {
            VarMap::Shift { col, offset } => offset + s[col],
            VarMap::Reflect { col, offset } => offset - s[col],
            VarMap::Split { col } => s[col] - s[col + 1],
        };
    }
    let value = lp.objective.dot(&z);
    let scale = 1.0 + z.amax() + lp.eq.iter().chain(lp.ineq.iter()).map(|(_, b)| b.abs()).fold(0.0, f64::max);
    let viol = lp.max_violation(&z);
    if viol > 1e-6 * scale {
        return Err(Error::NumericalFailure(format!(
            "optimal witness violates constraints by {viol:.3e}"
        )));
    }
    Ok(LpOutcome {
        status: LpStatus::Optimal,
        value: ExtReal::Finite(value),
        witness: Some(z),
        dual_value,
    })
}

/// Maps the rows surviving redundancy removal back to standard-form rows by
/// matching the tableau's row space. Rows are removed only in phase one, so we
/// recover them by selecting a maximal independent subset of the basis rows.
fn kept_row_indices(
    a: &DMatrix<f64>,
    _b: &DVector<f64>,
    tab: &Tableau,
    ncols: usize,
) -> Option<Vec<usize>> {
    let m = a.nrows();
    let k = tab.rows();
    if k == m {
        return Some((0..m).collect());
    }
    // Greedy: keep rows of A restricted to the basis columns that increase rank.
    let basis: Vec<usize> = tab.basis.iter().copied().filter(|&b| b < ncols).collect();
    if basis.len() != k {
        return None;
    }
    let mut chosen: Vec<usize> = Vec::new();
    for i in 0..m {
        let mut trial = chosen.clone();
        trial.push(i);
        let mut mat = DMatrix::zeros(trial.len(), k);
        for (r, &ri) in trial.iter().enumerate() {
            for (c, &bj) in basis.iter().enumerate() {
                mat[(r, c)] = a[(ri, bj)];
            }
        }
        if mat.rank(1e-9) == trial.len() {
            chosen = trial;
            if chosen.len() == k {
                break;
            }
        }
    }
    (chosen.len() == k).then_some(chosen)
}
