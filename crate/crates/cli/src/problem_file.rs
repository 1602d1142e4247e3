use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use sqlift::{CompositeProblem, PolyhedralFunction, Polyhedron, SmoothQuadratic};

use crate::error::CliError;

/// On-disk layout. Matrices are arrays of rows.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProblem {
    n: usize,
    f: RawQuadratic,
    g: RawPolyhedral,
    #[serde(default, skip_serializing_if = "Meta::is_empty")]
    meta: Meta,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawQuadratic {
    #[serde(rename = "Q")]
    q_mat: Vec<Vec<f64>>,
    q: Vec<f64>,
    #[serde(default)]
    r: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPiece {
    a: Vec<f64>,
    b: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPolyhedral {
    #[serde(default)]
    pieces: Vec<RawPiece>,
    #[serde(default)]
    domain: RawDomain,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDomain {
    #[serde(rename = "A_ineq", default)]
    a_ineq: Vec<Vec<f64>>,
    #[serde(default)]
    b_ineq: Vec<f64>,
    #[serde(rename = "A_eq", default)]
    a_eq: Vec<Vec<f64>>,
    #[serde(default)]
    b_eq: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Meta {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub known_minimizer: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub known_alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub known_gamma: Option<f64>,
}

impl Meta {
    fn is_empty(&self) -> bool {
        *self == Meta::default()
    }
}

#[derive(Debug, Clone)]
pub struct ProblemFile {
    pub problem: CompositeProblem,
    pub meta: Meta,
}

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Validation(msg.into())
}

fn vector(field: &str, xs: &[f64], n: usize) -> Result<DVector<f64>, CliError> {
    if xs.len() != n {
        return Err(invalid(format!("{field} has length {}, expected {n}", xs.len())));
    }
    Ok(DVector::from_column_slice(xs))
}

fn matrix(field: &str, rows: &[Vec<f64>], ncols: usize) -> Result<DMatrix<f64>, CliError> {
    for (i, row) in rows.iter().enumerate() {
        if row.len() != ncols {
            return Err(invalid(format!("{field} row {i} has {} entries, expected {ncols}", row.len())));
        }
    }
    Ok(DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

fn from_core(field: &str, e: sqlift::Error) -> CliError {
    match e {
        sqlift::Error::EmptyDomain | sqlift::Error::InfeasiblePolyhedron => invalid("empty domain"),
        sqlift::Error::DimensionMismatch(m) | sqlift::Error::NumericalFailure(m) => invalid(format!("{field}: {m}")),
        other => CliError::Core(other),
    }
}

fn validate(raw: RawProblem) -> Result<ProblemFile, CliError> {
    let n = raw.n;
    if n == 0 {
        return Err(invalid("n must be at least 1"));
    }
    if raw.f.q_mat.len() != n {
        return Err(invalid(format!("f.Q has {} rows, expected {n} (Q must be square)", raw.f.q_mat.len())));
    }
    let q_mat = matrix("f.Q", &raw.f.q_mat, n)?;
    let asym = (&q_mat - q_mat.transpose()).amax();
    if asym > 1e-12 * (1.0 + q_mat.amax()) {
        return Err(invalid(format!("f.Q is not symmetric (max asymmetry {asym:.3e})")));
    }
    let f = SmoothQuadratic::new(q_mat, vector("f.q", &raw.f.q, n)?, raw.f.r).map_err(|e| from_core("f", e))?;

    let pieces = raw
        .g
        .pieces
        .iter()
        .enumerate()
        .map(|(k, p)| Ok((vector(&format!("g.pieces[{k}].a"), &p.a, n)?, p.b)))
        .collect::<Result<Vec<_>, CliError>>()?;
    let d = &raw.g.domain;
    let domain = Polyhedron::new(
        matrix("g.domain.A_ineq", &d.a_ineq, n)?,
        vector("g.domain.b_ineq", &d.b_ineq, d.a_ineq.len())?,
        matrix("g.domain.A_eq", &d.a_eq, n)?,
        vector("g.domain.b_eq", &d.b_eq, d.a_eq.len())?,
    )
    .map_err(|e| from_core("g.domain", e))?;
    let g = PolyhedralFunction::new(pieces, domain).map_err(|e| from_core("g", e))?;

    if let Some(x) = &raw.meta.known_minimizer {
        vector("meta.known_minimizer", x, n)?;
    }
    let problem = CompositeProblem::new(f, g).map_err(|e| from_core("problem", e))?;
    Ok(ProblemFile { problem, meta: raw.meta })
}

pub fn parse_problem_str(text: &str) -> Result<ProblemFile, CliError> {
    let raw: RawProblem = serde_json::from_str(text).map_err(|e| CliError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    validate(raw)
}

pub fn parse_problem_file(path: &Path) -> Result<ProblemFile, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_problem_str(&text)
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

/// Serializes the validated problem, including the nonnegativity rows that
/// parsing appended; re-parsing yields the same matrices.
pub fn to_json(file: &ProblemFile) -> String {
    let p = &file.problem;
    let dom = p.g.domain();
    let raw = RawProblem {
        n: p.dim(),
        f: RawQuadratic {
            q_mat: rows(p.f.q()),
            q: p.f.linear_term().iter().copied().collect(),
            r: p.f.constant(),
        },
        g: RawPolyhedral {
            pieces: p
                .g
                .pieces()
                .iter()
                .map(|(a, b)| RawPiece {
                    a: a.iter().copied().collect(),
                    b: *b,
                })
                .collect(),
            domain: RawDomain {
                a_ineq: rows(dom.a_ineq()),
                b_ineq: dom.b_ineq().iter().copied().collect(),
                a_eq: rows(dom.a_eq()),
                b_eq: dom.b_eq().iter().copied().collect(),
            },
        },
        meta: file.meta.clone(),
    };
    serde_json::to_string_pretty(&raw).expect("problem data is always serializable")
}
