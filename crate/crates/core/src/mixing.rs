//! Symmetric doubly-stochastic mixing matrices supported on a graph.
//!
//! A valid mixing matrix `W` for a connected graph satisfies:
//!
//! 1. `w_ij = 0` for `i != j` off the edge set, `w_ij > 0` on edges;
//! 2. `W = Wᵀ`;
//! 3. `null(I - W) = span{1}`;
//! 4. `I ⪰ W ≻ -I`.
//!
//! The cached spectral quantity `lambda = max(|λ₂|, |λ_m|)` controls how fast
//! `W^k` approaches the averaging matrix `P = 11ᵀ/m`: `‖W^k - P‖_op ≤ λ^k`.

use std::fmt;
use std::path::Path;

use nalgebra::DMatrix;
use num_rational::Ratio;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::topology::{Graph, TopologyKind};

/// Tolerance for stochasticity checks.
pub const STOCHASTIC_TOL: f64 = 1e-12;
/// Spectral margin used for the strict clauses (simple unit eigenvalue, `W ≻ -I`).
pub const SPECTRAL_TOL: f64 = 1e-10;
/// Additive slack on `‖W^k - P‖_op ≤ λ^k`.
pub const DECAY_SLACK: f64 = 1e-10;
/// Default number of powers checked by [`validate_mixing`].
pub const DEFAULT_DECAY_POWERS: usize = 50;

#[derive(Debug, Error)]
pub enum MixingError {
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix is not symmetric at ({i},{j}): {a} vs {b}")]
    NotSymmetric { i: usize, j: usize, a: f64, b: f64 },
    #[error("matrix dimension {got} does not match graph size {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid mixing matrix: {0}")]
    Invalid(String),
    #[error("csv: {0}")]
    Csv(String),
    #[error("io error reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MixingScheme {
    MetropolisHastings,
    MaxDegree,
    Custom,
}

impl fmt::Display for MixingScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MixingScheme::MetropolisHastings => "metropolis-hastings",
            MixingScheme::MaxDegree => "max-degree",
            MixingScheme::Custom => "custom",
        })
    }
}

#[derive(Debug, Clone)]
pub struct MixingMatrix {
    w: DMatrix<f64>,
    lambda: f64,
    scheme: MixingScheme,
    graph: Graph,
    /// Nonzero entries per row, including the self weight.
    neighbors: Vec<Vec<(usize, f64)>>,
}

impl MixingMatrix {
    pub fn m(&self) -> usize {
        self.w.nrows()
    }

    pub fn weights(&self) -> &DMatrix<f64> {
        &self.w
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn scheme(&self) -> MixingScheme {
        self.scheme
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    /// Row `i` as `(column, weight)` pairs over the nonzero support.
    pub fn row(&self, i: usize) -> &[(usize, f64)] {
        &self.neighbors[i]
    }

    /// Loads and validates a user matrix. When `graph` is `None` the support
    /// graph is read off the nonzero off-diagonal pattern.
    pub fn from_dense(w: DMatrix<f64>, graph: Option<&Graph>) -> Result<Self, MixingError> {
        let mm = Self::from_dense_unchecked(w, graph)?;
        let report = validate_mixing_with(&mm, 0);
        if let Some(c) = report.clauses.iter().find(|c| !c.passed) {
            return Err(MixingError::Invalid(format!("{}: {}", c.name, c.detail)));
        }
        Ok(mm)
    }

    /// Wraps a square symmetric matrix without checking the mixing clauses,
    /// so [`validate_mixing`] can report on it.
    pub fn from_dense_unchecked(
        w: DMatrix<f64>,
        graph: Option<&Graph>,
    ) -> Result<Self, MixingError> {
        let lambda = spectral_lambda(&w)?;
        let m = w.nrows();
        let graph = match graph {
            Some(g) if g.m() != m => {
                return Err(MixingError::DimensionMismatch {
                    expected: g.m(),
                    got: m,
                })
            }
            Some(g) => g.clone(),
            None => {
                let edges = (0..m)
                    .flat_map(|i| ((i + 1)..m).map(move |j| (i, j)))
                    .filter(|&(i, j)| w[(i, j)] != 0.0);
                Graph::from_edges(m, edges, TopologyKind::Custom)
                    .map_err(|e| MixingError::Invalid(format!("support graph: {e}")))?
            }
        };
        let neighbors = support_rows(&w);
        Ok(MixingMatrix {
            w,
            lambda,
            scheme: MixingScheme::Custom,
            graph,
            neighbors,
        })
    }

    /// Reads `m` rows of `m` comma-separated reals and validates the result.
    pub fn load_csv(path: &Path, graph: Option<&Graph>) -> Result<Self, MixingError> {
        let text = std::fs::read_to_string(path).map_err(|source| MixingError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_dense(parse_matrix_csv(&text)?, graph)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for i in 0..self.m() {
            let row: Vec<String> = (0..self.m()).map(|j| self.w[(i, j)].to_string()).collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

fn support_rows(w: &DMatrix<f64>) -> Vec<Vec<(usize, f64)>> {
    (0..w.nrows())
        .map(|i| {
            (0..w.ncols())
                .filter(|&j| w[(i, j)] != 0.0)
                .map(|j| (j, w[(i, j)]))
                .collect()
        })
        .collect()
}

pub fn parse_matrix_csv(text: &str) -> Result<DMatrix<f64>, MixingError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (lineno, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| MixingError::Csv(e.to_string()))?;
        let row = rec
            .iter()
            .map(|s| {
                s.parse::<f64>()
                    .map_err(|_| MixingError::Csv(format!("row {}: bad value `{s}`", lineno + 1)))
            })
            .collect::<Result<Vec<_>, _>>()?;
        rows.push(row);
    }
    let m = rows.len();
    if m == 0 {
        return Err(MixingError::Csv("empty matrix".into()));
    }
    if let Some(bad) = rows.iter().position(|r| r.len() != m) {
        return Err(MixingError::NotSquare {
            rows: m,
            cols: rows[bad].len(),
        });
    }
    Ok(DMatrix::from_fn(m, m, |i, j| rows[i][j]))
}

/// `P = 11ᵀ/m`.
pub fn averaging_matrix(m: usize) -> DMatrix<f64> {
    DMatrix::from_element(m, m, 1.0 / m as f64)
}

/// Builds the Metropolis–Hastings or max-degree matrix on a connected graph.
///
/// Edge weights are `1/(1 + max(deg_i, deg_j))` (Metropolis–Hastings) or
/// `1/(1 + d_max)` (max-degree). The diagonal takes the remainder of each row,
/// accumulated in exact rational arithmetic so rows whose weights are all
/// `1/m` store exactly `fl(1/m)` on the diagonal as well.
pub fn build_mixing(g: &Graph, scheme: MixingScheme) -> Result<MixingMatrix, MixingError> {
    let m = g.m();
    let deg = g.degrees();
    let d_max = deg.iter().copied().max().unwrap_or(0);
    let denom = |i: usize, j: usize| -> i128 {
        match scheme {
            MixingScheme::MetropolisHastings => 1 + deg[i].max(deg[j]) as i128,
            MixingScheme::MaxDegree => 1 + d_max as i128,
            MixingScheme::Custom => unreachable!(),
        }
    };
    if scheme == MixingScheme::Custom {
        return Err(MixingError::Invalid(
            "custom matrices are loaded with MixingMatrix::from_dense".into(),
        ));
    }
    let mut w = DMatrix::zeros(m, m);
    let adj = g.adjacency();
    for i in 0..m {
        let mut off = Some(Ratio::from_integer(0i128));
        let mut off_float = 0.0;
        for &j in &adj[i] {
            let k = denom(i, j);
            w[(i, j)] = 1.0 / k as f64;
            off_float += 1.0 / k as f64;
            off = off.and_then(|acc| checked_add(&acc, &Ratio::new(1, k)));
        }
        w[(i, i)] = match off {
            Some(r) => {
                let rem = Ratio::from_integer(1) - r;
                *rem.numer() as f64 / *rem.denom() as f64
            }
            None => 1.0 - off_float,
        };
    }
    let lambda = spectral_lambda(&w)?;
    let neighbors = support_rows(&w);
    Ok(MixingMatrix {
        w,
        lambda,
        scheme,
        graph: g.clone(),
        neighbors,
    })
}

/// Eigenvalues in descending order.
pub fn symmetric_eigenvalues(w: &DMatrix<f64>) -> Vec<f64> {
    let mut ev: Vec<f64> = w
        .clone()
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .copied()
        .collect();
    ev.sort_by(|a, b| b.total_cmp(a));
    ev
}

/// Largest absolute eigenvalue after discarding one copy of the eigenvalue
/// nearest to 1. A matrix whose entries are all exactly `fl(1/m)` returns 0.
pub fn spectral_lambda(w: &DMatrix<f64>) -> Result<f64, MixingError> {
    let (rows, cols) = w.shape();
    if rows != cols {
        return Err(MixingError::NotSquare { rows, cols });
    }
    for i in 0..rows {
        for j in (i + 1)..rows {
            if w[(i, j)] != w[(j, i)] {
                return Err(MixingError::NotSymmetric {
                    i,
                    j,
                    a: w[(i, j)],
                    b: w[(j, i)],
                });
            }
        }
    }
    let uniform = 1.0 / rows as f64;
    if w.iter().all(|&x| x == uniform) {
        return Ok(0.0);
    }
    let mut ev = symmetric_eigenvalues(w);
    let top = ev
        .iter()
        .enumerate()
        .min_by(|a, b| (a.1 - 1.0).abs().total_cmp(&(b.1 - 1.0).abs()))
        .map(|(i, _)| i)
        .unwrap_or(0);
    ev.remove(top);
    Ok(ev.iter().fold(0.0_f64, |acc, &x| acc.max(x.abs())))
}

/// Spectral norm of a (numerically) symmetric matrix.
pub fn symmetric_op_norm(a: &DMatrix<f64>) -> f64 {
    let sym = (a + a.transpose()) * 0.5;
    symmetric_eigenvalues(&sym)
        .iter()
        .fold(0.0_f64, |acc, &x| acc.max(x.abs()))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClauseResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DecayCheck {
    pub k: usize,
    pub op_norm: f64,
    pub lambda_pow: f64,
    /// `lambda^k + DECAY_SLACK - op_norm`; nonnegative when the check passes.
    pub slack: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ValidationReport {
    pub m: usize,
    pub scheme: MixingScheme,
    pub lambda: f64,
    pub clauses: Vec<ClauseResult>,
    pub decay: Vec<DecayCheck>,
    pub decay_passed: bool,
}

impl ValidationReport {
    pub fn clauses_passed(&self) -> bool {
        self.clauses.iter().all(|c| c.passed)
    }

    pub fn all_passed(&self) -> bool {
        self.clauses_passed() && self.decay_passed
    }

    pub fn clause(&self, name: &str) -> Option<&ClauseResult> {
        self.clauses.iter().find(|c| c.name == name)
    }
}

/// Clause-by-clause check plus the spectral decay check for `k = 1..=50`.
pub fn validate_mixing(mm: &MixingMatrix) -> ValidationReport {
    validate_mixing_with(mm, DEFAULT_DECAY_POWERS)
}

pub fn validate_mixing_with(mm: &MixingMatrix, powers: usize) -> ValidationReport {
    let w = &mm.w;
    let m = w.nrows();
    let g = &mm.graph;
    let mut clauses = Vec::new();
    let mut push = |name: &str, passed: bool, detail: String| {
        clauses.push(ClauseResult {
            name: name.to_string(),
            passed,
            detail,
        })
    };

    let mut support_bad = None;
    for i in 0..m {
        for j in 0..m {
            if i == j {
                continue;
            }
            let on_edge = g.has_edge(i, j);
            if (on_edge && w[(i, j)] <= 0.0) || (!on_edge && w[(i, j)] != 0.0) {
                support_bad.get_or_insert((i, j, w[(i, j)], on_edge));
            }
        }
    }
    push(
        "support",
        support_bad.is_none(),
        match support_bad {
            None => "off-edge entries zero, edge entries positive".into(),
            Some((i, j, v, e)) => format!("w[{i}][{j}] = {v} with edge={e}"),
        },
    );

    let mut asym = 0.0_f64;
    for i in 0..m {
        for j in 0..m {
            asym = asym.max((w[(i, j)] - w[(j, i)]).abs());
        }
    }
    push(
        "symmetric",
        asym == 0.0,
        format!("max |w_ij - w_ji| = {asym:e}"),
    );

    let min_entry = w.iter().copied().fold(f64::INFINITY, f64::min);
    push(
        "nonnegative",
        min_entry >= 0.0,
        format!("min entry = {min_entry:e}"),
    );

    let row_err = (0..m)
        .map(|i| (w.row(i).sum() - 1.0).abs())
        .fold(0.0_f64, f64::max);
    let col_err = (0..m)
        .map(|j| (w.column(j).sum() - 1.0).abs())
        .fold(0.0_f64, f64::max);
    push(
        "doubly-stochastic",
        row_err <= STOCHASTIC_TOL && col_err <= STOCHASTIC_TOL,
        format!("max row error {row_err:e}, max column error {col_err:e}"),
    );

    let ev = symmetric_eigenvalues(w);
    let second = ev.get(1).copied().unwrap_or(f64::NEG_INFINITY);
    push(
        "simple-unit-eigenvalue",
        row_err <= STOCHASTIC_TOL && second < 1.0 - SPECTRAL_TOL,
        format!("second largest eigenvalue {second}"),
    );

    let (max_ev, min_ev) = (
        ev.first().copied().unwrap_or(0.0),
        ev.last().copied().unwrap_or(0.0),
    );
    push(
        "eigenvalue-range",
        max_ev <= 1.0 + STOCHASTIC_TOL && min_ev > -1.0 + SPECTRAL_TOL,
        format!("eigenvalues in [{min_ev}, {max_ev}]"),
    );

    let recomputed = spectral_lambda(w).unwrap_or(f64::NAN);
    push(
        "lambda",
        (0.0..1.0).contains(&mm.lambda) && (recomputed - mm.lambda).abs() <= STOCHASTIC_TOL,
        format!("lambda {} (recomputed {recomputed})", mm.lambda),
    );

    let p = averaging_matrix(m);
    let mut power = DMatrix::identity(m, m);
    let mut decay = Vec::with_capacity(powers);
    for k in 1..=powers {
        power = &power * w;
        let op_norm = symmetric_op_norm(&(&power - &p));
        let lambda_pow = mm.lambda.powi(k as i32);
        decay.push(DecayCheck {
            k,
            op_norm,
            lambda_pow,
            slack: lambda_pow + DECAY_SLACK - op_norm,
        });
    }
    let decay_passed = decay.iter().all(|d| d.slack >= 0.0);

    ValidationReport {
        m,
        scheme: mm.scheme,
        lambda: mm.lambda,
        clauses,
        decay,
        decay_passed,
    }
}

/// `Ratio<i128>` addition returning `None` on overflow.
fn checked_add(x: &Ratio<i128>, y: &Ratio<i128>) -> Option<Ratio<i128>> {
    let (a, b) = (x.numer(), x.denom());
    let (c, d) = (y.numer(), y.denom());
    let numer = a.checked_mul(*d)?.checked_add(c.checked_mul(*b)?)?;
    let denom = b.checked_mul(*d)?;
    Some(Ratio::new(numer, denom))
}
