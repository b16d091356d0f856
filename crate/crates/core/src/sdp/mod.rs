//! Dense semidefinite programs over Hermitian matrices.
//!
//! Problems have the form
//!
//! ```text
//! maximize  tr(C X)
//! s.t.      tr(A_i X) {<=, =, >=} b_i,   X ⪰ 0
//! ```
//!
//! with `C`, `A_i` Hermitian. They are mapped onto real symmetric programs via
//! the embedding `[[Re, -Im], [Im, Re]]` and solved by the primal-dual
//! interior-point method in [`ipm`].

mod ipm;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{serde_cmatrix, CMatrix, CVector, C64};

/// Entrywise tolerance, relative to the largest entry, for accepting a matrix as Hermitian.
pub const HERMITIAN_TOL: f64 = 1e-12;

/// A complex matrix known to satisfy `X = X^H`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMatrix", into = "RawMatrix")]
pub struct HermitianMatrix(CMatrix);

#[derive(Serialize, Deserialize)]
struct RawMatrix(#[serde(with = "serde_cmatrix")] CMatrix);

impl TryFrom<RawMatrix> for HermitianMatrix {
    type Error = Error;
    fn try_from(raw: RawMatrix) -> Result<Self> {
        HermitianMatrix::new(raw.0)
    }
}

impl From<HermitianMatrix> for RawMatrix {
    fn from(h: HermitianMatrix) -> Self {
        RawMatrix(h.0)
    }
}

impl HermitianMatrix {
    /// Validates Hermitian symmetry and removes round-off asymmetry.
    pub fn new(m: CMatrix) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::Domain(format!(
                "matrix is {}x{}, expected square",
                m.nrows(),
                m.ncols()
            )));
        }
        let scale = m.iter().map(|c| c.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
        let n = m.nrows();
        for i in 0..n {
            for j in i..n {
                let d = (m[(i, j)] - m[(j, i)].conj()).norm();
                if !(d <= HERMITIAN_TOL * scale) {
                    return Err(Error::Domain(format!(
                        "matrix is not Hermitian at ({i}, {j}): mismatch {d:e}"
                    )));
                }
            }
        }
        Ok(Self::symmetrized(m))
    }

    fn symmetrized(m: CMatrix) -> Self {
        let mut h = (&m + m.adjoint()) * C64::new(0.5, 0.0);
        for i in 0..h.nrows() {
            h[(i, i)].im = 0.0;
        }
        HermitianMatrix(h)
    }

    pub fn zeros(n: usize) -> Self {
        HermitianMatrix(CMatrix::zeros(n, n))
    }

    pub fn identity(n: usize) -> Self {
        HermitianMatrix(CMatrix::identity(n, n))
    }

    /// `e_k e_k^T`.
    pub fn unit_diagonal(n: usize, k: usize) -> Self {
        let mut m = CMatrix::zeros(n, n);
        m[(k, k)] = C64::new(1.0, 0.0);
        HermitianMatrix(m)
    }

    /// `v v^H`.
    pub fn outer(v: &CVector) -> Self {
        Self::symmetrized(v * v.adjoint())
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> CMatrix {
        self.0
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim()).map(|i| self.0[(i, i)].re).sum()
    }

    /// `tr(self · other)`, real for Hermitian operands.
    pub fn inner(&self, other: &HermitianMatrix) -> f64 {
        // tr(A B) = Σ_ij A_ij B_ji = Σ_ij A_ij conj(B_ij)
        self.0
            .iter()
            .zip(other.0.iter())
            .map(|(a, b)| (a * b.conj()).re)
            .sum()
    }

    /// `v^H self v`.
    pub fn quadratic_form(&self, v: &CVector) -> f64 {
        v.dotc(&(&self.0 * v)).re
    }

    pub fn scaled(&self, factor: f64) -> Self {
        HermitianMatrix(self.0.map(|c| c * factor))
    }

    pub fn add(&self, other: &HermitianMatrix) -> Self {
        HermitianMatrix(&self.0 + &other.0)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.0.norm()
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = self.0.clone().symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constraint {
    pub a: HermitianMatrix,
    pub relation: Relation,
    pub b: f64,
}

impl Constraint {
    pub fn new(a: HermitianMatrix, relation: Relation, b: f64) -> Self {
        Self { a, relation, b }
    }

    /// Signed violation of the constraint at `x` (positive means violated).
    pub fn violation(&self, x: &HermitianMatrix) -> f64 {
        let lhs = self.a.inner(x);
        match self.relation {
            Relation::Le => lhs - self.b,
            Relation::Ge => self.b - lhs,
            Relation::Eq => (lhs - self.b).abs(),
        }
    }
}

/// `maximize tr(C X)` subject to trace constraints and `X ⪰ 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SdpProblem {
    pub objective: HermitianMatrix,
    pub constraints: Vec<Constraint>,
}

impl SdpProblem {
    pub fn new(objective: HermitianMatrix) -> Self {
        Self {
            objective,
            constraints: Vec::new(),
        }
    }

    pub fn with(mut self, a: HermitianMatrix, relation: Relation, b: f64) -> Self {
        self.constraints.push(Constraint::new(a, relation, b));
        self
    }

    pub fn push(&mut self, a: HermitianMatrix, relation: Relation, b: f64) {
        self.constraints.push(Constraint::new(a, relation, b));
    }

    pub fn dim(&self) -> usize {
        self.objective.dim()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.dim();
        for (i, c) in self.constraints.iter().enumerate() {
            if c.a.dim() != n {
                return Err(Error::Dimension(format!(
                    "constraint {i} is {}x{}, objective is {n}x{n}",
                    c.a.dim(),
                    c.a.dim()
                )));
            }
            if !c.b.is_finite() {
                return Err(Error::Domain(format!("constraint {i} has non-finite bound")));
            }
        }
        Ok(())
    }

    /// Largest relative constraint violation at `x`.
    pub fn max_relative_violation(&self, x: &HermitianMatrix) -> f64 {
        self.constraints
            .iter()
            .map(|c| c.violation(x).max(0.0) / (1.0 + c.b.abs()).max(c.a.frobenius_norm() * x.frobenius_norm()))
            .fold(0.0, f64::max)
    }

    pub fn objective_value(&self, x: &HermitianMatrix) -> f64 {
        self.objective.inner(x)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let p: SdpProblem = serde_json::from_str(text)?;
        p.validate()?;
        Ok(p)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SdpStatus {
    Optimal,
    Infeasible,
    MaxIterations,
    NumericalFailure,
}

/// Relative residuals of the final iterate, measured on the scaled problem.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Residuals {
    pub primal: f64,
    pub dual: f64,
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SdpSolution {
    pub x: HermitianMatrix,
    pub objective: f64,
    /// Dual objective, an upper bound on the optimum when dual feasible.
    pub dual_objective: f64,
    pub status: SdpStatus,
    pub residuals: Residuals,
    pub iterations: usize,
    /// Residual of the Farkas certificate when `status` is infeasible.
    pub certificate: Option<f64>,
}

impl SdpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == SdpStatus::Optimal
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-7,
            max_iters: 100,
        }
    }
}

/// Real symmetric embedding `[[Re C, -Im C], [Im C, Re C]]`.
pub fn hermitian_to_real(c: &CMatrix) -> Result<DMatrix<f64>> {
    let h = HermitianMatrix::new(c.clone())?;
    Ok(embed(h.as_matrix()))
}

pub(crate) fn embed(c: &CMatrix) -> DMatrix<f64> {
    let n = c.nrows();
    let mut out = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            let v = c[(i, j)];
            out[(i, j)] = v.re;
            out[(i + n, j + n)] = v.re;
            out[(i, j + n)] = -v.im;
            out[(i + n, j)] = v.im;
        }
    }
    out
}

/// Inverse of [`hermitian_to_real`], averaging the redundant blocks.
pub fn real_to_hermitian(y: &DMatrix<f64>) -> Result<HermitianMatrix> {
    if !y.is_square() || y.nrows() % 2 != 0 {
        return Err(Error::Dimension(format!(
            "real embedding must be square of even size, got {}x{}",
            y.nrows(),
            y.ncols()
        )));
    }
    let n = y.nrows() / 2;
    let m = CMatrix::from_fn(n, n, |i, j| {
        let re = 0.5 * (y[(i, j)] + y[(i + n, j + n)]);
        let im = 0.5 * (y[(i + n, j)] - y[(i, j + n)]);
        C64::new(re, im)
    });
    Ok(HermitianMatrix::symmetrized(m))
}

/// Largest eigenvalue and its unit eigenvector; the first entry whose modulus
/// exceeds `1e-12` is rotated to be real and positive.
pub fn principal_eigpair(x: &HermitianMatrix) -> (f64, CVector) {
    let n = x.dim();
    if n == 0 {
        return (0.0, CVector::zeros(0));
    }
    let eig = x.as_matrix().clone().symmetric_eigen();
    let (idx, &lambda) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty spectrum");
    let mut q: CVector = eig.eigenvectors.column(idx).into_owned();
    let norm = q.norm();
    q /= C64::new(norm, 0.0);
    if let Some(anchor) = q.iter().find(|c| c.norm() > 1e-12) {
        let rot = anchor.conj() / anchor.norm();
        q *= rot;
    }
    (lambda, q)
}

/// Solve `problem`; errors only on malformed input, solver outcomes are in
/// [`SdpSolution::status`].
pub fn solve(problem: &SdpProblem, options: &SolverOptions) -> Result<SdpSolution> {
    problem.validate()?;
    ipm::solve(problem, options)
}
