//! Infeasible-start primal-dual path-following method (HKM direction,
//! Mehrotra predictor-corrector) for real symmetric programs
//!
//! ```text
//! minimize <C, X>   s.t.  <A_i, X> + s_i x_slack = b_i,  X ⪰ 0,  x_slack >= 0
//! ```
//!
//! Inequality rows carry a slack with sign `s_i = ±1`; equalities have none.

use log::trace;
use nalgebra::{DMatrix, DVector};

use super::{
    embed, real_to_hermitian, Relation, Residuals, SdpProblem, SdpSolution, SdpStatus,
    SolverOptions,
};
use crate::error::Result;
use crate::linalg::frobenius;

/// Rows with at most this many nonzeros per matrix dimension are kept sparse.
const SPARSE_FILL: usize = 4;
/// Farkas certificate acceptance threshold.
const INFEASIBILITY_TOL: f64 = 1e-8;
/// Residual level accepted as optimal when the iteration stalls.
const STALL_ACCEPT: f64 = 1e-6;
const STEP_FRACTION: f64 = 0.95;

enum SymData {
    Dense(DMatrix<f64>),
    /// Every nonzero `(row, col, value)`, both triangles listed.
    Sparse(Vec<(usize, usize, f64)>),
}

impl SymData {
    fn from_dense(m: DMatrix<f64>) -> Self {
        let n = m.nrows();
        let nnz = m.iter().filter(|v| **v != 0.0).count();
        if nnz <= SPARSE_FILL * n {
            let mut entries = Vec::with_capacity(nnz);
            for j in 0..n {
                for i in 0..n {
                    let v = m[(i, j)];
                    if v != 0.0 {
                        entries.push((i, j, v));
                    }
                }
            }
            SymData::Sparse(entries)
        } else {
            SymData::Dense(m)
        }
    }

    /// `tr(A M)` for arbitrary square `M`.
    fn trace_with(&self, m: &DMatrix<f64>) -> f64 {
        match self {
            SymData::Dense(a) => a.iter().zip(m.transpose().iter()).map(|(x, y)| x * y).sum(),
            SymData::Sparse(e) => e.iter().map(|&(p, q, v)| v * m[(q, p)]).sum(),
        }
    }

    fn add_scaled_to(&self, factor: f64, out: &mut DMatrix<f64>) {
        match self {
            SymData::Dense(a) => *out += a * factor,
            SymData::Sparse(e) => {
                for &(p, q, v) in e {
                    out[(p, q)] += factor * v;
                }
            }
        }
    }

    fn scale(&mut self, factor: f64) {
        match self {
            SymData::Dense(a) => *a *= factor,
            SymData::Sparse(e) => e.iter_mut().for_each(|t| t.2 *= factor),
        }
    }

    fn norm(&self) -> f64 {
        match self {
            SymData::Dense(a) => frobenius(a),
            SymData::Sparse(e) => e.iter().map(|t| t.2 * t.2).sum::<f64>().sqrt(),
        }
    }

}

struct Row {
    data: SymData,
    b: f64,
    /// `(slack index, sign)` for inequality rows.
    slack: Option<(usize, f64)>,
}

struct RealSdp {
    n: usize,
    c: DMatrix<f64>,
    rows: Vec<Row>,
    n_slack: usize,
    /// Original objective = `-objective_scale * <C, X>` of this minimization.
    objective_scale: f64,
}

/// Bound on `tr(X)` implied by identity-proportional rows or a full set of
/// diagonal equalities; used to discard inequalities that can never bind.
fn implied_trace_bound(problem: &SdpProblem) -> Option<f64> {
    let n = problem.dim();
    let mut bound = f64::INFINITY;
    let mut diag_fixed = vec![None; n];
    for c in &problem.constraints {
        let m = c.a.as_matrix();
        let off_diag_zero = (0..n).all(|i| (0..n).all(|j| i == j || m[(i, j)].norm() == 0.0));
        if !off_diag_zero {
            continue;
        }
        let d: Vec<f64> = (0..n).map(|i| m[(i, i)].re).collect();
        let nonzero: Vec<usize> = (0..n).filter(|&i| d[i] != 0.0).collect();
        if nonzero.len() == n && d.iter().all(|&v| v == d[0]) && d[0] > 0.0 {
            if matches!(c.relation, Relation::Le | Relation::Eq) {
                bound = bound.min(c.b / d[0]);
            }
        } else if nonzero.len() == 1 && c.relation == Relation::Eq && d[nonzero[0]] > 0.0 {
            diag_fixed[nonzero[0]] = Some(c.b / d[nonzero[0]]);
        }
    }
    if diag_fixed.iter().all(Option::is_some) && n > 0 {
        bound = bound.min(diag_fixed.iter().map(|v| v.unwrap()).sum());
    }
    bound.is_finite().then_some(bound)
}

enum Presolved {
    Ready(RealSdp, Vec<usize>),
    Infeasible(usize),
}

fn presolve(problem: &SdpProblem) -> Presolved {
    let n = problem.dim();
    let trace_bound = implied_trace_bound(problem);
    let c_real = embed(problem.objective.as_matrix()) * 0.5;
    let c_norm = frobenius(&c_real);
    let objective_scale = if c_norm > 0.0 { c_norm } else { 1.0 };
    let c = c_real * (-1.0 / objective_scale);

    let mut rows = Vec::new();
    let mut kept = Vec::new();
    let mut n_slack = 0;
    for (idx, con) in problem.constraints.iter().enumerate() {
        let a_norm = con.a.frobenius_norm();
        if a_norm == 0.0 {
            let ok = match con.relation {
                Relation::Le => 0.0 <= con.b,
                Relation::Ge => 0.0 >= con.b,
                Relation::Eq => con.b == 0.0,
            };
            if ok {
                continue;
            }
            return Presolved::Infeasible(idx);
        }
        if let (Some(t), Relation::Le) = (trace_bound, con.relation) {
            let lam_max = con.a.eigenvalues().last().copied().unwrap_or(0.0);
            if lam_max.max(0.0) * t < con.b * (1.0 - 1e-9) {
                continue;
            }
        }
        let mut data = SymData::from_dense(embed(con.a.as_matrix()) * 0.5);
        let scale = 1.0 / data.norm();
        data.scale(scale);
        let slack = match con.relation {
            Relation::Eq => None,
            Relation::Le => Some(1.0),
            Relation::Ge => Some(-1.0),
        }
        .map(|sign| {
            n_slack += 1;
            (n_slack - 1, sign)
        });
        rows.push(Row {
            data,
            b: con.b * scale,
            slack,
        });
        kept.push(idx);
    }
    Presolved::Ready(
        RealSdp {
            n: 2 * n,
            c,
            rows,
            n_slack,
            objective_scale,
        },
        kept,
    )
}

fn sym(m: DMatrix<f64>) -> DMatrix<f64> {
    (&m + m.transpose()) * 0.5
}

fn dot(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

/// Largest `α` keeping `X + α dX ≻ 0`, given the Cholesky factor of `X`.
fn max_psd_step(chol_l: &DMatrix<f64>, dx: &DMatrix<f64>) -> f64 {
    let linv_dx = chol_l
        .solve_lower_triangular(dx)
        .expect("Cholesky factor is nonsingular");
    let s = chol_l
        .solve_lower_triangular(&linv_dx.transpose())
        .expect("Cholesky factor is nonsingular");
    let s = sym(s);
    let lam_min = s.symmetric_eigenvalues().min();
    if lam_min < 0.0 {
        -1.0 / lam_min
    } else {
        f64::INFINITY
    }
}

fn max_lp_step(x: &DVector<f64>, dx: &DVector<f64>) -> f64 {
    x.iter()
        .zip(dx.iter())
        .filter(|(_, d)| **d < 0.0)
        .map(|(v, d)| -v / d)
        .fold(f64::INFINITY, f64::min)
}

struct Iterate {
    x: DMatrix<f64>,
    xs: DVector<f64>,
    y: DVector<f64>,
    z: DMatrix<f64>,
    zs: DVector<f64>,
}

struct Direction {
    dx: DMatrix<f64>,
    dxs: DVector<f64>,
    dy: DVector<f64>,
    dz: DMatrix<f64>,
    dzs: DVector<f64>,
}

impl RealSdp {
    fn apply_a(&self, x: &DMatrix<f64>, xs: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(
            self.rows.len(),
            self.rows.iter().map(|r| {
                r.data.trace_with(x) + r.slack.map_or(0.0, |(k, s)| s * xs[k])
            }),
        )
    }

    /// `(Σ y_i A_i, slack part)`.
    fn apply_at(&self, y: &DVector<f64>) -> (DMatrix<f64>, DVector<f64>) {
        let mut m = DMatrix::zeros(self.n, self.n);
        let mut s = DVector::zeros(self.n_slack);
        for (i, r) in self.rows.iter().enumerate() {
            r.data.add_scaled_to(y[i], &mut m);
            if let Some((k, sign)) = r.slack {
                s[k] += sign * y[i];
            }
        }
        (m, s)
    }

    fn b(&self) -> DVector<f64> {
        DVector::from_iterator(self.rows.len(), self.rows.iter().map(|r| r.b))
    }

    fn schur(&self, x: &DMatrix<f64>, zinv: &DMatrix<f64>, xz_ratio: &DVector<f64>) -> DMatrix<f64> {
        let m = self.rows.len();
        let mut schur = DMatrix::zeros(m, m);
        let g: Vec<Option<DMatrix<f64>>> = self
            .rows
            .iter()
            .map(|r| match &r.data {
                SymData::Dense(a) => Some(x * a * zinv),
                SymData::Sparse(_) => None,
            })
            .collect();
        for i in 0..m {
            for j in i..m {
                let v = if let Some(gj) = &g[j] {
                    self.rows[i].data.trace_with(gj)
                } else if let Some(gi) = &g[i] {
                    self.rows[j].data.trace_with(gi)
                } else {
                    match (&self.rows[i].data, &self.rows[j].data) {
                        (SymData::Sparse(ei), SymData::Sparse(ej)) => {
                            let mut acc = 0.0;
                            for &(p, q, a) in ei {
                                for &(r, s, c) in ej {
                                    acc += a * x[(q, r)] * c * zinv[(s, p)];
                                }
                            }
                            acc
                        }
                        _ => unreachable!("dense rows handled above"),
                    }
                };
                schur[(i, j)] = v;
                schur[(j, i)] = v;
            }
            if let Some((k, _)) = self.rows[i].slack {
                schur[(i, i)] += xz_ratio[k];
            }
        }
        schur
    }
}

enum SchurFactor {
    Chol(nalgebra::Cholesky<f64, nalgebra::Dyn>),
    Lu(nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>),
}

impl SchurFactor {
    fn new(m: DMatrix<f64>) -> Option<Self> {
        if let Some(c) = m.clone().cholesky() {
            return Some(SchurFactor::Chol(c));
        }
        let lu = m.lu();
        lu.is_invertible().then_some(SchurFactor::Lu(lu))
    }

    fn solve(&self, rhs: &DVector<f64>) -> Option<DVector<f64>> {
        match self {
            SchurFactor::Chol(c) => Some(c.solve(rhs)),
            SchurFactor::Lu(lu) => lu.solve(rhs),
        }
    }
}

struct Measures {
    dobj: f64,
    primal: f64,
    dual: f64,
    gap: f64,
}

pub(super) fn solve(problem: &SdpProblem, options: &SolverOptions) -> Result<SdpSolution> {
    let n_complex = problem.dim();
    let (sdp, _kept) = match presolve(problem) {
        Presolved::Ready(sdp, kept) => (sdp, kept),
        Presolved::Infeasible(idx) => {
            trace!("constraint {idx} has zero matrix and an unattainable bound");
            return Ok(SdpSolution {
                x: super::HermitianMatrix::zeros(n_complex),
                objective: 0.0,
                dual_objective: f64::INFINITY,
                status: SdpStatus::Infeasible,
                residuals: Residuals::default(),
                iterations: 0,
                certificate: Some(0.0),
            });
        }
    };
    let n = sdp.n;
    let m = sdp.rows.len();
    let l = sdp.n_slack;
    let b = sdp.b();
    let b_norm = b.norm();
    let c_norm = frobenius(&sdp.c);

    let nf = n as f64;
    let xi = sdp
        .rows
        .iter()
        .map(|r| nf.sqrt() * (1.0 + r.b.abs()) / 2.0)
        .fold(10f64.max(nf.sqrt()), f64::max);
    let eta = 10f64.max(nf.sqrt());
    let mut it = Iterate {
        x: DMatrix::identity(n, n) * xi,
        xs: DVector::from_element(l, xi),
        y: DVector::zeros(m),
        z: DMatrix::identity(n, n) * eta,
        zs: DVector::from_element(l, eta),
    };

    let mut status = SdpStatus::MaxIterations;
    let mut certificate = None;
    let mut measures;
    let mut iterations = 0;
    let mut stalled = 0;

    loop {
        let (aty, aty_s) = sdp.apply_at(&it.y);
        let rp = &b - sdp.apply_a(&it.x, &it.xs);
        let rd = &sdp.c - &aty - &it.z;
        let rd_s = -&aty_s - &it.zs;
        let pobj = dot(&sdp.c, &it.x);
        let dobj = b.dot(&it.y);
        let complementarity = dot(&it.x, &it.z) + it.xs.dot(&it.zs);
        let mu = complementarity / (n + l) as f64;
        let dual_res = (frobenius(&rd).powi(2) + rd_s.norm_squared()).sqrt();
        measures = Measures {
            dobj,
            primal: rp.norm() / (1.0 + b_norm),
            dual: dual_res / (1.0 + c_norm),
            gap: (pobj - dobj).abs() / (1.0 + pobj.abs() + dobj.abs()),
        };
        trace!(
            "ipm iter {iterations}: pobj {pobj:.9e} dobj {dobj:.9e} pinf {:.2e} dinf {:.2e} gap {:.2e} mu {mu:.2e}",
            measures.primal,
            measures.dual,
            measures.gap
        );
        if measures.primal <= options.tol && measures.dual <= options.tol && measures.gap <= options.tol {
            status = SdpStatus::Optimal;
            break;
        }
        if dobj > 0.0 {
            // A^T y + Z = C - R_d along a ray with b^T y -> ∞ certifies primal infeasibility
            let ray = (frobenius(&(&sdp.c - &rd)).powi(2) + rd_s.norm_squared()).sqrt() / dobj;
            if ray < INFEASIBILITY_TOL {
                status = SdpStatus::Infeasible;
                certificate = Some(ray);
                break;
            }
        }
        if pobj < 0.0 {
            let ray = (&b - &rp).norm() / -pobj;
            if ray < INFEASIBILITY_TOL && measures.primal > options.tol {
                trace!("dual infeasibility certificate {ray:e}");
                status = SdpStatus::NumericalFailure;
                break;
            }
        }
        if iterations >= options.max_iters {
            break;
        }
        iterations += 1;

        let Some(zchol) = it.z.clone().cholesky() else {
            status = SdpStatus::NumericalFailure;
            break;
        };
        let Some(xchol) = it.x.clone().cholesky() else {
            status = SdpStatus::NumericalFailure;
            break;
        };
        let zinv = sym(zchol.inverse());
        let xz_ratio = it.xs.component_div(&it.zs);
        let Some(factor) = SchurFactor::new(sdp.schur(&it.x, &zinv, &xz_ratio)) else {
            status = SdpStatus::NumericalFailure;
            break;
        };
        let x_rd_zinv = &it.x * &rd * &zinv;
        let x_l = xchol.l();
        let z_l = zchol.l();

        let direction = |sigma_mu: f64, corr: Option<&Direction>| -> Option<Direction> {
            // H = σμ Z^{-1} - X - X R_d Z^{-1} [- dXa dZa Z^{-1}]
            let mut h = &zinv * sigma_mu - &it.x - &x_rd_zinv;
            let mut hs = DVector::from_fn(l, |k, _| {
                sigma_mu / it.zs[k] - it.xs[k] - it.xs[k] * rd_s[k] / it.zs[k]
            });
            if let Some(c) = corr {
                h -= &c.dx * &c.dz * &zinv;
                for k in 0..l {
                    hs[k] -= c.dxs[k] * c.dzs[k] / it.zs[k];
                }
            }
            let rhs = DVector::from_fn(m, |i, _| {
                let r = &sdp.rows[i];
                rp[i] - r.data.trace_with(&h) - r.slack.map_or(0.0, |(k, s)| s * hs[k])
            });
            let dy = factor.solve(&rhs)?;
            let (at_dy, at_dy_s) = sdp.apply_at(&dy);
            let dz = &rd - at_dy;
            let dzs = &rd_s - at_dy_s;
            let mut dx_full = &zinv * sigma_mu - &it.x - &it.x * &dz * &zinv;
            if let Some(c) = corr {
                dx_full -= &c.dx * &c.dz * &zinv;
            }
            let dx = sym(dx_full);
            let dxs = DVector::from_fn(l, |k, _| {
                let mut v = sigma_mu / it.zs[k] - it.xs[k] - it.xs[k] * dzs[k] / it.zs[k];
                if let Some(c) = corr {
                    v -= c.dxs[k] * c.dzs[k] / it.zs[k];
                }
                v
            });
            let ok = dx.iter().chain(dy.iter()).chain(dz.iter()).all(|v| v.is_finite());
            ok.then_some(Direction { dx, dxs, dy, dz, dzs })
        };
        let steps = |d: &Direction| -> (f64, f64) {
            let ap = max_psd_step(&x_l, &d.dx).min(max_lp_step(&it.xs, &d.dxs));
            let ad = max_psd_step(&z_l, &d.dz).min(max_lp_step(&it.zs, &d.dzs));
            (ap, ad)
        };

        let Some(pred) = direction(0.0, None) else {
            status = SdpStatus::NumericalFailure;
            break;
        };
        let (ap, ad) = steps(&pred);
        let (ap, ad) = (ap.min(1.0), ad.min(1.0));
        let mu_aff = (dot(&(&it.x + &pred.dx * ap), &(&it.z + &pred.dz * ad))
            + (&it.xs + &pred.dxs * ap).dot(&(&it.zs + &pred.dzs * ad)))
            / (n + l) as f64;
        let sigma = (mu_aff / mu).clamp(0.0, 1.0).powi(3);
        let Some(corr) = direction(sigma * mu, Some(&pred)) else {
            status = SdpStatus::NumericalFailure;
            break;
        };
        let (ap, ad) = steps(&corr);
        let ap = (STEP_FRACTION * ap).min(1.0);
        let ad = (STEP_FRACTION * ad).min(1.0);

        it.x += &corr.dx * ap;
        it.xs += &corr.dxs * ap;
        it.y += &corr.dy * ad;
        it.z += &corr.dz * ad;
        it.zs += &corr.dzs * ad;

        if ap.max(ad) < 1e-8 {
            stalled += 1;
            if stalled >= 3 {
                status = SdpStatus::NumericalFailure;
                break;
            }
        } else {
            stalled = 0;
        }
    }

    if status != SdpStatus::Optimal
        && status != SdpStatus::Infeasible
        && measures.primal <= STALL_ACCEPT
        && measures.dual <= STALL_ACCEPT
        && measures.gap <= STALL_ACCEPT
    {
        status = SdpStatus::Optimal;
    }

    let x = real_to_hermitian(&it.x)?;
    let objective = problem.objective_value(&x);
    Ok(SdpSolution {
        x,
        objective,
        dual_objective: -measures.dobj * sdp.objective_scale,
        status,
        residuals: Residuals {
            primal: measures.primal,
            dual: measures.dual,
            gap: measures.gap,
        },
        iterations,
        certificate,
    })
}
