//! Sequential rank-one constraint relaxation and vector recovery from a
//! lifted SDP solution.

use log::debug;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel_model::cscg;
use crate::error::{Error, Result};
use crate::linalg::{cis, CVector, C64};
use crate::sdp::{principal_eigpair, solve, HermitianMatrix, Relation, SdpProblem, SdpSolution, SolverOptions};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SrocrParams {
    /// Starting alignment level; `None` starts at the relaxed solution's ratio.
    #[serde(default)]
    pub w_init: Option<f64>,
    pub delta_init: f64,
    pub rank_tol: f64,
    pub max_outer: usize,
    pub shrink: f64,
}

impl Default for SrocrParams {
    fn default() -> Self {
        Self {
            w_init: None,
            delta_init: 0.1,
            rank_tol: 0.999,
            max_outer: 30,
            shrink: 0.5,
        }
    }
}

impl SrocrParams {
    pub fn validate(&self) -> Result<()> {
        if let Some(w) = self.w_init {
            if !(0.0..1.0).contains(&w) {
                return Err(Error::Config(format!("srocr.w_init must lie in [0, 1), got {w}")));
            }
        }
        if !(self.delta_init > 0.0) {
            return Err(Error::Config(format!("srocr.delta_init must be > 0, got {}", self.delta_init)));
        }
        if !(self.rank_tol > 0.9 && self.rank_tol <= 1.0) {
            return Err(Error::Config(format!("srocr.rank_tol must lie in (0.9, 1], got {}", self.rank_tol)));
        }
        if !(self.shrink > 0.0 && self.shrink < 1.0) {
            return Err(Error::Config(format!("srocr.shrink must lie in (0, 1), got {}", self.shrink)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankOneResult {
    pub x: HermitianMatrix,
    /// `√λ1 q1` of the final iterate.
    #[serde(with = "crate::linalg::serde_cvector")]
    pub vector: CVector,
    pub ratio: f64,
    pub iterations: usize,
    pub feasible: bool,
    pub objective: f64,
    /// Alignment levels of the accepted iterates, in order.
    pub w_history: Vec<f64>,
}

/// `λ1(X) / tr(X)`.
pub fn rank_one_ratio(x: &HermitianMatrix) -> Result<f64> {
    let tr = x.trace();
    if !(tr > 0.0) {
        return Err(Error::Degenerate(format!("rank-one ratio needs tr(X) > 0, got {tr}")));
    }
    let lambda = x.eigenvalues().last().copied().unwrap_or(0.0);
    Ok((lambda / tr).clamp(0.0, 1.0))
}

fn alignment_constraint(q: &CVector, w: f64) -> HermitianMatrix {
    let n = q.len();
    HermitianMatrix::outer(q).add(&HermitianMatrix::identity(n).scaled(-w))
}

fn result_from(x: HermitianMatrix, objective: f64, iterations: usize, w_history: Vec<f64>, rank_tol: f64) -> Result<RankOneResult> {
    let ratio = rank_one_ratio(&x)?;
    let (lambda, q) = principal_eigpair(&x);
    Ok(RankOneResult {
        vector: q * C64::new(lambda.max(0.0).sqrt(), 0.0),
        feasible: ratio >= rank_tol,
        x,
        ratio,
        iterations,
        objective,
        w_history,
    })
}

/// Tightens `q^H X q ≥ w tr(X)` until the solution is effectively rank one.
pub fn refine(
    problem: &SdpProblem,
    relaxed: &SdpSolution,
    params: &SrocrParams,
    options: &SolverOptions,
) -> Result<RankOneResult> {
    params.validate()?;
    if !relaxed.is_optimal() {
        return Err(Error::Domain(format!("refine needs an optimal relaxed solution, got {:?}", relaxed.status)));
    }
    let mut x = relaxed.x.clone();
    let mut objective = relaxed.objective;
    let mut ratio = rank_one_ratio(&x)?;
    if ratio >= params.rank_tol {
        return result_from(x, objective, 0, Vec::new(), params.rank_tol);
    }
    let mut w_acc = params.w_init.unwrap_or(ratio).clamp(0.0, 1.0);
    let mut delta = params.delta_init;
    let mut history = Vec::new();
    let mut iterations = 0;
    while iterations < params.max_outer && ratio < params.rank_tol && w_acc < 1.0 {
        iterations += 1;
        let w_try = (w_acc + delta).min(1.0);
        let (_, q) = principal_eigpair(&x);
        let mut tightened = problem.clone();
        tightened.push(alignment_constraint(&q, w_try), Relation::Ge, 0.0);
        let sol = solve(&tightened, options)?;
        if sol.is_optimal() {
            x = sol.x;
            objective = sol.objective;
            ratio = rank_one_ratio(&x)?;
            // the new iterate already meets its own alignment at level `ratio`
            w_acc = w_try.max(ratio);
            history.push(w_acc);
            debug!("srocr iter {iterations}: w {w_acc:.4} ratio {ratio:.6} objective {objective:.6e}");
        } else {
            delta *= params.shrink;
            debug!("srocr iter {iterations}: w {w_try:.4} rejected ({:?}), delta -> {delta:.3e}", sol.status);
            if delta < 1e-6 {
                break;
            }
        }
    }
    result_from(x, objective, iterations, history, params.rank_tol)
}

/// What a recovered vector stands for.
#[derive(Debug, Clone, PartialEq)]
pub enum ExtractTarget {
    /// SBS beamformer under `‖w‖² ≤ p_max` and `w^H B w ≤ gamma`.
    Beamformer {
        p_max: f64,
        interference: HermitianMatrix,
        gamma: f64,
    },
    /// Homogenized phase vector `[e^{jα}; 1]`.
    Phases,
}

fn scale_into_budget(w: CVector, p_max: f64, interference: &HermitianMatrix, gamma: f64) -> CVector {
    let power = w.norm_squared();
    let leak = interference.quadratic_form(&w);
    let mut s: f64 = 1.0;
    if power > p_max {
        s = s.min((p_max / power).sqrt());
    }
    if leak > gamma {
        s = s.min((gamma / leak).sqrt());
    }
    if s < 1.0 {
        w * C64::new(s, 0.0)
    } else {
        w
    }
}

/// Unit-modulus `[e^{jα}; 1]` from any vector with nonzero last entry.
pub fn homogenize(v: &CVector) -> Result<CVector> {
    let last = *v
        .as_slice()
        .last()
        .ok_or_else(|| Error::Degenerate("empty phase vector".into()))?;
    if last.norm() == 0.0 {
        return Err(Error::Degenerate("homogenizing entry is zero".into()));
    }
    let angles = phases_of(v, last);
    let mut out = CVector::from_iterator(v.len(), angles.iter().map(|&a| cis(a)));
    out[v.len() - 1] = C64::new(1.0, 0.0);
    Ok(out)
}

fn phases_of(v: &CVector, last: C64) -> Vec<f64> {
    v.iter().map(|c| (c / last).arg()).collect()
}

/// `α_n = arg(x_n / x_{N+1})` for `n = 1..N`.
pub fn phases_from_vector(x: &CVector) -> Result<Vec<f64>> {
    let h = homogenize(x)?;
    Ok(h.iter().take(h.len() - 1).map(|c| c.arg()).collect())
}

pub fn extract_vector(x: &HermitianMatrix, target: &ExtractTarget, rank_tol: f64) -> Result<CVector> {
    let ratio = rank_one_ratio(x)?;
    if ratio < rank_tol {
        return Err(Error::NotRankOne { ratio, tol: rank_tol });
    }
    let (lambda, q) = principal_eigpair(x);
    match target {
        ExtractTarget::Beamformer { p_max, interference, gamma } => {
            let w = q * C64::new(lambda.max(0.0).sqrt(), 0.0);
            Ok(scale_into_budget(w, *p_max, interference, *gamma))
        }
        ExtractTarget::Phases => homogenize(&q),
    }
}

/// Principal direction of a relaxed beamformer solution, scaled into both budgets.
pub fn beamformer_fallback(x: &HermitianMatrix, p_max: f64, interference: &HermitianMatrix, gamma: f64) -> CVector {
    let (lambda, q) = principal_eigpair(x);
    scale_into_budget(q * C64::new(lambda.max(0.0).sqrt(), 0.0), p_max, interference, gamma)
}

/// Draws `ξ ~ CN(0, X)`, projects each onto `[e^{jα}; 1]` and keeps the
/// candidate with the best score; `score` returns `None` for infeasible points.
pub fn gaussian_randomization<R, F>(x: &HermitianMatrix, candidates: usize, rng: &mut R, mut score: F) -> Option<(CVector, f64)>
where
    R: Rng + ?Sized,
    F: FnMut(&CVector) -> Option<f64>,
{
    let n = x.dim();
    let eig = x.as_matrix().clone().symmetric_eigen();
    let root = CVector::from_iterator(n, eig.eigenvalues.iter().map(|&l| C64::new(l.max(0.0).sqrt(), 0.0)));
    let factor = &eig.eigenvectors * nalgebra::DMatrix::from_diagonal(&root);
    let mut best: Option<(CVector, f64)> = None;
    for _ in 0..candidates {
        let z = CVector::from_fn(n, |_, _| cscg(rng));
        let Ok(candidate) = homogenize(&(&factor * z)) else {
            continue;
        };
        if let Some(value) = score(&candidate) {
            if best.as_ref().is_none_or(|(_, b)| value > *b) {
                best = Some((candidate, value));
            }
        }
    }
    best
}
