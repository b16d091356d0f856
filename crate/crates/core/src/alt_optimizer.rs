//! Tilt selection, the two SDP subproblems and the alternating optimization
//! loop over the SBS beamformer and the RIS phases.

use std::f64::consts::TAU;

use log::{debug, warn};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel_model::{pbs_beamformer, stream, substream, ChannelSet};
use crate::error::{Error, Result};
use crate::linalg::{CMatrix, CVector, C64};
use crate::link_metrics::{effective_su_row, sbs_gains, se_su, sinr_su, DesignState, FeasibilityReport, FEASIBILITY_SLACK};
use crate::scenario::{Scenario, ANGLE_MAX_DEG, ANGLE_MIN_DEG};
use crate::sdp::{solve, HermitianMatrix, Relation, SdpProblem, SdpStatus, SolverOptions};
use crate::srocr::{beamformer_fallback, extract_vector, gaussian_randomization, phases_from_vector, refine, ExtractTarget, SrocrParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TiltMode {
    /// Expected-power comparison `σ²` vs `σ⁴N`.
    #[default]
    Analytic,
    /// Instantaneous comparison of direct and cascaded received power.
    Instance,
    /// Exhaustive search of the received-power objective over the tilt grid.
    Grid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhaseInit {
    #[default]
    Random,
    Zero,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizerParams {
    pub epsilon: f64,
    pub max_outer_iters: usize,
    pub srocr: SrocrParams,
    pub tilt_mode: TiltMode,
    pub tilt_grid_deg: f64,
    pub phase_init_mode: PhaseInit,
    pub solver: SolverOptions,
    /// Candidates drawn when phase recovery falls back to randomization.
    pub randomization_candidates: usize,
}

impl Default for OptimizerParams {
    fn default() -> Self {
        Self {
            epsilon: 1e-3,
            max_outer_iters: 20,
            srocr: SrocrParams::default(),
            tilt_mode: TiltMode::Analytic,
            tilt_grid_deg: 1.0,
            phase_init_mode: PhaseInit::Random,
            solver: SolverOptions::default(),
            randomization_candidates: 200,
        }
    }
}

impl OptimizerParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) {
            return Err(Error::Config(format!("epsilon must be > 0, got {}", self.epsilon)));
        }
        if !(self.tilt_grid_deg > 0.0) || !self.tilt_grid_deg.is_finite() {
            return Err(Error::Config(format!("tilt_grid_deg must be > 0, got {}", self.tilt_grid_deg)));
        }
        if self.max_outer_iters == 0 {
            return Err(Error::Config("max_outer_iters must be >= 1".into()));
        }
        self.srocr.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TiltBranch {
    Direct,
    Ris,
    Grid,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum TiltComparator {
    Expectation { direct: f64, cascade: f64 },
    Instance { direct: f64, cascade: f64 },
    Grid { step_deg: f64, objective: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TiltDecision {
    pub theta_tilt_deg: f64,
    pub branch: TiltBranch,
    pub comparator: TiltComparator,
}

/// `σ² ‖w_s‖²`.
pub fn expected_direct_power(w_s: &CVector, sigma2: f64) -> f64 {
    sigma2 * w_s.norm_squared()
}

/// `σ⁴ N ‖w_s‖²`.
pub fn expected_cascade_power(w_s: &CVector, sigma2: f64, n_ris: usize) -> f64 {
    sigma2 * sigma2 * n_ris as f64 * w_s.norm_squared()
}

fn branch_decision(scenario: &Scenario, direct: f64, cascade: f64) -> Result<(f64, TiltBranch)> {
    let angles = scenario.sbs_angles()?;
    Ok(if cascade >= direct {
        (angles.theta_r_deg, TiltBranch::Ris)
    } else {
        (angles.theta_d_deg, TiltBranch::Direct)
    })
}

/// Tilt grid `-180, -180 + step, ..., 0` (the end point is always included).
pub fn tilt_grid(step_deg: f64) -> Vec<f64> {
    let count = ((ANGLE_MAX_DEG - ANGLE_MIN_DEG) / step_deg).floor() as usize;
    let mut grid: Vec<f64> = (0..=count).map(|k| ANGLE_MIN_DEG + k as f64 * step_deg).collect();
    if grid.last().is_some_and(|&t| t < ANGLE_MAX_DEG - 1e-9) {
        grid.push(ANGLE_MAX_DEG);
    }
    grid
}

/// `|a(θ) w_s|²` with the given state, or `P ‖a(θ)‖²` (MRT) without one.
pub fn received_power_at_tilt(
    scenario: &Scenario,
    channels: &ChannelSet,
    phases: &[f64],
    w_s: Option<&CVector>,
    theta_tilt_deg: f64,
) -> Result<f64> {
    let probe = DesignState::new(
        w_s.cloned().unwrap_or_else(|| CVector::zeros(channels.n_s())),
        phases.to_vec(),
        theta_tilt_deg,
    );
    let a = effective_su_row(&probe, channels, scenario)?;
    Ok(match w_s {
        Some(w) => (a * w)[(0, 0)].norm_sqr(),
        None => scenario.p_max_watts() * a.norm_squared(),
    })
}

pub fn select_tilt(
    scenario: &Scenario,
    mode: TiltMode,
    state: Option<&DesignState>,
    channels: Option<&ChannelSet>,
    grid_step_deg: f64,
) -> Result<TiltDecision> {
    match mode {
        TiltMode::Analytic => {
            let unit = CVector::from_element(1, C64::new(1.0, 0.0));
            let sigma2 = scenario.channel.channel_sigma2;
            let direct = expected_direct_power(&unit, sigma2);
            let cascade = expected_cascade_power(&unit, sigma2, scenario.n_ris);
            let (theta, branch) = branch_decision(scenario, direct, cascade)?;
            Ok(TiltDecision {
                theta_tilt_deg: theta,
                branch,
                comparator: TiltComparator::Expectation { direct, cascade },
            })
        }
        TiltMode::Instance => {
            let (state, channels) = state
                .zip(channels)
                .ok_or_else(|| Error::Config("instance tilt mode needs a state and channels".into()))?;
            let direct = channels.h_s.dotc(&state.w_s).norm_sqr();
            let cascade = if channels.n_ris() == 0 {
                0.0
            } else {
                (crate::link_metrics::cascade_row(&channels.u, &state.phases, channels) * &state.w_s)[(0, 0)].norm_sqr()
            };
            let (theta, branch) = branch_decision(scenario, direct, cascade)?;
            Ok(TiltDecision {
                theta_tilt_deg: theta,
                branch,
                comparator: TiltComparator::Instance { direct, cascade },
            })
        }
        TiltMode::Grid => {
            let channels = channels.ok_or_else(|| Error::Config("grid tilt mode needs channels".into()))?;
            if !(grid_step_deg > 0.0) {
                return Err(Error::Config(format!("tilt grid step must be > 0, got {grid_step_deg}")));
            }
            let phases = state.map_or_else(|| vec![0.0; channels.n_ris()], |s| s.phases.clone());
            let w = state.map(|s| &s.w_s);
            let mut best = (f64::NAN, f64::NEG_INFINITY);
            for theta in tilt_grid(grid_step_deg) {
                let value = received_power_at_tilt(scenario, channels, &phases, w, theta)?;
                if value > best.1 {
                    best = (theta, value);
                }
            }
            Ok(TiltDecision {
                theta_tilt_deg: best.0,
                branch: TiltBranch::Grid,
                comparator: TiltComparator::Grid {
                    step_deg: grid_step_deg,
                    objective: best.1,
                },
            })
        }
    }
}

fn row_outer(row: &crate::linalg::CRow) -> HermitianMatrix {
    HermitianMatrix::outer(&row.adjoint())
}

/// Lifted beamformer problem: maximize `tr(a^H a W)` subject to
/// `tr(b^H b W) ≤ Γ` and `tr(W) ≤ P`, in that constraint order.
pub fn build_ws_problem(phases: &[f64], theta_tilt_deg: f64, channels: &ChannelSet, scenario: &Scenario) -> Result<SdpProblem> {
    let probe = DesignState::new(CVector::zeros(channels.n_s()), phases.to_vec(), theta_tilt_deg);
    let a = effective_su_row(&probe, channels, scenario)?;
    let b = crate::link_metrics::effective_pu_row(&probe, channels, scenario)?;
    let n = channels.n_s();
    Ok(SdpProblem::new(row_outer(&a))
        .with(row_outer(&b), Relation::Le, scenario.gamma_w)
        .with(HermitianMatrix::identity(n), Relation::Le, scenario.p_max_watts()))
}

/// Lifted phase problem over `X = x x^H`, `x = [e^{jα}; 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseProblem {
    /// Objective `H1`; constraints `tr(H2 X) ≤ Γ - l2` then `X_kk = 1`.
    pub sdp: SdpProblem,
    pub h1: HermitianMatrix,
    pub h2: HermitianMatrix,
    pub l1: f64,
    pub l2: f64,
}

impl PhaseProblem {
    /// `l1 + x^H H1 x`.
    pub fn objective_at(&self, x: &CVector) -> f64 {
        self.l1 + self.h1.quadratic_form(x)
    }

    /// `l2 + x^H H2 x`.
    pub fn interference_at(&self, x: &CVector) -> f64 {
        self.l2 + self.h2.quadratic_form(x)
    }
}

/// `g g^H` with the bottom-right entry removed, and that entry.
fn phase_block(ris_side: &CVector, gain_r: f64, direct_term: C64, p: &CVector) -> (HermitianMatrix, f64) {
    let n = p.len();
    let sr = gain_r.sqrt();
    let mut g = CVector::zeros(n + 1);
    for k in 0..n {
        g[k] = ris_side[k] * p[k].conj() * sr;
    }
    g[n] = direct_term.conj();
    let mut full: CMatrix = &g * g.adjoint();
    let l = full[(n, n)].re;
    full[(n, n)] = C64::new(0.0, 0.0);
    (HermitianMatrix::new(full).expect("outer product is Hermitian"), l)
}

pub fn build_phase_problem(w_s: &CVector, theta_tilt_deg: f64, channels: &ChannelSet, scenario: &Scenario) -> Result<PhaseProblem> {
    channels.check_dims(channels.n_ris(), w_s.len(), channels.n_p())?;
    if w_s.len() != channels.n_s() {
        return Err(Error::Dimension(format!("w_s has length {}, expected {}", w_s.len(), channels.n_s())));
    }
    let n = channels.n_ris();
    let gains = sbs_gains(scenario, theta_tilt_deg, None)?;
    let p = &channels.g * w_s;
    let c_d = channels.h_s.dotc(w_s) * gains.su.sqrt();
    let c_i = channels.f_p.dotc(w_s) * gains.pu.sqrt();
    let (h1, l1) = phase_block(&channels.u, gains.ris, c_d, &p);
    let (h2, l2) = phase_block(&channels.v, gains.ris, c_i, &p);
    let mut sdp = SdpProblem::new(h1.clone()).with(h2.clone(), Relation::Le, scenario.gamma_w - l2);
    for k in 0..=n {
        sdp.push(HermitianMatrix::unit_diagonal(n + 1, k), Relation::Eq, 1.0);
    }
    Ok(PhaseProblem { sdp, h1, h2, l1, l2 })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Recovery {
    Srocr,
    Fallback,
    /// Relaxed solve failed; the previous value was kept.
    Unsolved,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubproblemReport {
    pub status: SdpStatus,
    /// Relaxed optimum including any constant term.
    pub sdp_objective: f64,
    /// Objective of the recovered rank-one point.
    pub recovered_objective: f64,
    pub rank_one_ratio: f64,
    pub srocr_iterations: usize,
    pub recovery: Recovery,
    pub accepted: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterationReport {
    pub beamformer: SubproblemReport,
    pub phases: Option<SubproblemReport>,
    pub se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptimizerResult {
    pub state: DesignState,
    pub se: f64,
    pub se_trace: Vec<f64>,
    pub outer_iterations: usize,
    pub feasibility: FeasibilityReport,
    pub tilt: TiltDecision,
    pub iterations: Vec<IterationReport>,
}

/// Knobs used by the baselines on top of the full algorithm.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunOptions {
    pub initial_phases: Option<Vec<f64>>,
    pub fixed_tilt_deg: Option<f64>,
    /// Keep the phases at their initial value and optimize only `w_s`.
    pub freeze_phases: bool,
}

pub fn initial_phases(n_ris: usize, mode: PhaseInit, seed: u64) -> Vec<f64> {
    match mode {
        PhaseInit::Zero => vec![0.0; n_ris],
        PhaseInit::Random => {
            let mut rng = substream(seed, stream::PHASE_INIT);
            (0..n_ris).map(|_| rng.random_range(0.0..TAU)).collect()
        }
    }
}

pub fn run_algorithm1(channels: &ChannelSet, scenario: &Scenario, params: &OptimizerParams, seed: u64) -> Result<OptimizerResult> {
    run_with(channels, scenario, params, seed, &RunOptions::default())
}

struct Evaluator<'a> {
    channels: &'a ChannelSet,
    scenario: &'a Scenario,
    w_p: CVector,
}

impl Evaluator<'_> {
    fn se(&self, state: &DesignState) -> Result<f64> {
        Ok(se_su(sinr_su(state, self.channels, &self.w_p, self.scenario)?))
    }

    fn feasible(&self, state: &DesignState) -> Result<bool> {
        Ok(FeasibilityReport::evaluate(state, self.channels, self.scenario)?.is_feasible())
    }
}

fn beamformer_step(
    eval: &Evaluator,
    state: &DesignState,
    params: &OptimizerParams,
) -> Result<(Option<CVector>, SubproblemReport)> {
    let problem = build_ws_problem(&state.phases, state.theta_tilt_deg, eval.channels, eval.scenario)?;
    let relaxed = solve(&problem, &params.solver)?;
    let mut report = SubproblemReport {
        status: relaxed.status,
        sdp_objective: relaxed.objective,
        recovered_objective: 0.0,
        rank_one_ratio: 0.0,
        srocr_iterations: 0,
        recovery: Recovery::Unsolved,
        accepted: false,
    };
    if !relaxed.is_optimal() {
        warn!("beamformer SDP ended with {:?}", relaxed.status);
        return Ok((None, report));
    }
    let interference = problem.constraints[0].a.clone();
    let (p_max, gamma) = (eval.scenario.p_max_watts(), eval.scenario.gamma_w);
    let w = if relaxed.x.trace() <= 0.0 {
        report.recovery = Recovery::Srocr;
        report.rank_one_ratio = 1.0;
        CVector::zeros(problem.dim())
    } else {
        let refined = refine(&problem, &relaxed, &params.srocr, &params.solver)?;
        report.rank_one_ratio = refined.ratio;
        report.srocr_iterations = refined.iterations;
        let target = ExtractTarget::Beamformer { p_max, interference: interference.clone(), gamma };
        match extract_vector(&refined.x, &target, params.srocr.rank_tol) {
            Ok(w) => {
                report.recovery = Recovery::Srocr;
                w
            }
            Err(_) => {
                report.recovery = Recovery::Fallback;
                beamformer_fallback(&relaxed.x, p_max, &interference, gamma)
            }
        }
    };
    report.recovered_objective = problem.objective.quadratic_form(&w);
    Ok((Some(w), report))
}

/// Relative size below which the anchor coordinate counts as decoupled.
const DECOUPLED_TOL: f64 = 1e-10;

impl PhaseProblem {
    /// With the direct links attenuated to nothing, the last row and column of
    /// `H1`/`H2` vanish and a common rotation of all phases is free; the lifted
    /// problem is then posed over the `N` phase entries alone.
    pub fn reduced(&self) -> Option<SdpProblem> {
        let n = self.h1.dim() - 1;
        if n == 0 {
            return None;
        }
        let coupling = |h: &HermitianMatrix| {
            let m = h.as_matrix();
            (0..n).map(|k| m[(k, n)].norm()).fold(0.0, f64::max)
        };
        let scale = self.h1.frobenius_norm().max(self.h2.frobenius_norm());
        if !(scale > 0.0) || coupling(&self.h1).max(coupling(&self.h2)) > DECOUPLED_TOL * scale {
            return None;
        }
        let block = |h: &HermitianMatrix| HermitianMatrix::new(h.as_matrix().view((0, 0), (n, n)).into_owned()).expect("principal block of a Hermitian matrix");
        let mut sdp = SdpProblem::new(block(&self.h1)).with(block(&self.h2), Relation::Le, self.sdp.constraints[0].b);
        for k in 0..n {
            sdp.push(HermitianMatrix::unit_diagonal(n, k), Relation::Eq, 1.0);
        }
        Some(sdp)
    }
}

fn anchored(x: CVector) -> CVector {
    let n = x.len();
    x.push(C64::new(1.0, 0.0)).rows(0, n + 1).into_owned()
}

fn phase_step<R: Rng>(
    eval: &Evaluator,
    state: &DesignState,
    params: &OptimizerParams,
    rng: &mut R,
) -> Result<(Option<Vec<f64>>, SubproblemReport)> {
    let problem = build_phase_problem(&state.w_s, state.theta_tilt_deg, eval.channels, eval.scenario)?;
    let reduced = problem.reduced();
    let sdp = reduced.as_ref().unwrap_or(&problem.sdp);
    let lift = |x: CVector| if reduced.is_some() { anchored(x) } else { x };
    let relaxed = solve(sdp, &params.solver)?;
    let mut report = SubproblemReport {
        status: relaxed.status,
        sdp_objective: problem.l1 + relaxed.objective,
        recovered_objective: 0.0,
        rank_one_ratio: 0.0,
        srocr_iterations: 0,
        recovery: Recovery::Unsolved,
        accepted: false,
    };
    if !relaxed.is_optimal() {
        warn!("phase SDP ended with {:?}", relaxed.status);
        return Ok((None, report));
    }
    let refined = refine(sdp, &relaxed, &params.srocr, &params.solver)?;
    report.rank_one_ratio = refined.ratio;
    report.srocr_iterations = refined.iterations;
    let x = match extract_vector(&refined.x, &ExtractTarget::Phases, params.srocr.rank_tol) {
        Ok(x) => {
            report.recovery = Recovery::Srocr;
            Some(lift(x))
        }
        Err(_) => {
            report.recovery = Recovery::Fallback;
            let budget = eval.scenario.gamma_w * (1.0 + FEASIBILITY_SLACK);
            gaussian_randomization(&relaxed.x, params.randomization_candidates, rng, |x| {
                let x = lift(x.clone());
                (problem.interference_at(&x) <= budget).then(|| problem.objective_at(&x))
            })
            .map(|(x, _)| lift(x))
        }
    };
    let Some(x) = x else {
        return Ok((None, report));
    };
    report.recovered_objective = problem.objective_at(&x);
    Ok((Some(phases_from_vector(&x)?), report))
}

/// Alternating optimization with baseline overrides.
pub fn run_with(
    channels: &ChannelSet,
    scenario: &Scenario,
    params: &OptimizerParams,
    seed: u64,
    options: &RunOptions,
) -> Result<OptimizerResult> {
    params.validate()?;
    scenario.validate()?;
    channels.check_dims(scenario.n_ris, scenario.n_s, scenario.n_p)?;
    let n = channels.n_ris();
    let phases = match &options.initial_phases {
        Some(p) if p.len() == n => p.clone(),
        Some(p) => {
            return Err(Error::Dimension(format!("{} initial phases for N = {n}", p.len())));
        }
        None => initial_phases(n, params.phase_init_mode, seed),
    };
    let eval = Evaluator {
        channels,
        scenario,
        w_p: pbs_beamformer(&channels.h_p, scenario.pp_dbw)?.w_p,
    };
    let tilt = match options.fixed_tilt_deg {
        Some(theta) => {
            if !(ANGLE_MIN_DEG..=ANGLE_MAX_DEG).contains(&theta) {
                return Err(Error::Config(format!("fixed tilt {theta} outside [-180, 0] degrees")));
            }
            TiltDecision {
                theta_tilt_deg: theta,
                branch: TiltBranch::Grid,
                comparator: TiltComparator::Grid { step_deg: 0.0, objective: f64::NAN },
            }
        }
        None => {
            let probe_w = CVector::from_element(channels.n_s(), C64::new((scenario.p_max_watts() / channels.n_s() as f64).sqrt(), 0.0));
            let probe = DesignState::new(probe_w, phases.clone(), 0.0);
            select_tilt(scenario, params.tilt_mode, Some(&probe), Some(channels), params.tilt_grid_deg)?
        }
    };
    let mut state = DesignState::new(CVector::zeros(channels.n_s()), phases, tilt.theta_tilt_deg);
    let alternating = n > 0 && !options.freeze_phases;
    let mut rng = substream(seed, stream::RANDOMIZATION);
    let mut se_current = eval.se(&state)?;
    let mut se_trace = Vec::new();
    let mut reports = Vec::new();

    for t in 1..=params.max_outer_iters {
        let (w, mut bf_report) = beamformer_step(&eval, &state, params)?;
        if let Some(w) = w {
            let candidate = DesignState { w_s: w, ..state.clone() };
            let se = eval.se(&candidate)?;
            if se >= se_current && eval.feasible(&candidate)? {
                bf_report.accepted = true;
                state = candidate;
                se_current = se;
            }
        }
        let mut ph_report = None;
        if alternating {
            let (phases, mut report) = phase_step(&eval, &state, params, &mut rng)?;
            if let Some(phases) = phases {
                let candidate = DesignState { phases, ..state.clone() };
                let se = eval.se(&candidate)?;
                if se >= se_current && eval.feasible(&candidate)? {
                    report.accepted = true;
                    state = candidate;
                    se_current = se;
                }
            }
            ph_report = Some(report);
        }
        let se_prev = se_trace.last().copied();
        se_trace.push(se_current);
        reports.push(IterationReport {
            beamformer: bf_report,
            phases: ph_report,
            se: se_current,
        });
        debug!("outer iteration {t}: SE {se_current:.6}");
        if se_current == 0.0 || !alternating {
            break;
        }
        if let Some(prev) = se_prev {
            if (se_current - prev) / se_current < params.epsilon {
                break;
            }
        }
    }

    let feasibility = FeasibilityReport::evaluate(&state, channels, scenario)?;
    Ok(OptimizerResult {
        se: se_current,
        outer_iterations: se_trace.len(),
        se_trace,
        feasibility,
        tilt,
        iterations: reports,
        state,
    })
}
