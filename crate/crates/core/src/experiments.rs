//! Monte Carlo sweeps over tilt, RIS size and SBS power, with the baseline
//! methods and CSV output.

use std::fmt;
use std::io::Write;
use std::path::Path;

use log::info;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::alt_optimizer::{initial_phases, run_with, OptimizerParams, PhaseInit, RunOptions};
use crate::channel_model::{generate_channels, ChannelSet};
use crate::error::{Error, Result};
use crate::scenario::Scenario;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepKind {
    Tilt,
    Elements,
    Power,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Proposed,
    RandomPhase,
    FixedZeroPhase,
    NoRis,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Proposed, Method::RandomPhase, Method::FixedZeroPhase, Method::NoRis];

    pub fn name(self) -> &'static str {
        match self {
            Method::Proposed => "proposed",
            Method::RandomPhase => "random_phase",
            Method::FixedZeroPhase => "fixed_zero_phase",
            Method::NoRis => "no_ris",
        }
    }
}

impl fmt::Display for SweepKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SweepKind::Tilt => "tilt",
            SweepKind::Elements => "elements",
            SweepKind::Power => "power",
        })
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

fn default_trials() -> usize {
    200
}

fn default_methods() -> Vec<Method> {
    Method::ALL.to_vec()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub kind: SweepKind,
    /// Degrees for tilt, element counts for elements, dBW for power.
    pub grid: Vec<f64>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default = "default_methods")]
    pub methods: Vec<Method>,
    /// Partial scenario document merged over the base scenario.
    #[serde(default)]
    pub overrides: Map<String, Value>,
    #[serde(default)]
    pub optimizer: OptimizerParams,
}

impl SweepSpec {
    pub fn from_json_str(text: &str) -> Result<Self> {
        let spec: SweepSpec = serde_json::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.grid.is_empty() {
            return Err(Error::Config("sweep grid is empty".into()));
        }
        if self.trials == 0 {
            return Err(Error::Config("sweep trials must be >= 1".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::Config("sweep needs at least one method".into()));
        }
        if let Some(g) = self.grid.iter().find(|g| !g.is_finite()) {
            return Err(Error::Config(format!("grid value {g} is not finite")));
        }
        if self.kind == SweepKind::Elements {
            if let Some(g) = self.grid.iter().find(|g| **g < 0.0 || g.fract() != 0.0) {
                return Err(Error::Config(format!("element count {g} is not a non-negative integer")));
            }
        }
        self.optimizer.validate()
    }

    /// Base scenario with the overrides applied.
    pub fn scenario(&self, base: &Scenario) -> Result<Scenario> {
        apply_overrides(base, &self.overrides)
    }
}

fn merge(target: &mut Value, patch: &Value) {
    match (target, patch) {
        (Value::Object(t), Value::Object(p)) => {
            for (k, v) in p {
                merge(t.entry(k.clone()).or_insert(Value::Null), v);
            }
        }
        (t, p) => *t = p.clone(),
    }
}

pub fn apply_overrides(base: &Scenario, overrides: &Map<String, Value>) -> Result<Scenario> {
    let mut doc = serde_json::to_value(base)?;
    merge(&mut doc, &Value::Object(overrides.clone()));
    let scenario: Scenario = serde_json::from_value(doc)?;
    scenario.validate()?;
    Ok(scenario)
}

/// Scenario and fixed tilt for one grid point.
pub fn cell_scenario(kind: SweepKind, base: &Scenario, value: f64) -> Result<(Scenario, Option<f64>)> {
    let mut s = base.clone();
    let tilt = match kind {
        SweepKind::Tilt => Some(value),
        SweepKind::Elements => {
            s.n_ris = value as usize;
            None
        }
        SweepKind::Power => {
            s.p_max_dbw = value;
            None
        }
    };
    s.validate()?;
    Ok((s, tilt))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrialOutcome {
    pub se: f64,
    pub outer_iterations: usize,
    pub feasible: bool,
    pub theta_tilt_deg: f64,
}

/// One method on an already drawn channel set.
pub fn run_method(
    channels: &ChannelSet,
    scenario: &Scenario,
    method: Method,
    seed: u64,
    fixed_tilt_deg: Option<f64>,
    params: &OptimizerParams,
) -> Result<TrialOutcome> {
    let n = scenario.n_ris;
    let result = match method {
        Method::Proposed => run_with(channels, scenario, params, seed, &RunOptions { fixed_tilt_deg, ..Default::default() })?,
        Method::RandomPhase | Method::FixedZeroPhase => {
            let mode = if method == Method::RandomPhase { PhaseInit::Random } else { PhaseInit::Zero };
            let options = RunOptions {
                initial_phases: Some(initial_phases(n, mode, seed)),
                fixed_tilt_deg,
                freeze_phases: true,
            };
            run_with(channels, scenario, params, seed, &options)?
        }
        Method::NoRis => {
            let bare = Scenario { n_ris: 0, ..scenario.clone() };
            let tilt = match fixed_tilt_deg {
                Some(t) => t,
                None => bare.sbs_angles()?.theta_d_deg,
            };
            let options = RunOptions { fixed_tilt_deg: Some(tilt), ..Default::default() };
            run_with(&channels.without_ris(), &bare, params, seed, &options)?
        }
    };
    Ok(TrialOutcome {
        se: result.se,
        outer_iterations: result.outer_iterations,
        feasible: result.feasibility.is_feasible(),
        theta_tilt_deg: result.state.theta_tilt_deg,
    })
}

/// Draws the channels for `seed` and runs one method.
pub fn run_trial(
    scenario: &Scenario,
    method: Method,
    seed: u64,
    fixed_tilt_deg: Option<f64>,
    params: &OptimizerParams,
) -> Result<TrialOutcome> {
    let channels = generate_channels(scenario, &scenario.derive_geometry()?, seed)?;
    run_method(&channels, scenario, method, seed, fixed_tilt_deg, params)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrialRecord {
    pub grid_value: f64,
    pub method: Method,
    pub trial: usize,
    pub seed: u64,
    pub outcome: TrialOutcome,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub sweep_kind: SweepKind,
    pub grid_value: f64,
    pub method: Method,
    pub trials: usize,
    pub mean_se_bps_hz: f64,
    pub std_se: f64,
    pub mean_outer_iters: f64,
    pub violations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    pub kind: SweepKind,
    /// Grid-major, then in the spec's method order.
    pub rows: Vec<SweepRow>,
    pub records: Vec<TrialRecord>,
}

impl SweepResult {
    pub fn row(&self, grid_value: f64, method: Method) -> Option<&SweepRow> {
        self.rows.iter().find(|r| r.grid_value == grid_value && r.method == method)
    }

    /// Mean SE per grid value for one method, in grid order.
    pub fn curve(&self, method: Method) -> Vec<(f64, f64)> {
        self.rows
            .iter()
            .filter(|r| r.method == method)
            .map(|r| (r.grid_value, r.mean_se_bps_hz))
            .collect()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "sweep_kind",
            "grid_value",
            "method",
            "trials",
            "mean_se_bps_hz",
            "std_se",
            "mean_outer_iters",
            "violations",
        ])?;
        for r in &self.rows {
            w.write_record([
                r.sweep_kind.to_string(),
                r.grid_value.to_string(),
                r.method.to_string(),
                r.trials.to_string(),
                r.mean_se_bps_hz.to_string(),
                r.std_se.to_string(),
                r.mean_outer_iters.to_string(),
                r.violations.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(String::from_utf8(buf).expect("csv output is utf-8"))
    }
}

fn summarize(kind: SweepKind, grid_value: f64, method: Method, outcomes: &[TrialOutcome]) -> SweepRow {
    let n = outcomes.len();
    let mean = outcomes.iter().map(|o| o.se).sum::<f64>() / n as f64;
    let var = if n > 1 {
        outcomes.iter().map(|o| (o.se - mean).powi(2)).sum::<f64>() / (n - 1) as f64
    } else {
        0.0
    };
    SweepRow {
        sweep_kind: kind,
        grid_value,
        method,
        trials: n,
        mean_se_bps_hz: mean,
        std_se: var.sqrt(),
        mean_outer_iters: outcomes.iter().map(|o| o.outer_iterations as f64).sum::<f64>() / n as f64,
        violations: outcomes.iter().filter(|o| !o.feasible).count(),
    }
}

fn run_cell(spec: &SweepSpec, scenario: &Scenario, grid_value: f64, tilt: Option<f64>, trial: usize) -> Result<Vec<TrialOutcome>> {
    let seed = spec.base_seed.wrapping_add(trial as u64);
    let wrap = |method: Method, e: Error| Error::Trial {
        grid_value,
        method: method.to_string(),
        seed,
        source: Box::new(e),
    };
    let channels = generate_channels(scenario, &scenario.derive_geometry()?, seed).map_err(|e| wrap(spec.methods[0], e))?;
    spec.methods
        .iter()
        .map(|&m| run_method(&channels, scenario, m, seed, tilt, &spec.optimizer).map_err(|e| wrap(m, e)))
        .collect()
}

/// Runs every (grid value, trial) cell on `workers` threads; the result does
/// not depend on the worker count.
pub fn run_sweep(spec: &SweepSpec, base: &Scenario, workers: usize) -> Result<SweepResult> {
    spec.validate()?;
    let scenario = spec.scenario(base)?;
    let cells: Vec<(f64, Scenario, Option<f64>)> = spec
        .grid
        .iter()
        .map(|&g| cell_scenario(spec.kind, &scenario, g).map(|(s, t)| (g, s, t)))
        .collect::<Result<_>>()?;
    let jobs: Vec<(usize, usize)> = (0..cells.len()).flat_map(|c| (0..spec.trials).map(move |t| (c, t))).collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    info!("{} sweep: {} cells x {} trials x {} methods", spec.kind, cells.len(), spec.trials, spec.methods.len());
    let outcomes: Vec<Result<Vec<TrialOutcome>>> = pool.install(|| {
        jobs.par_iter()
            .map(|&(c, t)| {
                let (g, s, tilt) = &cells[c];
                run_cell(spec, s, *g, *tilt, t)
            })
            .collect()
    });

    let mut records = Vec::with_capacity(jobs.len() * spec.methods.len());
    for (&(c, t), outcome) in jobs.iter().zip(outcomes) {
        let outcome = outcome?;
        for (&method, o) in spec.methods.iter().zip(outcome) {
            records.push(TrialRecord {
                grid_value: cells[c].0,
                method,
                trial: t,
                seed: spec.base_seed.wrapping_add(t as u64),
                outcome: o,
            });
        }
    }
    let mut rows = Vec::new();
    for &(g, _, _) in &cells {
        for &method in &spec.methods {
            let outs: Vec<TrialOutcome> = records
                .iter()
                .filter(|r| r.grid_value == g && r.method == method)
                .map(|r| r.outcome)
                .collect();
            rows.push(summarize(spec.kind, g, method, &outs));
        }
    }
    Ok(SweepResult { kind: spec.kind, rows, records })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel_model::ChannelGeneration;
    use approx::assert_relative_eq;

    fn small_spec(kind: SweepKind, grid: Vec<f64>) -> SweepSpec {
        SweepSpec {
            kind,
            grid,
            trials: 2,
            base_seed: 7,
            methods: Method::ALL.to_vec(),
            overrides: serde_json::from_str(r#"{"n_ris": 4, "channel": {"generation": "iid"}}"#).unwrap(),
            optimizer: OptimizerParams::default(),
        }
    }

    #[test]
    fn overrides_merge_nested_fields() {
        let spec = small_spec(SweepKind::Power, vec![0.0]);
        let s = spec.scenario(&Scenario::reference_default()).unwrap();
        assert_eq!(s.n_ris, 4);
        assert_eq!(s.channel.generation, ChannelGeneration::Iid);
        assert_eq!(s.channel.rician_k, 1.0);
        let bad: Map<String, Value> = serde_json::from_str(r#"{"n_riss": 4}"#).unwrap();
        assert!(apply_overrides(&Scenario::reference_default(), &bad).is_err());
    }

    #[test]
    fn spec_validation() {
        let mut spec = small_spec(SweepKind::Elements, vec![]);
        assert!(spec.validate().is_err());
        spec.grid = vec![2.5];
        assert!(spec.validate().is_err());
        spec.grid = vec![2.0];
        spec.trials = 0;
        assert!(spec.validate().is_err());
        let parsed = SweepSpec::from_json_str(r#"{"kind": "tilt", "grid": [-30]}"#).unwrap();
        assert_eq!((parsed.trials, parsed.methods.len()), (200, 4));
        assert!(SweepSpec::from_json_str(r#"{"kind": "tilt", "grid": [-30], "trails": 3}"#).is_err());
    }

    #[test]
    fn trial_is_deterministic() {
        let s = small_spec(SweepKind::Power, vec![0.0]).scenario(&Scenario::reference_default()).unwrap();
        let p = OptimizerParams::default();
        let a = run_trial(&s, Method::Proposed, 3, None, &p).unwrap();
        let b = run_trial(&s, Method::Proposed, 3, None, &p).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn no_ris_uses_direct_tilt() {
        let s = small_spec(SweepKind::Power, vec![0.0]).scenario(&Scenario::reference_default()).unwrap();
        let o = run_trial(&s, Method::NoRis, 1, None, &OptimizerParams::default()).unwrap();
        assert_eq!(o.theta_tilt_deg, -80.0);
        assert_eq!(o.outer_iterations, 1);
    }

    #[test]
    fn sweep_rows_and_csv_layout() {
        let spec = small_spec(SweepKind::Elements, vec![2.0, 4.0]);
        let r = run_sweep(&spec, &Scenario::reference_default(), 2).unwrap();
        assert_eq!(r.rows.len(), 8);
        assert_eq!(r.records.len(), 16);
        assert!(r.rows.iter().all(|row| row.trials == 2 && row.violations == 0));
        let csv = r.to_csv_string().unwrap();
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), "sweep_kind,grid_value,method,trials,mean_se_bps_hz,std_se,mean_outer_iters,violations");
        assert!(lines.next().unwrap().starts_with("elements,2,proposed,2,"));
        let row = r.row(4.0, Method::NoRis).unwrap();
        let ses: Vec<f64> = r.records.iter().filter(|x| x.grid_value == 4.0 && x.method == Method::NoRis).map(|x| x.outcome.se).collect();
        assert_relative_eq!(row.mean_se_bps_hz, (ses[0] + ses[1]) / 2.0, max_relative = 1e-12);
    }

    #[test]
    fn summary_statistics() {
        let o = |se| TrialOutcome { se, outer_iterations: 2, feasible: true, theta_tilt_deg: -30.0 };
        let row = summarize(SweepKind::Tilt, -30.0, Method::Proposed, &[o(1.0), o(2.0), o(3.0)]);
        assert_eq!(row.mean_se_bps_hz, 2.0);
        assert_eq!(row.std_se, 1.0);
        assert_eq!(row.mean_outer_iters, 2.0);
        assert_eq!(summarize(SweepKind::Tilt, 0.0, Method::Proposed, &[o(1.0)]).std_se, 0.0);
    }
}
