//! Reproducible experiment runs: a registry of named experiments, each turning an
//! [`ExperimentSpec`] into CSV tables and a JSON summary.

pub mod fit;
pub mod flows;
pub mod io;
pub mod orders;
pub mod transients;

use std::path::{Path, PathBuf};
use std::time::Instant;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::differencing::choose_h;
use crate::error::{Error, Result};
use crate::homoclinic::{assemble_homoclinic_for, HomoclinicConfig};
use crate::models::{self, fhn_from, reciprocal_from, Params, Toy, Q_END};
use crate::system::{validate_jacobians, JacobianReport, State};
use crate::transient::TransientConfig;

pub use fit::{fit_slope, SlopeFit};
pub use io::{Cell, Table};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepVariable {
    Eps,
    R,
    Dtau,
    H,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sweep {
    pub variable: SweepVariable,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Outputs {
    pub errors: bool,
    pub trajectories: bool,
    pub timings: bool,
}

impl Default for Outputs {
    fn default() -> Self {
        Self { errors: true, trajectories: true, timings: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub experiment: String,
    pub model: String,
    /// Overrides of the model parameters.
    pub params: Params,
    pub sweep: Option<Sweep>,
    pub eps: f64,
    pub r: f64,
    pub dtau: f64,
    /// Grid spacing; `None` picks the experiment's own rule.
    pub h: Option<f64>,
    pub outputs: Outputs,
    pub seed: u64,
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        models::entry(&self.model)?;
        for (name, v) in [("eps", self.eps), ("r", self.r), ("dtau", self.dtau)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::BadParams(format!("{name} must be positive, got {v}")));
            }
        }
        if let Some(h) = self.h {
            if !(h > 0.0 && h.is_finite()) {
                return Err(Error::BadParams(format!("h must be positive, got {h}")));
            }
        }
        if let Some(sw) = &self.sweep {
            if sw.values.is_empty() {
                return Err(Error::BadParams("empty sweep".into()));
            }
            if sw.values.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
                return Err(Error::BadParams("sweep values must be positive".into()));
            }
            let up = sw.values.windows(2).all(|w| w[0] < w[1]);
            let down = sw.values.windows(2).all(|w| w[0] > w[1]);
            if !(up || down) {
                return Err(Error::BadParams("sweep values must be sorted without repeats".into()));
            }
        }
        models::resolve_params(&self.model, &self.params)?;
        Ok(())
    }

    pub fn sweep_values(&self) -> &[f64] {
        self.sweep.as_ref().map_or(&[], |s| &s.values)
    }

    /// Model parameters with the overrides and the spec's `eps` applied.
    pub fn model_params(&self) -> Result<Params> {
        let mut p = self.params.clone();
        p.insert("eps".into(), self.eps);
        models::resolve_params(&self.model, &p)
    }
}

/// Static description of a registered experiment.
#[derive(Debug, Clone)]
pub struct ExperimentInfo {
    pub name: &'static str,
    pub model: &'static str,
    pub description: &'static str,
    pub sweep: Option<(SweepVariable, &'static [f64])>,
    pub eps: f64,
    pub r: f64,
    pub dtau: f64,
    pub h: Option<f64>,
}

type Body = fn(&ExperimentSpec, &mut Artifacts) -> Result<()>;

struct Registered {
    info: ExperimentInfo,
    body: Body,
}

const ORDER_EPS: &[f64] = &[1e-2, 3e-3, 1e-3, 3e-4, 1e-4];

fn registered() -> Vec<Registered> {
    let info = |name, model, description, sweep, eps, r, dtau, h| ExperimentInfo { name, model, description, sweep, eps, r, dtau, h };
    vec![
        Registered {
            info: info("toy-eta-order", "toy", "manifold error against eps with h = eps, both difference variants", Some((SweepVariable::Eps, ORDER_EPS)), 1e-3, 0.1, 0.5, None),
            body: toy_eta_order,
        },
        Registered {
            info: info("toy-phi-order", "toy", "fiber-map error against eps with h = eps", Some((SweepVariable::Eps, ORDER_EPS)), 1e-3, 0.1, 0.5, None),
            body: toy_phi_order,
        },
        Registered {
            info: info("lindemann-order", "lindemann", "manifold and fiber-map errors against eps at x = 1", Some((SweepVariable::Eps, &[0.1, 0.05, 0.03, 0.02, 0.01])), 0.1, 0.1, 0.5, None),
            body: lindemann_order,
        },
        Registered {
            info: info("linear-bvp", "linear-bvp", "linear boundary value problem against its closed form", None, 0.1, 0.1, 0.01, Some(1e-2)),
            body: linear_bvp,
        },
        Registered {
            info: info("toy-rk4", "toy", "on-manifold RK4 against the reduced-flow reference", Some((SweepVariable::Dtau, &[0.4, 0.2, 0.1, 0.05])), 1e-3, 0.1, 0.5, None),
            body: toy_rk4,
        },
        Registered {
            info: info("saddle-bracket", "toy", "full-system shots displaced off the saddle manifold", None, 1e-3, 0.1, 0.5, None),
            body: saddle_bracket,
        },
        Registered {
            info: info("ri-reduced", "reciprocal-inhibition", "reciprocal-inhibition base trajectory", None, 1e-3, 0.1, 0.01, Some(1e-4)),
            body: ri_reduced,
        },
        Registered {
            info: info("ri-transient", "reciprocal-inhibition", "transient with entry and exit layers and its full-space reference", None, 1e-3, 0.1, 0.01, Some(1e-4)),
            body: ri_transient,
        },
        Registered {
            info: info("ri-r-sweep", "reciprocal-inhibition", "deviation from the full-space reference against r", Some((SweepVariable::R, &[0.1, 0.5, 1.0])), 1e-3, 0.1, 0.01, Some(1e-4)),
            body: ri_r_sweep,
        },
        Registered {
            info: info("ri-eps-sweep", "reciprocal-inhibition", "transients and timings down to tiny eps", Some((SweepVariable::Eps, &[1e-3, 1e-5, 1e-7, 1e-9])), 1e-3, 0.1, 0.01, Some(1e-4)),
            body: ri_eps_sweep,
        },
        Registered {
            info: info("fhn-homoclinic", "fhn", "traveling-wave speed and homoclinic segments", None, 1e-3, 0.1, 0.01, Some(1e-4)),
            body: fhn_homoclinic,
        },
    ]
}

pub fn registry() -> Vec<ExperimentInfo> {
    registered().into_iter().map(|r| r.info).collect()
}

fn lookup(name: &str) -> Result<Registered> {
    registered()
        .into_iter()
        .find(|r| r.info.name == name)
        .ok_or_else(|| Error::BadParams(format!("unknown experiment `{name}`")))
}

/// The spec an experiment runs with when no option is given.
pub fn default_spec(name: &str) -> Result<ExperimentSpec> {
    let info = lookup(name)?.info;
    Ok(ExperimentSpec {
        experiment: info.name.into(),
        model: info.model.into(),
        params: Params::new(),
        sweep: info.sweep.map(|(variable, values)| Sweep { variable, values: values.to_vec() }),
        eps: info.eps,
        r: info.r,
        dtau: info.dtau,
        h: info.h,
        outputs: Outputs::default(),
        seed: 0,
    })
}

/// Wall-clock seconds per phase. Phases run one after another, so each is at most the total.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub base_seconds: f64,
    pub collocation_seconds: f64,
    pub reference_seconds: f64,
    pub total_seconds: f64,
}

/// What a run has produced so far. Kept when a later phase fails.
#[derive(Debug, Default)]
pub struct Artifacts {
    pub tables: Vec<Table>,
    pub summary: Map<String, Value>,
    pub timings: Timings,
    /// Name of the phase currently running; reported on failure.
    pub phase: String,
}

impl Artifacts {
    fn enter(&mut self, phase: &str) {
        self.phase = phase.into();
    }

    fn put<T: Serialize>(&mut self, key: &str, value: T) -> Result<()> {
        self.summary.insert(key.into(), serde_json::to_value(value)?);
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Ok,
    Failed,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: u32,
    pub status: Status,
    pub error: Option<String>,
    pub failed_phase: Option<String>,
    pub spec: ExperimentSpec,
    pub summary: Value,
    pub timings: Timings,
}

#[derive(Debug)]
pub struct Outcome {
    pub report: Report,
    pub tables: Vec<Table>,
}

impl Outcome {
    pub fn succeeded(&self) -> bool {
        self.report.status == Status::Ok
    }

    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }

    pub fn summary(&self, key: &str) -> Option<&Value> {
        self.report.summary.get(key)
    }

    pub fn summary_f64(&self, key: &str) -> Option<f64> {
        self.summary(key).and_then(Value::as_f64)
    }
}

/// Runs `spec` on a pool of `jobs` threads (`0` for the rayon default).
pub fn run(spec: &ExperimentSpec, jobs: usize) -> Outcome {
    let clock = Instant::now();
    let mut art = Artifacts { phase: "setup".into(), ..Artifacts::default() };
    let result = spec.validate().and_then(|_| {
        let reg = lookup(&spec.experiment)?;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| Error::BadParams(format!("thread pool: {e}")))?;
        pool.install(|| (reg.body)(spec, &mut art))
    });
    art.timings.total_seconds = clock.elapsed().as_secs_f64();
    let (status, error, failed_phase) = match result {
        Ok(()) => (Status::Ok, None, None),
        Err(e) => (Status::Failed, Some(e.to_string()), Some(art.phase.clone())),
    };
    if !spec.outputs.trajectories {
        art.tables.retain(|t| !t.name.starts_with("trajectory"));
    }
    if !spec.outputs.errors {
        art.tables.retain(|t| t.name.starts_with("trajectory"));
    }
    let timings = if spec.outputs.timings { art.timings } else { Timings::default() };
    Outcome {
        report: Report {
            schema_version: SCHEMA_VERSION,
            status,
            error,
            failed_phase,
            spec: spec.clone(),
            summary: Value::Object(art.summary),
            timings,
        },
        tables: art.tables,
    }
}

/// Writes every table and `summary.json` into `dir`, one file at a time.
pub fn write_outcome(dir: &Path, outcome: &Outcome) -> Result<Vec<PathBuf>> {
    let mut paths = Vec::new();
    for t in &outcome.tables {
        paths.push(io::write_table(dir, t)?);
    }
    paths.push(io::write_json(dir, "summary", &outcome.report)?);
    Ok(paths)
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, f64) {
    let clock = Instant::now();
    let out = f();
    (out, clock.elapsed().as_secs_f64())
}

fn eps_values(spec: &ExperimentSpec) -> Vec<f64> {
    match &spec.sweep {
        Some(s) if s.variable == SweepVariable::Eps => s.values.clone(),
        _ => vec![spec.eps],
    }
}

fn sweep_of(spec: &ExperimentSpec, variable: SweepVariable, fallback: f64) -> Vec<f64> {
    match &spec.sweep {
        Some(s) if s.variable == variable => s.values.clone(),
        _ => vec![fallback],
    }
}

/// Slope over `(abscissa, error)` pairs, or the fitting error as text.
fn slope_entry(data: &[(f64, f64)]) -> Value {
    match fit_slope(data) {
        Ok(f) => serde_json::to_value(f).unwrap_or(Value::Null),
        Err(e) => json!({ "error": e.to_string() }),
    }
}

fn toy_eta_order(spec: &ExperimentSpec, art: &mut Artifacts) -> Result<()> {
    art.enter("sweep");
    let pts = orders::toy_order_sweep(&eps_values(spec), spec.h)?;
    let mut t = Table::new("eta_order", &["eps", "h", "error_plain", "error_split", "so_iterations"]);
    for p in &pts {
        t.push(vec![p.eps.into(), p.h.into(), p.eta_error_plain.unwrap_or(f64::NAN).into(), p.eta_error.into(), p.so_iterations.into()]);
    }
    art.tables.push(t);
    let plain: Vec<_> = pts.iter().map(|p| (p.eps, p.eta_error_plain.unwrap_or(f64::NAN))).collect();
    let split: Vec<_> = pts.iter().map(|p| (p.eps, p.eta_error)).collect();
    art.put("slope_plain", slope_entry(&plain))?;
    art.put("slope_split", slope_entry(&split))
}

fn toy_phi_order(spec: &ExperimentSpec, art: &mut Artifacts) -> Result<()> {
    art.enter("sweep");
    let pts = orders::toy_order_sweep(&eps_values(spec), spec.h)?;
    let mut t = Table::new("phi_order", &["eps", "h", "error_phi", "sof_iterations"]);
    for p in &pts {
        t.push(vec![p.eps.into(), p.h.into(), p.phi_error.into(), p.sof_iterations.into()]);
    }
    art.tables.push(t);
    let data: Vec<_> = pts.iter().map(|p| (p.eps, p.phi_error)).collect();
    art.put("slope_phi", slope_entry(&data))
}

fn lindemann_order(spec: &ExperimentSpec, art: &mut Artifacts) -> Result<()> {
    art.enter("sweep");
    let pts = orders::lindemann_order_sweep(&eps_values(spec), spec.h)?;
    let mut t = Table::new("lindemann_order", &["eps", "h", "error_eta", "error_phi"]);
    for p in &pts {
        t.push(vec![p.eps.into(), p.h.into(), p.eta_error.into(), p.phi_error.into()]);
    }
    art.tables.push(t);
    let eta: Vec<_> = pts.iter().map(|p| (p.eps, p.eta_error)).collect();
    let phi: Vec<_> = pts.iter().map(|p| (p.eps, p.phi_error)).collect();
    art.put("slope_eta", slope_entry(&eta))?;
    art.put("slope_phi", slope_entry(&phi))
}

fn stitched_table(name: &str, sol: &crate::transient::TransientSolution) -> Table {
    let (header, rows) = sol.csv_rows();
    let mut t = Table { name: name.into(), header, rows: Vec::new() };
    for (vals, seg) in rows {
        let mut row: Vec<Cell> = vals.into_iter().map(Cell::Num).collect();
        row.push(seg.into());
        t.push(row);
    }
    t
}

fn linear_bvp(spec: &ExperimentSpec, art: &mut Artifacts) -> Result<()> {
    art.enter("transient");
    let h = spec.h.unwrap_or(1e-2);
    let res = transients::linear_bvp(spec.eps, spec.dtau, h, &TransientConfig::default())?;
    art.timings.base_seconds = res.base_seconds;
    art.timings.collocation_seconds = res.solution.layer_seconds;
    art.tables.push(stitched_table("trajectory", &res.solution));
    art.put("so_iterations", res.so_iterations)?;
    art.put("eta_error", res.eta_error)?;
    art.put("sof_iterations", res.sof_iterations)?;
    art.put("phi_error", res.phi_error)?;
    art.put("max_error", res.max_error)?;
    art.put("t0", res.solution.t0)?;
    art.put("t1", res.solution.t1)?;
    art.put("bc_residual", res.solution.bc_residual())
}

fn toy_rk4(spec: &ExperimentSpec, art: &mut Artifacts) -> Result<()> {
    art.enter("integration");
    let mut dtaus = vec![spec.dtau];
    dtaus.extend(spec.sweep_values().iter().filter(|&&v| v != spec.dtau));
    if spec.sweep.as_ref().is_some_and(|s| s.variable != SweepVariable::Dtau) {
        dtaus.truncate(1);
    }
    let runs = flows::toy_rk4(spec.eps, &dtaus, flows::TOY_HORIZON, spec.h)?;
    let mut t = Table::new("deviation", &["dtau", "h", "max_deviation", "end_deviation"]);
    for r in &runs {
        t.push(vec![r.dtau.into(), r.h.into(), r.max_deviation.into(), r.end_deviation.into()]);
    }
    art.tables.push(t);
    let main = &runs[0];
    let mut tr = Table::new("trajectory", &["tau", "x0", "x1", "eta0", "eta1", "ref_x0", "ref_x1"]);
    for (k, &tau) in main.trajectory.tau_mesh.iter().enumerate() {
        let (x, e, r) = (&main.trajectory.x_values[k], &main.trajectory.eta_values[k], &main.reference[k]);
        tr.push([tau, x[0], x[1], e[0], e[1], r[0], r[1]].into_iter().map(Cell::Num).collect());
    }
    art.tables.push(tr);
    art.put("dtau", main.dtau)?;
    art.put("h", main.h)?;
    art.put("max_deviation", main.max_deviation)?;
    art.put("end_deviation", main.end_deviation)?;
    let sweep: Vec<_> = runs[1..].iter().map(|r| (r.dtau, r.max_deviation)).collect();
    art.put("slope_dtau", slope_entry(&sweep))
}

fn saddle_bracket(spec: &ExperimentSpec, art: &mut Artifacts) -> Result<()> {
    art.enter("shots");
    let sys = Toy::new(spec.eps);
    let h = spec.h.unwrap_or_else(|| choose_h(spec.dtau, spec.eps));
    let exponents: Vec<i32> = (4..=11).map(|k| -k).collect();
    let x = DVector::from_column_slice(&orders::TOY_POINT);
    let res = flows::saddle_bracket(&sys, &x, h, &DVector::zeros(2), &exponents, 0.1, 60.0)?;
    let mut t = Table::new("sides", &["displacement", "side_plus", "side_minus"]);
    for (d, s) in res.displacements.iter().zip(&res.sides) {
        t.push(vec![(*d).into(), i64::from(s.0).into(), i64::from(s.1).into()]);
    }
    art.tables.push(t);
    art.put("h", h)?;
    art.put("bracket_exponent", res.bracket_exponent)?;
    art.put("bracket", &res)
}

fn ri_reduced(spec: &ExperimentSpec, art: &mut Artifacts) -> Result<()> {
    art.enter("base");
    let sys = reciprocal_from(&spec.model_params()?);
    let h = spec.h.unwrap_or_else(|| choose_h(spec.dtau, spec.eps));
    let (base, secs) = timed(|| flows::ri_base(&sys, spec.dtau, h, false));
    let base = base?;
    art.timings.base_seconds = secs;
    let (header, rows) = base.csv_rows();
    art.tables.push(Table::from_numeric("trajectory", header, rows));
    let end = base.x_values.last().unwrap();
    let target = DVector::from_column_slice(&Q_END);
    art.put("end", end.iter().collect::<Vec<_>>())?;
    art.put("end_error", (end - target).norm())?;
    art.put("max_residual", base.residuals.iter().cloned().fold(0.0, f64::max))
}

fn transient_summary(run: &transients::TransientRun) -> Value {
    json!({
        "eps": run.eps,
        "r": run.r,
        "t0": run.solution.t0,
        "t1": run.solution.t1,
        "bc_residual": run.bc_residual,
        "deviation": run.deviation,
        "entry_iterations": run.entry_iterations(),
        "exit_iterations": run.exit_iterations(),
        "reference_iterations": run.reference_iterations,
        "reference_error": run.reference_error,
        "timings": run.timings,
    })
}

fn ri_sweep(spec: &ExperimentSpec, art: &mut Artifacts, cases: &[(f64, f64)], with_reference: bool) -> Result<Vec<transients::TransientRun>> {
    art.enter("transients");
    let sys = reciprocal_from(&spec.model_params()?);
    let h = spec.h.unwrap_or_else(|| choose_h(spec.dtau, spec.eps));
    let (runs, phases) = transients::ri_runs(&sys, cases, spec.dtau, h, &TransientConfig::default(), with_reference)?;
    art.timings.base_seconds = phases.base_seconds;
    art.timings.collocation_seconds = phases.layer_seconds;
    art.timings.reference_seconds = phases.reference_seconds;
    art.put("runs", runs.iter().map(transient_summary).collect::<Vec<_>>())?;
    Ok(runs)
}

fn ri_transient(spec: &ExperimentSpec, art: &mut Artifacts) -> Result<()> {
    let runs = ri_sweep(spec, art, &[(spec.eps, spec.r)], true)?;
    let run = &runs[0];
    art.tables.push(stitched_table("trajectory", &run.solution));
    art.put("deviation", run.deviation)?;
    art.put("bc_residual", run.bc_residual)
}

fn ri_r_sweep(spec: &ExperimentSpec, art: &mut Artifacts) -> Result<()> {
    let cases: Vec<_> = sweep_of(spec, SweepVariable::R, spec.r).into_iter().map(|r| (spec.eps, r)).collect();
    let runs = ri_sweep(spec, art, &cases, true)?;
    let mut t = Table::new("r_sweep", &["r", "t0", "t1", "bc_residual", "deviation"]);
    for run in &runs {
        t.push(vec![run.r.into(), run.solution.t0.into(), run.solution.t1.into(), run.bc_residual.into(), run.deviation.unwrap_or(f64::NAN).into()]);
    }
    art.tables.push(t);
    let data: Vec<_> = runs.iter().map(|r| (r.r, r.deviation.unwrap_or(f64::NAN))).collect();
    art.put("slope_r", slope_entry(&data))
}

fn ri_eps_sweep(spec: &ExperimentSpec, art: &mut Artifacts) -> Result<()> {
    let cases: Vec<_> = eps_values(spec).into_iter().map(|e| (e, spec.r)).collect();
    let runs = ri_sweep(spec, art, &cases, true)?;
    let mut t = Table::new("eps_sweep", &["eps", "t0", "t1", "bc_residual", "deviation", "reference_converged"]);
    for run in &runs {
        let converged = if run.deviation.is_some() { "true" } else { "false" };
        t.push(vec![run.eps.into(), run.solution.t0.into(), run.solution.t1.into(), run.bc_residual.into(), run.deviation.unwrap_or(f64::NAN).into(), converged.into()]);
    }
    art.tables.push(t);
    art.put("max_bc_residual", runs.iter().map(|r| r.bc_residual).fold(0.0, f64::max))
}

fn fhn_homoclinic(spec: &ExperimentSpec, art: &mut Artifacts) -> Result<()> {
    art.enter("pipeline");
    let template = fhn_from(&spec.model_params()?)?;
    let mut cfg = HomoclinicConfig::new(spec.eps);
    cfg.dtau = spec.dtau;
    if let Some(h) = spec.h {
        cfg.h = h;
    }
    // fixed so that the bisection path, and with it c_*, does not depend on --jobs
    let res = assemble_homoclinic_for(&template, &cfg, 7)?;
    for (k, g) in res.gammas.iter().enumerate() {
        let (header, rows) = g.csv_rows();
        art.tables.push(Table::from_numeric(&format!("trajectory_gamma{}", k + 1), header, rows));
    }
    if let Some(left) = &res.left_branch {
        let (header, rows) = left.csv_rows();
        art.tables.push(Table::from_numeric("trajectory_left_branch", header, rows));
    }
    let value = serde_json::to_value(&res)?;
    if let Value::Object(m) = value {
        art.summary.extend(m);
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelValidation {
    pub model: String,
    pub params: Params,
    pub seed: u64,
    pub probes: usize,
    pub report: JacobianReport,
    pub worst: f64,
    pub passed: bool,
}

/// Checks the analytic Jacobians of `model` against central differences at `probes`
/// random states drawn from `[0.2, 1.2]` in every coordinate.
pub fn validate_model(model: &str, overrides: &Params, seed: u64, probes: usize, tol: f64) -> Result<ModelValidation> {
    let params = models::resolve_params(model, overrides)?;
    let sys = models::build(model, overrides)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = |n: usize| DVector::from_fn(n, |_, _| rng.gen_range(0.2..1.2));
    let states: Vec<State> = (0..probes).map(|_| State::new(draw(sys.n_slow()), draw(sys.n_fast()))).collect();
    let report = validate_jacobians(sys.as_ref(), &states, 1e-6);
    let worst = report.worst();
    Ok(ModelValidation { model: model.into(), params, seed, probes, passed: worst <= tol, worst, report })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        for e in registry() {
            let spec = default_spec(e.name).unwrap();
            spec.validate().unwrap();
            assert_eq!(spec.model_params().unwrap()["eps"], spec.eps);
        }
    }

    #[test]
    fn descending_sweeps_are_accepted() {
        let mut spec = default_spec("toy-eta-order").unwrap();
        spec.sweep = Some(Sweep { variable: SweepVariable::Eps, values: vec![1e-4, 1e-3] });
        spec.validate().unwrap();
        spec.sweep = Some(Sweep { variable: SweepVariable::Eps, values: vec![1e-3, 1e-3] });
        assert!(spec.validate().is_err());
        spec.sweep = Some(Sweep { variable: SweepVariable::Eps, values: vec![] });
        assert!(spec.validate().is_err());
    }

    #[test]
    fn non_positive_settings_are_rejected() {
        let base = default_spec("linear-bvp").unwrap();
        assert!(ExperimentSpec { eps: -0.1, ..base.clone() }.validate().is_err());
        assert!(ExperimentSpec { dtau: 0.0, ..base.clone() }.validate().is_err());
        assert!(ExperimentSpec { h: Some(f64::NAN), ..base.clone() }.validate().is_err());
        assert!(ExperimentSpec { model: "nope".into(), ..base }.validate().is_err());
    }

    #[test]
    fn spec_round_trips_through_json() {
        let spec = default_spec("ri-r-sweep").unwrap();
        let json = serde_json::to_string(&spec).unwrap();
        assert!(json.contains("\"variable\":\"r\""));
        let back: ExperimentSpec = serde_json::from_str(&json).unwrap();
        assert_eq!(back.sweep_values(), spec.sweep_values());
    }

    #[test]
    fn model_validation_is_seeded() {
        let a = validate_model("toy", &Params::new(), 3, 4, 1e-6).unwrap();
        let b = validate_model("toy", &Params::new(), 3, 4, 1e-6).unwrap();
        assert!(a.passed);
        assert_eq!(a.worst, b.worst);
    }
}
