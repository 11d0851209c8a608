//! Batch front-end: configuration, the `run`, `converge`, `jump` and
//! `catalog` commands, and the table and summary writers.
//!
//! Every command is a plain function returning a [`CliError`] on failure so
//! that tests can drive it without spawning the binary; `main` only parses
//! arguments and maps errors to exit codes.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use log::info;
use nhimpact_core::catalog::{self, Model};
use nhimpact_core::impact::continuous_jump;
use nhimpact_core::oracle::{integrate_continuous, second_point_from_velocity};
use nhimpact_core::stepper::{integrate, DiscreteTrajectory, PointKind};
use nhimpact_core::{
    ContinuousState, Error as CoreError, ImpactRecord, OracleConfig, StepperConfig, Vector,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Minimum convergence order accepted by `converge`.
pub const MIN_ORDER: f64 = 0.8;

/// Terminal errors below this are treated as exact (round-off only).
pub const EXACT_ERROR: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("solver failure: {0}")]
    Solver(#[source] CoreError),
    /// A check on the results failed (convergence order, impact record
    /// revalidation).
    #[error("check failed: {0}")]
    Check(String),
    #[error("refused: {0}")]
    Refused(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Solver(_) | CliError::Check(_) | CliError::Io { .. } => 3,
            CliError::Refused(_) => 4,
        }
    }
}

/// Errors raised while checking inputs are configuration errors; anything
/// raised once the solve is under way is a solver failure.
fn classify(err: CoreError) -> CliError {
    match err {
        CoreError::InvalidParameter { .. }
        | CoreError::Precondition(_)
        | CoreError::DimensionMismatch { .. } => CliError::Config(err.to_string()),
        other => CliError::Solver(other),
    }
}

fn io_error(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    pub name: String,
    #[serde(default)]
    pub parameters: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialConfig {
    pub q0: Vec<f64>,
    /// Second point of the discrete trajectory.
    pub q1: Option<Vec<f64>>,
    /// Initial velocity; converted to `q1` with the reference integrator.
    pub v0: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegrationConfig {
    pub h: f64,
    pub steps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    /// Directory for all outputs, relative to the working directory.
    pub directory: PathBuf,
    pub trajectory: String,
    pub impacts: String,
    pub summary: String,
    pub convergence: String,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            directory: PathBuf::from("."),
            trajectory: "trajectory.csv".to_string(),
            impacts: "impacts.csv".to_string(),
            summary: "summary.json".to_string(),
            convergence: "convergence.json".to_string(),
        }
    }
}

/// One file that fully describes a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub system: SystemConfig,
    pub initial: InitialConfig,
    pub integration: IntegrationConfig,
    #[serde(default)]
    pub solver: StepperConfig,
    #[serde(default)]
    pub oracle: OracleConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// Applies command-line overrides.
    pub fn with_overrides(mut self, out: Option<PathBuf>, tol: Option<f64>) -> Self {
        if let Some(dir) = out {
            self.output.directory = dir;
        }
        if let Some(tol) = tol {
            self.solver.newton.residual_tolerance = tol;
            self.oracle.solver.newton.residual_tolerance = tol;
        }
        self
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let h = self.integration.h;
        if !(h > 0.0 && h.is_finite()) {
            return Err(CliError::Config(format!(
                "integration.h: must be positive and finite, got {h}"
            )));
        }
        if self.integration.steps == 0 {
            return Err(CliError::Config(
                "integration.steps: must be at least 1".to_string(),
            ));
        }
        if !(self.oracle.h_fine > 0.0 && self.oracle.h_fine.is_finite()) {
            return Err(CliError::Config(format!(
                "oracle.h_fine: must be positive and finite, got {}",
                self.oracle.h_fine
            )));
        }
        match (&self.initial.q1, &self.initial.v0) {
            (Some(_), Some(_)) => {
                return Err(CliError::Config(
                    "initial: give either q1 or v0, not both".to_string(),
                ))
            }
            (None, None) => {
                return Err(CliError::Config(
                    "initial: one of q1 or v0 is required".to_string(),
                ))
            }
            _ => {}
        }
        self.solver
            .validate()
            .map_err(|e| CliError::Config(format!("solver: {e}")))?;
        self.oracle
            .solver
            .validate()
            .map_err(|e| CliError::Config(format!("oracle.solver: {e}")))?;
        Ok(())
    }
}

fn vector(name: &str, xs: &[f64], dim: usize) -> Result<Vector, CliError> {
    if xs.len() != dim {
        return Err(CliError::Config(format!(
            "{name}: expected {dim} components, got {}",
            xs.len()
        )));
    }
    if let Some(x) = xs.iter().find(|x| !x.is_finite()) {
        return Err(CliError::Config(format!(
            "{name}: component {x} is not finite"
        )));
    }
    Ok(Vector::from_column_slice(xs))
}

pub fn build_model(system: &SystemConfig) -> Result<Model, CliError> {
    catalog::build(&system.name, &system.parameters)
        .map_err(|e| CliError::Config(format!("system: {e}")))
}

/// Validated inputs of a discrete run.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub model: Model,
    pub q0: Vector,
    pub q1: Vector,
    pub v0: Option<Vector>,
    pub h: f64,
    pub steps: usize,
}

/// Builds the model and the initial pair; `v0` is turned into `q1` by one
/// step of the reference integrator projected onto the discrete constraint.
pub fn prepare(cfg: &RunConfig) -> Result<Scenario, CliError> {
    cfg.validate()?;
    let model = build_model(&cfg.system)?;
    let n = model.dim();
    let q0 = vector("initial.q0", &cfg.initial.q0, n)?;
    let (q1, v0) = match (&cfg.initial.q1, &cfg.initial.v0) {
        (Some(q1), _) => (vector("initial.q1", q1, n)?, None),
        (None, Some(v0)) => {
            let v0 = vector("initial.v0", v0, n)?;
            let q1 = second_point_from_velocity(&model, &q0, &v0, cfg.integration.h, &cfg.oracle)
                .map_err(classify)?;
            info!(
                "q1 derived from v0 by the reference integrator: {:?}",
                q1.as_slice()
            );
            (q1, Some(v0))
        }
        (None, None) => unreachable!("validated above"),
    };
    Ok(Scenario {
        model,
        q0,
        q1,
        v0,
        h: cfg.integration.h,
        steps: cfg.integration.steps,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub system: String,
    pub parameters: BTreeMap<String, f64>,
    pub h: f64,
    pub steps: usize,
    pub q1_source: String,
    pub q1: Vec<f64>,
    pub points: usize,
    pub final_time: f64,
    pub final_configuration: Vec<f64>,
    pub impacts: usize,
    pub energy_min: f64,
    pub energy_max: f64,
    /// Physical energy change across each impact, in order.
    pub impact_energy_changes: Vec<f64>,
    pub trajectory_file: PathBuf,
    pub impacts_file: PathBuf,
}

/// Integrates the configured scenario and writes the trajectory table, the
/// impact log and the summary.
pub fn run(cfg: &RunConfig) -> Result<RunSummary, CliError> {
    let scenario = prepare(cfg)?;
    let model = &scenario.model;
    let traj = integrate(
        model,
        &scenario.q0,
        &scenario.q1,
        scenario.h,
        scenario.steps,
        &cfg.solver,
    )
    .map_err(classify)?;
    for record in &traj.impacts {
        record.recheck(model, &cfg.solver).map_err(|reason| {
            CliError::Check(format!(
                "impact at t = {} failed revalidation: {reason}",
                record.t_bar
            ))
        })?;
    }

    let dir = &cfg.output.directory;
    fs::create_dir_all(dir).map_err(io_error(dir))?;
    let trajectory_file = dir.join(&cfg.output.trajectory);
    let impacts_file = dir.join(&cfg.output.impacts);
    write_trajectory(&trajectory_file, model, &traj)?;
    write_impacts(&impacts_file, model, &traj.impacts)?;

    let summary = RunSummary {
        system: model.name.clone(),
        parameters: model.parameters.clone(),
        h: scenario.h,
        steps: scenario.steps,
        q1_source: if scenario.v0.is_some() { "v0" } else { "q1" }.to_string(),
        q1: scenario.q1.as_slice().to_vec(),
        points: traj.len(),
        final_time: *traj.times.last().expect("non-empty trajectory"),
        final_configuration: traj
            .last()
            .expect("non-empty trajectory")
            .as_slice()
            .to_vec(),
        impacts: traj.impacts.len(),
        energy_min: traj.energies.iter().copied().fold(f64::INFINITY, f64::min),
        energy_max: traj
            .energies
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max),
        impact_energy_changes: traj
            .impacts
            .iter()
            .map(ImpactRecord::energy_change)
            .collect(),
        trajectory_file,
        impacts_file,
    };
    write_json(&dir.join(&cfg.output.summary), &summary)?;
    Ok(summary)
}

fn coordinate_names(model: &Model) -> Vec<String> {
    match catalog::entry(&model.name) {
        Some(entry) if entry.coordinates.len() == model.dim() => {
            entry.coordinates.iter().map(|c| c.to_string()).collect()
        }
        _ => (0..model.dim()).map(|i| format!("q{i}")).collect(),
    }
}

fn kind_name(kind: PointKind) -> &'static str {
    match kind {
        PointKind::Initial => "initial",
        PointKind::Interior => "interior",
        PointKind::Impact => "impact",
        PointKind::PostImpact => "post_impact",
        PointKind::Resumed => "resumed",
    }
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>, CliError> {
    let file = fs::File::create(path).map_err(io_error(path))?;
    Ok(csv::Writer::from_writer(file))
}

fn csv_error(path: &Path) -> impl Fn(csv::Error) -> CliError + '_ {
    move |e| CliError::Io {
        path: path.to_path_buf(),
        source: std::io::Error::other(e.to_string()),
    }
}

/// One row per point: index, time, kind, coordinates, multipliers of the
/// equation that produced the point (empty for initial points), energy
/// estimate, gap of every inequality constraint, impact flag.
pub fn write_trajectory(
    path: &Path,
    model: &Model,
    traj: &DiscreteTrajectory,
) -> Result<(), CliError> {
    let m = model.constraints.count();
    let mut header: Vec<String> = vec!["index".into(), "time".into(), "kind".into()];
    header.extend(coordinate_names(model));
    header.extend((0..m).map(|a| format!("lambda_{a}")));
    header.push("energy".into());
    header.extend(model.boundaries.iter().map(|b| format!("g_{}", b.label())));
    header.push("impact".into());

    let mut w = csv_writer(path)?;
    let err = csv_error(path);
    w.write_record(&header).map_err(&err)?;
    for k in 0..traj.len() {
        let q = &traj.points[k];
        let mut row = vec![
            k.to_string(),
            traj.times[k].to_string(),
            kind_name(traj.kinds[k]).to_string(),
        ];
        row.extend(q.iter().map(f64::to_string));
        match &traj.multipliers[k] {
            Some(lambda) if lambda.len() == m => row.extend(lambda.iter().map(f64::to_string)),
            _ => row.extend(std::iter::repeat_n(String::new(), m)),
        }
        row.push(traj.energies[k].to_string());
        row.extend(model.boundaries.iter().map(|b| b.gap(q).to_string()));
        row.push(u8::from(traj.kinds[k] == PointKind::Impact).to_string());
        w.write_record(&row).map_err(&err)?;
    }
    w.flush().map_err(io_error(path))
}

/// One row per impact with every field of the impact record; vector fields
/// are spread over one column per component.
pub fn write_impacts(path: &Path, model: &Model, impacts: &[ImpactRecord]) -> Result<(), CliError> {
    let coords = coordinate_names(model);
    let m = model.constraints.count();
    let per_coord = |name: &str| {
        coords
            .iter()
            .map(move |c| format!("{name}_{c}"))
            .collect::<Vec<_>>()
    };
    let per_mult = |name: &str| {
        (0..m)
            .map(move |a| format!("{name}_{a}"))
            .collect::<Vec<_>>()
    };

    let mut header: Vec<String> = [
        "index",
        "constraint",
        "t_bar",
        "alpha",
        "grid_aligned",
        "h",
        "h_prev",
        "h_in",
        "h_out",
        "gap",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    for name in ["q_prev", "q_in", "q_bar", "q_post", "q_resume"] {
        header.extend(per_coord(name));
    }
    header.extend(per_mult("lambda_stage1"));
    header.push("lambda_bar".into());
    header.extend(per_mult("nu"));
    header.extend(per_mult("lambda_stage3"));
    header.extend(
        [
            "stage1_residual",
            "momentum_residual",
            "discrete_energy_residual",
            "jump_constraint_residual",
            "stage3_residual",
            "physical_energy_before",
            "physical_energy_after",
            "energy_change",
            "chained",
        ]
        .iter()
        .map(|s| s.to_string()),
    );

    let mut w = csv_writer(path)?;
    let err = csv_error(path);
    w.write_record(&header).map_err(&err)?;
    let num = |x: f64| x.to_string();
    for r in impacts {
        let mut row = vec![
            r.index.to_string(),
            r.constraint_label.clone(),
            num(r.t_bar),
            num(r.alpha),
            r.grid_aligned.to_string(),
            num(r.h),
            num(r.h_prev),
            num(r.h_in),
            num(r.h_out),
            num(r.gap),
        ];
        for q in [&r.q_prev, &r.q_in, &r.q_bar, &r.q_post, &r.q_resume] {
            row.extend(q.iter().copied().map(num));
        }
        row.extend(r.lambda_stage1.iter().copied().map(num));
        row.push(num(r.lambda_bar));
        row.extend(r.nu.iter().copied().map(num));
        row.extend(r.lambda_stage3.iter().copied().map(num));
        row.extend(
            [
                r.stage1_residual,
                r.momentum_residual,
                r.discrete_energy_residual,
                r.jump_constraint_residual,
                r.stage3_residual,
                r.physical_energy_before,
                r.physical_energy_after,
                r.energy_change(),
            ]
            .map(num),
        );
        row.push(r.chained.to_string());
        w.write_record(&row).map_err(&err)?;
    }
    w.flush().map_err(io_error(path))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).expect("summary types serialize");
    text.push('\n');
    let mut file = fs::File::create(path).map_err(io_error(path))?;
    file.write_all(text.as_bytes()).map_err(io_error(path))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub system: String,
    pub t_end: f64,
    pub step_sizes: Vec<f64>,
    /// Max-norm terminal error against the reference integrator.
    pub errors: Vec<f64>,
    /// `log2(e(h) / e(h/2))` per refinement; `None` where both errors are at
    /// round-off level.
    pub orders: Vec<Option<f64>>,
    /// Every error is at round-off level.
    pub exact: bool,
    pub min_order: f64,
    pub passed: bool,
}

/// Runs the scenario at `h`, `h/2` and `h/4` over the same time span and
/// measures the order of the terminal error against the reference
/// integrator. Scenarios with impacts are refused.
pub fn converge(cfg: &RunConfig) -> Result<ConvergenceReport, CliError> {
    cfg.validate()?;
    let model = build_model(&cfg.system)?;
    let n = model.dim();
    let q0 = vector("initial.q0", &cfg.initial.q0, n)?;
    let v0 = match &cfg.initial.v0 {
        Some(v0) => vector("initial.v0", v0, n)?,
        None => {
            return Err(CliError::Config(
                "initial.v0: converge compares against the reference integrator and needs an initial velocity"
                    .to_string(),
            ))
        }
    };
    let t_end = cfg.integration.h * cfg.integration.steps as f64;
    let start = ContinuousState {
        t: 0.0,
        q: q0.clone(),
        v: v0.clone(),
    };
    let reference = integrate_continuous(&model, &start, t_end, &cfg.oracle).map_err(classify)?;
    if !reference.events.is_empty() {
        return Err(CliError::Refused(format!(
            "the scenario hits {} at t = {}; order measurement across impacts is not supported",
            reference.events[0].constraint_label, reference.events[0].t
        )));
    }
    let exact = &reference.final_state().q;

    let mut step_sizes = Vec::new();
    let mut errors = Vec::new();
    for level in 0..3u32 {
        let h = cfg.integration.h / f64::from(1u32 << level);
        let steps = cfg.integration.steps << level;
        let q1 = second_point_from_velocity(&model, &q0, &v0, h, &cfg.oracle).map_err(classify)?;
        let traj = integrate(&model, &q0, &q1, h, steps, &cfg.solver).map_err(classify)?;
        if !traj.impacts.is_empty() {
            return Err(CliError::Refused(format!(
                "the discrete trajectory at h = {h} has {} impacts",
                traj.impacts.len()
            )));
        }
        let error = (traj.last().expect("non-empty trajectory") - exact).amax();
        info!("h = {h:e}: terminal error {error:e}");
        step_sizes.push(h);
        errors.push(error);
    }
    let orders: Vec<Option<f64>> = errors
        .windows(2)
        .map(|w| (w[1] > EXACT_ERROR).then(|| (w[0] / w[1]).log2()))
        .collect();
    let exact_run = errors.iter().all(|&e| e <= EXACT_ERROR);
    let passed = orders.iter().all(|p| p.is_none_or(|p| p >= MIN_ORDER));
    let report = ConvergenceReport {
        system: model.name.clone(),
        t_end,
        step_sizes,
        errors,
        orders,
        exact: exact_run,
        min_order: MIN_ORDER,
        passed,
    };
    let dir = &cfg.output.directory;
    fs::create_dir_all(dir).map_err(io_error(dir))?;
    write_json(&dir.join(&cfg.output.convergence), &report)?;
    if !passed {
        return Err(CliError::Check(format!(
            "measured orders {:?} fall below {MIN_ORDER}",
            report.orders
        )));
    }
    Ok(report)
}

/// Input of a one-shot continuous jump.
#[derive(Debug, Clone, PartialEq)]
pub struct JumpRequest {
    pub system: SystemConfig,
    /// Label of the inequality constraint; the first one if absent.
    pub boundary: Option<String>,
    pub q: Option<Vec<f64>>,
    pub v_minus: Option<Vec<f64>>,
    /// Sample a random incoming boundary state instead of `q`, `v_minus`.
    pub seed: Option<u64>,
    pub solver: StepperConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JumpReport {
    pub system: String,
    pub boundary: String,
    pub q: Vec<f64>,
    pub v_minus: Vec<f64>,
    pub v_plus: Vec<f64>,
    pub lambda_bar: f64,
    pub nu: Vec<f64>,
    pub energy_before: f64,
    pub energy_after: f64,
    pub decomposition_residual: f64,
}

pub fn jump(req: &JumpRequest) -> Result<JumpReport, CliError> {
    req.solver
        .validate()
        .map_err(|e| CliError::Config(format!("solver: {e}")))?;
    let model = build_model(&req.system)?;
    let index = match &req.boundary {
        None => 0,
        Some(label) => model
            .boundaries
            .iter()
            .position(|b| b.label() == label)
            .ok_or_else(|| {
                CliError::Config(format!(
                    "boundary: {} has no constraint {label:?} (known: {})",
                    model.name,
                    model
                        .boundaries
                        .iter()
                        .map(|b| b.label())
                        .collect::<Vec<_>>()
                        .join(", ")
                ))
            })?,
    };
    let (q, v_minus) = match (req.seed, &req.q, &req.v_minus) {
        (Some(seed), None, None) => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            catalog::sample_incoming_state(&model, index, &mut rng).map_err(classify)?
        }
        (None, Some(q), Some(v)) => (vector("q", q, model.dim())?, vector("v", v, model.dim())?),
        _ => {
            return Err(CliError::Config(
                "give either both q and v, or a seed for a random boundary state".to_string(),
            ))
        }
    };
    let ic = model.boundaries[index].as_ref();
    let sol = continuous_jump(
        model.system.as_ref(),
        model.constraints.as_ref(),
        ic,
        &q,
        &v_minus,
        &req.solver,
    )
    .map_err(classify)?;
    Ok(JumpReport {
        system: model.name.clone(),
        boundary: ic.label().to_string(),
        q: q.as_slice().to_vec(),
        v_minus: v_minus.as_slice().to_vec(),
        v_plus: sol.v_plus.as_slice().to_vec(),
        lambda_bar: sol.lambda_bar,
        nu: sol.nu.as_slice().to_vec(),
        energy_before: sol.energy_before,
        energy_after: sol.energy_after,
        decomposition_residual: sol.decomposition_residual,
    })
}

/// Human-readable listing of the catalog.
pub fn catalog_listing() -> String {
    let mut out = String::new();
    for entry in catalog::entries() {
        out.push_str(&format!("{}: {}\n", entry.name, entry.description));
        out.push_str(&format!(
            "  coordinates: {}\n",
            entry.coordinates.join(", ")
        ));
        for p in entry.parameters {
            out.push_str(&format!(
                "  {} = {} ({})\n",
                p.name, p.default, p.description
            ));
        }
    }
    out
}
