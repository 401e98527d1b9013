//! Command execution and artifact writing.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use bflow_core::integrate::format_float;
use bflow_core::liftcheck::{projectability_test, toric_moment_field, LiftVerdict};
use bflow_core::oracles::{
    classical_parabola, damped_newton_reference, quadratic_tanh_constants, quadratic_tanh_state,
    stokes_exact,
};
use bflow_core::orbits::{classify_orbit, level_set_residual, phase_portrait, OrbitClassification};
use bflow_core::timescale::{
    friction_residual, reconstruct_real_time, run_rescaled, Clock, TimescaleRun,
};
use bflow_core::{
    integrate, write_csv, CsvOptions, Event, HamiltonianSpec, PhaseState, Potential, StructureKind,
    Trajectory,
};
use log::{info, warn};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::{ClockChoice, Command, LiftTarget, RunConfig};
use crate::error::{CliError, Result};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StateJson {
    pub q: Vec<f64>,
    pub p: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ext: Option<[f64; 2]>,
}

impl From<&PhaseState> for StateJson {
    fn from(s: &PhaseState) -> Self {
        Self {
            q: s.q().to_vec(),
            p: s.p().to_vec(),
            ext: s.ext().map(|(a, b)| [a, b]),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EventJson {
    pub kind: String,
    pub time: f64,
}

impl From<Event> for EventJson {
    fn from(e: Event) -> Self {
        Self {
            kind: e.kind.as_str().into(),
            time: e.time,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassificationJson {
    pub kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub period: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub limit_state: Option<StateJson>,
}

impl From<&OrbitClassification> for ClassificationJson {
    fn from(c: &OrbitClassification) -> Self {
        Self {
            kind: c.kind.as_str().into(),
            period: c.period,
            limit_state: c.limit_state.as_ref().map(StateJson::from),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Ok,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecordJson {
    pub index: usize,
    pub initial: Option<StateJson>,
    pub status: Status,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub terminal_event: Option<EventJson>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub classification: Option<ClassificationJson>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub files: Vec<String>,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub metrics: BTreeMap<String, f64>,
}

impl RecordJson {
    fn new(index: usize, initial: Option<&PhaseState>) -> Self {
        Self {
            index,
            initial: initial.map(StateJson::from),
            status: Status::Ok,
            terminal_event: None,
            classification: None,
            error: None,
            files: Vec::new(),
            metrics: BTreeMap::new(),
        }
    }

    fn failed(mut self, error: impl std::fmt::Display) -> Self {
        self.status = Status::Error;
        self.error = Some(error.to_string());
        self
    }
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    config_sha256: String,
    seed: Option<u64>,
    warnings: &'a [String],
    records: &'a [RecordJson],
}

/// Everything a command produces, held in memory until written.
#[derive(Debug, Default)]
struct Artifacts {
    files: Vec<(String, String)>,
    records: Vec<RecordJson>,
    stdout: Option<String>,
}

impl Artifacts {
    fn file(&mut self, record: &mut RecordJson, name: String, contents: String) {
        record.files.push(name.clone());
        self.files.push((name, contents));
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub out_dir: PathBuf,
    pub records: Vec<RecordJson>,
    /// Text the command wants shown to the user.
    pub stdout: Option<String>,
}

impl RunReport {
    pub fn failed(&self) -> usize {
        self.records
            .iter()
            .filter(|r| r.status == Status::Error)
            .count()
    }

    /// 0 when every record succeeded, 1 otherwise.
    pub fn exit_code(&self) -> u8 {
        u8::from(self.failed() > 0)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("artifact types serialize");
    s.push('\n');
    s
}

/// Runs `config` and writes its artifacts into `out_dir`. `config_text` is
/// the exact configuration source, hashed into the manifest.
pub fn run(
    config: &RunConfig,
    config_text: &str,
    out_dir: &Path,
    seed: Option<u64>,
) -> Result<RunReport> {
    for w in &config.warnings {
        warn!("{w}");
    }
    let artifacts = match config.command {
        Command::Simulate => simulate(config)?,
        Command::Classify => classify(config)?,
        Command::Portrait => portrait(config)?,
        Command::OracleCompare => oracle_compare(config)?,
        Command::Timescale => timescale(config)?,
        Command::Liftcheck => liftcheck(config)?,
    };
    fs::create_dir_all(out_dir).map_err(|e| CliError::io(out_dir, e))?;
    for (name, contents) in &artifacts.files {
        let path = out_dir.join(name);
        fs::write(&path, contents).map_err(|e| CliError::io(&path, e))?;
    }
    let manifest = Manifest {
        tool: "bflow",
        version: env!("CARGO_PKG_VERSION"),
        command: config.command.as_str(),
        config_sha256: sha256_hex(config_text.as_bytes()),
        seed,
        warnings: &config.warnings,
        records: &artifacts.records,
    };
    let path = out_dir.join(MANIFEST_FILE);
    fs::write(&path, to_json(&manifest)).map_err(|e| CliError::io(&path, e))?;
    let report = RunReport {
        out_dir: out_dir.to_path_buf(),
        records: artifacts.records,
        stdout: artifacts.stdout,
    };
    info!(
        "{}: {} records, {} failed, artifacts in {}",
        config.command,
        report.records.len(),
        report.failed(),
        out_dir.display()
    );
    Ok(report)
}

fn hamiltonian(config: &RunConfig) -> Result<HamiltonianSpec> {
    Ok(config.hamiltonian()?)
}

fn trajectory_record(record: &mut RecordJson, traj: &Trajectory, h: &HamiltonianSpec) {
    record.terminal_event = Some(traj.terminal_event().into());
    match level_set_residual(traj, h) {
        Ok(r) => {
            record.metrics.insert("level_set_residual".into(), r);
        }
        Err(e) => warn!(
            "record {}: level set residual unavailable: {e}",
            record.index
        ),
    }
    record.metrics.insert("samples".into(), traj.len() as f64);
}

fn simulate(config: &RunConfig) -> Result<Artifacts> {
    let h = hamiltonian(config)?;
    let mut out = Artifacts::default();
    for (i, initial) in config.initial.iter().enumerate() {
        let mut record = RecordJson::new(i, Some(initial));
        match integrate(&config.structure, &h, initial, &config.integrator) {
            Ok(traj) => {
                trajectory_record(&mut record, &traj, &h);
                out.file(
                    &mut record,
                    format!("trajectory_{i:04}.csv"),
                    write_csv(&traj, &CsvOptions::default()),
                );
            }
            Err(e) => record = record.failed(e),
        }
        info!("simulate record {i}: {:?}", record.status);
        out.records.push(record);
    }
    Ok(out)
}

fn classify(config: &RunConfig) -> Result<Artifacts> {
    let h = hamiltonian(config)?;
    let mut out = Artifacts::default();
    let mut summary = Vec::new();
    for (i, initial) in config.initial.iter().enumerate() {
        let mut record = RecordJson::new(i, Some(initial));
        match integrate(&config.structure, &h, initial, &config.integrator) {
            Ok(traj) => {
                trajectory_record(&mut record, &traj, &h);
                let c = ClassificationJson::from(&classify_orbit(&traj, &config.structure, &h));
                record.classification = Some(c.clone());
                out.file(
                    &mut record,
                    format!("trajectory_{i:04}.csv"),
                    write_csv(&traj, &CsvOptions::default()),
                );
                summary.push(IndexEntry {
                    index: i,
                    initial: initial.into(),
                    classification: Some(c),
                    backward_classification: None,
                    files: record.files.clone(),
                });
            }
            Err(e) => record = record.failed(e),
        }
        out.records.push(record);
    }
    out.files
        .push(("classification.json".into(), to_json(&summary)));
    Ok(out)
}

#[derive(Debug, Serialize)]
struct IndexEntry {
    index: usize,
    initial: StateJson,
    classification: Option<ClassificationJson>,
    #[serde(skip_serializing_if = "Option::is_none")]
    backward_classification: Option<ClassificationJson>,
    files: Vec<String>,
}

fn portrait(config: &RunConfig) -> Result<Artifacts> {
    let h = hamiltonian(config)?;
    let records = phase_portrait(&config.structure, &h, &config.initial, &config.integrator)?;
    let mut out = Artifacts::default();
    let mut index = Vec::new();
    for (i, rec) in records.iter().enumerate() {
        let mut record = RecordJson::new(i, Some(&rec.initial));
        match &rec.outcome {
            Ok(entry) => {
                trajectory_record(&mut record, &entry.forward, &h);
                let c = ClassificationJson::from(&entry.classification);
                let b = ClassificationJson::from(&entry.backward_classification);
                record.classification = Some(c.clone());
                let opts = CsvOptions::default();
                out.file(
                    &mut record,
                    format!("orbit_{i:04}_forward.csv"),
                    write_csv(&entry.forward, &opts),
                );
                out.file(
                    &mut record,
                    format!("orbit_{i:04}_backward.csv"),
                    write_csv(&entry.backward, &opts),
                );
                index.push(IndexEntry {
                    index: i,
                    initial: (&rec.initial).into(),
                    classification: Some(c),
                    backward_classification: Some(b),
                    files: record.files.clone(),
                });
            }
            Err(e) => {
                index.push(IndexEntry {
                    index: i,
                    initial: (&rec.initial).into(),
                    classification: None,
                    backward_classification: None,
                    files: Vec::new(),
                });
                record = record.failed(e);
            }
        }
        out.records.push(record);
    }
    out.files.push(("index.json".into(), to_json(&index)));
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Oracle {
    Stokes,
    Parabola,
    Tanh,
}

impl Oracle {
    fn name(self) -> &'static str {
        match self {
            Oracle::Stokes => "stokes_exact",
            Oracle::Parabola => "classical_parabola",
            Oracle::Tanh => "quadratic_tanh",
        }
    }
}

fn pick_oracle(config: &RunConfig) -> Result<(Oracle, f64)> {
    let s = &config.structure;
    let unit = s.n() == 1 && (s.kind() == StructureKind::Canonical || s.modular_weight() == 1.0);
    let oracle = match (s.kind(), &config.potential) {
        (StructureKind::TwistedB, Potential::Linear { lambda }) if unit => {
            (Oracle::Stokes, *lambda)
        }
        (StructureKind::Canonical, Potential::Linear { lambda }) if unit => {
            (Oracle::Parabola, *lambda)
        }
        (StructureKind::TwistedB, Potential::PureQuadratic { lambda }) if unit => {
            (Oracle::Tanh, *lambda)
        }
        _ => {
            return Err(CliError::Config(format!(
                "no closed-form oracle for {} with {} (n = {}, c = {})",
                s.kind(),
                config.potential.label(),
                s.n(),
                s.modular_weight()
            )))
        }
    };
    Ok(oracle)
}

fn oracle_compare(config: &RunConfig) -> Result<Artifacts> {
    let (oracle, lambda) = pick_oracle(config)?;
    let h = hamiltonian(config)?;
    let mut out = Artifacts::default();
    for (i, initial) in config.initial.iter().enumerate() {
        let mut record = RecordJson::new(i, Some(initial));
        let result =
            integrate(&config.structure, &h, initial, &config.integrator).and_then(|traj| {
                let (q0, p0) = (initial.q()[0], initial.p()[0]);
                let reference: Box<dyn Fn(f64) -> bflow_core::Result<(f64, f64)>> = match oracle {
                    Oracle::Stokes => Box::new(move |t| stokes_exact(q0, p0, lambda, t)),
                    Oracle::Parabola => Box::new(move |t| classical_parabola(q0, p0, lambda, t)),
                    Oracle::Tanh => {
                        let (c1, c2) = quadratic_tanh_constants(q0, p0, lambda)?;
                        Box::new(move |t| quadratic_tanh_state(c1, c2, lambda, t, p0))
                    }
                };
                let mut csv = String::from("t,q1,p1,q1_ref,p1_ref,error\n");
                let mut worst = 0.0f64;
                for (t, s) in traj.times().iter().zip(traj.states()) {
                    let (q, p) = reference(*t)?;
                    let err = (s.q()[0] - q).abs().max((s.p()[0] - p).abs());
                    worst = worst.max(err);
                    let row = [*t, s.q()[0], s.p()[0], q, p, err].map(format_float);
                    csv.push_str(&row.join(","));
                    csv.push('\n');
                }
                let ev = traj.terminal_event();
                csv.push_str(&format!(
                    "# event: {} at t={}\n",
                    ev.kind,
                    format_float(ev.time)
                ));
                Ok((traj, csv, worst))
            });
        match result {
            Ok((traj, csv, worst)) => {
                trajectory_record(&mut record, &traj, &h);
                record.metrics.insert("max_error".into(), worst);
                out.file(&mut record, format!("compare_{i:04}.csv"), csv);
            }
            Err(e) => record = record.failed(e),
        }
        info!(
            "oracle-compare record {i} against {}: {:?}",
            oracle.name(),
            record.status
        );
        out.records.push(record);
    }
    Ok(out)
}

fn timescale(config: &RunConfig) -> Result<Artifacts> {
    let settings = config
        .timescale
        .as_ref()
        .ok_or_else(|| CliError::Config("timescale: missing".into()))?;
    let mut out = Artifacts::default();
    for (i, initial) in config.initial.iter().enumerate() {
        let mut record = RecordJson::new(i, Some(initial));
        let mut run = TimescaleRun::uniform(
            settings.lambda,
            settings.route,
            settings.horizon,
            settings.samples,
        );
        run.energy = settings.energy;
        run.rel_tol = settings.rel_tol;
        run.abs_tol = settings.abs_tol;
        let result =
            run_rescaled(&config.potential, initial.q(), initial.p(), &run).and_then(|ext| {
                let real = reconstruct_real_time(&ext)?;
                let reference = damped_newton_reference(
                    &config.potential,
                    settings.lambda,
                    initial.q(),
                    initial.p(),
                    real.times(),
                )?;
                let deviation =
                    real.states()
                        .iter()
                        .zip(&reference.states)
                        .fold(0.0f64, |m, (a, b)| {
                            a.coords()
                                .iter()
                                .zip(b.coords())
                                .fold(m, |m, (x, y)| m.max((x - y).abs()))
                        });
                let residual = friction_residual(&real, &config.potential, settings.lambda)?
                    .into_iter()
                    .fold(0.0f64, f64::max);
                Ok((ext, real, deviation, residual))
            });
        match result {
            Ok((ext, real, deviation, residual)) => {
                record.terminal_event = Some(real.terminal_event().into());
                record
                    .metrics
                    .insert("max_reference_deviation".into(), deviation);
                record.metrics.insert("friction_residual".into(), residual);
                record
                    .metrics
                    .insert("final_velocity".into(), real.last().p()[0]);
                record
                    .metrics
                    .insert("final_position".into(), real.last().q()[0]);
                let (traj, clock) = match settings.clock {
                    ClockChoice::RealTime => (&real, Clock::RealT),
                    ClockChoice::Curvilinear => (&ext.base, Clock::CurvilinearS),
                };
                let csv = write_csv(
                    traj,
                    &CsvOptions {
                        clock: Some(clock.as_str().into()),
                    },
                );
                out.file(&mut record, format!("timescale_{i:04}.csv"), csv);
            }
            Err(e) => record = record.failed(e),
        }
        out.records.push(record);
    }
    Ok(out)
}

#[derive(Debug, Serialize)]
struct WitnessJson {
    first: StateJson,
    second: StateJson,
    difference: f64,
}

#[derive(Debug, Serialize)]
struct VerdictJson {
    hamiltonian: String,
    verdict: &'static str,
    tolerance: f64,
    witness: Option<WitnessJson>,
}

fn liftcheck(config: &RunConfig) -> Result<Artifacts> {
    let settings = config
        .liftcheck
        .as_ref()
        .ok_or_else(|| CliError::Config("liftcheck: missing".into()))?;
    let n = config.structure.n();
    let h = match settings.target {
        LiftTarget::Mechanical => hamiltonian(config)?,
        LiftTarget::ToricMoment => {
            toric_moment_field(&config.structure, config.structure.modular_weight())
                .map_err(|e| CliError::Config(format!("liftcheck.hamiltonian: {e}")))?
        }
        LiftTarget::Translation => HamiltonianSpec::translation(n),
    };
    let mut out = Artifacts::default();
    let mut record = RecordJson::new(0, None);
    match projectability_test(
        &config.structure,
        &h,
        &settings.base_points,
        &settings.fibers,
        settings.tol,
    ) {
        Ok(LiftVerdict { verdict, witness }) => {
            let body = VerdictJson {
                hamiltonian: h.label(),
                verdict: verdict.as_str(),
                tolerance: settings.tol,
                witness: witness.map(|w| WitnessJson {
                    first: (&w.first).into(),
                    second: (&w.second).into(),
                    difference: w.difference,
                }),
            };
            let text = to_json(&body);
            out.stdout = Some(text.clone());
            out.file(&mut record, "verdict.json".into(), text);
        }
        Err(e) => record = record.failed(e),
    }
    out.records.push(record);
    Ok(out)
}
