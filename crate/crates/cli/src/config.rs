//! Run configuration: JSON schema, parsing and validation.

use std::fmt;
use std::path::PathBuf;

use bflow_core::liftcheck::DEFAULT_TOLERANCE;
use bflow_core::timescale::Route;
use bflow_core::{
    HamiltonianSpec, IntegratorConfig, Method, PhaseState, PhaseStructure, Potential,
    PotentialFamily, StructureKind,
};
use serde::Deserialize;

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Simulate,
    Portrait,
    Classify,
    OracleCompare,
    Timescale,
    Liftcheck,
}

impl Command {
    pub fn as_str(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Portrait => "portrait",
            Command::Classify => "classify",
            Command::OracleCompare => "oracle-compare",
            Command::Timescale => "timescale",
            Command::Liftcheck => "liftcheck",
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    command: Command,
    structure: Option<RawStructure>,
    potential: Option<RawPotential>,
    initial: Option<Vec<RawInitial>>,
    grid: Option<RawGrid>,
    integrator: Option<RawIntegrator>,
    output: Option<PathBuf>,
    timescale: Option<RawTimescale>,
    liftcheck: Option<RawLiftcheck>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawStructure {
    kind: StructureKind,
    c: Option<f64>,
    n: Option<usize>,
    singular_index: Option<usize>,
    angular: Option<Vec<bool>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPotential {
    family: PotentialFamily,
    lambda: Option<f64>,
    alpha: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum Coords {
    One(f64),
    Many(Vec<f64>),
}

impl Coords {
    fn into_vec(self) -> Vec<f64> {
        match self {
            Coords::One(v) => vec![v],
            Coords::Many(v) => v,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawInitial {
    q: Coords,
    p: Coords,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAxis {
    from: Option<f64>,
    to: Option<f64>,
    count: Option<usize>,
    values: Option<Vec<f64>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGrid {
    q: RawAxis,
    p: RawAxis,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawIntegrator {
    method: Option<Method>,
    step: Option<f64>,
    rel_tol: Option<f64>,
    abs_tol: Option<f64>,
    t_max: Option<f64>,
    z_epsilon: Option<f64>,
    fp_epsilon: Option<f64>,
    blowup_bound: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
pub enum ClockChoice {
    #[serde(rename = "t")]
    RealTime,
    #[serde(rename = "s")]
    Curvilinear,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTimescale {
    lambda: f64,
    route: Option<Route>,
    clock: Option<ClockChoice>,
    horizon: Option<f64>,
    samples: Option<usize>,
    energy: Option<f64>,
    rel_tol: Option<f64>,
    abs_tol: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LiftTarget {
    Mechanical,
    ToricMoment,
    Translation,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLiftcheck {
    hamiltonian: Option<LiftTarget>,
    base_points: Vec<Coords>,
    fibers: Option<Vec<Coords>>,
    tol: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimescaleSettings {
    pub lambda: f64,
    pub route: Route,
    pub clock: ClockChoice,
    pub horizon: f64,
    pub samples: usize,
    pub energy: Option<f64>,
    pub rel_tol: f64,
    pub abs_tol: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LiftcheckSettings {
    pub target: LiftTarget,
    pub base_points: Vec<Vec<f64>>,
    pub fibers: Vec<Vec<f64>>,
    pub tol: f64,
}

/// A validated run configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub command: Command,
    pub structure: PhaseStructure,
    pub potential: Potential,
    pub initial: Vec<PhaseState>,
    pub integrator: IntegratorConfig,
    pub output: Option<PathBuf>,
    pub timescale: Option<TimescaleSettings>,
    pub liftcheck: Option<LiftcheckSettings>,
    /// Benign oddities noticed while validating, e.g. ignored settings.
    pub warnings: Vec<String>,
}

impl RunConfig {
    pub fn hamiltonian(&self) -> bflow_core::Result<HamiltonianSpec> {
        HamiltonianSpec::mechanical(self.structure.n(), self.potential.clone())
    }
}

fn invalid(path: &str, message: impl fmt::Display) -> CliError {
    CliError::Config(format!("{path}: {message}"))
}

fn positive(path: &str, v: f64) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(invalid(
            path,
            format!("must be positive and finite, got {v}"),
        ))
    }
}

/// Parses and validates a JSON run configuration. Unknown keys and type
/// errors are reported with the path of the offending key.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let raw: RawConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        if path == "." {
            CliError::Config(inner.to_string())
        } else {
            invalid(&path, inner)
        }
    })?;
    validate(raw)
}

fn validate(raw: RawConfig) -> Result<RunConfig> {
    let mut warnings = Vec::new();
    if raw.command == Command::Timescale && raw.structure.is_some() {
        warnings.push(
            "timescale runs only use structure.n; the extended structure is built internally"
                .into(),
        );
    }
    let structure = build_structure(raw.structure, &mut warnings)?;
    let n = structure.n();
    let potential = match raw.potential {
        Some(p) => build_potential(p)?,
        None if raw.command == Command::Liftcheck => Potential::Zero,
        None => return Err(invalid("potential", "missing")),
    };
    let integrator = build_integrator(
        raw.integrator.unwrap_or_default(),
        &structure,
        &mut warnings,
    )?;

    let needs_initial = !matches!(raw.command, Command::Liftcheck);
    let initial = match (raw.initial, raw.grid) {
        (Some(_), Some(_)) => {
            return Err(invalid("grid", "give either `initial` or `grid`, not both"))
        }
        (Some(list), None) => list
            .into_iter()
            .enumerate()
            .map(|(i, c)| {
                let (q, p) = (c.q.into_vec(), c.p.into_vec());
                if q.len() != n || p.len() != n {
                    return Err(invalid(
                        &format!("initial[{i}]"),
                        format!(
                            "expected {n} positions and momenta, got {} and {}",
                            q.len(),
                            p.len()
                        ),
                    ));
                }
                if q.iter().chain(&p).any(|v| !v.is_finite()) {
                    return Err(invalid(&format!("initial[{i}]"), "non-finite coordinate"));
                }
                PhaseState::new(q, p).map_err(|e| invalid(&format!("initial[{i}]"), e))
            })
            .collect::<Result<Vec<_>>>()?,
        (None, Some(grid)) => {
            if n != 1 {
                return Err(invalid("grid", "grids are only supported for n = 1"));
            }
            let qs = expand_axis("grid.q", grid.q)?;
            let ps = expand_axis("grid.p", grid.p)?;
            qs.iter()
                .flat_map(|&q| ps.iter().map(move |&p| PhaseState::planar(q, p)))
                .collect()
        }
        (None, None) => Vec::new(),
    };
    if needs_initial && initial.is_empty() {
        return Err(invalid(
            "initial",
            "at least one initial condition is required",
        ));
    }

    let timescale = match (raw.command, raw.timescale) {
        (Command::Timescale, Some(t)) => Some(build_timescale(t)?),
        (Command::Timescale, None) => return Err(invalid("timescale", "missing")),
        (_, Some(_)) => {
            warnings.push(format!("timescale section is ignored by {}", raw.command));
            None
        }
        (_, None) => None,
    };
    let liftcheck = match (raw.command, raw.liftcheck) {
        (Command::Liftcheck, Some(l)) => Some(build_liftcheck(l, n)?),
        (Command::Liftcheck, None) => return Err(invalid("liftcheck", "missing")),
        (_, Some(_)) => {
            warnings.push(format!("liftcheck section is ignored by {}", raw.command));
            None
        }
        (_, None) => None,
    };

    let config = RunConfig {
        command: raw.command,
        structure,
        potential,
        initial,
        integrator,
        output: raw.output,
        timescale,
        liftcheck,
        warnings,
    };
    if config.command != Command::Timescale {
        config.hamiltonian().map_err(|e| invalid("potential", e))?;
    }
    Ok(config)
}

fn build_structure(
    raw: Option<RawStructure>,
    warnings: &mut Vec<String>,
) -> Result<PhaseStructure> {
    let Some(raw) = raw else {
        return PhaseStructure::twisted(1, 1.0).map_err(|e| invalid("structure", e));
    };
    let n = raw.n.unwrap_or(1);
    if n == 0 {
        return Err(invalid("structure.n", "must be at least 1"));
    }
    if !raw.kind.is_singular() {
        if raw.c.is_some() {
            warnings.push(format!(
                "structure.c is ignored for {} structures",
                raw.kind
            ));
        }
        if raw.singular_index.is_some() {
            warnings.push(format!(
                "structure.singular_index is ignored for {} structures",
                raw.kind
            ));
        }
    }
    if raw.kind.is_extended() {
        return Err(invalid(
            "structure.kind",
            format!("{} structures are built by the timescale command", raw.kind),
        ));
    }
    let c = raw.c.unwrap_or(1.0);
    if raw.kind.is_singular() && (c == 0.0 || !c.is_finite()) {
        return Err(invalid(
            "structure.c",
            format!("must be finite and nonzero, got {c}"),
        ));
    }
    let index = raw.singular_index.unwrap_or(0);
    if raw.kind.is_singular() && index >= n {
        return Err(invalid(
            "structure.singular_index",
            format!("must be below n = {n}, got {index}"),
        ));
    }
    let angular = raw.angular.unwrap_or_default();
    if !angular.is_empty() && angular.len() != n {
        return Err(invalid(
            "structure.angular",
            format!("expected {n} entries, got {}", angular.len()),
        ));
    }
    PhaseStructure::new(raw.kind, 2 * n, c, index, angular).map_err(|e| invalid("structure", e))
}

fn build_potential(raw: RawPotential) -> Result<Potential> {
    if raw.alpha.is_some() && raw.family != PotentialFamily::GeneralQuadratic {
        return Err(invalid(
            "potential.alpha",
            format!(
                "only valid for general_quadratic, not {}",
                raw.family.as_str()
            ),
        ));
    }
    let lambda = || -> Result<f64> {
        let v = raw
            .lambda
            .ok_or_else(|| invalid("potential.lambda", "missing"))?;
        positive("potential.lambda", v)
    };
    Ok(match raw.family {
        PotentialFamily::Zero => {
            if raw.lambda.is_some() {
                return Err(invalid(
                    "potential.lambda",
                    "not used by the zero potential",
                ));
            }
            Potential::Zero
        }
        PotentialFamily::Linear => Potential::Linear { lambda: lambda()? },
        PotentialFamily::PureQuadratic => Potential::PureQuadratic { lambda: lambda()? },
        PotentialFamily::GeneralQuadratic => {
            let alpha = raw
                .alpha
                .ok_or_else(|| invalid("potential.alpha", "missing"))?;
            if !alpha.is_finite() {
                return Err(invalid("potential.alpha", "must be finite"));
            }
            Potential::GeneralQuadratic {
                lambda: lambda()?,
                alpha,
            }
        }
        PotentialFamily::Periodic => Potential::Periodic { lambda: lambda()? },
        PotentialFamily::Custom => {
            return Err(invalid(
                "potential.family",
                "custom potentials are library-only",
            ))
        }
    })
}

fn build_integrator(
    raw: RawIntegrator,
    structure: &PhaseStructure,
    warnings: &mut Vec<String>,
) -> Result<IntegratorConfig> {
    let d = IntegratorConfig::default();
    let pick =
        |path: &str, v: Option<f64>, default: f64| v.map_or(Ok(default), |v| positive(path, v));
    if raw.z_epsilon.is_some() && !structure.kind().is_singular() {
        warnings.push(format!(
            "integrator.z_epsilon is ignored for {} structures, which have no critical set",
            structure.kind()
        ));
    }
    let method = raw.method.unwrap_or(d.method);
    if method == Method::Rk4Fixed && (raw.rel_tol.is_some() || raw.abs_tol.is_some()) {
        warnings.push("integrator.rel_tol and abs_tol only apply to rk_adaptive".into());
    }
    let config = IntegratorConfig {
        method,
        step: pick("integrator.step", raw.step, d.step)?,
        rel_tol: pick("integrator.rel_tol", raw.rel_tol, d.rel_tol)?,
        abs_tol: pick("integrator.abs_tol", raw.abs_tol, d.abs_tol)?,
        t_max: pick("integrator.t_max", raw.t_max, d.t_max)?,
        z_epsilon: pick("integrator.z_epsilon", raw.z_epsilon, d.z_epsilon)?,
        fp_epsilon: pick("integrator.fp_epsilon", raw.fp_epsilon, d.fp_epsilon)?,
        blowup_bound: pick("integrator.blowup_bound", raw.blowup_bound, d.blowup_bound)?,
    };
    if config.step >= config.t_max {
        return Err(invalid(
            "integrator.step",
            format!("must be smaller than t_max = {}", config.t_max),
        ));
    }
    Ok(config)
}

fn expand_axis(path: &str, axis: RawAxis) -> Result<Vec<f64>> {
    let values = match (axis.values, axis.from, axis.to, axis.count) {
        (Some(values), None, None, None) => values,
        (None, Some(from), Some(to), Some(count)) => match count {
            0 => return Err(invalid(&format!("{path}.count"), "must be at least 1")),
            1 => vec![from],
            _ => (0..count)
                .map(|k| from + (to - from) * k as f64 / (count - 1) as f64)
                .collect(),
        },
        _ => {
            return Err(invalid(
                path,
                "give either `values` or all of `from`, `to` and `count`",
            ))
        }
    };
    if values.is_empty() {
        return Err(invalid(path, "expands to no values"));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(invalid(path, "non-finite value"));
    }
    Ok(values)
}

fn build_timescale(raw: RawTimescale) -> Result<TimescaleSettings> {
    let samples = raw.samples.unwrap_or(1000);
    if samples == 0 {
        return Err(invalid("timescale.samples", "must be at least 1"));
    }
    Ok(TimescaleSettings {
        lambda: positive("timescale.lambda", raw.lambda)?,
        route: raw.route.unwrap_or(Route::Rescaled),
        clock: raw.clock.unwrap_or(ClockChoice::RealTime),
        horizon: positive("timescale.horizon", raw.horizon.unwrap_or(10.0))?,
        samples,
        energy: raw.energy,
        rel_tol: positive("timescale.rel_tol", raw.rel_tol.unwrap_or(1e-12))?,
        abs_tol: positive("timescale.abs_tol", raw.abs_tol.unwrap_or(1e-12))?,
    })
}

fn build_liftcheck(raw: RawLiftcheck, n: usize) -> Result<LiftcheckSettings> {
    let points = |path: &str, list: Vec<Coords>| -> Result<Vec<Vec<f64>>> {
        list.into_iter()
            .enumerate()
            .map(|(i, c)| {
                let v = c.into_vec();
                if v.len() != n {
                    return Err(invalid(
                        &format!("{path}[{i}]"),
                        format!("expected {n} values, got {}", v.len()),
                    ));
                }
                Ok(v)
            })
            .collect()
    };
    let base_points = points("liftcheck.base_points", raw.base_points)?;
    if base_points.is_empty() {
        return Err(invalid(
            "liftcheck.base_points",
            "at least one base point is required",
        ));
    }
    let fibers = match raw.fibers {
        Some(f) => points("liftcheck.fibers", f)?,
        None => bflow_core::liftcheck::DEFAULT_FIBERS
            .iter()
            .map(|&p| vec![p; n])
            .collect(),
    };
    if fibers.len() < 2 {
        return Err(invalid(
            "liftcheck.fibers",
            "at least two fiber samples are required",
        ));
    }
    let tol = raw.tol.unwrap_or(DEFAULT_TOLERANCE);
    if !(tol >= 0.0 && tol.is_finite()) {
        return Err(invalid(
            "liftcheck.tol",
            format!("must be non-negative, got {tol}"),
        ));
    }
    Ok(LiftcheckSettings {
        target: raw.hamiltonian.unwrap_or(LiftTarget::Mechanical),
        base_points,
        fibers,
        tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "command": "simulate",
        "structure": {"kind": "twisted_b"},
        "potential": {"family": "linear", "lambda": 1.0},
        "initial": [{"q": 0.0, "p": 1.0}]
    }"#;

    fn message(text: &str) -> String {
        parse_config(text).unwrap_err().to_string()
    }

    #[test]
    fn minimal_simulate() {
        let c = parse_config(MINIMAL).unwrap();
        assert_eq!(c.command, Command::Simulate);
        assert_eq!(c.structure.kind(), StructureKind::TwistedB);
        assert!(matches!(c.potential, Potential::Linear { lambda } if lambda == 1.0));
        assert_eq!(c.initial, vec![PhaseState::planar(0.0, 1.0)]);
        assert_eq!(c.integrator, IntegratorConfig::default());
        assert!(c.warnings.is_empty());
    }

    #[test]
    fn z_epsilon_on_canonical_warns() {
        let c = parse_config(
            r#"{"command": "simulate", "structure": {"kind": "canonical"},
                "potential": {"family": "linear", "lambda": 1.0},
                "initial": [{"q": 0.0, "p": 1.0}], "integrator": {"z_epsilon": 1e-3}}"#,
        )
        .unwrap();
        assert_eq!(c.warnings.len(), 1);
        assert!(c.warnings[0].contains("z_epsilon"));
    }

    #[test]
    fn negative_lambda_names_path() {
        let m = message(
            r#"{"command": "simulate", "potential": {"family": "linear", "lambda": -1},
                "initial": [{"q": 0.0, "p": 1.0}]}"#,
        );
        assert!(m.contains("potential.lambda"), "{m}");
    }

    #[test]
    fn unknown_key_names_path() {
        let m = message(
            r#"{"command": "simulate", "potential": {"family": "linear", "lambda": 1, "lamda": 2},
                "initial": [{"q": 0.0, "p": 1.0}]}"#,
        );
        assert!(m.contains("potential") && m.contains("lamda"), "{m}");
        let m = message(
            r#"{"command": "simulate", "potential": {"family": "linear", "lambda": 1},
                "initial": [{"q": 0.0, "p": 1.0}], "integrator": {"stepsize": 1}}"#,
        );
        assert!(m.contains("integrator") && m.contains("stepsize"), "{m}");
    }

    #[test]
    fn alpha_requires_general_quadratic() {
        let m = message(
            r#"{"command": "simulate", "potential": {"family": "linear", "lambda": 1, "alpha": 0.5},
                "initial": [{"q": 0.0, "p": 1.0}]}"#,
        );
        assert!(m.contains("potential.alpha"), "{m}");
    }

    #[test]
    fn malformed_json() {
        assert!(matches!(
            parse_config("{\"command\": "),
            Err(CliError::Config(_))
        ));
    }

    #[test]
    fn grid_expansion() {
        let c = parse_config(
            r#"{"command": "portrait", "potential": {"family": "linear", "lambda": 1},
                "grid": {"q": {"from": -3, "to": 7, "count": 11}, "p": {"values": [1, -1]}}}"#,
        )
        .unwrap();
        assert_eq!(c.initial.len(), 22);
        assert_eq!(c.initial[0], PhaseState::planar(-3.0, 1.0));
        assert_eq!(c.initial[1], PhaseState::planar(-3.0, -1.0));
        assert_eq!(c.initial[21], PhaseState::planar(7.0, -1.0));
        let m = message(
            r#"{"command": "portrait", "potential": {"family": "linear", "lambda": 1},
                "grid": {"q": {"from": 0, "to": 1, "count": 0}, "p": {"values": [1]}}}"#,
        );
        assert!(m.contains("grid.q.count"), "{m}");
    }

    #[test]
    fn step_must_be_below_horizon() {
        let m = message(
            r#"{"command": "simulate", "potential": {"family": "zero"},
                "initial": [{"q": 0.0, "p": 1.0}], "integrator": {"step": 2, "t_max": 1}}"#,
        );
        assert!(m.contains("integrator.step"), "{m}");
    }

    #[test]
    fn timescale_and_liftcheck_sections() {
        let c = parse_config(
            r#"{"command": "timescale", "potential": {"family": "pure_quadratic", "lambda": 2},
                "initial": [{"q": 1.0, "p": 0.0}],
                "timescale": {"lambda": 0.2, "route": "s_coordinates", "clock": "s"}}"#,
        )
        .unwrap();
        let t = c.timescale.unwrap();
        assert_eq!(
            (t.route, t.clock, t.samples),
            (Route::SCoordinates, ClockChoice::Curvilinear, 1000)
        );

        let c = parse_config(
            r#"{"command": "liftcheck", "potential": {"family": "linear", "lambda": 1},
                "liftcheck": {"base_points": [0.0]}}"#,
        )
        .unwrap();
        let l = c.liftcheck.unwrap();
        assert_eq!(l.fibers, vec![vec![1.0], vec![2.0]]);
        assert_eq!(l.tol, 1e-9);
        assert!(parse_config(r#"{"command": "timescale", "potential": {"family": "zero"}, "initial": [{"q": 0, "p": 1}]}"#).is_err());
    }

    #[test]
    fn dimension_checks() {
        let m = message(
            r#"{"command": "simulate", "structure": {"kind": "twisted_b", "n": 2},
                "potential": {"family": "zero"}, "initial": [{"q": 0.0, "p": 1.0}]}"#,
        );
        assert!(m.contains("initial[0]"), "{m}");
    }
}
