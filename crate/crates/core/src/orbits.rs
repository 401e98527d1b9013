//! Qualitative orbit types, phase portraits and singular periodic orbits.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{PhaseState, PhaseStructure, StructureKind};
use crate::hamiltonians::{HamiltonianSpec, Potential, PotentialFamily};
use crate::integrate::solver::{advance, bisect};
use crate::integrate::{
    directed_field, integrate_directed, Direction, Event, EventKind, IntegratorConfig, Trajectory,
    EVENT_TIME_TOL,
};

/// Radius of the first-return ball around the initial state.
pub const RETURN_RADIUS: f64 = 1e-6;
/// Energy band around the pendulum separatrix reported as undetermined.
pub const HOMOCLINIC_BAND: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OrbitKind {
    FixedPoint,
    EscapeOrbit,
    Periodic,
    Unbounded,
    HeteroclinicSegment,
    Undetermined,
}

impl OrbitKind {
    pub fn as_str(self) -> &'static str {
        match self {
            OrbitKind::FixedPoint => "fixed_point",
            OrbitKind::EscapeOrbit => "escape_orbit",
            OrbitKind::Periodic => "periodic",
            OrbitKind::Unbounded => "unbounded",
            OrbitKind::HeteroclinicSegment => "heteroclinic_segment",
            OrbitKind::Undetermined => "undetermined",
        }
    }
}

impl std::fmt::Display for OrbitKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrbitClassification {
    pub kind: OrbitKind,
    pub period: Option<f64>,
    pub limit_state: Option<PhaseState>,
}

impl OrbitClassification {
    fn plain(kind: OrbitKind) -> Self {
        Self {
            kind,
            period: None,
            limit_state: None,
        }
    }
}

pub fn classify_orbit(
    traj: &Trajectory,
    structure: &PhaseStructure,
    h: &HamiltonianSpec,
) -> OrbitClassification {
    let terminal = traj.terminal_event();
    match terminal.kind {
        EventKind::FixedPoint if traj.len() == 1 => {
            return OrbitClassification::plain(OrbitKind::FixedPoint)
        }
        EventKind::FixedPoint => {
            return OrbitClassification {
                kind: OrbitKind::HeteroclinicSegment,
                period: None,
                limit_state: Some(traj.last().clone()),
            }
        }
        EventKind::ReachedZNeighborhood => {
            return OrbitClassification {
                kind: OrbitKind::EscapeOrbit,
                period: None,
                limit_state: Some(traj.last().clone()),
            }
        }
        EventKind::Blowup => return OrbitClassification::plain(OrbitKind::Unbounded),
        EventKind::TMaxReached => {}
    }
    if near_separatrix(h, traj.initial()) {
        return OrbitClassification::plain(OrbitKind::Undetermined);
    }
    match first_return(traj, structure, h) {
        Some(period) => OrbitClassification {
            kind: OrbitKind::Periodic,
            period: Some(period),
            limit_state: None,
        },
        None => OrbitClassification::plain(OrbitKind::Undetermined),
    }
}

fn near_separatrix(h: &HamiltonianSpec, initial: &PhaseState) -> bool {
    separatrix_energy(h).is_some_and(|level| {
        h.eval(initial)
            .is_ok_and(|e| (e - level).abs() < HOMOCLINIC_BAND)
    })
}

/// Period of the first return to the ball of radius `RETURN_RADIUS` around
/// the initial state, if any. Returns are detected as sign changes of the
/// radial speed `<x - x0, X(x)>` and refined by bisection over re-stepped
/// states.
fn first_return(traj: &Trajectory, structure: &PhaseStructure, h: &HamiltonianSpec) -> Option<f64> {
    let field = directed_field(structure, h, traj.direction());
    let x0 = traj.initial().coords();
    let dim = x0.len();
    let radial = |x: &[f64]| -> Result<f64> {
        let mut fx = vec![0.0; dim];
        field(x, &mut fx)?;
        let d = structure.difference(x, x0);
        Ok(d.iter().zip(&fx).map(|(a, b)| a * b).sum())
    };
    let floor = 10.0 * traj.step();
    let times = traj.times();
    let states = traj.states();
    let mut prev = radial(states[0].coords()).ok()?;
    for k in 1..states.len() {
        let g = radial(states[k].coords()).ok()?;
        if prev < 0.0 && g >= 0.0 && times[k] >= floor {
            let base = states[k - 1].coords();
            let reach = |d: f64| -> Result<Vec<f64>> {
                let mut y = advance(traj.method(), &field, base, d, times[k - 1])?;
                structure.wrap_angles(&mut y);
                Ok(y)
            };
            let dt = times[k] - times[k - 1];
            let delta = bisect(0.0, dt, EVENT_TIME_TOL, |d| Ok(radial(&reach(d)?)? >= 0.0)).ok()?;
            let y = reach(delta).ok()?;
            let dist = structure
                .difference(&y, x0)
                .iter()
                .fold(0.0f64, |m, v| m.max(v.abs()));
            if dist < RETURN_RADIUS {
                return Some(times[k - 1] + delta);
            }
        }
        prev = g;
    }
    None
}

/// Maximum deviation of `H` along `traj` from its initial value.
pub fn level_set_residual(traj: &Trajectory, h: &HamiltonianSpec) -> Result<f64> {
    let h0 = h.eval(traj.initial())?;
    traj.states()
        .iter()
        .try_fold(0.0f64, |m, s| Ok(m.max((h.eval(s)? - h0).abs())))
}

#[derive(Debug, Clone)]
pub struct PortraitEntry {
    pub forward: Trajectory,
    pub backward: Trajectory,
    pub classification: OrbitClassification,
    pub backward_classification: OrbitClassification,
}

#[derive(Debug, Clone)]
pub struct PortraitRecord {
    pub initial: PhaseState,
    pub outcome: Result<PortraitEntry>,
}

/// Integrates every grid point forward and backward in parallel. The
/// classification of a record is that of its forward run; output order
/// matches `grid`.
pub fn phase_portrait(
    structure: &PhaseStructure,
    h: &HamiltonianSpec,
    grid: &[PhaseState],
    config: &IntegratorConfig,
) -> Result<Vec<PortraitRecord>> {
    if grid.is_empty() {
        return Err(Error::InvalidArgument(
            "phase portrait grid is empty".into(),
        ));
    }
    config.validate()?;
    Ok(grid
        .par_iter()
        .map(|initial| PortraitRecord {
            initial: initial.clone(),
            outcome: portrait_entry(structure, h, initial, config),
        })
        .collect())
}

fn portrait_entry(
    structure: &PhaseStructure,
    h: &HamiltonianSpec,
    initial: &PhaseState,
    config: &IntegratorConfig,
) -> Result<PortraitEntry> {
    let forward = integrate_directed(structure, h, initial, config, Direction::Forward)?;
    let backward = integrate_directed(structure, h, initial, config, Direction::Backward)?;
    Ok(PortraitEntry {
        classification: classify_orbit(&forward, structure, h),
        backward_classification: classify_orbit(&backward, structure, h),
        forward,
        backward,
    })
}

/// Closed orbit made of two heteroclinic half-orbits joined by two fixed
/// points on the critical set.
#[derive(Debug, Clone)]
pub struct SingularPeriodicOrbit {
    pub upper_segment: Trajectory,
    pub lower_segment: Trajectory,
    pub endpoints: [PhaseState; 2],
}

/// Builds the singular periodic orbit of the twisted quadratic system on
/// the level `H = energy`. Each segment runs from the left to the right
/// endpoint, with times starting at minus the backward escape time.
pub fn assemble_singular_periodic(
    structure: &PhaseStructure,
    h: &HamiltonianSpec,
    energy: f64,
    config: &IntegratorConfig,
) -> Result<SingularPeriodicOrbit> {
    if structure.kind() != StructureKind::TwistedB || structure.n() != 1 {
        return Err(Error::InvalidStructure(
            "singular periodic orbits need a planar twisted structure".into(),
        ));
    }
    match h.potential() {
        Some(Potential::PureQuadratic { .. }) if !h.is_extended() => {}
        _ => {
            let family = h
                .potential()
                .map_or("non-mechanical", |p| p.family().as_str());
            return Err(Error::InvalidPotential(format!(
                "singular periodic orbits need a pure_quadratic potential, got {family}"
            )));
        }
    }
    if !(energy > 0.0 && energy.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "energy must be positive, got {energy}"
        )));
    }
    let p0 = (2.0 * energy).sqrt();
    let upper = half_orbit(structure, h, PhaseState::planar(0.0, p0), config)?;
    let lower = half_orbit(structure, h, PhaseState::planar(0.0, -p0), config)?;
    let left = 0.5 * (upper.initial().q()[0] + lower.initial().q()[0]);
    let right = 0.5 * (upper.last().q()[0] + lower.last().q()[0]);
    Ok(SingularPeriodicOrbit {
        upper_segment: upper,
        lower_segment: lower,
        endpoints: [
            PhaseState::planar(left, 0.0),
            PhaseState::planar(right, 0.0),
        ],
    })
}

fn half_orbit(
    structure: &PhaseStructure,
    h: &HamiltonianSpec,
    start: PhaseState,
    config: &IntegratorConfig,
) -> Result<Trajectory> {
    let fwd = integrate_directed(structure, h, &start, config, Direction::Forward)?;
    let bwd = integrate_directed(structure, h, &start, config, Direction::Backward)?;
    for run in [&fwd, &bwd] {
        let ev = run.terminal_event();
        if ev.kind != EventKind::ReachedZNeighborhood {
            return Err(Error::InvalidArgument(format!(
                "half-orbit ended with {} at t={} before reaching the critical set",
                ev.kind, ev.time
            )));
        }
    }
    let mut times: Vec<f64> = bwd.times().iter().rev().map(|t| -t).collect();
    let mut states: Vec<PhaseState> = bwd.states().iter().rev().cloned().collect();
    times.extend_from_slice(&fwd.times()[1..]);
    states.extend_from_slice(&fwd.states()[1..]);
    Trajectory::from_parts(
        times,
        states,
        Event {
            time: fwd.terminal_event().time,
            kind: EventKind::ReachedZNeighborhood,
        },
        structure.kind(),
        h.label(),
        Direction::Forward,
        fwd.method(),
        fwd.step(),
    )
}

/// Pendulum energy above which twisted orbits wind around the cylinder.
pub fn separatrix_energy(h: &HamiltonianSpec) -> Option<f64> {
    match h.potential() {
        Some(p) if p.family() == PotentialFamily::Periodic && !h.is_extended() => {
            p.lambda().map(|l| l / 2.0)
        }
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mech(p: Potential) -> HamiltonianSpec {
        HamiltonianSpec::mechanical(1, p).unwrap()
    }

    fn twisted() -> PhaseStructure {
        PhaseStructure::twisted(1, 1.0).unwrap()
    }

    #[test]
    fn stokes_is_escape_orbit() {
        let h = mech(Potential::Linear { lambda: 1.0 });
        let traj = crate::integrate::integrate(
            &twisted(),
            &h,
            &PhaseState::planar(0.0, 1.0),
            &IntegratorConfig::rk4(1e-3, 40.0),
        )
        .unwrap();
        let c = classify_orbit(&traj, &twisted(), &h);
        assert_eq!(c.kind, OrbitKind::EscapeOrbit);
        let limit = c.limit_state.unwrap();
        assert!((limit.q()[0] - 1.0).abs() < 1e-6);
        assert!(limit.p()[0].abs() < 1e-6);
        assert!(c.period.is_none());
    }

    #[test]
    fn rest_point_is_fixed_point() {
        let h = mech(Potential::Periodic { lambda: 1.0 });
        let traj = crate::integrate::integrate(
            &twisted(),
            &h,
            &PhaseState::planar(1.3, 0.0),
            &IntegratorConfig::default(),
        )
        .unwrap();
        assert_eq!(
            classify_orbit(&traj, &twisted(), &h).kind,
            OrbitKind::FixedPoint
        );
    }

    #[test]
    fn pendulum_rotation_is_periodic() {
        let structure = twisted().with_angular(vec![true]).unwrap();
        let h = mech(Potential::Periodic { lambda: 1.0 });
        let traj = crate::integrate::integrate(
            &structure,
            &h,
            &PhaseState::planar(0.0, 2.0),
            &IntegratorConfig::rk4(1e-3, 10.0),
        )
        .unwrap();
        let c = classify_orbit(&traj, &structure, &h);
        assert_eq!(c.kind, OrbitKind::Periodic);
        // H = 2.5, period 2 pi / sqrt(4 H^2 - lambda^2)
        let expected = std::f64::consts::TAU / 24.0f64.sqrt();
        assert!(
            (c.period.unwrap() - expected).abs() < 1e-8,
            "{:?}",
            c.period
        );
        assert!(level_set_residual(&traj, &h).unwrap() < 1e-8);
    }

    #[test]
    fn portrait_canonical_ellipses() {
        let h = mech(Potential::PureQuadratic { lambda: 2.0 });
        let grid: Vec<_> = [(1.0, 0.0), (2.0, 0.0), (3.0, 0.0), (0.0, 0.0)]
            .map(|(q, p)| PhaseState::planar(q, p))
            .into();
        let records = phase_portrait(
            &PhaseStructure::canonical(1),
            &h,
            &grid,
            &IntegratorConfig::rk4(1e-3, 10.0),
        )
        .unwrap();
        assert_eq!(records.len(), 4);
        for (r, g) in records.iter().zip(&grid) {
            assert_eq!(&r.initial, g);
        }
        let kinds: Vec<_> = records
            .iter()
            .map(|r| r.outcome.as_ref().unwrap().classification.kind)
            .collect();
        assert_eq!(
            kinds,
            [
                OrbitKind::Periodic,
                OrbitKind::Periodic,
                OrbitKind::Periodic,
                OrbitKind::FixedPoint
            ]
        );
        let period = records[1]
            .outcome
            .as_ref()
            .unwrap()
            .classification
            .period
            .unwrap();
        assert!((period - std::f64::consts::TAU).abs() < 1e-8);
    }

    #[test]
    fn portrait_rejects_empty_grid() {
        let h = mech(Potential::Zero);
        assert!(phase_portrait(&twisted(), &h, &[], &IntegratorConfig::default()).is_err());
    }

    #[test]
    fn portrait_records_errors_per_entry() {
        let h = mech(Potential::Linear { lambda: 1.0 });
        let grid = vec![
            PhaseState::planar(0.0, 1.0),
            PhaseState::planar(f64::NAN, 1.0),
        ];
        let records =
            phase_portrait(&twisted(), &h, &grid, &IntegratorConfig::rk4(1e-3, 5.0)).unwrap();
        assert!(records[0].outcome.is_ok());
        assert!(records[1].outcome.is_err());
    }

    #[test]
    fn level_set_of_single_state_is_zero() {
        let h = mech(Potential::Linear { lambda: 1.0 });
        let traj = crate::integrate::integrate(
            &twisted(),
            &h,
            &PhaseState::planar(2.0, 0.0),
            &IntegratorConfig::default(),
        )
        .unwrap();
        assert_eq!(level_set_residual(&traj, &h).unwrap(), 0.0);
    }

    #[test]
    fn singular_periodic_endpoints() {
        for (lambda, expected) in [(1.0, 2.0), (4.0, 1.0)] {
            let h = mech(Potential::PureQuadratic { lambda });
            let orbit =
                assemble_singular_periodic(&twisted(), &h, 1.0, &IntegratorConfig::default())
                    .unwrap();
            assert!((orbit.endpoints[0].q()[0] + expected).abs() < 1e-5);
            assert!((orbit.endpoints[1].q()[0] - expected).abs() < 1e-5);
            for seg in [&orbit.upper_segment, &orbit.lower_segment] {
                assert!(seg.times()[0] < 0.0);
                assert!((h.eval(seg.initial()).unwrap() - 1.0).abs() < 1e-8);
                assert!((h.eval(seg.last()).unwrap() - 1.0).abs() < 1e-8);
            }
            assert!(orbit.upper_segment.states().iter().all(|s| s.p()[0] > 0.0));
            assert!(orbit.lower_segment.states().iter().all(|s| s.p()[0] < 0.0));
        }
    }

    #[test]
    fn singular_periodic_rejects_bad_inputs() {
        let h = mech(Potential::PureQuadratic { lambda: 1.0 });
        let cfg = IntegratorConfig::default();
        assert!(assemble_singular_periodic(&twisted(), &h, 0.0, &cfg).is_err());
        let lin = mech(Potential::Linear { lambda: 1.0 });
        assert!(matches!(
            assemble_singular_periodic(&twisted(), &lin, 1.0, &cfg),
            Err(Error::InvalidPotential(_))
        ));
    }
}
