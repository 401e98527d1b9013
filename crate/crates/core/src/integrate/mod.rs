//! Time integration of Hamiltonian vector fields with event detection.
//!
//! The integrator stops on the first of: the time horizon, a blowup (state
//! beyond `blowup_bound` or a non-finite field), a fixed point (field norm
//! below `fp_epsilon`), or arrival in the `z_epsilon` neighborhood of the
//! critical set when the run started outside it. Arrival events are
//! localized by bisection over re-stepped states from the last accepted
//! sample.

mod csv;
pub(crate) mod solver;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{check_compatible, field_into, PhaseState, PhaseStructure, StructureKind};
use crate::hamiltonians::HamiltonianSpec;

pub use self::csv::{format_float, write_csv, CsvOptions};
pub use self::solver::Method;
use self::solver::{advance, bisect, dopri5, error_norm, rk4, step_factor};

/// Time tolerance for event localization.
pub const EVENT_TIME_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IntegratorConfig {
    pub method: Method,
    pub step: f64,
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub t_max: f64,
    pub z_epsilon: f64,
    pub fp_epsilon: f64,
    pub blowup_bound: f64,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            method: Method::Rk4Fixed,
            step: 1e-3,
            rel_tol: 1e-10,
            abs_tol: 1e-10,
            t_max: 20.0,
            z_epsilon: 1e-6,
            fp_epsilon: 1e-12,
            blowup_bound: 1e9,
        }
    }
}

impl IntegratorConfig {
    pub fn rk4(step: f64, t_max: f64) -> Self {
        Self {
            step,
            t_max,
            ..Self::default()
        }
    }

    pub fn adaptive(t_max: f64) -> Self {
        Self {
            method: Method::RkAdaptive,
            step: 1e-3,
            t_max,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("step", self.step),
            ("rel_tol", self.rel_tol),
            ("abs_tol", self.abs_tol),
            ("t_max", self.t_max),
            ("z_epsilon", self.z_epsilon),
            ("fp_epsilon", self.fp_epsilon),
            ("blowup_bound", self.blowup_bound),
        ];
        for (name, value) in fields {
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::InvalidConfig(format!(
                    "{name} must be positive and finite, got {value}"
                )));
            }
        }
        if self.step >= self.t_max {
            return Err(Error::InvalidConfig(format!(
                "step {} must be smaller than t_max {}",
                self.step, self.t_max
            )));
        }
        Ok(())
    }

    pub(crate) fn step_bounds(&self) -> (f64, f64) {
        (1e-12, self.t_max / 10.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EventKind {
    #[serde(rename = "reached_Z_neighborhood")]
    ReachedZNeighborhood,
    #[serde(rename = "fixed_point")]
    FixedPoint,
    #[serde(rename = "blowup")]
    Blowup,
    #[serde(rename = "t_max_reached")]
    TMaxReached,
}

impl EventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::ReachedZNeighborhood => "reached_Z_neighborhood",
            EventKind::FixedPoint => "fixed_point",
            EventKind::Blowup => "blowup",
            EventKind::TMaxReached => "t_max_reached",
        }
    }
}

impl std::fmt::Display for EventKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub time: f64,
    pub kind: EventKind,
}

/// Backward runs integrate the negated field; their times count elapsed
/// reversed time and are still increasing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Forward,
    Backward,
}

impl Direction {
    fn sign(self) -> f64 {
        match self {
            Direction::Forward => 1.0,
            Direction::Backward => -1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    times: Vec<f64>,
    states: Vec<PhaseState>,
    events: Vec<Event>,
    structure: StructureKind,
    hamiltonian: String,
    direction: Direction,
    method: Method,
    step: f64,
}

impl Trajectory {
    /// Assembles a trajectory from raw parts, checking the invariants.
    pub fn from_parts(
        times: Vec<f64>,
        states: Vec<PhaseState>,
        terminal: Event,
        structure: StructureKind,
        hamiltonian: String,
        direction: Direction,
        method: Method,
        step: f64,
    ) -> Result<Self> {
        if times.is_empty() || times.len() != states.len() {
            return Err(Error::InvalidArgument(format!(
                "{} times for {} states",
                times.len(),
                states.len()
            )));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::NonMonotoneTime);
        }
        Ok(Self {
            times,
            states,
            events: vec![terminal],
            structure,
            hamiltonian,
            direction,
            method,
            step,
        })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn states(&self) -> &[PhaseState] {
        &self.states
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn terminal_event(&self) -> Event {
        *self.events.last().expect("trajectory has a terminal event")
    }

    pub fn initial(&self) -> &PhaseState {
        &self.states[0]
    }

    pub fn last(&self) -> &PhaseState {
        self.states.last().expect("nonempty trajectory")
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn structure_kind(&self) -> StructureKind {
        self.structure
    }

    pub fn hamiltonian_label(&self) -> &str {
        &self.hamiltonian
    }

    pub fn direction(&self) -> Direction {
        self.direction
    }

    pub fn method(&self) -> Method {
        self.method
    }

    /// Nominal (fixed or initial) step of the run.
    pub fn step(&self) -> f64 {
        self.step
    }
}

/// One explicit RK4 step of the Hamiltonian field.
pub fn step(
    structure: &PhaseStructure,
    h: &HamiltonianSpec,
    state: &PhaseState,
    dt: f64,
) -> Result<PhaseState> {
    step_with(Method::Rk4Fixed, structure, h, state, dt)
}

/// One step of `method` (the fifth-order Dormand-Prince solution for
/// `RkAdaptive`) without error control.
pub fn step_with(
    method: Method,
    structure: &PhaseStructure,
    h: &HamiltonianSpec,
    state: &PhaseState,
    dt: f64,
) -> Result<PhaseState> {
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "dt must be positive, got {dt}"
        )));
    }
    check_compatible(structure, h)?;
    if state.coords().len() != structure.state_len() {
        return Err(Error::DimensionMismatch {
            expected: structure.state_len(),
            got: state.coords().len(),
        });
    }
    let field = directed_field(structure, h, Direction::Forward);
    let mut x = advance(method, &field, state.coords(), dt, 0.0)?;
    structure.wrap_angles(&mut x);
    PhaseState::from_coords(state.n(), x)
}

pub(crate) fn directed_field<'a>(
    structure: &'a PhaseStructure,
    h: &'a HamiltonianSpec,
    direction: Direction,
) -> impl Fn(&[f64], &mut [f64]) -> Result<()> + 'a {
    let sign = direction.sign();
    move |x: &[f64], out: &mut [f64]| {
        field_into(structure, h, x, out)?;
        if sign < 0.0 {
            out.iter_mut().for_each(|v| *v = -*v);
        }
        Ok(())
    }
}

pub fn integrate(
    structure: &PhaseStructure,
    h: &HamiltonianSpec,
    initial: &PhaseState,
    config: &IntegratorConfig,
) -> Result<Trajectory> {
    integrate_directed(structure, h, initial, config, Direction::Forward)
}

pub fn integrate_directed(
    structure: &PhaseStructure,
    h: &HamiltonianSpec,
    initial: &PhaseState,
    config: &IntegratorConfig,
    direction: Direction,
) -> Result<Trajectory> {
    config.validate()?;
    check_compatible(structure, h)?;
    if initial.coords().len() != structure.state_len() {
        return Err(Error::DimensionMismatch {
            expected: structure.state_len(),
            got: initial.coords().len(),
        });
    }
    if !initial.is_finite() {
        return Err(Error::InvalidState("initial state is not finite".into()));
    }
    let n = initial.n();
    let field = directed_field(structure, h, direction);
    let mut x = initial.coords().to_vec();
    structure.wrap_angles(&mut x);
    let mut fx = vec![0.0; x.len()];
    field(&x, &mut fx)?;

    let mut times = vec![0.0];
    let mut states = vec![x.clone()];
    let finish = |times: Vec<f64>, states: Vec<Vec<f64>>, kind: EventKind| -> Result<Trajectory> {
        let time = *times.last().expect("nonempty");
        let states = states
            .into_iter()
            .map(|c| PhaseState::from_coords(n, c))
            .collect::<Result<Vec<_>>>()?;
        Trajectory::from_parts(
            times,
            states,
            Event { time, kind },
            structure.kind(),
            h.label(),
            direction,
            config.method,
            config.step,
        )
    };

    if norm(&fx) < config.fp_epsilon {
        return finish(times, states, EventKind::FixedPoint);
    }
    if !fx.iter().all(|v| v.is_finite()) {
        return finish(times, states, EventKind::Blowup);
    }

    let z_index = structure.singular_coordinate();
    let watch_z = z_index.is_some_and(|i| x[i].abs() >= config.z_epsilon);
    let reached_z = |before: f64, after: f64| {
        after.abs() < config.z_epsilon || after.signum() != before.signum()
    };
    let (h_min, h_max) = config.step_bounds();

    let mut t = 0.0;
    let mut k: u64 = 0;
    let mut h_next = config.step.min(h_max);
    loop {
        let proposal = match config.method {
            Method::Rk4Fixed => {
                let t_new = ((k + 1) as f64 * config.step).min(config.t_max);
                let dt = t_new - t;
                rk4(&field, &x, dt, t).map(|y| (y, dt))
            }
            Method::RkAdaptive => adaptive_step(
                &field,
                &x,
                t,
                &mut h_next,
                config,
                (h_min, h_max),
                z_index.filter(|&i| x[i] != 0.0),
            ),
        };
        let (mut y, dt) = match proposal {
            Ok(v) => v,
            Err(Error::Blowup { .. }) | Err(Error::Overflow(_)) => {
                return finish(times, states, EventKind::Blowup);
            }
            Err(e) => return Err(e),
        };
        structure.wrap_angles(&mut y);
        let t_new = t + dt;

        if y.iter().any(|v| v.abs() > config.blowup_bound) {
            times.push(t_new);
            states.push(y);
            return finish(times, states, EventKind::Blowup);
        }

        if let (true, Some(i)) = (watch_z, z_index) {
            if reached_z(x[i], y[i]) {
                let before = x[i];
                let delta = bisect(0.0, dt, EVENT_TIME_TOL, |d| {
                    let z = advance(config.method, &field, &x, d, t)?;
                    Ok(reached_z(before, z[i]))
                })?;
                let mut z = advance(config.method, &field, &x, delta, t)?;
                structure.wrap_angles(&mut z);
                times.push(t + delta);
                states.push(z);
                return finish(times, states, EventKind::ReachedZNeighborhood);
            }
        }

        field(&y, &mut fx)?;
        times.push(t_new);
        states.push(y.clone());
        if norm(&fx) < config.fp_epsilon {
            return finish(times, states, EventKind::FixedPoint);
        }
        x = y;
        t = t_new;
        k += 1;
        if t >= config.t_max {
            return finish(times, states, EventKind::TMaxReached);
        }
    }
}

/// One accepted Dormand-Prince step. Returns the new state and the step
/// taken; `h_next` carries the controller state between calls.
pub(crate) fn adaptive_step<F>(
    field: &F,
    x: &[f64],
    t: f64,
    h_next: &mut f64,
    config: &IntegratorConfig,
    (h_min, h_max): (f64, f64),
    z_index: Option<usize>,
) -> Result<(Vec<f64>, f64)>
where
    F: Fn(&[f64], &mut [f64]) -> Result<()>,
{
    let remaining = config.t_max - t;
    loop {
        let h = h_next.min(remaining);
        let (y, err) = match dopri5(field, x, h, t) {
            Ok(v) => v,
            Err(e @ (Error::Blowup { .. } | Error::Overflow(_) | Error::SingularHamiltonian)) => {
                if h <= h_min {
                    return Err(e);
                }
                *h_next = (0.5 * h).max(h_min);
                continue;
            }
            Err(e) => return Err(e),
        };
        let e = error_norm(&err, x, &y, config.rel_tol, config.abs_tol);
        // keep each step from moving the defining coordinate by more than half
        // its distance to Z
        let overshoot = z_index.is_some_and(|i| (y[i] - x[i]).abs() > 0.5 * x[i].abs());
        if e <= 1.0 && !overshoot {
            *h_next = (h * step_factor(e)).clamp(h_min, h_max);
            return Ok((y, h));
        }
        if h <= h_min {
            return Err(Error::StepSizeUnderflow { t, h_min });
        }
        let shrink = if overshoot {
            0.5
        } else {
            step_factor(e).min(1.0)
        };
        *h_next = (h * shrink).max(h_min);
    }
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// True iff the defining function of `structure` keeps the sign of the
/// initial sample along `traj`; the terminal sample may instead sit within
/// `z_epsilon` of `Z`.
pub fn sign_preservation_check(
    traj: &Trajectory,
    structure: &PhaseStructure,
    z_epsilon: f64,
) -> Result<bool> {
    let i = structure
        .singular_coordinate()
        .ok_or(Error::NoCriticalSet)?;
    let values: Vec<f64> = traj.states().iter().map(|s| s.coords()[i]).collect();
    let sign = values[0].signum();
    if values[0] == 0.0 {
        return Ok(values.iter().all(|&v| v == 0.0));
    }
    let last = values.len() - 1;
    Ok(values
        .iter()
        .enumerate()
        .all(|(k, &v)| (v != 0.0 && v.signum() == sign) || (k == last && v.abs() < z_epsilon)))
}
