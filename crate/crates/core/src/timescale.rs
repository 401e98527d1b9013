//! Linear friction as a Hamiltonian flow on an extended phase space.
//!
//! Adding a time coordinate `t` and its conjugate energy `E` and rescaling
//! the Hamiltonian by `e^{lambda t}` turns `q'' = -lambda q' - grad V` into
//! a conservative system in a curvilinear time parameter `sigma`, with
//! `e^{-lambda t(sigma)} = 1 - sigma` when `t(0) = 0`. The substitution
//! `s = e^{-lambda t}`, `E_s = E/lambda` moves the system onto a
//! non-twisted b-structure where `s` decreases at unit speed.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{PhaseState, PhaseStructure, StructureKind};
use crate::hamiltonians::{Extension, HamiltonianSpec, Potential};
use crate::integrate::solver::{advance, bisect, Method};
use crate::integrate::{
    adaptive_step, directed_field, Direction, Event, EventKind, IntegratorConfig, Trajectory,
};

pub fn build_plain_extended(
    potential: Potential,
    n: usize,
) -> Result<(PhaseStructure, HamiltonianSpec)> {
    let h = HamiltonianSpec::with_extension(n, potential, Extension::Plain)?;
    Ok((PhaseStructure::extended_canonical(n), h))
}

pub fn build_rescaled_extended(
    potential: Potential,
    lambda: f64,
    n: usize,
) -> Result<(PhaseStructure, HamiltonianSpec)> {
    let h =
        HamiltonianSpec::with_extension(n, potential, Extension::Rescaled { friction: lambda })?;
    Ok((PhaseStructure::extended_canonical(n), h))
}

/// The rescaled system in `(q, p, s, E_s)` on the non-twisted b-structure
/// with unit modular weight.
pub fn to_s_coordinates(
    structure: &PhaseStructure,
    h: &HamiltonianSpec,
    lambda: f64,
) -> Result<(PhaseStructure, HamiltonianSpec)> {
    if structure.kind() != StructureKind::ExtendedCanonical {
        return Err(Error::InvalidStructure(format!(
            "expected extended_canonical, got {}",
            structure.kind()
        )));
    }
    let potential = match (h.potential(), h.extension()) {
        (Some(v), Extension::Rescaled { friction }) if friction == lambda => v.clone(),
        _ => {
            return Err(Error::InvalidArgument(format!(
                "expected a rescaled extended Hamiltonian with friction {lambda}, got {}",
                h.label()
            )))
        }
    };
    let n = h.n();
    let s_h = HamiltonianSpec::with_extension(
        n,
        potential,
        Extension::SCoordinates { friction: lambda },
    )?;
    Ok((PhaseStructure::extended_b_s(n, 1.0)?, s_h))
}

fn check_friction(lambda: f64) -> Result<()> {
    if lambda > 0.0 && lambda.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "friction must be positive, got {lambda}"
        )))
    }
}

/// `s = e^{-lambda t}`.
pub fn s_of_t(t: f64, lambda: f64) -> Result<f64> {
    check_friction(lambda)?;
    Ok((-lambda * t).exp())
}

/// `t = -ln(s)/lambda`.
pub fn t_of_s(s: f64, lambda: f64) -> Result<f64> {
    check_friction(lambda)?;
    if !(s > 0.0) {
        return Err(Error::Domain(format!("s must be positive, got {s}")));
    }
    Ok(-s.ln() / lambda)
}

/// `(q, p, t, E) -> (q, p, s, E/lambda)`.
pub fn state_to_s(state: &PhaseState, lambda: f64) -> Result<PhaseState> {
    let (t, e) = state
        .ext()
        .ok_or_else(|| Error::InvalidState("state is not extended".into()))?;
    PhaseState::extended(
        state.q().to_vec(),
        state.p().to_vec(),
        s_of_t(t, lambda)?,
        e / lambda,
    )
}

/// `(q, p, s, E_s) -> (q, p, t, lambda E_s)`.
pub fn state_from_s(state: &PhaseState, lambda: f64) -> Result<PhaseState> {
    let (s, es) = state
        .ext()
        .ok_or_else(|| Error::InvalidState("state is not extended".into()))?;
    PhaseState::extended(
        state.q().to_vec(),
        state.p().to_vec(),
        t_of_s(s, lambda)?,
        es * lambda,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Clock {
    CurvilinearS,
    RealT,
}

impl Clock {
    pub fn as_str(self) -> &'static str {
        match self {
            Clock::CurvilinearS => "curvilinear_s",
            Clock::RealT => "real_t",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Route {
    /// Integrate `(q, p, t, E)` under the rescaled Hamiltonian.
    Rescaled,
    /// Integrate `(q, p, s, E_s)` on the b-structure.
    SCoordinates,
}

impl Route {
    pub fn as_str(self) -> &'static str {
        match self {
            Route::Rescaled => "rescaled",
            Route::SCoordinates => "s_coordinates",
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExtendedTrajectory {
    pub base: Trajectory,
    pub clock: Clock,
    pub lambda: f64,
}

/// Momentum `p = v/lambda` and energy `E` with `H = 0` at real time 0.
pub fn rescaled_initial_state(
    potential: &Potential,
    lambda: f64,
    q0: &[f64],
    v0: &[f64],
    energy: Option<f64>,
) -> Result<PhaseState> {
    check_friction(lambda)?;
    if q0.len() != v0.len() {
        return Err(Error::DimensionMismatch {
            expected: q0.len(),
            got: v0.len(),
        });
    }
    let p: Vec<f64> = v0.iter().map(|v| v / lambda).collect();
    let e = match energy {
        Some(e) => e,
        None => {
            let kinetic = 0.5 * p.iter().map(|v| v * v).sum::<f64>();
            lambda * (kinetic + potential.value(q0, 0.0)? / (lambda * lambda))
        }
    };
    PhaseState::extended(q0.to_vec(), p, 0.0, e)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimescaleRun {
    pub lambda: f64,
    pub route: Route,
    /// Real-time instants to sample, strictly increasing from 0.
    pub grid: Vec<f64>,
    /// Initial `E` override; the default makes `H` vanish.
    pub energy: Option<f64>,
    pub rel_tol: f64,
    pub abs_tol: f64,
}

impl TimescaleRun {
    /// Uniform grid of `samples + 1` points on `[0, horizon]`.
    pub fn uniform(lambda: f64, route: Route, horizon: f64, samples: usize) -> Self {
        let grid = (0..=samples)
            .map(|k| horizon * k as f64 / samples as f64)
            .collect();
        Self {
            lambda,
            route,
            grid,
            energy: None,
            rel_tol: 1e-12,
            abs_tol: 1e-12,
        }
    }
}

/// Integrates the rescaled system (directly or in `s`-coordinates) with the
/// adaptive scheme in curvilinear time and records the states where the
/// real time crosses each grid instant.
pub fn run_rescaled(
    potential: &Potential,
    q0: &[f64],
    v0: &[f64],
    run: &TimescaleRun,
) -> Result<ExtendedTrajectory> {
    check_friction(run.lambda)?;
    let lambda = run.lambda;
    if run.grid.is_empty() || run.grid[0] != 0.0 {
        return Err(Error::InvalidArgument(
            "real-time grid must start at 0".into(),
        ));
    }
    if run.grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::NonMonotoneTime);
    }
    let n = q0.len();
    let (structure, h) = build_rescaled_extended(potential.clone(), lambda, n)?;
    let mut initial = rescaled_initial_state(potential, lambda, q0, v0, run.energy)?;
    let (structure, h) = match run.route {
        Route::Rescaled => (structure, h),
        Route::SCoordinates => {
            initial = state_to_s(&initial, lambda)?;
            to_s_coordinates(&structure, &h, lambda)?
        }
    };
    let real_time = |x: &[f64]| -> Result<f64> {
        match run.route {
            Route::Rescaled => Ok(x[2 * n]),
            Route::SCoordinates => t_of_s(x[2 * n], lambda),
        }
    };

    let config = IntegratorConfig {
        method: Method::RkAdaptive,
        step: 1e-4,
        rel_tol: run.rel_tol,
        abs_tol: run.abs_tol,
        t_max: 1.0,
        z_epsilon: f64::MIN_POSITIVE,
        fp_epsilon: f64::MIN_POSITIVE,
        blowup_bound: f64::MAX,
    };
    config.validate()?;
    let field = directed_field(&structure, &h, Direction::Forward);
    let guard = structure.singular_coordinate();
    let bounds = config.step_bounds();

    let mut x = initial.into_coords();
    let mut sigma = 0.0;
    let mut h_next = config.step;
    let mut times = vec![0.0];
    let mut states = vec![PhaseState::from_coords(n, x.clone())?];
    let mut next = 1;
    while next < run.grid.len() {
        let (y, dt) = adaptive_step(&field, &x, sigma, &mut h_next, &config, bounds, guard)?;
        let t_end = real_time(&y)?;
        if !(t_end > real_time(&x)?) {
            return Err(Error::NonMonotoneTime);
        }
        let mut from = 0.0;
        while next < run.grid.len() && t_end >= run.grid[next] {
            let target = run.grid[next];
            let delta = if t_end == target {
                dt
            } else {
                bisect(from, dt, 0.0, |d| {
                    Ok(real_time(&advance(Method::RkAdaptive, &field, &x, d, sigma)?)? >= target)
                })?
            };
            let z = if delta == dt {
                y.clone()
            } else {
                advance(Method::RkAdaptive, &field, &x, delta, sigma)?
            };
            times.push(sigma + delta);
            states.push(PhaseState::from_coords(n, z)?);
            from = delta;
            next += 1;
        }
        x = y;
        sigma += dt;
        if sigma >= config.t_max {
            return Err(Error::InvalidArgument(format!(
                "curvilinear time exhausted before real time {}",
                run.grid[next]
            )));
        }
    }
    let end = *times.last().expect("nonempty");
    let base = Trajectory::from_parts(
        times,
        states,
        Event {
            time: end,
            kind: EventKind::TMaxReached,
        },
        structure.kind(),
        h.label(),
        Direction::Forward,
        Method::RkAdaptive,
        config.step,
    )?;
    Ok(ExtendedTrajectory {
        base,
        clock: Clock::CurvilinearS,
        lambda,
    })
}

/// Real-time trajectory of `(q, dq/dt)` from a rescaled or `s`-coordinate
/// run, using `dq/dt = lambda e^{-lambda t} p = lambda s p`.
pub fn reconstruct_real_time(ext: &ExtendedTrajectory) -> Result<Trajectory> {
    let lambda = ext.lambda;
    check_friction(lambda)?;
    let kind = ext.base.structure_kind();
    let mut times = Vec::with_capacity(ext.base.len());
    let mut states = Vec::with_capacity(ext.base.len());
    for s in ext.base.states() {
        let (a, _) = s
            .ext()
            .ok_or_else(|| Error::InvalidState("state is not extended".into()))?;
        let (t, decay) = match kind {
            StructureKind::ExtendedCanonical => (a, (-lambda * a).exp()),
            StructureKind::ExtendedBS => (t_of_s(a, lambda)?, a),
            other => {
                return Err(Error::InvalidStructure(format!(
                    "cannot reconstruct from {other}"
                )))
            }
        };
        times.push(t);
        states.push(PhaseState::new(
            s.q().to_vec(),
            s.p().iter().map(|p| lambda * decay * p).collect(),
        )?);
    }
    if times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::NonMonotoneTime);
    }
    let end = *times.last().expect("nonempty");
    Trajectory::from_parts(
        times,
        states,
        Event {
            time: end,
            kind: ext.base.terminal_event().kind,
        },
        StructureKind::Canonical,
        format!(
            "friction(lambda={lambda})[{}]",
            ext.base.hamiltonian_label()
        ),
        Direction::Forward,
        ext.base.method(),
        ext.base.step(),
    )
}

/// Central-difference residual of `q'' + lambda q' + grad V` at interior
/// samples of a real-time `(q, dq/dt)` trajectory; max-norm over
/// components.
pub fn friction_residual(
    traj: &Trajectory,
    potential: &Potential,
    lambda: f64,
) -> Result<Vec<f64>> {
    if traj.len() < 3 {
        return Err(Error::SeriesTooShort(traj.len()));
    }
    let t = traj.times();
    let st = traj.states();
    let n = st[0].n();
    let mut grad = vec![0.0; n];
    let mut out = Vec::with_capacity(traj.len() - 2);
    for k in 1..traj.len() - 1 {
        let (h1, h2) = (t[k] - t[k - 1], t[k + 1] - t[k]);
        potential.grad_q(st[k].q(), t[k], &mut grad)?;
        let mut worst = 0.0f64;
        for i in 0..n {
            let (a, b, c) = (st[k - 1].q()[i], st[k].q()[i], st[k + 1].q()[i]);
            let second = 2.0 * (h1 * c - (h1 + h2) * b + h2 * a) / (h1 * h2 * (h1 + h2));
            worst = worst.max((second + lambda * st[k].p()[i] + grad[i]).abs());
        }
        out.push(worst);
    }
    Ok(out)
}
