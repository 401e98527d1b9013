use std::f64::consts::TAU;

use bflow_core::liftcheck::{projectability_test, Verdict, DEFAULT_FIBERS};
use bflow_core::oracles::{quadratic_tanh, quadratic_tanh_constants, stokes_exact};
use bflow_core::orbits::{classify_orbit, level_set_residual, OrbitKind};
use bflow_core::{
    integrate, HamiltonianSpec, IntegratorConfig, PhaseState, PhaseStructure, Potential,
};

fn twisted() -> PhaseStructure {
    PhaseStructure::twisted(1, 1.0).unwrap()
}

fn mech(v: Potential) -> HamiltonianSpec {
    HamiltonianSpec::mechanical(1, v).unwrap()
}

/// Composite Simpson rule on `[a, b]` with `m` (even) panels.
fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, m: usize) -> f64 {
    let h = (b - a) / m as f64;
    let inner: f64 = (1..m)
        .map(|k| f(a + k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 })
        .sum();
    (f(a) + f(b) + inner) * h / 3.0
}

#[test]
fn stokes_runs_track_closed_form() {
    for lambda in [0.5, 1.0, 2.0] {
        let traj = integrate(
            &twisted(),
            &mech(Potential::Linear { lambda }),
            &PhaseState::planar(0.0, 1.0),
            &IntegratorConfig::rk4(1e-3, 10.0),
        )
        .unwrap();
        for (t, s) in traj.times().iter().zip(traj.states()) {
            let (q, p) = stokes_exact(0.0, 1.0, lambda, *t).unwrap();
            assert!((s.q()[0] - q).abs() < 1e-8 && (s.p()[0] - p).abs() < 1e-8);
        }
    }
}

#[test]
fn pendulum_period_matches_quadrature() {
    let structure = twisted().with_angular(vec![true]).unwrap();
    for (lambda, p0) in [(1.0, 2.0), (1.0, 1.2), (2.0, 1.8)] {
        let h = mech(Potential::Periodic { lambda });
        let state = PhaseState::planar(0.0, p0);
        let energy = h.eval(&state).unwrap();
        // dtheta/dt = p^2 = 2 (H - lambda cos(theta) / 2)
        let period = simpson(
            |th| 1.0 / (2.0 * energy - lambda * th.cos()),
            0.0,
            TAU,
            20_000,
        );
        let traj = integrate(&structure, &h, &state, &IntegratorConfig::rk4(1e-3, 20.0)).unwrap();
        let c = classify_orbit(&traj, &structure, &h);
        assert_eq!(c.kind, OrbitKind::Periodic);
        assert!(
            (c.period.unwrap() - period).abs() < 1e-8,
            "{:?} vs {period}",
            c.period
        );
    }
}

#[test]
fn tanh_trajectories() {
    let h = mech(Potential::PureQuadratic { lambda: 1.0 });
    for p0 in [1.0, std::f64::consts::FRAC_1_SQRT_2, -0.6] {
        let (c1, c2) = quadratic_tanh_constants(0.0, p0, 1.0).unwrap();
        let cfg = IntegratorConfig {
            z_epsilon: 1e-12,
            ..IntegratorConfig::rk4(1e-3, 30.0)
        };
        let traj = integrate(&twisted(), &h, &PhaseState::planar(0.0, p0), &cfg).unwrap();
        for (t, s) in traj
            .times()
            .iter()
            .zip(traj.states())
            .filter(|(t, _)| **t <= 10.0)
        {
            assert!((s.q()[0] - quadratic_tanh(c1, c2, 1.0, *t).unwrap()).abs() < 1e-7);
        }
        assert!((traj.last().q()[0] - c1).abs() < 1e-5);
        assert!(traj.last().p()[0].abs() < 1e-5);
    }
}

#[test]
fn twisted_orbits_stay_on_classical_level_sets() {
    let potentials = [
        Potential::Linear { lambda: 1.0 },
        Potential::PureQuadratic { lambda: 1.0 },
        Potential::GeneralQuadratic {
            lambda: 1.0,
            alpha: 0.5,
        },
        Potential::Periodic { lambda: 1.0 },
    ];
    for v in potentials {
        let h = mech(v);
        for (q, p) in [(-2.0, 1.0), (0.5, -0.7), (1.5, 1.3)] {
            let traj = integrate(
                &twisted(),
                &h,
                &PhaseState::planar(q, p),
                &IntegratorConfig::rk4(1e-3, 10.0),
            )
            .unwrap();
            assert!(level_set_residual(&traj, &h).unwrap() < 1e-6);
        }
    }
}

#[test]
fn twisted_systems_are_not_lifts() {
    let fibers: Vec<Vec<f64>> = DEFAULT_FIBERS.iter().map(|&p| vec![p]).collect();
    let potentials = [
        Potential::Zero,
        Potential::Linear { lambda: 1.0 },
        Potential::PureQuadratic { lambda: 1.0 },
        Potential::GeneralQuadratic {
            lambda: 2.0,
            alpha: 0.3,
        },
        Potential::Periodic { lambda: 1.0 },
    ];
    for v in potentials {
        for tol in [1e-9, 1e-6, 1e-3] {
            let verdict = projectability_test(
                &twisted(),
                &mech(v.clone()),
                &[vec![-1.0], vec![0.0], vec![2.0]],
                &fibers,
                tol,
            )
            .unwrap();
            assert_eq!(verdict.verdict, Verdict::NotProjectable);
            assert!(verdict.witness.unwrap().difference > tol);
        }
    }
}
