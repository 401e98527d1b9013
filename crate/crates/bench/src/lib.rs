//! Fixtures shared by the criterion benches.

use bflow_core::{HamiltonianSpec, IntegratorConfig, PhaseState, PhaseStructure, Potential};

pub struct Fixture {
    pub name: &'static str,
    pub structure: PhaseStructure,
    pub hamiltonian: HamiltonianSpec,
    pub initial: PhaseState,
}

pub fn fixtures() -> Vec<Fixture> {
    let twisted = PhaseStructure::twisted(1, 1.0).expect("valid structure");
    let mechanical = |p: Potential| HamiltonianSpec::mechanical(1, p).expect("valid potential");
    vec![
        Fixture {
            name: "stokes",
            structure: twisted.clone(),
            hamiltonian: mechanical(Potential::Linear { lambda: 1.0 }),
            initial: PhaseState::planar(0.0, 1.0),
        },
        Fixture {
            name: "twisted_quadratic",
            structure: twisted.clone(),
            hamiltonian: mechanical(Potential::PureQuadratic { lambda: 1.0 }),
            initial: PhaseState::planar(0.0, 1.0),
        },
        Fixture {
            name: "twisted_pendulum",
            structure: twisted.with_angular(vec![true]).expect("one angle"),
            hamiltonian: mechanical(Potential::Periodic { lambda: 1.0 }),
            initial: PhaseState::planar(0.0, 2.0),
        },
    ]
}

pub fn short_run() -> IntegratorConfig {
    IntegratorConfig::rk4(1e-3, 2.0)
}
