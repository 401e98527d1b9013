//! Dynamics on cotangent bundles with singular (b-)symplectic structures.
//!
//! The crate models canonical, twisted and non-twisted b-cotangent phase
//! spaces together with the extended phase spaces used to encode linear
//! friction. It provides mechanical Hamiltonians, explicit Runge-Kutta
//! integration with events near the critical set, orbit classification,
//! closed-form reference solutions, a cotangent-lift test and the time
//! rescaling that turns viscous damping into a Hamiltonian flow.

pub mod error;
pub mod geometry;
pub mod hamiltonians;
pub mod integrate;
pub mod liftcheck;
pub mod oracles;
pub mod orbits;
pub mod timescale;

pub use error::{Error, Result};
pub use geometry::{
    defining_function, evaluate_form, hamiltonian_vector_field, is_degenerate, poisson_bivector,
    Bivector, PhaseState, PhaseStructure, StructureKind,
};
pub use hamiltonians::{
    CustomPotential, Extension, HamiltonianForm, HamiltonianSpec, Potential, PotentialFamily,
};
pub use integrate::{
    integrate, integrate_directed, sign_preservation_check, step, step_with, write_csv, CsvOptions,
    Direction, Event, EventKind, IntegratorConfig, Method, Trajectory,
};
