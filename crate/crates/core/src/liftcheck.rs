//! Sampling test for whether a field can be a (b-)cotangent lift.
//!
//! A lifted field has a base component that depends on the position only.
//! The test evaluates `dq/dt` at several momenta over the same base point
//! and looks for variation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{field_into, PhaseState, PhaseStructure, StructureKind};
use crate::hamiltonians::HamiltonianSpec;

pub const DEFAULT_TOLERANCE: f64 = 1e-9;
pub const DEFAULT_FIBERS: [f64; 2] = [1.0, 2.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Projectable,
    NotProjectable,
    Inconclusive,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Projectable => "projectable",
            Verdict::NotProjectable => "not_projectable",
            Verdict::Inconclusive => "inconclusive",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub first: PhaseState,
    pub second: PhaseState,
    /// Max-norm difference of the base components at the two states.
    pub difference: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LiftVerdict {
    pub verdict: Verdict,
    pub witness: Option<Witness>,
}

/// Base components `dq/dt` of the Hamiltonian field at `state`.
pub fn base_component(
    structure: &PhaseStructure,
    h: &HamiltonianSpec,
    state: &PhaseState,
) -> Result<Vec<f64>> {
    let mut out = vec![0.0; state.coords().len()];
    field_into(structure, h, state.coords(), &mut out)?;
    out.truncate(structure.n());
    Ok(out)
}

/// Reports `not_projectable` with the first pair of fiber samples whose base
/// components differ by more than `tol`, `projectable` if none does, and
/// `inconclusive` when every fiber sample is the same point.
pub fn projectability_test(
    structure: &PhaseStructure,
    h: &HamiltonianSpec,
    base_points: &[Vec<f64>],
    fiber_samples: &[Vec<f64>],
    tol: f64,
) -> Result<LiftVerdict> {
    if structure.kind().is_extended() {
        return Err(Error::InvalidStructure(
            "lift test needs a cotangent structure".into(),
        ));
    }
    if !(tol >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "tolerance must be non-negative, got {tol}"
        )));
    }
    if base_points.is_empty() {
        return Err(Error::InvalidArgument("no base points".into()));
    }
    if fiber_samples.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "need at least 2 fiber samples, got {}",
            fiber_samples.len()
        )));
    }
    let n = structure.n();
    for v in base_points.iter().chain(fiber_samples) {
        if v.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: v.len(),
            });
        }
    }
    if structure.kind() == StructureKind::TwistedB {
        let k = structure.singular_index();
        if fiber_samples.iter().any(|p| p[k] == 0.0) {
            return Err(Error::FiberOnCriticalSet);
        }
    }
    if fiber_samples.iter().all(|p| p == &fiber_samples[0]) {
        return Ok(LiftVerdict {
            verdict: Verdict::Inconclusive,
            witness: None,
        });
    }

    for q in base_points {
        let states: Vec<PhaseState> = fiber_samples
            .iter()
            .map(|p| PhaseState::new(q.clone(), p.clone()))
            .collect::<Result<_>>()?;
        let values: Vec<Vec<f64>> = states
            .iter()
            .map(|s| base_component(structure, h, s))
            .collect::<Result<_>>()?;
        for i in 0..values.len() {
            for j in i + 1..values.len() {
                let difference = values[i]
                    .iter()
                    .zip(&values[j])
                    .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
                if difference > tol {
                    return Ok(LiftVerdict {
                        verdict: Verdict::NotProjectable,
                        witness: Some(Witness {
                            first: states[i].clone(),
                            second: states[j].clone(),
                            difference,
                        }),
                    });
                }
            }
        }
    }
    Ok(LiftVerdict {
        verdict: Verdict::Projectable,
        witness: None,
    })
}

/// Moment map `c log|p_1| + p_2 + .. + p_n` of the lifted rotation action.
/// Its field rotates every angle at unit speed and leaves the momenta fixed.
pub fn toric_moment_field(structure: &PhaseStructure, c: f64) -> Result<HamiltonianSpec> {
    if structure.kind() != StructureKind::TwistedB {
        return Err(Error::InvalidStructure(format!(
            "toric moment map needs a twisted_b structure, got {}",
            structure.kind()
        )));
    }
    if structure.singular_index() != 0 {
        return Err(Error::InvalidStructure(
            "singular momentum must be p_1".into(),
        ));
    }
    if c == 0.0 || !c.is_finite() {
        return Err(Error::InvalidArgument(
            "modular weight c must be nonzero".into(),
        ));
    }
    if c != structure.modular_weight() {
        return Err(Error::InvalidArgument(format!(
            "moment weight {c} differs from the structure's modular weight {}",
            structure.modular_weight()
        )));
    }
    HamiltonianSpec::toric_moment(structure.n(), c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::hamiltonian_vector_field;
    use crate::hamiltonians::Potential;

    fn fibers(values: &[f64]) -> Vec<Vec<f64>> {
        values.iter().map(|&p| vec![p]).collect()
    }

    #[test]
    fn twisted_linear_is_not_projectable() {
        let structure = PhaseStructure::twisted(1, 1.0).unwrap();
        let h = HamiltonianSpec::mechanical(1, Potential::Linear { lambda: 1.0 }).unwrap();
        let v =
            projectability_test(&structure, &h, &[vec![0.0]], &fibers(&[1.0, 2.0]), 1e-9).unwrap();
        assert_eq!(v.verdict, Verdict::NotProjectable);
        let w = v.witness.unwrap();
        assert_eq!(w.difference, 3.0);
        let a = base_component(&structure, &h, &w.first).unwrap();
        let b = base_component(&structure, &h, &w.second).unwrap();
        assert_eq!((a[0] - b[0]).abs(), 3.0);
    }

    #[test]
    fn toric_control_is_projectable() {
        let structure = PhaseStructure::twisted(1, 1.0).unwrap();
        let h = toric_moment_field(&structure, 1.0).unwrap();
        let v = projectability_test(
            &structure,
            &h,
            &[vec![0.0], vec![1.0]],
            &fibers(&[0.5, 2.0]),
            1e-9,
        )
        .unwrap();
        assert_eq!(
            v,
            LiftVerdict {
                verdict: Verdict::Projectable,
                witness: None
            }
        );
    }

    #[test]
    fn translation_is_projectable() {
        let structure = PhaseStructure::canonical(1);
        let h = HamiltonianSpec::translation(1);
        let v = projectability_test(
            &structure,
            &h,
            &[vec![-3.0], vec![0.0], vec![5.0]],
            &fibers(&[-4.0, 0.0, 1.0, 9.0]),
            0.0,
        )
        .unwrap();
        assert_eq!(v.verdict, Verdict::Projectable);
    }

    #[test]
    fn degenerate_sampling_is_inconclusive() {
        let structure = PhaseStructure::twisted(1, 1.0).unwrap();
        let h = HamiltonianSpec::mechanical(1, Potential::Linear { lambda: 1.0 }).unwrap();
        let v =
            projectability_test(&structure, &h, &[vec![0.0]], &fibers(&[2.0, 2.0]), 1e-9).unwrap();
        assert_eq!(v.verdict, Verdict::Inconclusive);
    }

    #[test]
    fn fiber_on_z_rejected() {
        let structure = PhaseStructure::twisted(1, 1.0).unwrap();
        let h = HamiltonianSpec::mechanical(1, Potential::Linear { lambda: 1.0 }).unwrap();
        assert_eq!(
            projectability_test(&structure, &h, &[vec![0.0]], &fibers(&[0.0, 2.0]), 1e-9),
            Err(Error::FiberOnCriticalSet)
        );
        assert!(projectability_test(&structure, &h, &[vec![0.0]], &fibers(&[1.0]), 1e-9).is_err());
    }

    #[test]
    fn toric_field_examples() {
        let s1 = PhaseStructure::twisted(1, 1.0).unwrap();
        let h = toric_moment_field(&s1, 1.0).unwrap();
        let x = hamiltonian_vector_field(&s1, &h, &PhaseState::planar(0.0, 3.0)).unwrap();
        assert_eq!(x, vec![1.0, 0.0]);

        let s2 = PhaseStructure::twisted(1, 2.0).unwrap();
        let h = toric_moment_field(&s2, 2.0).unwrap();
        let x = hamiltonian_vector_field(&s2, &h, &PhaseState::planar(1.7, 0.5)).unwrap();
        assert_eq!(x, vec![1.0, 0.0]);

        let s3 = PhaseStructure::twisted(2, 1.0).unwrap();
        let h = toric_moment_field(&s3, 1.0).unwrap();
        let state = PhaseState::new(vec![0.2, 0.4], vec![1.5, 4.0]).unwrap();
        let x = hamiltonian_vector_field(&s3, &h, &state).unwrap();
        assert_eq!(x, vec![1.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn toric_field_validation() {
        let s = PhaseStructure::twisted(1, 1.0).unwrap();
        assert!(toric_moment_field(&s, 0.0).is_err());
        assert!(toric_moment_field(&s, 2.0).is_err());
        assert!(toric_moment_field(&PhaseStructure::canonical(1), 1.0).is_err());
    }
}
