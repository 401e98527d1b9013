//! Singular symplectic structures on cotangent bundles.
//!
//! Every structure handled here is block diagonal in conjugate pairs: the
//! Poisson bivector pairs a position-like coordinate `x` with a momentum-like
//! coordinate `y` through a scalar coefficient `a(x)`, so that
//!
//! ```text
//! x' =  a * dH/dy
//! y' = -a * dH/dx
//! ```
//!
//! For the regular pairs `a = 1`. For the singular pair `a` is the defining
//! function of the critical hypersurface `Z` divided by the modular weight, so
//! the bivector degenerates on `Z` instead of blowing up. The 2-form is only
//! ever evaluated away from `Z`, where it is the inverse of the bivector.

use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

use crate::error::{Error, Result};
use crate::hamiltonians::HamiltonianSpec;

/// Pivot tolerance used by [`is_degenerate`] and the form evaluation.
pub const DEFAULT_DEGENERACY_TOL: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StructureKind {
    /// `sum dp_i ^ dq_i`
    Canonical,
    /// Singularity on the fiber: `(c/p_k) dp_k ^ dq_k + ...`, `Z = {p_k = 0}`.
    TwistedB,
    /// Singularity on the base: `(c/q_k) dp_k ^ dq_k + ...`, `Z = {q_k = 0}`.
    NontwistedB,
    /// Canonical form on `T*(Q x R)` with the extra pair `(t, E)`.
    ExtendedCanonical,
    /// b-form on the extended space after `s = exp(-lambda t)`; `Z = {s = 0}`.
    ExtendedBS,
}

impl StructureKind {
    pub fn is_singular(self) -> bool {
        matches!(
            self,
            StructureKind::TwistedB | StructureKind::NontwistedB | StructureKind::ExtendedBS
        )
    }

    pub fn is_extended(self) -> bool {
        matches!(
            self,
            StructureKind::ExtendedCanonical | StructureKind::ExtendedBS
        )
    }

    pub fn as_str(self) -> &'static str {
        match self {
            StructureKind::Canonical => "canonical",
            StructureKind::TwistedB => "twisted_b",
            StructureKind::NontwistedB => "nontwisted_b",
            StructureKind::ExtendedCanonical => "extended_canonical",
            StructureKind::ExtendedBS => "extended_b_s",
        }
    }
}

impl std::fmt::Display for StructureKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseStructure {
    kind: StructureKind,
    n: usize,
    modular_weight: f64,
    singular_index: usize,
    angular_mask: Vec<bool>,
}

impl PhaseStructure {
    /// Builds a structure on a `dim = 2n` dimensional cotangent bundle (the
    /// extended kinds add one more conjugate pair on top of that).
    ///
    /// `singular_index` is 0-based within its role: a momentum index for
    /// `TwistedB`, a position index for `NontwistedB`. It must be 0 for
    /// `ExtendedBS` and is ignored for the canonical kinds.
    pub fn new(
        kind: StructureKind,
        dim: usize,
        modular_weight: f64,
        singular_index: usize,
        angular_mask: Vec<bool>,
    ) -> Result<Self> {
        if dim < 2 || dim % 2 != 0 {
            return Err(Error::InvalidStructure(format!(
                "dimension must be even and >= 2, got {dim}"
            )));
        }
        let n = dim / 2;
        if kind.is_singular() && (modular_weight == 0.0 || !modular_weight.is_finite()) {
            return Err(Error::InvalidStructure(format!(
                "modular weight must be finite and nonzero for {kind}"
            )));
        }
        match kind {
            StructureKind::TwistedB | StructureKind::NontwistedB if singular_index >= n => {
                return Err(Error::InvalidStructure(format!(
                    "singular index {singular_index} out of range for n={n}"
                )));
            }
            StructureKind::ExtendedBS if singular_index != 0 => {
                return Err(Error::InvalidStructure(
                    "extended_b_s has a single singular coordinate s; index must be 0".into(),
                ));
            }
            _ => {}
        }
        let angular_mask = if angular_mask.is_empty() {
            vec![false; n]
        } else {
            angular_mask
        };
        if angular_mask.len() != n {
            return Err(Error::InvalidStructure(format!(
                "angular mask has {} entries, expected {n}",
                angular_mask.len()
            )));
        }
        let singular_index = if kind.is_singular() {
            singular_index
        } else {
            0
        };
        Ok(Self {
            kind,
            n,
            modular_weight: if kind.is_singular() {
                modular_weight
            } else {
                1.0
            },
            singular_index,
            angular_mask,
        })
    }

    pub fn canonical(n: usize) -> Self {
        Self::new(StructureKind::Canonical, 2 * n, 1.0, 0, vec![]).expect("valid canonical")
    }

    /// Twisted structure with the singularity on `p_1`.
    pub fn twisted(n: usize, c: f64) -> Result<Self> {
        Self::new(StructureKind::TwistedB, 2 * n, c, 0, vec![])
    }

    /// Non-twisted structure with the singularity on `q_1`.
    pub fn nontwisted(n: usize, c: f64) -> Result<Self> {
        Self::new(StructureKind::NontwistedB, 2 * n, c, 0, vec![])
    }

    pub fn extended_canonical(n: usize) -> Self {
        Self::new(StructureKind::ExtendedCanonical, 2 * n, 1.0, 0, vec![])
            .expect("valid extended structure")
    }

    pub fn extended_b_s(n: usize, c: f64) -> Result<Self> {
        Self::new(StructureKind::ExtendedBS, 2 * n, c, 0, vec![])
    }

    /// Marks position coordinates as angles on the circle.
    pub fn with_angular(mut self, mask: Vec<bool>) -> Result<Self> {
        if mask.len() != self.n {
            return Err(Error::InvalidStructure(format!(
                "angular mask has {} entries, expected {}",
                mask.len(),
                self.n
            )));
        }
        self.angular_mask = mask;
        Ok(self)
    }

    pub fn kind(&self) -> StructureKind {
        self.kind
    }

    /// Number of degrees of freedom of the base configuration space.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Base phase-space dimension `2n`.
    pub fn dim(&self) -> usize {
        2 * self.n
    }

    /// Length of the flat coordinate vector, including the extended pair.
    pub fn state_len(&self) -> usize {
        if self.kind.is_extended() {
            2 * self.n + 2
        } else {
            2 * self.n
        }
    }

    pub fn modular_weight(&self) -> f64 {
        self.modular_weight
    }

    pub fn singular_index(&self) -> usize {
        self.singular_index
    }

    pub fn angular_mask(&self) -> &[bool] {
        &self.angular_mask
    }

    /// Flat index of the coordinate whose vanishing defines `Z`.
    pub fn singular_coordinate(&self) -> Option<usize> {
        match self.kind {
            StructureKind::TwistedB => Some(self.n + self.singular_index),
            StructureKind::NontwistedB => Some(self.singular_index),
            StructureKind::ExtendedBS => Some(2 * self.n),
            StructureKind::Canonical | StructureKind::ExtendedCanonical => None,
        }
    }

    /// Reduces angular positions into `[0, 2pi)`.
    pub fn wrap_angles(&self, coords: &mut [f64]) {
        for (i, &angular) in self.angular_mask.iter().enumerate() {
            if angular {
                coords[i] = coords[i].rem_euclid(TAU);
            }
        }
    }

    /// Coordinate difference `a - b`, with angular entries taken on the circle
    /// in `(-pi, pi]`.
    pub fn difference(&self, a: &[f64], b: &[f64]) -> Vec<f64> {
        let mut d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
        for (i, &angular) in self.angular_mask.iter().enumerate() {
            if angular {
                d[i] = wrap_pi(d[i]);
            }
        }
        d
    }

    /// Conjugate pairs `(x, y, a)` with `Pi[x][y] = a`, `Pi[y][x] = -a`.
    pub(crate) fn pairs(&self, coords: &[f64]) -> Vec<(usize, usize, f64)> {
        let n = self.n;
        let mut pairs: Vec<(usize, usize, f64)> = (0..n).map(|i| (i, n + i, 1.0)).collect();
        let c = self.modular_weight;
        match self.kind {
            StructureKind::Canonical => {}
            StructureKind::TwistedB => {
                let k = self.singular_index;
                pairs[k].2 = coords[n + k] / c;
            }
            StructureKind::NontwistedB => {
                let k = self.singular_index;
                pairs[k].2 = coords[k] / c;
            }
            // t' = -dH/dE, E' = dH/dt
            StructureKind::ExtendedCanonical => pairs.push((2 * n, 2 * n + 1, -1.0)),
            // pushforward of the (t, E) pair under s = exp(-lambda t), E_s = E / lambda
            StructureKind::ExtendedBS => pairs.push((2 * n, 2 * n + 1, coords[2 * n] / c)),
        }
        pairs
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.state_len() {
            return Err(Error::DimensionMismatch {
                expected: self.state_len(),
                got: len,
            });
        }
        Ok(())
    }
}

pub(crate) fn wrap_pi(x: f64) -> f64 {
    let r = (x + std::f64::consts::PI).rem_euclid(TAU) - std::f64::consts::PI;
    if r == -std::f64::consts::PI {
        std::f64::consts::PI
    } else {
        r
    }
}

/// A point of phase space stored as the flat vector
/// `[q_1..q_n, p_1..p_n]`, optionally followed by the extended pair
/// `(t, E)` or `(s, E_s)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseState {
    n: usize,
    coords: Vec<f64>,
}

impl PhaseState {
    pub fn new(q: Vec<f64>, p: Vec<f64>) -> Result<Self> {
        if q.len() != p.len() || q.is_empty() {
            return Err(Error::InvalidState(format!(
                "q and p must have equal nonzero length (got {} and {})",
                q.len(),
                p.len()
            )));
        }
        let n = q.len();
        let mut coords = q;
        coords.extend(p);
        Ok(Self { n, coords })
    }

    /// State on an extended phase space: `(q, p)` plus one conjugate pair.
    pub fn extended(q: Vec<f64>, p: Vec<f64>, time_like: f64, energy_like: f64) -> Result<Self> {
        let mut s = Self::new(q, p)?;
        s.coords.push(time_like);
        s.coords.push(energy_like);
        Ok(s)
    }

    /// One degree of freedom, `(q, p)`.
    pub fn planar(q: f64, p: f64) -> Self {
        Self {
            n: 1,
            coords: vec![q, p],
        }
    }

    pub fn from_coords(n: usize, coords: Vec<f64>) -> Result<Self> {
        if n == 0 || (coords.len() != 2 * n && coords.len() != 2 * n + 2) {
            return Err(Error::InvalidState(format!(
                "{} coordinates do not describe a state with n={n}",
                coords.len()
            )));
        }
        Ok(Self { n, coords })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn q(&self) -> &[f64] {
        &self.coords[..self.n]
    }

    pub fn p(&self) -> &[f64] {
        &self.coords[self.n..2 * self.n]
    }

    /// The extra conjugate pair of extended states.
    pub fn ext(&self) -> Option<(f64, f64)> {
        self.is_extended()
            .then(|| (self.coords[2 * self.n], self.coords[2 * self.n + 1]))
    }

    pub fn is_extended(&self) -> bool {
        self.coords.len() == 2 * self.n + 2
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn into_coords(self) -> Vec<f64> {
        self.coords
    }

    pub fn is_finite(&self) -> bool {
        self.coords.iter().all(|x| x.is_finite())
    }
}

/// Dense antisymmetric matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Bivector {
    dim: usize,
    data: Vec<f64>,
}

impl Bivector {
    fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![0.0; dim * dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.dim + j]
    }

    fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.dim + j] = v;
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        (0..self.dim)
            .map(|i| (0..self.dim).map(|j| self.get(i, j) * v[j]).sum())
            .collect()
    }

    /// Rank by Gaussian elimination with full pivoting; pivots with
    /// magnitude `<= tol` count as zero.
    pub fn rank(&self, tol: f64) -> usize {
        let n = self.dim;
        let mut m = self.data.clone();
        let mut rank = 0;
        for col in 0..n {
            if rank == n {
                break;
            }
            let (mut pr, mut pc, mut best) = (rank, col, 0.0f64);
            for r in rank..n {
                for c in col..n {
                    let v = m[r * n + c].abs();
                    if v > best {
                        best = v;
                        pr = r;
                        pc = c;
                    }
                }
            }
            if best <= tol {
                break;
            }
            for c in 0..n {
                m.swap(rank * n + c, pr * n + c);
            }
            for r in 0..n {
                m.swap(r * n + col, r * n + pc);
            }
            let pivot = m[rank * n + col];
            for r in rank + 1..n {
                let f = m[r * n + col] / pivot;
                if f != 0.0 {
                    for c in col..n {
                        m[r * n + c] -= f * m[rank * n + c];
                    }
                }
            }
            rank += 1;
        }
        rank
    }
}

/// Value of the coordinate cutting out `Z`. Zero iff the state lies on `Z`.
pub fn defining_function(structure: &PhaseStructure, state: &PhaseState) -> Result<f64> {
    structure.check_len(state.coords().len())?;
    defining_value(structure, state.coords())
}

pub(crate) fn defining_value(structure: &PhaseStructure, coords: &[f64]) -> Result<f64> {
    structure
        .singular_coordinate()
        .map(|i| coords[i])
        .ok_or(Error::NoCriticalSet)
}

pub fn poisson_bivector(structure: &PhaseStructure, state: &PhaseState) -> Result<Bivector> {
    structure.check_len(state.coords().len())?;
    let mut pi = Bivector::zeros(structure.state_len());
    for (x, y, a) in structure.pairs(state.coords()) {
        pi.set(x, y, a);
        pi.set(y, x, -a);
    }
    Ok(pi)
}

/// True when the bivector has lost rank at `state`.
pub fn is_degenerate(structure: &PhaseStructure, state: &PhaseState, tol: f64) -> Result<bool> {
    let pi = poisson_bivector(structure, state)?;
    Ok(pi.rank(tol) < pi.dim())
}

/// `X_H = Pi . grad H`.
pub fn hamiltonian_vector_field(
    structure: &PhaseStructure,
    h: &HamiltonianSpec,
    state: &PhaseState,
) -> Result<Vec<f64>> {
    structure.check_len(state.coords().len())?;
    let mut out = vec![0.0; state.coords().len()];
    field_into(structure, h, state.coords(), &mut out)?;
    Ok(out)
}

pub(crate) fn field_into(
    structure: &PhaseStructure,
    h: &HamiltonianSpec,
    coords: &[f64],
    out: &mut [f64],
) -> Result<()> {
    check_compatible(structure, h)?;
    let mut grad = vec![0.0; coords.len()];
    h.grad_into(coords, &mut grad)?;
    for (x, y, a) in structure.pairs(coords) {
        out[x] = a * grad[y];
        out[y] = -a * grad[x];
    }
    Ok(())
}

pub(crate) fn check_compatible(structure: &PhaseStructure, h: &HamiltonianSpec) -> Result<()> {
    if structure.n() != h.n() {
        return Err(Error::DimensionMismatch {
            expected: structure.n(),
            got: h.n(),
        });
    }
    if structure.kind().is_extended() != h.is_extended() {
        return Err(Error::InvalidArgument(format!(
            "structure {} and Hamiltonian disagree on the extended pair",
            structure.kind()
        )));
    }
    Ok(())
}

/// `omega(u, v)` at `state`; the inverse of the bivector, defined off `Z`.
pub fn evaluate_form(
    structure: &PhaseStructure,
    state: &PhaseState,
    u: &[f64],
    v: &[f64],
) -> Result<f64> {
    let len = state.coords().len();
    structure.check_len(len)?;
    structure.check_len(u.len())?;
    structure.check_len(v.len())?;
    if structure.kind().is_singular()
        && defining_value(structure, state.coords())?.abs() < DEFAULT_DEGENERACY_TOL
    {
        return Err(Error::SingularForm);
    }
    Ok(structure
        .pairs(state.coords())
        .into_iter()
        .map(|(x, y, a)| (u[y] * v[x] - u[x] * v[y]) / a)
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonians::{HamiltonianSpec, Potential};

    fn stokes(lambda: f64) -> HamiltonianSpec {
        HamiltonianSpec::mechanical(1, Potential::Linear { lambda }).unwrap()
    }

    #[test]
    fn defining_function_reads_singular_coordinate() {
        let tw = PhaseStructure::twisted(1, 1.0).unwrap();
        assert_eq!(
            defining_function(&tw, &PhaseState::planar(3.0, 0.0)).unwrap(),
            0.0
        );
        assert_eq!(
            defining_function(&tw, &PhaseState::planar(0.0, 2.0)).unwrap(),
            2.0
        );
        let nt = PhaseStructure::nontwisted(1, 1.0).unwrap();
        assert_eq!(
            defining_function(&nt, &PhaseState::planar(0.5, 7.0)).unwrap(),
            0.5
        );
        let can = PhaseStructure::canonical(1);
        assert_eq!(
            defining_function(&can, &PhaseState::planar(0.0, 1.0)),
            Err(Error::NoCriticalSet)
        );
    }

    #[test]
    fn bivector_inverts_twisted_form() {
        // omega = (1/p) dp ^ dq at p = 2 is [[0, -1/2], [1/2, 0]] in (q, p);
        // its inverse has Pi[q][p] = 2.
        let tw = PhaseStructure::twisted(1, 1.0).unwrap();
        let pi = poisson_bivector(&tw, &PhaseState::planar(0.0, 2.0)).unwrap();
        assert_eq!(pi.get(0, 1), 2.0);
        assert_eq!(pi.get(1, 0), -2.0);
        assert_eq!(pi.rank(DEFAULT_DEGENERACY_TOL), 2);

        let on_z = poisson_bivector(&tw, &PhaseState::planar(5.0, 0.0)).unwrap();
        assert!(on_z.data.iter().all(|&x| x == 0.0));
        assert_eq!(on_z.rank(DEFAULT_DEGENERACY_TOL), 0);
    }

    #[test]
    fn canonical_bivector_is_constant() {
        let can = PhaseStructure::canonical(2);
        for state in [
            PhaseState::new(vec![0.0, 1.0], vec![2.0, -3.0]).unwrap(),
            PhaseState::new(vec![-7.0, 0.5], vec![0.0, 0.0]).unwrap(),
        ] {
            let pi = poisson_bivector(&can, &state).unwrap();
            for i in 0..4 {
                for j in 0..4 {
                    let expected = match (i, j) {
                        (0, 2) | (1, 3) => 1.0,
                        (2, 0) | (3, 1) => -1.0,
                        _ => 0.0,
                    };
                    assert_eq!(pi.get(i, j), expected);
                }
            }
        }
    }

    #[test]
    fn stokes_fields() {
        let tw = PhaseStructure::twisted(1, 1.0).unwrap();
        let h = stokes(1.0);
        let x = hamiltonian_vector_field(&tw, &h, &PhaseState::planar(0.0, 2.0)).unwrap();
        assert_eq!(x, vec![4.0, -1.0]);
        let x = hamiltonian_vector_field(&tw, &h, &PhaseState::planar(5.0, 0.0)).unwrap();
        assert_eq!(x, vec![0.0, 0.0]);
        let can = PhaseStructure::canonical(1);
        let x = hamiltonian_vector_field(&can, &h, &PhaseState::planar(0.0, 2.0)).unwrap();
        assert_eq!(x, vec![2.0, -0.5]);
    }

    #[test]
    fn form_values() {
        let tw = PhaseStructure::twisted(1, 1.0).unwrap();
        let s = PhaseState::planar(0.0, 2.0);
        let dq = [1.0, 0.0];
        let dp = [0.0, 1.0];
        assert_eq!(evaluate_form(&tw, &s, &dp, &dq).unwrap(), 0.5);
        assert_eq!(evaluate_form(&tw, &s, &dq, &dp).unwrap(), -0.5);
        assert_eq!(
            evaluate_form(&tw, &s, &[0.3, 0.7], &[0.3, 0.7]).unwrap(),
            0.0
        );
        assert_eq!(
            evaluate_form(&tw, &PhaseState::planar(0.0, 0.0), &dp, &dq),
            Err(Error::SingularForm)
        );
        let can = PhaseStructure::canonical(1);
        assert_eq!(evaluate_form(&can, &s, &dp, &dq).unwrap(), 1.0);
    }

    #[test]
    fn structure_validation() {
        assert!(PhaseStructure::new(StructureKind::Canonical, 3, 1.0, 0, vec![]).is_err());
        assert!(PhaseStructure::new(StructureKind::Canonical, 0, 1.0, 0, vec![]).is_err());
        assert!(PhaseStructure::twisted(1, 0.0).is_err());
        assert!(PhaseStructure::new(StructureKind::TwistedB, 4, 1.0, 2, vec![]).is_err());
        assert!(PhaseStructure::new(StructureKind::ExtendedBS, 2, 1.0, 1, vec![]).is_err());
        assert!(PhaseStructure::canonical(1)
            .with_angular(vec![true, false])
            .is_err());
        // the weight is irrelevant for canonical kinds
        assert!(PhaseStructure::new(StructureKind::Canonical, 2, 0.0, 0, vec![]).is_ok());
    }

    #[test]
    fn state_validation() {
        assert!(PhaseState::new(vec![1.0], vec![1.0, 2.0]).is_err());
        assert!(PhaseState::new(vec![], vec![]).is_err());
        let e = PhaseState::extended(vec![1.0], vec![2.0], 0.0, 0.5).unwrap();
        assert_eq!(e.ext(), Some((0.0, 0.5)));
        assert_eq!(PhaseState::planar(1.0, 2.0).ext(), None);
        assert!(PhaseState::from_coords(2, vec![0.0; 5]).is_err());
    }

    #[test]
    fn angle_wrapping() {
        let s = PhaseStructure::twisted(1, 1.0)
            .unwrap()
            .with_angular(vec![true])
            .unwrap();
        let mut c = [-0.5, 3.0];
        s.wrap_angles(&mut c);
        assert!((c[0] - (TAU - 0.5)).abs() < 1e-15);
        assert_eq!(c[1], 3.0);
        let d = s.difference(&[TAU - 0.1, 1.0], &[0.1, 1.0]);
        assert!((d[0] + 0.2).abs() < 1e-12);
    }

    #[test]
    fn extended_pairs_match_displayed_dynamics() {
        // t' = -dH/dE and E' = dH/dt on the canonical extension
        let st = PhaseStructure::extended_canonical(1);
        let pi = poisson_bivector(
            &st,
            &PhaseState::extended(vec![0.0], vec![0.0], 0.0, 0.0).unwrap(),
        )
        .unwrap();
        assert_eq!(pi.get(2, 3), -1.0);
        assert_eq!(pi.get(3, 2), 1.0);
        // the (s, E_s) block scales with s
        let bs = PhaseStructure::extended_b_s(1, 1.0).unwrap();
        let pi = poisson_bivector(
            &bs,
            &PhaseState::extended(vec![0.0], vec![0.0], 0.25, 0.0).unwrap(),
        )
        .unwrap();
        assert_eq!(pi.get(2, 3), 0.25);
        assert_eq!(pi.rank(DEFAULT_DEGENERACY_TOL), 4);
        let pi = poisson_bivector(
            &bs,
            &PhaseState::extended(vec![0.0], vec![0.0], 0.0, 0.0).unwrap(),
        )
        .unwrap();
        assert_eq!(pi.rank(DEFAULT_DEGENERACY_TOL), 2);
    }
}
