//! Closed-form solutions and a direct reference integrator for damped motion.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::PhaseState;
use crate::hamiltonians::Potential;
use crate::integrate::solver::rk4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleSource {
    ClosedForm,
    FineIntegration,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    pub times: Vec<f64>,
    pub states: Vec<PhaseState>,
    pub source: OracleSource,
    /// Internal step of a fine integration.
    pub step: Option<f64>,
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "{name} must be positive, got {v}"
        )))
    }
}

/// Exact twisted flow of `p^2/2 + lambda q/2`.
pub fn stokes_exact(q0: f64, p0: f64, lambda: f64, t: f64) -> Result<(f64, f64)> {
    positive("lambda", lambda)?;
    let q = q0 + p0 * p0 / lambda * -(-lambda * t).exp_m1();
    Ok((q, p0 * (-0.5 * lambda * t).exp()))
}

/// Exact canonical flow of `p^2/2 + lambda q/2`.
pub fn classical_parabola(q0: f64, p0: f64, lambda: f64, t: f64) -> Result<(f64, f64)> {
    positive("lambda", lambda)?;
    Ok((-0.25 * lambda * t * t + p0 * t + q0, p0 - 0.5 * lambda * t))
}

/// `c1/sqrt(lambda) tanh(c1 sqrt(lambda) t/2 + c2)`, the position along the
/// twisted flow of `p^2/2 + lambda q^2/4`.
pub fn quadratic_tanh(c1: f64, c2: f64, lambda: f64, t: f64) -> Result<f64> {
    positive("lambda", lambda)?;
    let r = lambda.sqrt();
    Ok(c1 / r * (0.5 * c1 * r * t + c2).tanh())
}

/// Constants `(c1, c2)` of the tanh solution through `(q0, p0)`, `p0 != 0`.
pub fn quadratic_tanh_constants(q0: f64, p0: f64, lambda: f64) -> Result<(f64, f64)> {
    positive("lambda", lambda)?;
    if p0 == 0.0 {
        return Err(Error::InvalidArgument(
            "p0 = 0 is a fixed point, not a tanh orbit".into(),
        ));
    }
    let c1 = (2.0 * p0 * p0 + lambda * q0 * q0).sqrt();
    Ok((c1, (q0 * lambda.sqrt() / c1).atanh()))
}

/// Position and momentum on the tanh solution; `p = sign * sqrt(dq/dt)`.
pub fn quadratic_tanh_state(
    c1: f64,
    c2: f64,
    lambda: f64,
    t: f64,
    sign: f64,
) -> Result<(f64, f64)> {
    let q = quadratic_tanh(c1, c2, lambda, t)?;
    let sech = 1.0 / (0.5 * c1 * lambda.sqrt() * t + c2).cosh();
    Ok((q, sign.signum() * c1 * sech / std::f64::consts::SQRT_2))
}

fn closed_form<F>(times: &[f64], f: F) -> Result<OracleResult>
where
    F: Fn(f64) -> Result<(f64, f64)>,
{
    let states = times
        .iter()
        .map(|&t| f(t).map(|(q, p)| PhaseState::planar(q, p)))
        .collect::<Result<Vec<_>>>()?;
    Ok(OracleResult {
        times: times.to_vec(),
        states,
        source: OracleSource::ClosedForm,
        step: None,
    })
}

pub fn stokes_series(q0: f64, p0: f64, lambda: f64, times: &[f64]) -> Result<OracleResult> {
    closed_form(times, |t| stokes_exact(q0, p0, lambda, t))
}

pub fn parabola_series(q0: f64, p0: f64, lambda: f64, times: &[f64]) -> Result<OracleResult> {
    closed_form(times, |t| classical_parabola(q0, p0, lambda, t))
}

pub fn tanh_series(q0: f64, p0: f64, lambda: f64, times: &[f64]) -> Result<OracleResult> {
    let (c1, c2) = quadratic_tanh_constants(q0, p0, lambda)?;
    closed_form(times, |t| quadratic_tanh_state(c1, c2, lambda, t, p0))
}

/// Upper bound on the internal step of `damped_newton_reference`.
pub const REFERENCE_MAX_STEP: f64 = 1e-3;

/// Integrates `q'' = -lambda q' - grad V(q, t)` directly with RK4 and
/// samples `(q, dq/dt)` on `t_grid`. The internal step is at most a
/// hundredth of the smallest grid spacing and at most `REFERENCE_MAX_STEP`.
pub fn damped_newton_reference(
    potential: &Potential,
    lambda: f64,
    q0: &[f64],
    v0: &[f64],
    t_grid: &[f64],
) -> Result<OracleResult> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "friction must be non-negative, got {lambda}"
        )));
    }
    if q0.len() != v0.len() || q0.is_empty() {
        return Err(Error::DimensionMismatch {
            expected: q0.len(),
            got: v0.len(),
        });
    }
    if t_grid.is_empty() {
        return Err(Error::InvalidArgument("time grid is empty".into()));
    }
    if t_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::NonMonotoneTime);
    }
    potential.validate()?;
    let n = q0.len();
    let min_gap = t_grid
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::INFINITY, f64::min);
    let h = (min_gap / 100.0).min(REFERENCE_MAX_STEP);

    // state (q, v, t)
    let field = |x: &[f64], out: &mut [f64]| -> Result<()> {
        let t = x[2 * n];
        potential.grad_q(&x[..n], t, &mut out[n..2 * n])?;
        for i in 0..n {
            out[i] = x[n + i];
            out[n + i] = -lambda * x[n + i] - out[n + i];
        }
        out[2 * n] = 1.0;
        Ok(())
    };
    let mut x: Vec<f64> = q0.iter().chain(v0).copied().chain([t_grid[0]]).collect();
    let mut states = vec![PhaseState::new(q0.to_vec(), v0.to_vec())?];
    for w in t_grid.windows(2) {
        let gap = w[1] - w[0];
        let m = (gap / h).ceil().max(1.0) as usize;
        let dt = gap / m as f64;
        for k in 0..m {
            x = rk4(&field, &x, dt, w[0] + k as f64 * dt)?;
        }
        x[2 * n] = w[1];
        states.push(PhaseState::new(x[..n].to_vec(), x[n..2 * n].to_vec())?);
    }
    Ok(OracleResult {
        times: t_grid.to_vec(),
        states,
        source: OracleSource::FineIntegration,
        step: Some(h),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(t_end: f64, count: usize) -> Vec<f64> {
        (0..=count)
            .map(|k| t_end * k as f64 / count as f64)
            .collect()
    }

    #[test]
    fn stokes_examples() {
        let (q, p) = stokes_exact(0.0, 1.0, 1.0, 1.0).unwrap();
        assert!((q - 0.6321205588285577).abs() < 1e-15);
        assert!((p - 0.6065306597126334).abs() < 1e-15);
        assert_eq!(stokes_exact(2.5, 0.0, 3.0, 7.0).unwrap(), (2.5, 0.0));
        let (q, _) = stokes_exact(0.0, 1.0, 1.0, 1e3).unwrap();
        assert_eq!(q, 1.0);
        assert!(stokes_exact(0.0, 1.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn parabola_examples() {
        assert_eq!(
            classical_parabola(0.0, 0.0, 1.0, 2.0).unwrap(),
            (-1.0, -1.0)
        );
        assert_eq!(classical_parabola(0.0, 0.0, 5.0, 0.0).unwrap(), (0.0, 0.0));
        assert_eq!(classical_parabola(3.0, 1.0, 2.0, 1.0).unwrap(), (3.5, 0.0));
    }

    #[test]
    fn tanh_examples() {
        assert_eq!(quadratic_tanh(1.0, 0.0, 1.0, 0.0).unwrap(), 0.0);
        assert!((quadratic_tanh(1.0, 0.0, 1.0, 2.0).unwrap() - 0.7615941559557649).abs() < 1e-15);
        assert!((quadratic_tanh(1.0, 0.0, 1.0, 100.0).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn tanh_constants_through_initial_state() {
        let (c1, c2) = quadratic_tanh_constants(0.0, 1.0, 1.0).unwrap();
        assert!((c1 - std::f64::consts::SQRT_2).abs() < 1e-15);
        assert_eq!(c2, 0.0);
        let (c1, _) = quadratic_tanh_constants(0.0, std::f64::consts::FRAC_1_SQRT_2, 1.0).unwrap();
        assert!((c1 - 1.0).abs() < 1e-15);
        let (c1, c2) = quadratic_tanh_constants(0.3, -0.8, 2.0).unwrap();
        let (q, p) = quadratic_tanh_state(c1, c2, 2.0, 0.0, -0.8).unwrap();
        assert!((q - 0.3).abs() < 1e-14 && (p + 0.8).abs() < 1e-14);
        assert!(quadratic_tanh_constants(1.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn closed_forms_solve_their_equations() {
        let d = 1e-4;
        for k in 0..=100 {
            let t = 0.1 * k as f64;
            // twisted linear: q' = p^2, p' = -lambda p / 2
            let lambda = 1.5;
            let at = |t| stokes_exact(0.2, -0.7, lambda, t).unwrap();
            let ((qa, pa), (qb, pb), (_, p)) = (at(t + d), at(t - d), at(t));
            assert!(((qa - qb) / (2.0 * d) - p * p).abs() < 1e-6);
            assert!(((pa - pb) / (2.0 * d) + lambda * p / 2.0).abs() < 1e-6);
            // canonical linear: q' = p, p' = -lambda/2
            let at = |t| classical_parabola(1.0, 2.0, lambda, t).unwrap();
            let ((qa, pa), (qb, pb), (_, p)) = (at(t + d), at(t - d), at(t));
            assert!(((qa - qb) / (2.0 * d) - p).abs() < 1e-6);
            assert!(((pa - pb) / (2.0 * d) + lambda / 2.0).abs() < 1e-6);
            // twisted quadratic: q' = p^2, p' = -p lambda q / 2
            let (c1, c2) = quadratic_tanh_constants(-0.4, 0.9, lambda).unwrap();
            let at = |t| quadratic_tanh_state(c1, c2, lambda, t, 1.0).unwrap();
            let ((qa, pa), (qb, pb), (q, p)) = (at(t + d), at(t - d), at(t));
            assert!(((qa - qb) / (2.0 * d) - p * p).abs() < 1e-6);
            assert!(((pa - pb) / (2.0 * d) + p * lambda * q / 2.0).abs() < 1e-6);
        }
    }

    #[test]
    fn free_damped_motion() {
        let times = grid(10.0, 100);
        let r = damped_newton_reference(&Potential::Zero, 1.0, &[0.0], &[1.0], &times).unwrap();
        assert_eq!(r.source, OracleSource::FineIntegration);
        assert!(r.step.unwrap() <= 1e-3);
        for (t, s) in r.times.iter().zip(&r.states) {
            assert!((s.q()[0] + (-t).exp_m1()).abs() < 1e-10);
            assert!((s.p()[0] - (-t).exp()).abs() < 1e-10);
        }
    }

    #[test]
    fn undamped_oscillator() {
        let times = grid(10.0, 200);
        let v = Potential::PureQuadratic { lambda: 2.0 };
        let r = damped_newton_reference(&v, 0.0, &[1.0], &[0.0], &times).unwrap();
        for (t, s) in r.times.iter().zip(&r.states) {
            assert!((s.q()[0] - t.cos()).abs() < 1e-8);
        }
    }

    #[test]
    fn terminal_velocity() {
        let times = grid(20.0, 200);
        let v = Potential::Linear { lambda: 4.0 };
        let r = damped_newton_reference(&v, 1.0, &[0.0], &[0.0], &times).unwrap();
        assert!((r.states.last().unwrap().p()[0] + 2.0).abs() < 1e-6);
    }

    #[test]
    fn reference_rejects_bad_grid() {
        let v = Potential::Zero;
        assert_eq!(
            damped_newton_reference(&v, 1.0, &[0.0], &[1.0], &[0.0, 1.0, 0.5]),
            Err(Error::NonMonotoneTime)
        );
        assert!(damped_newton_reference(&v, -1.0, &[0.0], &[1.0], &[0.0, 1.0]).is_err());
    }
}
