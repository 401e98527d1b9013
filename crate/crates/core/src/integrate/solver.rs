//! Explicit Runge-Kutta kernels shared by the integrators.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Classical fixed-step RK4.
    Rk4Fixed,
    /// Dormand-Prince 5(4) with embedded error estimate.
    RkAdaptive,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Rk4Fixed => "rk4_fixed",
            Method::RkAdaptive => "rk_adaptive",
        }
    }
}

fn axpy(x: &[f64], h: f64, terms: &[(f64, &[f64])], out: &mut [f64]) {
    for i in 0..x.len() {
        let mut acc = 0.0;
        for (c, k) in terms {
            acc += c * k[i];
        }
        out[i] = x[i] + h * acc;
    }
}

fn checked<F>(f: &F, x: &[f64], out: &mut [f64], t: f64) -> Result<()>
where
    F: Fn(&[f64], &mut [f64]) -> Result<()>,
{
    f(x, out)?;
    if out.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::Blowup { t })
    }
}

/// One classical RK4 step. `t` only labels errors.
pub(crate) fn rk4<F>(f: &F, x: &[f64], h: f64, t: f64) -> Result<Vec<f64>>
where
    F: Fn(&[f64], &mut [f64]) -> Result<()>,
{
    let n = x.len();
    let (mut k1, mut k2, mut k3, mut k4) = (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let mut tmp = vec![0.0; n];
    checked(f, x, &mut k1, t)?;
    axpy(x, 0.5 * h, &[(1.0, &k1)], &mut tmp);
    checked(f, &tmp, &mut k2, t)?;
    axpy(x, 0.5 * h, &[(1.0, &k2)], &mut tmp);
    checked(f, &tmp, &mut k3, t)?;
    axpy(x, h, &[(1.0, &k3)], &mut tmp);
    checked(f, &tmp, &mut k4, t)?;
    axpy(
        x,
        h / 6.0,
        &[(1.0, &k1), (2.0, &k2), (2.0, &k3), (1.0, &k4)],
        &mut tmp,
    );
    finite_state(tmp, t)
}

fn finite_state(x: Vec<f64>, t: f64) -> Result<Vec<f64>> {
    if x.iter().all(|v| v.is_finite()) {
        Ok(x)
    } else {
        Err(Error::Blowup { t })
    }
}

// Dormand-Prince 5(4) tableau
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// fifth-order weights minus embedded fourth-order weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// One Dormand-Prince step: fifth-order solution and the local error
/// estimate.
pub(crate) fn dopri5<F>(f: &F, x: &[f64], h: f64, t: f64) -> Result<(Vec<f64>, Vec<f64>)>
where
    F: Fn(&[f64], &mut [f64]) -> Result<()>,
{
    let n = x.len();
    let mut k: Vec<Vec<f64>> = vec![vec![0.0; n]; 7];
    let mut tmp = vec![0.0; n];
    checked(f, x, &mut k[0], t)?;
    axpy(x, h, &[(A21, &k[0])], &mut tmp);
    checked(f, &tmp, &mut k[1], t)?;
    axpy(x, h, &[(A31, &k[0]), (A32, &k[1])], &mut tmp);
    checked(f, &tmp, &mut k[2], t)?;
    axpy(x, h, &[(A41, &k[0]), (A42, &k[1]), (A43, &k[2])], &mut tmp);
    checked(f, &tmp, &mut k[3], t)?;
    axpy(
        x,
        h,
        &[(A51, &k[0]), (A52, &k[1]), (A53, &k[2]), (A54, &k[3])],
        &mut tmp,
    );
    checked(f, &tmp, &mut k[4], t)?;
    axpy(
        x,
        h,
        &[
            (A61, &k[0]),
            (A62, &k[1]),
            (A63, &k[2]),
            (A64, &k[3]),
            (A65, &k[4]),
        ],
        &mut tmp,
    );
    checked(f, &tmp, &mut k[5], t)?;
    let mut y = vec![0.0; n];
    axpy(
        x,
        h,
        &[
            (B1, &k[0]),
            (B3, &k[2]),
            (B4, &k[3]),
            (B5, &k[4]),
            (B6, &k[5]),
        ],
        &mut y,
    );
    checked(f, &y, &mut k[6], t)?;
    let err: Vec<f64> = (0..n)
        .map(|i| {
            h * (E1 * k[0][i]
                + E3 * k[2][i]
                + E4 * k[3][i]
                + E5 * k[4][i]
                + E6 * k[5][i]
                + E7 * k[6][i])
        })
        .collect();
    Ok((finite_state(y, t)?, err))
}

/// A step of `method` with size `h`, discarding any error estimate. Used to
/// re-step from a stored sample for event localization and dense sampling.
pub(crate) fn advance<F>(method: Method, f: &F, x: &[f64], h: f64, t: f64) -> Result<Vec<f64>>
where
    F: Fn(&[f64], &mut [f64]) -> Result<()>,
{
    match method {
        Method::Rk4Fixed => rk4(f, x, h, t),
        Method::RkAdaptive => dopri5(f, x, h, t).map(|(y, _)| y),
    }
}

/// Smallest `delta` in `(lo, hi]` (to within `tol`) for which `hit(delta)`
/// holds, assuming `hit(hi)` and `!hit(lo)`.
pub(crate) fn bisect<P>(mut lo: f64, mut hi: f64, tol: f64, mut hit: P) -> Result<f64>
where
    P: FnMut(f64) -> Result<bool>,
{
    for _ in 0..200 {
        if hi - lo <= tol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if hit(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Weighted max-norm of an error estimate.
pub(crate) fn error_norm(err: &[f64], x: &[f64], y: &[f64], rtol: f64, atol: f64) -> f64 {
    err.iter()
        .zip(x.iter().zip(y))
        .map(|(e, (a, b))| e.abs() / (atol + rtol * a.abs().max(b.abs())))
        .fold(0.0, f64::max)
}

/// Standard step-size update factor for a fifth-order pair.
pub(crate) fn step_factor(err: f64) -> f64 {
    if err == 0.0 {
        5.0
    } else {
        (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
    }
}
