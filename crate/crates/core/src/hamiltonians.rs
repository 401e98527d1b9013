//! Kinetic-plus-potential Hamiltonians with analytic gradients.
//!
//! Coordinates follow [`PhaseState`]: `[q.., p..]`, then `(t, E)` for the
//! plain and rescaled extensions or `(s, E_s)` in s-coordinates.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::geometry::PhaseState;

/// Step used for central-difference gradients of custom potentials.
pub const FD_STEP: f64 = 1e-6;

/// Largest `lambda * t` for which `exp(2 lambda t)` is evaluated.
pub const OVERFLOW_GUARD: f64 = 700.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PotentialFamily {
    Linear,
    PureQuadratic,
    GeneralQuadratic,
    Periodic,
    Zero,
    Custom,
}

impl PotentialFamily {
    pub fn as_str(self) -> &'static str {
        match self {
            PotentialFamily::Linear => "linear",
            PotentialFamily::PureQuadratic => "pure_quadratic",
            PotentialFamily::GeneralQuadratic => "general_quadratic",
            PotentialFamily::Periodic => "periodic",
            PotentialFamily::Zero => "zero",
            PotentialFamily::Custom => "custom",
        }
    }
}

pub type ScalarFn = Arc<dyn Fn(&[f64], f64) -> f64 + Send + Sync>;
pub type GradientFn = Arc<dyn Fn(&[f64], f64, &mut [f64]) + Send + Sync>;

/// User-supplied `V(q, t)`. Handles must be pure; missing derivatives are
/// taken by central differences with step [`FD_STEP`].
#[derive(Clone)]
pub struct CustomPotential {
    pub name: String,
    pub value: ScalarFn,
    pub grad_q: Option<GradientFn>,
    pub d_dt: Option<ScalarFn>,
}

impl CustomPotential {
    pub fn new(name: impl Into<String>, value: ScalarFn) -> Self {
        Self {
            name: name.into(),
            value,
            grad_q: None,
            d_dt: None,
        }
    }

    pub fn with_gradient(mut self, grad_q: GradientFn) -> Self {
        self.grad_q = Some(grad_q);
        self
    }

    pub fn with_time_derivative(mut self, d_dt: ScalarFn) -> Self {
        self.d_dt = Some(d_dt);
        self
    }
}

impl fmt::Debug for CustomPotential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomPotential")
            .field("name", &self.name)
            .field("analytic_grad", &self.grad_q.is_some())
            .finish()
    }
}

/// Potential families. `Linear` and `GeneralQuadratic` act on `q_1` only (the
/// dissipative direction); `PureQuadratic` and `Periodic` sum over all
/// positions.
#[derive(Debug, Clone)]
pub enum Potential {
    Zero,
    /// `lambda/2 * q_1`
    Linear {
        lambda: f64,
    },
    /// `lambda/4 * |q|^2`
    PureQuadratic {
        lambda: f64,
    },
    /// `lambda/2 * q_1 (1 + alpha q_1 / 2)`
    GeneralQuadratic {
        lambda: f64,
        alpha: f64,
    },
    /// `lambda/2 * sum cos(q_i)`
    Periodic {
        lambda: f64,
    },
    Custom(CustomPotential),
}

impl Potential {
    pub fn family(&self) -> PotentialFamily {
        match self {
            Potential::Zero => PotentialFamily::Zero,
            Potential::Linear { .. } => PotentialFamily::Linear,
            Potential::PureQuadratic { .. } => PotentialFamily::PureQuadratic,
            Potential::GeneralQuadratic { .. } => PotentialFamily::GeneralQuadratic,
            Potential::Periodic { .. } => PotentialFamily::Periodic,
            Potential::Custom(_) => PotentialFamily::Custom,
        }
    }

    /// Strength coefficient, for the families that have one.
    pub fn lambda(&self) -> Option<f64> {
        match *self {
            Potential::Linear { lambda }
            | Potential::PureQuadratic { lambda }
            | Potential::GeneralQuadratic { lambda, .. }
            | Potential::Periodic { lambda } => Some(lambda),
            Potential::Zero | Potential::Custom(_) => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(lambda) = self.lambda() {
            if !(lambda > 0.0 && lambda.is_finite()) {
                return Err(Error::InvalidPotential(format!(
                    "lambda must be positive and finite, got {lambda}"
                )));
            }
        }
        if let Potential::GeneralQuadratic { alpha, .. } = self {
            if !alpha.is_finite() {
                return Err(Error::InvalidPotential("alpha must be finite".into()));
            }
        }
        Ok(())
    }

    pub fn label(&self) -> String {
        match self {
            Potential::Zero => "zero".into(),
            Potential::Linear { lambda } => format!("linear(lambda={lambda})"),
            Potential::PureQuadratic { lambda } => format!("pure_quadratic(lambda={lambda})"),
            Potential::GeneralQuadratic { lambda, alpha } => {
                format!("general_quadratic(lambda={lambda},alpha={alpha})")
            }
            Potential::Periodic { lambda } => format!("periodic(lambda={lambda})"),
            Potential::Custom(c) => format!("custom({})", c.name),
        }
    }

    pub fn value(&self, q: &[f64], t: f64) -> Result<f64> {
        let v = match self {
            Potential::Zero => 0.0,
            Potential::Linear { lambda } => 0.5 * lambda * q[0],
            Potential::PureQuadratic { lambda } => {
                0.25 * lambda * q.iter().map(|x| x * x).sum::<f64>()
            }
            Potential::GeneralQuadratic { lambda, alpha } => {
                0.5 * lambda * q[0] * (1.0 + 0.5 * alpha * q[0])
            }
            Potential::Periodic { lambda } => 0.5 * lambda * q.iter().map(|x| x.cos()).sum::<f64>(),
            Potential::Custom(c) => (c.value)(q, t),
        };
        finite(v, self)
    }

    /// `dV/dq` written into `out`.
    pub fn grad_q(&self, q: &[f64], t: f64, out: &mut [f64]) -> Result<()> {
        out.iter_mut().for_each(|x| *x = 0.0);
        match self {
            Potential::Zero => {}
            Potential::Linear { lambda } => out[0] = 0.5 * lambda,
            Potential::PureQuadratic { lambda } => {
                for (o, x) in out.iter_mut().zip(q) {
                    *o = 0.5 * lambda * x;
                }
            }
            Potential::GeneralQuadratic { lambda, alpha } => {
                out[0] = 0.5 * lambda * (1.0 + alpha * q[0]);
            }
            Potential::Periodic { lambda } => {
                for (o, x) in out.iter_mut().zip(q) {
                    *o = -0.5 * lambda * x.sin();
                }
            }
            Potential::Custom(c) => match &c.grad_q {
                Some(g) => g(q, t, out),
                None => {
                    let mut shifted = q.to_vec();
                    for i in 0..q.len() {
                        shifted[i] = q[i] + FD_STEP;
                        let up = (c.value)(&shifted, t);
                        shifted[i] = q[i] - FD_STEP;
                        let down = (c.value)(&shifted, t);
                        shifted[i] = q[i];
                        out[i] = (up - down) / (2.0 * FD_STEP);
                    }
                }
            },
        }
        for &g in out.iter() {
            finite(g, self)?;
        }
        Ok(())
    }

    /// `dV/dt`; zero for every built-in family.
    pub fn d_dt(&self, q: &[f64], t: f64) -> Result<f64> {
        match self {
            Potential::Custom(c) => {
                let v = match &c.d_dt {
                    Some(d) => d(q, t),
                    None => {
                        ((c.value)(q, t + FD_STEP) - (c.value)(q, t - FD_STEP)) / (2.0 * FD_STEP)
                    }
                };
                finite(v, self)
            }
            _ => Ok(0.0),
        }
    }
}

fn finite(v: f64, potential: &Potential) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Domain(format!(
            "{} evaluated to {v}",
            potential.label()
        )))
    }
}

/// Extended-phase-space variants of the mechanical Hamiltonian.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Extension {
    None,
    /// `p^2/2 + V(q,t) - E`
    Plain,
    /// `p^2/2 + e^{2 lambda t}/lambda^2 V(q,t) - e^{lambda t}/lambda E`
    Rescaled {
        friction: f64,
    },
    /// `p^2/2 + V(q, t(s))/(lambda s)^2 - E_s/s`, `t(s) = -ln(s)/lambda`
    SCoordinates {
        friction: f64,
    },
}

impl Extension {
    pub fn as_str(self) -> &'static str {
        match self {
            Extension::None => "none",
            Extension::Plain => "plain_extended",
            Extension::Rescaled { .. } => "rescaled_extended",
            Extension::SCoordinates { .. } => "s_coordinates",
        }
    }
}

#[derive(Debug, Clone)]
pub enum HamiltonianForm {
    Mechanical {
        potential: Potential,
        extension: Extension,
    },
    /// Moment map of the lifted toric action: `c log|p_1| + p_2 + .. + p_n`,
    /// plus an optional fiber-independent base term.
    ToricMoment { weight: f64, base: Potential },
    /// `sum p_i`, the moment map of translations.
    Translation,
}

#[derive(Debug, Clone)]
pub struct HamiltonianSpec {
    n: usize,
    form: HamiltonianForm,
}

impl HamiltonianSpec {
    pub fn mechanical(n: usize, potential: Potential) -> Result<Self> {
        Self::with_extension(n, potential, Extension::None)
    }

    pub fn with_extension(n: usize, potential: Potential, extension: Extension) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("n must be positive".into()));
        }
        potential.validate()?;
        if let Extension::Rescaled { friction } | Extension::SCoordinates { friction } = extension {
            if !(friction > 0.0 && friction.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "friction must be positive, got {friction}"
                )));
            }
        }
        Ok(Self {
            n,
            form: HamiltonianForm::Mechanical {
                potential,
                extension,
            },
        })
    }

    pub fn toric_moment(n: usize, weight: f64) -> Result<Self> {
        Self::toric_moment_with_base(n, weight, Potential::Zero)
    }

    pub fn toric_moment_with_base(n: usize, weight: f64, base: Potential) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("n must be positive".into()));
        }
        if weight == 0.0 || !weight.is_finite() {
            return Err(Error::InvalidArgument(
                "modular weight c must be nonzero".into(),
            ));
        }
        base.validate()?;
        Ok(Self {
            n,
            form: HamiltonianForm::ToricMoment { weight, base },
        })
    }

    pub fn translation(n: usize) -> Self {
        Self {
            n,
            form: HamiltonianForm::Translation,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn form(&self) -> &HamiltonianForm {
        &self.form
    }

    pub fn potential(&self) -> Option<&Potential> {
        match &self.form {
            HamiltonianForm::Mechanical { potential, .. } => Some(potential),
            HamiltonianForm::ToricMoment { base, .. } => Some(base),
            HamiltonianForm::Translation => None,
        }
    }

    pub fn extension(&self) -> Extension {
        match &self.form {
            HamiltonianForm::Mechanical { extension, .. } => *extension,
            _ => Extension::None,
        }
    }

    pub fn is_extended(&self) -> bool {
        self.extension() != Extension::None
    }

    pub fn state_len(&self) -> usize {
        if self.is_extended() {
            2 * self.n + 2
        } else {
            2 * self.n
        }
    }

    pub fn label(&self) -> String {
        match &self.form {
            HamiltonianForm::Mechanical {
                potential,
                extension: Extension::None,
            } => {
                format!("kinetic+{}", potential.label())
            }
            HamiltonianForm::Mechanical {
                potential,
                extension,
            } => {
                format!("{}[{}]", extension.as_str(), potential.label())
            }
            HamiltonianForm::ToricMoment { weight, base } => {
                format!("toric_moment(c={weight})+{}", base.label())
            }
            HamiltonianForm::Translation => "translation".into(),
        }
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

    pub fn eval(&self, state: &PhaseState) -> Result<f64> {
        self.eval_at(state.coords())
    }

    pub fn grad(&self, state: &PhaseState) -> Result<Vec<f64>> {
        let mut out = vec![0.0; state.coords().len()];
        self.grad_into(state.coords(), &mut out)?;
        Ok(out)
    }

    pub fn eval_at(&self, x: &[f64]) -> Result<f64> {
        self.check_len(x.len())?;
        let n = self.n;
        let (q, p) = (&x[..n], &x[n..2 * n]);
        match &self.form {
            HamiltonianForm::Mechanical {
                potential,
                extension,
            } => {
                let kinetic = 0.5 * p.iter().map(|v| v * v).sum::<f64>();
                match *extension {
                    Extension::None => Ok(kinetic + potential.value(q, 0.0)?),
                    Extension::Plain => {
                        let (t, e) = (x[2 * n], x[2 * n + 1]);
                        Ok(kinetic + potential.value(q, t)? - e)
                    }
                    Extension::Rescaled { friction: l } => {
                        let (t, e) = (x[2 * n], x[2 * n + 1]);
                        let g = growth(l, t)?;
                        Ok(kinetic + g * g / (l * l) * potential.value(q, t)? - g / l * e)
                    }
                    Extension::SCoordinates { friction: l } => {
                        let (s, es) = (x[2 * n], x[2 * n + 1]);
                        if s <= 0.0 {
                            return Err(Error::SingularHamiltonian);
                        }
                        let t = -s.ln() / l;
                        let ls = l * s;
                        Ok(kinetic + potential.value(q, t)? / (ls * ls) - es / s)
                    }
                }
            }
            HamiltonianForm::ToricMoment { weight, base } => {
                if p[0] == 0.0 {
                    return Err(Error::Domain("log|p_1| undefined at p_1 = 0".into()));
                }
                Ok(weight * p[0].abs().ln() + p[1..].iter().sum::<f64>() + base.value(q, 0.0)?)
            }
            HamiltonianForm::Translation => Ok(p.iter().sum()),
        }
    }

    /// Gradient over all coordinates, written into `out`.
    pub fn grad_into(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        self.check_len(x.len())?;
        if out.len() != x.len() {
            return Err(Error::DimensionMismatch {
                expected: x.len(),
                got: out.len(),
            });
        }
        let n = self.n;
        let (q, p) = (&x[..n], &x[n..2 * n]);
        match &self.form {
            HamiltonianForm::Mechanical {
                potential,
                extension,
            } => {
                out[n..2 * n].copy_from_slice(p);
                match *extension {
                    Extension::None => potential.grad_q(q, 0.0, &mut out[..n])?,
                    Extension::Plain => {
                        let t = x[2 * n];
                        potential.grad_q(q, t, &mut out[..n])?;
                        out[2 * n] = potential.d_dt(q, t)?;
                        out[2 * n + 1] = -1.0;
                    }
                    Extension::Rescaled { friction: l } => {
                        let (t, e) = (x[2 * n], x[2 * n + 1]);
                        let g = growth(l, t)?;
                        let scale = g * g / (l * l);
                        potential.grad_q(q, t, &mut out[..n])?;
                        out[..n].iter_mut().for_each(|v| *v *= scale);
                        out[2 * n] = scale * potential.d_dt(q, t)?
                            + 2.0 * g * g / l * potential.value(q, t)?
                            - g * e;
                        out[2 * n + 1] = -g / l;
                    }
                    Extension::SCoordinates { friction: l } => {
                        let (s, es) = (x[2 * n], x[2 * n + 1]);
                        if s <= 0.0 {
                            return Err(Error::SingularHamiltonian);
                        }
                        let t = -s.ln() / l;
                        let ls2 = (l * s) * (l * s);
                        potential.grad_q(q, t, &mut out[..n])?;
                        out[..n].iter_mut().for_each(|v| *v /= ls2);
                        // d/ds [V(q, t(s)) / (lambda s)^2] with dt/ds = -1/(lambda s)
                        out[2 * n] = -potential.d_dt(q, t)? / (l * s * ls2)
                            - 2.0 * potential.value(q, t)? / (ls2 * s)
                            + es / (s * s);
                        out[2 * n + 1] = -1.0 / s;
                    }
                }
            }
            HamiltonianForm::ToricMoment { weight, base } => {
                if p[0] == 0.0 {
                    return Err(Error::Domain("log|p_1| undefined at p_1 = 0".into()));
                }
                base.grad_q(q, 0.0, &mut out[..n])?;
                out[n] = weight / p[0];
                out[n + 1..2 * n].iter_mut().for_each(|v| *v = 1.0);
            }
            HamiltonianForm::Translation => {
                out[..n].iter_mut().for_each(|v| *v = 0.0);
                out[n..2 * n].iter_mut().for_each(|v| *v = 1.0);
            }
        }
        Ok(())
    }

    /// Residual of the reduced second-order equation `q'' + 2 q' f'(q) = 0`
    /// satisfied by twisted trajectories, from a uniformly sampled `q(t)`
    /// with spacing `dt`. One value per interior sample.
    pub fn second_order_residual(&self, samples: &[f64], dt: f64) -> Result<Vec<f64>> {
        let potential = match &self.form {
            HamiltonianForm::Mechanical {
                potential,
                extension: Extension::None,
            } if self.n == 1 => potential,
            _ => {
                return Err(Error::InvalidArgument(
                    "second-order reduction needs a one-dimensional mechanical Hamiltonian".into(),
                ))
            }
        };
        if samples.len() < 3 {
            return Err(Error::SeriesTooShort(samples.len()));
        }
        if !(dt > 0.0) {
            return Err(Error::InvalidArgument("dt must be positive".into()));
        }
        let mut slope = [0.0];
        samples
            .windows(3)
            .map(|w| {
                let acc = (w[2] - 2.0 * w[1] + w[0]) / (dt * dt);
                let vel = (w[2] - w[0]) / (2.0 * dt);
                potential.grad_q(&w[1..2], 0.0, &mut slope)?;
                Ok(acc + 2.0 * vel * slope[0])
            })
            .collect()
    }
}

fn growth(friction: f64, t: f64) -> Result<f64> {
    let x = friction * t;
    if x > OVERFLOW_GUARD {
        return Err(Error::Overflow(x));
    }
    Ok(x.exp())
}
