use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Points per axis (minus one) for sampled certification of custom incidences.
pub const SAMPLE_GRID: usize = 256;

/// Safety factor applied to sampled Lipschitz estimates.
pub const LIPSCHITZ_SAFETY: f64 = 1.1;

/// Initial step and depth of the Richardson table for `∂f/∂J(S, 0)`.
const RICHARDSON_H0: f64 = 1e-2;
const RICHARDSON_LEVELS: usize = 6;

pub type Evaluator = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// A Lipschitz constant valid on the box `[0, box_bound]²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LipschitzBound {
    pub box_bound: f64,
    pub constant: f64,
}

/// A user-supplied incidence with declared structural properties.
#[derive(Clone)]
pub struct CustomIncidence {
    pub name: String,
    pub evaluator: Evaluator,
    pub declared_concave_in_j: bool,
    pub lipschitz: Option<LipschitzBound>,
}

impl fmt::Debug for CustomIncidence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomIncidence")
            .field("name", &self.name)
            .field("declared_concave_in_j", &self.declared_concave_in_j)
            .field("lipschitz", &self.lipschitz)
            .finish()
    }
}

/// Incidence rate `f(S, J)`: new infections per unit time given susceptible
/// density `S` and force of infection `J`.
#[derive(Debug, Clone)]
pub enum IncidenceFunction {
    /// `k S J`
    MassAction { k: f64 },
    /// `k S J / (1 + ω J)`
    Saturated { k: f64, omega: f64 },
    /// `k S J / (1 + c S)`
    HollingS { k: f64, c: f64 },
    Custom(CustomIncidence),
}

impl IncidenceFunction {
    pub fn mass_action(k: f64) -> Self {
        IncidenceFunction::MassAction { k }
    }

    pub fn saturated(k: f64, omega: f64) -> Self {
        IncidenceFunction::Saturated { k, omega }
    }

    pub fn holling_s(k: f64, c: f64) -> Self {
        IncidenceFunction::HollingS { k, c }
    }

    pub fn custom(
        name: impl Into<String>,
        declared_concave_in_j: bool,
        evaluator: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        IncidenceFunction::Custom(CustomIncidence {
            name: name.into(),
            evaluator: Arc::new(evaluator),
            declared_concave_in_j,
            lipschitz: None,
        })
    }

    pub fn family_name(&self) -> &str {
        match self {
            IncidenceFunction::MassAction { .. } => "mass_action",
            IncidenceFunction::Saturated { .. } => "saturated",
            IncidenceFunction::HollingS { .. } => "holling_s",
            IncidenceFunction::Custom(c) => &c.name,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |x: f64| x.is_finite() && x >= 0.0;
        let valid = match self {
            IncidenceFunction::MassAction { k } => ok(*k),
            IncidenceFunction::Saturated { k, omega } => ok(*k) && ok(*omega),
            IncidenceFunction::HollingS { k, c } => ok(*k) && ok(*c),
            IncidenceFunction::Custom(_) => true,
        };
        if valid {
            Ok(())
        } else {
            Err(Error::config(format!(
                "incidence {}: shape parameters must be finite and nonnegative",
                self.family_name()
            )))
        }
    }

    pub fn is_declared_concave_in_j(&self) -> bool {
        match self {
            IncidenceFunction::Custom(c) => c.declared_concave_in_j,
            _ => true,
        }
    }

    pub fn is_custom(&self) -> bool {
        matches!(self, IncidenceFunction::Custom(_))
    }

    /// The incidence multiplied by `factor` (the `k` parameter for built-ins).
    pub fn scaled(&self, factor: f64) -> Self {
        match self {
            IncidenceFunction::MassAction { k } => IncidenceFunction::MassAction { k: k * factor },
            IncidenceFunction::Saturated { k, omega } => IncidenceFunction::Saturated {
                k: k * factor,
                omega: *omega,
            },
            IncidenceFunction::HollingS { k, c } => IncidenceFunction::HollingS {
                k: k * factor,
                c: *c,
            },
            IncidenceFunction::Custom(c) => {
                let inner = Arc::clone(&c.evaluator);
                IncidenceFunction::Custom(CustomIncidence {
                    name: c.name.clone(),
                    evaluator: Arc::new(move |s, j| factor * inner(s, j)),
                    declared_concave_in_j: c.declared_concave_in_j,
                    lipschitz: c.lipschitz.map(|b| LipschitzBound {
                        box_bound: b.box_bound,
                        constant: b.constant * factor,
                    }),
                })
            }
        }
    }

    /// Evaluate without domain checks. Built-ins are exact on the nonnegative quadrant.
    pub(crate) fn raw(&self, s: f64, j: f64) -> f64 {
        match self {
            IncidenceFunction::MassAction { k } => k * s * j,
            IncidenceFunction::Saturated { k, omega } => k * s * j / (1.0 + omega * j),
            IncidenceFunction::HollingS { k, c } => k * s * j / (1.0 + c * s),
            IncidenceFunction::Custom(c) => (c.evaluator)(s, j),
        }
    }

    pub fn eval(&self, s: f64, j: f64) -> Result<f64> {
        if !(s >= 0.0) || !(j >= 0.0) {
            return Err(Error::domain(format!(
                "incidence needs S >= 0 and J >= 0, got S = {s}, J = {j}"
            )));
        }
        let v = self.raw(s, j);
        if !v.is_finite() {
            return Err(Error::Evaluation {
                t: f64::NAN,
                msg: format!("incidence {} returned {v} at S = {s}, J = {j}", self.family_name()),
            });
        }
        Ok(v)
    }

    /// `∂f/∂J(S, 0)`: analytic for built-ins, Richardson-extrapolated otherwise.
    pub fn dfdj_at_zero(&self, s: f64) -> Result<f64> {
        if !(s >= 0.0) {
            return Err(Error::domain(format!("dfdJ needs S >= 0, got {s}")));
        }
        match self {
            IncidenceFunction::MassAction { k } | IncidenceFunction::Saturated { k, .. } => Ok(k * s),
            IncidenceFunction::HollingS { k, c } => Ok(k * s / (1.0 + c * s)),
            IncidenceFunction::Custom(_) => self.dfdj_at_zero_numeric(s),
        }
    }

    /// Finite-difference `∂f/∂J(S, 0)` for any family.
    ///
    /// `J` cannot go negative, so the difference is one-sided: with
    /// `f(S, 0) = 0` the quotient `f(S, h)/h` has an expansion in powers of
    /// `h`, and a Richardson table over halving steps removes them.
    pub fn dfdj_at_zero_numeric(&self, s: f64) -> Result<f64> {
        if !(s >= 0.0) {
            return Err(Error::domain(format!("dfdJ needs S >= 0, got {s}")));
        }
        let f0 = self.eval(s, 0.0)?;
        let mut table = [[0.0; RICHARDSON_LEVELS]; RICHARDSON_LEVELS];
        let mut h = RICHARDSON_H0;
        for i in 0..RICHARDSON_LEVELS {
            table[i][0] = (self.eval(s, h)? - f0) / h;
            let mut pow = 1.0;
            for m in 1..=i {
                pow *= 2.0;
                table[i][m] = table[i][m - 1] + (table[i][m - 1] - table[i - 1][m - 1]) / (pow - 1.0);
            }
            h *= 0.5;
        }
        let d = table[RICHARDSON_LEVELS - 1][RICHARDSON_LEVELS - 1];
        if !d.is_finite() {
            return Err(Error::Evaluation {
                t: f64::NAN,
                msg: format!("dfdJ of {} is not finite at S = {s}", self.family_name()),
            });
        }
        Ok(d)
    }

    /// A constant `L` with `|f(S₂,J₂) − f(S₁,J₁)| ≤ L(|S₂−S₁| + |J₂−J₁|)` on `[0, c]²`.
    pub fn estimate_lipschitz(&self, c: f64) -> f64 {
        if !(c > 0.0) {
            return 0.0;
        }
        match self {
            // sup|∂f/∂S| and sup|∂f/∂J| are both at most k·c for every built-in family.
            IncidenceFunction::MassAction { k }
            | IncidenceFunction::Saturated { k, .. }
            | IncidenceFunction::HollingS { k, .. } => k * c,
            IncidenceFunction::Custom(custom) => {
                if let Some(b) = custom.lipschitz {
                    if c <= b.box_bound {
                        return b.constant;
                    }
                }
                LIPSCHITZ_SAFETY * self.sampled_gradient_sup(c)
            }
        }
    }

    /// Largest axis-aligned difference quotient over a uniform grid on `[0, c]²`.
    fn sampled_gradient_sup(&self, c: f64) -> f64 {
        let n = SAMPLE_GRID;
        let h = c / n as f64;
        let values: Vec<f64> = (0..=n)
            .flat_map(|i| (0..=n).map(move |j| (i, j)))
            .map(|(i, j)| self.raw(i as f64 * h, j as f64 * h))
            .collect();
        let at = |i: usize, j: usize| values[i * (n + 1) + j];
        let mut sup = 0.0f64;
        for i in 0..=n {
            for j in 0..=n {
                if i < n {
                    sup = sup.max((at(i + 1, j) - at(i, j)).abs() / h);
                }
                if j < n {
                    sup = sup.max((at(i, j + 1) - at(i, j)).abs() / h);
                }
            }
        }
        sup
    }

    /// For families whose `S`-dependence at fixed `J` is `∝ S/(1 + cS)`,
    /// returns `c`. Lyapunov integrals over `S` then have closed forms.
    pub fn s_shape(&self) -> Option<f64> {
        match self {
            IncidenceFunction::MassAction { .. } | IncidenceFunction::Saturated { .. } => Some(0.0),
            IncidenceFunction::HollingS { c, .. } => Some(*c),
            IncidenceFunction::Custom(_) => None,
        }
    }
}
