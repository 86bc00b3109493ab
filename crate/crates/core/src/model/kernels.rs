use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative slack when checking that an age lies inside `[0, a_max]`.
const AGE_EPS: f64 = 1e-9;

/// Level below which the discounted kernel tail is considered negligible,
/// relative to the kernel's peak.
pub const TRUNCATION_TOL: f64 = 1e-12;

/// A nonnegative profile over infection age.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AgeFunction {
    Constant {
        value: f64,
    },
    /// `values[0]` on `[0, breaks[0])`, `values[i]` on `[breaks[i-1], breaks[i])`,
    /// and the last value from the last break onward.
    Piecewise {
        breaks: Vec<f64>,
        values: Vec<f64>,
    },
    /// `scale * exp(-rate * a)`.
    #[serde(rename = "exponential")]
    ExpDecay {
        scale: f64,
        rate: f64,
    },
}

impl AgeFunction {
    pub fn constant(value: f64) -> Self {
        AgeFunction::Constant { value }
    }

    pub fn piecewise(breaks: Vec<f64>, values: Vec<f64>) -> Self {
        AgeFunction::Piecewise { breaks, values }
    }

    pub fn validate(&self, name: &str) -> Result<()> {
        let bad = |what: &str| Error::config(format!("{name}: {what}"));
        match self {
            AgeFunction::Constant { value } => {
                if !value.is_finite() || *value < 0.0 {
                    return Err(bad("value must be finite and nonnegative"));
                }
            }
            AgeFunction::Piecewise { breaks, values } => {
                if values.len() != breaks.len() + 1 {
                    return Err(bad("piecewise profile needs exactly one more value than breaks"));
                }
                if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
                    return Err(bad("piecewise values must be finite and nonnegative"));
                }
                if breaks.iter().any(|b| !b.is_finite() || *b <= 0.0) {
                    return Err(bad("breaks must be finite and positive"));
                }
                if breaks.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(bad("breaks must be strictly increasing"));
                }
            }
            AgeFunction::ExpDecay { scale, rate } => {
                if !scale.is_finite() || *scale < 0.0 || !rate.is_finite() || *rate < 0.0 {
                    return Err(bad("exponential scale and rate must be finite and nonnegative"));
                }
            }
        }
        Ok(())
    }

    pub fn eval(&self, a: f64) -> f64 {
        match self {
            AgeFunction::Constant { value } => *value,
            AgeFunction::Piecewise { breaks, values } => {
                let idx = breaks.partition_point(|&b| b <= a);
                values[idx]
            }
            AgeFunction::ExpDecay { scale, rate } => scale * (-rate * a).exp(),
        }
    }

    /// Exact `∫₀^a` of the profile.
    pub fn integral_to(&self, a: f64) -> f64 {
        match self {
            AgeFunction::Constant { value } => value * a,
            AgeFunction::Piecewise { breaks, values } => {
                let mut acc = 0.0;
                let mut left = 0.0;
                for (i, &b) in breaks.iter().enumerate() {
                    if a <= b {
                        return acc + values[i] * (a - left);
                    }
                    acc += values[i] * (b - left);
                    left = b;
                }
                acc + values[values.len() - 1] * (a - left)
            }
            AgeFunction::ExpDecay { scale, rate } => {
                if *rate == 0.0 {
                    scale * a
                } else {
                    scale * (-(-rate * a).exp_m1()) / rate
                }
            }
        }
    }

    /// Supremum over `[0, a_max]`.
    pub fn sup_on(&self, a_max: f64) -> f64 {
        match self {
            AgeFunction::Constant { value } => *value,
            AgeFunction::Piecewise { breaks, values } => {
                let active = 1 + breaks.iter().filter(|&&b| b < a_max).count();
                values[..active].iter().cloned().fold(0.0, f64::max)
            }
            AgeFunction::ExpDecay { scale, .. } => *scale,
        }
    }

    pub fn inf_on(&self, a_max: f64) -> f64 {
        match self {
            AgeFunction::Constant { value } => *value,
            AgeFunction::Piecewise { breaks, values } => {
                let active = 1 + breaks.iter().filter(|&&b| b < a_max).count();
                values[..active].iter().cloned().fold(f64::INFINITY, f64::min)
            }
            AgeFunction::ExpDecay { scale, rate } => scale * (-rate * a_max).exp(),
        }
    }

    /// Points where the profile is discontinuous.
    pub fn breakpoints(&self) -> &[f64] {
        match self {
            AgeFunction::Piecewise { breaks, .. } => breaks,
            _ => &[],
        }
    }

    /// The same profile multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        match self {
            AgeFunction::Constant { value } => AgeFunction::Constant {
                value: value * factor,
            },
            AgeFunction::Piecewise { breaks, values } => AgeFunction::Piecewise {
                breaks: breaks.clone(),
                values: values.iter().map(|v| v * factor).collect(),
            },
            AgeFunction::ExpDecay { scale, rate } => AgeFunction::ExpDecay {
                scale: scale * factor,
                rate: *rate,
            },
        }
    }
}

/// Transmission and recovery profiles over infection age, truncated at `a_max`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgeKernels {
    pub beta: AgeFunction,
    pub gamma: AgeFunction,
    pub a_max: f64,
}

impl AgeKernels {
    pub fn new(beta: AgeFunction, gamma: AgeFunction, a_max: f64) -> Result<Self> {
        let kernels = AgeKernels { beta, gamma, a_max };
        kernels.validate()?;
        Ok(kernels)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.a_max.is_finite() || self.a_max <= 0.0 {
            return Err(Error::config("a_max must be finite and positive"));
        }
        self.beta.validate("beta")?;
        self.gamma.validate("gamma")?;
        Ok(())
    }

    fn check_age(&self, a: f64) -> Result<f64> {
        let slack = AGE_EPS * self.a_max;
        if !(a >= -slack && a <= self.a_max + slack) {
            return Err(Error::domain(format!(
                "age {a} outside [0, {}]",
                self.a_max
            )));
        }
        Ok(a.clamp(0.0, self.a_max))
    }

    /// Cumulative recovery hazard `∫₀^a γ`.
    pub fn recovery_hazard(&self, a: f64) -> f64 {
        self.gamma.integral_to(a)
    }

    /// Probability of remaining infectious up to age `a`.
    pub fn survival(&self, a: f64) -> Result<f64> {
        let a = self.check_age(a)?;
        Ok((-self.recovery_hazard(a)).exp())
    }

    /// `e^{-μ(a1-a0)} Γ(a1)/Γ(a0)`, evaluated without forming either survival value.
    pub fn decay_between(&self, a0: f64, a1: f64, mu: f64) -> f64 {
        (-(mu * (a1 - a0)) - (self.recovery_hazard(a1) - self.recovery_hazard(a0))).exp()
    }

    /// `β(a) e^{-μa} Γ(a)`, the discounted transmission kernel.
    pub fn discounted_kernel(&self, a: f64, mu: f64) -> f64 {
        self.beta.eval(a) * (-(mu * a) - self.recovery_hazard(a)).exp()
    }

    /// Union of both profiles' breakpoints strictly inside `(0, a_max)`, sorted.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut pts: Vec<f64> = self
            .beta
            .breakpoints()
            .iter()
            .chain(self.gamma.breakpoints())
            .copied()
            .filter(|&b| b > 0.0 && b < self.a_max)
            .collect();
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        pts
    }

    /// `sup β` over `[0, a_max]`; this is the norm used for `‖β‖` in the bounds.
    pub fn beta_sup(&self) -> f64 {
        self.beta.sup_on(self.a_max)
    }

    pub fn gamma_sup(&self) -> f64 {
        self.gamma.sup_on(self.a_max)
    }

    /// Ratio of the discounted kernel's bound at `a_max` to its sampled peak.
    pub fn truncation_ratio(&self, mu: f64) -> f64 {
        let peak = (0..=1000)
            .map(|i| self.discounted_kernel(self.a_max * i as f64 / 1000.0, mu))
            .fold(0.0, f64::max);
        if peak == 0.0 {
            return 0.0;
        }
        (-(mu * self.a_max)).exp() * (-self.recovery_hazard(self.a_max)).exp() * self.beta_sup()
            / peak
    }

    pub fn is_truncation_negligible(&self, mu: f64) -> bool {
        self.truncation_ratio(mu) <= TRUNCATION_TOL
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn survival_constant_rate() {
        let k = AgeKernels::new(AgeFunction::constant(1.0), AgeFunction::constant(0.1), 50.0).unwrap();
        assert!((k.survival(10.0).unwrap() - (-1.0f64).exp()).abs() < 1e-15);
        assert_eq!(k.survival(0.0).unwrap(), 1.0);
    }

    #[test]
    fn survival_piecewise_is_exact() {
        let k = AgeKernels::new(
            AgeFunction::constant(1.0),
            AgeFunction::piecewise(vec![5.0], vec![0.1, 0.2]),
            50.0,
        )
        .unwrap();
        let expected = (-(0.5f64 + 1.0)).exp();
        assert!((k.survival(10.0).unwrap() - expected).abs() < 1e-15);
        assert!((expected - 0.2231302).abs() < 1e-7);
    }

    #[test]
    fn survival_rejects_out_of_range() {
        let k = AgeKernels::new(AgeFunction::constant(1.0), AgeFunction::constant(0.1), 50.0).unwrap();
        assert!(matches!(k.survival(-1.0), Err(Error::Domain(_))));
        assert!(matches!(k.survival(50.1), Err(Error::Domain(_))));
        assert!(k.survival(50.0).is_ok());
    }

    #[test]
    fn piecewise_validation() {
        let bad = AgeFunction::piecewise(vec![5.0, 3.0], vec![0.1, 0.2, 0.3]);
        assert!(bad.validate("gamma").is_err());
        let bad = AgeFunction::piecewise(vec![5.0], vec![0.1]);
        assert!(bad.validate("gamma").is_err());
        let bad = AgeFunction::constant(-1.0);
        assert!(bad.validate("beta").is_err());
    }

    #[test]
    fn exponential_integral_matches_closed_form() {
        let f = AgeFunction::ExpDecay { scale: 2.0, rate: 0.5 };
        let exact = 2.0 * (1.0 - (-0.5f64 * 3.0).exp()) / 0.5;
        assert!((f.integral_to(3.0) - exact).abs() < 1e-14);
        let flat = AgeFunction::ExpDecay { scale: 2.0, rate: 0.0 };
        assert_eq!(flat.integral_to(3.0), 6.0);
    }

    #[test]
    fn baseline_truncation_is_not_negligible() {
        let k = AgeKernels::new(AgeFunction::constant(1.0), AgeFunction::constant(0.1), 50.0).unwrap();
        let ratio = k.truncation_ratio(0.02);
        assert!((ratio - (-6.0f64).exp()).abs() < 1e-12);
        assert!(!k.is_truncation_negligible(0.02));
    }
}
