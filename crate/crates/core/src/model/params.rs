use crate::error::{Error, Result};

use super::{AgeKernels, IncidenceFunction};

/// One scenario's demographic and epidemiological parameters.
#[derive(Debug, Clone)]
pub struct ModelParams {
    /// Recruitment into the susceptible class.
    pub recruitment: f64,
    /// Natural mortality rate.
    pub mu: f64,
    /// Exposed-to-infectious progression rate.
    pub alpha: f64,
    pub kernels: AgeKernels,
    pub incidence: IncidenceFunction,
}

impl ModelParams {
    pub fn new(
        recruitment: f64,
        mu: f64,
        alpha: f64,
        kernels: AgeKernels,
        incidence: IncidenceFunction,
    ) -> Result<Self> {
        let p = ModelParams {
            recruitment,
            mu,
            alpha,
            kernels,
            incidence,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("A", self.recruitment), ("mu", self.mu), ("alpha", self.alpha)] {
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::config(format!("{name} must be finite and positive, got {v}")));
            }
        }
        if !self.n_bar().is_finite() {
            return Err(Error::config("A/mu is not finite"));
        }
        self.kernels.validate()?;
        self.incidence.validate()
    }

    /// Limiting total population `A/μ`.
    pub fn n_bar(&self) -> f64 {
        self.recruitment / self.mu
    }

    /// A copy with the incidence multiplied by `factor`.
    pub fn with_incidence_scale(&self, factor: f64) -> Self {
        ModelParams {
            incidence: self.incidence.scaled(factor),
            ..self.clone()
        }
    }

    /// Upper bound on the force of infection on the attractor, `α N̄ ‖β‖ / μ`.
    pub fn force_bound(&self) -> f64 {
        self.alpha * self.n_bar() * self.kernels.beta_sup() / self.mu
    }

    /// Side of the box on which the Lipschitz constant is estimated.
    pub fn lipschitz_box(&self) -> f64 {
        self.n_bar().max(self.force_bound())
    }

    /// Lipschitz constant `L` of the incidence on the attractor's box.
    pub fn lipschitz(&self) -> f64 {
        self.incidence.estimate_lipschitz(self.lipschitz_box())
    }

    /// Eventual lower bound `A/(μ + L)` on the susceptible density.
    pub fn susceptible_floor(&self) -> f64 {
        self.recruitment / (self.mu + self.lipschitz())
    }
}
