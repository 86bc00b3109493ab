//! JSON scenario files.
//!
//! ```json
//! {
//!   "A": 20, "mu": 0.02, "alpha": 0.2,
//!   "incidence": {"family": "mass_action", "k": 0.001},
//!   "beta": {"kind": "constant", "value": 1.0},
//!   "gamma": {"kind": "constant", "value": 0.1},
//!   "a_max": 50, "da": 0.1, "t_end": 600,
//!   "init": {"S0": 500, "i0": {"kind": "exponential", "scale": 1.0, "rate": 0.1}},
//!   "outputs": {"sample_every": 10, "snapshot_times": [100], "chart": true},
//!   "seed": 7
//! }
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::discretize::{make_grid, AgeProfile, Grid};
use crate::error::{Error, Result};
use crate::model::{AgeFunction, AgeKernels, IncidenceFunction, ModelParams};
use crate::simulator::InitialData;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum IncidenceSpec {
    /// `k S J`
    MassAction { k: f64 },
    /// `k S J / (1 + ω J)`
    Saturated { k: f64, omega: f64 },
    /// `k S J / (1 + c S)`
    HollingS { k: f64, c: f64 },
    /// `k S J^p`; concave in `J` only for `p ≤ 1`.
    CustomPower { k: f64, p: f64 },
}

impl IncidenceSpec {
    pub fn build(&self) -> IncidenceFunction {
        match *self {
            IncidenceSpec::MassAction { k } => IncidenceFunction::mass_action(k),
            IncidenceSpec::Saturated { k, omega } => IncidenceFunction::saturated(k, omega),
            IncidenceSpec::HollingS { k, c } => IncidenceFunction::holling_s(k, c),
            IncidenceSpec::CustomPower { k, p } => {
                IncidenceFunction::custom("custom_power", p <= 1.0, move |s, j| k * s * j.powf(p))
            }
        }
    }

    /// The coefficient `k` scanned by sweeps.
    pub fn k(&self) -> f64 {
        match *self {
            IncidenceSpec::MassAction { k }
            | IncidenceSpec::Saturated { k, .. }
            | IncidenceSpec::HollingS { k, .. }
            | IncidenceSpec::CustomPower { k, .. } => k,
        }
    }
}

/// An age-indexed input: explicit node values, a parametric profile, or a
/// single seeded node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ProfileSpec {
    Values(Vec<f64>),
    Point { age: f64, value: f64 },
    Function(AgeFunction),
}

impl ProfileSpec {
    fn on_grid(&self, name: &str, grid: &Grid) -> Result<Vec<f64>> {
        match self {
            ProfileSpec::Values(v) => {
                if v.len() != grid.n_age + 1 {
                    return Err(Error::config(format!(
                        "init.{name}: {} values given, the age grid has {} nodes",
                        v.len(),
                        grid.n_age + 1
                    )));
                }
                Ok(v.clone())
            }
            ProfileSpec::Point { age, value } => {
                let j = (age / grid.da).round();
                if !(0.0..=grid.n_age as f64).contains(&j) || ((j * grid.da) - age).abs() > 1e-9 * grid.a_max {
                    return Err(Error::config(format!("init.{name}: age {age} is not a grid node")));
                }
                let mut v = vec![0.0; grid.n_age + 1];
                v[j as usize] = *value;
                Ok(v)
            }
            ProfileSpec::Function(f) => {
                f.validate(&format!("init.{name}"))?;
                Ok(grid.ages().map(|a| f.eval(a)).collect())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitSpec {
    #[serde(rename = "S0")]
    pub s0: f64,
    #[serde(rename = "E0", default, skip_serializing_if = "Option::is_none")]
    pub e0: Option<f64>,
    /// Infectious density `i(0, a)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub i0: Option<ProfileSpec>,
    /// Exposed history, indexed by lag: `phi(a) = E(−a)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi: Option<ProfileSpec>,
}

fn default_sample_every() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default = "default_sample_every")]
    pub sample_every: usize,
    #[serde(default)]
    pub snapshot_times: Vec<f64>,
    #[serde(default)]
    pub chart: bool,
}

impl Default for OutputSpec {
    fn default() -> Self {
        OutputSpec {
            sample_every: default_sample_every(),
            snapshot_times: Vec::new(),
            chart: false,
        }
    }
}

/// Sweep of the incidence coefficient over `[lo, hi]` in `n` points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub param: String,
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

impl SweepSpec {
    /// Parses `k=lo:hi:n`.
    pub fn parse(text: &str) -> Result<Self> {
        let bad = || Error::config(format!("sweep '{text}' is not of the form k=lo:hi:n"));
        let (param, range) = text.split_once('=').ok_or_else(bad)?;
        let parts: Vec<&str> = range.split(':').collect();
        if parts.len() != 3 {
            return Err(bad());
        }
        let lo = parts[0].trim().parse::<f64>().map_err(|_| bad())?;
        let hi = parts[1].trim().parse::<f64>().map_err(|_| bad())?;
        let n = parts[2].trim().parse::<usize>().map_err(|_| bad())?;
        let spec = SweepSpec {
            param: param.trim().to_string(),
            lo,
            hi,
            n,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.param != "k" {
            return Err(Error::config(format!("sweep parameter '{}' is not supported; only 'k'", self.param)));
        }
        if !(self.lo >= 0.0 && self.hi > self.lo && self.hi.is_finite()) || self.n < 2 {
            return Err(Error::config(format!(
                "sweep range {}:{}:{} must satisfy 0 ≤ lo < hi and n ≥ 2",
                self.lo, self.hi, self.n
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(rename = "A")]
    pub recruitment: f64,
    pub mu: f64,
    pub alpha: f64,
    pub incidence: IncidenceSpec,
    pub beta: AgeFunction,
    pub gamma: AgeFunction,
    pub a_max: f64,
    pub da: f64,
    pub t_end: f64,
    pub init: InitSpec,
    #[serde(default)]
    pub outputs: OutputSpec,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSpec>,
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self> {
        let sc: Scenario = serde_json::from_str(text).map_err(|e| Error::config(format!("scenario: {e}")))?;
        sc.validate()?;
        Ok(sc)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    /// Checks that every part resolves into valid module inputs.
    pub fn validate(&self) -> Result<()> {
        self.params()?;
        let grid = self.grid()?;
        if self.outputs.sample_every == 0 {
            return Err(Error::config("outputs.sample_every must be at least 1"));
        }
        for &t in &self.outputs.snapshot_times {
            if !(0.0..=self.t_end).contains(&t) {
                return Err(Error::config(format!("outputs.snapshot_times: {t} lies outside [0, t_end]")));
            }
        }
        if let Some(sw) = &self.sweep {
            sw.validate()?;
        }
        self.initial_data(&grid).map(|_| ())
    }

    pub fn params(&self) -> Result<ModelParams> {
        let kernels = AgeKernels::new(self.beta.clone(), self.gamma.clone(), self.a_max)?;
        ModelParams::new(self.recruitment, self.mu, self.alpha, kernels, self.incidence.build())
    }

    pub fn grid(&self) -> Result<Grid> {
        make_grid(self.a_max, self.da, self.t_end)
    }

    pub fn initial_data(&self, grid: &Grid) -> Result<InitialData> {
        let init = &self.init;
        match (&init.i0, &init.phi) {
            (Some(_), Some(_)) => Err(Error::config("init: give exactly one of 'i0' and 'phi', not both")),
            (None, None) => Err(Error::config("init: one of 'i0' or 'phi' is required")),
            (Some(i0), None) => Ok(InitialData::from_profile(
                init.s0,
                init.e0,
                AgeProfile {
                    values: i0.on_grid("i0", grid)?,
                },
            )),
            (None, Some(phi)) => {
                let mut data = InitialData::from_history(init.s0, phi.on_grid("phi", grid)?);
                data.e0 = init.e0;
                Ok(data)
            }
        }
    }

    /// Incidence scales covering the sweep's `k` range.
    pub fn sweep_scales(&self, sweep: &SweepSpec) -> Result<Vec<f64>> {
        sweep.validate()?;
        let k = self.incidence.k();
        if !(k > 0.0) {
            return Err(Error::config("sweeps need a positive base k"));
        }
        Ok(crate::analysis::linspace(sweep.lo / k, sweep.hi / k, sweep.n))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASELINE: &str = r#"{
        "A": 20, "mu": 0.02, "alpha": 0.2,
        "incidence": {"family": "mass_action", "k": 0.001},
        "beta": {"kind": "constant", "value": 1.0},
        "gamma": {"kind": "constant", "value": 0.1},
        "a_max": 50, "da": 0.1, "t_end": 600,
        "init": {"S0": 500, "i0": {"kind": "exponential", "scale": 1.0, "rate": 0.1}}
    }"#;

    #[test]
    fn parses_baseline() {
        let sc = Scenario::from_json(BASELINE).unwrap();
        assert_eq!(sc.outputs.sample_every, 1);
        let g = sc.grid().unwrap();
        assert_eq!(g.n_age, 500);
        let init = sc.initial_data(&g).unwrap();
        assert_eq!(init.s0, 500.0);
        assert!((sc.params().unwrap().n_bar() - 1000.0).abs() < 1e-12);
    }

    #[test]
    fn missing_key_is_named() {
        let text = BASELINE.replace("\"mu\": 0.02,", "");
        let err = Scenario::from_json(&text).unwrap_err().to_string();
        assert!(err.contains("missing field `mu`"), "{err}");
    }

    #[test]
    fn unknown_key_is_rejected() {
        let text = BASELINE.replace("\"mu\"", "\"mu\": 0.02, \"mew\"");
        assert!(Scenario::from_json(&text).is_err());
    }

    #[test]
    fn misaligned_grid_is_rejected() {
        let text = BASELINE.replace("\"da\": 0.1", "\"da\": 0.3");
        assert!(matches!(Scenario::from_json(&text), Err(Error::Config(_))));
    }

    #[test]
    fn both_initial_forms_rejected() {
        let text = BASELINE.replace("\"S0\": 500,", "\"S0\": 500, \"phi\": {\"kind\": \"constant\", \"value\": 1},");
        let err = Scenario::from_json(&text).unwrap_err().to_string();
        assert!(err.contains("exactly one"), "{err}");
    }

    #[test]
    fn point_seed_and_custom_family() {
        let text = BASELINE
            .replace(r#"{"kind": "exponential", "scale": 1.0, "rate": 0.1}"#, r#"{"age": 10.0, "value": 1e-8}"#)
            .replace(r#"{"family": "mass_action", "k": 0.001}"#, r#"{"family": "custom_power", "k": 1e-7, "p": 2}"#);
        let sc = Scenario::from_json(&text).unwrap();
        let g = sc.grid().unwrap();
        let init = sc.initial_data(&g).unwrap();
        match init.source {
            crate::simulator::InitialSource::Profile(p) => {
                assert_eq!(p.values[100], 1e-8);
                assert_eq!(p.values.iter().filter(|v| **v > 0.0).count(), 1);
            }
            _ => panic!("expected a profile"),
        }
        let f = sc.params().unwrap().incidence;
        assert!(f.is_custom() && !f.is_declared_concave_in_j());
        assert!((f.eval(10.0, 3.0).unwrap() - 9e-6).abs() < 1e-18);
    }

    #[test]
    fn sweep_parsing() {
        let sw = SweepSpec::parse("k=0.0001:0.002:50").unwrap();
        assert_eq!((sw.lo, sw.hi, sw.n), (0.0001, 0.002, 50));
        assert!(SweepSpec::parse("k=1:2").is_err());
        assert!(SweepSpec::parse("mu=1:2:3").is_err());
        let sc = Scenario::from_json(BASELINE).unwrap();
        let scales = sc.sweep_scales(&sw).unwrap();
        assert!((scales[0] - 0.1).abs() < 1e-12 && (scales[49] - 2.0).abs() < 1e-12);
    }
}
