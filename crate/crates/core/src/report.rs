//! The verification battery: simulate a scenario, run every applicable
//! diagnostic, and issue one verdict per theorem.

use serde::Serialize;

use crate::analysis::{solve_endemic, EquilibriumReport};
use crate::error::Result;
use crate::lyapunov::{
    calibrate_descent_slack, check_bounds, check_monotone_descent, check_persistence, BoundsReport, DescentReport,
    DfeFunctional, EndemicFunctional, Functional, PersistenceReport,
};
use crate::model::{check_hypotheses, HypothesisReport, ModelParams, SampleBox};
use crate::scenario::Scenario;
use crate::simulator::{InitialData, SimOptions, Simulator, Trajectory};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    /// The theorem's regime does not apply to this scenario.
    Skipped,
    /// The check ran but `f` does not satisfy the theorem's hypotheses.
    NotCovered,
}

impl Verdict {
    fn from_pass(passed: bool) -> Self {
        if passed {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TheoremVerdict {
    pub theorem: &'static str,
    pub verdict: Verdict,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
}

pub const EVENTUAL_BOUNDS: &str = "eventual_bounds";
pub const DFE_STABILITY: &str = "dfe_global_stability";
pub const PERSISTENCE: &str = "uniform_persistence";
pub const ENDEMIC_STABILITY: &str = "endemic_global_stability";

#[derive(Debug, Clone, Serialize)]
pub struct VerificationReport {
    pub scenario: Scenario,
    #[serde(rename = "R0")]
    pub r0: f64,
    pub equilibrium: EquilibriumReport,
    pub hypotheses: HypothesisReport,
    pub bounds: BoundsReport,
    pub descent: Option<DescentReport>,
    pub persistence: Option<PersistenceReport>,
    pub verdicts: Vec<TheoremVerdict>,
    /// No applicable verdict failed.
    pub passed: bool,
}

impl VerificationReport {
    pub fn verdict(&self, theorem: &str) -> Option<Verdict> {
        self.verdicts.iter().find(|v| v.theorem == theorem).map(|v| v.verdict)
    }
}

pub struct Verification {
    pub report: VerificationReport,
    pub trajectory: Trajectory,
}

fn push(verdicts: &mut Vec<TheoremVerdict>, theorem: &'static str, verdict: Verdict, reason: Option<String>) {
    verdicts.push(TheoremVerdict {
        theorem,
        verdict,
        reason,
    });
}

fn gated(covered: bool, passed: bool, failures: &[&str]) -> (Verdict, Option<String>) {
    if covered {
        (Verdict::from_pass(passed), None)
    } else {
        (
            Verdict::NotCovered,
            Some(format!("not covered by theorem: hypotheses not satisfied ({})", failures.join(", "))),
        )
    }
}

/// Records a descent verdict. Outside the theorem's hypotheses a functional
/// that cannot be evaluated is reported, not raised.
fn record_descent(
    verdicts: &mut Vec<TheoremVerdict>,
    theorem: &'static str,
    covered: bool,
    outcome: Result<DescentReport>,
    failures: &[&str],
) -> Result<Option<DescentReport>> {
    match outcome {
        Ok(rep) => {
            let (v, why) = gated(covered, rep.passed, failures);
            push(verdicts, theorem, v, why);
            Ok(Some(rep))
        }
        Err(e) if !covered && !e.is_numeric() => {
            let (v, why) = gated(false, false, failures);
            push(verdicts, theorem, v, why.map(|w| format!("{w}; functional not evaluable: {e}")));
            Ok(None)
        }
        Err(e) => Err(e),
    }
}

/// Descent check with `C_d` calibrated on a `dt`, `dt/2` refinement pair of
/// the same scenario.
fn calibrated_descent(
    sim: &Simulator,
    init: &InitialData,
    coarse: &Trajectory,
    make: &dyn Fn(&ModelParams, &crate::discretize::Grid) -> Result<Functional>,
) -> Result<DescentReport> {
    let fine_grid = sim.grid.refined()?;
    let fine_sim = Simulator::new(sim.params.clone(), fine_grid);
    let fine = fine_sim.simulate(&init.refined(&sim.grid)?, &SimOptions::every(1))?;
    let f_coarse = make(&sim.params, &sim.grid)?;
    let f_fine = make(&sim.params, &fine_grid)?;
    let c_d = calibrate_descent_slack(coarse, &fine, &f_coarse, &f_fine)?;
    log::info!("descent slack C_d = {c_d:.3e}");
    check_monotone_descent(coarse, &f_coarse, c_d)
}

/// Runs the full battery on a scenario.
pub fn verify(scenario: &Scenario) -> Result<Verification> {
    let params = scenario.params()?;
    let grid = scenario.grid()?;
    let init = scenario.initial_data(&grid)?;
    let equilibrium = solve_endemic(&params, &grid)?;
    let r0 = equilibrium.r0;
    let hypotheses = check_hypotheses(
        &params.incidence,
        SampleBox {
            s_max: params.n_bar(),
            j_max: params.force_bound(),
        },
        equilibrium.endemic.map(|e| (e.s, e.j)),
        scenario.seed,
    );
    let failures = hypotheses.failures();
    log::info!("R0 = {r0:.6}; hypothesis failures: {failures:?}");

    let sim = Simulator::new(params.clone(), grid);
    let opts = SimOptions {
        sample_every: scenario.outputs.sample_every,
        snapshot_times: scenario.outputs.snapshot_times.clone(),
    };
    let trajectory = sim.simulate(&init, &opts)?;
    let mut verdicts = Vec::new();

    let bounds = check_bounds(&trajectory, &params)?;
    if bounds.horizon_ok {
        let (v, why) = gated(hypotheses.admissible(), bounds.passed, &failures);
        push(&mut verdicts, EVENTUAL_BOUNDS, v, why);
    } else {
        let why = format!("t_end is shorter than the bounds burn-in {:.4}", bounds.burn_in);
        push(&mut verdicts, EVENTUAL_BOUNDS, Verdict::Skipped, Some(why));
    }

    let seeded = trajectory.seeded || trajectory.prehistory.iter().any(|e| *e > 0.0);
    let mut descent = None;
    let mut persistence = None;
    if r0 <= 1.0 {
        let outcome = calibrated_descent(&sim, &init, &trajectory, &|p, g| {
            Ok(Functional::DiseaseFree(DfeFunctional::new(p, g)?))
        });
        descent = record_descent(&mut verdicts, DFE_STABILITY, hypotheses.covers_dfe_theorem(), outcome, &failures)?;
        let skip = Some("R0 ≤ 1: endemic checks skipped".to_string());
        push(&mut verdicts, PERSISTENCE, Verdict::Skipped, skip.clone());
        push(&mut verdicts, ENDEMIC_STABILITY, Verdict::Skipped, skip);
    } else {
        push(
            &mut verdicts,
            DFE_STABILITY,
            Verdict::Skipped,
            Some("R0 > 1: disease-free stability does not apply".into()),
        );
        if !seeded {
            let skip = Some("initial data lie in the disease-free subspace".to_string());
            push(&mut verdicts, PERSISTENCE, Verdict::Skipped, skip.clone());
            push(&mut verdicts, ENDEMIC_STABILITY, Verdict::Skipped, skip);
        } else {
            let rep = check_persistence(&trajectory, &params, r0)?;
            let (v, why) = gated(hypotheses.admissible(), rep.passed, &failures);
            push(&mut verdicts, PERSISTENCE, v, why);
            persistence = Some(rep);
            match equilibrium.endemic {
                Some(point) => {
                    let outcome = calibrated_descent(&sim, &init, &trajectory, &|p, g| {
                        Ok(Functional::Endemic(EndemicFunctional::new(p, g, &point)?))
                    });
                    let covered = hypotheses.covers_endemic_theorems();
                    descent = record_descent(&mut verdicts, ENDEMIC_STABILITY, covered, outcome, &failures)?;
                }
                None => push(
                    &mut verdicts,
                    ENDEMIC_STABILITY,
                    Verdict::Fail,
                    Some("R0 > 1 but no endemic equilibrium was found".into()),
                ),
            }
        }
    }

    let passed = verdicts.iter().all(|v| v.verdict != Verdict::Fail);
    Ok(Verification {
        report: VerificationReport {
            scenario: scenario.clone(),
            r0,
            equilibrium,
            hypotheses,
            bounds,
            descent,
            persistence,
            verdicts,
            passed,
        },
        trajectory,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scenario(k: f64, family: &str, t_end: f64) -> Scenario {
        let text = format!(
            r#"{{
            "A": 20, "mu": 0.02, "alpha": 0.2,
            "incidence": {family},
            "beta": {{"kind": "constant", "value": 1.0}},
            "gamma": {{"kind": "constant", "value": 0.1}},
            "a_max": 50, "da": 0.5, "t_end": {t_end},
            "init": {{"S0": 800, "phi": {{"kind": "constant", "value": 0.05}}}},
            "outputs": {{"sample_every": 2}}
        }}"#,
            family = family.replace("K", &k.to_string())
        );
        Scenario::from_json(&text).unwrap()
    }

    #[test]
    fn subthreshold_verdicts() {
        let v = verify(&scenario(0.0001, r#"{"family": "mass_action", "k": K}"#, 600.0)).unwrap();
        let r = &v.report;
        assert!(r.r0 < 1.0);
        assert_eq!(r.verdict(DFE_STABILITY), Some(Verdict::Pass));
        assert_eq!(r.verdict(PERSISTENCE), Some(Verdict::Skipped));
        assert_eq!(r.verdict(ENDEMIC_STABILITY), Some(Verdict::Skipped));
        assert!(r.passed);
    }

    #[test]
    fn endemic_verdicts() {
        let v = verify(&scenario(0.001, r#"{"family": "mass_action", "k": K}"#, 400.0)).unwrap();
        let r = &v.report;
        assert_eq!(r.verdict(DFE_STABILITY), Some(Verdict::Skipped));
        assert_eq!(r.verdict(PERSISTENCE), Some(Verdict::Pass));
        assert_eq!(r.verdict(ENDEMIC_STABILITY), Some(Verdict::Pass));
        assert_eq!(r.verdict(EVENTUAL_BOUNDS), Some(Verdict::Pass));
        assert!(r.passed);
    }

    #[test]
    fn invalid_incidence_is_not_covered() {
        let v = verify(&scenario(1e-7, r#"{"family": "custom_power", "k": K, "p": 2}"#, 200.0)).unwrap();
        let r = &v.report;
        assert!(!r.hypotheses.admissible() || !r.hypotheses.covers_dfe_theorem());
        for v in &r.verdicts {
            assert!(matches!(v.verdict, Verdict::NotCovered | Verdict::Skipped), "{v:?}");
        }
        assert!(r.passed);
    }
}
