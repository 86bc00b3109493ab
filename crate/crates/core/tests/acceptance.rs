//! Acceptance criteria AC-1 … AC-8 on the baseline scenario
//! (A = 20, μ = 0.02, α = 0.2, β ≡ 1, γ ≡ 0.1, a_max = 50, da = dt = 0.1,
//! t_end = 600, mass action). Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sei_core::analysis::{compute_r0, linspace, solve_endemic, threshold_scan};
use sei_core::discretize::{make_grid, AgeProfile, Grid};
use sei_core::lyapunov::{
    calibrate_descent_slack, check_monotone_descent, check_persistence, DfeFunctional, EndemicFunctional, Functional,
};
use sei_core::model::{
    check_hypotheses, hypotheses, AgeFunction, AgeKernels, CheckStatus, IncidenceFunction, ModelParams, SampleBox,
};
use sei_core::report::{verify, Verdict};
use sei_core::scenario::Scenario;
use sei_core::simulator::{InitialData, SimOptions, Simulator, Trajectory};
use sei_core::Result;

const A: f64 = 20.0;
const MU: f64 = 0.02;
const ALPHA: f64 = 0.2;
const GAMMA: f64 = 0.1;
const A_MAX: f64 = 50.0;
const DA: f64 = 0.1;
const T_END: f64 = 600.0;
const K_BASE: f64 = 0.001;
const N_BAR: f64 = A / MU;
const SEED: u64 = 20_240_601;

const AC1_MAX_REL_ERR: f64 = 1e-4;
const AC1_MIN_RATIO: f64 = 3.5;
const AC1_RUNTIME: Duration = Duration::from_secs(10);
const AC2_R0: f64 = 0.9;
const AC2_S_REL: f64 = 1e-3;
const AC2_E_REL: f64 = 1e-6;
const AC2_V_DECAY: f64 = 1e-3;
const AC2_RUNTIME: Duration = Duration::from_secs(60);
const AC3_R0_CROSS: f64 = 1e-6;
const AC3_TERMINAL_REL: f64 = 1e-3;
const AC3_CLOSED_FORM: f64 = 1e-9;
const AC3_RUNTIME: Duration = Duration::from_secs(120);
const AC4_SEED_VALUE: f64 = 1e-8;
const AC4_SEED_AGE: f64 = 10.0;
const AC4_WITHIN: f64 = 0.1;
const AC5_EXTINCT_REL: f64 = 1e-6;
const AC5_CRITICAL_REL: f64 = 1e-9;
const AC6_DRIFT_REL: f64 = 1e-6;
const AC7_IDENTITY_REL: f64 = 1e-10;
const AC7_HISTORIES: usize = 1000;
const RANDOM_RUNS: usize = 5;

fn baseline(incidence: IncidenceFunction) -> ModelParams {
    let kernels = AgeKernels::new(AgeFunction::constant(1.0), AgeFunction::constant(GAMMA), A_MAX).unwrap();
    ModelParams::new(A, MU, ALPHA, kernels, incidence).unwrap()
}

fn grid(da: f64) -> Grid {
    make_grid(A_MAX, da, T_END).unwrap()
}

/// Closed form of `∫₀^{a_max} e^{-(μ+γ)a} da` for constant kernels.
fn k_closed() -> f64 {
    let c = MU + GAMMA;
    (1.0 - (-c * A_MAX).exp()) / c
}

fn r0_closed(k: f64) -> f64 {
    ALPHA / (MU + ALPHA) * k * N_BAR * k_closed()
}

/// Smooth positive exposed history `E(−a) = amp·(1 + 0.5 sin(a/w + φ))`.
fn random_history(rng: &mut ChaCha8Rng, amp: f64) -> (f64, f64, f64) {
    (amp, rng.gen_range(2.0..15.0), rng.gen_range(0.0..std::f64::consts::TAU))
}

fn history_on(grid: &Grid, (amp, w, ph): (f64, f64, f64)) -> Vec<f64> {
    grid.ages().map(|a| amp * (1.0 + 0.5 * (a / w + ph).sin())).collect()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

struct Outcome {
    id: &'static str,
    passed: bool,
    detail: String,
}

fn outcome(id: &'static str, result: Result<(bool, String)>) -> Outcome {
    match result {
        Ok((passed, detail)) => Outcome { id, passed, detail },
        Err(e) => Outcome {
            id,
            passed: false,
            detail: format!("error: {e}"),
        },
    }
}

/// max_t |N(t) − (N̄ + (N₀ − N̄)e^{−μt})| / N̄
fn conservation_error(tr: &Trajectory) -> f64 {
    tr.samples
        .iter()
        .map(|s| (s.n - (N_BAR + (tr.n0 - N_BAR) * (-MU * s.t).exp())).abs() / N_BAR)
        .fold(0.0, f64::max)
}

fn ac1() -> Result<(bool, String)> {
    let start = Instant::now();
    let p = baseline(IncidenceFunction::mass_action(K_BASE));
    let run = |da: f64| -> Result<f64> {
        let g = grid(da);
        // Boundary-consistent data: E(0) = i₀(0)/α.
        let init = InitialData::from_profile(500.0, None, AgeProfile::from_fn(&g, |a| 5.0 * (-0.2 * a).exp()));
        let tr = Simulator::new(p.clone(), g).simulate(&init, &SimOptions::every(1))?;
        Ok(conservation_error(&tr))
    };
    let coarse = run(DA)?;
    let fine = run(DA / 2.0)?;
    let ratio = coarse / fine;
    let elapsed = start.elapsed();
    Ok((
        coarse <= AC1_MAX_REL_ERR && ratio >= AC1_MIN_RATIO && elapsed <= AC1_RUNTIME,
        format!("N error {coarse:.3e} at dt=0.1, {fine:.3e} at dt=0.05, ratio {ratio:.3}, {elapsed:.2?}"),
    ))
}

/// `C_d` from the dt / dt/2 pair on the first AC-2 initial condition.
fn calibrate(p: &ModelParams, s0: f64, hist: (f64, f64, f64)) -> Result<f64> {
    let g = grid(DA);
    let gf = g.refined()?;
    let coarse = Simulator::new(p.clone(), g).simulate(&InitialData::from_history(s0, history_on(&g, hist)), &SimOptions::every(1))?;
    let fine = Simulator::new(p.clone(), gf).simulate(&InitialData::from_history(s0, history_on(&gf, hist)), &SimOptions::every(1))?;
    calibrate_descent_slack(
        &coarse,
        &fine,
        &Functional::DiseaseFree(DfeFunctional::new(p, &g)?),
        &Functional::DiseaseFree(DfeFunctional::new(p, &gf)?),
    )
}

fn ac2(c_d: &mut f64) -> Result<(bool, String)> {
    let start = Instant::now();
    let p0 = baseline(IncidenceFunction::mass_action(K_BASE));
    let g = grid(DA);
    let r0 = compute_r0(&p0, &g)?;
    let p = p0.with_incidence_scale(AC2_R0 / r0);
    let r0_scaled = compute_r0(&p, &g)?;
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    // Small introductions into a susceptible population at or below N̄: at
    // R0 = 0.9 the slowest mode decays like e^{-0.008 t}, so E(600) ≤ 1e-6 N̄
    // is reachable only from infected densities of order 1e-4 N̄.
    let ics: Vec<(f64, (f64, f64, f64))> = (0..RANDOM_RUNS)
        .map(|_| {
            let s0 = rng.gen_range(0.25..1.0) * N_BAR;
            let amp = rng.gen_range(1e-5..1e-4) * N_BAR;
            (s0, random_history(&mut rng, amp))
        })
        .collect();
    *c_d = calibrate(&p, ics[0].0, ics[0].1)?;
    let sim = Simulator::new(p.clone(), g);
    let functional = Functional::DiseaseFree(DfeFunctional::new(&p, &g)?);
    let mut ok = (r0_scaled - AC2_R0).abs() < 1e-12;
    let mut worst = (0.0f64, 0.0f64, 0usize, 0.0f64);
    for (s0, hist) in &ics {
        let tr = sim.simulate(&InitialData::from_history(*s0, history_on(&g, *hist)), &SimOptions::every(1))?;
        let last = tr.last();
        let s_err = (last.s - N_BAR).abs() / N_BAR;
        let e_rel = last.e / N_BAR;
        let rep = check_monotone_descent(&tr, &functional, *c_d)?;
        let v_ratio = rep.v_end / rep.v_start;
        ok &= s_err <= AC2_S_REL && e_rel <= AC2_E_REL && rep.violations == 0 && v_ratio <= AC2_V_DECAY;
        worst = (worst.0.max(s_err), worst.1.max(e_rel), worst.2 + rep.violations, worst.3.max(v_ratio));
    }
    let elapsed = start.elapsed();
    ok &= elapsed <= AC2_RUNTIME;
    Ok((
        ok,
        format!(
            "R0 {r0_scaled:.6}; max |S-N|/N {:.2e}, max E/N {:.2e}, descent violations {}, max V(end)/V(a_max) {:.2e}, C_d {:.3e}, {elapsed:.2?}",
            worst.0, worst.1, worst.2, worst.3, c_d
        ),
    ))
}

fn ac3(c_d: f64) -> Result<(bool, String)> {
    let start = Instant::now();
    let p = baseline(IncidenceFunction::mass_action(K_BASE));
    let g = grid(DA);
    let rep = solve_endemic(&p, &g)?;
    let r0_err = rel(rep.r0, r0_closed(K_BASE));
    let end = rep.endemic.ok_or_else(|| sei_core::Error::Solver("no endemic point".into()))?;
    let closed_err = rel(end.s, N_BAR / rep.r0);
    let functional = Functional::Endemic(EndemicFunctional::new(&p, &g, &end)?);
    let sim = Simulator::new(p.clone(), g);
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 3);
    let mut worst_terminal = 0.0f64;
    let mut violations = 0;
    for _ in 0..RANDOM_RUNS {
        let s0 = rng.gen_range(0.1..1.5) * N_BAR;
        let amp = rng.gen_range(1e-4..0.3) * N_BAR;
        let hist = random_history(&mut rng, amp);
        let tr = sim.simulate(&InitialData::from_history(s0, history_on(&g, hist)), &SimOptions::every(1))?;
        let last = tr.last();
        worst_terminal = worst_terminal
            .max(rel(last.s, end.s))
            .max(rel(last.e, end.e))
            .max(rel(last.j, end.j));
        violations += check_monotone_descent(&tr, &functional, c_d)?.violations;
    }
    let elapsed = start.elapsed();
    Ok((
        r0_err <= AC3_R0_CROSS
            && worst_terminal <= AC3_TERMINAL_REL
            && violations == 0
            && closed_err <= AC3_CLOSED_FORM
            && elapsed <= AC3_RUNTIME,
        format!(
            "R0 {:.6} (closed form rel err {r0_err:.1e}); S* {:.6} vs N/R0 rel err {closed_err:.1e}; max terminal rel err {worst_terminal:.1e}; descent violations {violations}; {elapsed:.2?}",
            rep.r0, end.s
        ),
    ))
}

fn ac4() -> Result<(bool, String)> {
    let p = baseline(IncidenceFunction::mass_action(K_BASE));
    let g = grid(DA);
    let end = solve_endemic(&p, &g)?.endemic.expect("baseline is endemic");
    let mut i0 = AgeProfile::zeros(&g);
    i0.values[(AC4_SEED_AGE / DA).round() as usize] = AC4_SEED_VALUE;
    let tr = Simulator::new(p.clone(), g).simulate(&InitialData::from_profile(N_BAR, Some(0.0), i0), &SimOptions::every(1))?;
    let rep = check_persistence(&tr, &p, compute_r0(&p, &g)?)?;
    let settle = rel(rep.last_quarter_min_e, end.e);
    Ok((
        rep.passed && rep.eta_emp > 0.0 && settle <= AC4_WITHIN,
        format!(
            "post-burn-in min E {:.3e}, min J {:.3e}; last-quarter min E {:.6} vs E* {:.6} (rel {settle:.1e})",
            rep.eta_emp, rep.delta_emp, rep.last_quarter_min_e, end.e
        ),
    ))
}

fn ac5() -> Result<(bool, String)> {
    let p = baseline(IncidenceFunction::mass_action(K_BASE));
    let g = grid(DA);
    let predicted = 1.0 / r0_closed(K_BASE);
    let factors = [0.2, 0.4, 0.6, 0.8, 1.25, 1.5, 2.0, 4.0];
    let scales: Vec<f64> = factors.iter().map(|f| f * predicted).collect();
    let scan = threshold_scan(&p, &g, &scales)?;
    let crit = scan.critical_scale.unwrap_or(f64::NAN);
    // The scan range brackets the threshold; also probe a wide range.
    let wide = threshold_scan(&p, &g, &linspace(0.01, 10.0, 5))?.critical_scale.unwrap_or(f64::NAN);
    let crit_err = rel(crit, predicted).max(rel(wide, predicted));
    let mut ok = crit_err <= AC5_CRITICAL_REL;
    let mut notes = Vec::new();
    for pt in &scan.points {
        let pp = p.with_incidence_scale(pt.scale);
        let init = InitialData::from_history(N_BAR, vec![0.01; g.n_age + 1]);
        let tr = Simulator::new(pp.clone(), g).simulate(&init, &SimOptions::every(1))?;
        let e_end = tr.last().e;
        if pt.r0 < 1.0 {
            let good = pt.endemic.is_none() && e_end <= AC5_EXTINCT_REL * N_BAR;
            ok &= good;
            notes.push(format!("R0 {:.2}: absent, E_end {e_end:.1e}{}", pt.r0, if good { "" } else { " FAIL" }));
        } else {
            let persist = check_persistence(&tr, &pp, pt.r0)?;
            let good = pt.endemic.is_some() && persist.passed;
            ok &= good;
            notes.push(format!("R0 {:.2}: endemic, persists{}", pt.r0, if good { "" } else { " FAIL" }));
        }
    }
    Ok((ok, format!("critical scale rel err {crit_err:.1e}; {}", notes.join("; "))))
}

fn ac6() -> Result<(bool, String)> {
    let p = baseline(IncidenceFunction::mass_action(K_BASE));
    let g = grid(DA);
    let sim = Simulator::new(p.clone(), g);
    let drift = |tr: &Trajectory, s: f64, e: f64, j: f64| {
        (0..tr.dense.len())
            .map(|k| {
                (tr.dense.s[k] - s)
                    .abs()
                    .max((tr.dense.e[k] - e).abs())
                    .max((tr.dense.j[k] - j).abs())
            })
            .fold(0.0, f64::max)
    };
    let dfe = sim.simulate(&InitialData::disease_free(N_BAR, &g), &SimOptions::every(1))?;
    let d_dfe = drift(&dfe, N_BAR, 0.0, 0.0) / N_BAR;
    let end = solve_endemic(&p, &g)?.endemic.expect("baseline is endemic");
    let at_end = sim.simulate(&InitialData::from_history(end.s, vec![end.e; g.n_age + 1]), &SimOptions::every(1))?;
    let d_end = drift(&at_end, end.s, end.e, end.j) / N_BAR;
    Ok((
        d_dfe <= AC6_DRIFT_REL && d_end <= AC6_DRIFT_REL,
        format!("max drift / N: DFE {d_dfe:.1e}, endemic {d_end:.1e}"),
    ))
}

fn ac7() -> Result<(bool, String)> {
    let p = baseline(IncidenceFunction::mass_action(K_BASE));
    let g = grid(DA);
    let dfe = DfeFunctional::new(&p, &g)?;
    let psi_err = rel(dfe.psi[0], (MU + ALPHA) * r0_closed(K_BASE));
    let end = solve_endemic(&p, &g)?.endemic.expect("baseline is endemic");
    let endemic = EndemicFunctional::new(&p, &g, &end)?;
    let dm_err = (endemic.dm_total() - 1.0).abs();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 7);
    let mut violations = 0;
    for n in 0..AC7_HISTORIES {
        let hist: Vec<f64> = if n % 2 == 0 {
            // Independent log-uniform node values in [0.01, 100]·E*.
            (0..=g.n_age).map(|_| end.e * 10f64.powf(rng.gen_range(-2.0..2.0))).collect()
        } else {
            let scale = end.e * rng.gen_range(0.01..100.0);
            let (amp, w, ph) = random_history(&mut rng, scale);
            let depth = rng.gen_range(0.0..0.99);
            g.ages().map(|a| amp * (1.0 + depth * (a / w + ph).sin())).collect()
        };
        let (lhs, rhs) = endemic.jensen_pair(&hist)?;
        if lhs < rhs {
            violations += 1;
        }
    }
    Ok((
        psi_err <= AC7_IDENTITY_REL && dm_err <= AC7_IDENTITY_REL && violations == 0,
        format!("ψ(0) vs (μ+α)R0 rel err {psi_err:.1e}; |∫dm − 1| {dm_err:.1e}; Jensen violations {violations}/{AC7_HISTORIES}"),
    ))
}

fn ac8() -> Result<(bool, String)> {
    let g = grid(DA);
    let domain = |p: &ModelParams| SampleBox {
        s_max: p.n_bar(),
        j_max: p.force_bound(),
    };
    let mut ok = true;
    let mut notes = Vec::new();
    for (f, bracket) in [
        (IncidenceFunction::mass_action(K_BASE), CheckStatus::PassNonStrict),
        (IncidenceFunction::saturated(K_BASE, 0.01), CheckStatus::Pass),
    ] {
        let p = baseline(f);
        let end = solve_endemic(&p, &g)?.endemic.map(|e| (e.s, e.j));
        let rep = check_hypotheses(&p.incidence, domain(&p), end, SEED);
        let good = rep.all_hold() && rep.status(hypotheses::RATIO_BRACKET) == bracket;
        ok &= good;
        notes.push(format!(
            "{}: all hold {}, (S1) {:?}",
            rep.family,
            rep.all_hold(),
            rep.status(hypotheses::RATIO_BRACKET)
        ));
    }

    let text = format!(
        r#"{{"A": {A}, "mu": {MU}, "alpha": {ALPHA},
            "incidence": {{"family": "custom_power", "k": 1e-7, "p": 2}},
            "beta": {{"kind": "constant", "value": 1}}, "gamma": {{"kind": "constant", "value": {GAMMA}}},
            "a_max": {A_MAX}, "da": {DA}, "t_end": {T_END},
            "init": {{"S0": 500, "phi": {{"kind": "constant", "value": 1}}}}, "seed": {SEED}}}"#
    );
    let v = verify(&Scenario::from_json(&text)?)?;
    let hyp = &v.report.hypotheses;
    let fails_required = hyp.status(hypotheses::CONCAVE_IN_J) == CheckStatus::Fail
        && hyp.status(hypotheses::RATIO_DECREASING) == CheckStatus::Fail;
    let gated = v
        .report
        .verdicts
        .iter()
        .all(|t| matches!(t.verdict, Verdict::NotCovered | Verdict::Skipped));
    ok &= fails_required && gated;
    notes.push(format!(
        "kSJ²: failures {:?}, verdicts {:?}",
        hyp.failures(),
        v.report.verdicts.iter().map(|t| t.verdict).collect::<Vec<_>>()
    ));
    Ok((ok, notes.join("; ")))
}

fn main() {
    let mut c_d = f64::NAN;
    let results = [
        outcome("AC-1", ac1()),
        outcome("AC-2", ac2(&mut c_d)),
        outcome("AC-3", ac3(if c_d.is_finite() { c_d } else { 0.0 })),
        outcome("AC-4", ac4()),
        outcome("AC-5", ac5()),
        outcome("AC-6", ac6()),
        outcome("AC-7", ac7()),
        outcome("AC-8", ac8()),
    ];
    let mut failed = 0;
    for r in &results {
        println!("{} {}  {}", r.id, if r.passed { "PASS" } else { "FAIL" }, r.detail);
        failed += usize::from(!r.passed);
    }
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
