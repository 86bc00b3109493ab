//! The disease-free and endemic Lyapunov functionals, evaluated along
//! simulated trajectories, plus the boundedness and persistence diagnostics.
//!
//! Both functionals take the exposed history `E(t − a)` on the age grid. For
//! the built-in incidence families `f(S, J)` factors as `g(S)·φ(J)` with
//! `g(S) = S/(1 + cS)`, and the susceptible part collapses to
//! `g(x₀)·H(S/x₀)` where `H(y) = y − ln y − 1`.

use rayon::prelude::*;
use serde::Serialize;

use crate::analysis::{compute_r0, EndemicPoint};
use crate::discretize::{trapezoid, Grid, KernelQuadrature};
use crate::error::{Error, Result};
use crate::model::{IncidenceFunction, ModelParams};
use crate::simulator::Trajectory;

/// Relative target of the adaptive trapezoid used for the `η`-integrals.
pub const ETA_INTEGRAL_TOL: f64 = 1e-10;
/// Relative slack in the bound checks.
pub const BOUNDS_EPS: f64 = 1e-3;
/// Relative part of the descent tolerance.
pub const DESCENT_REL_TOL: f64 = 1e-8;
/// Required ratio of the last-quarter minimum to the earlier minimum.
pub const NON_DECAY_RATIO: f64 = 0.9;

/// `H(y) = y − ln y − 1`, evaluated without cancellation near `y = 1`.
pub fn bump(y: f64) -> f64 {
    let u = y - 1.0;
    u - u.ln_1p()
}

/// Adaptive trapezoid on `[a, b]` with Richardson error control.
pub fn adaptive_trapezoid(f: &dyn Fn(f64) -> Result<f64>, a: f64, b: f64, rel_tol: f64) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    let (lo, hi, sign) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };
    // Coarse pass for the scale of the answer.
    let n = 64;
    let h = (hi - lo) / n as f64;
    let mut vals = Vec::with_capacity(n + 1);
    for i in 0..=n {
        vals.push(f(lo + h * i as f64)?);
    }
    let scale = trapezoid(&vals, h).abs().max(vals.iter().fold(0.0f64, |m, v| m.max(v.abs())) * (hi - lo));
    let tol = rel_tol * scale.max(f64::MIN_POSITIVE);
    let mut total = 0.0;
    for i in 0..n {
        let (x0, x1) = (lo + h * i as f64, lo + h * (i + 1) as f64);
        total += refine(f, x0, x1, vals[i], vals[i + 1], tol / n as f64, 0)?;
    }
    Ok(sign * total)
}

fn refine(f: &dyn Fn(f64) -> Result<f64>, a: f64, b: f64, fa: f64, fb: f64, tol: f64, depth: usize) -> Result<f64> {
    let m = 0.5 * (a + b);
    let fm = f(m)?;
    let coarse = 0.5 * (b - a) * (fa + fb);
    let fine = 0.25 * (b - a) * (fa + 2.0 * fm + fb);
    let err = (fine - coarse) / 3.0;
    if err.abs() <= tol || depth >= 40 {
        return Ok(fine + err);
    }
    Ok(refine(f, a, m, fa, fm, 0.5 * tol, depth + 1)? + refine(f, m, b, fm, fb, 0.5 * tol, depth + 1)?)
}

fn shape_weight(c: f64, x: f64) -> f64 {
    x / (1.0 + c * x)
}

/// Disease-free functional
/// `V = S − N̄ − ∫_{N̄}^{S} ∂f/∂J(N̄,0)/∂f/∂J(η,0) dη + ∫ψ(a)E(t−a)da + E(t)`.
#[derive(Debug, Clone)]
pub struct DfeFunctional {
    pub n_bar: f64,
    /// `∂f/∂J(N̄, 0)`.
    pub slope: f64,
    pub r0: f64,
    /// `ψ(a_j) = α ∂f/∂J(N̄,0) ∫_{a_j}^{a_max} β e^{-μσ} Γ dσ`.
    pub psi: Vec<f64>,
    da: f64,
    incidence: IncidenceFunction,
}

impl DfeFunctional {
    pub fn new(params: &ModelParams, grid: &Grid) -> Result<Self> {
        let n_bar = params.n_bar();
        let slope = params.incidence.dfdj_at_zero(n_bar)?;
        if !(slope > 0.0) {
            return Err(Error::domain(format!("∂f/∂J(N̄, 0) = {slope} must be positive")));
        }
        let quad = KernelQuadrature::new(&params.kernels, params.mu, grid);
        let psi = quad.tail.iter().map(|t| params.alpha * slope * t).collect();
        Ok(DfeFunctional {
            n_bar,
            slope,
            r0: compute_r0(params, grid)?,
            psi,
            da: grid.da,
            incidence: params.incidence.clone(),
        })
    }

    /// The `η`-integrand `∂f/∂J(N̄,0)/∂f/∂J(η,0)`.
    pub fn ratio(&self, eta: f64) -> Result<f64> {
        let d = self.incidence.dfdj_at_zero(eta)?;
        if !(d > 0.0) {
            return Err(Error::domain(format!("∂f/∂J({eta}, 0) = {d} is not positive")));
        }
        Ok(self.slope / d)
    }

    /// Susceptible part by adaptive quadrature of the ratio.
    pub fn v1_numeric(&self, s: f64) -> Result<f64> {
        check_susceptible(s)?;
        let integral = adaptive_trapezoid(&|eta| self.ratio(eta), self.n_bar, s, ETA_INTEGRAL_TOL)?;
        Ok(s - self.n_bar - integral)
    }

    pub fn v1(&self, s: f64) -> Result<f64> {
        check_susceptible(s)?;
        match self.incidence.s_shape() {
            Some(c) => Ok(shape_weight(c, self.n_bar) * bump(s / self.n_bar)),
            None => self.v1_numeric(s),
        }
    }

    /// `∫ψ(a) E(t−a) da`.
    pub fn v2(&self, history: &[f64]) -> Result<f64> {
        check_history_len(history, self.psi.len())?;
        let vals: Vec<f64> = self.psi.iter().zip(history).map(|(p, e)| p * e).collect();
        Ok(trapezoid(&vals, self.da))
    }

    /// `history[j] = E(t − a_j)`; `history[0]` is `E(t)`.
    pub fn eval(&self, s: f64, history: &[f64]) -> Result<f64> {
        Ok(self.v1(s)? + self.v2(history)? + history[0])
    }
}

/// Endemic functional
/// `V = S − S* − ∫_{S*}^{S} f*/f(η,J*) dη + ∫ψ(a) H(E(t−a)/E*) da + E* H(E(t)/E*)`.
#[derive(Debug, Clone)]
pub struct EndemicFunctional {
    pub s_star: f64,
    pub e_star: f64,
    pub j_star: f64,
    pub f_star: f64,
    /// `ψ(a_j) = f* ∫_{a_j}^{a_max} dm`.
    pub psi: Vec<f64>,
    /// Quadrature weights of `dm` against a history on the grid.
    pub dm: Vec<f64>,
    da: f64,
    incidence: IncidenceFunction,
}

impl EndemicFunctional {
    pub fn new(params: &ModelParams, grid: &Grid, point: &EndemicPoint) -> Result<Self> {
        if !(point.s > 0.0 && point.e > 0.0 && point.j > 0.0) {
            return Err(Error::domain(format!("endemic point {point:?} is not strictly positive")));
        }
        let f_star = point.f_star(params)?;
        let quad = KernelQuadrature::new(&params.kernels, params.mu, grid);
        let k = quad.moment;
        Ok(EndemicFunctional {
            s_star: point.s,
            e_star: point.e,
            j_star: point.j,
            f_star,
            psi: quad.tail.iter().map(|t| f_star * t / k).collect(),
            dm: quad.history_weights.iter().map(|w| w / k).collect(),
            da: grid.da,
            incidence: params.incidence.clone(),
        })
    }

    /// `∫dm` on the grid.
    pub fn dm_total(&self) -> f64 {
        self.dm.iter().sum()
    }

    pub fn ratio(&self, eta: f64) -> Result<f64> {
        let f = self.incidence.eval(eta, self.j_star)?;
        if !(f > 0.0) {
            return Err(Error::domain(format!("f({eta}, J*) = {f} is not positive")));
        }
        Ok(self.f_star / f)
    }

    pub fn v1_numeric(&self, s: f64) -> Result<f64> {
        check_susceptible(s)?;
        let integral = adaptive_trapezoid(&|eta| self.ratio(eta), self.s_star, s, ETA_INTEGRAL_TOL)?;
        Ok(s - self.s_star - integral)
    }

    pub fn v1(&self, s: f64) -> Result<f64> {
        check_susceptible(s)?;
        match self.incidence.s_shape() {
            Some(c) => Ok(shape_weight(c, self.s_star) * bump(s / self.s_star)),
            None => self.v1_numeric(s),
        }
    }

    fn normalized(&self, history: &[f64]) -> Result<Vec<f64>> {
        check_history_len(history, self.psi.len())?;
        history[..self.psi.len()]
            .iter()
            .enumerate()
            .map(|(j, &e)| {
                if e > 0.0 {
                    Ok(e / self.e_star)
                } else {
                    Err(Error::domain(format!(
                        "E(t − a) = {e} is not positive at lag a = {}",
                        j as f64 * self.da
                    )))
                }
            })
            .collect()
    }

    /// `∫ψ(a) H(E(t−a)/E*) da`.
    pub fn v2(&self, history: &[f64]) -> Result<f64> {
        let x = self.normalized(history)?;
        let vals: Vec<f64> = self.psi.iter().zip(&x).map(|(p, y)| p * bump(*y)).collect();
        Ok(trapezoid(&vals, self.da))
    }

    pub fn eval(&self, s: f64, history: &[f64]) -> Result<f64> {
        let v2 = self.v2(history)?;
        Ok(self.v1(s)? + v2 + self.e_star * bump(history[0] / self.e_star))
    }

    /// `(∫H(E(t−a)/E*) dm, H(∫E(t−a)/E* dm))`; the first is never smaller.
    pub fn jensen_pair(&self, history: &[f64]) -> Result<(f64, f64)> {
        let x = self.normalized(history)?;
        let lhs = self.dm.iter().zip(&x).map(|(w, y)| w * bump(*y)).sum();
        let mean: f64 = self.dm.iter().zip(&x).map(|(w, y)| w * y).sum();
        Ok((lhs, bump(mean)))
    }
}

fn check_susceptible(s: f64) -> Result<()> {
    if !(s > 0.0) || !s.is_finite() {
        return Err(Error::domain(format!("S = {s} must be positive")));
    }
    Ok(())
}

fn check_history_len(history: &[f64], n: usize) -> Result<()> {
    if history.len() < n {
        return Err(Error::config(format!("history has {} nodes, need {n}", history.len())));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FunctionalKind {
    DiseaseFree,
    Endemic,
}

#[derive(Debug, Clone)]
pub enum Functional {
    DiseaseFree(DfeFunctional),
    Endemic(EndemicFunctional),
}

impl Functional {
    pub fn kind(&self) -> FunctionalKind {
        match self {
            Functional::DiseaseFree(_) => FunctionalKind::DiseaseFree,
            Functional::Endemic(_) => FunctionalKind::Endemic,
        }
    }

    pub fn eval(&self, s: f64, history: &[f64]) -> Result<f64> {
        match self {
            Functional::DiseaseFree(f) => f.eval(s, history),
            Functional::Endemic(f) => f.eval(s, history),
        }
    }

    /// `V` at time step `step` of a trajectory.
    pub fn at_step(&self, tr: &Trajectory, step: usize) -> Result<f64> {
        self.eval(tr.dense.s[step], &tr.e_history(step))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DescentRow {
    pub t: f64,
    #[serde(rename = "V")]
    pub v: f64,
    /// `V(t) − V(previous sample)`; zero on the first row.
    #[serde(rename = "dV")]
    pub dv: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DescentReport {
    pub kind: FunctionalKind,
    pub burn_in: f64,
    #[serde(skip_serializing)]
    pub rows: Vec<DescentRow>,
    /// `V` at the first checked sample.
    pub v_start: f64,
    pub v_end: f64,
    pub c_d: f64,
    /// `1e-8·|V(t₀)| + C_d·dt²`.
    pub tol_v: f64,
    /// Largest forward difference between consecutive samples.
    pub max_increase: f64,
    pub violations: usize,
    /// `(V(t₀) − V(t_end)) / V(t₀)`.
    pub decrease_fraction: f64,
    pub passed: bool,
}

fn checked_steps(tr: &Trajectory, burn_in: f64) -> Result<Vec<usize>> {
    if tr.t_end() + 1e-9 < burn_in {
        return Err(Error::config(format!(
            "trajectory ends at t = {} before the burn-in {burn_in}; histories over a full age window are unavailable",
            tr.t_end()
        )));
    }
    let first = tr.step_at(burn_in);
    Ok(tr.sample_steps.iter().copied().filter(|s| *s >= first).collect())
}

/// `(t, V)` at every recorded sample from `burn_in` on.
pub fn functional_series(tr: &Trajectory, functional: &Functional, burn_in: f64) -> Result<Vec<(f64, f64)>> {
    let steps = checked_steps(tr, burn_in)?;
    steps
        .par_iter()
        .map(|&step| Ok((tr.grid.time(step), functional.at_step(tr, step)?)))
        .collect()
}

/// Start of the descent check: one age window, and for the endemic functional
/// also the first time the whole window `[t − a_max, t]` has `E > 0`.
pub fn descent_burn_in(tr: &Trajectory, functional: &Functional) -> f64 {
    let n = tr.grid.n_age;
    let mut first = n;
    if let Functional::Endemic(_) = functional {
        if let Some(z) = tr.dense.e.iter().rposition(|e| *e <= 0.0) {
            first = first.max(z + n + 1);
        }
        // prehistory[m] enters the window up to step n − m
        if let Some(m) = tr.prehistory.iter().skip(1).position(|e| *e <= 0.0) {
            first = first.max(n - (m + 1) + 1);
        }
    }
    tr.grid.time(first)
}

/// Checks that `V` is nonincreasing between consecutive samples after the
/// burn-in, up to `tol_V = 1e-8·|V(t₀)| + C_d·dt²`.
pub fn check_monotone_descent(tr: &Trajectory, functional: &Functional, c_d: f64) -> Result<DescentReport> {
    let burn_in = descent_burn_in(tr, functional);
    let series = functional_series(tr, functional, burn_in)?;
    let Some(&(_, v_start)) = series.first() else {
        return Err(Error::config("no samples after the burn-in"));
    };
    let v_end = series.last().map(|r| r.1).unwrap_or(v_start);
    let tol_v = DESCENT_REL_TOL * v_start.abs() + c_d * tr.grid.dt * tr.grid.dt;
    let mut rows = Vec::with_capacity(series.len());
    let mut max_increase = f64::NEG_INFINITY;
    let mut violations = 0;
    let mut prev = None;
    for &(t, v) in &series {
        let dv = prev.map(|p| v - p).unwrap_or(0.0);
        if prev.is_some() {
            max_increase = max_increase.max(dv);
            if dv > tol_v {
                violations += 1;
            }
        }
        rows.push(DescentRow { t, v, dv });
        prev = Some(v);
    }
    if rows.len() < 2 {
        max_increase = 0.0;
    }
    let decrease_fraction = if v_start != 0.0 { (v_start - v_end) / v_start } else { 0.0 };
    Ok(DescentReport {
        kind: functional.kind(),
        burn_in,
        rows,
        v_start,
        v_end,
        c_d,
        tol_v,
        max_increase,
        violations,
        decrease_fraction,
        passed: violations == 0,
    })
}

/// Descent slack `C_d` from a refinement pair: the same scenario integrated
/// with `dt` (`coarse`) and `dt/2` (`fine`), both sampled at every step.
/// Each coarse increment `V(t+dt) − V(t)` is compared with the fine one over
/// the same interval; the difference is `O(dt²)` per increment with a 4:1
/// ratio under halving, so `C_d = (4/3)·max|ΔV_dt − ΔV_{dt/2}| / dt²`.
pub fn calibrate_descent_slack(
    coarse: &Trajectory,
    fine: &Trajectory,
    f_coarse: &Functional,
    f_fine: &Functional,
) -> Result<f64> {
    let dt = coarse.grid.dt;
    if (fine.grid.dt * 2.0 - dt).abs() > 1e-12 * dt {
        return Err(Error::config("refinement pair must halve dt"));
    }
    let first = coarse.step_at(descent_burn_in(coarse, f_coarse).max(descent_burn_in(fine, f_fine)));
    let last = coarse.dense.len() - 1;
    let steps: Vec<usize> = (first..=last).collect();
    let vc: Vec<f64> = steps
        .par_iter()
        .map(|&s| f_coarse.at_step(coarse, s))
        .collect::<Result<_>>()?;
    let vf: Vec<f64> = steps
        .par_iter()
        .map(|&s| f_fine.at_step(fine, 2 * s))
        .collect::<Result<_>>()?;
    let worst = (1..steps.len())
        .map(|k| ((vc[k] - vc[k - 1]) - (vf[k] - vf[k - 1])).abs())
        .fold(0.0, f64::max);
    Ok(4.0 / 3.0 * worst / (dt * dt))
}

/// Burn-in for the bound checks: one age window, extended until the total
/// population is within `ε N̄` of its limit.
pub fn bounds_burn_in(tr: &Trajectory, params: &ModelParams) -> f64 {
    let n_bar = params.n_bar();
    let excess = (tr.n0 - n_bar).abs() / (BOUNDS_EPS * n_bar);
    let relax = if excess > 1.0 { excess.ln() / params.mu } else { 0.0 };
    tr.grid.a_max.max(relax)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundsReport {
    pub burn_in: f64,
    /// The trajectory extends past the burn-in.
    pub horizon_ok: bool,
    pub eps: f64,
    /// `max (S + E)` after burn-in, against `N̄`.
    pub max_s_plus_e: f64,
    pub n_bar: f64,
    pub max_j: f64,
    /// `α N̄ ‖β‖ / μ`.
    pub j_bound: f64,
    pub min_s: f64,
    /// `A / (μ + L)`.
    pub s_floor: f64,
    pub lipschitz: f64,
    pub s_plus_e_ok: bool,
    pub j_ok: bool,
    pub s_floor_ok: bool,
    pub passed: bool,
}

/// Eventual bounds `S + E ≤ N̄`, `J ≤ αN̄‖β‖/μ`, `S ≥ A/(μ+L)`, each with
/// relative slack `ε`.
pub fn check_bounds(tr: &Trajectory, params: &ModelParams) -> Result<BoundsReport> {
    let burn_in = bounds_burn_in(tr, params);
    // A horizon shorter than the burn-in leaves only the final state to inspect.
    let horizon_ok = tr.t_end() + 1e-9 >= burn_in;
    let first = tr.step_at(burn_in).min(tr.dense.len() - 1);
    let d = &tr.dense;
    let (mut max_se, mut max_j, mut min_s) = (f64::NEG_INFINITY, f64::NEG_INFINITY, f64::INFINITY);
    for k in first..d.len() {
        max_se = max_se.max(d.s[k] + d.e[k]);
        max_j = max_j.max(d.j[k]);
        min_s = min_s.min(d.s[k]);
    }
    let n_bar = params.n_bar();
    let j_bound = params.force_bound();
    let lipschitz = params.lipschitz();
    let s_floor = params.recruitment / (params.mu + lipschitz);
    let eps = BOUNDS_EPS;
    let s_plus_e_ok = max_se <= n_bar * (1.0 + eps);
    let j_ok = max_j <= j_bound * (1.0 + eps);
    let s_floor_ok = min_s >= s_floor * (1.0 - eps);
    Ok(BoundsReport {
        burn_in,
        horizon_ok,
        eps,
        max_s_plus_e: max_se,
        n_bar,
        max_j,
        j_bound,
        min_s,
        s_floor,
        lipschitz,
        s_plus_e_ok,
        j_ok,
        s_floor_ok,
        passed: horizon_ok && s_plus_e_ok && j_ok && s_floor_ok,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PersistenceReport {
    pub burn_in: f64,
    /// `min E` after burn-in.
    pub eta_emp: f64,
    /// `min J` after burn-in.
    pub delta_emp: f64,
    /// Minima over the last quarter of the post-burn-in window.
    pub last_quarter_min_e: f64,
    pub last_quarter_min_j: f64,
    /// Minima over the first three quarters.
    pub earlier_min_e: f64,
    pub earlier_min_j: f64,
    pub passed: bool,
}

/// Empirical persistence: post-burn-in minima of `E` and `J` are positive and
/// the last quarter does not fall below `0.9×` the earlier minimum.
pub fn check_persistence(tr: &Trajectory, params: &ModelParams, r0: f64) -> Result<PersistenceReport> {
    if r0 <= 1.0 {
        return Err(Error::Gate(format!("R0 = {r0} ≤ 1: persistence does not apply")));
    }
    if !tr.seeded && tr.prehistory.iter().all(|v| *v <= 0.0) {
        return Err(Error::Gate("initial data lie in the disease-free subspace".into()));
    }
    let _ = params;
    let burn_in = tr.grid.a_max;
    if tr.t_end() + 1e-9 < burn_in {
        return Err(Error::config(format!(
            "trajectory ends at t = {} before the burn-in {burn_in}",
            tr.t_end()
        )));
    }
    let first = tr.step_at(burn_in);
    let last = tr.dense.len() - 1;
    let split = last - (last - first) / 4;
    let min_of = |v: &[f64], lo: usize, hi: usize| v[lo..hi].iter().copied().fold(f64::INFINITY, f64::min);
    let d = &tr.dense;
    let eta_emp = min_of(&d.e, first, last + 1);
    let delta_emp = min_of(&d.j, first, last + 1);
    let last_quarter_min_e = min_of(&d.e, split, last + 1);
    let last_quarter_min_j = min_of(&d.j, split, last + 1);
    let (earlier_min_e, earlier_min_j) = if split > first {
        (min_of(&d.e, first, split), min_of(&d.j, first, split))
    } else {
        (eta_emp, delta_emp)
    };
    let passed = eta_emp > 0.0
        && delta_emp > 0.0
        && last_quarter_min_e >= NON_DECAY_RATIO * earlier_min_e
        && last_quarter_min_j >= NON_DECAY_RATIO * earlier_min_j;
    Ok(PersistenceReport {
        burn_in,
        eta_emp,
        delta_emp,
        last_quarter_min_e,
        last_quarter_min_j,
        earlier_min_e,
        earlier_min_j,
        passed,
    })
}
