//! Basic reproduction number, equilibria, and threshold sweeps.

use rayon::prelude::*;
use serde::Serialize;

use crate::discretize::{Grid, KernelQuadrature};
use crate::error::{Error, Result};
use crate::model::ModelParams;

/// Residual tolerance (relative) for the three equilibrium equations.
pub const RESIDUAL_TOL: f64 = 1e-10;
/// Inset of the upper bracket end below `N̄`, relative to `N̄`.
pub const BRACKET_INSET: f64 = 1e-9;
/// Lower bracket end as a fraction of the susceptible floor `A/(μ+L)`.
pub const LOWER_GUARD: f64 = 1e-3;
/// Points used when scanning `h` for sign changes.
pub const SCAN_POINTS: usize = 10_000;
/// Relative width at which the critical-scale bisection stops.
pub const CRITICAL_SCALE_TOL: f64 = 1e-12;

const MAX_BISECTIONS: usize = 400;

/// `K = ∫β e^{-μa} Γ da` on the given grid.
pub fn kernel_moment(params: &ModelParams, grid: &Grid) -> f64 {
    KernelQuadrature::new(&params.kernels, params.mu, grid).moment
}

/// `D̄ = α K / (μ + α)`.
pub fn d_bar(params: &ModelParams, grid: &Grid) -> f64 {
    params.alpha / (params.mu + params.alpha) * kernel_moment(params, grid)
}

fn r0_with_moment(params: &ModelParams, k: f64) -> Result<f64> {
    let slope = params.incidence.dfdj_at_zero(params.n_bar())?;
    Ok(params.alpha / (params.mu + params.alpha) * slope * k)
}

/// `R0 = α/(μ+α) · ∂f/∂J(N̄, 0) · K`.
pub fn compute_r0(params: &ModelParams, grid: &Grid) -> Result<f64> {
    r0_with_moment(params, kernel_moment(params, grid))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EndemicPoint {
    #[serde(rename = "S")]
    pub s: f64,
    #[serde(rename = "E")]
    pub e: f64,
    #[serde(rename = "J")]
    pub j: f64,
    /// Relative residuals of `A − μS − f = 0`, `(μ+α)E = f`, `J = αKE`.
    pub residuals: [f64; 3],
}

impl EndemicPoint {
    pub fn f_star(&self, params: &ModelParams) -> Result<f64> {
        params.incidence.eval(self.s, self.j)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquilibriumReport {
    #[serde(rename = "R0")]
    pub r0: f64,
    /// `(S, E)` at the disease-free equilibrium.
    pub dfe: (f64, f64),
    pub endemic: Option<EndemicPoint>,
    /// Why `endemic` is absent.
    pub reason: Option<String>,
    #[serde(rename = "D_bar")]
    pub d_bar: f64,
    #[serde(rename = "K")]
    pub kernel_moment: f64,
    pub solver_iterations: usize,
    /// Approximate locations of the sign changes of `h` on the scan grid.
    pub sign_changes: Vec<f64>,
}

struct Reduced<'a> {
    params: &'a ModelParams,
    d_bar: f64,
}

impl Reduced<'_> {
    /// `h(S) = f(S, D̄(A − μS)) − (A − μS)`.
    fn h(&self, s: f64) -> Result<f64> {
        let p = self.params;
        let outflow = p.recruitment - p.mu * s;
        Ok(p.incidence.eval(s, self.d_bar * outflow)? - outflow)
    }
}

fn bracket(params: &ModelParams) -> (f64, f64) {
    let n_bar = params.n_bar();
    (
        params.susceptible_floor() * LOWER_GUARD,
        n_bar * (1.0 - BRACKET_INSET),
    )
}

/// Sign changes of `h` sampled at `n` points across the solver's bracket.
pub fn scan_sign_changes(params: &ModelParams, grid: &Grid, n: usize) -> Result<Vec<f64>> {
    let red = Reduced {
        params,
        d_bar: d_bar(params, grid),
    };
    let (lo, hi) = bracket(params);
    let n = n.max(2);
    let mut out = Vec::new();
    let mut prev: Option<(f64, f64)> = None;
    for i in 0..n {
        let s = lo + (hi - lo) * i as f64 / (n - 1) as f64;
        let v = red.h(s)?;
        if let Some((s0, v0)) = prev {
            if (v0 < 0.0) != (v < 0.0) {
                out.push(0.5 * (s0 + s));
            }
        }
        prev = Some((s, v));
    }
    Ok(out)
}

fn residuals(params: &ModelParams, k: f64, s: f64, e: f64, j: f64) -> Result<[f64; 3]> {
    let f = params.incidence.eval(s, j)?;
    let rel = |x: f64, scale: f64| x.abs() / scale.abs().max(f64::MIN_POSITIVE);
    Ok([
        rel(params.recruitment - params.mu * s - f, params.recruitment),
        rel((params.mu + params.alpha) * e - f, f),
        rel(j - params.alpha * e * k, j),
    ])
}

/// Disease-free point, `R0`, and the endemic point when `R0 > 1`.
pub fn solve_endemic(params: &ModelParams, grid: &Grid) -> Result<EquilibriumReport> {
    let k = kernel_moment(params, grid);
    let d_bar = params.alpha / (params.mu + params.alpha) * k;
    let r0 = r0_with_moment(params, k)?;
    let mut report = EquilibriumReport {
        r0,
        dfe: (params.n_bar(), 0.0),
        endemic: None,
        reason: None,
        d_bar,
        kernel_moment: k,
        solver_iterations: 0,
        sign_changes: Vec::new(),
    };
    if r0 <= 1.0 {
        report.reason = Some("R0 ≤ 1".into());
        return Ok(report);
    }
    report.sign_changes = scan_sign_changes(params, grid, SCAN_POINTS)?;
    if report.sign_changes.len() > 1 {
        log::warn!(
            "h has {} sign changes on the scan grid; reporting the root bracketed by the full interval",
            report.sign_changes.len()
        );
    }

    let red = Reduced { params, d_bar };
    let (mut lo, mut hi) = bracket(params);
    let (h_lo, h_hi) = (red.h(lo)?, red.h(hi)?);
    if !(h_lo < 0.0 && h_hi > 0.0) {
        return Err(Error::NoBracket(format!(
            "h({lo:.6e}) = {h_lo:.3e}, h({hi:.6e}) = {h_hi:.3e}; expected a sign change from - to +"
        )));
    }
    let mut iterations = 0;
    while iterations < MAX_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        iterations += 1;
        if red.h(mid)? < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let s = if red.h(lo)?.abs() <= red.h(hi)?.abs() { lo } else { hi };
    let outflow = params.recruitment - params.mu * s;
    let e = outflow / (params.mu + params.alpha);
    let j = d_bar * outflow;
    let res = residuals(params, k, s, e, j)?;
    if res.iter().any(|r| !(*r <= RESIDUAL_TOL)) {
        return Err(Error::Solver(format!(
            "endemic residuals {res:?} exceed {RESIDUAL_TOL:e} at S = {s}"
        )));
    }
    report.solver_iterations = iterations;
    report.endemic = Some(EndemicPoint {
        s,
        e,
        j,
        residuals: res,
    });
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepPoint {
    pub scale: f64,
    #[serde(rename = "R0")]
    pub r0: f64,
    pub endemic: Option<EndemicPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThresholdScan {
    pub points: Vec<SweepPoint>,
    /// Scale at which `R0 = 1`, when the range brackets it.
    pub critical_scale: Option<f64>,
}

/// `n` evenly spaced scales on `[lo, hi]` (inclusive).
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n)
            .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
            .collect(),
    }
}

/// Scale at which `R0 = 1`, by bisection in log-scale on `[lo, hi]`.
/// `None` when the range does not bracket the threshold.
pub fn critical_scale(params: &ModelParams, grid: &Grid, lo: f64, hi: f64) -> Result<Option<f64>> {
    if !(lo > 0.0 && hi > lo && hi.is_finite()) {
        return Err(Error::config(format!("scale range [{lo}, {hi}] must be positive and increasing")));
    }
    let k = kernel_moment(params, grid);
    let r0_at = |scale: f64| r0_with_moment(&params.with_incidence_scale(scale), k);
    let (r_lo, r_hi) = (r0_at(lo)?, r0_at(hi)?);
    if (r_lo - 1.0) * (r_hi - 1.0) > 0.0 {
        return Ok(None);
    }
    let increasing = r_hi >= r_lo;
    let (mut a, mut b) = (lo.ln(), hi.ln());
    for _ in 0..MAX_BISECTIONS {
        if (b - a).abs() <= CRITICAL_SCALE_TOL {
            break;
        }
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            break;
        }
        let above = r0_at(mid.exp())? > 1.0;
        if above == increasing {
            b = mid;
        } else {
            a = mid;
        }
    }
    Ok(Some((0.5 * (a + b)).exp()))
}

/// `R0` and the endemic point at each scale of the incidence, plus the
/// critical scale. Points are solved in parallel on the current rayon pool.
pub fn threshold_scan(params: &ModelParams, grid: &Grid, scales: &[f64]) -> Result<ThresholdScan> {
    if scales.iter().any(|s| !(*s >= 0.0) || !s.is_finite()) {
        return Err(Error::config("sweep scales must be finite and nonnegative"));
    }
    let points = scales
        .par_iter()
        .map(|&scale| {
            let rep = solve_endemic(&params.with_incidence_scale(scale), grid)?;
            Ok(SweepPoint {
                scale,
                r0: rep.r0,
                endemic: rep.endemic,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let positive: Vec<f64> = scales.iter().copied().filter(|s| *s > 0.0).collect();
    let critical = match (
        positive.iter().copied().reduce(f64::min),
        positive.iter().copied().reduce(f64::max),
    ) {
        (Some(lo), Some(hi)) if hi > lo => critical_scale(params, grid, lo, hi)?,
        _ => None,
    };
    Ok(ThresholdScan {
        points,
        critical_scale: critical,
    })
}
