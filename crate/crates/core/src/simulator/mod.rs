//! Time integration: exact transport of `i` along characteristics, kernel
//! quadrature for `J`, and Heun steps for `(S, E)`.
//!
//! One step from `t` to `t + dt`:
//! 1. `J(t)` from the current profile;
//! 2. shift and decay the profile, predict `E(t+dt)` with an Euler step and
//!    use it as the provisional boundary value to estimate `J(t+dt)`;
//! 3. correct `(S, E)` with the averaged slopes;
//! 4. set the boundary node to `α E(t+dt)`.
//!
//! Steps 2–4 keep `i(t, 0) = α E(t)` at the new time level, so both
//! equilibria are fixed points of the discrete map.

mod trajectory;

pub use trajectory::{DenseRecord, Sample, Trajectory};

use crate::discretize::{trapezoid, AgeProfile, Grid, KernelQuadrature};
use crate::error::{Error, Result};
use crate::model::ModelParams;

/// Abort when a state component exceeds this multiple of `N̄`.
pub const BLOW_UP_FACTOR: f64 = 1e3;
/// Abort after this many negative undershoots clamped to zero.
pub const MAX_CLAMP_EVENTS: usize = 100;

/// Initial infection data: either an age profile or an exposed history.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialSource {
    /// `i(0, a_j)` on the grid.
    Profile(AgeProfile),
    /// `φ(−a_j) = E(−a_j)` for `j = 0..=n_age`.
    History(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct InitialData {
    pub s0: f64,
    /// `E(0)`. Defaults to `i₀(0)/α` for a profile and `φ(0)` for a history.
    pub e0: Option<f64>,
    pub source: InitialSource,
}

impl InitialData {
    pub fn from_profile(s0: f64, e0: Option<f64>, profile: AgeProfile) -> Self {
        InitialData {
            s0,
            e0,
            source: InitialSource::Profile(profile),
        }
    }

    pub fn from_history(s0: f64, history: Vec<f64>) -> Self {
        InitialData {
            s0,
            e0: None,
            source: InitialSource::History(history),
        }
    }

    /// Disease-free initial state with susceptible density `s0`.
    pub fn disease_free(s0: f64, grid: &Grid) -> Self {
        Self::from_profile(s0, Some(0.0), AgeProfile::zeros(grid))
    }

    /// The same data on the grid with half the step, by linear interpolation
    /// between nodes (which keeps trapezoid masses unchanged).
    pub fn refined(&self, grid: &Grid) -> Result<Self> {
        let halve = |v: &[f64]| -> Result<Vec<f64>> {
            if v.len() != grid.n_age + 1 {
                return Err(Error::config(format!(
                    "initial data have {} nodes, the grid has {}",
                    v.len(),
                    grid.n_age + 1
                )));
            }
            let mut out = Vec::with_capacity(2 * v.len() - 1);
            for w in v.windows(2) {
                out.push(w[0]);
                out.push(0.5 * (w[0] + w[1]));
            }
            out.push(v[v.len() - 1]);
            Ok(out)
        };
        let source = match &self.source {
            InitialSource::Profile(p) => InitialSource::Profile(AgeProfile {
                values: halve(&p.values)?,
            }),
            InitialSource::History(h) => InitialSource::History(halve(&h[..h.len().min(grid.n_age + 1)])?),
        };
        Ok(InitialData {
            s0: self.s0,
            e0: self.e0,
            source,
        })
    }
}

/// Initial data converted to the state the integrator starts from.
#[derive(Debug, Clone)]
pub struct ResolvedInit {
    pub s0: f64,
    pub e0: f64,
    pub profile: AgeProfile,
    /// `E(−a_m)` for `m = 0..=n_age`.
    pub prehistory: Vec<f64>,
}

impl ResolvedInit {
    /// Some infection is present initially.
    pub fn seeded(&self) -> bool {
        self.e0 > 0.0 || self.profile.any_positive()
    }
}

fn check_density(name: &str, v: f64) -> Result<()> {
    if !v.is_finite() || v < 0.0 {
        return Err(Error::config(format!("{name} must be finite and nonnegative, got {v}")));
    }
    Ok(())
}

/// `i(0, a) = α φ(−a) e^{-μa} Γ(a)` at the grid nodes.
pub fn history_to_profile(history: &[f64], params: &ModelParams, grid: &Grid) -> Result<AgeProfile> {
    if history.len() < grid.n_age + 1 {
        return Err(Error::config(format!(
            "history covers {} nodes, a_max needs {}",
            history.len(),
            grid.n_age + 1
        )));
    }
    let k = &params.kernels;
    let values = history[..=grid.n_age]
        .iter()
        .enumerate()
        .map(|(j, &phi)| {
            let a = grid.age(j);
            params.alpha * phi * (-(params.mu * a) - k.recovery_hazard(a)).exp()
        })
        .collect();
    Ok(AgeProfile { values })
}

/// Shift the profile one node along the characteristics and set the boundary
/// node to `α E` at the new time level. Mass beyond `a_max` is dropped.
pub fn transport_step(profile: &AgeProfile, e_new: f64, params: &ModelParams, grid: &Grid) -> Result<AgeProfile> {
    profile.check(grid)?;
    let mut out = vec![0.0; grid.n_age + 1];
    for j in 0..grid.n_age {
        let factor = params
            .kernels
            .decay_between(grid.age(j), grid.age(j + 1), params.mu);
        out[j + 1] = profile.values[j] * factor;
    }
    out[0] = params.alpha * e_new;
    Ok(AgeProfile { values: out })
}

/// Result of one Heun step for `(S, E)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdeStep {
    pub s: f64,
    pub e: f64,
    /// Components clamped at zero in this step.
    pub clamped: usize,
}

fn slopes(s: f64, e: f64, j: f64, params: &ModelParams) -> Result<(f64, f64)> {
    let f = params.incidence.eval(s.max(0.0), j.max(0.0))?;
    Ok((
        params.recruitment - params.mu * s - f,
        f - (params.mu + params.alpha) * e,
    ))
}

/// Euler predictor for `(S, E)` with force `j_now`.
pub fn ode_predict(s: f64, e: f64, j_now: f64, params: &ModelParams, dt: f64) -> Result<(f64, f64)> {
    let (ds, de) = slopes(s, e, j_now, params)?;
    Ok(((s + dt * ds).max(0.0), (e + dt * de).max(0.0)))
}

/// One explicit trapezoidal (Heun) step of the `(S, E)` equations with the
/// force of infection `j_now` at the start and `j_next_est` at the end.
pub fn ode_step(
    s: f64,
    e: f64,
    j_now: f64,
    j_next_est: f64,
    params: &ModelParams,
    dt: f64,
) -> Result<OdeStep> {
    let (ds0, de0) = slopes(s, e, j_now, params)?;
    let (sp, ep) = ((s + dt * ds0).max(0.0), (e + dt * de0).max(0.0));
    let (ds1, de1) = slopes(sp, ep, j_next_est, params)?;
    let mut s1 = s + 0.5 * dt * (ds0 + ds1);
    let mut e1 = e + 0.5 * dt * (de0 + de1);
    let mut clamped = 0;
    if s1 < 0.0 {
        s1 = 0.0;
        clamped += 1;
    }
    if e1 < 0.0 {
        e1 = 0.0;
        clamped += 1;
    }
    Ok(OdeStep { s: s1, e: e1, clamped })
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SimOptions {
    /// Record a sample every this many steps (the final step is always recorded).
    pub sample_every: usize,
    /// Times at which to keep the full age profile.
    pub snapshot_times: Vec<f64>,
}

impl SimOptions {
    pub fn every(sample_every: usize) -> Self {
        SimOptions {
            sample_every,
            snapshot_times: Vec::new(),
        }
    }
}

/// Integrator bound to one parameter set and grid.
#[derive(Debug, Clone)]
pub struct Simulator {
    pub params: ModelParams,
    pub grid: Grid,
    pub quad: KernelQuadrature,
    gamma_nodes: Vec<f64>,
}

impl Simulator {
    pub fn new(params: ModelParams, grid: Grid) -> Self {
        let quad = KernelQuadrature::new(&params.kernels, params.mu, &grid);
        let gamma_nodes = grid.ages().map(|a| params.kernels.gamma.eval(a)).collect();
        Simulator {
            params,
            grid,
            quad,
            gamma_nodes,
        }
    }

    pub fn n_bar(&self) -> f64 {
        self.params.n_bar()
    }

    pub fn resolve(&self, init: &InitialData) -> Result<ResolvedInit> {
        let grid = &self.grid;
        let alpha = self.params.alpha;
        check_density("S0", init.s0)?;
        let (profile, e0, prehistory) = match &init.source {
            InitialSource::Profile(p) => {
                p.check(grid)?;
                for (j, &v) in p.values.iter().enumerate() {
                    check_density(&format!("i0 at node {j}"), v)?;
                }
                let e0 = init.e0.unwrap_or(p.values[0] / alpha);
                let pre = p
                    .values
                    .iter()
                    .zip(&self.quad.discount)
                    .map(|(v, d)| if *d > 0.0 { v / (alpha * d) } else { 0.0 })
                    .collect::<Vec<_>>();
                (p.clone(), e0, pre)
            }
            InitialSource::History(h) => {
                for (j, &v) in h.iter().enumerate() {
                    check_density(&format!("history at node {j}"), v)?;
                }
                let profile = history_to_profile(h, &self.params, grid)?;
                if let Some(e0) = init.e0 {
                    if e0 != h[0] {
                        return Err(Error::config(format!(
                            "E0 = {e0} disagrees with the history value phi(0) = {}",
                            h[0]
                        )));
                    }
                }
                (profile, h[0], h[..=grid.n_age].to_vec())
            }
        };
        check_density("E0", e0)?;
        let mut prehistory = prehistory;
        prehistory[0] = e0;
        Ok(ResolvedInit {
            s0: init.s0,
            e0,
            profile,
            prehistory,
        })
    }

    /// Removal flux `∫γ i da + i(t, a_max)`; the second term is the mass
    /// leaving the age window, booked as removed so `N' = A − μN` stays closed.
    fn removal_flux(&self, profile: &[f64]) -> f64 {
        let weighted: Vec<f64> = profile
            .iter()
            .zip(&self.gamma_nodes)
            .map(|(i, g)| i * g)
            .collect();
        trapezoid(&weighted, self.grid.da) + profile[self.grid.n_age]
    }

    pub fn simulate(&self, init: &InitialData, opts: &SimOptions) -> Result<Trajectory> {
        let start = self.resolve(init)?;
        self.run(start, opts)
    }

    pub fn run(&self, start: ResolvedInit, opts: &SimOptions) -> Result<Trajectory> {
        let grid = self.grid;
        let p = &self.params;
        let dt = grid.dt;
        let n = grid.n_age;
        let n_bar = p.n_bar();
        let limit = BLOW_UP_FACTOR * n_bar;
        let sample_every = opts.sample_every.max(1);
        let mut snapshot_steps: Vec<(usize, f64)> = opts
            .snapshot_times
            .iter()
            .map(|&t| (((t / dt).round().max(0.0) as usize).min(grid.n_steps), t))
            .collect();
        snapshot_steps.sort_by_key(|s| s.0);

        let seeded = start.seeded();
        let mut profile = start.profile.values;
        let mut next = vec![0.0; n + 1];
        let (mut s, mut e, mut r) = (start.s0, start.e0, 0.0);
        let mut j = self.quad.force(&profile);
        let mut flux = self.removal_flux(&profile);
        let i0 = trapezoid(&profile, grid.da);
        let n0 = s + e + i0;

        let mut dense = DenseRecord::with_capacity(grid.n_steps + 1);
        let mut samples = Vec::with_capacity(grid.n_steps / sample_every + 2);
        let mut sample_steps = Vec::with_capacity(samples.capacity());
        let mut snapshots = Vec::new();
        let mut clamp_events = 0;

        let mut record = |step: usize, s: f64, e: f64, r: f64, j: f64, profile: &[f64]| {
            if step.is_multiple_of(sample_every) || step == grid.n_steps {
                let i = trapezoid(profile, grid.da);
                samples.push(Sample {
                    t: grid.time(step),
                    s,
                    e,
                    i,
                    r,
                    n: s + e + i + r,
                    j,
                });
                sample_steps.push(step);
            }
            while let Some(&(snap, t)) = snapshot_steps.first() {
                if snap != step {
                    break;
                }
                let _ = t;
                snapshots.push((grid.time(step), AgeProfile { values: profile.to_vec() }));
                snapshot_steps.remove(0);
            }
        };

        dense.push(s, e, j);
        record(0, s, e, r, j, &profile);

        for step in 1..=grid.n_steps {
            let t = grid.time(step - 1);
            let at_t = |err: Error| match err {
                Error::Evaluation { msg, .. } => Error::Evaluation { t, msg },
                other => other,
            };
            for m in 0..n {
                next[m + 1] = profile[m] * self.quad.transport[m];
            }
            next[0] = 0.0;
            let j_interior = self.quad.force(&next);
            let w0 = self.quad.profile_weights[0];

            let (_, e_pred) = ode_predict(s, e, j, p, dt).map_err(at_t)?;
            let j_est = j_interior + w0 * p.alpha * e_pred;
            let stepped = ode_step(s, e, j, j_est, p, dt).map_err(at_t)?;
            clamp_events += stepped.clamped;
            if clamp_events > MAX_CLAMP_EVENTS {
                return Err(Error::BlowUp {
                    t,
                    msg: format!("more than {MAX_CLAMP_EVENTS} negative undershoots; dt is too coarse"),
                });
            }
            next[0] = p.alpha * stepped.e;
            let j_next = j_interior + w0 * next[0];

            let flux_next = self.removal_flux(&next);
            let r_pred = r + dt * (flux - p.mu * r);
            let r_next = r + 0.5 * dt * (flux - p.mu * r + flux_next - p.mu * r_pred);

            std::mem::swap(&mut profile, &mut next);
            s = stepped.s;
            e = stepped.e;
            r = r_next;
            j = j_next;
            flux = flux_next;

            let t_new = grid.time(step);
            let infectious = trapezoid(&profile, grid.da);
            for (name, v) in [("S", s), ("E", e), ("I", infectious), ("R", r)] {
                if !v.is_finite() || v > limit {
                    return Err(Error::BlowUp {
                        t: t_new,
                        msg: format!("{name} = {v} exceeds {BLOW_UP_FACTOR}·N̄"),
                    });
                }
            }
            dense.push(s, e, j);
            record(step, s, e, r, j, &profile);
        }

        Ok(Trajectory {
            grid,
            samples,
            sample_steps,
            dense,
            prehistory: start.prehistory,
            snapshots,
            clamp_events,
            n0,
            seeded,
        })
    }

    /// Integrate the delay form, where `J(t) = α ∫ k(a) E(t−a) da` is taken
    /// directly from the exposed history. Used to cross-check the profile route.
    pub fn simulate_delay_form(&self, s0: f64, history: &[f64]) -> Result<DenseRecord> {
        let grid = self.grid;
        let p = &self.params;
        let n = grid.n_age;
        if history.len() < n + 1 {
            return Err(Error::config(format!(
                "history covers {} nodes, a_max needs {}",
                history.len(),
                n + 1
            )));
        }
        // window[j] = E(t − a_j)
        let mut window: Vec<f64> = history[..=n].to_vec();
        let (mut s, mut e) = (s0, window[0]);
        let w = &self.quad.history_weights;
        let mut j = p.alpha * self.quad.history_integral(&window);
        let mut dense = DenseRecord::with_capacity(grid.n_steps + 1);
        dense.push(s, e, j);
        for step in 1..=grid.n_steps {
            let t = grid.time(step - 1);
            window.rotate_right(1);
            window[0] = 0.0;
            let j_lagged = p.alpha * self.quad.history_integral(&window);
            let (_, e_pred) = ode_predict(s, e, j, p, grid.dt).map_err(|err| match err {
                Error::Evaluation { msg, .. } => Error::Evaluation { t, msg },
                other => other,
            })?;
            let stepped = ode_step(s, e, j, j_lagged + p.alpha * w[0] * e_pred, p, grid.dt)?;
            s = stepped.s;
            e = stepped.e;
            window[0] = e;
            j = j_lagged + p.alpha * w[0] * e;
            dense.push(s, e, j);
        }
        Ok(dense)
    }
}

/// Integrate one scenario.
pub fn simulate(init: &InitialData, params: &ModelParams, grid: &Grid, opts: &SimOptions) -> Result<Trajectory> {
    Simulator::new(params.clone(), *grid).simulate(init, opts)
}
