//! Age/time grids aligned for exact transport along characteristics, and
//! quadrature over infection age.

use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::model::AgeKernels;

/// Relative tolerance for `da` dividing `a_max`.
const DIVISIBILITY_TOL: f64 = 1e-9;
/// Gauss–Legendre points per smooth sub-interval in kernel integrals.
const GL_POINTS: usize = 8;

/// Uniform age grid with time step equal to the age step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub da: f64,
    pub dt: f64,
    pub n_age: usize,
    pub a_max: f64,
    pub t_end: f64,
    pub n_steps: usize,
}

impl Grid {
    /// Age of node `j`.
    pub fn age(&self, j: usize) -> f64 {
        j as f64 * self.da
    }

    pub fn ages(&self) -> impl Iterator<Item = f64> + '_ {
        (0..=self.n_age).map(|j| self.age(j))
    }

    pub fn time(&self, step: usize) -> f64 {
        step as f64 * self.dt
    }

    /// Same ages and horizon, half the step.
    pub fn refined(&self) -> Result<Grid> {
        make_grid(self.a_max, self.da / 2.0, self.t_end)
    }

    /// Same ages and step, different horizon.
    pub fn with_t_end(&self, t_end: f64) -> Result<Grid> {
        make_grid(self.a_max, self.da, t_end)
    }
}

pub fn make_grid(a_max: f64, da: f64, t_end: f64) -> Result<Grid> {
    if !(a_max > 0.0 && a_max.is_finite()) {
        return Err(Error::config(format!("a_max must be positive, got {a_max}")));
    }
    if !(da > 0.0 && da.is_finite()) {
        return Err(Error::config(format!("da must be positive, got {da}")));
    }
    if !(t_end > 0.0 && t_end.is_finite()) {
        return Err(Error::config(format!("t_end must be positive, got {t_end}")));
    }
    if da > a_max / 10.0 {
        return Err(Error::config(format!(
            "da = {da} is coarser than a_max/10 = {}",
            a_max / 10.0
        )));
    }
    let cells = a_max / da;
    let n_age = cells.round();
    if ((cells - n_age) / cells).abs() > DIVISIBILITY_TOL {
        return Err(Error::config(format!(
            "da = {da} does not divide a_max = {a_max} ({cells} cells)"
        )));
    }
    let steps = t_end / da;
    let n_steps = if ((steps - steps.round()) / steps).abs() <= DIVISIBILITY_TOL {
        steps.round()
    } else {
        steps.ceil()
    };
    Ok(Grid {
        da,
        dt: da,
        n_age: n_age as usize,
        a_max,
        t_end,
        n_steps: n_steps as usize,
    })
}

/// Density over infection age sampled at the grid nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct AgeProfile {
    pub values: Vec<f64>,
}

impl AgeProfile {
    pub fn zeros(grid: &Grid) -> Self {
        AgeProfile {
            values: vec![0.0; grid.n_age + 1],
        }
    }

    pub fn from_fn(grid: &Grid, f: impl Fn(f64) -> f64) -> Self {
        AgeProfile {
            values: grid.ages().map(f).collect(),
        }
    }

    pub fn check(&self, grid: &Grid) -> Result<()> {
        if self.values.len() != grid.n_age + 1 {
            return Err(Error::config(format!(
                "profile has {} nodes, grid needs {}",
                self.values.len(),
                grid.n_age + 1
            )));
        }
        Ok(())
    }

    pub fn is_nonnegative(&self) -> bool {
        self.values.iter().all(|v| *v >= 0.0)
    }

    pub fn any_positive(&self) -> bool {
        self.values.iter().any(|v| *v > 0.0)
    }
}

/// Composite trapezoid of `weight(a)·profile(a)` over `[0, a_max]`.
pub fn age_integral(profile: &AgeProfile, weight: impl Fn(f64) -> f64, grid: &Grid) -> Result<f64> {
    profile.check(grid)?;
    let mut acc = 0.0;
    for (j, &v) in profile.values.iter().enumerate() {
        if v.is_nan() {
            return Err(Error::Evaluation {
                t: f64::NAN,
                msg: format!("NaN in age profile at node {j}"),
            });
        }
        let c = if j == 0 || j == grid.n_age { 0.5 } else { 1.0 };
        acc += c * weight(grid.age(j)) * v;
    }
    Ok(acc * grid.da)
}

/// Plain trapezoid over node values with unit weight.
pub(crate) fn trapezoid(values: &[f64], h: f64) -> f64 {
    match values.len() {
        0 | 1 => 0.0,
        n => h * (0.5 * (values[0] + values[n - 1]) + values[1..n - 1].iter().sum::<f64>()),
    }
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
fn gauss_legendre() -> &'static [(f64, f64)] {
    static RULE: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    RULE.get_or_init(|| {
        let n = GL_POINTS;
        let mut rule = Vec::with_capacity(n);
        for i in 0..n {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=n {
                    let kf = k as f64;
                    let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                    p0 = p1;
                    p1 = p2;
                }
                dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            rule.push((x, 2.0 / ((1.0 - x * x) * dp * dp)));
        }
        rule
    })
}

/// `∫_lo^hi g`, split at `breaks` so each piece is smooth.
fn integrate_pieces(lo: f64, hi: f64, breaks: &[f64], g: &impl Fn(f64) -> f64) -> f64 {
    let mut acc = 0.0;
    let mut left = lo;
    for &b in breaks.iter().filter(|&&b| b > lo && b < hi) {
        acc += gl(left, b, g);
        left = b;
    }
    acc + gl(left, hi, g)
}

fn gl(lo: f64, hi: f64, g: &impl Fn(f64) -> f64) -> f64 {
    let half = 0.5 * (hi - lo);
    let mid = 0.5 * (hi + lo);
    gauss_legendre()
        .iter()
        .map(|&(x, w)| w * g(mid + half * x))
        .sum::<f64>()
        * half
}

/// Precomputed quadrature for integrals against the discounted kernel
/// `k(a) = β(a) e^{-μa} Γ(a)`.
///
/// The force of infection is closed with product integration: along
/// characteristics `i(t,a) = α E(t−a) e^{-μa} Γ(a)`, so the age-normalized
/// density `i/(e^{-μa}Γ)` is interpolated linearly between nodes and
/// integrated exactly against `β e^{-μa} Γ`. The rule is second order like
/// the trapezoid, but it reproduces `∫k` exactly, so the equilibria of the
/// discrete scheme coincide with those of the continuous model.
#[derive(Debug, Clone)]
pub struct KernelQuadrature {
    /// Weights acting on `i(t, a_j)` to give `J(t) = ∫β i`.
    pub profile_weights: Vec<f64>,
    /// Weights acting on a history `E(t − a_j)`: `∫k(a) E(t−a) da ≈ Σ w_j E(t − a_j)`.
    pub history_weights: Vec<f64>,
    /// `e^{-μ a_j} Γ(a_j)` at each node.
    pub discount: Vec<f64>,
    /// `∫_{a_j}^{a_max} k` at each node.
    pub tail: Vec<f64>,
    /// `K = ∫₀^{a_max} k`.
    pub moment: f64,
    /// Per-step transport factor `e^{-μ da} Γ(a_{j+1})/Γ(a_j)` for `j < n_age`.
    pub transport: Vec<f64>,
}

impl KernelQuadrature {
    pub fn new(kernels: &AgeKernels, mu: f64, grid: &Grid) -> Self {
        let n = grid.n_age;
        let da = grid.da;
        let breaks = kernels.breakpoints();
        let mut profile_weights = vec![0.0; n + 1];
        let mut cell_mass = vec![0.0; n];
        for m in 0..n {
            let (lo, hi) = (grid.age(m), grid.age(m + 1));
            // Left node's hat on this cell, with the kernel normalized to that node.
            let left = integrate_pieces(lo, hi, &breaks, &|a| {
                kernels.beta.eval(a) * kernels.decay_between(lo, a, mu) * (hi - a) / da
            });
            let right = integrate_pieces(lo, hi, &breaks, &|a| {
                kernels.beta.eval(a) * kernels.decay_between(hi, a, mu) * (a - lo) / da
            });
            profile_weights[m] += left;
            profile_weights[m + 1] += right;
            cell_mass[m] = integrate_pieces(lo, hi, &breaks, &|a| kernels.discounted_kernel(a, mu));
        }
        let discount: Vec<f64> = grid
            .ages()
            .map(|a| (-(mu * a) - kernels.recovery_hazard(a)).exp())
            .collect();
        let history_weights: Vec<f64> = profile_weights
            .iter()
            .zip(&discount)
            .map(|(w, d)| w * d)
            .collect();
        let mut tail = vec![0.0; n + 1];
        for m in (0..n).rev() {
            tail[m] = tail[m + 1] + cell_mass[m];
        }
        let transport = (0..n)
            .map(|j| kernels.decay_between(grid.age(j), grid.age(j + 1), mu))
            .collect();
        KernelQuadrature {
            profile_weights,
            history_weights,
            discount,
            moment: tail[0],
            tail,
            transport,
        }
    }

    /// `∫β(a) i(a) da` for a profile on the grid.
    pub fn force(&self, profile: &[f64]) -> f64 {
        self.profile_weights
            .iter()
            .zip(profile)
            .map(|(w, v)| w * v)
            .sum()
    }

    /// `∫k(a) E(t−a) da` for `history[j] = E(t − a_j)`.
    pub fn history_integral(&self, history: &[f64]) -> f64 {
        self.history_weights
            .iter()
            .zip(history)
            .map(|(w, v)| w * v)
            .sum()
    }
}

/// `K = ∫₀^{a_max} β(a) e^{-μa} Γ(a) da`.
pub fn discounted_kernel_moment(kernels: &AgeKernels, mu: f64, grid: &Grid) -> f64 {
    KernelQuadrature::new(kernels, mu, grid).moment
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::AgeFunction;

    fn kernels(beta: AgeFunction, gamma: AgeFunction) -> AgeKernels {
        AgeKernels::new(beta, gamma, 50.0).unwrap()
    }

    #[test]
    fn make_grid_examples() {
        let g = make_grid(50.0, 0.1, 200.0).unwrap();
        assert_eq!(g.n_age, 500);
        assert_eq!(g.dt, 0.1);
        assert_eq!(g.n_steps, 2000);
        assert!(matches!(make_grid(50.0, 0.3, 200.0), Err(Error::Config(_))));
        assert!(matches!(make_grid(50.0, 25.0, 200.0), Err(Error::Config(_))));
        assert!(make_grid(50.0, 0.0, 200.0).is_err());
        assert!(make_grid(50.0, 0.1, 0.0).is_err());
    }

    #[test]
    fn age_integral_examples() {
        let g = make_grid(50.0, 0.1, 1.0).unwrap();
        let one = AgeProfile::from_fn(&g, |_| 1.0);
        assert!((age_integral(&one, |_| 1.0, &g).unwrap() - 50.0).abs() < 1e-10);
        let lin = AgeProfile::from_fn(&g, |a| a);
        assert!((age_integral(&lin, |_| 1.0, &g).unwrap() - 1250.0).abs() < 1e-9);
        let exp = AgeProfile::from_fn(&g, |a| (-0.12 * a).exp());
        let exact = (1.0 - (-6.0f64).exp()) / 0.12;
        let got = age_integral(&exp, |_| 1.0, &g).unwrap();
        assert!(((got - exact) / exact).abs() <= 1e-4);
    }

    #[test]
    fn age_integral_rejects_nan_and_length_mismatch() {
        let g = make_grid(50.0, 0.1, 1.0).unwrap();
        let mut p = AgeProfile::zeros(&g);
        p.values[3] = f64::NAN;
        assert!(matches!(age_integral(&p, |_| 1.0, &g), Err(Error::Evaluation { .. })));
        let short = AgeProfile { values: vec![0.0; 10] };
        assert!(matches!(age_integral(&short, |_| 1.0, &g), Err(Error::Config(_))));
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        // 8 points are exact through degree 15.
        let v = gl(0.0, 2.0, &|x: f64| x.powi(15));
        assert!((v - 2f64.powi(16) / 16.0).abs() < 1e-9);
        let total: f64 = gauss_legendre().iter().map(|p| p.1).sum();
        assert!((total - 2.0).abs() < 1e-14);
    }

    #[test]
    fn moment_constant_kernels() {
        let g = make_grid(50.0, 0.1, 1.0).unwrap();
        let k = kernels(AgeFunction::constant(1.0), AgeFunction::constant(0.1));
        let exact = (1.0 - (-6.0f64).exp()) / 0.12;
        let got = discounted_kernel_moment(&k, 0.02, &g);
        assert!(((got - exact) / exact).abs() < 1e-13, "{got} vs {exact}");
        assert!((got - 8.312677).abs() < 1e-6);
    }

    #[test]
    fn moment_zero_beta() {
        let g = make_grid(50.0, 0.1, 1.0).unwrap();
        let k = kernels(AgeFunction::constant(0.0), AgeFunction::constant(0.1));
        assert_eq!(discounted_kernel_moment(&k, 0.02, &g), 0.0);
    }

    #[test]
    fn moment_without_recovery_tends_to_inverse_mu() {
        let k = AgeKernels::new(AgeFunction::constant(1.0), AgeFunction::constant(0.0), 2000.0).unwrap();
        let g = make_grid(2000.0, 1.0, 10.0).unwrap();
        let got = discounted_kernel_moment(&k, 0.02, &g);
        assert!((got - 50.0).abs() < 1e-9, "{got}");
    }

    #[test]
    fn moment_piecewise_gamma_off_grid_break() {
        // Break at 5.05 falls inside a cell.
        let g = make_grid(50.0, 0.1, 1.0).unwrap();
        let k = kernels(
            AgeFunction::constant(1.0),
            AgeFunction::piecewise(vec![5.05], vec![0.1, 0.2]),
        );
        let mu: f64 = 0.02;
        let b: f64 = 5.05;
        let first = (1.0 - (-(mu + 0.1) * b).exp()) / (mu + 0.1);
        let second = (-(mu + 0.1) * b).exp() * (1.0 - (-(mu + 0.2) * (50.0 - b)).exp()) / (mu + 0.2);
        let got = discounted_kernel_moment(&k, mu, &g);
        assert!(((got - first - second) / got).abs() < 1e-13);
    }

    #[test]
    fn weights_reproduce_kernel_shape_exactly() {
        let g = make_grid(50.0, 0.1, 1.0).unwrap();
        let k = kernels(AgeFunction::ExpDecay { scale: 2.0, rate: 0.3 }, AgeFunction::constant(0.1));
        let q = KernelQuadrature::new(&k, 0.02, &g);
        // A profile shaped like the discount reproduces K exactly.
        let j = q.force(&q.discount);
        assert!(((j - q.moment) / q.moment).abs() < 1e-13);
        assert!(((q.history_integral(&vec![1.0; g.n_age + 1]) - q.moment) / q.moment).abs() < 1e-13);
        assert_eq!(q.tail[g.n_age], 0.0);
        assert!(q.tail.windows(2).all(|w| w[0] >= w[1]));
    }
}
