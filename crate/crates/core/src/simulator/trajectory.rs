use crate::discretize::{AgeProfile, Grid};

/// One recorded output row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub s: f64,
    pub e: f64,
    /// Total infectious density `∫i da`.
    pub i: f64,
    /// Removed class, including mass that aged past `a_max`.
    pub r: f64,
    pub n: f64,
    pub j: f64,
}

/// `S`, `E`, `J` at every time step (index = step).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DenseRecord {
    pub s: Vec<f64>,
    pub e: Vec<f64>,
    pub j: Vec<f64>,
}

impl DenseRecord {
    pub fn with_capacity(n: usize) -> Self {
        DenseRecord {
            s: Vec::with_capacity(n),
            e: Vec::with_capacity(n),
            j: Vec::with_capacity(n),
        }
    }

    pub fn push(&mut self, s: f64, e: f64, j: f64) {
        self.s.push(s);
        self.e.push(e);
        self.j.push(j);
    }

    pub fn len(&self) -> usize {
        self.s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.s.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub grid: Grid,
    pub samples: Vec<Sample>,
    /// Step index of each sample.
    pub sample_steps: Vec<usize>,
    pub dense: DenseRecord,
    /// `prehistory[m] = E(−a_m)`; equivalent exposed history implied by the initial data.
    pub prehistory: Vec<f64>,
    pub snapshots: Vec<(f64, AgeProfile)>,
    pub clamp_events: usize,
    /// Total population at `t = 0`.
    pub n0: f64,
    /// Whether the initial data carry any infection.
    pub seeded: bool,
}

impl Trajectory {
    pub fn t_end(&self) -> f64 {
        self.grid.time(self.dense.len() - 1)
    }

    pub fn last(&self) -> &Sample {
        self.samples.last().expect("trajectory has at least one sample")
    }

    /// `E(t_step − a_j)` for `j = 0..=n_age`.
    pub fn e_history(&self, step: usize) -> Vec<f64> {
        (0..=self.grid.n_age)
            .map(|j| {
                if j <= step {
                    self.dense.e[step - j]
                } else {
                    self.prehistory[j - step]
                }
            })
            .collect()
    }

    /// First step at or after time `t`.
    pub fn step_at(&self, t: f64) -> usize {
        ((t / self.grid.dt) - 1e-9).ceil().max(0.0) as usize
    }
}
