//! Physical and numerical parameters shared by the solver and the simulator.

use crate::error::{Error, Result};

/// Default horizon used throughout the reproduction recipes.
pub const DEFAULT_HORIZON: f64 = 1.5;
/// Default time step.
pub const DEFAULT_DT: f64 = 0.005;
/// Default radial spacing.
pub const DEFAULT_DR: f64 = 0.001;

/// Measurement efficiency, strength, horizon and grid resolution.
///
/// The time step and radial spacing are derived from the step and point
/// counts, so `dt() * steps == horizon` and `dr() * (points - 1) == 1` hold
/// up to a single rounding.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveConfig {
    eta: f64,
    k: f64,
    horizon: f64,
    steps: usize,
    points: usize,
    sigma_delta: f64,
    seed: u64,
}

impl SolveConfig {
    /// Builds a configuration from step and point counts. `sigma_delta`
    /// starts at the radial spacing.
    pub fn new(eta: f64, k: f64, horizon: f64, steps: usize, points: usize) -> Result<Self> {
        if !(0.0..=1.0).contains(&eta) {
            return Err(Error::Config(format!("eta must lie in [0, 1], got {eta}")));
        }
        if !(k > 0.0 && k.is_finite()) {
            return Err(Error::Config(format!("k must be positive, got {k}")));
        }
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::Config(format!("T must be positive, got {horizon}")));
        }
        if steps < 1 {
            return Err(Error::Config("at least one time step is required".into()));
        }
        if points < 2 {
            return Err(Error::Config("at least two radial points are required".into()));
        }
        Ok(Self {
            eta,
            k,
            horizon,
            steps,
            points,
            sigma_delta: 1.0 / (points - 1) as f64,
            seed: 0,
        })
    }

    /// Builds a configuration from a time step and radial spacing. Both must
    /// divide their domain into a whole number of pieces.
    pub fn from_resolution(eta: f64, k: f64, horizon: f64, dt: f64, dr: f64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) || !(dr > 0.0 && dr <= 1.0) {
            return Err(Error::Config(format!("invalid resolution dt={dt} dr={dr}")));
        }
        let steps = whole_divisions(horizon, dt)
            .ok_or_else(|| Error::Config(format!("dt={dt} does not divide T={horizon}")))?;
        let cells = whole_divisions(1.0, dr)
            .ok_or_else(|| Error::Config(format!("dr={dr} does not divide [0, 1]")))?;
        Self::new(eta, k, horizon, steps, cells + 1)
    }

    /// Default problem: k = 1, T = 1.5, dt = 0.005, dr = 0.001.
    pub fn with_defaults(eta: f64) -> Result<Self> {
        Self::from_resolution(eta, 1.0, DEFAULT_HORIZON, DEFAULT_DT, DEFAULT_DR)
    }

    pub fn with_sigma_delta(mut self, sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::Config(format!("sigma must be positive, got {sigma}")));
        }
        self.sigma_delta = sigma;
        Ok(self)
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// Same physics with the radial spacing halved.
    pub fn refined(&self) -> Self {
        let mut out = *self;
        out.points = 2 * (self.points - 1) + 1;
        out.sigma_delta = self.sigma_delta / 2.0;
        out
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn points(&self) -> usize {
        self.points
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    pub fn dr(&self) -> f64 {
        1.0 / (self.points - 1) as f64
    }

    pub fn sigma_delta(&self) -> f64 {
        self.sigma_delta
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Measurement-backaction rate `sqrt(2 k eta)`.
    pub fn backaction(&self) -> f64 {
        (2.0 * self.k * self.eta).sqrt()
    }

    /// Time of step `j`.
    pub fn time(&self, j: usize) -> f64 {
        j as f64 * self.dt()
    }

    pub fn grid(&self) -> RGrid {
        RGrid::new(self.points)
    }

    /// True when two configurations describe the same physics and grid.
    /// The seed is not compared.
    pub fn same_problem(&self, other: &SolveConfig) -> bool {
        self.eta == other.eta
            && self.k == other.k
            && self.horizon == other.horizon
            && self.steps == other.steps
            && self.points == other.points
            && self.sigma_delta == other.sigma_delta
    }
}

fn whole_divisions(length: f64, step: f64) -> Option<usize> {
    let ratio = length / step;
    let n = ratio.round();
    if n < 1.0 || (ratio - n).abs() > 1e-9 * n.max(1.0) {
        return None;
    }
    Some(n as usize)
}

/// Uniform radial grid `r_i = i / (N - 1)` on `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RGrid {
    points: Vec<f64>,
}

impl RGrid {
    pub fn new(n: usize) -> Self {
        assert!(n >= 2, "radial grid needs at least two points");
        let last = (n - 1) as f64;
        // i / (N-1) rather than i * dr so the last point is exactly 1.
        let points = (0..n).map(|i| i as f64 / last).collect();
        Self { points }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn spacing(&self) -> f64 {
        1.0 / (self.points.len() - 1) as f64
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn get(&self, i: usize) -> f64 {
        self.points[i]
    }

    /// Index of the grid point nearest to `r`, clamped into the grid.
    pub fn nearest(&self, r: f64) -> usize {
        let last = self.points.len() - 1;
        let x = (r * last as f64).round();
        if x <= 0.0 {
            0
        } else {
            (x as usize).min(last)
        }
    }
}
