//! One-step transition laws of the controlled Bloch-length dynamics.
//!
//! Two controls are available. With `u = 0` (feedback holding the state
//! orthogonal to the measurement axis) the radius relaxes deterministically
//! towards `sqrt(eta)`. With `u = 1` (state aligned with the measurement
//! axis) the signed projection `z` follows the exactly solvable QND
//! diffusion, `z(t) = tanh(a W + atanh z0)` with `a = sqrt(2 k eta)` and `W`
//! a two-component Gaussian mixture.
//!
//! Kernels are stored as per-row probability masses on the radial grid.
//! Each row is normalised to one.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use statrs::function::erf::erfc;

use crate::config::SolveConfig;
use crate::error::{Error, Result};
use crate::policy::Control;

/// Row-sum tolerance every kernel must meet.
pub const ROW_SUM_TOL: f64 = 1e-12;

/// Largest fraction of the delta surrogate's lattice mass that may fall
/// outside `[0, 1]` before the row switches to a two-point split.
const EDGE_LEAK_TOL: f64 = 1e-6;

/// Gaussian weights below `exp(-GAUSS_CUTOFF^2 / 2)` underflow anyway.
const GAUSS_CUTOFF: f64 = 40.0;

/// Efficiency and strength of the continuous measurement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Measurement {
    pub eta: f64,
    pub k: f64,
}

impl From<&SolveConfig> for Measurement {
    fn from(cfg: &SolveConfig) -> Self {
        Self {
            eta: cfg.eta(),
            k: cfg.k(),
        }
    }
}

impl Measurement {
    pub fn new(eta: f64, k: f64) -> Self {
        Self { eta, k }
    }

    /// `sqrt(2 k eta)`.
    pub fn backaction(&self) -> f64 {
        (2.0 * self.k * self.eta).sqrt()
    }

    /// Deterministic radius after `dt` under continuous `u = 0` feedback:
    /// `sqrt(eta - (eta - r^2) exp(-2 k dt))`.
    pub fn propagate_u0(&self, r_prev: f64, dt: f64) -> f64 {
        let fixed = self.eta.sqrt();
        if r_prev == fixed {
            return fixed;
        }
        let gap = self.eta - r_prev * r_prev;
        // r^2 + gap (1 - e^{-2k dt}), with expm1 for small steps.
        let r2 = r_prev * r_prev - gap * (-2.0 * self.k * dt).exp_m1();
        let (lo, hi) = if r_prev < fixed {
            (r_prev, fixed)
        } else {
            (fixed, r_prev)
        };
        r2.max(0.0).sqrt().clamp(lo, hi)
    }

    /// Law of the noise integral `W` after `dt` starting from `z0`.
    pub fn w_mixture(&self, z0: f64, dt: f64) -> WMixture {
        let z0 = z0.clamp(-1.0, 1.0);
        WMixture {
            plus_weight: 0.5 * (1.0 + z0),
            minus_weight: 0.5 * (1.0 - z0),
            mean: self.backaction() * dt,
            variance: dt,
        }
    }

    /// Signed projection after a noise integral `w`: `tanh(a w + atanh z0)`.
    /// The poles `z0 = +-1` are absorbing.
    pub fn z_update(&self, z0: f64, w: f64) -> f64 {
        if z0 >= 1.0 {
            return 1.0;
        }
        if z0 <= -1.0 {
            return -1.0;
        }
        (self.backaction() * w + z0.atanh()).tanh()
    }

    /// Noise integral that carries `z0` to `z`. Infinite at the poles.
    fn w_of_z(&self, z0_atanh: f64, z: f64) -> f64 {
        if z >= 1.0 {
            f64::INFINITY
        } else if z <= -1.0 {
            f64::NEG_INFINITY
        } else {
            (z.atanh() - z0_atanh) / self.backaction()
        }
    }

    /// Exact draw of `z(t0 + dt)` under `u = 1`.
    pub fn sample_step_u1<R: Rng + ?Sized>(&self, z0: f64, dt: f64, rng: &mut R) -> f64 {
        if self.eta == 0.0 || z0.abs() >= 1.0 {
            // Keep the RNG stream aligned with the generic branch.
            let _: f64 = rng.random();
            let _: f64 = rng.sample(StandardNormal);
            return z0.clamp(-1.0, 1.0);
        }
        let w = self.w_mixture(z0, dt).sample(rng);
        self.z_update(z0, w)
    }

    /// Cell masses of the signed projection after `dt`, on the cells of the
    /// signed grid `z_j = -1 + j dr`, `j = 0 .. 2N-2`. Cell edges sit at the
    /// midpoints between grid values; the outer cells end at `+-1`.
    pub fn signed_cell_masses(&self, z0: f64, dt: f64, points: usize) -> Vec<f64> {
        let cells = 2 * points - 1;
        let h = 1.0 / (points - 1) as f64;
        let mut out = vec![0.0; cells];
        if self.eta == 0.0 || z0 >= 1.0 || z0 <= -1.0 {
            let j = ((z0.clamp(-1.0, 1.0) + 1.0) / h).round() as usize;
            out[j.min(cells - 1)] = 1.0;
            return out;
        }
        let mix = self.w_mixture(z0, dt);
        let z0_atanh = z0.atanh();
        // 2N interior edges plus the two poles.
        let edge_tails: Vec<MixtureTails> = (0..=cells)
            .map(|e| {
                let z = if e == 0 {
                    -1.0
                } else if e == cells {
                    1.0
                } else {
                    -1.0 + (e as f64 - 0.5) * h
                };
                mix.tails(self.w_of_z(z0_atanh, z))
            })
            .collect();
        for (j, m) in out.iter_mut().enumerate() {
            *m = mix.interval_mass(&edge_tails[j], &edge_tails[j + 1]);
        }
        out
    }
}

/// Two-component Gaussian mixture for the noise integral `W`: weight
/// `(1 + z0) / 2` at mean `+a dt`, weight `(1 - z0) / 2` at mean `-a dt`,
/// both with variance `dt`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WMixture {
    pub plus_weight: f64,
    pub minus_weight: f64,
    pub mean: f64,
    pub variance: f64,
}

/// Lower and upper tail probabilities of one standard normal at one point.
#[derive(Debug, Clone, Copy)]
struct Tails {
    lower: f64,
    upper: f64,
    standardized: f64,
}

impl Tails {
    fn at(s: f64) -> Self {
        if s == f64::INFINITY {
            return Self {
                lower: 1.0,
                upper: 0.0,
                standardized: s,
            };
        }
        if s == f64::NEG_INFINITY {
            return Self {
                lower: 0.0,
                upper: 1.0,
                standardized: s,
            };
        }
        // Evaluate the small tail directly; the other is its complement.
        if s < 0.0 {
            let lower = 0.5 * erfc(-s / std::f64::consts::SQRT_2);
            Self {
                lower,
                upper: 1.0 - lower,
                standardized: s,
            }
        } else {
            let upper = 0.5 * erfc(s / std::f64::consts::SQRT_2);
            Self {
                lower: 1.0 - upper,
                upper,
                standardized: s,
            }
        }
    }

    /// `P(a < X <= b)` for `a = self`, `b = hi`.
    fn mass_to(&self, hi: &Tails) -> f64 {
        let m = if self.standardized >= 0.0 {
            self.upper - hi.upper
        } else {
            hi.lower - self.lower
        };
        m.max(0.0)
    }
}

#[derive(Debug, Clone, Copy)]
struct MixtureTails {
    plus: Tails,
    minus: Tails,
}

impl WMixture {
    pub fn std_dev(&self) -> f64 {
        self.variance.sqrt()
    }

    pub fn pdf(&self, w: f64) -> f64 {
        let sd = self.std_dev();
        let norm = 1.0 / (sd * (2.0 * std::f64::consts::PI).sqrt());
        let gp = (-(w - self.mean).powi(2) / (2.0 * self.variance)).exp();
        let gm = (-(w + self.mean).powi(2) / (2.0 * self.variance)).exp();
        norm * (self.plus_weight * gp + self.minus_weight * gm)
    }

    pub fn cdf(&self, w: f64) -> f64 {
        let t = self.tails(w);
        self.plus_weight * t.plus.lower + self.minus_weight * t.minus.lower
    }

    fn tails(&self, w: f64) -> MixtureTails {
        let sd = self.std_dev();
        MixtureTails {
            plus: Tails::at((w - self.mean) / sd),
            minus: Tails::at((w + self.mean) / sd),
        }
    }

    fn interval_mass(&self, lo: &MixtureTails, hi: &MixtureTails) -> f64 {
        self.plus_weight * lo.plus.mass_to(&hi.plus)
            + self.minus_weight * lo.minus.mass_to(&hi.minus)
    }

    /// Picks a component by weight, then draws from it.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let pick: f64 = rng.random();
        let n: f64 = rng.sample(StandardNormal);
        let centre = if pick < self.plus_weight {
            self.mean
        } else {
            -self.mean
        };
        centre + self.std_dev() * n
    }
}

/// Contiguous support of one kernel row.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelRow {
    start: usize,
    masses: Vec<f64>,
}

impl KernelRow {
    fn from_dense(dense: Vec<f64>) -> Self {
        let first = dense.iter().position(|&m| m != 0.0).unwrap_or(0);
        let last = dense.iter().rposition(|&m| m != 0.0).unwrap_or(0);
        Self {
            start: first,
            masses: dense[first..=last.max(first)].to_vec(),
        }
    }

    fn one_hot(i: usize) -> Self {
        Self {
            start: i,
            masses: vec![1.0],
        }
    }

    pub fn start(&self) -> usize {
        self.start
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    /// Mass at grid index `j` (zero outside the support).
    pub fn get(&self, j: usize) -> f64 {
        j.checked_sub(self.start)
            .and_then(|o| self.masses.get(o))
            .copied()
            .unwrap_or(0.0)
    }

    /// `sum_j values[j] * mass[j]`, accumulated in index order.
    pub fn expect(&self, values: &[f64]) -> f64 {
        self.masses
            .iter()
            .zip(&values[self.start..self.start + self.masses.len()])
            .map(|(m, v)| m * v)
            .sum()
    }

    pub fn dense(&self, n: usize) -> Vec<f64> {
        let mut out = vec![0.0; n];
        out[self.start..self.start + self.masses.len()].copy_from_slice(&self.masses);
        out
    }

    fn normalize(&mut self) {
        let total: f64 = self.masses.iter().sum();
        for m in &mut self.masses {
            *m /= total;
        }
    }
}

/// Per-step transition masses `P(r_j | r_i, u)` for every source point.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionKernel {
    control: Control,
    points: usize,
    rows: Vec<KernelRow>,
}

impl TransitionKernel {
    pub fn control(&self) -> Control {
        self.control
    }

    pub fn points(&self) -> usize {
        self.points
    }

    pub fn row(&self, i: usize) -> &KernelRow {
        &self.rows[i]
    }

    pub fn rows(&self) -> &[KernelRow] {
        &self.rows
    }

    /// One backward step: the expected next-step value from every source.
    pub fn apply(&self, values: &[f64]) -> Vec<f64> {
        assert_eq!(values.len(), self.points);
        self.rows.par_iter().map(|row| row.expect(values)).collect()
    }

    /// Checks nonnegativity and unit row sums within [`ROW_SUM_TOL`].
    pub fn check_stochastic(&self) -> Result<()> {
        for (i, row) in self.rows.iter().enumerate() {
            if let Some(bad) = row.masses.iter().find(|m| m.is_nan() || **m < 0.0) {
                return Err(Error::KernelNotStochastic {
                    control: self.control.value(),
                    row: i,
                    detail: format!("entry {bad}"),
                });
            }
            let sum: f64 = row.masses.iter().sum();
            if (sum - 1.0).abs() > ROW_SUM_TOL {
                return Err(Error::KernelNotStochastic {
                    control: self.control.value(),
                    row: i,
                    detail: format!("row sum {sum}"),
                });
            }
        }
        Ok(())
    }
}

/// Narrow-Gaussian surrogate for the deterministic `u = 0` map.
///
/// Row `i` is a Gaussian of width `sigma_delta` centred on
/// `propagate_u0(r_i)`, evaluated at the grid points and renormalised on
/// `[0, 1]`. When more than `EDGE_LEAK_TOL` of the lattice weight would fall
/// outside the domain, truncation would bias the row mean, so the centre is
/// split linearly between its two neighbouring grid points instead.
pub fn kernel_u0(cfg: &SolveConfig) -> TransitionKernel {
    let n = cfg.points();
    let grid = cfg.grid();
    let dr = cfg.dr();
    let sigma = cfg.sigma_delta();
    let dt = cfg.dt();
    let meas = Measurement::from(cfg);
    let reach = (GAUSS_CUTOFF * sigma / dr).ceil() as i64;
    let rows = grid
        .points()
        .par_iter()
        .map(|&r| {
            let centre = meas.propagate_u0(r, dt);
            let c_idx = (centre / dr).round() as i64;
            let mut inside = vec![0.0; n];
            let mut leaked = 0.0;
            let mut kept = 0.0;
            for j in (c_idx - reach)..=(c_idx + reach) {
                let x = j as f64 * dr - centre;
                let w = (-x * x / (2.0 * sigma * sigma)).exp();
                if j < 0 || j >= n as i64 {
                    leaked += w;
                } else {
                    inside[j as usize] = w;
                    kept += w;
                }
            }
            if leaked > EDGE_LEAK_TOL * (leaked + kept) {
                return two_point(centre, dr, n);
            }
            let mut row = KernelRow::from_dense(inside);
            row.normalize();
            row
        })
        .collect();
    TransitionKernel {
        control: Control::Feedback,
        points: n,
        rows,
    }
}

fn two_point(centre: f64, dr: f64, n: usize) -> KernelRow {
    let x = centre / dr;
    let lo = (x.floor() as usize).min(n - 1);
    let frac = x - lo as f64;
    if lo + 1 >= n || frac <= 0.0 {
        return KernelRow::one_hot(lo);
    }
    KernelRow {
        start: lo,
        masses: vec![1.0 - frac, frac],
    }
}

/// Exact folded `u = 1` kernel.
///
/// Row `i` is the law of `|z(dt)|` from `z0 = r_i`, integrated over each
/// radial cell in `W`-space. A cell at `r_j > 0` collects both `z = +r_j` and
/// `z = -r_j`; the zero cell is the single interval around `z = 0`.
pub fn kernel_u1(cfg: &SolveConfig) -> TransitionKernel {
    let n = cfg.points();
    let dt = cfg.dt();
    let meas = Measurement::from(cfg);
    let rows = cfg
        .grid()
        .points()
        .par_iter()
        .enumerate()
        .map(|(i, &r)| {
            if meas.eta == 0.0 || r >= 1.0 {
                return KernelRow::one_hot(i);
            }
            let signed = meas.signed_cell_masses(r, dt, n);
            let mut row = KernelRow::from_dense(fold(&signed, n));
            row.normalize();
            row
        })
        .collect();
    TransitionKernel {
        control: Control::NoFeedback,
        points: n,
        rows,
    }
}

/// Folds signed-grid cell masses onto the radial grid.
pub fn fold(signed: &[f64], points: usize) -> Vec<f64> {
    debug_assert_eq!(signed.len(), 2 * points - 1);
    let zero = points - 1;
    let mut out = vec![0.0; points];
    out[0] = signed[zero];
    for j in 1..points {
        out[j] = signed[zero + j] + signed[zero - j];
    }
    out
}

/// Both kernels for a configuration, validated.
#[derive(Debug, Clone)]
pub struct KernelPair {
    pub feedback: TransitionKernel,
    pub no_feedback: TransitionKernel,
}

impl KernelPair {
    pub fn build(cfg: &SolveConfig) -> Result<Self> {
        let pair = Self {
            feedback: kernel_u0(cfg),
            no_feedback: kernel_u1(cfg),
        };
        pair.feedback.check_stochastic()?;
        pair.no_feedback.check_stochastic()?;
        Ok(pair)
    }

    pub fn get(&self, u: Control) -> &TransitionKernel {
        match u {
            Control::Feedback => &self.feedback,
            Control::NoFeedback => &self.no_feedback,
        }
    }
}
