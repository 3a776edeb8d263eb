//! Independent Bloch-plane integrator used to cross-check the scalar
//! reduction.
//!
//! For a measurement of `sigma_z / 2` the in-plane components obey
//!
//! ```text
//! dx = -k x dt - a x z dW
//! dz =  a (1 - z^2) dW,          a = sqrt(2 k eta)
//! ```
//!
//! which is integrated here with Euler-Maruyama. Feedback is a rigid rotation
//! applied before every inner step: `u = 0` puts the vector on the `x` axis,
//! `u = 1` on the nearer pole of the `z` axis (a no-op when `x = 0`).

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use super::noise::NoiseStream;
use crate::config::SolveConfig;
use crate::error::{Error, Result};
use crate::policy::{Control, Strategy};

/// Inner Euler steps per control step.
pub const DEFAULT_INNER_STEPS: usize = 10;

/// Overshoot of `r` beyond 1 that is projected back onto the unit circle.
/// Euler steps overshoot by `O(k eta h)` near the pure state, so this only
/// catches steps that are too coarse.
pub const DEFAULT_OVERSHOOT_TOL: f64 = 5e-2;

/// Oracle streams are disjoint from the exact sampler's streams.
const ORACLE_STREAM_FLAG: u64 = 1 << 63;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct XzOptions {
    pub inner_steps: usize,
    pub overshoot_tol: f64,
}

impl Default for XzOptions {
    fn default() -> Self {
        Self {
            inner_steps: DEFAULT_INNER_STEPS,
            overshoot_tol: DEFAULT_OVERSHOOT_TOL,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct XzTrajectory {
    pub x_path: Vec<f64>,
    pub z_path: Vec<f64>,
    pub r_path: Vec<f64>,
    pub u_path: Vec<Control>,
}

fn align(u: Control, x: f64, z: f64) -> (f64, f64) {
    let r = x.hypot(z);
    match u {
        Control::Feedback => (r, 0.0),
        Control::NoFeedback if x == 0.0 => (x, z),
        Control::NoFeedback => (0.0, if z < 0.0 { -r } else { r }),
    }
}

pub fn simulate_xz_oracle(
    strategy: &Strategy,
    x0: f64,
    z0: f64,
    cfg: &SolveConfig,
    noise: &NoiseStream,
    opts: XzOptions,
) -> Result<XzTrajectory> {
    if x0.hypot(z0) > 1.0 {
        return Err(Error::Config(format!("initial state ({x0}, {z0}) lies outside the unit disc")));
    }
    if opts.inner_steps == 0 {
        return Err(Error::Config("inner_steps must be at least 1".into()));
    }
    let m = cfg.steps();
    let k = cfg.k();
    let a = cfg.backaction();
    let h = cfg.dt() / opts.inner_steps as f64;
    let sqrt_h = h.sqrt();
    let (mut x, mut z) = (x0, z0);
    let mut out = XzTrajectory {
        x_path: vec![x],
        z_path: vec![z],
        r_path: vec![x.hypot(z)],
        u_path: Vec::with_capacity(m),
    };
    for j in 0..m {
        let u = strategy.decide(x.hypot(z), cfg.time(j))?;
        let mut rng = noise.step(j);
        for _ in 0..opts.inner_steps {
            (x, z) = align(u, x, z);
            let dw = sqrt_h * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng);
            let nx = x - k * x * h - a * x * z * dw;
            let nz = z + a * (1.0 - z * z) * dw;
            let r = nx.hypot(nz);
            if r > 1.0 + opts.overshoot_tol {
                return Err(Error::Integration { step: j, r });
            }
            (x, z) = if r > 1.0 { (nx / r, nz / r) } else { (nx, nz) };
        }
        out.x_path.push(x);
        out.z_path.push(z);
        out.r_path.push(x.hypot(z));
        out.u_path.push(u);
    }
    Ok(out)
}

/// Final states of an oracle ensemble.
#[derive(Debug, Clone, PartialEq)]
pub struct XzEnsemble {
    pub final_x: Vec<f64>,
    pub final_z: Vec<f64>,
    pub final_r: Vec<f64>,
}

pub fn run_xz_ensemble(
    strategy: &Strategy,
    x0: f64,
    z0: f64,
    cfg: &SolveConfig,
    n: usize,
    opts: XzOptions,
) -> Result<XzEnsemble> {
    let finals: Vec<(f64, f64)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let noise = NoiseStream::new(cfg.seed(), ORACLE_STREAM_FLAG | i as u64);
            let t = simulate_xz_oracle(strategy, x0, z0, cfg, &noise, opts)?;
            Ok((*t.x_path.last().unwrap(), *t.z_path.last().unwrap()))
        })
        .collect::<Result<_>>()?;
    let (final_x, final_z): (Vec<f64>, Vec<f64>) = finals.into_iter().unzip();
    let final_r = final_x.iter().zip(&final_z).map(|(x, z)| x.hypot(*z)).collect();
    Ok(XzEnsemble {
        final_x,
        final_z,
        final_r,
    })
}
