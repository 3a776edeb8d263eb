//! Trajectory simulation with exact per-step transitions.

use rayon::prelude::*;

use super::noise::NoiseStream;
use crate::config::SolveConfig;
use crate::error::{Error, Result};
use crate::kernels::Measurement;
use crate::policy::{Control, ControlTable, Strategy};

/// Trajectories per work unit. Fixed, so results do not depend on the
/// number of worker threads.
const CHUNK: usize = 64;

/// One controlled purification run.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    /// Radius at `t_0 ..= t_M`.
    pub r_path: Vec<f64>,
    /// Control applied during each of the `M` steps.
    pub u_path: Vec<Control>,
}

impl Trajectory {
    pub fn final_r(&self) -> f64 {
        *self.r_path.last().expect("trajectory has at least one point")
    }
}

/// Runs `strategy` from `r0` for `cfg.steps()` steps. The strategy is
/// consulted once per step; `u = 0` steps are deterministic and `u = 1`
/// steps draw the exact noise integral and fold `z` onto `r = |z|`.
pub fn simulate_trajectory(
    strategy: &Strategy,
    r0: f64,
    cfg: &SolveConfig,
    noise: &NoiseStream,
) -> Result<Trajectory> {
    if !(0.0..=1.0).contains(&r0) {
        return Err(Error::Config(format!("r0 must lie in [0, 1], got {r0}")));
    }
    let meas = Measurement::from(cfg);
    let dt = cfg.dt();
    let m = cfg.steps();
    let mut r = r0;
    let mut r_path = Vec::with_capacity(m + 1);
    let mut u_path = Vec::with_capacity(m);
    r_path.push(r);
    for j in 0..m {
        let u = strategy.decide(r, cfg.time(j))?;
        r = match u {
            Control::Feedback => meas.propagate_u0(r, dt),
            Control::NoFeedback => meas.sample_step_u1(r, dt, &mut noise.step(j)).abs(),
        };
        assert!((0.0..=1.0).contains(&r), "radius {r} left [0, 1]");
        r_path.push(r);
        u_path.push(u);
    }
    Ok(Trajectory { r_path, u_path })
}

/// Ensemble statistics of many independent trajectories.
#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    pub n: usize,
    pub seed: u64,
    pub r0: f64,
    /// `<r(t_j)>` for `j = 0..=M`.
    pub mean_r: Vec<f64>,
    /// Standard error of `mean_r`.
    pub se_r: Vec<f64>,
    /// `1 - <r(T)>`.
    pub c_mc: f64,
    /// Standard error of `c_mc`.
    pub se_c: f64,
    /// `r(T)` of every trajectory, in trajectory order.
    pub final_r: Vec<f64>,
}

impl Ensemble {
    pub fn mean_final(&self) -> f64 {
        *self.mean_r.last().unwrap()
    }

    /// Standard error relative to `c_mc`.
    pub fn relative_se(&self) -> f64 {
        if self.c_mc == 0.0 {
            0.0
        } else {
            self.se_c / self.c_mc
        }
    }
}

struct Partial {
    sum: Vec<f64>,
    sum_sq: Vec<f64>,
    finals: Vec<f64>,
}

/// Runs `n` trajectories; trajectory `i` uses noise stream `i` of
/// `cfg.seed()`. With `n = 1` the standard errors are reported as zero.
pub fn run_ensemble(
    strategy: &Strategy,
    r0: f64,
    cfg: &SolveConfig,
    n: usize,
) -> Result<Ensemble> {
    if n == 0 {
        return Err(Error::Config("ensemble needs at least one trajectory".into()));
    }
    let seed = cfg.seed();
    let m = cfg.steps();
    // Deviations are accumulated about trajectory 0, which keeps
    // deterministic ensembles at exactly zero variance.
    let shift = simulate_trajectory(strategy, r0, cfg, &NoiseStream::new(seed, 0))?.r_path;
    let chunks: Vec<Partial> = (0..n.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| -> Result<Partial> {
            let mut p = Partial {
                sum: vec![0.0; m + 1],
                sum_sq: vec![0.0; m + 1],
                finals: Vec::with_capacity(CHUNK),
            };
            for i in c * CHUNK..((c + 1) * CHUNK).min(n) {
                let traj = simulate_trajectory(strategy, r0, cfg, &NoiseStream::new(seed, i as u64))?;
                for ((s, s2), (r, r_ref)) in p
                    .sum
                    .iter_mut()
                    .zip(p.sum_sq.iter_mut())
                    .zip(traj.r_path.iter().zip(&shift))
                {
                    let d = r - r_ref;
                    *s += d;
                    *s2 += d * d;
                }
                p.finals.push(traj.final_r());
            }
            Ok(p)
        })
        .collect::<Result<_>>()?;

    let mut sum = vec![0.0; m + 1];
    let mut sum_sq = vec![0.0; m + 1];
    let mut final_r = Vec::with_capacity(n);
    for p in chunks {
        for j in 0..=m {
            sum[j] += p.sum[j];
            sum_sq[j] += p.sum_sq[j];
        }
        final_r.extend(p.finals);
    }
    let nf = n as f64;
    let mut mean_r = Vec::with_capacity(m + 1);
    let mut se_r = Vec::with_capacity(m + 1);
    for j in 0..=m {
        let mean_d = sum[j] / nf;
        mean_r.push(shift[j] + mean_d);
        let se = if n > 1 {
            let var = ((sum_sq[j] - nf * mean_d * mean_d) / (nf - 1.0)).max(0.0);
            (var / nf).sqrt()
        } else {
            0.0
        };
        se_r.push(se);
    }
    let c_mc = (1.0 - mean_r[m]).clamp(0.0, 1.0);
    let se_c = se_r[m];
    Ok(Ensemble {
        n,
        seed,
        r0,
        mean_r,
        se_r,
        c_mc,
        se_c,
        final_r,
    })
}

/// Mean and standard error of `r_a(T) - r_b(T)` over paired trajectories.
/// Both ensembles must come from the same seed and size, so trajectory `i`
/// of each saw the same noise.
pub fn paired_difference(a: &Ensemble, b: &Ensemble) -> Result<(f64, f64)> {
    if a.n != b.n || a.seed != b.seed {
        return Err(Error::Config(
            "paired comparison needs ensembles with the same seed and size".into(),
        ));
    }
    let n = a.n as f64;
    let diffs: Vec<f64> = a.final_r.iter().zip(&b.final_r).map(|(x, y)| x - y).collect();
    let mean = diffs.iter().sum::<f64>() / n;
    if a.n < 2 {
        return Ok((mean, 0.0));
    }
    let var = diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok((mean, (var / n).sqrt()))
}

/// One line of a strategy comparison.
#[derive(Debug, Clone)]
pub struct StrategyRow {
    pub strategy: Strategy,
    pub ensemble: Ensemble,
}

impl StrategyRow {
    pub fn mean_final(&self) -> f64 {
        self.ensemble.mean_final()
    }

    pub fn se_final(&self) -> f64 {
        self.ensemble.se_c
    }
}

/// Ensembles for always-on feedback, no feedback, the local threshold rule
/// and the global table, all on the seed of `cfg`.
pub fn compare_strategies(
    cfg: &SolveConfig,
    table: &ControlTable,
    r0: f64,
    n: usize,
) -> Result<Vec<StrategyRow>> {
    if !table.meta().same_problem(cfg) {
        return Err(Error::Config("table was solved for a different configuration".into()));
    }
    [
        Strategy::ConstantU0,
        Strategy::ConstantU1,
        Strategy::LocalBloch { eta: cfg.eta() },
        Strategy::lookup(table.clone()),
    ]
    .into_iter()
    .map(|strategy| {
        let ensemble = run_ensemble(&strategy, r0, cfg, n)?;
        Ok(StrategyRow { strategy, ensemble })
    })
    .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(eta: f64) -> SolveConfig {
        SolveConfig::with_defaults(eta).unwrap().with_seed(5)
    }

    #[test]
    fn always_feedback_is_deterministic() {
        let cfg = cfg(0.3);
        let ens = run_ensemble(&Strategy::ConstantU0, 0.0, &cfg, 200).unwrap();
        let exact = (0.3 * (1.0 - (-3.0f64).exp())).sqrt();
        assert!((ens.mean_final() - exact).abs() < 1e-12);
        assert!((exact - 0.533_913_74).abs() < 1e-8);
        assert_eq!(ens.se_c, 0.0);
        assert!(ens.final_r.iter().all(|&r| r == ens.final_r[0]));
    }

    #[test]
    fn pure_state_is_absorbing() {
        let cfg = cfg(0.3);
        let t = simulate_trajectory(&Strategy::ConstantU1, 1.0, &cfg, &NoiseStream::new(1, 2)).unwrap();
        assert!(t.r_path.iter().all(|&r| r == 1.0));
    }

    #[test]
    fn blind_measurement_changes_nothing() {
        let cfg = cfg(0.0);
        let ens = run_ensemble(&Strategy::ConstantU1, 0.4, &cfg, 100).unwrap();
        assert!(ens.mean_r.iter().all(|&r| r == 0.4));
        assert_eq!(ens.se_c, 0.0);
        // Mixed strategy: u = 1 steps are frozen, u = 0 steps decay.
        let local = Strategy::LocalBloch { eta: 0.0 };
        let t = simulate_trajectory(&local, 0.4, &cfg, &NoiseStream::new(0, 0)).unwrap();
        assert!(t.r_path.iter().all(|&r| r == 0.4));
    }

    #[test]
    fn recorded_controls_match_the_strategy() {
        let cfg = cfg(0.3);
        let s = Strategy::LocalBloch { eta: 0.3 };
        let t = simulate_trajectory(&s, 0.0, &cfg, &NoiseStream::new(9, 4)).unwrap();
        assert_eq!(t.r_path.len(), cfg.steps() + 1);
        assert_eq!(t.u_path.len(), cfg.steps());
        for (j, u) in t.u_path.iter().enumerate() {
            assert_eq!(*u, s.decide(t.r_path[j], cfg.time(j)).unwrap());
            assert!((0.0..=1.0).contains(&t.r_path[j]));
        }
    }

    #[test]
    fn ensembles_are_reproducible_across_pools() {
        let cfg = cfg(0.3);
        let run = || run_ensemble(&Strategy::ConstantU1, 0.0, &cfg, 300).unwrap();
        let a = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap().install(run);
        let b = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap().install(run);
        assert_eq!(a, b);
    }

    #[test]
    fn unfed_mean_grows_from_the_mixed_state() {
        let cfg = SolveConfig::new(0.3, 1.0, 1.5, 30, 101).unwrap().with_seed(17);
        let ens = run_ensemble(&Strategy::ConstantU1, 0.0, &cfg, 10_000).unwrap();
        for w in ens.mean_r.windows(2) {
            assert!(w[1] >= w[0]);
        }
    }

    #[test]
    fn paired_difference_requires_matching_runs() {
        let cfg = cfg(0.3);
        let a = run_ensemble(&Strategy::ConstantU1, 0.0, &cfg, 50).unwrap();
        let b = run_ensemble(&Strategy::ConstantU1, 0.0, &cfg.with_seed(6), 50).unwrap();
        assert!(paired_difference(&a, &b).is_err());
        let (d, se) = paired_difference(&a, &a).unwrap();
        assert_eq!((d, se), (0.0, 0.0));
    }
}
