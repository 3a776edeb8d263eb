//! Backward dynamic programming over the `(t, r)` grid.
//!
//! Starting from the terminal cost `1 - r`, each sweep evaluates the
//! expected next-step cost under both controls and keeps the smaller one.
//! The resulting table is optimal for every initial radius at once.

use rayon::prelude::*;

use crate::config::SolveConfig;
use crate::error::{Error, Result};
use crate::kernels::KernelPair;
use crate::policy::{Control, ControlTable};

/// Costs closer than this are treated as equal and resolved to `u = 0`.
pub const TIE_TOL: f64 = 1e-14;

/// Cost-to-go `values[j][i]` for `j = 0..=M`.
#[derive(Debug, Clone, PartialEq)]
pub struct CostGrid {
    meta: SolveConfig,
    values: Vec<f64>,
}

impl CostGrid {
    pub fn new(meta: SolveConfig, values: Vec<f64>) -> Result<Self> {
        let expected = (meta.steps() + 1) * meta.points();
        if values.len() != expected {
            return Err(Error::Config(format!(
                "cost grid has {} entries, expected {expected}",
                values.len()
            )));
        }
        Ok(Self { meta, values })
    }

    pub fn meta(&self) -> &SolveConfig {
        &self.meta
    }

    pub fn row(&self, j: usize) -> &[f64] {
        let n = self.meta.points();
        &self.values[j * n..(j + 1) * n]
    }

    fn row_mut(&mut self, j: usize) -> &mut [f64] {
        let n = self.meta.points();
        &mut self.values[j * n..(j + 1) * n]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Global cost from `r0`, read at the nearest grid point.
    pub fn cost_at(&self, r0: f64) -> f64 {
        self.row(0)[self.meta.grid().nearest(r0)]
    }
}

/// Terminal cost `1 - r`.
pub fn terminal_cost(cfg: &SolveConfig) -> Vec<f64> {
    cfg.grid().points().iter().map(|r| 1.0 - r).collect()
}

/// Output of [`backward_solve`].
#[derive(Debug, Clone)]
pub struct Solution {
    pub table: ControlTable,
    pub costs: CostGrid,
}

impl Solution {
    pub fn global_cost(&self, r0: f64) -> f64 {
        self.costs.cost_at(r0)
    }
}

/// Builds both kernels and runs the backward sweep.
pub fn backward_solve(cfg: &SolveConfig) -> Result<Solution> {
    let kernels = KernelPair::build(cfg)?;
    Ok(backward_solve_with(cfg, &kernels))
}

/// Backward sweep with prebuilt kernels. The kernels are time-homogeneous
/// and reused at every step.
pub fn backward_solve_with(cfg: &SolveConfig, kernels: &KernelPair) -> Solution {
    let m = cfg.steps();
    let n = cfg.points();
    let mut table = ControlTable::filled(*cfg, Control::NoFeedback);
    let mut costs = CostGrid {
        meta: *cfg,
        values: vec![0.0; (m + 1) * n],
    };
    costs.row_mut(m).copy_from_slice(&terminal_cost(cfg));
    for j in (1..=m).rev() {
        let next = costs.row(j).to_vec();
        let decided: Vec<(Control, f64)> = (0..n)
            .into_par_iter()
            .map(|i| {
                let c0 = kernels.feedback.row(i).expect(&next);
                let c1 = kernels.no_feedback.row(i).expect(&next);
                choose(c0, c1)
            })
            .collect();
        let bits = table.row_mut(j - 1);
        for (b, (u, _)) in bits.iter_mut().zip(&decided) {
            *b = *u;
        }
        let row = costs.row_mut(j - 1);
        for (v, (_, c)) in row.iter_mut().zip(&decided) {
            *v = *c;
        }
    }
    Solution { table, costs }
}

fn choose(c0: f64, c1: f64) -> (Control, f64) {
    if c0 <= c1 + TIE_TOL {
        (Control::Feedback, c0.min(c1))
    } else {
        (Control::NoFeedback, c1)
    }
}

/// Expected next-step cost under each control, from a cost-to-go row.
pub fn control_costs(kernels: &KernelPair, next: &[f64]) -> (Vec<f64>, Vec<f64>) {
    (kernels.feedback.apply(next), kernels.no_feedback.apply(next))
}

/// Cost-to-go of a fixed strategy: the same recursion without the minimum.
pub fn evaluate_policy<F>(cfg: &SolveConfig, kernels: &KernelPair, policy: F) -> CostGrid
where
    F: Fn(usize, usize) -> Control + Sync,
{
    let m = cfg.steps();
    let n = cfg.points();
    let mut costs = CostGrid {
        meta: *cfg,
        values: vec![0.0; (m + 1) * n],
    };
    costs.row_mut(m).copy_from_slice(&terminal_cost(cfg));
    for j in (1..=m).rev() {
        let next = costs.row(j).to_vec();
        let row: Vec<f64> = (0..n)
            .into_par_iter()
            .map(|i| kernels.get(policy(j - 1, i)).row(i).expect(&next))
            .collect();
        costs.row_mut(j - 1).copy_from_slice(&row);
    }
    costs
}

/// Largest feedback radius in one time row.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryPoint {
    pub step: usize,
    pub t: f64,
    pub index: usize,
    pub r: f64,
    /// False when the feedback cells of this row do not form one interval.
    pub contiguous: bool,
}

/// Boundary of the feedback region, one entry per time row. Rows without
/// feedback give `None`.
pub fn extract_boundary(table: &ControlTable) -> Vec<Option<BoundaryPoint>> {
    let cfg = table.meta();
    let grid = cfg.grid();
    (0..table.steps())
        .map(|j| {
            let row = table.row(j);
            let index = row.iter().rposition(|&u| u == Control::Feedback)?;
            let runs = row
                .iter()
                .enumerate()
                .filter(|&(i, &u)| {
                    u == Control::Feedback && (i == 0 || row[i - 1] != Control::Feedback)
                })
                .count();
            Some(BoundaryPoint {
                step: j,
                t: cfg.time(j),
                index,
                r: grid.get(index),
                contiguous: runs == 1,
            })
        })
        .collect()
}

/// Earliest time at which any feedback is applied.
pub fn feedback_onset(table: &ControlTable) -> Option<f64> {
    extract_boundary(table).iter().flatten().map(|b| b.t).next()
}
