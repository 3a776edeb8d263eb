//! Quadrature error of the backward sweep and the resulting uncertainty in
//! the position of the feedback boundary.
//!
//! Each one-step expectation `sum_l m_il C(r_l)` carries a local error
//! `delta_R`. Errors already present in the next row are propagated with the
//! squared cell masses:
//!
//! ```text
//! dC_u(j, i)^2 = sum_l dC(j + 1, l)^2 m_u(i, l)^2 + delta_R,u(i)^2
//! ```
//!
//! where `dC(j + 1, l)` is the error under the control chosen at that cell.
//! The boundary error follows from the slope of `C_0 - C_1` across the
//! boundary cell.

use rayon::prelude::*;

use crate::config::SolveConfig;
use crate::kernels::{KernelPair, KernelRow};
use crate::policy::Control;
use crate::solver::{backward_solve_with, control_costs, extract_boundary, Solution};
use crate::error::Result;

/// Boundary slopes below this are reported as unbounded.
pub const MIN_SLOPE: f64 = 1e-12;

/// Central difference of `values` at `i`, one-sided at the ends.
pub fn slope(values: &[f64], i: usize, dr: f64) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    if i == 0 {
        (values[1] - values[0]) / dr
    } else if i == n - 1 {
        (values[n - 1] - values[n - 2]) / dr
    } else {
        (values[i + 1] - values[i - 1]) / (2.0 * dr)
    }
}

fn is_exact(row: &KernelRow, i: usize) -> bool {
    row.masses().len() == 1 && row.start() == i
}

fn weighted_slope(row: &KernelRow, abs_slope: &[f64]) -> f64 {
    row.masses()
        .iter()
        .enumerate()
        .map(|(o, m)| m * abs_slope[row.start() + o])
        .sum()
}

/// Local quadrature error `delta_R` of every cell under control `u`, given
/// the cost-to-go row the expectation is taken over.
///
/// * `u = 0`: the delta-function surrogate of width `sigma` contributes
///   `sigma |C'|`, averaged over the row.
/// * `u = 1`: the cell-mass quadrature contributes at most half a cell of
///   variation of `C` per unit mass, `(dr / 2) sum_l m_il |C'(r_l)|`.
///
/// Rows that map a grid point onto itself are exact.
pub fn riemann_error(cfg: &SolveConfig, kernels: &KernelPair, next: &[f64], u: Control) -> Vec<f64> {
    let dr = cfg.dr();
    let abs_slope: Vec<f64> = (0..next.len()).map(|l| slope(next, l, dr).abs()).collect();
    let scale = match u {
        Control::Feedback => cfg.sigma_delta(),
        Control::NoFeedback => 0.5 * dr,
    };
    let kernel = kernels.get(u);
    (0..cfg.points())
        .into_par_iter()
        .map(|i| {
            let row = kernel.row(i);
            if is_exact(row, i) {
                0.0
            } else {
                scale * weighted_slope(row, &abs_slope)
            }
        })
        .collect()
}

/// Boundary position and its uncertainty at one time step.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryError {
    pub step: usize,
    pub t: f64,
    pub index: usize,
    pub r: f64,
    /// `None` when the slope of `C_0 - C_1` vanishes at the boundary.
    pub delta_r: Option<f64>,
}

impl BoundaryError {
    /// `delta_r` in units of the radial step; infinite when unbounded.
    pub fn relative(&self, dr: f64) -> f64 {
        self.delta_r.map_or(f64::INFINITY, |d| d / dr)
    }
}

/// Error fields of a solved problem.
#[derive(Debug, Clone)]
pub struct ErrorGrid {
    pub meta: SolveConfig,
    /// `dC` under `u = 0`, `(M + 1) x N`, row-major.
    pub dc0: Vec<f64>,
    /// `dC` under `u = 1`, `(M + 1) x N`, row-major.
    pub dc1: Vec<f64>,
    /// One entry per step whose feedback region extends above `r = 0`.
    pub boundary_err: Vec<BoundaryError>,
}

impl ErrorGrid {
    pub fn dc0_row(&self, j: usize) -> &[f64] {
        let n = self.meta.points();
        &self.dc0[j * n..(j + 1) * n]
    }

    pub fn dc1_row(&self, j: usize) -> &[f64] {
        let n = self.meta.points();
        &self.dc1[j * n..(j + 1) * n]
    }

    /// `(t, delta_r / dr)` series.
    pub fn relative_series(&self) -> Vec<(f64, f64)> {
        let dr = self.meta.dr();
        self.boundary_err.iter().map(|b| (b.t, b.relative(dr))).collect()
    }

    /// Fraction of boundary points with `delta_r < dr`.
    pub fn fraction_below_step(&self) -> Option<f64> {
        if self.boundary_err.is_empty() {
            return None;
        }
        let dr = self.meta.dr();
        let below = self.boundary_err.iter().filter(|b| b.relative(dr) < 1.0).count();
        Some(below as f64 / self.boundary_err.len() as f64)
    }
}

fn propagate_row(kernels: &KernelPair, u: Control, inherited_sq: &[f64], local: &[f64]) -> Vec<f64> {
    let kernel = kernels.get(u);
    (0..local.len())
        .into_par_iter()
        .map(|i| {
            let row = kernel.row(i);
            let carried: f64 = row
                .masses()
                .iter()
                .enumerate()
                .map(|(o, m)| m * m * inherited_sq[row.start() + o])
                .sum();
            (carried + local[i] * local[i]).sqrt()
        })
        .collect()
}

/// Backward error recursion for both control hypotheses, followed by the
/// boundary error at every step.
pub fn propagate_error(cfg: &SolveConfig, kernels: &KernelPair, sol: &Solution) -> ErrorGrid {
    let m = cfg.steps();
    let n = cfg.points();
    let mut dc0 = vec![0.0; (m + 1) * n];
    let mut dc1 = vec![0.0; (m + 1) * n];
    // Squared error of the chosen cost-to-go in the row being consumed.
    let mut chosen_sq = vec![0.0; n];
    for j in (0..m).rev() {
        let next = sol.costs.row(j + 1);
        let r0 = riemann_error(cfg, kernels, next, Control::Feedback);
        let r1 = riemann_error(cfg, kernels, next, Control::NoFeedback);
        let e0 = propagate_row(kernels, Control::Feedback, &chosen_sq, &r0);
        let e1 = propagate_row(kernels, Control::NoFeedback, &chosen_sq, &r1);
        for i in 0..n {
            chosen_sq[i] = match sol.table.get(j, i) {
                Control::Feedback => e0[i] * e0[i],
                Control::NoFeedback => e1[i] * e1[i],
            };
        }
        dc0[j * n..(j + 1) * n].copy_from_slice(&e0);
        dc1[j * n..(j + 1) * n].copy_from_slice(&e1);
    }
    let mut grid = ErrorGrid {
        meta: *cfg,
        dc0,
        dc1,
        boundary_err: Vec::new(),
    };
    grid.boundary_err = boundary_error(&grid, kernels, sol);
    grid
}

/// `delta_r = sqrt(dC_0^2 + dC_1^2) / |d(C_0 - C_1)/dr|` at the boundary
/// cell of every step that has one. A feedback region reduced to `r = 0`
/// is not a boundary: no rotation acts on the centre of the ball.
pub fn boundary_error(errs: &ErrorGrid, kernels: &KernelPair, sol: &Solution) -> Vec<BoundaryError> {
    let cfg = &errs.meta;
    let dr = cfg.dr();
    extract_boundary(&sol.table)
        .into_iter()
        .flatten()
        .filter(|b| b.index > 0)
        .map(|b| {
            let (c0, c1) = control_costs(kernels, sol.costs.row(b.step + 1));
            let gap: Vec<f64> = c0.iter().zip(&c1).map(|(a, c)| a - c).collect();
            let d = slope(&gap, b.index, dr).abs();
            let e0 = errs.dc0_row(b.step)[b.index];
            let e1 = errs.dc1_row(b.step)[b.index];
            BoundaryError {
                step: b.step,
                t: b.t,
                index: b.index,
                r: b.r,
                delta_r: (d >= MIN_SLOPE).then(|| e0.hypot(e1) / d),
            }
        })
        .collect()
}

/// Boundary comparison between a grid and its refinement.
#[derive(Debug, Clone, PartialEq)]
pub struct RefinementReport {
    pub coarse_dr: f64,
    /// Steps where both grids have a boundary.
    pub compared: usize,
    /// `(step, r_coarse, r_fine, tolerance)` of every disagreement,
    /// including steps where only one grid has a boundary.
    pub mismatches: Vec<(usize, Option<f64>, Option<f64>, f64)>,
}

impl RefinementReport {
    pub fn stable(&self) -> bool {
        self.mismatches.is_empty()
    }
}

/// Solves `cfg` and its refinement with half the radial step and checks
/// that every boundary point moves by at most `max(dr, delta_r)`.
pub fn refinement_check(cfg: &SolveConfig) -> Result<(ErrorGrid, RefinementReport)> {
    let kernels = KernelPair::build(cfg)?;
    let coarse = backward_solve_with(cfg, &kernels);
    let errs = propagate_error(cfg, &kernels, &coarse);
    let fine_cfg = cfg.refined();
    let fine = backward_solve_with(&fine_cfg, &KernelPair::build(&fine_cfg)?);
    let report = compare_boundaries(&errs, &coarse, &fine);
    Ok((errs, report))
}

fn compare_boundaries(errs: &ErrorGrid, coarse: &Solution, fine: &Solution) -> RefinementReport {
    let dr = errs.meta.dr();
    let bc = extract_boundary(&coarse.table);
    let bf = extract_boundary(&fine.table);
    let mut compared = 0;
    let mut mismatches = Vec::new();
    for (j, (c, f)) in bc.iter().zip(&bf).enumerate() {
        let delta = errs
            .boundary_err
            .iter()
            .find(|b| b.step == j)
            .and_then(|b| b.delta_r)
            .unwrap_or(0.0);
        let tol = dr.max(delta);
        match (c, f) {
            (None, None) => {}
            (Some(c), Some(f)) => {
                compared += 1;
                if (c.r - f.r).abs() > tol * (1.0 + 1e-9) {
                    mismatches.push((j, Some(c.r), Some(f.r), tol));
                }
            }
            _ => mismatches.push((j, c.as_ref().map(|b| b.r), f.as_ref().map(|b| b.r), tol)),
        }
    }
    RefinementReport {
        coarse_dr: dr,
        compared,
        mismatches,
    }
}
