//! Feedback strategies `(r, t) -> u`.
//!
//! `u = cos(theta)` is the cosine of the angle between the Bloch vector and
//! the measurement axis after feedback. Only `u = 0` and `u = 1` occur in an
//! optimal protocol, and `u = -1` is physically the same as `u = 1`, so the
//! control alphabet is binary.

use std::fmt;
use std::sync::Arc;

use crate::config::SolveConfig;
use crate::error::{Error, Result};

/// Binary feedback control.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Control {
    /// `u = 0`: rotate the state onto the plane orthogonal to the measurement axis.
    Feedback,
    /// `u = 1`: keep the state aligned with the measurement axis.
    NoFeedback,
}

impl Control {
    pub fn value(self) -> u8 {
        match self {
            Control::Feedback => 0,
            Control::NoFeedback => 1,
        }
    }

    pub fn from_value(v: u8) -> Option<Self> {
        match v {
            0 => Some(Control::Feedback),
            1 => Some(Control::NoFeedback),
            _ => None,
        }
    }

    pub fn as_f64(self) -> f64 {
        self.value() as f64
    }
}

/// Locally optimal rule for the Bloch-length metric: feedback while
/// `r <= sqrt(eta)`.
pub fn local_optimal_bloch(r: f64, eta: f64) -> Control {
    if r <= eta.sqrt() {
        Control::Feedback
    } else {
        Control::NoFeedback
    }
}

/// Locally optimal rule for the purity metric. No feedback at all for
/// `eta <= 1/2`, otherwise feedback while `r <= sqrt(2 - 1/eta)`.
pub fn local_optimal_purity(r: f64, eta: f64) -> Control {
    if eta <= 0.5 {
        return Control::NoFeedback;
    }
    if r <= (2.0 - 1.0 / eta).sqrt() {
        Control::Feedback
    } else {
        Control::NoFeedback
    }
}

/// Binary lookup table `bits[j][i]`: the control applied during step `j`
/// (from `t_j` to `t_{j+1}`) at grid radius `r_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlTable {
    meta: SolveConfig,
    bits: Vec<Control>,
}

impl ControlTable {
    pub fn new(meta: SolveConfig, bits: Vec<Control>) -> Result<Self> {
        let expected = meta.steps() * meta.points();
        if bits.len() != expected {
            return Err(Error::Config(format!(
                "table has {} entries, expected {} x {}",
                bits.len(),
                meta.steps(),
                meta.points()
            )));
        }
        Ok(Self { meta, bits })
    }

    /// Table with the same control everywhere.
    pub fn filled(meta: SolveConfig, u: Control) -> Self {
        Self {
            bits: vec![u; meta.steps() * meta.points()],
            meta,
        }
    }

    pub fn meta(&self) -> &SolveConfig {
        &self.meta
    }

    pub fn steps(&self) -> usize {
        self.meta.steps()
    }

    pub fn points(&self) -> usize {
        self.meta.points()
    }

    pub fn get(&self, j: usize, i: usize) -> Control {
        self.bits[j * self.meta.points() + i]
    }

    pub fn row(&self, j: usize) -> &[Control] {
        let n = self.meta.points();
        &self.bits[j * n..(j + 1) * n]
    }

    pub(crate) fn row_mut(&mut self, j: usize) -> &mut [Control] {
        let n = self.meta.points();
        &mut self.bits[j * n..(j + 1) * n]
    }

    /// Time-step index used for a lookup at time `t`.
    pub fn step_index(&self, t: f64) -> Result<usize> {
        let horizon = self.meta.horizon();
        let slack = 1e-9 * horizon;
        if !(t >= -slack && t <= horizon + slack) {
            return Err(Error::OutOfHorizon { t, horizon });
        }
        let j = (t / self.meta.dt()).round().max(0.0) as usize;
        Ok(j.min(self.steps() - 1))
    }

    /// Nearest-neighbour lookup.
    pub fn lookup(&self, r: f64, t: f64) -> Result<Control> {
        let j = self.step_index(t)?;
        let i = self.meta.grid().nearest(r);
        Ok(self.get(j, i))
    }

    pub fn count(&self, u: Control) -> usize {
        self.bits.iter().filter(|&&b| b == u).count()
    }
}

/// A feedback strategy.
#[derive(Debug, Clone)]
pub enum Strategy {
    /// Feedback always on.
    ConstantU0,
    /// Measurement without feedback.
    ConstantU1,
    /// Threshold at `sqrt(eta)`.
    LocalBloch { eta: f64 },
    /// Threshold at `sqrt(2 - 1/eta)`, no feedback for `eta <= 1/2`.
    LocalPurity { eta: f64 },
    /// Globally optimal table from the backward solver.
    Lookup(Arc<ControlTable>),
}

impl Strategy {
    pub fn lookup(table: ControlTable) -> Self {
        Strategy::Lookup(Arc::new(table))
    }

    pub fn decide(&self, r: f64, t: f64) -> Result<Control> {
        Ok(match self {
            Strategy::ConstantU0 => Control::Feedback,
            Strategy::ConstantU1 => Control::NoFeedback,
            Strategy::LocalBloch { eta } => local_optimal_bloch(r, *eta),
            Strategy::LocalPurity { eta } => local_optimal_purity(r, *eta),
            Strategy::Lookup(table) => table.lookup(r, t)?,
        })
    }

    /// Short name used on the command line and in CSV output.
    pub fn name(&self) -> &'static str {
        match self {
            Strategy::ConstantU0 => "u0",
            Strategy::ConstantU1 => "u1",
            Strategy::LocalBloch { .. } => "local",
            Strategy::LocalPurity { .. } => "local-purity",
            Strategy::Lookup(_) => "global",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}
