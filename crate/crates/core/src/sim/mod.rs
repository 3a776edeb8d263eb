//! Monte Carlo evaluation of feedback strategies.

pub mod exact;
pub mod noise;
pub mod stats;
pub mod xz;

pub use exact::{
    compare_strategies, paired_difference, run_ensemble, simulate_trajectory, Ensemble, StrategyRow,
    Trajectory,
};
pub use noise::NoiseStream;
pub use xz::{run_xz_ensemble, simulate_xz_oracle, XzEnsemble, XzOptions, XzTrajectory};
