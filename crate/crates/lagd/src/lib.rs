//! Learning-aided gradient descent (LAGD) beamforming for the multi-user
//! MISO downlink, with WMMSE and projected GD/Adam baselines.
//!
//! The library is organized around the weighted-sum-rate maximization
//! problem under a total transmit power constraint:
//!
//! * [`model`] — problem data, Rayleigh channels, SINR / sum-rate
//!   evaluation, the analytic gradient and the power projection;
//! * [`wmmse`] — the alternating weighted-MMSE baseline with bisection on
//!   the power multiplier;
//! * [`baselines`] — projected gradient ascent and projected Adam;
//! * [`net`] — the small update network with exact parameter gradients;
//! * [`solver`] — the LAGD loop itself (train-while-solving);
//! * [`harness`] — reproducible benchmark sweeps and CSV/JSON output.

pub mod baselines;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod model;
pub mod net;
pub mod run;
pub mod solver;
pub mod wmmse;

pub use error::{Error, Result};
pub use harness::{run_experiment, run_trace, Algorithm, ExperimentSpec, OutputFormat};
pub use model::{ChannelSet, Precoder, SystemConfig};
pub use run::{ReportMode, RunResult};
pub use solver::{
    lagd_multistart, lagd_solve, lagd_step, step_theta_gradient, LagdConfig, NetMode,
};
