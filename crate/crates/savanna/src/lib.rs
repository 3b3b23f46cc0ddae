//! Stochastic savanna model: tree and grass biomasses grow by logistic
//! competition between fires, fires arrive at a state-dependent random rate
//! and remove fixed fractions of both biomasses.
//!
//! The crate has three layers:
//!
//! * trajectory level — [`model`], [`flow`], [`sim`]: the deterministic
//!   inter-fire dynamics and the jump process itself;
//! * density level — [`ensemble`], [`fpe`]: Monte Carlo estimation of the
//!   law of the process and a conservative finite-volume solver for the
//!   associated transport equation with nonlocal fire terms;
//! * diagnostics — [`verify`]: numerical certificates (drift function,
//!   jump-vector independence, reachability schedules) for the objects
//!   underlying the uniqueness-of-stationary-density argument.
//!
//! All state lives in normalized coordinates `(w, g) ∈ [0,1]²`; carrying
//! capacities enter only through input/output conversion.

pub mod ensemble;
pub mod flow;
pub mod fpe;
pub mod io;
pub mod model;
pub mod sim;
pub mod stats;
pub mod verify;

pub use ensemble::{BoundaryMass, Density1d, DensityGrid, EnsembleReport};
pub use flow::{Equilibrium, FlowResult, Stability};
pub use model::{IntensitySpec, ModelError, ModelParams, RawParams, State};
pub use sim::{FireEvent, FireMode, JumpMethod, RngStream, Trajectory};

/// Default seed used by the command-line tools when none is given.
pub const DEFAULT_SEED: u64 = 0x5eed_f12e;
