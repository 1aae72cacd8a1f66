//! Simulation and analysis of the infinite-range coupled quantum kicked
//! rotor in its mean-field (large-N) limit, together with finite-N exact
//! diagonalization.
//!
//! The crate provides:
//!
//! - [`state`]: the truncated momentum-lattice state and elementary
//!   observables (norm, energy, order parameter);
//! - [`propagator`]: exact one-period stroboscopic maps with a
//!   self-consistent kick amplitude and optional amplitude noise;
//! - [`observables`]: coarse-grained noise statistics, power-law fits and
//!   the slowed-diffusion reference ODE;
//! - [`lyapunov`]: largest-Lyapunov-exponent estimation by two-trajectory
//!   rescaling;
//! - [`floquet`]: the single-rotor Floquet operator, its modes, the derived
//!   conserved quantities and their deviation experiment;
//! - [`manybody`]: bosonic Fock-space exact diagonalization with
//!   level-spacing ergodicity diagnostics;
//! - [`ensembles`]: synthetic reference spectra (Poisson, COE).

pub mod bessel;
pub mod ensembles;
pub mod error;
pub mod floquet;
pub mod lyapunov;
pub mod manybody;
pub mod observables;
pub mod propagator;
pub mod series;
pub mod state;

pub use error::{Error, Result};
pub use series::{ComplexSeries, RealSeries, SeriesMeta, TimeSeries};
pub use state::{
    infinite_temperature_energy, momentum_eigenstate, uniform_phase_state, ModelParams, RotorState,
};
