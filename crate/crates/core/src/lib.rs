//! Faraday rotation of a weak probe by a single spin-1/2 atom in a
//! high-finesse optical cavity.
//!
//! Modules, bottom-up:
//! - [`params`]: system rates, cavity geometry scaling, parameter files
//! - [`optics`]: coupling profile, weak-drive transmittance, rotation readout
//! - [`lindblad`]: dense master-equation steady states and fluorescence
//! - [`measurement`]: Kraus operators and Bayesian conditioning on clicks
//! - [`montecarlo`]: falling-atom trajectories, coincidence selection, averaging
//! - [`scans`]: detuning optimization and cavity-parameter scans

pub mod error;
pub mod lindblad;
pub mod measurement;
pub mod montecarlo;
pub mod optics;
pub mod params;
pub mod scans;

pub use error::{Error, Result};
