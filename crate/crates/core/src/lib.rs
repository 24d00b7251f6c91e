//! Filtered-white-noise models of turbulent Fourier modes.
//!
//! The crate covers the whole chain: admissible filtering kernels and their
//! covariances ([`kernels`]), sample paths of the filtered-noise process
//! ([`noise`]), a pseudo-spectral solver for forced 2D Navier–Stokes in
//! vorticity form ([`nse2d`]), time-series diagnostics of Fourier modes
//! ([`diagnostics`]), the synthetic velocity field built from the most
//! energetic shell ([`synthfield`]) and passive-tracer dispersion with its
//! closed-form predictions ([`transport`]).

pub mod diagnostics;
pub mod error;
pub mod fft;
pub mod io;
pub mod kernels;
pub mod quad;
pub mod rng;
pub mod noise;
pub mod nse2d;
pub mod pipeline;
pub mod special;
pub mod stats;
pub mod synthfield;
pub mod transport;

pub use error::{Error, Result};
