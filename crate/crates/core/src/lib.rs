//! Polarization noise of a spin-flip VCSEL with equally living laser levels.
//!
//! The crate linearizes the adiabatically reduced c-number Langevin equations
//! around the x-polarized steady state and offers three routes to the
//! spectral densities of the Stokes-parameter fluctuations:
//!
//! * closed forms ([`analytic::stokes_spectra_closed_form`]),
//! * a frequency-domain linear-response solution ([`analytic::linear_response_oracle`]),
//! * stochastic simulation ([`noise_sim`]) followed by Welch estimation ([`spectra_est`]).
//!
//! [`detection`] turns spectra into shot-noise-normalized photocurrent
//! spectra and evaluates the zero-frequency squeezing formulas. [`cli`] is the
//! configuration-driven front end used by the `spinflip` binary.
//!
//! ```
//! use spinflip::analytic::{stokes_spectra_closed_form, FrequencyGrid};
//! use spinflip::model::{derive, LaserParams};
//!
//! let params = LaserParams::reference();
//! let derived = derive(&params)?;
//! let grid = FrequencyGrid::linear(0.05, 50.0, 2048)?;
//! let spectra = stokes_spectra_closed_form(&params, &derived, &grid)?;
//! let peak = grid.omegas()[spectra.s11_peak_index()];
//! assert!((peak - 4.9).abs() < 0.05);
//! # Ok::<(), spinflip::Error>(())
//! ```

pub mod analytic;
pub mod cli;
pub mod detection;
pub mod error;
pub mod model;
pub mod noise_sim;
pub mod spectra_est;

pub use error::{Error, ErrorClass, NotPositiveSemidefinite, Result};
