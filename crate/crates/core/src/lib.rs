//! Simulation, Hamiltonian tomography and thermal-crosstalk calibration for
//! lossy one-dimensional coupled cavity arrays.
//!
//! The crate is organised around the data flow of a programmable cavity
//! array experiment:
//!
//! * [`lattice`], [`eigen`] and [`response`] build the effective
//!   non-Hermitian Hamiltonian and synthesize reflection/transmission spectra.
//! * [`tomography`] recovers the Hamiltonian from a single reflection spectrum.
//! * [`thermal`] maps heater voltage profiles onto onsite potential shifts and
//!   predicts the resulting eigen-wavelengths.
//! * [`calibration`] fits the crosstalk model to sweep datasets.
//! * [`device`] generates synthetic devices with planted ground truth.
//! * [`io`] and [`cli`] provide the file formats and command-line front end.

pub mod calibration;
pub mod cli;
pub mod device;
pub mod eigen;
pub mod error;
pub mod io;
pub mod lattice;
pub mod optim;
pub mod response;
pub mod thermal;
pub mod tomography;
pub mod units;

pub use error::{Error, Result};
