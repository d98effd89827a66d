//! Hamiltonian tomography from a single reflection spectrum.
//!
//! The pipeline is [`seed_modes`] → [`fit_reflection`] → [`reconstruct`]:
//! fit |R(ω)|² with N complex Lorentzians, then run the site-by-site
//! recursion that turns the fitted poles and residues into the tridiagonal
//! effective Hamiltonian. [`eigenvalues_from_transmission`] and
//! [`validate_reconstruction`] use the transmission channel for cross checks.

mod fit;
mod lorentzian;
mod reconstruct;
mod seed;
mod transmission;
mod validate;

pub use fit::{fit_reflection, FitConfig, FitReport};
pub use lorentzian::{LorentzianMode, LorentzianSum};
pub use reconstruct::{reconstruct, ReconstructConfig, Reconstruction};
pub use seed::seed_modes;
pub use transmission::eigenvalues_from_transmission;
pub use validate::{estimate_gamma_out, spectrum_misfit, validate_reconstruction};
