use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::eigen::EigenSystem;

const J: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// One complex Lorentzian term A e^{jφ} / (ω − (ω_α − jβ_α)) of the
/// reflection amplitude.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LorentzianMode {
    /// A_α (GHz).
    pub amplitude: f64,
    /// φ_α (rad), in (−π, π].
    pub phase: f64,
    /// ω_α (GHz).
    pub center: f64,
    /// β_α (GHz), strictly positive.
    pub halfwidth: f64,
}

impl LorentzianMode {
    /// Build from a complex residue; the phase absorbs any sign.
    pub fn from_residue(residue: Complex64, center: f64, halfwidth: f64) -> Self {
        let (amplitude, phase) = residue.to_polar();
        Self { amplitude, phase, center, halfwidth }
    }

    /// A_α e^{jφ_α}.
    pub fn residue(&self) -> Complex64 {
        Complex64::from_polar(self.amplitude, self.phase)
    }

    /// ε_α = ω_α − jβ_α.
    pub fn eigenvalue(&self) -> Complex64 {
        Complex64::new(self.center, -self.halfwidth)
    }
}

/// N Lorentzian modes fitted to (or synthesizing) a reflection spectrum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LorentzianSum {
    pub modes: Vec<LorentzianMode>,
}

impl LorentzianSum {
    /// Modes are kept sorted by ascending center.
    pub fn new(mut modes: Vec<LorentzianMode>) -> Self {
        modes.sort_by(|a, b| a.center.total_cmp(&b.center).then(a.halfwidth.total_cmp(&b.halfwidth)));
        Self { modes }
    }

    /// Exact modal decomposition of a device's reflection amplitude:
    /// residues γ₀⟨v₀|ε_α⟩².
    pub fn from_eigensystem(eig: &EigenSystem, gamma_in: f64) -> Self {
        let modes = (0..eig.dim())
            .map(|a| {
                let e = eig.eigenvalues[a];
                LorentzianMode::from_residue(gamma_in * eig.component(0, a).powi(2), e.re, -e.im)
            })
            .collect();
        Self::new(modes)
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    /// Σ_α A_α e^{jφ_α}.
    pub fn residue_sum(&self) -> Complex64 {
        self.modes.iter().map(|m| m.residue()).sum()
    }

    /// γ₀ = Re Σ_α A_α e^{jφ_α}.
    pub fn gamma0(&self) -> f64 {
        self.residue_sum().re
    }

    /// |Im Σ_α A_α e^{jφ_α}|.
    pub fn residue_imag(&self) -> f64 {
        self.residue_sum().im.abs()
    }

    pub fn eigenvalues(&self) -> Vec<Complex64> {
        self.modes.iter().map(|m| m.eigenvalue()).collect()
    }

    /// Reflection amplitude 1 − j Σ_α A_α e^{jφ_α}/(ω − ε_α).
    pub fn amplitude(&self, omega: f64) -> Complex64 {
        let s: Complex64 = self.modes.iter().map(|m| m.residue() / (Complex64::new(omega, 0.0) - m.eigenvalue())).sum();
        Complex64::new(1.0, 0.0) - J * s
    }

    /// |R(ω)|².
    pub fn reflectance(&self, omega: f64) -> f64 {
        self.amplitude(omega).norm_sqr()
    }

    /// Contribution of a single mode, |1 − j A e^{jφ}/(ω − ε)|², for plotting
    /// per-mode decompositions.
    pub fn mode_reflectance(&self, mode: usize, omega: f64) -> f64 {
        let m = &self.modes[mode];
        (Complex64::new(1.0, 0.0) - J * m.residue() / (Complex64::new(omega, 0.0) - m.eigenvalue())).norm_sqr()
    }
}
