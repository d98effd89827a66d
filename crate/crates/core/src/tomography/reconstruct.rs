//! Site-by-site reconstruction of H_eff from the modes of a reflection fit.
//!
//! With weights ⟨v₀|ε_α⟩² = A_α e^{jφ_α}/γ₀ the recursion reads
//!
//! ```text
//! μ̃_n       = Σ_α ε_α ⟨v_n|ε_α⟩²
//! r_α       = (ε_α − μ̃_n)⟨v_n|ε_α⟩ − J_{n−1}⟨v_{n−1}|ε_α⟩
//! J_n       = sqrt(Σ_α r_α²)          (branch with Re J_n > 0)
//! ⟨v_{n+1}|ε_α⟩ = r_α / J_n
//! ```
//!
//! which keeps Σ_α ⟨v_n|ε_α⟩² = 1 at every site by construction.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::LorentzianSum;
use crate::error::{Error, Result};
use crate::lattice::EffectiveHamiltonian;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReconstructConfig {
    /// |J_n| below this (GHz) breaks the chain.
    pub hop_floor: f64,
    /// Allowed |Σ_α ⟨v₀|ε_α⟩² − 1| before the modes are declared inconsistent.
    pub norm_tol: f64,
}

impl Default for ReconstructConfig {
    fn default() -> Self {
        Self { hop_floor: 1e-6, norm_tol: 1e-3 }
    }
}

#[derive(Debug, Clone)]
pub struct Reconstruction {
    pub hamiltonian: EffectiveHamiltonian,
    /// Entry (n, α) is ⟨v_n|ε_α⟩.
    pub weights: DMatrix<Complex64>,
    pub eigenvalues: Vec<Complex64>,
    /// |Σ_α r_α²| left over after the last site, relative to the mean |J|.
    /// Zero for an exact set of modes; grows with fit error.
    pub terminal_residual: f64,
}

impl Reconstruction {
    /// Σ_α ⟨v_n|ε_α⟩² for every site.
    pub fn site_norms(&self) -> Vec<Complex64> {
        (0..self.weights.nrows()).map(|n| self.weights.row(n).iter().map(|w| w * w).sum()).collect()
    }

    /// Σ_n |Im J_n|.
    pub fn hop_imag_sum(&self) -> f64 {
        self.hamiltonian.superdiagonal().iter().map(|j| j.im.abs()).sum()
    }
}

/// Principal square root with the positive-real-part branch enforced.
fn hop_root(sum_sq: Complex64, site: usize, floor: f64) -> Result<Complex64> {
    let j = sum_sq.sqrt();
    let mag = j.norm();
    if !(mag.is_finite() && mag >= floor) {
        return Err(Error::BrokenChain { site, magnitude: mag });
    }
    if j.re <= 1e-12 * mag {
        return Err(Error::BrokenChain { site, magnitude: mag });
    }
    Ok(j)
}

/// Only the hopping rates; cheaper than [`reconstruct`] and used as a
/// physicality penalty inside the fit.
pub(crate) fn hop_chain(
    eps: &[Complex64],
    residues: &[Complex64],
    config: &ReconstructConfig,
) -> Result<Vec<Complex64>> {
    let n = eps.len();
    let gamma0: f64 = residues.iter().sum::<Complex64>().re;
    if !(gamma0 > 0.0) {
        return Err(Error::InconsistentModes { site: 0, drift: f64::NAN });
    }
    let mut cur: Vec<Complex64> = residues.iter().map(|c| (c / gamma0).sqrt()).collect();
    let mut prev = vec![Complex64::new(0.0, 0.0); n];
    let mut prev_j = Complex64::new(0.0, 0.0);
    let mut hops = Vec::with_capacity(n.saturating_sub(1));
    let mut next = vec![Complex64::new(0.0, 0.0); n];
    for site in 0..n.saturating_sub(1) {
        let mu: Complex64 = eps.iter().zip(&cur).map(|(e, u)| e * u * u).sum();
        let mut s = Complex64::new(0.0, 0.0);
        for a in 0..n {
            next[a] = (eps[a] - mu) * cur[a] - prev_j * prev[a];
            s += next[a] * next[a];
        }
        let j = hop_root(s, site, config.hop_floor)?;
        for x in next.iter_mut() {
            *x /= j;
        }
        hops.push(j);
        prev_j = j;
        std::mem::swap(&mut prev, &mut cur);
        std::mem::swap(&mut cur, &mut next);
    }
    Ok(hops)
}

/// Recover the full effective Hamiltonian and weight table from fitted modes.
pub fn reconstruct(lsum: &LorentzianSum, config: &ReconstructConfig) -> Result<Reconstruction> {
    let n = lsum.len();
    if n == 0 {
        return Err(Error::InsufficientData("no modes to reconstruct from".into()));
    }
    if let Some(m) = lsum.modes.iter().find(|m| !(m.halfwidth > 0.0) || !(m.amplitude >= 0.0)) {
        return Err(Error::InconsistentModes { site: 0, drift: m.halfwidth.min(m.amplitude) });
    }
    let eps = lsum.eigenvalues();
    let residue_sum = lsum.residue_sum();
    let gamma0 = residue_sum.re;
    if !(gamma0 > 0.0) {
        return Err(Error::InconsistentModes { site: 0, drift: f64::NAN });
    }
    let drift0 = (residue_sum / gamma0 - 1.0).norm();
    if drift0 > config.norm_tol {
        return Err(Error::InconsistentModes { site: 0, drift: drift0 });
    }

    let mut weights = DMatrix::zeros(n, n);
    for (a, m) in lsum.modes.iter().enumerate() {
        weights[(0, a)] = (m.residue() / gamma0).sqrt();
    }
    let mut diag = Vec::with_capacity(n);
    let mut hops: Vec<Complex64> = Vec::with_capacity(n.saturating_sub(1));
    let mut terminal = 0.0;
    for site in 0..n {
        let mu: Complex64 = (0..n).map(|a| eps[a] * weights[(site, a)] * weights[(site, a)]).sum();
        diag.push(mu);
        let mut r = vec![Complex64::new(0.0, 0.0); n];
        let mut s = Complex64::new(0.0, 0.0);
        for a in 0..n {
            r[a] = (eps[a] - mu) * weights[(site, a)];
            if site > 0 {
                r[a] -= hops[site - 1] * weights[(site - 1, a)];
            }
            s += r[a] * r[a];
        }
        if site + 1 == n {
            let scale = if hops.is_empty() {
                eps.iter().map(|e| e.norm()).fold(1.0, f64::max)
            } else {
                hops.iter().map(|j| j.norm()).sum::<f64>() / hops.len() as f64
            };
            terminal = s.norm().sqrt() / scale;
            break;
        }
        let j = hop_root(s, site, config.hop_floor)?;
        for a in 0..n {
            weights[(site + 1, a)] = r[a] / j;
        }
        let norm: Complex64 = (0..n).map(|a| weights[(site + 1, a)].powi(2)).sum();
        let drift = (norm - 1.0).norm();
        if drift > config.norm_tol {
            return Err(Error::InconsistentModes { site: site + 1, drift });
        }
        hops.push(j);
    }
    let hamiltonian = EffectiveHamiltonian::from_bands(&diag, &hops)?;
    Ok(Reconstruction { hamiltonian, weights, eigenvalues: eps, terminal_residual: terminal })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eigen::{eig_complex_symmetric, DEFAULT_DEFECT_TOL};
    use crate::lattice::{build_h_eff, LatticeSpec};
    use crate::tomography::LorentzianMode;
    use rand::{Rng, SeedableRng};

    #[test]
    fn single_site_identity() {
        let g = 0.7;
        let lsum = LorentzianSum::new(vec![LorentzianMode { amplitude: g, phase: 0.0, center: 3.0, halfwidth: 1.1 }]);
        let rec = reconstruct(&lsum, &ReconstructConfig::default()).unwrap();
        assert_eq!(rec.hamiltonian.dim(), 1);
        assert!((rec.hamiltonian.matrix()[(0, 0)] - Complex64::new(3.0, -1.1)).norm() < 1e-15);
    }

    #[test]
    fn symmetric_dimer() {
        let j = 7.0;
        let g = 0.5;
        let lsum = LorentzianSum::new(vec![
            LorentzianMode { amplitude: g / 2.0, phase: 0.0, center: -j, halfwidth: 0.4 },
            LorentzianMode { amplitude: g / 2.0, phase: 0.0, center: j, halfwidth: 0.4 },
        ]);
        let rec = reconstruct(&lsum, &ReconstructConfig::default()).unwrap();
        for a in 0..2 {
            assert!((rec.weights[(0, a)].powi(2) - 0.5).norm() < 1e-15);
        }
        let hop = rec.hamiltonian.superdiagonal()[0];
        assert!((hop - Complex64::new(j, 0.0)).norm() < 1e-12);
        for d in rec.hamiltonian.diagonal() {
            assert!((d - Complex64::new(0.0, -0.4)).norm() < 1e-12);
        }
    }

    #[test]
    fn exact_modes_recover_random_devices() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let n = 8;
            let spec = LatticeSpec {
                mu: (0..n).map(|_| rng.random_range(-5.0..5.0)).collect(),
                hop: (0..n - 1).map(|_| rng.random_range(10.0..50.0)).collect(),
                kappa: (0..n).map(|_| rng.random_range(1.0..2.0)).collect(),
                gamma_in: rng.random_range(0.5..2.0),
                gamma_out: rng.random_range(0.5..2.0),
                ref_wavelength: 1550.0,
            };
            let h = build_h_eff(&spec).unwrap();
            let eig = eig_complex_symmetric(&h, DEFAULT_DEFECT_TOL).unwrap();
            let lsum = LorentzianSum::from_eigensystem(&eig, spec.gamma_in);
            assert!((lsum.gamma0() - spec.gamma_in).abs() < 1e-10);
            let rec = reconstruct(&lsum, &ReconstructConfig::default()).unwrap();
            let diff = rec.hamiltonian.matrix() - h.matrix();
            assert!(diff.norm() < 1e-7 * h.matrix().norm(), "{}", diff.norm());
            for s in rec.site_norms() {
                assert!((s - 1.0).norm() < 1e-6);
            }
            assert!(rec.terminal_residual < 1e-6);
            let hops = hop_chain(
                &lsum.eigenvalues(),
                &lsum.modes.iter().map(|m| m.residue()).collect::<Vec<_>>(),
                &ReconstructConfig::default(),
            )
            .unwrap();
            for (a, b) in hops.iter().zip(rec.hamiltonian.superdiagonal()) {
                assert!((a - b).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn degenerate_modes_break_chain() {
        // Two identical modes give r_α = 0 after the first site.
        let m = LorentzianMode { amplitude: 0.5, phase: 0.0, center: 1.0, halfwidth: 0.3 };
        let lsum = LorentzianSum::new(vec![m, m]);
        assert!(matches!(reconstruct(&lsum, &ReconstructConfig::default()), Err(Error::BrokenChain { site: 0, .. })));
    }

    #[test]
    fn complex_residue_sum_is_inconsistent() {
        let lsum = LorentzianSum::new(vec![
            LorentzianMode { amplitude: 0.5, phase: 0.3, center: -1.0, halfwidth: 0.3 },
            LorentzianMode { amplitude: 0.5, phase: 0.2, center: 1.0, halfwidth: 0.3 },
        ]);
        assert!(matches!(
            reconstruct(&lsum, &ReconstructConfig::default()),
            Err(Error::InconsistentModes { site: 0, .. })
        ));
    }
}
