//! Lattice parameters and the effective non-Hermitian Hamiltonian.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Physical parameters of an N-site lossy coupled cavity array.
///
/// Rates are in GHz (angular conventions are not used anywhere; every rate is
/// the same kind of number that appears on the Hamiltonian diagonal).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatticeSpec {
    /// Onsite detunings μ_n relative to the reference frequency.
    pub mu: Vec<f64>,
    /// Hopping rates J_n between sites n and n+1, all strictly positive.
    pub hop: Vec<f64>,
    /// Intrinsic loss rates κ_n.
    pub kappa: Vec<f64>,
    /// Port coupling rate at site 0.
    pub gamma_in: f64,
    /// Port coupling rate at site N−1.
    pub gamma_out: f64,
    /// Reference wavelength (nm) for frequency/wavelength conversion.
    pub ref_wavelength: f64,
}

impl LatticeSpec {
    pub fn n_sites(&self) -> usize {
        self.mu.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.mu.len();
        if n == 0 {
            return Err(Error::InvalidSpec("at least one site is required".into()));
        }
        if self.hop.len() + 1 != n {
            return Err(Error::InvalidSpec(format!(
                "{} sites need {} hopping rates, got {}",
                n,
                n - 1,
                self.hop.len()
            )));
        }
        if self.kappa.len() != n {
            return Err(Error::InvalidSpec(format!("{} sites need {} loss rates, got {}", n, n, self.kappa.len())));
        }
        if self.mu.iter().any(|m| !m.is_finite()) {
            return Err(Error::InvalidSpec("onsite detunings must be finite".into()));
        }
        if let Some(j) = self.hop.iter().find(|j| !(j.is_finite() && **j > 0.0)) {
            return Err(Error::InvalidSpec(format!("hopping rate {j} is not strictly positive")));
        }
        if let Some(k) = self.kappa.iter().find(|k| !(k.is_finite() && **k >= 0.0)) {
            return Err(Error::InvalidSpec(format!("loss rate {k} is negative")));
        }
        if !(self.gamma_in.is_finite() && self.gamma_in >= 0.0)
            || !(self.gamma_out.is_finite() && self.gamma_out >= 0.0)
        {
            return Err(Error::InvalidSpec("port coupling rates must be non-negative".into()));
        }
        if !(self.ref_wavelength.is_finite() && self.ref_wavelength > 0.0) {
            return Err(Error::InvalidSpec("reference wavelength must be positive".into()));
        }
        Ok(())
    }

    /// The same device seen from the other end: site order reversed, ports swapped.
    pub fn reversed(&self) -> LatticeSpec {
        let mut mu = self.mu.clone();
        let mut hop = self.hop.clone();
        let mut kappa = self.kappa.clone();
        mu.reverse();
        hop.reverse();
        kappa.reverse();
        LatticeSpec {
            mu,
            hop,
            kappa,
            gamma_in: self.gamma_out,
            gamma_out: self.gamma_in,
            ref_wavelength: self.ref_wavelength,
        }
    }
}

/// Complex symmetric tridiagonal effective Hamiltonian (GHz).
#[derive(Debug, Clone, PartialEq)]
pub struct EffectiveHamiltonian {
    matrix: DMatrix<Complex64>,
}

/// Default tolerance for structural checks on matrices loaded from outside.
pub const STRUCTURE_TOL: f64 = 1e-9;

impl EffectiveHamiltonian {
    /// Wrap a matrix, checking transpose symmetry, the tridiagonal band and
    /// passivity of the diagonal, each to `tol` (absolute, scaled by the
    /// largest entry).
    pub fn new(matrix: DMatrix<Complex64>, tol: f64) -> Result<Self> {
        let n = matrix.nrows();
        if n == 0 || matrix.ncols() != n {
            return Err(Error::InvalidHamiltonian(format!(
                "expected a non-empty square matrix, got {}x{}",
                n,
                matrix.ncols()
            )));
        }
        if matrix.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::InvalidHamiltonian("non-finite entry".into()));
        }
        let scale = matrix.iter().map(|z| z.norm()).fold(1.0, f64::max);
        let lim = tol * scale;
        for i in 0..n {
            if matrix[(i, i)].im > lim {
                return Err(Error::InvalidHamiltonian(format!(
                    "diagonal entry {i} has positive imaginary part (gain)"
                )));
            }
            for j in 0..n {
                if (matrix[(i, j)] - matrix[(j, i)]).norm() > lim {
                    return Err(Error::InvalidHamiltonian(format!(
                        "entries ({i},{j}) and ({j},{i}) differ; matrix is not transpose-symmetric"
                    )));
                }
                if i.abs_diff(j) > 1 && matrix[(i, j)].norm() > lim {
                    return Err(Error::InvalidHamiltonian(format!(
                        "entry ({i},{j}) lies outside the tridiagonal band"
                    )));
                }
            }
        }
        Ok(Self { matrix })
    }

    /// Assemble from a diagonal and a super-diagonal without checks beyond shape.
    pub fn from_bands(diag: &[Complex64], offdiag: &[Complex64]) -> Result<Self> {
        let n = diag.len();
        if n == 0 || offdiag.len() + 1 != n {
            return Err(Error::InvalidHamiltonian(format!(
                "{} diagonal entries need {} off-diagonal entries, got {}",
                n,
                n.saturating_sub(1),
                offdiag.len()
            )));
        }
        let mut m = DMatrix::zeros(n, n);
        for (i, d) in diag.iter().enumerate() {
            m[(i, i)] = *d;
        }
        for (i, j) in offdiag.iter().enumerate() {
            m[(i, i + 1)] = *j;
            m[(i + 1, i)] = *j;
        }
        Ok(Self { matrix: m })
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<Complex64> {
        self.matrix
    }

    pub fn diagonal(&self) -> Vec<Complex64> {
        (0..self.dim()).map(|i| self.matrix[(i, i)]).collect()
    }

    pub fn superdiagonal(&self) -> Vec<Complex64> {
        (0..self.dim().saturating_sub(1)).map(|i| self.matrix[(i, i + 1)]).collect()
    }

    pub fn trace(&self) -> Complex64 {
        self.matrix.trace()
    }

    /// Copy with `shift[n]` (GHz) added to diagonal entry n.
    pub fn with_diagonal_shift(&self, shift: &[f64]) -> Result<Self> {
        if shift.len() != self.dim() {
            return Err(Error::LengthMismatch { expected: self.dim(), got: shift.len() });
        }
        let mut m = self.matrix.clone();
        for (i, s) in shift.iter().enumerate() {
            m[(i, i)] += Complex64::new(*s, 0.0);
        }
        Ok(Self { matrix: m })
    }

    /// Largest |Im J_n| relative to the mean |J_n|; zero for a single site.
    pub fn hop_imag_ratio(&self) -> f64 {
        let hops = self.superdiagonal();
        if hops.is_empty() {
            return 0.0;
        }
        let mean = hops.iter().map(|j| j.norm()).sum::<f64>() / hops.len() as f64;
        hops.iter().map(|j| j.im.abs()).fold(0.0, f64::max) / mean
    }
}

/// Effective Hamiltonian of a lattice: μ_n − jκ_n/2 on the diagonal with the
/// port half-rates folded into the end sites, J_n off the diagonal.
pub fn build_h_eff(spec: &LatticeSpec) -> Result<EffectiveHamiltonian> {
    spec.validate()?;
    let n = spec.n_sites();
    let mut diag: Vec<Complex64> = spec.mu.iter().zip(&spec.kappa).map(|(m, k)| Complex64::new(*m, -0.5 * k)).collect();
    diag[0].im -= 0.5 * spec.gamma_in;
    diag[n - 1].im -= 0.5 * spec.gamma_out;
    let off: Vec<Complex64> = spec.hop.iter().map(|j| Complex64::new(*j, 0.0)).collect();
    EffectiveHamiltonian::from_bands(&diag, &off)
}
