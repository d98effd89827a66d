//! Eigendecomposition of complex symmetric matrices with the unconjugated
//! (transpose) normalization ⟨ε_β|ε_α⟩ = δ_βα.
//!
//! A general complex Schur factorization supplies the eigenvalues; the
//! eigenvectors come from back-substitution on the triangular factor and are
//! then rescaled so that vᵀv = 1. A mode whose unit-2-norm eigenvector has
//! |vᵀv| below the tolerance is quasi-defective and gets flagged: such a vector
//! cannot be normalized without blowing up.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::lattice::EffectiveHamiltonian;

/// Default threshold on |vᵀv| for flagging quasi-defective modes.
pub const DEFAULT_DEFECT_TOL: f64 = 1e-8;

const SCHUR_EPS: f64 = 1e-15;
const SCHUR_MAX_ITER: usize = 10_000;

/// Eigenpairs sorted by ascending real part (ties by imaginary part).
#[derive(Debug, Clone)]
pub struct EigenSystem {
    /// ε_α in GHz.
    pub eigenvalues: Vec<Complex64>,
    /// Column α holds ⟨v_n|ε_α⟩.
    pub eigenvectors: DMatrix<Complex64>,
    /// True where the mode is quasi-defective.
    pub condition_flags: Vec<bool>,
    /// |vᵀv| of each unit-2-norm eigenvector before rescaling.
    pub self_products: Vec<f64>,
}

impl EigenSystem {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn has_flags(&self) -> bool {
        self.condition_flags.iter().any(|f| *f)
    }

    pub fn first_flagged(&self) -> Option<usize> {
        self.condition_flags.iter().position(|f| *f)
    }

    /// ⟨v_n|ε_α⟩.
    pub fn component(&self, site: usize, mode: usize) -> Complex64 {
        self.eigenvectors[(site, mode)]
    }

    /// Σ_α ε_α |ε_α⟩⟨ε_α| with unconjugated outer products.
    pub fn reconstruct(&self) -> DMatrix<Complex64> {
        let n = self.dim();
        let mut out = DMatrix::zeros(n, n);
        for (a, e) in self.eigenvalues.iter().enumerate() {
            let v = self.eigenvectors.column(a);
            out += (v * v.transpose()) * *e;
        }
        out
    }

    /// Σ_α |ε_α⟩⟨ε_α|, the identity for a complete system.
    pub fn completeness(&self) -> DMatrix<Complex64> {
        let n = self.dim();
        let mut out = DMatrix::zeros(n, n);
        for a in 0..n {
            let v = self.eigenvectors.column(a);
            out += v * v.transpose();
        }
        out
    }
}

/// Decompose without failing on quasi-defective modes; they are only flagged.
pub fn decompose(h: &EffectiveHamiltonian, tol: f64) -> Result<EigenSystem> {
    let m = h.matrix();
    let n = m.nrows();
    let (q, t) = schur(m)?;

    let mut pairs: Vec<(Complex64, nalgebra::DVector<Complex64>)> = (0..n)
        .map(|k| {
            let lambda = t[(k, k)];
            let y = triangular_eigenvector(&t, k);
            (lambda, &q * y)
        })
        .collect();
    pairs.sort_by(|a, b| a.0.re.total_cmp(&b.0.re).then(a.0.im.total_cmp(&b.0.im)));

    let mut eigenvalues = Vec::with_capacity(n);
    let mut eigenvectors = DMatrix::zeros(n, n);
    let mut flags = Vec::with_capacity(n);
    let mut products = Vec::with_capacity(n);
    for (a, (lambda, mut v)) in pairs.into_iter().enumerate() {
        let norm = v.norm();
        v /= Complex64::new(norm, 0.0);
        let s: Complex64 = v.iter().map(|z| z * z).sum();
        let flagged = s.norm() < tol;
        if !flagged {
            v /= s.sqrt();
        }
        fix_sign(v.as_mut_slice());
        eigenvalues.push(lambda);
        eigenvectors.set_column(a, &v);
        flags.push(flagged);
        products.push(s.norm());
    }
    Ok(EigenSystem { eigenvalues, eigenvectors, condition_flags: flags, self_products: products })
}

/// Full decomposition; any quasi-defective mode is an error.
pub fn eig_complex_symmetric(h: &EffectiveHamiltonian, tol: f64) -> Result<EigenSystem> {
    let sys = decompose(h, tol)?;
    match sys.first_flagged() {
        Some(mode) => Err(Error::DegenerateSpectrum { mode, self_product: sys.self_products[mode] }),
        None => Ok(sys),
    }
}

/// Eigenvalues only, sorted like [`decompose`].
pub fn eigenvalues(h: &EffectiveHamiltonian) -> Result<Vec<Complex64>> {
    let (_, t) = schur(h.matrix())?;
    let mut ev: Vec<Complex64> = (0..t.nrows()).map(|k| t[(k, k)]).collect();
    ev.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    Ok(ev)
}

fn schur(m: &DMatrix<Complex64>) -> Result<(DMatrix<Complex64>, DMatrix<Complex64>)> {
    let n = m.nrows();
    if n == 1 {
        return Ok((DMatrix::identity(1, 1), m.clone()));
    }
    let s = nalgebra::Schur::try_new(m.clone(), SCHUR_EPS, SCHUR_MAX_ITER).ok_or(Error::EigenFailure)?;
    let (q, mut t) = s.unpack();
    let scale = m.iter().map(|z| z.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    for i in 1..n {
        for j in 0..i {
            if t[(i, j)].norm() > 1e-10 * scale {
                return Err(Error::EigenFailure);
            }
            t[(i, j)] = Complex64::new(0.0, 0.0);
        }
    }
    Ok((q, t))
}

/// Eigenvector of upper-triangular `t` for the eigenvalue on diagonal `k`.
fn triangular_eigenvector(t: &DMatrix<Complex64>, k: usize) -> nalgebra::DVector<Complex64> {
    let n = t.nrows();
    let lambda = t[(k, k)];
    let scale = t.iter().map(|z| z.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let smin = (f64::EPSILON * scale).max(f64::MIN_POSITIVE);
    let mut y = nalgebra::DVector::zeros(n);
    y[k] = Complex64::new(1.0, 0.0);
    for i in (0..k).rev() {
        let mut rhs = -t[(i, k)];
        for j in i + 1..k {
            rhs -= t[(i, j)] * y[j];
        }
        let mut pivot = t[(i, i)] - lambda;
        if pivot.norm() < smin {
            if rhs.norm() == 0.0 {
                continue;
            }
            pivot = Complex64::new(smin, 0.0);
        }
        y[i] = rhs / pivot;
    }
    y
}

/// Fix the ± ambiguity left by vᵀv = 1: the first nonzero component gets a
/// positive real part (or, if purely imaginary, a positive imaginary part).
fn fix_sign(v: &mut [Complex64]) {
    let scale = v.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let Some(first) = v.iter().find(|z| z.norm() > 1e-12 * scale) else {
        return;
    };
    let flip = if first.re.abs() > 1e-12 * scale { first.re < 0.0 } else { first.im < 0.0 };
    if flip {
        v.iter_mut().for_each(|z| *z = -*z);
    }
}
