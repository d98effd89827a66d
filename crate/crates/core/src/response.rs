//! Reflection and transmission spectra from the input-output relations.
//!
//! Two independent routes are provided: a direct resolvent solve of
//! (ω − H_eff)x = v₀ at every probe point, and a modal sum over the
//! unconjugated eigendecomposition. They must agree wherever no mode is
//! quasi-defective.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::eigen::EigenSystem;
use crate::error::{Error, Result};
use crate::lattice::EffectiveHamiltonian;
use crate::units;

const J: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Strictly increasing probe detunings (GHz).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct FrequencyGrid {
    points: Vec<f64>,
}

impl FrequencyGrid {
    pub fn new(points: Vec<f64>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::InvalidGrid(format!("need at least 2 points, got {}", points.len())));
        }
        if points.iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidGrid("non-finite grid point".into()));
        }
        if let Some(i) = points.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::InvalidGrid(format!("points {} and {} are not increasing", i, i + 1)));
        }
        Ok(Self { points })
    }

    /// `n` evenly spaced points on [start, stop].
    pub fn linspace(start: f64, stop: f64, n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidGrid(format!("need at least 2 points, got {n}")));
        }
        let step = (stop - start) / (n - 1) as f64;
        Self::new((0..n).map(|i| if i == n - 1 { stop } else { start + step * i as f64 }).collect())
    }

    /// Grid over an absolute wavelength range (nm); either order is accepted.
    pub fn from_wavelengths(start_nm: f64, stop_nm: f64, n: usize, ref_wavelength: f64) -> Result<Self> {
        let a = units::detuning_of_wavelength(start_nm, ref_wavelength);
        let b = units::detuning_of_wavelength(stop_nm, ref_wavelength);
        Self::linspace(a.min(b), a.max(b), n)
    }

    /// Evenly spaced grid covering every Re ε with `margin` GHz on both sides.
    pub fn covering(eigenvalues: &[Complex64], margin: f64, n: usize) -> Result<Self> {
        let lo = eigenvalues.iter().map(|e| e.re).fold(f64::INFINITY, f64::min);
        let hi = eigenvalues.iter().map(|e| e.re).fold(f64::NEG_INFINITY, f64::max);
        Self::linspace(lo - margin, hi + margin, n)
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn start(&self) -> f64 {
        self.points[0]
    }

    pub fn stop(&self) -> f64 {
        self.points[self.points.len() - 1]
    }

    pub fn mean_step(&self) -> f64 {
        (self.stop() - self.start()) / (self.len() - 1) as f64
    }
}

impl TryFrom<Vec<f64>> for FrequencyGrid {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<FrequencyGrid> for Vec<f64> {
    fn from(g: FrequencyGrid) -> Self {
        g.points
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpectrumKind {
    Reflection,
    Transmission,
}

/// |R(ω)|² or |T(ω)|² sampled on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    grid: FrequencyGrid,
    values: Vec<f64>,
    kind: SpectrumKind,
}

impl Spectrum {
    pub fn new(grid: FrequencyGrid, values: Vec<f64>, kind: SpectrumKind) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::LengthMismatch { expected: grid.len(), got: values.len() });
        }
        if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::InvalidGrid(format!("spectrum value {v} is not a non-negative number")));
        }
        Ok(Self { grid, values, kind })
    }

    pub fn grid(&self) -> &FrequencyGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn kind(&self) -> SpectrumKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn samples(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.grid.points().iter().copied().zip(self.values.iter().copied())
    }
}

fn check_rates(gamma_in: f64, gamma_out: f64) -> Result<()> {
    if !(gamma_in.is_finite() && gamma_in >= 0.0 && gamma_out.is_finite() && gamma_out >= 0.0) {
        return Err(Error::InvalidSpec("port coupling rates must be non-negative".into()));
    }
    Ok(())
}

/// Complex reflection and transmission amplitudes at one frequency by direct
/// solve. Returns `None` when ω − H_eff is singular.
pub fn resolvent_amplitudes(
    h: &EffectiveHamiltonian,
    gamma_in: f64,
    gamma_out: f64,
    omega: f64,
) -> Option<(Complex64, Complex64)> {
    let n = h.dim();
    let a: DMatrix<Complex64> = DMatrix::from_diagonal_element(n, n, Complex64::new(omega, 0.0)) - h.matrix();
    let mut rhs = DVector::zeros(n);
    rhs[0] = Complex64::new(1.0, 0.0);
    let x = a.lu().solve(&rhs)?;
    if x.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
        return None;
    }
    let r = Complex64::new(1.0, 0.0) - J * gamma_in * x[0];
    let t = -J * (gamma_in * gamma_out).sqrt() * x[n - 1];
    Some((r, t))
}

/// |R|² and |T|² by solving (ωI − H_eff)x = v₀ at every grid point.
///
/// `gamma_in`/`gamma_out` must be the port rates already folded into the
/// diagonal of `h`; they only set the output prefactors here.
pub fn resolvent_response(
    h: &EffectiveHamiltonian,
    gamma_in: f64,
    gamma_out: f64,
    grid: &FrequencyGrid,
) -> Result<(Spectrum, Spectrum)> {
    check_rates(gamma_in, gamma_out)?;
    let mut rv = Vec::with_capacity(grid.len());
    let mut tv = Vec::with_capacity(grid.len());
    for (index, &omega) in grid.points().iter().enumerate() {
        let (r, t) =
            resolvent_amplitudes(h, gamma_in, gamma_out, omega).ok_or(Error::SingularFrequency { index, omega })?;
        rv.push(r.norm_sqr());
        tv.push(t.norm_sqr());
    }
    Ok((
        Spectrum::new(grid.clone(), rv, SpectrumKind::Reflection)?,
        Spectrum::new(grid.clone(), tv, SpectrumKind::Transmission)?,
    ))
}

/// |R|² and |T|² from the modal sums over an unconjugated eigendecomposition.
pub fn modal_response(
    eig: &EigenSystem,
    gamma_in: f64,
    gamma_out: f64,
    grid: &FrequencyGrid,
) -> Result<(Spectrum, Spectrum)> {
    check_rates(gamma_in, gamma_out)?;
    if let Some(mode) = eig.first_flagged() {
        return Err(Error::DegenerateSpectrum { mode, self_product: eig.self_products[mode] });
    }
    let n = eig.dim();
    let refl_res: Vec<Complex64> = (0..n).map(|a| eig.component(0, a).powi(2)).collect();
    let trans_res: Vec<Complex64> = (0..n).map(|a| eig.component(n - 1, a) * eig.component(0, a)).collect();
    let pref = (gamma_in * gamma_out).sqrt();
    let mut rv = Vec::with_capacity(grid.len());
    let mut tv = Vec::with_capacity(grid.len());
    for (index, &omega) in grid.points().iter().enumerate() {
        let mut sr = Complex64::new(0.0, 0.0);
        let mut st = Complex64::new(0.0, 0.0);
        for a in 0..n {
            let d = Complex64::new(omega, 0.0) - eig.eigenvalues[a];
            if d.norm() == 0.0 {
                return Err(Error::SingularFrequency { index, omega });
            }
            let inv = d.inv();
            sr += refl_res[a] * inv;
            st += trans_res[a] * inv;
        }
        rv.push((Complex64::new(1.0, 0.0) - J * gamma_in * sr).norm_sqr());
        tv.push((-J * pref * st).norm_sqr());
    }
    Ok((
        Spectrum::new(grid.clone(), rv, SpectrumKind::Reflection)?,
        Spectrum::new(grid.clone(), tv, SpectrumKind::Transmission)?,
    ))
}
