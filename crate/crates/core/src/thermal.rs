//! Heater voltages to onsite potential shifts, and the eigen-wavelengths they
//! produce.
//!
//! The shift of site n (nm) is
//!
//! ```text
//! Δμ_n = δ_n + α_n V_n² + Σ_{d=1..3} β_d Σ_{i=n±d} α_i V_i²
//!      + Σ_{pairs {a,b} ⊂ [−3,3]} γ_{orbit(a,b)} √(α_{n+a} α_{n+b}) V_{n+a} V_{n+b}
//! ```
//!
//! Terms referring to sites outside the array are dropped. β and γ are shared
//! by all sites; the cross coefficients depend only on the pair of offsets up
//! to mirror symmetry, which leaves 12 independent values.

use serde::{Deserialize, Serialize};

use crate::eigen::{eig_complex_symmetric, eigenvalues, DEFAULT_DEFECT_TOL};
use crate::error::{Error, Result};
use crate::lattice::EffectiveHamiltonian;
use crate::units;

/// Half-width of the crosstalk window in sites.
pub const WINDOW: i32 = 3;
pub const N_BETA: usize = 3;
pub const N_GAMMA: usize = 12;

/// Non-negative heater voltages (V), one per site.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct VoltageProfile {
    volts: Vec<f64>,
}

impl VoltageProfile {
    pub fn new(volts: Vec<f64>) -> Result<Self> {
        if let Some(i) = volts.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::InvalidProfile(format!(
                "voltage {} at site {i} is not a finite non-negative value",
                volts[i]
            )));
        }
        Ok(Self { volts })
    }

    pub fn zeros(n: usize) -> Self {
        Self { volts: vec![0.0; n] }
    }

    /// Only `site` driven, at `v` volts.
    pub fn single(n: usize, site: usize, v: f64) -> Result<Self> {
        if site >= n {
            return Err(Error::OutOfRange { index: site, len: n });
        }
        let mut volts = vec![0.0; n];
        volts[site] = v;
        Self::new(volts)
    }

    pub fn volts(&self) -> &[f64] {
        &self.volts
    }

    pub fn len(&self) -> usize {
        self.volts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.volts.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.volts.iter().all(|v| *v == 0.0)
    }

    /// Indices of the heaters with non-zero voltage.
    pub fn driven(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.volts[i] != 0.0).collect()
    }

    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::new(self.volts.iter().map(|v| c * v).collect())
    }
}

impl TryFrom<Vec<f64>> for VoltageProfile {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<VoltageProfile> for Vec<f64> {
    fn from(p: VoltageProfile) -> Self {
        p.volts
    }
}

/// Canonical numbering of the unordered offset pairs {a, b} ⊂ [−3, 3],
/// a ≠ b, with {a, b} and {−a, −b} sharing a number.
///
/// Order: the three pairs containing 0 by distance, then {−d, d} by d, then
/// the six remaining orbits by their lexicographically smallest member.
#[derive(Debug, Clone, PartialEq)]
pub struct OrbitTable {
    pairs: Vec<((i32, i32), usize)>,
    representatives: Vec<(i32, i32)>,
}

fn mirror((a, b): (i32, i32)) -> (i32, i32) {
    (-b, -a)
}

impl OrbitTable {
    pub fn new() -> Self {
        let mut representatives: Vec<(i32, i32)> = (1..=WINDOW).map(|d| (-d, 0)).collect();
        representatives.extend((1..=WINDOW).map(|d| (-d, d)));
        let mut generic = Vec::new();
        for a in -WINDOW..=WINDOW {
            for b in a + 1..=WINDOW {
                if a == 0 || b == 0 || a == -b {
                    continue;
                }
                let rep = (a, b).min(mirror((a, b)));
                if !generic.contains(&rep) {
                    generic.push(rep);
                }
            }
        }
        generic.sort();
        representatives.extend(generic);

        let mut pairs = Vec::new();
        for a in -WINDOW..=WINDOW {
            for b in a + 1..=WINDOW {
                let orbit = representatives
                    .iter()
                    .position(|r| *r == (a, b) || *r == mirror((a, b)))
                    .expect("every pair lies in an orbit");
                pairs.push(((a, b), orbit));
            }
        }
        Self { pairs, representatives }
    }

    /// Orbit of the unordered pair {a, b}; `None` for a = b or offsets
    /// outside the window.
    pub fn index(&self, a: i32, b: i32) -> Option<usize> {
        let key = (a.min(b), a.max(b));
        self.pairs.iter().find(|(p, _)| *p == key).map(|(_, o)| *o)
    }

    /// All 21 pairs (a < b) with their orbit.
    pub fn pairs(&self) -> &[((i32, i32), usize)] {
        &self.pairs
    }

    pub fn n_orbits(&self) -> usize {
        self.representatives.len()
    }

    /// Canonical member of an orbit.
    pub fn representative(&self, orbit: usize) -> (i32, i32) {
        self.representatives[orbit]
    }
}

impl Default for OrbitTable {
    fn default() -> Self {
        Self::new()
    }
}

pub fn orbit_table() -> OrbitTable {
    OrbitTable::new()
}

/// Coefficients of the voltage-to-shift map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrosstalkModel {
    /// δ_n (nm).
    pub delta: Vec<f64>,
    /// α_n (nm/V²), strictly positive.
    pub alpha: Vec<f64>,
    /// β_d for d = 1, 2, 3.
    pub beta: [f64; N_BETA],
    /// γ per orbit, numbered by [`OrbitTable`].
    pub gamma_cross: [f64; N_GAMMA],
}

impl CrosstalkModel {
    pub fn n_sites(&self) -> usize {
        self.alpha.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.delta.len() != self.alpha.len() {
            return Err(Error::LengthMismatch { expected: self.alpha.len(), got: self.delta.len() });
        }
        if self.alpha.is_empty() {
            return Err(Error::InvalidSpec("crosstalk model has no sites".into()));
        }
        if let Some(i) = self.alpha.iter().position(|a| !(a.is_finite() && *a > 0.0)) {
            return Err(Error::InvalidSpec(format!("alpha[{i}] = {} must be finite and positive", self.alpha[i])));
        }
        let finite = self.delta.iter().chain(&self.beta).chain(&self.gamma_cross).all(|x| x.is_finite());
        if !finite {
            return Err(Error::InvalidSpec("non-finite crosstalk coefficient".into()));
        }
        Ok(())
    }

    /// Same model with δ = 0.
    pub fn without_offsets(&self) -> Self {
        Self { delta: vec![0.0; self.n_sites()], ..self.clone() }
    }
}

/// Δμ_n (nm) for every site under profile `v`.
pub fn delta_mu(model: &CrosstalkModel, v: &VoltageProfile) -> Result<Vec<f64>> {
    delta_mu_with(&OrbitTable::new(), model, v)
}

/// [`delta_mu`] with a prebuilt orbit table.
pub fn delta_mu_with(table: &OrbitTable, model: &CrosstalkModel, v: &VoltageProfile) -> Result<Vec<f64>> {
    let n = model.n_sites();
    if v.len() != n || model.delta.len() != n {
        return Err(Error::InvalidProfile(format!("profile has {} voltages for {} sites", v.len(), n)));
    }
    let volts = v.volts();
    let heat: Vec<f64> = (0..n).map(|i| model.alpha[i] * volts[i] * volts[i]).collect();
    let site = |n0: usize, off: i32| -> Option<usize> {
        let k = n0 as i64 + off as i64;
        (k >= 0 && (k as usize) < n).then_some(k as usize)
    };
    let mut out = Vec::with_capacity(n);
    for s in 0..n {
        let mut acc = model.delta[s] + heat[s];
        for d in 1..=WINDOW {
            let b = model.beta[(d - 1) as usize];
            for off in [-d, d] {
                if let Some(i) = site(s, off) {
                    acc += b * heat[i];
                }
            }
        }
        for &((a, b), orbit) in table.pairs() {
            if let (Some(j), Some(k)) = (site(s, a), site(s, b)) {
                acc += model.gamma_cross[orbit] * (model.alpha[j] * model.alpha[k]).sqrt() * volts[j] * volts[k];
            }
        }
        out.push(acc);
    }
    Ok(out)
}

/// One heater alone: (α v², β′ v²).
pub fn single_heater_shift(alpha_n: f64, beta_prime: f64, v: f64) -> (f64, f64) {
    let v2 = v * v;
    (alpha_n * v2, beta_prime * v2)
}

fn check_dims(h0: &EffectiveHamiltonian, n: usize) -> Result<()> {
    if h0.dim() != n {
        return Err(Error::LengthMismatch { expected: h0.dim(), got: n });
    }
    Ok(())
}

/// Sorted absolute eigen-wavelengths (nm) of h0 with the diagonal shifted by
/// `shift_nm`.
pub fn shifted_eigen_wavelengths(h0: &EffectiveHamiltonian, shift_nm: &[f64], ref_wavelength: f64) -> Result<Vec<f64>> {
    let shift: Vec<f64> = shift_nm.iter().map(|s| units::to_detuning(*s, ref_wavelength)).collect();
    let h = h0.with_diagonal_shift(&shift)?;
    let mut out: Vec<f64> = eigenvalues(&h)?.iter().map(|e| units::absolute_wavelength(e.re, ref_wavelength)).collect();
    out.sort_by(f64::total_cmp);
    Ok(out)
}

/// Eigen-wavelengths (nm, ascending) of h0 after applying profile `v`.
pub fn predict_eigen(
    h0: &EffectiveHamiltonian,
    model: &CrosstalkModel,
    v: &VoltageProfile,
    ref_wavelength: f64,
) -> Result<Vec<f64>> {
    check_dims(h0, model.n_sites())?;
    let dmu = delta_mu(model, v)?;
    let shift: Vec<f64> = dmu.iter().map(|s| units::to_detuning(*s, ref_wavelength)).collect();
    let sys = eig_complex_symmetric(&h0.with_diagonal_shift(&shift)?, DEFAULT_DEFECT_TOL)?;
    let mut out: Vec<f64> = sys.eigenvalues.iter().map(|e| units::absolute_wavelength(e.re, ref_wavelength)).collect();
    out.sort_by(f64::total_cmp);
    Ok(out)
}

fn sorted(v: &[f64]) -> Vec<f64> {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    s
}

fn paired(predicted: &[f64], measured: &[f64], j_norm: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    if predicted.len() != measured.len() {
        return Err(Error::LengthMismatch { expected: measured.len(), got: predicted.len() });
    }
    if !(j_norm > 0.0) {
        return Err(Error::InvalidConfig(format!("j_norm must be positive, got {j_norm}")));
    }
    Ok((sorted(predicted), sorted(measured)))
}

/// ‖predicted − measured‖² / J_norm (nm) after pairing the sorted vectors.
pub fn normalized_error(predicted: &[f64], measured: &[f64], j_norm: f64) -> Result<f64> {
    let (p, m) = paired(predicted, measured, j_norm)?;
    Ok(p.iter().zip(&m).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / j_norm)
}

/// Mean |predicted − measured| per mode as a fraction of J_norm.
pub fn mode_deviation(predicted: &[f64], measured: &[f64], j_norm: f64) -> Result<f64> {
    let (p, m) = paired(predicted, measured, j_norm)?;
    if p.is_empty() {
        return Ok(0.0);
    }
    Ok(p.iter().zip(&m).map(|(a, b)| (a - b).abs()).sum::<f64>() / (p.len() as f64 * j_norm))
}

/// Crosstalk ratio Δμ_{n+1}/Δμ_n for heater n driven alone. Under this model
/// it is β₁ for every site and voltage.
pub fn eta(model: &CrosstalkModel, site: usize) -> Result<f64> {
    if site + 1 >= model.n_sites() {
        return Err(Error::OutOfRange { index: site + 1, len: model.n_sites() });
    }
    Ok(model.beta[0])
}

/// The same ratio evaluated from the shifts at drive voltage `v` (δ removed).
pub fn eta_at(model: &CrosstalkModel, site: usize, v: f64) -> Result<f64> {
    let n = model.n_sites();
    if site + 1 >= n {
        return Err(Error::OutOfRange { index: site + 1, len: n });
    }
    if !(v > 0.0) {
        return Err(Error::InvalidProfile(format!("drive voltage must be positive, got {v}")));
    }
    let dmu = delta_mu(&model.without_offsets(), &VoltageProfile::single(n, site, v)?)?;
    Ok(dmu[site + 1] / dmu[site])
}

/// Mean |Re J_n| of h expressed in nm.
pub fn j_norm(h: &EffectiveHamiltonian, ref_wavelength: f64) -> Result<f64> {
    let hops = h.superdiagonal();
    if hops.is_empty() {
        return Err(Error::InvalidSpec("j_norm needs at least two sites".into()));
    }
    let mean = hops.iter().map(|j| j.re.abs()).sum::<f64>() / hops.len() as f64;
    Ok(mean * units::nm_per_ghz(ref_wavelength))
}
