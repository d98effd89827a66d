//! Synthetic devices with planted ground truth.
//!
//! A [`DeviceTruth`] holds the lattice parameters and the crosstalk model of
//! an imaginary chip. Spectra and sweep datasets generated from it are pure
//! functions of the truth, the requested inputs and the seeds, so every
//! closed-loop test can compare a recovered quantity with the planted one.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::calibration::{SweepDataset, SweepRecord};
use crate::eigen::eigenvalues;
use crate::error::{Error, Result};
use crate::lattice::{build_h_eff, EffectiveHamiltonian, LatticeSpec};
use crate::response::{resolvent_response, FrequencyGrid, Spectrum, SpectrumKind};
use crate::thermal::{self, CrosstalkModel, VoltageProfile, N_BETA, N_GAMMA};
use crate::tomography::{eigenvalues_from_transmission, FitConfig};
use crate::units;

/// Sampling ranges for [`generate_device`]. Pairs are (low, high).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceRanges {
    pub mu_ghz: (f64, f64),
    pub hop_ghz: (f64, f64),
    /// Loaded quality factor every mode should have on average.
    pub quality_factor: f64,
    pub ref_wavelength_nm: f64,
    pub gamma_in_ghz: f64,
    pub gamma_out_ghz: f64,
    pub alpha_nm_per_v2: (f64, f64),
    /// β₁; β₂ and β₃ follow by geometric decay.
    pub beta1: f64,
    pub beta_decay: f64,
    /// γ coefficients are uniform in ±this.
    pub gamma_cross_max: f64,
    /// δ_n uniform in ±this (nm).
    pub delta_max_nm: f64,
}

impl Default for DeviceRanges {
    fn default() -> Self {
        Self {
            mu_ghz: (-5.0, 5.0),
            hop_ghz: (10.0, 50.0),
            quality_factor: 8.5e4,
            ref_wavelength_nm: 1550.0,
            gamma_in_ghz: 1.0,
            gamma_out_ghz: 1.0,
            alpha_nm_per_v2: (0.3, 0.5),
            beta1: 0.024,
            beta_decay: 0.25,
            gamma_cross_max: 0.002,
            delta_max_nm: 0.01,
        }
    }
}

impl DeviceRanges {
    fn validate(&self) -> Result<()> {
        let ordered = |(lo, hi): (f64, f64)| lo.is_finite() && hi.is_finite() && lo <= hi;
        if !(ordered(self.mu_ghz) && ordered(self.hop_ghz) && ordered(self.alpha_nm_per_v2)) {
            return Err(Error::InvalidConfig("ranges must be finite with low ≤ high".into()));
        }
        if !(self.hop_ghz.0 > 0.0 && self.alpha_nm_per_v2.0 > 0.0) {
            return Err(Error::InvalidConfig("hopping and heater efficiency ranges must be positive".into()));
        }
        if !(self.quality_factor > 0.0 && self.ref_wavelength_nm > 0.0) {
            return Err(Error::InvalidConfig("quality factor and reference wavelength must be positive".into()));
        }
        if !(self.gamma_in_ghz >= 0.0
            && self.gamma_out_ghz >= 0.0
            && self.gamma_cross_max >= 0.0
            && self.delta_max_nm >= 0.0)
        {
            return Err(Error::InvalidConfig("port rates and coefficient spreads must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceTruth {
    pub spec: LatticeSpec,
    pub model: CrosstalkModel,
    pub seed: u64,
}

impl DeviceTruth {
    pub fn n_sites(&self) -> usize {
        self.spec.n_sites()
    }

    pub fn hamiltonian(&self) -> Result<EffectiveHamiltonian> {
        build_h_eff(&self.spec)
    }

    /// Effective Hamiltonian with the heater shifts of `v` applied.
    pub fn driven_hamiltonian(&self, v: &VoltageProfile) -> Result<EffectiveHamiltonian> {
        let dmu = thermal::delta_mu(&self.model, v)?;
        let rw = self.spec.ref_wavelength;
        self.hamiltonian()?.with_diagonal_shift(&dmu.iter().map(|s| units::to_detuning(*s, rw)).collect::<Vec<_>>())
    }

    /// Probe grid reaching `margin_ghz` past the outermost resonances of `v`.
    pub fn covering_grid(&self, v: &VoltageProfile, margin_ghz: f64, points: usize) -> Result<FrequencyGrid> {
        FrequencyGrid::covering(&eigenvalues(&self.driven_hamiltonian(v)?)?, margin_ghz, points)
    }
}

/// Draw a reproducible device. Onsite losses are set so that the mean modal
/// linewidth equals c/(λQ): κ_n = c/(λQ) − (γ_in + γ_out)/N.
pub fn generate_device(seed: u64, n_sites: usize, ranges: &DeviceRanges) -> Result<DeviceTruth> {
    ranges.validate()?;
    if n_sites == 0 {
        return Err(Error::InvalidConfig("a device needs at least one site".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = |(lo, hi): (f64, f64)| if hi > lo { rng.random_range(lo..hi) } else { lo };
    let mu: Vec<f64> = (0..n_sites).map(|_| draw(ranges.mu_ghz)).collect();
    let hop: Vec<f64> = (1..n_sites).map(|_| draw(ranges.hop_ghz)).collect();
    let linewidth = units::linewidth_ghz(ranges.quality_factor, ranges.ref_wavelength_nm);
    let kappa_n = linewidth - (ranges.gamma_in_ghz + ranges.gamma_out_ghz) / n_sites as f64;
    if kappa_n < 0.0 {
        return Err(Error::InvalidConfig(format!(
            "port rates exceed the linewidth budget of {linewidth:.4} GHz at Q = {}",
            ranges.quality_factor
        )));
    }
    let spec = LatticeSpec {
        mu,
        hop,
        kappa: vec![kappa_n; n_sites],
        gamma_in: ranges.gamma_in_ghz,
        gamma_out: ranges.gamma_out_ghz,
        ref_wavelength: ranges.ref_wavelength_nm,
    };
    let alpha: Vec<f64> = (0..n_sites).map(|_| draw(ranges.alpha_nm_per_v2)).collect();
    let delta: Vec<f64> = (0..n_sites).map(|_| draw((-ranges.delta_max_nm, ranges.delta_max_nm))).collect();
    let beta: [f64; N_BETA] = std::array::from_fn(|d| ranges.beta1 * ranges.beta_decay.powi(d as i32));
    let gamma_cross: [f64; N_GAMMA] = std::array::from_fn(|_| draw((-ranges.gamma_cross_max, ranges.gamma_cross_max)));
    let model = CrosstalkModel { delta, alpha, beta, gamma_cross };
    spec.validate()?;
    model.validate()?;
    Ok(DeviceTruth { spec, model, seed })
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct NoiseSpec {
    /// Relative σ of multiplicative Gaussian noise on spectrum samples.
    pub spectrum_mult_sigma: f64,
    /// σ (nm) of additive Gaussian noise on eigen-wavelengths.
    pub eigen_sigma_nm: f64,
    pub seed: u64,
}

impl NoiseSpec {
    fn validate(&self) -> Result<()> {
        if !(self.spectrum_mult_sigma >= 0.0 && self.eigen_sigma_nm >= 0.0) {
            return Err(Error::InvalidConfig("noise sigmas must be non-negative".into()));
        }
        Ok(())
    }
}

/// Reflection or transmission of the driven device on `grid`, with
/// multiplicative noise (negative samples clipped to zero).
pub fn device_spectrum(
    truth: &DeviceTruth,
    v: &VoltageProfile,
    grid: &FrequencyGrid,
    noise: &NoiseSpec,
    kind: SpectrumKind,
) -> Result<Spectrum> {
    noise.validate()?;
    let h = truth.driven_hamiltonian(v)?;
    let (r, t) = resolvent_response(&h, truth.spec.gamma_in, truth.spec.gamma_out, grid)?;
    let clean = match kind {
        SpectrumKind::Reflection => r,
        SpectrumKind::Transmission => t,
    };
    if noise.spectrum_mult_sigma == 0.0 {
        return Ok(clean);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
    let values = clean
        .values()
        .iter()
        .map(|x| {
            let z: f64 = StandardNormal.sample(&mut rng);
            (x * (1.0 + noise.spectrum_mult_sigma * z)).max(0.0)
        })
        .collect();
    Spectrum::new(grid.clone(), values, kind)
}

/// How eigen-wavelengths are obtained for each record.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Extraction {
    /// Exact eigenvalues of the driven device plus eigen noise.
    Direct,
    /// Synthesize a transmission spectrum (with spectrum noise) and fit it.
    SpectrumFit { points: usize, margin_ghz: f64 },
}

/// Voltage profiles to record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Protocol {
    /// Steps per single-heater ramp (0 disables ramps); step k drives
    /// k·v_max/steps.
    pub ramp_steps: usize,
    /// Heaters to ramp; all when empty.
    pub ramp_heaters: Vec<usize>,
    pub ramp_v_max: f64,
    /// Profiles with every heater uniform in [0, random_v_max].
    pub random_profiles: usize,
    pub random_v_max: f64,
    /// Prepend the all-zero profile.
    pub include_zero: bool,
    pub seed: u64,
    pub extraction: Extraction,
}

impl Default for Protocol {
    fn default() -> Self {
        Self {
            ramp_steps: 12,
            ramp_heaters: Vec::new(),
            ramp_v_max: 0.8,
            random_profiles: 0,
            random_v_max: 0.8,
            include_zero: true,
            seed: 0,
            extraction: Extraction::Direct,
        }
    }
}

impl Protocol {
    /// Single-heater ramps on every heater plus the zero record.
    pub fn ramps(steps: usize, seed: u64) -> Self {
        Self { ramp_steps: steps, seed, ..Self::default() }
    }

    /// `count` random multi-heater profiles, no ramps, no zero record.
    pub fn random(count: usize, seed: u64) -> Self {
        Self { ramp_steps: 0, random_profiles: count, include_zero: false, seed, ..Self::default() }
    }

    fn validate(&self, n: usize) -> Result<()> {
        if !(self.ramp_v_max > 0.0
            && self.ramp_v_max.is_finite()
            && self.random_v_max > 0.0
            && self.random_v_max.is_finite())
        {
            return Err(Error::InvalidConfig("voltage ranges must be positive".into()));
        }
        if let Some(h) = self.ramp_heaters.iter().find(|&&h| h >= n) {
            return Err(Error::OutOfRange { index: *h, len: n });
        }
        if let Extraction::SpectrumFit { points, margin_ghz } = self.extraction {
            if points < 3 || !(margin_ghz > 0.0) {
                return Err(Error::InvalidConfig("spectrum extraction needs ≥ 3 points and a positive margin".into()));
            }
        }
        Ok(())
    }

    /// The profiles in record order, with tags.
    pub fn profiles(&self, n: usize) -> Result<Vec<(VoltageProfile, String)>> {
        self.validate(n)?;
        let mut out = Vec::new();
        if self.include_zero {
            out.push((VoltageProfile::zeros(n), "zero".to_string()));
        }
        let heaters: Vec<usize> =
            if self.ramp_heaters.is_empty() { (0..n).collect() } else { self.ramp_heaters.clone() };
        if self.ramp_steps > 0 {
            for &h in &heaters {
                for k in 1..=self.ramp_steps {
                    let v = self.ramp_v_max * k as f64 / self.ramp_steps as f64;
                    out.push((VoltageProfile::single(n, h, v)?, format!("ramp heater={h} step={k}")));
                }
            }
        }
        for i in 0..self.random_profiles {
            let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
            rng.set_stream(i as u64);
            let volts = (0..n).map(|_| rng.random_range(0.0..=self.random_v_max)).collect();
            out.push((VoltageProfile::new(volts)?, format!("random {i}")));
        }
        Ok(out)
    }
}

/// Eigen-wavelengths (nm, ascending) of the driven device as a measurement
/// would report them. Record `index` selects an independent noise stream.
pub fn measure_eigen(
    truth: &DeviceTruth,
    v: &VoltageProfile,
    noise: &NoiseSpec,
    extraction: Extraction,
    index: u64,
) -> Result<Vec<f64>> {
    noise.validate()?;
    let rw = truth.spec.ref_wavelength;
    let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
    rng.set_stream(index);
    let mut eig = match extraction {
        Extraction::Direct => thermal::predict_eigen(&truth.hamiltonian()?, &truth.model, v, rw)?,
        Extraction::SpectrumFit { points, margin_ghz } => {
            let grid = truth.covering_grid(v, margin_ghz, points)?;
            let spectrum_noise = NoiseSpec { seed: rng.random(), ..*noise };
            let t = device_spectrum(truth, v, &grid, &spectrum_noise, SpectrumKind::Transmission)?;
            let (eps, _) = eigenvalues_from_transmission(&t, truth.n_sites(), &FitConfig::default())?;
            let mut w: Vec<f64> = eps.iter().map(|e| units::absolute_wavelength(e.re, rw)).collect();
            w.sort_by(f64::total_cmp);
            w
        }
    };
    if noise.eigen_sigma_nm > 0.0 {
        for x in eig.iter_mut() {
            let z: f64 = StandardNormal.sample(&mut rng);
            *x += noise.eigen_sigma_nm * z;
        }
        eig.sort_by(f64::total_cmp);
    }
    Ok(eig)
}

/// Record a sweep dataset on the device. The dataset's reference
/// Hamiltonian is the device's own undriven H_eff.
pub fn generate_dataset(truth: &DeviceTruth, protocol: &Protocol, noise: &NoiseSpec) -> Result<SweepDataset> {
    let n = truth.n_sites();
    let records = protocol
        .profiles(n)?
        .into_iter()
        .enumerate()
        .map(|(i, (profile, tag))| {
            let measured_eigen = measure_eigen(truth, &profile, noise, protocol.extraction, i as u64)?;
            Ok(SweepRecord { profile, measured_eigen, tag })
        })
        .collect::<Result<Vec<_>>>()?;
    SweepDataset::new(truth.hamiltonian()?, truth.spec.ref_wavelength, records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eigen::eig_complex_symmetric;

    #[test]
    fn deterministic() {
        let r = DeviceRanges::default();
        assert_eq!(generate_device(7, 8, &r).unwrap(), generate_device(7, 8, &r).unwrap());
        assert_ne!(generate_device(7, 8, &r).unwrap(), generate_device(8, 8, &r).unwrap());
    }

    #[test]
    fn linewidth_budget() {
        let d = generate_device(1, 8, &DeviceRanges::default()).unwrap();
        let eig = eig_complex_symmetric(&d.hamiltonian().unwrap(), 1e-8).unwrap();
        let mean: f64 = eig.eigenvalues.iter().map(|e| -2.0 * e.im).sum::<f64>() / 8.0;
        // c/(λQ) at 1550 nm and Q = 8.5e4
        let want = 299_792_458.0 / 1550.0 / 8.5e4;
        assert!((mean - want).abs() < 1e-9, "{mean}");
        assert!((want - 2.2755).abs() < 1e-3);
    }

    #[test]
    fn planted_model_shape() {
        let d = generate_device(3, 8, &DeviceRanges::default()).unwrap();
        assert_eq!(d.model.delta.len(), 8);
        assert_eq!(d.model.alpha.len(), 8);
        assert_eq!(d.model.beta.len(), 3);
        assert_eq!(d.model.gamma_cross.len(), 12);
        assert_eq!(d.model.beta[0], 0.024);
    }

    #[test]
    fn clean_spectrum_is_lattice_output() {
        let mut d = generate_device(4, 8, &DeviceRanges::default()).unwrap();
        d.model.delta = vec![0.0; 8];
        let v = VoltageProfile::zeros(8);
        let grid = d.covering_grid(&v, 20.0, 500).unwrap();
        let s = device_spectrum(&d, &v, &grid, &NoiseSpec::default(), SpectrumKind::Reflection).unwrap();
        let (r, _) =
            resolvent_response(&build_h_eff(&d.spec).unwrap(), d.spec.gamma_in, d.spec.gamma_out, &grid).unwrap();
        assert_eq!(s, r);
    }

    #[test]
    fn spectrum_noise_statistics() {
        let d = generate_device(5, 8, &DeviceRanges::default()).unwrap();
        let v = VoltageProfile::zeros(8);
        let grid = d.covering_grid(&v, 20.0, 10_000).unwrap();
        let noise = NoiseSpec { spectrum_mult_sigma: 0.01, eigen_sigma_nm: 0.0, seed: 42 };
        let clean = device_spectrum(&d, &v, &grid, &NoiseSpec::default(), SpectrumKind::Reflection).unwrap();
        let a = device_spectrum(&d, &v, &grid, &noise, SpectrumKind::Reflection).unwrap();
        let b = device_spectrum(&d, &v, &grid, &noise, SpectrumKind::Reflection).unwrap();
        assert_eq!(a, b);
        let rel: Vec<f64> = a.values().iter().zip(clean.values()).map(|(x, c)| x / c - 1.0).collect();
        let m = rel.iter().sum::<f64>() / rel.len() as f64;
        let sd = (rel.iter().map(|r| (r - m).powi(2)).sum::<f64>() / (rel.len() - 1) as f64).sqrt();
        assert!((sd - 0.01).abs() < 0.2 * 0.01, "{sd}");
    }

    #[test]
    fn protocol_counts() {
        let p = Protocol::ramps(12, 0);
        let prof = p.profiles(8).unwrap();
        assert_eq!(prof.len(), 97);
        assert!(prof[0].0.is_zero());
        assert_eq!(prof.iter().filter(|(v, _)| v.driven().len() == 1).count(), 96);
        assert_eq!(Protocol::random(288, 1).profiles(8).unwrap().len(), 288);
        let bad = Protocol { ramp_heaters: vec![9], ..Protocol::default() };
        assert!(bad.profiles(8).is_err());
    }

    #[test]
    fn clean_records_match_prediction() {
        let d = generate_device(6, 8, &DeviceRanges::default()).unwrap();
        let ds = generate_dataset(&d, &Protocol::random(5, 3), &NoiseSpec::default()).unwrap();
        for r in &ds.records {
            let p = thermal::predict_eigen(&ds.h0, &d.model, &r.profile, ds.ref_wavelength).unwrap();
            assert_eq!(p, r.measured_eigen);
        }
    }

    #[test]
    fn record_streams_are_order_independent() {
        let d = generate_device(2, 8, &DeviceRanges::default()).unwrap();
        let noise = NoiseSpec { spectrum_mult_sigma: 0.0, eigen_sigma_nm: 0.001, seed: 5 };
        let all = generate_dataset(&d, &Protocol::random(6, 11), &noise).unwrap();
        let v = &all.records[4].profile;
        let single = measure_eigen(&d, v, &noise, Extraction::Direct, 4).unwrap();
        assert_eq!(single, all.records[4].measured_eigen);
    }
}
