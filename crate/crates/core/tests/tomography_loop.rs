use cca_core::device::{
    device_spectrum, generate_device, measure_eigen, DeviceRanges, DeviceTruth, Extraction, NoiseSpec,
};
use cca_core::eigen::{eig_complex_symmetric, DEFAULT_DEFECT_TOL};
use cca_core::response::{FrequencyGrid, Spectrum, SpectrumKind};
use cca_core::thermal::VoltageProfile;
use cca_core::tomography::{
    eigenvalues_from_transmission, estimate_gamma_out, fit_reflection, reconstruct, validate_reconstruction, FitConfig,
    LorentzianSum, ReconstructConfig, Reconstruction,
};

fn device(seed: u64) -> DeviceTruth {
    let mut d = generate_device(seed, 8, &DeviceRanges::default()).unwrap();
    d.model.delta = vec![0.0; 8];
    d
}

fn grid(d: &DeviceTruth, points: usize) -> FrequencyGrid {
    d.covering_grid(&VoltageProfile::zeros(8), 25.0, points).unwrap()
}

fn spectrum(d: &DeviceTruth, g: &FrequencyGrid, kind: SpectrumKind, noise: &NoiseSpec) -> Spectrum {
    device_spectrum(d, &VoltageProfile::zeros(8), g, noise, kind).unwrap()
}

fn truth_modes(d: &DeviceTruth) -> LorentzianSum {
    let eig = eig_complex_symmetric(&d.hamiltonian().unwrap(), DEFAULT_DEFECT_TOL).unwrap();
    LorentzianSum::from_eigensystem(&eig, d.spec.gamma_in)
}

fn tomography(d: &DeviceTruth, points: usize) -> (LorentzianSum, Reconstruction) {
    let s = spectrum(d, &grid(d, points), SpectrumKind::Reflection, &NoiseSpec::default());
    let (fit, _) = fit_reflection(&s, 8, &FitConfig::default()).unwrap();
    let rec = reconstruct(&fit, &ReconstructConfig::default()).unwrap();
    (fit, rec)
}

fn j_norm(d: &DeviceTruth) -> f64 {
    d.spec.hop.iter().sum::<f64>() / d.spec.hop.len() as f64
}

#[test]
fn noiseless_round_trip_recovers_the_lattice() {
    for seed in 0..20 {
        let d = device(seed);
        let (fit, rec) = tomography(&d, 2001);
        let jn = j_norm(&d);
        let truth = d.hamiltonian().unwrap();
        for (a, b) in rec.hamiltonian.diagonal().iter().zip(truth.diagonal()) {
            assert!((a.re - b.re).abs() < 0.01 * jn, "seed {seed}: mu {a} vs {b}");
        }
        for (a, b) in rec.hamiltonian.superdiagonal().iter().zip(&d.spec.hop) {
            assert!((a.re - b).abs() < 0.02 * b, "seed {seed}: J {a} vs {b}");
        }
        for w in rec.site_norms() {
            assert!((w - 1.0).norm() < 1e-6, "seed {seed}: site norm {w}");
        }
        assert!(fit.residue_imag() < 1e-3, "seed {seed}");
        assert!(rec.hop_imag_sum() / jn < 1e-2, "seed {seed}");
    }
}

#[test]
fn recovered_hamiltonian_predicts_transmission() {
    for seed in 0..5 {
        let d = device(seed);
        let g = grid(&d, 2001);
        let (_, rec) = tomography(&d, 2001);
        let t = spectrum(&d, &g, SpectrumKind::Transmission, &NoiseSpec::default());
        let gamma_out = estimate_gamma_out(&rec.hamiltonian, d.spec.gamma_in, &t).unwrap();
        assert!((gamma_out - d.spec.gamma_out).abs() < 1e-3 * d.spec.gamma_out, "{gamma_out}");
        let misfit = validate_reconstruction(&rec.hamiltonian, d.spec.gamma_in, gamma_out, &t).unwrap();
        assert!(misfit < 1e-4, "seed {seed}: {misfit}");
    }
}

#[test]
fn validation_misfit_grows_with_onsite_error() {
    let d = device(3);
    let g = grid(&d, 2001);
    let (_, rec) = tomography(&d, 2001);
    let t = spectrum(&d, &g, SpectrumKind::Transmission, &NoiseSpec::default());
    let jn = j_norm(&d);
    let mut last = -1.0;
    for k in 0..5 {
        let mut shift = vec![0.0; 8];
        shift[3] = 0.02 * k as f64 * jn;
        let h = rec.hamiltonian.with_diagonal_shift(&shift).unwrap();
        let misfit = validate_reconstruction(&h, d.spec.gamma_in, d.spec.gamma_out, &t).unwrap();
        assert!(misfit > last, "step {k}: {misfit} after {last}");
        last = misfit;
    }
}

#[test]
fn reflection_and_transmission_agree_on_eigenvalues() {
    for seed in 0..5 {
        let d = device(seed);
        let g = grid(&d, 2001);
        let truth = truth_modes(&d);
        let spacing = (truth.modes[7].center - truth.modes[0].center) / 7.0;
        let (_, rec) = tomography(&d, 2001);
        let t = spectrum(&d, &g, SpectrumKind::Transmission, &NoiseSpec::default());
        let (from_t, _) = eigenvalues_from_transmission(&t, 8, &FitConfig::default()).unwrap();
        let mut from_r: Vec<f64> = rec.eigenvalues.iter().map(|e| e.re).collect();
        from_r.sort_by(f64::total_cmp);
        let mut from_t: Vec<f64> = from_t.iter().map(|e| e.re).collect();
        from_t.sort_by(f64::total_cmp);
        for ((r, t), m) in from_r.iter().zip(&from_t).zip(&truth.modes) {
            assert!((t - m.center).abs() < 5e-3 * spacing, "seed {seed}: T {t} vs {}", m.center);
            assert!((r - t).abs() < 5e-3 * spacing, "seed {seed}: R {r} vs T {t}");
        }
    }
}

#[test]
fn spectrum_extraction_matches_direct_eigenvalues() {
    let d = device(1);
    let noise = NoiseSpec::default();
    let v = VoltageProfile::new(vec![0.3, 0.0, 0.5, 0.0, 0.0, 0.7, 0.0, 0.2]).unwrap();
    let direct = measure_eigen(&d, &v, &noise, Extraction::Direct, 0).unwrap();
    let fitted = measure_eigen(&d, &v, &noise, Extraction::SpectrumFit { points: 2001, margin_ghz: 25.0 }, 0).unwrap();
    // 1 GHz ≈ 8 pm at 1550 nm
    for (a, b) in direct.iter().zip(&fitted) {
        assert!((a - b).abs() < 1e-5, "{a} vs {b}");
    }
}

/// Devices whose weakest dip is at least ten noise standard deviations deep.
const RESOLVED_DEVICES: [u64; 2] = [274, 290];

#[test]
fn noisy_centers_within_five_percent_of_linewidth() {
    for dev in RESOLVED_DEVICES {
        let d = device(dev);
        let g = grid(&d, 4001);
        let truth = truth_modes(&d);
        assert!(truth.modes.iter().all(|m| 1.0 - truth.reflectance(m.center) > 0.1));
        for seed in 0..50 {
            let noise = NoiseSpec { spectrum_mult_sigma: 0.01, eigen_sigma_nm: 0.0, seed };
            let s = spectrum(&d, &g, SpectrumKind::Reflection, &noise);
            let (fit, _) = fit_reflection(&s, 8, &FitConfig::default()).unwrap();
            for (f, t) in fit.modes.iter().zip(&truth.modes) {
                let err = (f.center - t.center).abs() / (2.0 * t.halfwidth);
                assert!(err < 0.05, "device {dev} noise seed {seed}: center {} vs {} ({err})", f.center, t.center);
            }
        }
    }
}
