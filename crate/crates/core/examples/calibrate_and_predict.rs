//! Calibrate the full crosstalk model on 288 random drive profiles with
//! noisy eigen-wavelengths, then predict 20 held-out profiles.

use cca_core::calibration::{fit_full_seeded, holdout_evaluate, CalibrationConfig};
use cca_core::device::{generate_dataset, generate_device, DeviceRanges, NoiseSpec, Protocol};
use cca_core::thermal::{j_norm, predict_eigen};

fn main() -> cca_core::Result<()> {
    let device = generate_device(7, 8, &DeviceRanges::default())?;
    let h0 = device.hamiltonian()?;
    let rw = device.spec.ref_wavelength;
    let jn = j_norm(&h0, rw)?;
    let noise = NoiseSpec { eigen_sigma_nm: 0.01 * jn, seed: 1, ..Default::default() };

    let seeding = generate_dataset(&device, &Protocol::ramps(10, 0), &noise)?;
    let train = generate_dataset(&device, &Protocol::random(288, 1), &noise)?;
    let holdout = generate_dataset(&device, &Protocol::random(20, 2), &NoiseSpec { seed: 2, ..noise })?;

    let fit = fit_full_seeded(&train, &seeding.records, &CalibrationConfig::default())?;
    println!("converged {} after {} iterations", fit.converged, fit.iterations);
    println!("beta fit {:?}", fit.model.beta);
    println!("beta true {:?}", device.model.beta);

    let report = holdout_evaluate(&fit.model, &holdout)?;
    let dev = report.deviation_summary.expect("hold-out is not empty");
    println!("hold-out mean deviation {:.2}% of J_norm (max {:.2}%)", 100.0 * dev.mean, 100.0 * dev.max);

    let record = &holdout.records[0];
    let predicted = predict_eigen(&h0, &fit.model, &record.profile, rw)?;
    println!("profile {:?}", record.profile.volts());
    for (p, m) in predicted.iter().zip(&record.measured_eigen) {
        println!("  predicted {p:.5} nm, measured {m:.5} nm");
    }
    Ok(())
}
