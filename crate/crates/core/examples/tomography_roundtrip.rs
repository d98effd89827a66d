//! Recover the effective Hamiltonian of a lattice from its reflection
//! spectrum, then check the result against the held-back transmission.

use cca_core::device::{device_spectrum, generate_device, DeviceRanges, NoiseSpec};
use cca_core::response::SpectrumKind;
use cca_core::thermal::VoltageProfile;
use cca_core::tomography::{
    estimate_gamma_out, fit_reflection, reconstruct, validate_reconstruction, FitConfig, ReconstructConfig,
};

fn main() -> cca_core::Result<()> {
    let mut device = generate_device(274, 8, &DeviceRanges::default())?;
    device.model.delta = vec![0.0; 8];
    let v = VoltageProfile::zeros(8);
    let grid = device.covering_grid(&v, 25.0, 2001)?;
    let r = device_spectrum(&device, &v, &grid, &NoiseSpec::default(), SpectrumKind::Reflection)?;
    let t = device_spectrum(&device, &v, &grid, &NoiseSpec::default(), SpectrumKind::Transmission)?;

    let (modes, report) = fit_reflection(&r, 8, &FitConfig::default())?;
    println!("fit residual {:.2e} after {} iterations", report.residual, report.iterations);
    let rec = reconstruct(&modes, &ReconstructConfig::default())?;

    let truth = device.hamiltonian()?;
    println!("site   mu true   mu rec     J true    J rec");
    let (dt, dr) = (truth.diagonal(), rec.hamiltonian.diagonal());
    let (jt, jr) = (truth.superdiagonal(), rec.hamiltonian.superdiagonal());
    for n in 0..8 {
        let hop = if n < 7 { format!("{:9.4} {:9.4}", jt[n].re, jr[n].re) } else { String::new() };
        println!("{n:4} {:9.4} {:9.4}  {hop}", dt[n].re, dr[n].re);
    }

    let gamma_out = estimate_gamma_out(&rec.hamiltonian, device.spec.gamma_in, &t)?;
    let misfit = validate_reconstruction(&rec.hamiltonian, device.spec.gamma_in, gamma_out, &t)?;
    println!("gamma_out estimate {gamma_out:.6} GHz (true {:.6})", device.spec.gamma_out);
    println!("transmission misfit {misfit:.2e}");

    let noisy = device_spectrum(
        &device,
        &v,
        &grid,
        &NoiseSpec { spectrum_mult_sigma: 0.01, ..Default::default() },
        SpectrumKind::Reflection,
    )?;
    let (noisy_modes, _) = fit_reflection(&noisy, 8, &FitConfig::default())?;
    println!("centers at 1% spectrum noise (GHz):");
    for (a, b) in noisy_modes.modes.iter().zip(&modes.modes) {
        println!("  {:9.4} vs {:9.4}", a.center, b.center);
    }
    Ok(())
}
