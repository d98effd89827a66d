//! Checking a recovered Hamiltonian against a transmission measurement.

use crate::error::{Error, Result};
use crate::lattice::EffectiveHamiltonian;
use crate::response::{resolvent_amplitudes, resolvent_response, Spectrum, SpectrumKind};

/// Relative L2 misfit ‖a − b‖ / ‖b‖ between two spectra sampled on the same
/// grid. Zero when both are identical, including both identically zero.
pub fn spectrum_misfit(predicted: &Spectrum, measured: &Spectrum) -> Result<f64> {
    if predicted.grid() != measured.grid() {
        return Err(Error::ResampleRequired(format!(
            "grids differ ({} points on [{}, {}] vs {} points on [{}, {}])",
            predicted.len(),
            predicted.grid().start(),
            predicted.grid().stop(),
            measured.len(),
            measured.grid().start(),
            measured.grid().stop()
        )));
    }
    let num: f64 = predicted.values().iter().zip(measured.values()).map(|(a, b)| (a - b).powi(2)).sum();
    let den: f64 = measured.values().iter().map(|b| b * b).sum();
    if num == 0.0 {
        return Ok(0.0);
    }
    if den == 0.0 {
        return Err(Error::InsufficientData("measured spectrum is identically zero".into()));
    }
    Ok((num / den).sqrt())
}

/// Synthesize |T|² from a recovered Hamiltonian on the measurement grid and
/// return its relative L2 misfit against the measurement.
///
/// The grid has to reach every recovered resonance; otherwise the comparison
/// says nothing about the missing modes and the measurement must be resampled.
pub fn validate_reconstruction(
    h_rec: &EffectiveHamiltonian,
    gamma_in: f64,
    gamma_out: f64,
    measured_t: &Spectrum,
) -> Result<f64> {
    if measured_t.kind() != SpectrumKind::Transmission {
        return Err(Error::InvalidConfig("validation needs a transmission spectrum".into()));
    }
    let grid = measured_t.grid();
    let eps = crate::eigen::eigenvalues(h_rec)?;
    if let Some(e) = eps.iter().find(|e| e.re < grid.start() || e.re > grid.stop()) {
        return Err(Error::ResampleRequired(format!(
            "resonance at {:.4} GHz lies outside the measured grid [{}, {}]",
            e.re,
            grid.start(),
            grid.stop()
        )));
    }
    let (_, t) = resolvent_response(h_rec, gamma_in, gamma_out, grid)?;
    spectrum_misfit(&t, measured_t)
}

/// Least-squares estimate of the output port rate from a transmission
/// measurement, given γ_in and a Hamiltonian whose last diagonal already
/// carries the output loss. |T|² is linear in γ_out for fixed H, so the
/// estimate is closed-form.
pub fn estimate_gamma_out(h_rec: &EffectiveHamiltonian, gamma_in: f64, measured_t: &Spectrum) -> Result<f64> {
    let mut num = 0.0;
    let mut den = 0.0;
    for (i, (w, t)) in measured_t.samples().enumerate() {
        // unit γ_out gives the shape γ_in |x_{N−1}|²
        let (_, a) =
            resolvent_amplitudes(h_rec, gamma_in, 1.0, w).ok_or(Error::SingularFrequency { index: i, omega: w })?;
        let a = a.norm_sqr();
        num += a * t;
        den += a * a;
    }
    if !(den > 0.0) {
        return Err(Error::InsufficientData("model transmission vanishes on the grid".into()));
    }
    Ok((num / den).max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{build_h_eff, LatticeSpec};
    use crate::response::FrequencyGrid;

    fn device() -> (LatticeSpec, EffectiveHamiltonian) {
        let spec = LatticeSpec {
            mu: vec![1.0, -2.0, 0.5],
            hop: vec![12.0, 20.0],
            kappa: vec![1.5, 1.4, 1.6],
            gamma_in: 0.7,
            gamma_out: 0.9,
            ref_wavelength: 1550.0,
        };
        let h = build_h_eff(&spec).unwrap();
        (spec, h)
    }

    #[test]
    fn identity_scores_zero() {
        let (spec, h) = device();
        let grid = FrequencyGrid::linspace(-60.0, 60.0, 601).unwrap();
        let (_, t) = resolvent_response(&h, spec.gamma_in, spec.gamma_out, &grid).unwrap();
        assert_eq!(validate_reconstruction(&h, spec.gamma_in, spec.gamma_out, &t).unwrap(), 0.0);
        assert_eq!(spectrum_misfit(&t, &t).unwrap(), 0.0);
        let g = estimate_gamma_out(&h, spec.gamma_in, &t).unwrap();
        assert!((g - spec.gamma_out).abs() < 1e-12);
    }

    #[test]
    fn grid_mismatch() {
        let (spec, h) = device();
        let a = FrequencyGrid::linspace(-60.0, 60.0, 601).unwrap();
        let b = FrequencyGrid::linspace(-60.0, 60.0, 602).unwrap();
        let (_, ta) = resolvent_response(&h, spec.gamma_in, spec.gamma_out, &a).unwrap();
        let (_, tb) = resolvent_response(&h, spec.gamma_in, spec.gamma_out, &b).unwrap();
        assert!(matches!(spectrum_misfit(&ta, &tb), Err(Error::ResampleRequired(_))));
        let narrow = FrequencyGrid::linspace(-5.0, 5.0, 101).unwrap();
        let (_, tn) = resolvent_response(&h, spec.gamma_in, spec.gamma_out, &narrow).unwrap();
        assert!(matches!(
            validate_reconstruction(&h, spec.gamma_in, spec.gamma_out, &tn),
            Err(Error::ResampleRequired(_))
        ));
    }
}
