//! Eigenvalues from a transmission spectrum.
//!
//! |T(ω)|² = |Σ_α d_α/(ω − ε_α)|² with d_α = √(γ₀γ_{N−1})⟨v_{N−1}|ε_α⟩⟨v₀|ε_α⟩.
//! The products d_α do not determine the per-site weights, so only the
//! eigenvalues are returned.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::fit::{check_margin, complete_by_residual, pack, Channel, FitConfig, FitReport, ModalProblem};
use super::seed::{find_features, typical_halfwidth};
use crate::error::{Error, Result};
use crate::optim::{self, LmConfig};
use crate::response::{Spectrum, SpectrumKind};

fn transmission_starts(
    spectrum: &Spectrum,
    y: &[f64],
    n_modes: usize,
    count: usize,
    lm: &LmConfig,
) -> Result<Vec<Vec<f64>>> {
    let scaled = Spectrum::new(spectrum.grid().clone(), y.to_vec(), SpectrumKind::Transmission)?;
    let peaks = find_features(&scaled, n_modes, false);
    let hw = typical_halfwidth(&peaks, spectrum.grid().mean_step());
    let (lo, hi) = (spectrum.grid().start(), spectrum.grid().stop());
    // interfering peaks make single-peak seeds poor; add one peak at a time
    let mut base = complete_by_residual(&scaled, y, Vec::new(), n_modes, lm)?;
    let missing = n_modes - base.len();
    for k in 0..missing {
        let c = lo + (k as f64 + 0.5) / missing as f64 * (hi - lo);
        base.push((Complex64::new(1e-2 * hw, 0.0), c, hw));
    }
    let mut starts = vec![pack(&base)];
    for s in 1..count {
        let mut rng = ChaCha8Rng::seed_from_u64(s as u64);
        let modes: Vec<_> = base
            .iter()
            .map(|&(d, c, w)| {
                let flip = rng.random_bool(0.5);
                (if flip { -d } else { d }, c, w)
            })
            .collect();
        starts.push(pack(&modes));
    }
    Ok(starts)
}

/// Fit |T(ω)|² to `n_modes` modal terms and return the eigenvalues sorted by
/// ascending real part, together with the fit report.
pub fn eigenvalues_from_transmission(
    spectrum: &Spectrum,
    n_modes: usize,
    config: &FitConfig,
) -> Result<(Vec<Complex64>, FitReport)> {
    if spectrum.kind() != SpectrumKind::Transmission {
        return Err(Error::InvalidConfig("eigenvalues_from_transmission needs a transmission spectrum".into()));
    }
    if n_modes == 0 {
        return Err(Error::InvalidConfig("mode count must be at least 1".into()));
    }
    if config.n_starts == 0 {
        return Err(Error::InvalidConfig("at least one start is required".into()));
    }
    if spectrum.len() < 3 {
        return Err(Error::InsufficientData(format!("spectrum has {} points", spectrum.len())));
    }
    let scale = spectrum.values().iter().cloned().fold(0.0, f64::max);
    if !(scale > 0.0) {
        return Err(Error::InsufficientData("transmission is identically zero".into()));
    }
    if config.check_margin {
        check_margin(spectrum, &find_features(spectrum, n_modes, false), false)?;
    }
    let x = spectrum.grid().points();
    let y: Vec<f64> = spectrum.values().iter().map(|v| v / scale).collect();
    let lm = LmConfig { max_iter: config.max_iter, ..LmConfig::default() };

    let mut best: Option<(Vec<f64>, f64, usize, bool, usize)> = None;
    let mut runs = 0;
    for (index, start) in transmission_starts(spectrum, &y, n_modes, config.n_starts, &lm)?.iter().enumerate() {
        runs += 1;
        // gauge on the largest seeded term
        let gauge = (0..n_modes).max_by(|&a, &b| start[4 * a].abs().total_cmp(&start[4 * b].abs())).unwrap_or(0);
        let problem = ModalProblem { x, y: &y, n_modes, channel: Channel::Transmission { gauge } };
        let Some(out) = optim::minimize(&problem, start, &lm) else { continue };
        let cost = problem.spectral_cost(&out.params);
        if best.as_ref().is_none_or(|b| cost < b.1) {
            best = Some((out.params, cost, out.iterations, out.converged, index));
        }
        if cost * scale * scale <= config.early_exit {
            break;
        }
    }
    let (params, cost, iterations, converged, start_index) =
        best.ok_or_else(|| Error::InsufficientData("no feasible starting point".into()))?;
    let mut eps: Vec<Complex64> = params.chunks(4).map(|m| Complex64::new(m[2], -m[3])).collect();
    eps.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    let spectral = cost * scale * scale;
    let report = FitReport {
        residual: spectral,
        spectral_residual: spectral,
        penalty_residue: 0.0,
        penalty_hops: None,
        iterations,
        converged,
        start_index,
        starts_run: runs,
    };
    Ok((eps, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{build_h_eff, LatticeSpec};
    use crate::response::{resolvent_response, FrequencyGrid};

    #[test]
    fn lossless_dimer_splitting() {
        let j = 6.0;
        let spec = LatticeSpec {
            mu: vec![0.0, 0.0],
            hop: vec![j],
            kappa: vec![0.0, 0.0],
            gamma_in: 0.8,
            gamma_out: 0.8,
            ref_wavelength: 1550.0,
        };
        let h = build_h_eff(&spec).unwrap();
        let grid = FrequencyGrid::linspace(-25.0, 25.0, 2001).unwrap();
        let (_, t) = resolvent_response(&h, spec.gamma_in, spec.gamma_out, &grid).unwrap();
        let (eps, report) = eigenvalues_from_transmission(&t, 2, &FitConfig::default()).unwrap();
        assert!(report.residual < 1e-12, "{report:?}");
        assert!((eps[0] - Complex64::new(-j, -0.4)).norm() < 1e-6, "{eps:?}");
        assert!((eps[1] - Complex64::new(j, -0.4)).norm() < 1e-6);
    }

    #[test]
    fn rejects_reflection_input() {
        let grid = FrequencyGrid::linspace(-1.0, 1.0, 11).unwrap();
        let s = Spectrum::new(grid, vec![1.0; 11], SpectrumKind::Reflection).unwrap();
        assert!(matches!(eigenvalues_from_transmission(&s, 1, &FitConfig::default()), Err(Error::InvalidConfig(_))));
    }
}
