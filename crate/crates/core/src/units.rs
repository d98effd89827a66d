//! First-order conversion between frequency detuning and wavelength offset.
//!
//! All internal arithmetic is in GHz of detuning about a reference optical
//! frequency. Wavelength units show up only at the edges (file formats,
//! thermal model coefficients, eigen-wavelength reports).

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// nm per GHz of detuning at `ref_wavelength_nm`, i.e. λ²/c in matching units.
#[inline]
pub fn nm_per_ghz(ref_wavelength_nm: f64) -> f64 {
    // (λ·1e-9)²/c · 1e9 Hz gives metres; ×1e9 for nm. The powers cancel.
    ref_wavelength_nm * ref_wavelength_nm / SPEED_OF_LIGHT
}

/// Wavelength offset (nm) produced by a detuning (GHz): Δλ = −(λ²/c)·Δν.
#[inline]
pub fn to_wavelength(detuning_ghz: f64, ref_wavelength_nm: f64) -> f64 {
    -nm_per_ghz(ref_wavelength_nm) * detuning_ghz
}

/// Detuning (GHz) corresponding to a wavelength offset (nm).
#[inline]
pub fn to_detuning(offset_nm: f64, ref_wavelength_nm: f64) -> f64 {
    -offset_nm / nm_per_ghz(ref_wavelength_nm)
}

/// Absolute wavelength (nm) of a detuning.
#[inline]
pub fn absolute_wavelength(detuning_ghz: f64, ref_wavelength_nm: f64) -> f64 {
    ref_wavelength_nm + to_wavelength(detuning_ghz, ref_wavelength_nm)
}

/// Detuning (GHz) of an absolute wavelength.
#[inline]
pub fn detuning_of_wavelength(wavelength_nm: f64, ref_wavelength_nm: f64) -> f64 {
    to_detuning(wavelength_nm - ref_wavelength_nm, ref_wavelength_nm)
}

/// Full linewidth (GHz) of a resonance with loaded quality factor `q`.
pub fn linewidth_ghz(q: f64, ref_wavelength_nm: f64) -> f64 {
    // c/(λ·1e-9) Hz = c/λ GHz
    SPEED_OF_LIGHT / ref_wavelength_nm / q
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn zero_detuning_is_zero_offset() {
        assert_eq!(to_wavelength(0.0, 1550.0), 0.0);
    }

    #[test]
    fn one_ghz_at_1550() {
        // λ²/c = (1550e-9)² / 299792458 m·s = 8.01388...e-21; ×1e9 Hz → 8.01388e-12 m
        let oracle = (1550e-9f64).powi(2) / 299_792_458.0 * 1e9 * 1e9;
        let got = to_wavelength(1.0, 1550.0);
        assert!((got + oracle).abs() < 1e-15);
        assert!((got + 0.008013).abs() < 1e-6);
    }

    #[test]
    fn round_trip() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let x: f64 = rng.random_range(-500.0..500.0);
            let back = to_detuning(to_wavelength(x, 1550.0), 1550.0);
            assert!((back - x).abs() <= 1e-12 * x.abs().max(1.0));
        }
    }

    #[test]
    fn q_linewidth() {
        let dv = linewidth_ghz(8.5e4, 1550.0);
        assert!((dv - 2.2755).abs() < 1e-3, "{dv}");
    }
}
