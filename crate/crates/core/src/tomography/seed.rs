//! Initial guesses for the Lorentzian fit, taken from the dips (reflection)
//! or peaks (transmission) of a measured spectrum.

use super::{LorentzianMode, LorentzianSum};
use crate::error::{Error, Result};
use crate::response::Spectrum;

/// A located spectral feature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Feature {
    pub index: usize,
    pub center: f64,
    /// Prominence below the shoulders (dips) or height above 0 (peaks).
    pub depth: f64,
    pub halfwidth: f64,
}

/// Highest value (dips) or lowest value (peaks) between `i` and the first
/// sample beyond the extremum's own level in direction `dir`, or the edge.
fn shoulder(v: &[f64], i: usize, dir: isize, dip: bool) -> f64 {
    let mut best = v[i];
    let mut k = i as isize + dir;
    while k >= 0 && (k as usize) < v.len() {
        let x = v[k as usize];
        if (dip && x < v[i]) || (!dip && x > v[i]) {
            break;
        }
        best = if dip { best.max(x) } else { best.min(x) };
        k += dir;
    }
    best
}

/// Half width at `level` around extremum `i`: the smaller distance to the
/// first crossing of `level` on either side. A side that reaches the edge or
/// passes beyond the extremum's own level first is ignored.
fn half_width(x: &[f64], v: &[f64], i: usize, level: f64, dip: bool) -> Option<f64> {
    let crossed = |k: usize| if dip { v[k] >= level } else { v[k] <= level };
    let beyond = |k: usize| if dip { v[k] < v[i] } else { v[k] > v[i] };
    let interp = |a: usize, b: usize| {
        let (va, vb) = (v[a], v[b]);
        if vb == va {
            x[b]
        } else {
            x[a] + (level - va) / (vb - va) * (x[b] - x[a])
        }
    };
    let mut left = None;
    let mut k = i;
    while k > 0 {
        if beyond(k - 1) {
            break;
        }
        if crossed(k - 1) {
            left = Some(x[i] - interp(k, k - 1));
            break;
        }
        k -= 1;
    }
    let mut right = None;
    let mut k = i;
    while k + 1 < x.len() {
        if beyond(k + 1) {
            break;
        }
        if crossed(k + 1) {
            right = Some(interp(k, k + 1) - x[i]);
            break;
        }
        k += 1;
    }
    match (left, right) {
        (Some(l), Some(r)) => Some(l.min(r).max(0.0)),
        (Some(w), None) | (None, Some(w)) => Some(w.max(0.0)),
        (None, None) => None,
    }
}

/// Up to `count` most prominent dips (`dip = true`, baseline 1) or peaks
/// (`dip = false`, baseline 0), sorted by ascending center.
///
/// Prominence is measured against the lower of the two shoulders, so a weak
/// resonance on the tail of a strong one keeps its own width and depth.
pub(crate) fn find_features(spectrum: &Spectrum, count: usize, dip: bool) -> Vec<Feature> {
    let x = spectrum.grid().points();
    let v = spectrum.values();
    let step = spectrum.grid().mean_step();
    let mut cands: Vec<(f64, Feature)> = Vec::new();
    for i in 1..v.len() - 1 {
        let extremum = if dip { v[i] < v[i - 1] && v[i] <= v[i + 1] } else { v[i] > v[i - 1] && v[i] >= v[i + 1] };
        if !extremum {
            continue;
        }
        let (l, r) = (shoulder(v, i, -1, dip), shoulder(v, i, 1, dip));
        let prominence = if dip { l.min(r).min(1.0) - v[i] } else { v[i] - l.max(r) };
        if !(prominence > 0.0) {
            continue;
        }
        let level = if dip { v[i] + 0.5 * prominence } else { v[i] - 0.5 * prominence };
        let hw = half_width(x, v, i, level, dip).unwrap_or(step).max(0.5 * step);
        let depth = if dip { prominence } else { v[i] };
        cands.push((prominence, Feature { index: i, center: x[i], depth, halfwidth: hw }));
    }
    cands.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.index.cmp(&b.1.index)));
    let mut picked: Vec<Feature> = Vec::with_capacity(count);
    for (_, c) in cands {
        if picked.len() == count {
            break;
        }
        // noise ripples inside an already-picked feature are not new features
        if picked.iter().any(|p| (p.center - c.center).abs() < 0.5 * p.halfwidth) {
            continue;
        }
        picked.push(c);
    }
    picked.sort_by(|a, b| a.center.total_cmp(&b.center));
    picked
}

/// Residue magnitude for an isolated dip of fractional depth `depth` and
/// halfwidth β. |R|² at the center is (1 − c/β)², so c = β(1 ∓ sqrt(1 − D));
/// the undercoupled root takes the minus sign.
pub(crate) fn dip_residue(depth: f64, halfwidth: f64, overcoupled: bool) -> f64 {
    let root = (1.0 - depth.min(1.0)).max(0.0).sqrt();
    if overcoupled {
        halfwidth * (1.0 + root)
    } else {
        halfwidth * (1.0 - root)
    }
}

/// Median halfwidth of the detected features, or a few grid steps when none.
pub(crate) fn typical_halfwidth(features: &[Feature], step: f64) -> f64 {
    if features.is_empty() {
        return 4.0 * step;
    }
    let mut w: Vec<f64> = features.iter().map(|f| f.halfwidth).collect();
    w.sort_by(f64::total_cmp);
    w[w.len() / 2]
}

/// Seed `n_modes` Lorentzians from the dips of a reflection spectrum.
///
/// Dips are taken deepest first; each seeds a mode at the dip location with
/// the half-depth halfwidth, zero phase and the undercoupled residue for its
/// depth. Missing modes are spread uniformly over the grid with zero
/// amplitude.
pub fn seed_modes(spectrum: &Spectrum, n_modes: usize) -> Result<LorentzianSum> {
    if spectrum.len() < 3 {
        return Err(Error::InsufficientData(format!("spectrum has {} points; at least 3 are needed", spectrum.len())));
    }
    if n_modes == 0 {
        return Err(Error::InvalidConfig("mode count must be at least 1".into()));
    }
    let dips = find_features(spectrum, n_modes, true);
    let mut modes: Vec<LorentzianMode> = dips
        .iter()
        .map(|d| LorentzianMode {
            amplitude: dip_residue(d.depth, d.halfwidth, false),
            phase: 0.0,
            center: d.center,
            halfwidth: d.halfwidth,
        })
        .collect();
    let missing = n_modes - modes.len();
    let hw = typical_halfwidth(&dips, spectrum.grid().mean_step());
    let (lo, hi) = (spectrum.grid().start(), spectrum.grid().stop());
    for k in 0..missing {
        modes.push(LorentzianMode {
            amplitude: 0.0,
            phase: 0.0,
            center: lo + (k as f64 + 0.5) / missing as f64 * (hi - lo),
            halfwidth: hw,
        });
    }
    Ok(LorentzianSum::new(modes))
}
