//! Versioned file formats.
//!
//! JSON documents carry a mandatory `version` and a `generator` string and
//! reject unknown fields. Physical fields are named with their unit. Spectra
//! are CSV with a `#` comment line naming the generator, the spectrum kind
//! and the reference wavelength.
//!
//! Floats are written in shortest round-trip form, so `load(save(x)) == x`
//! holds bit for bit.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::calibration::{SweepDataset, SweepRecord};
use crate::device::DeviceTruth;
use crate::error::{Error, Result};
use crate::lattice::{EffectiveHamiltonian, LatticeSpec};
use crate::response::{FrequencyGrid, Spectrum, SpectrumKind};
use crate::thermal::{CrosstalkModel, VoltageProfile, N_BETA, N_GAMMA};
use crate::tomography::{FitReport, LorentzianSum};
use crate::units;

pub const FORMAT_VERSION: u32 = 1;

pub fn generator() -> String {
    format!("cca-core {}", env!("CARGO_PKG_VERSION"))
}

/// Documents with a version field.
pub trait Versioned {
    fn version(&self) -> u32;
}

fn check_version(v: u32) -> Result<()> {
    if v != FORMAT_VERSION {
        return Err(Error::Format(format!("unsupported format version {v} (expected {FORMAT_VERSION})")));
    }
    Ok(())
}

pub fn to_json<T: Serialize>(doc: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(doc)?;
    s.push('\n');
    Ok(s)
}

pub fn from_json<T: DeserializeOwned + Versioned>(text: &str) -> Result<T> {
    let doc: T = serde_json::from_str(text)?;
    check_version(doc.version())?;
    Ok(doc)
}

pub fn save_json<T: Serialize>(path: impl AsRef<Path>, doc: &T) -> Result<()> {
    std::fs::write(path, to_json(doc)?)?;
    Ok(())
}

pub fn load_json<T: DeserializeOwned + Versioned>(path: impl AsRef<Path>) -> Result<T> {
    from_json(&std::fs::read_to_string(path)?)
}

macro_rules! versioned {
    ($($t:ty),*) => {
        $(impl Versioned for $t {
            fn version(&self) -> u32 {
                self.version
            }
        })*
    };
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeSection {
    pub mu_ghz: Vec<f64>,
    pub hop_ghz: Vec<f64>,
    pub kappa_ghz: Vec<f64>,
    pub gamma_in_ghz: f64,
    pub gamma_out_ghz: f64,
    pub ref_wavelength_nm: f64,
}

impl From<&LatticeSpec> for LatticeSection {
    fn from(s: &LatticeSpec) -> Self {
        Self {
            mu_ghz: s.mu.clone(),
            hop_ghz: s.hop.clone(),
            kappa_ghz: s.kappa.clone(),
            gamma_in_ghz: s.gamma_in,
            gamma_out_ghz: s.gamma_out,
            ref_wavelength_nm: s.ref_wavelength,
        }
    }
}

impl LatticeSection {
    pub fn to_spec(&self) -> Result<LatticeSpec> {
        let spec = LatticeSpec {
            mu: self.mu_ghz.clone(),
            hop: self.hop_ghz.clone(),
            kappa: self.kappa_ghz.clone(),
            gamma_in: self.gamma_in_ghz,
            gamma_out: self.gamma_out_ghz,
            ref_wavelength: self.ref_wavelength_nm,
        };
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CrosstalkSection {
    pub delta_nm: Vec<f64>,
    pub alpha_nm_per_v2: Vec<f64>,
    /// β_d for d = 1, 2, 3.
    pub beta: Vec<f64>,
    /// γ in canonical orbit order.
    pub gamma_cross: Vec<f64>,
}

impl From<&CrosstalkModel> for CrosstalkSection {
    fn from(m: &CrosstalkModel) -> Self {
        Self {
            delta_nm: m.delta.clone(),
            alpha_nm_per_v2: m.alpha.clone(),
            beta: m.beta.to_vec(),
            gamma_cross: m.gamma_cross.to_vec(),
        }
    }
}

impl CrosstalkSection {
    pub fn to_model(&self) -> Result<CrosstalkModel> {
        let beta: [f64; N_BETA] = self
            .beta
            .as_slice()
            .try_into()
            .map_err(|_| Error::LengthMismatch { expected: N_BETA, got: self.beta.len() })?;
        let gamma_cross: [f64; N_GAMMA] = self
            .gamma_cross
            .as_slice()
            .try_into()
            .map_err(|_| Error::LengthMismatch { expected: N_GAMMA, got: self.gamma_cross.len() })?;
        let model =
            CrosstalkModel { delta: self.delta_nm.clone(), alpha: self.alpha_nm_per_v2.clone(), beta, gamma_cross };
        model.validate()?;
        Ok(model)
    }
}

/// Lattice parameters and, optionally, a planted crosstalk model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceFile {
    pub version: u32,
    pub generator: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub lattice: LatticeSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub crosstalk: Option<CrosstalkSection>,
}

impl DeviceFile {
    pub fn from_spec(spec: &LatticeSpec, model: Option<&CrosstalkModel>) -> Self {
        Self {
            version: FORMAT_VERSION,
            generator: generator(),
            seed: None,
            lattice: spec.into(),
            crosstalk: model.map(Into::into),
        }
    }

    pub fn from_truth(truth: &DeviceTruth) -> Self {
        Self { seed: Some(truth.seed), ..Self::from_spec(&truth.spec, Some(&truth.model)) }
    }

    pub fn spec(&self) -> Result<LatticeSpec> {
        self.lattice.to_spec()
    }

    pub fn model(&self) -> Result<Option<CrosstalkModel>> {
        let Some(c) = &self.crosstalk else { return Ok(None) };
        let model = c.to_model()?;
        if model.n_sites() != self.lattice.mu_ghz.len() {
            return Err(Error::LengthMismatch { expected: self.lattice.mu_ghz.len(), got: model.n_sites() });
        }
        Ok(Some(model))
    }

    /// Both parts, for files written by the device generator.
    pub fn truth(&self) -> Result<DeviceTruth> {
        let model = self.model()?.ok_or_else(|| Error::Format("device file has no crosstalk section".into()))?;
        Ok(DeviceTruth { spec: self.spec()?, model, seed: self.seed.unwrap_or(0) })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub version: u32,
    pub generator: String,
    pub crosstalk: CrosstalkSection,
}

impl ModelFile {
    pub fn new(model: &CrosstalkModel) -> Self {
        Self { version: FORMAT_VERSION, generator: generator(), crosstalk: model.into() }
    }

    pub fn model(&self) -> Result<CrosstalkModel> {
        self.crosstalk.to_model()
    }
}

/// Dense H_eff (GHz) with the port rates needed to compute spectra.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HamiltonianFile {
    pub version: u32,
    pub generator: String,
    pub n: usize,
    pub real: Vec<Vec<f64>>,
    pub imag: Vec<Vec<f64>>,
    pub gamma_in_ghz: f64,
    pub gamma_out_ghz: f64,
    pub ref_wavelength_nm: f64,
}

impl HamiltonianFile {
    pub fn new(h: &EffectiveHamiltonian, gamma_in: f64, gamma_out: f64, ref_wavelength: f64) -> Self {
        let n = h.dim();
        let m = h.matrix();
        Self {
            version: FORMAT_VERSION,
            generator: generator(),
            n,
            real: (0..n).map(|i| (0..n).map(|j| m[(i, j)].re).collect()).collect(),
            imag: (0..n).map(|i| (0..n).map(|j| m[(i, j)].im).collect()).collect(),
            gamma_in_ghz: gamma_in,
            gamma_out_ghz: gamma_out,
            ref_wavelength_nm: ref_wavelength,
        }
    }

    /// Rebuild the matrix, checking shape, transpose symmetry and the
    /// tridiagonal band to `tol`.
    pub fn hamiltonian(&self, tol: f64) -> Result<EffectiveHamiltonian> {
        let n = self.n;
        let rows_ok = |m: &Vec<Vec<f64>>| m.len() == n && m.iter().all(|r| r.len() == n);
        if !(rows_ok(&self.real) && rows_ok(&self.imag)) {
            return Err(Error::Format(format!("`real` and `imag` must both be {n}x{n}")));
        }
        if !(self.ref_wavelength_nm.is_finite() && self.ref_wavelength_nm > 0.0) {
            return Err(Error::Format("ref_wavelength_nm must be positive".into()));
        }
        if !(self.gamma_in_ghz >= 0.0 && self.gamma_out_ghz >= 0.0) {
            return Err(Error::Format("port rates must be non-negative".into()));
        }
        EffectiveHamiltonian::new(DMatrix::from_fn(n, n, |i, j| Complex64::new(self.real[i][j], self.imag[i][j])), tol)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecordEntry {
    pub volts: Vec<f64>,
    pub eigen_wavelengths_nm: Vec<f64>,
    #[serde(default)]
    pub tag: String,
}

/// Sweep records; the reference Hamiltonian lives in its own file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetFile {
    pub version: u32,
    pub generator: String,
    pub ref_wavelength_nm: f64,
    pub records: Vec<RecordEntry>,
}

impl DatasetFile {
    pub fn new(ref_wavelength: f64, records: &[SweepRecord]) -> Self {
        Self {
            version: FORMAT_VERSION,
            generator: generator(),
            ref_wavelength_nm: ref_wavelength,
            records: records
                .iter()
                .map(|r| RecordEntry {
                    volts: r.profile.volts().to_vec(),
                    eigen_wavelengths_nm: r.measured_eigen.clone(),
                    tag: r.tag.clone(),
                })
                .collect(),
        }
    }

    pub fn from_dataset(ds: &SweepDataset) -> Self {
        Self::new(ds.ref_wavelength, &ds.records)
    }

    pub fn records(&self) -> Result<Vec<SweepRecord>> {
        self.records
            .iter()
            .map(|r| {
                Ok(SweepRecord {
                    profile: VoltageProfile::new(r.volts.clone())?,
                    measured_eigen: r.eigen_wavelengths_nm.clone(),
                    tag: r.tag.clone(),
                })
            })
            .collect()
    }

    /// Attach the records to `h0`; reference wavelengths must agree.
    pub fn dataset(&self, h0: EffectiveHamiltonian, ref_wavelength: f64) -> Result<SweepDataset> {
        if self.ref_wavelength_nm != ref_wavelength {
            return Err(Error::Format(format!(
                "dataset reference wavelength {} nm differs from the hamiltonian's {} nm",
                self.ref_wavelength_nm, ref_wavelength
            )));
        }
        SweepDataset::new(h0, ref_wavelength, self.records()?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeEntry {
    pub amplitude_ghz: f64,
    pub phase_rad: f64,
    pub center_ghz: f64,
    pub halfwidth_ghz: f64,
}

/// Outcome of a tomography run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TomographyReportFile {
    pub version: u32,
    pub generator: String,
    pub fit: FitReport,
    pub gamma_in_ghz: f64,
    pub gamma_out_ghz: f64,
    pub gamma_out_source: String,
    pub modes: Vec<ModeEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub terminal_residual: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transmission_misfit: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl TomographyReportFile {
    pub fn new(fit: &FitReport, lsum: &LorentzianSum, gamma_out: f64, gamma_out_source: &str) -> Self {
        Self {
            version: FORMAT_VERSION,
            generator: generator(),
            fit: fit.clone(),
            gamma_in_ghz: lsum.gamma0(),
            gamma_out_ghz: gamma_out,
            gamma_out_source: gamma_out_source.to_string(),
            modes: lsum
                .modes
                .iter()
                .map(|m| ModeEntry {
                    amplitude_ghz: m.amplitude,
                    phase_rad: m.phase,
                    center_ghz: m.center,
                    halfwidth_ghz: m.halfwidth,
                })
                .collect(),
            terminal_residual: None,
            transmission_misfit: None,
            error: None,
        }
    }
}

/// Summary written next to a calibrated model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationReportFile {
    pub version: u32,
    pub generator: String,
    pub records: usize,
    pub parameters: usize,
    pub mean_error: f64,
    pub mean_deviation_jnorm: f64,
    pub iterations: usize,
    pub converged: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub holdout_mean_error: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub holdout_mean_deviation_jnorm: Option<f64>,
}

versioned!(DeviceFile, ModelFile, HamiltonianFile, DatasetFile, TomographyReportFile, CalibrationReportFile);

/// First column of a spectrum CSV.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    Detuning,
    Wavelength,
}

impl Axis {
    fn header(self) -> &'static str {
        match self {
            Axis::Detuning => "detuning_ghz,value",
            Axis::Wavelength => "wavelength_nm,value",
        }
    }
}

fn kind_name(kind: SpectrumKind) -> &'static str {
    match kind {
        SpectrumKind::Reflection => "reflection",
        SpectrumKind::Transmission => "transmission",
    }
}

/// Spectrum CSV text. Wavelength rows are written in ascending wavelength.
pub fn format_spectrum_csv(spectrum: &Spectrum, axis: Axis, ref_wavelength: f64) -> String {
    let mut s = format!("# {} kind={} ref_wavelength_nm={}\n", generator(), kind_name(spectrum.kind()), ref_wavelength);
    s.push_str(axis.header());
    s.push('\n');
    match axis {
        Axis::Detuning => {
            for (x, y) in spectrum.samples() {
                let _ = writeln!(s, "{x},{y}");
            }
        }
        Axis::Wavelength => {
            let rows: Vec<(f64, f64)> = spectrum.samples().collect();
            for (x, y) in rows.into_iter().rev() {
                let _ = writeln!(s, "{},{y}", units::absolute_wavelength(x, ref_wavelength));
            }
        }
    }
    s
}

/// A parsed spectrum CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumCsv {
    pub spectrum: Spectrum,
    pub axis: Axis,
    /// From the comment line, if present.
    pub ref_wavelength: Option<f64>,
}

/// Parse spectrum CSV. `kind` and `ref_wavelength` fill in what the comment
/// line does not state; a wavelength axis needs a reference from one of the
/// two.
pub fn parse_spectrum_csv(text: &str, kind: Option<SpectrumKind>, ref_wavelength: Option<f64>) -> Result<SpectrumCsv> {
    let mut file_kind = None;
    let mut file_ref = None;
    let mut axis = None;
    let mut rows: Vec<(f64, f64)> = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            for token in comment.split_whitespace() {
                match token.split_once('=') {
                    Some(("kind", "reflection")) => file_kind = Some(SpectrumKind::Reflection),
                    Some(("kind", "transmission")) => file_kind = Some(SpectrumKind::Transmission),
                    Some(("kind", other)) => return Err(Error::Format(format!("unknown spectrum kind `{other}`"))),
                    Some(("ref_wavelength_nm", v)) => {
                        file_ref = Some(
                            v.parse::<f64>().map_err(|_| Error::Format(format!("bad reference wavelength `{v}`")))?,
                        )
                    }
                    _ => {}
                }
            }
            continue;
        }
        if axis.is_none() {
            axis = Some(match line {
                "detuning_ghz,value" => Axis::Detuning,
                "wavelength_nm,value" => Axis::Wavelength,
                other => return Err(Error::Format(format!("unexpected header `{other}`"))),
            });
            continue;
        }
        let parse = |f: Option<&str>| -> Result<f64> {
            let f = f.ok_or_else(|| Error::Format(format!("line {}: expected two columns", lineno + 1)))?;
            f.trim().parse::<f64>().map_err(|_| Error::Format(format!("line {}: `{f}` is not a number", lineno + 1)))
        };
        let mut cols = line.split(',');
        let (x, y) = (parse(cols.next())?, parse(cols.next())?);
        if cols.next().is_some() {
            return Err(Error::Format(format!("line {}: expected two columns", lineno + 1)));
        }
        rows.push((x, y));
    }
    let axis = axis.ok_or_else(|| Error::Format("missing header".into()))?;
    let kind = match (file_kind, kind) {
        (Some(a), Some(b)) if a != b => {
            return Err(Error::Format(format!(
                "file holds a {} spectrum, {} was requested",
                kind_name(a),
                kind_name(b)
            )))
        }
        (Some(a), _) | (None, Some(a)) => a,
        (None, None) => return Err(Error::Format("spectrum kind not stated in file or arguments".into())),
    };
    if rows.len() >= 2 && rows[1].0 < rows[0].0 {
        rows.reverse();
    }
    if let Some(i) = rows.windows(2).position(|w| w[1].0 <= w[0].0) {
        return Err(Error::Format(format!("first column is not strictly monotone at data row {}", i + 2)));
    }
    let (points, values): (Vec<f64>, Vec<f64>) = match axis {
        Axis::Detuning => rows.into_iter().unzip(),
        Axis::Wavelength => {
            let rw = file_ref
                .or(ref_wavelength)
                .ok_or_else(|| Error::Format("wavelength axis needs a reference wavelength".into()))?;
            rows.into_iter().rev().map(|(x, y)| (units::detuning_of_wavelength(x, rw), y)).unzip()
        }
    };
    let spectrum = Spectrum::new(FrequencyGrid::new(points)?, values, kind)?;
    Ok(SpectrumCsv { spectrum, axis, ref_wavelength: file_ref })
}

/// One `mode,wavelength_nm` row per eigen-wavelength.
pub fn format_eigen_csv(wavelengths: &[f64]) -> String {
    let mut s = format!("# {}\nmode,wavelength_nm\n", generator());
    for (k, w) in wavelengths.iter().enumerate() {
        let _ = writeln!(s, "{k},{w}");
    }
    s
}

/// Per-record errors, one row per record.
pub fn format_error_csv(records: &[SweepRecord], errors: &[f64], deviations: &[f64]) -> String {
    let mut s = format!("# {}\nrecord,tag,normalized_error,mean_deviation_jnorm\n", generator());
    for (k, ((r, e), d)) in records.iter().zip(errors).zip(deviations).enumerate() {
        let _ = writeln!(s, "{k},{},{e},{d}", r.tag.replace(',', ";"));
    }
    s
}

/// Comma-separated voltages, e.g. `0.1,0,0.5`.
pub fn parse_volts(text: &str) -> Result<VoltageProfile> {
    let volts = text
        .split([',', '\n', ' ', '\t'])
        .map(str::trim)
        .filter(|t| !t.is_empty() && !t.starts_with('#'))
        .map(|t| t.parse::<f64>().map_err(|_| Error::InvalidProfile(format!("`{t}` is not a voltage"))))
        .collect::<Result<Vec<_>>>()?;
    VoltageProfile::new(volts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::device::{generate_dataset, generate_device, DeviceRanges, Protocol};
    use crate::lattice::build_h_eff;
    use crate::response::resolvent_response;

    fn truth() -> DeviceTruth {
        generate_device(9, 8, &DeviceRanges::default()).unwrap()
    }

    #[test]
    fn device_round_trip() {
        let t = truth();
        let doc = DeviceFile::from_truth(&t);
        let text = to_json(&doc).unwrap();
        let back: DeviceFile = from_json(&text).unwrap();
        assert_eq!(back, doc);
        assert_eq!(back.truth().unwrap(), t);
        assert_eq!(to_json(&back).unwrap(), text);
        assert!(text.contains("\"mu_ghz\"") && text.contains("\"alpha_nm_per_v2\""));
    }

    #[test]
    fn rejects_unknown_fields_and_versions() {
        let text = to_json(&DeviceFile::from_truth(&truth())).unwrap();
        let extra = text.replacen("\"version\": 1,", "\"version\": 1,\n  \"colour\": 3,", 1);
        assert!(matches!(from_json::<DeviceFile>(&extra), Err(Error::Json(_))));
        let v2 = text.replacen("\"version\": 1", "\"version\": 2", 1);
        assert!(matches!(from_json::<DeviceFile>(&v2), Err(Error::Format(_))));
        let missing = text.replacen("\"version\": 1,", "", 1);
        assert!(from_json::<DeviceFile>(&missing).is_err());
    }

    #[test]
    fn hamiltonian_round_trip_and_checks() {
        let t = truth();
        let h = build_h_eff(&t.spec).unwrap();
        let doc = HamiltonianFile::new(&h, 1.0, 1.0, 1550.0);
        let back: HamiltonianFile = from_json(&to_json(&doc).unwrap()).unwrap();
        assert_eq!(back.hamiltonian(1e-9).unwrap(), h);
        let mut bad = back.clone();
        bad.real[0][1] += 1.0;
        assert!(matches!(bad.hamiltonian(1e-9), Err(Error::InvalidHamiltonian(_))));
        let mut wide = back.clone();
        wide.real[0][3] = 1.0;
        wide.real[3][0] = 1.0;
        assert!(matches!(wide.hamiltonian(1e-9), Err(Error::InvalidHamiltonian(_))));
        let mut short = back;
        short.imag.pop();
        assert!(matches!(short.hamiltonian(1e-9), Err(Error::Format(_))));
    }

    #[test]
    fn dataset_round_trip() {
        let t = truth();
        let ds = generate_dataset(&t, &Protocol::random(4, 2), &Default::default()).unwrap();
        let doc = DatasetFile::from_dataset(&ds);
        let back: DatasetFile = from_json(&to_json(&doc).unwrap()).unwrap();
        let rebuilt = back.dataset(ds.h0.clone(), ds.ref_wavelength).unwrap();
        assert_eq!(rebuilt.records, ds.records);
        assert!(back.dataset(ds.h0.clone(), 1549.0).is_err());
    }

    #[test]
    fn model_round_trip() {
        let m = truth().model;
        let back: ModelFile = from_json(&to_json(&ModelFile::new(&m)).unwrap()).unwrap();
        assert_eq!(back.model().unwrap(), m);
        let mut short = back;
        short.crosstalk.gamma_cross.pop();
        assert!(short.model().is_err());
    }

    #[test]
    fn spectrum_csv_round_trip() {
        let t = truth();
        let h = build_h_eff(&t.spec).unwrap();
        let grid = FrequencyGrid::linspace(-120.0, 120.0, 301).unwrap();
        let (r, _) = resolvent_response(&h, 1.0, 1.0, &grid).unwrap();
        let text = format_spectrum_csv(&r, Axis::Detuning, 1550.0);
        assert!(text.lines().nth(1) == Some("detuning_ghz,value"));
        let back = parse_spectrum_csv(&text, None, None).unwrap();
        assert_eq!(back.spectrum, r);
        assert_eq!(back.ref_wavelength, Some(1550.0));
        assert_eq!(format_spectrum_csv(&back.spectrum, Axis::Detuning, 1550.0), text);

        let wl = format_spectrum_csv(&r, Axis::Wavelength, 1550.0);
        let xs: Vec<f64> = wl.lines().skip(2).map(|l| l.split(',').next().unwrap().parse().unwrap()).collect();
        assert!(xs.windows(2).all(|w| w[1] > w[0]));
        let back = parse_spectrum_csv(&wl, None, None).unwrap();
        assert_eq!(back.spectrum.values(), r.values());
        for (a, b) in back.spectrum.grid().points().iter().zip(grid.points()) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn spectrum_csv_errors() {
        assert!(parse_spectrum_csv("x,y\n1,2\n", Some(SpectrumKind::Reflection), None).is_err());
        assert!(parse_spectrum_csv(
            "detuning_ghz,value\n1,0.5\n0.5,0.5\n2,0.5\n",
            Some(SpectrumKind::Reflection),
            None
        )
        .is_err());
        assert!(
            parse_spectrum_csv("detuning_ghz,value\n1,0.5\n2,-0.5\n", Some(SpectrumKind::Reflection), None).is_err()
        );
        assert!(parse_spectrum_csv("detuning_ghz,value\n1,0.5\n2,0.5\n", None, None).is_err());
        assert!(parse_spectrum_csv("wavelength_nm,value\n1550,0.5\n1551,0.5\n", Some(SpectrumKind::Reflection), None)
            .is_err());
        let s =
            parse_spectrum_csv("detuning_ghz,value\n2,0.5\n1,0.25\n", Some(SpectrumKind::Reflection), None).unwrap();
        assert_eq!(s.spectrum.grid().points(), &[1.0, 2.0]);
        assert_eq!(s.spectrum.values(), &[0.25, 0.5]);
    }

    #[test]
    fn volts_parsing() {
        assert_eq!(parse_volts("0.1, 0,0.5").unwrap().volts(), &[0.1, 0.0, 0.5]);
        assert!(parse_volts("0.1,-1").is_err());
        assert!(parse_volts("0.1,x").is_err());
    }
}
