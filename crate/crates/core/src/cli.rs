//! The `cca` command-line front end.
//!
//! Exit codes: 0 success, 2 validation error, 3 numerical error,
//! 4 non-convergence (output files are still written and flagged).

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::calibration::{self, CalibrationConfig, CalibrationInit};
use crate::device::{self, DeviceRanges, Extraction, NoiseSpec, Protocol};
use crate::error::{Error, Result};
use crate::io::{
    self, Axis, CalibrationReportFile, DatasetFile, DeviceFile, HamiltonianFile, ModelFile, TomographyReportFile,
};
use crate::lattice::STRUCTURE_TOL;
use crate::response::{FrequencyGrid, SpectrumKind};
use crate::thermal::{self, VoltageProfile};
use crate::tomography::{self, FitConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_NOT_CONVERGED: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "cca", version, about = "Coupled cavity array simulation, tomography and crosstalk calibration")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write the reflection or transmission spectrum of a device as CSV.
    Simulate(SimulateArgs),
    /// Recover H_eff from a reflection spectrum.
    Tomography(TomographyArgs),
    /// Fit a crosstalk model to a sweep dataset.
    Calibrate(CalibrateArgs),
    /// Print predicted eigen-wavelengths for a voltage profile.
    Predict(PredictArgs),
    /// Generate a random device with a planted crosstalk model.
    GenDevice(GenDeviceArgs),
    /// Record a sweep dataset on a generated device.
    GenDataset(GenDatasetArgs),
    /// Print the nearest-neighbour crosstalk ratio of a model.
    Eta(EtaArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KindArg {
    #[value(name = "R", alias = "r", alias = "reflection")]
    R,
    #[value(name = "T", alias = "t", alias = "transmission")]
    T,
}

impl From<KindArg> for SpectrumKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::R => SpectrumKind::Reflection,
            KindArg::T => SpectrumKind::Transmission,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AxisArg {
    Detuning,
    Wavelength,
}

impl From<AxisArg> for Axis {
    fn from(a: AxisArg) -> Self {
        match a {
            AxisArg::Detuning => Axis::Detuning,
            AxisArg::Wavelength => Axis::Wavelength,
        }
    }
}

#[derive(Debug, Args)]
pub struct VoltsArgs {
    /// Comma-separated heater voltages (V); all zero when omitted.
    #[arg(long, allow_hyphen_values = true, conflicts_with = "volts_file")]
    pub volts: Option<String>,
    /// File holding the voltages, separated by commas or whitespace.
    #[arg(long)]
    pub volts_file: Option<PathBuf>,
}

impl VoltsArgs {
    fn profile(&self, n: usize) -> Result<VoltageProfile> {
        let text = match (&self.volts, &self.volts_file) {
            (Some(v), _) => v.clone(),
            (None, Some(p)) => std::fs::read_to_string(p)?,
            (None, None) => return Ok(VoltageProfile::zeros(n)),
        };
        let v = io::parse_volts(&text)?;
        if v.len() != n {
            return Err(Error::InvalidProfile(format!("{} voltages given for {n} sites", v.len())));
        }
        Ok(v)
    }
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Device file.
    #[arg(long)]
    pub device: PathBuf,
    #[command(flatten)]
    pub volts: VoltsArgs,
    #[arg(long, value_enum, default_value = "R")]
    pub kind: KindArg,
    /// Grid start (GHz detuning); with --stop-ghz, overrides the automatic grid.
    #[arg(long, requires = "stop_ghz", allow_hyphen_values = true)]
    pub start_ghz: Option<f64>,
    #[arg(long, requires = "start_ghz", allow_hyphen_values = true)]
    pub stop_ghz: Option<f64>,
    /// Automatic grid: margin beyond the outermost resonances (GHz).
    #[arg(long, default_value_t = 25.0)]
    pub margin_ghz: f64,
    #[arg(long, default_value_t = 4001)]
    pub points: usize,
    /// Relative multiplicative noise σ.
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value = "detuning")]
    pub axis: AxisArg,
    #[arg(short, long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TomographyArgs {
    /// Reflection spectrum CSV.
    #[arg(long)]
    pub spectrum: PathBuf,
    /// Number of modes (sites).
    #[arg(long)]
    pub modes: usize,
    /// Reference wavelength (nm) for files that do not state one.
    #[arg(long)]
    pub ref_wavelength: Option<f64>,
    /// Transmission spectrum CSV used to estimate γ_out and validate.
    #[arg(long)]
    pub transmission: Option<PathBuf>,
    /// Output port rate (GHz) when no transmission spectrum is given;
    /// defaults to the fitted input rate.
    #[arg(long, conflicts_with = "transmission")]
    pub gamma_out: Option<f64>,
    #[arg(long, default_value_t = 8)]
    pub starts: usize,
    #[arg(long, default_value_t = 300)]
    pub max_iter: usize,
    #[arg(long, default_value_t = 1.0)]
    pub residue_weight: f64,
    #[arg(long, default_value_t = 1.0)]
    pub hop_weight: f64,
    /// Skip the grid-margin precondition.
    #[arg(long)]
    pub no_margin_check: bool,
    /// Output Hamiltonian file.
    #[arg(short, long)]
    pub out: PathBuf,
    /// Output JSON report.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    /// Reference Hamiltonian file.
    #[arg(long)]
    pub h0: PathBuf,
    /// Records to fit.
    #[arg(long)]
    pub dataset: PathBuf,
    /// Extra records (single-heater ramps, zero record) used only for the
    /// starting point.
    #[arg(long)]
    pub seeding: Option<PathBuf>,
    /// Records held out for evaluation.
    #[arg(long)]
    pub holdout: Option<PathBuf>,
    #[arg(long, default_value_t = 100)]
    pub max_iter: usize,
    /// Randomly perturb the data-driven start by up to this fraction.
    #[arg(long, requires = "seed")]
    pub perturb: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output model file.
    #[arg(short, long)]
    pub out: PathBuf,
    /// Per-record error CSV.
    #[arg(long)]
    pub errors: Option<PathBuf>,
    /// Per-record error CSV for the hold-out set.
    #[arg(long, requires = "holdout")]
    pub holdout_errors: Option<PathBuf>,
    /// JSON summary.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub h0: PathBuf,
    #[arg(long)]
    pub model: PathBuf,
    #[command(flatten)]
    pub volts: VoltsArgs,
    /// Write CSV here instead of standard output.
    #[arg(short, long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GenDeviceArgs {
    #[arg(long)]
    pub seed: u64,
    #[arg(long, default_value_t = 8)]
    pub sites: usize,
    #[arg(long, default_value_t = 8.5e4)]
    pub q: f64,
    #[arg(long, default_value_t = 1550.0)]
    pub ref_wavelength: f64,
    #[arg(long, default_value_t = 10.0)]
    pub hop_min_ghz: f64,
    #[arg(long, default_value_t = 50.0)]
    pub hop_max_ghz: f64,
    #[arg(long, default_value_t = 0.024)]
    pub beta1: f64,
    #[arg(short, long)]
    pub out: PathBuf,
    /// Also write the device's H_eff.
    #[arg(long)]
    pub hamiltonian: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GenDatasetArgs {
    /// Device file with a crosstalk section.
    #[arg(long)]
    pub device: PathBuf,
    /// Steps per single-heater ramp (0 disables ramps).
    #[arg(long, default_value_t = 0)]
    pub ramp_steps: usize,
    #[arg(long, default_value_t = 0.8)]
    pub ramp_v_max: f64,
    /// Random multi-heater profiles.
    #[arg(long, default_value_t = 0)]
    pub random: usize,
    #[arg(long, default_value_t = 0.8)]
    pub random_v_max: f64,
    /// Prepend the zero-voltage record.
    #[arg(long)]
    pub zero: bool,
    /// Eigen-wavelength noise σ (nm).
    #[arg(long, default_value_t = 0.0, conflicts_with = "eigen_noise_jnorm")]
    pub eigen_noise_nm: f64,
    /// Eigen-wavelength noise σ as a fraction of J_norm.
    #[arg(long)]
    pub eigen_noise_jnorm: Option<f64>,
    /// Extract eigenvalues by fitting noisy transmission spectra.
    #[arg(long)]
    pub spectrum_fit: bool,
    /// Multiplicative spectrum noise for --spectrum-fit.
    #[arg(long, default_value_t = 0.0, requires = "spectrum_fit")]
    pub spectrum_noise: f64,
    #[arg(long, default_value_t = 4001)]
    pub points: usize,
    #[arg(long)]
    pub seed: u64,
    #[arg(short, long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EtaArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Heater site.
    #[arg(long, default_value_t = 0)]
    pub site: usize,
    /// Evaluate the ratio from the shifts at this drive voltage.
    #[arg(long)]
    pub volts: Option<f64>,
}

/// Parse `args` (including the program name) and run. Returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let text = e.render().to_string();
            let _ = if code == 0 { write!(out, "{text}") } else { write!(err, "{text}") };
            return if code == 0 { EXIT_OK } else { EXIT_VALIDATION };
        }
    };
    match execute(&cli.command, out, err) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    if e.is_numerical() {
        EXIT_NUMERICAL
    } else {
        EXIT_VALIDATION
    }
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text)?;
    Ok(())
}

fn execute(cmd: &Command, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    match cmd {
        Command::Simulate(a) => simulate(a),
        Command::Tomography(a) => tomography_cmd(a, err),
        Command::Calibrate(a) => calibrate(a, err),
        Command::Predict(a) => predict(a, out),
        Command::GenDevice(a) => gen_device(a),
        Command::GenDataset(a) => gen_dataset(a),
        Command::Eta(a) => eta(a, out),
    }
}

fn simulate(a: &SimulateArgs) -> Result<i32> {
    let doc: DeviceFile = io::load_json(&a.device)?;
    let spec = doc.spec()?;
    let n = spec.n_sites();
    let v = a.volts.profile(n)?;
    let model = match doc.model()? {
        Some(m) => m,
        None if v.is_zero() => zero_model(n),
        None => {
            return Err(Error::InvalidProfile(
                "device file has no crosstalk section; voltages cannot be applied".into(),
            ))
        }
    };
    let truth = device::DeviceTruth { spec, model, seed: doc.seed.unwrap_or(0) };
    let grid = match (a.start_ghz, a.stop_ghz) {
        (Some(lo), Some(hi)) => FrequencyGrid::linspace(lo, hi, a.points)?,
        _ => truth.covering_grid(&v, a.margin_ghz, a.points)?,
    };
    let noise = NoiseSpec { spectrum_mult_sigma: a.noise, eigen_sigma_nm: 0.0, seed: a.seed };
    let spectrum = device::device_spectrum(&truth, &v, &grid, &noise, a.kind.into())?;
    write_file(&a.out, &io::format_spectrum_csv(&spectrum, a.axis.into(), truth.spec.ref_wavelength))?;
    Ok(EXIT_OK)
}

fn zero_model(n: usize) -> thermal::CrosstalkModel {
    thermal::CrosstalkModel {
        delta: vec![0.0; n],
        alpha: vec![1.0; n],
        beta: [0.0; thermal::N_BETA],
        gamma_cross: [0.0; thermal::N_GAMMA],
    }
}

fn tomography_cmd(a: &TomographyArgs, err: &mut dyn Write) -> Result<i32> {
    if a.modes == 0 {
        return Err(Error::InvalidConfig("--modes must be at least 1".into()));
    }
    let parsed = io::parse_spectrum_csv(
        &std::fs::read_to_string(&a.spectrum)?,
        Some(SpectrumKind::Reflection),
        a.ref_wavelength,
    )?;
    let ref_wavelength = parsed
        .ref_wavelength
        .or(a.ref_wavelength)
        .ok_or_else(|| Error::Format("reference wavelength not stated in file; pass --ref-wavelength".into()))?;
    let config = FitConfig {
        max_iter: a.max_iter,
        n_starts: a.starts,
        residue_weight: a.residue_weight,
        hop_weight: a.hop_weight,
        check_margin: !a.no_margin_check,
        ..FitConfig::default()
    };
    let (lsum, fit) = tomography::fit_reflection(&parsed.spectrum, a.modes, &config)?;
    let gamma_in = lsum.gamma0();
    let rec = tomography::reconstruct(&lsum, &config.reconstruct);
    let transmission = match &a.transmission {
        Some(p) => Some(
            io::parse_spectrum_csv(
                &std::fs::read_to_string(p)?,
                Some(SpectrumKind::Transmission),
                Some(ref_wavelength),
            )?
            .spectrum,
        ),
        None => None,
    };
    let rec = match rec {
        Ok(r) => r,
        Err(e) => {
            if let Some(path) = &a.report {
                let mut report = TomographyReportFile::new(&fit, &lsum, a.gamma_out.unwrap_or(gamma_in), "unresolved");
                report.error = Some(e.to_string());
                io::save_json(path, &report)?;
            }
            return Err(e);
        }
    };
    let (gamma_out, source, misfit) = match (&transmission, a.gamma_out) {
        (Some(t), _) => {
            let g = tomography::estimate_gamma_out(&rec.hamiltonian, gamma_in, t)?;
            let m = tomography::validate_reconstruction(&rec.hamiltonian, gamma_in, g, t)?;
            (g, "transmission", Some(m))
        }
        (None, Some(g)) => (g, "argument", None),
        (None, None) => (gamma_in, "assumed equal to gamma_in", None),
    };
    io::save_json(&a.out, &HamiltonianFile::new(&rec.hamiltonian, gamma_in, gamma_out, ref_wavelength))?;
    if let Some(path) = &a.report {
        let mut report = TomographyReportFile::new(&fit, &lsum, gamma_out, source);
        report.terminal_residual = Some(rec.terminal_residual);
        report.transmission_misfit = misfit;
        io::save_json(path, &report)?;
    }
    if !fit.converged {
        let _ = writeln!(err, "warning: fit did not converge within {} iterations; results written", a.max_iter);
        return Ok(EXIT_NOT_CONVERGED);
    }
    Ok(EXIT_OK)
}

fn calibrate(a: &CalibrateArgs, err: &mut dyn Write) -> Result<i32> {
    let hfile: HamiltonianFile = io::load_json(&a.h0)?;
    let h0 = hfile.hamiltonian(STRUCTURE_TOL)?;
    let rw = hfile.ref_wavelength_nm;
    let load = |p: &Path| -> Result<calibration::SweepDataset> {
        let d: DatasetFile = io::load_json(p)?;
        d.dataset(h0.clone(), rw)
    };
    let dataset = load(&a.dataset)?;
    let seeding = match &a.seeding {
        Some(p) => load(p)?.records,
        None => Vec::new(),
    };
    let init = match (a.perturb, a.seed) {
        (Some(scale), Some(seed)) => CalibrationInit::Perturbed { seed, scale },
        _ => CalibrationInit::FromData,
    };
    let result = calibration::fit_full_seeded(&dataset, &seeding, &CalibrationConfig { max_iter: a.max_iter, init })?;
    io::save_json(&a.out, &ModelFile::new(&result.model))?;
    if let Some(p) = &a.errors {
        write_file(p, &io::format_error_csv(&dataset.records, &result.per_record_error, &result.per_record_deviation))?;
    }
    let holdout = match &a.holdout {
        Some(p) => {
            let ds = load(p)?;
            let rep = calibration::holdout_evaluate(&result.model, &ds)?;
            if let Some(e) = &a.holdout_errors {
                write_file(e, &io::format_error_csv(&ds.records, &rep.errors, &rep.deviations))?;
            }
            Some(rep)
        }
        None => None,
    };
    if let Some(p) = &a.report {
        let mean = |v: &[f64]| if v.is_empty() { 0.0 } else { v.iter().sum::<f64>() / v.len() as f64 };
        let report = CalibrationReportFile {
            version: io::FORMAT_VERSION,
            generator: io::generator(),
            records: dataset.len(),
            parameters: calibration::n_parameters(dataset.n_sites()),
            mean_error: result.mean_error,
            mean_deviation_jnorm: mean(&result.per_record_deviation),
            iterations: result.iterations,
            converged: result.converged,
            holdout_mean_error: holdout.as_ref().and_then(|h| h.summary.as_ref()).map(|s| s.mean),
            holdout_mean_deviation_jnorm: holdout.as_ref().and_then(|h| h.deviation_summary.as_ref()).map(|s| s.mean),
        };
        io::save_json(p, &report)?;
    }
    if !result.converged {
        let _ = writeln!(err, "warning: calibration did not converge within {} iterations; model written", a.max_iter);
        return Ok(EXIT_NOT_CONVERGED);
    }
    Ok(EXIT_OK)
}

fn predict(a: &PredictArgs, out: &mut dyn Write) -> Result<i32> {
    let hfile: HamiltonianFile = io::load_json(&a.h0)?;
    let h0 = hfile.hamiltonian(STRUCTURE_TOL)?;
    let mfile: ModelFile = io::load_json(&a.model)?;
    let model = mfile.model()?;
    let v = a.volts.profile(h0.dim())?;
    let eig = thermal::predict_eigen(&h0, &model, &v, hfile.ref_wavelength_nm)?;
    let text = io::format_eigen_csv(&eig);
    match &a.out {
        Some(p) => write_file(p, &text)?,
        None => out.write_all(text.as_bytes())?,
    }
    Ok(EXIT_OK)
}

fn gen_device(a: &GenDeviceArgs) -> Result<i32> {
    let ranges = DeviceRanges {
        quality_factor: a.q,
        ref_wavelength_nm: a.ref_wavelength,
        hop_ghz: (a.hop_min_ghz, a.hop_max_ghz),
        beta1: a.beta1,
        ..DeviceRanges::default()
    };
    let truth = device::generate_device(a.seed, a.sites, &ranges)?;
    io::save_json(&a.out, &DeviceFile::from_truth(&truth))?;
    if let Some(p) = &a.hamiltonian {
        let s = &truth.spec;
        io::save_json(p, &HamiltonianFile::new(&truth.hamiltonian()?, s.gamma_in, s.gamma_out, s.ref_wavelength))?;
    }
    Ok(EXIT_OK)
}

fn gen_dataset(a: &GenDatasetArgs) -> Result<i32> {
    let doc: DeviceFile = io::load_json(&a.device)?;
    let truth = doc.truth()?;
    let eigen_sigma_nm = match a.eigen_noise_jnorm {
        Some(f) => f * thermal::j_norm(&truth.hamiltonian()?, truth.spec.ref_wavelength)?,
        None => a.eigen_noise_nm,
    };
    let protocol = Protocol {
        ramp_steps: a.ramp_steps,
        ramp_heaters: Vec::new(),
        ramp_v_max: a.ramp_v_max,
        random_profiles: a.random,
        random_v_max: a.random_v_max,
        include_zero: a.zero,
        seed: a.seed,
        extraction: if a.spectrum_fit {
            Extraction::SpectrumFit { points: a.points, margin_ghz: 25.0 }
        } else {
            Extraction::Direct
        },
    };
    let noise = NoiseSpec { spectrum_mult_sigma: a.spectrum_noise, eigen_sigma_nm, seed: a.seed };
    let ds = device::generate_dataset(&truth, &protocol, &noise)?;
    if ds.is_empty() {
        return Err(Error::InvalidConfig("protocol produced no records; use --ramp-steps, --random or --zero".into()));
    }
    io::save_json(&a.out, &DatasetFile::from_dataset(&ds))?;
    Ok(EXIT_OK)
}

fn eta(a: &EtaArgs, out: &mut dyn Write) -> Result<i32> {
    let mfile: ModelFile = io::load_json(&a.model)?;
    let model = mfile.model()?;
    let value = match a.volts {
        Some(v) => thermal::eta_at(&model, a.site, v)?,
        None => thermal::eta(&model, a.site)?,
    };
    writeln!(out, "{value}")?;
    Ok(EXIT_OK)
}
