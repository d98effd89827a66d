//! Fitting the crosstalk model to measured eigen-wavelengths.
//!
//! Every fit minimizes the summed (or mean) normalized error between the
//! sorted eigen-wavelengths of H0 + diag(Δμ) and the measured ones, by
//! damped least squares with finite-difference Jacobians.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::eigen::{eig_complex_symmetric, eigenvalues, DEFAULT_DEFECT_TOL};
use crate::error::{Error, Result};
use crate::lattice::EffectiveHamiltonian;
use crate::optim::{self, LmConfig, Residuals};
use crate::thermal::{self, delta_mu_with, CrosstalkModel, OrbitTable, VoltageProfile, N_BETA, N_GAMMA, WINDOW};
use crate::units;

/// One measurement: a voltage profile and the eigen-wavelengths it produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub profile: VoltageProfile,
    /// Ascending, nm.
    pub measured_eigen: Vec<f64>,
    pub tag: String,
}

/// Records taken on one device, with its reference Hamiltonian.
#[derive(Debug, Clone)]
pub struct SweepDataset {
    pub h0: EffectiveHamiltonian,
    pub ref_wavelength: f64,
    pub records: Vec<SweepRecord>,
}

impl SweepDataset {
    pub fn new(h0: EffectiveHamiltonian, ref_wavelength: f64, records: Vec<SweepRecord>) -> Result<Self> {
        let ds = Self { h0, ref_wavelength, records };
        ds.validate()?;
        Ok(ds)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.ref_wavelength > 0.0 && self.ref_wavelength.is_finite()) {
            return Err(Error::InvalidSpec(format!("reference wavelength {} must be positive", self.ref_wavelength)));
        }
        let n = self.h0.dim();
        for (k, r) in self.records.iter().enumerate() {
            if r.profile.len() != n {
                return Err(Error::InvalidProfile(format!("record {k}: {} voltages for {n} sites", r.profile.len())));
            }
            if r.measured_eigen.len() != n {
                return Err(Error::InvalidSpec(format!(
                    "record {k}: {} eigen-wavelengths for {n} sites",
                    r.measured_eigen.len()
                )));
            }
            if r.measured_eigen.iter().any(|x| !x.is_finite()) || r.measured_eigen.windows(2).any(|w| w[1] < w[0]) {
                return Err(Error::InvalidSpec(format!("record {k}: eigen-wavelengths must be finite and ascending")));
            }
        }
        Ok(())
    }

    pub fn n_sites(&self) -> usize {
        self.h0.dim()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn j_norm(&self) -> Result<f64> {
        thermal::j_norm(&self.h0, self.ref_wavelength)
    }

    /// Same device, different records.
    pub fn with_records(&self, records: Vec<SweepRecord>) -> Self {
        Self { h0: self.h0.clone(), ref_wavelength: self.ref_wavelength, records }
    }
}

/// Sorted eigen-wavelength offsets from the reference (nm) of h0 shifted by
/// `shift_nm`. Working with offsets keeps the ~1e-13 nm rounding of
/// absolute wavelengths out of finite differences.
fn offsets(h0: &EffectiveHamiltonian, shift_nm: &[f64], ref_wavelength: f64) -> Result<Vec<f64>> {
    let shift: Vec<f64> = shift_nm.iter().map(|s| units::to_detuning(*s, ref_wavelength)).collect();
    let mut out: Vec<f64> = eigenvalues(&h0.with_diagonal_shift(&shift)?)?
        .iter()
        .map(|e| units::to_wavelength(e.re, ref_wavelength))
        .collect();
    out.sort_by(f64::total_cmp);
    Ok(out)
}

fn measured_offsets(records: &[SweepRecord], ref_wavelength: f64) -> Vec<Vec<f64>> {
    records.iter().map(|r| r.measured_eigen.iter().map(|x| x - ref_wavelength).collect()).collect()
}

/// First-order sensitivities ∂λ_α/∂Δμ_n = Re⟨v_n|ε_α⟩², rows ordered by
/// ascending wavelength.
fn sensitivities(h: &EffectiveHamiltonian) -> Result<DMatrix<f64>> {
    let sys = eig_complex_symmetric(h, DEFAULT_DEFECT_TOL)?;
    let n = sys.dim();
    // ascending wavelength is descending frequency
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| sys.eigenvalues[b].re.total_cmp(&sys.eigenvalues[a].re));
    Ok(DMatrix::from_fn(n, n, |row, site| sys.component(site, order[row]).powi(2).re))
}

fn lstsq(a: &DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    a.clone().svd(true, true).solve(b, 1e-12).ok()
}

fn zero_record(records: &[SweepRecord]) -> Option<&SweepRecord> {
    records.iter().find(|r| r.profile.is_zero())
}

struct OffsetProblem<'a> {
    h0: &'a EffectiveHamiltonian,
    ref_wavelength: f64,
    target: &'a [f64],
}

impl Residuals for OffsetProblem<'_> {
    fn n_residuals(&self) -> usize {
        self.target.len()
    }
    fn eval(&self, p: &[f64], out: &mut [f64]) -> bool {
        match offsets(self.h0, p, self.ref_wavelength) {
            Ok(o) => {
                for (k, (a, b)) in o.iter().zip(self.target).enumerate() {
                    out[k] = a - b;
                }
                true
            }
            Err(_) => false,
        }
    }
    fn fd_step(&self, _i: usize, value: f64) -> f64 {
        1e-7 * value.abs().max(1e-3)
    }
}

/// Onsite offsets δ (nm) that reproduce a zero-voltage record.
pub fn offsets_from_zero_record(
    h0: &EffectiveHamiltonian,
    record: &SweepRecord,
    ref_wavelength: f64,
) -> Result<Vec<f64>> {
    if !record.profile.is_zero() {
        return Err(Error::InvalidProfile("offset estimation needs the zero-voltage record".into()));
    }
    let target: Vec<f64> = record.measured_eigen.iter().map(|x| x - ref_wavelength).collect();
    let base = offsets(h0, &vec![0.0; h0.dim()], ref_wavelength)?;
    let w = sensitivities(h0)?;
    let rhs = DVector::from_iterator(target.len(), target.iter().zip(&base).map(|(t, b)| t - b));
    let start: Vec<f64> = lstsq(&w, &rhs).map(|x| x.iter().cloned().collect()).unwrap_or_else(|| vec![0.0; h0.dim()]);
    let problem = OffsetProblem { h0, ref_wavelength, target: &target };
    let out = optim::minimize(&problem, &start, &LmConfig::default()).ok_or(Error::EigenFailure)?;
    Ok(out.params)
}

/// Per-heater coefficients from single-drive sweeps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingleHeaterFit {
    pub heater: usize,
    /// α_n (nm/V²).
    pub alpha: f64,
    /// (site m, β′_{nm}) for every in-range m with 0 < |m − n| ≤ 3.
    pub beta_prime: Vec<(usize, f64)>,
    /// Refined onsite offsets (nm).
    pub delta: Vec<f64>,
    /// Summed normalized error over the sweep.
    pub error: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl SingleHeaterFit {
    pub fn ratio(&self, site: usize) -> Option<f64> {
        self.beta_prime.iter().find(|(m, _)| *m == site).map(|(_, b)| b / self.alpha)
    }
}

struct SingleProblem<'a> {
    h0: &'a EffectiveHamiltonian,
    ref_wavelength: f64,
    heater: usize,
    neighbors: &'a [usize],
    volts: Vec<f64>,
    meas: Vec<Vec<f64>>,
    scale: f64,
}

impl SingleProblem<'_> {
    /// Parameters are [α, β′…, δ…].
    fn shift(&self, p: &[f64], v: f64) -> Vec<f64> {
        let k = 1 + self.neighbors.len();
        let mut s = p[k..].to_vec();
        let v2 = v * v;
        s[self.heater] += p[0] * v2;
        for (i, &m) in self.neighbors.iter().enumerate() {
            s[m] += p[i + 1] * v2;
        }
        s
    }
}

impl Residuals for SingleProblem<'_> {
    fn n_residuals(&self) -> usize {
        self.meas.len() * self.h0.dim()
    }
    fn eval(&self, p: &[f64], out: &mut [f64]) -> bool {
        if !(p[0] > 0.0) || p.iter().any(|x| !x.is_finite()) {
            return false;
        }
        let n = self.h0.dim();
        for (r, (v, meas)) in self.volts.iter().zip(&self.meas).enumerate() {
            let Ok(o) = offsets(self.h0, &self.shift(p, *v), self.ref_wavelength) else { return false };
            for k in 0..n {
                out[r * n + k] = (o[k] - meas[k]) * self.scale;
            }
        }
        true
    }
    fn fd_step(&self, _i: usize, value: f64) -> f64 {
        1e-7 * value.abs().max(1e-3)
    }
}

/// Fit α_n and the neighbour coefficients β′_{nm} (|m − n| ≤ 3) from records
/// that drive heater `heater` alone. The offsets δ are refined along with
/// them, starting from the zero-voltage record when there is one.
pub fn fit_single_heater(dataset: &SweepDataset, heater: usize) -> Result<SingleHeaterFit> {
    dataset.validate()?;
    let n = dataset.n_sites();
    if heater >= n {
        return Err(Error::OutOfRange { index: heater, len: n });
    }
    if let Some(k) = dataset.records.iter().position(|r| r.profile.driven().iter().any(|&i| i != heater)) {
        return Err(Error::InvalidProfile(format!("record {k} drives a heater other than {heater}")));
    }
    let neighbors: Vec<usize> = (1..=WINDOW as usize)
        .flat_map(|d| [heater.checked_sub(d), Some(heater + d)])
        .flatten()
        .filter(|&m| m < n)
        .collect();
    let n_coef = 1 + neighbors.len();
    let n_excited = dataset.records.iter().filter(|r| !r.profile.is_zero()).count();
    if n_excited < n_coef {
        return Err(Error::Underdetermined { params: n_coef, records: n_excited });
    }
    let rw = dataset.ref_wavelength;
    let base = match zero_record(&dataset.records) {
        Some(z) => offsets_from_zero_record(&dataset.h0, z, rw)?,
        None => vec![0.0; n],
    };
    let j_norm = dataset.j_norm()?;
    let mut records: Vec<&SweepRecord> = dataset.records.iter().collect();
    records.sort_by(|x, y| x.profile.volts()[heater].total_cmp(&y.profile.volts()[heater]));
    let volts: Vec<f64> = records.iter().map(|r| r.profile.volts()[heater]).collect();
    let meas: Vec<Vec<f64>> = records.iter().map(|r| r.measured_eigen.iter().map(|x| x - rw).collect()).collect();
    let weakest = volts.iter().position(|v| *v != 0.0).unwrap_or(0);

    // Linearized starts from the weakest drive, where first order holds:
    // λ − λ(δ) ≈ v² W θ. Far sites can be nearly collinear with the heater
    // site, so a heater-only start (β′ = 0) is tried as well.
    let sites: Vec<usize> = std::iter::once(heater).chain(neighbors.iter().cloned()).collect();
    let linear = |delta: &[f64], cols: usize| -> Result<Vec<f64>> {
        let h_base =
            dataset.h0.with_diagonal_shift(&delta.iter().map(|s| units::to_detuning(*s, rw)).collect::<Vec<_>>())?;
        let w = sensitivities(&h_base)?;
        let lam0 = offsets(&dataset.h0, delta, rw)?;
        let v2 = volts[weakest].powi(2);
        let a = DMatrix::from_fn(n, cols, |row, col| v2 * w[(row, sites[col])]);
        let b = DVector::from_fn(n, |row, _| meas[weakest][row] - lam0[row]);
        let mut p = vec![0.0; n_coef];
        if let Some(x) = lstsq(&a, &b) {
            p[..cols].copy_from_slice(x.as_slice());
        }
        if !(p[0] > 0.0) {
            p[0] = 0.1;
        }
        p.extend_from_slice(delta);
        Ok(p)
    };
    let problem_upto = |take: usize| SingleProblem {
        h0: &dataset.h0,
        ref_wavelength: rw,
        heater,
        neighbors: &neighbors,
        volts: volts[..take].to_vec(),
        meas: meas[..take].to_vec(),
        scale: 1.0 / j_norm.sqrt(),
    };
    // heater-only scan over the whole sweep, robust when weak drives sit
    // below the noise
    let full = problem_upto(records.len());
    let mut resid = vec![0.0; full.n_residuals()];
    let scanned = (0..=60)
        .map(|k| 10f64.powf(-3.0 + 4.0 * k as f64 / 60.0))
        .filter_map(|a| {
            let mut p = vec![0.0; n_coef];
            p[0] = a;
            p.extend_from_slice(&base);
            full.eval(&p, &mut resid).then(|| (resid.iter().map(|r| r * r).sum::<f64>(), p))
        })
        .min_by(|x, y| x.0.total_cmp(&y.0))
        .map(|(_, p)| p);
    let zeros = vec![0.0; n];
    let seeds = [linear(&base, 1)?, linear(&base, n_coef)?, linear(&zeros, 1)?];

    let mut best: Option<optim::LmOutcome> = scanned.and_then(|p| optim::minimize(&full, &p, &LmConfig::default()));
    for seed in seeds {
        // continuation: admit stronger drives in stages, warm-starting each
        let stages = 4.min(records.len());
        let mut params = seed;
        let mut last = None;
        for stage in 1..=stages {
            let problem = problem_upto((records.len() * stage).div_ceil(stages));
            let Some(out) = optim::minimize(&problem, &params, &LmConfig::default()) else { break };
            params = out.params.clone();
            last = (stage == stages).then_some(out);
        }
        if let Some(out) = last {
            if best.as_ref().is_none_or(|b| out.cost < b.cost) {
                best = Some(out);
            }
        }
    }
    let out = best.ok_or(Error::EigenFailure)?;
    Ok(SingleHeaterFit {
        heater,
        alpha: out.params[0],
        beta_prime: neighbors.iter().cloned().zip(out.params[1..n_coef].iter().cloned()).collect(),
        delta: out.params[n_coef..].to_vec(),
        error: out.cost,
        iterations: out.iterations,
        converged: out.converged,
    })
}

/// How the joint fit is started.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CalibrationInit {
    /// Offsets from the zero record, α and β′/α from single-drive sweeps,
    /// linearized α elsewhere, γ = 0.
    FromData,
    /// The data-driven start with every coefficient randomly scaled by up
    /// to ±`scale` and γ drawn from ±0.01·`scale`.
    Perturbed { seed: u64, scale: f64 },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CalibrationConfig {
    pub max_iter: usize,
    pub init: CalibrationInit,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        Self { max_iter: 100, init: CalibrationInit::FromData }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationResult {
    pub model: CrosstalkModel,
    /// Normalized error of every fitted record.
    pub per_record_error: Vec<f64>,
    /// Mean |Δλ| per mode of every fitted record, as a fraction of J_norm.
    pub per_record_deviation: Vec<f64>,
    pub mean_error: f64,
    pub holdout_error: Option<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Number of free coefficients of the joint model.
pub fn n_parameters(n_sites: usize) -> usize {
    2 * n_sites + N_BETA + N_GAMMA
}

fn pack(model: &CrosstalkModel) -> Vec<f64> {
    let mut p = model.delta.clone();
    p.extend(model.alpha.iter().map(|a| a.ln()));
    p.extend_from_slice(&model.beta);
    p.extend_from_slice(&model.gamma_cross);
    p
}

fn unpack(p: &[f64], n: usize) -> CrosstalkModel {
    let mut beta = [0.0; N_BETA];
    beta.copy_from_slice(&p[2 * n..2 * n + N_BETA]);
    let mut gamma_cross = [0.0; N_GAMMA];
    gamma_cross.copy_from_slice(&p[2 * n + N_BETA..]);
    CrosstalkModel { delta: p[..n].to_vec(), alpha: p[n..2 * n].iter().map(|x| x.exp()).collect(), beta, gamma_cross }
}

struct FullProblem<'a> {
    h0: &'a EffectiveHamiltonian,
    ref_wavelength: f64,
    table: OrbitTable,
    records: &'a [SweepRecord],
    meas: Vec<Vec<f64>>,
    scale: f64,
}

impl Residuals for FullProblem<'_> {
    fn n_residuals(&self) -> usize {
        self.records.len() * self.h0.dim()
    }
    fn eval(&self, p: &[f64], out: &mut [f64]) -> bool {
        if p.iter().any(|x| !x.is_finite()) {
            return false;
        }
        let n = self.h0.dim();
        let model = unpack(p, n);
        for (r, rec) in self.records.iter().enumerate() {
            let Ok(dmu) = delta_mu_with(&self.table, &model, &rec.profile) else { return false };
            let Ok(o) = offsets(self.h0, &dmu, self.ref_wavelength) else { return false };
            for k in 0..n {
                out[r * n + k] = (o[k] - self.meas[r][k]) * self.scale;
            }
        }
        true
    }
}

fn median(mut v: Vec<f64>) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    Some(if v.len() % 2 == 1 { v[m] } else { 0.5 * (v[m - 1] + v[m]) })
}

/// Data-driven starting model.
fn initial_model(dataset: &SweepDataset, seeding: &[SweepRecord]) -> Result<CrosstalkModel> {
    let n = dataset.n_sites();
    let rw = dataset.ref_wavelength;
    let pool: Vec<SweepRecord> = seeding.iter().chain(&dataset.records).cloned().collect();
    let delta = match zero_record(&pool) {
        Some(z) => offsets_from_zero_record(&dataset.h0, z, rw)?,
        None => vec![0.0; n],
    };
    let mut alpha: Vec<Option<f64>> = vec![None; n];
    let mut refined: Vec<Vec<f64>> = vec![Vec::new(); n];
    let mut ratios: [Vec<f64>; N_BETA] = Default::default();
    for heater in 0..n {
        let sweep: Vec<SweepRecord> =
            pool.iter().filter(|r| r.profile.is_zero() || r.profile.driven() == [heater]).cloned().collect();
        let Ok(fit) = fit_single_heater(&dataset.with_records(sweep), heater) else { continue };
        alpha[heater] = Some(fit.alpha);
        for (site, d) in fit.delta.iter().enumerate() {
            refined[site].push(*d);
        }
        for &(m, _) in &fit.beta_prime {
            let d = m.abs_diff(heater);
            ratios[d - 1].push(fit.ratio(m).unwrap_or(0.0));
        }
    }
    let delta: Vec<f64> = delta.iter().zip(refined).map(|(d, r)| median(r).unwrap_or(*d)).collect();
    let mut beta = [0.0; N_BETA];
    for d in 0..N_BETA {
        beta[d] = median(ratios[d].clone()).unwrap_or(0.0);
    }

    if alpha.iter().any(|a| a.is_none()) {
        // linearized joint estimate with the β seeds and γ = 0
        let h_base =
            dataset.h0.with_diagonal_shift(&delta.iter().map(|s| units::to_detuning(*s, rw)).collect::<Vec<_>>())?;
        let w = sensitivities(&h_base)?;
        let lam0 = offsets(&dataset.h0, &delta, rw)?;
        let excited: Vec<&SweepRecord> = pool.iter().filter(|r| !r.profile.is_zero()).collect();
        let rows = excited.len() * n;
        // Δμ_m = Σ_i c(|m − i|) α_i V_i², c(0) = 1, c(d) = β_d
        let coupling = |m: usize, i: usize| match m.abs_diff(i) {
            0 => 1.0,
            d if d <= N_BETA => beta[d - 1],
            _ => 0.0,
        };
        let a = DMatrix::from_fn(rows, n, |row, i| {
            let v = excited[row / n].profile.volts()[i];
            (0..n).map(|m| w[(row % n, m)] * coupling(m, i)).sum::<f64>() * v * v
        });
        let b = DVector::from_fn(rows, |row, _| excited[row / n].measured_eigen[row % n] - rw - lam0[row % n]);
        let lin = if rows >= n { lstsq(&a, &b) } else { None };
        for i in 0..n {
            if alpha[i].is_none() {
                let guess = lin.as_ref().map(|x| x[i]).unwrap_or(0.1);
                alpha[i] = Some(if guess > 1e-3 { guess } else { 0.1 });
            }
        }
    }
    Ok(CrosstalkModel {
        delta,
        alpha: alpha.into_iter().map(|a| a.unwrap()).collect(),
        beta,
        gamma_cross: [0.0; N_GAMMA],
    })
}

fn perturb(model: &CrosstalkModel, seed: u64, scale: f64) -> CrosstalkModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut jitter = |x: f64| x * (1.0 + scale * rng.random_range(-1.0..1.0));
    let delta = model.delta.iter().map(|d| jitter(*d)).collect();
    let alpha = model.alpha.iter().map(|a| jitter(*a)).collect();
    let beta = model.beta.map(&mut jitter);
    let gamma_cross = std::array::from_fn(|_| 0.01 * scale * rng.random_range(-1.0..1.0));
    CrosstalkModel { delta, alpha, beta, gamma_cross }
}

/// Fit every coefficient to `dataset`, starting from its own single-drive
/// and zero-voltage records.
pub fn fit_full(dataset: &SweepDataset, config: &CalibrationConfig) -> Result<CalibrationResult> {
    fit_full_seeded(dataset, &[], config)
}

/// Fit every coefficient to `dataset`; `seeding` records (single-heater
/// ramps, the zero record) only inform the starting point.
pub fn fit_full_seeded(
    dataset: &SweepDataset,
    seeding: &[SweepRecord],
    config: &CalibrationConfig,
) -> Result<CalibrationResult> {
    dataset.validate()?;
    let n = dataset.n_sites();
    let need = n_parameters(n);
    if dataset.len() < need {
        return Err(Error::Underdetermined { params: need, records: dataset.len() });
    }
    let j_norm = dataset.j_norm()?;
    let mut start = initial_model(dataset, seeding)?;
    if let CalibrationInit::Perturbed { seed, scale } = config.init {
        start = perturb(&start, seed, scale);
    }
    let problem = FullProblem {
        h0: &dataset.h0,
        ref_wavelength: dataset.ref_wavelength,
        table: OrbitTable::new(),
        records: &dataset.records,
        meas: measured_offsets(&dataset.records, dataset.ref_wavelength),
        scale: 1.0 / (j_norm * dataset.len() as f64).sqrt(),
    };
    let lm = LmConfig { max_iter: config.max_iter, ..LmConfig::default() };
    let out = optim::minimize(&problem, &pack(&start), &lm).ok_or(Error::EigenFailure)?;
    let model = unpack(&out.params, n);
    let report = holdout_evaluate(&model, dataset)?;
    Ok(CalibrationResult {
        mean_error: report.summary.as_ref().map(|s| s.mean).unwrap_or(0.0),
        per_record_error: report.errors,
        per_record_deviation: report.deviations,
        model,
        holdout_error: None,
        iterations: out.iterations,
        converged: out.converged,
    })
}

/// Mean, extremes and quartiles of a set of errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorSummary {
    pub count: usize,
    pub mean: f64,
    pub max: f64,
    /// Values at 0, 25, 50, 75 and 100 %.
    pub quantiles: [f64; 5],
}

impl ErrorSummary {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mut s = values.to_vec();
        s.sort_by(f64::total_cmp);
        let q = |p: f64| {
            let x = p * (s.len() - 1) as f64;
            let (lo, hi) = (x.floor() as usize, x.ceil() as usize);
            s[lo] + (x - lo as f64) * (s[hi] - s[lo])
        };
        Some(Self {
            count: s.len(),
            mean: s.iter().sum::<f64>() / s.len() as f64,
            max: s[s.len() - 1],
            quantiles: [q(0.0), q(0.25), q(0.5), q(0.75), q(1.0)],
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HoldoutReport {
    /// Normalized error per record.
    pub errors: Vec<f64>,
    /// Mean |Δλ| per mode per record, as a fraction of J_norm.
    pub deviations: Vec<f64>,
    pub summary: Option<ErrorSummary>,
    pub deviation_summary: Option<ErrorSummary>,
}

/// Score a model on records it was not fitted to.
pub fn holdout_evaluate(model: &CrosstalkModel, holdout: &SweepDataset) -> Result<HoldoutReport> {
    holdout.validate()?;
    model.validate()?;
    if model.n_sites() != holdout.n_sites() {
        return Err(Error::LengthMismatch { expected: holdout.n_sites(), got: model.n_sites() });
    }
    let mut errors = Vec::with_capacity(holdout.len());
    let mut deviations = Vec::with_capacity(holdout.len());
    if !holdout.is_empty() {
        let j_norm = holdout.j_norm()?;
        for r in &holdout.records {
            let pred = thermal::predict_eigen(&holdout.h0, model, &r.profile, holdout.ref_wavelength)?;
            errors.push(thermal::normalized_error(&pred, &r.measured_eigen, j_norm)?);
            deviations.push(thermal::mode_deviation(&pred, &r.measured_eigen, j_norm)?);
        }
    }
    Ok(HoldoutReport {
        summary: ErrorSummary::of(&errors),
        deviation_summary: ErrorSummary::of(&deviations),
        errors,
        deviations,
    })
}
