use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use cca_core::calibration::{fit_full_seeded, holdout_evaluate, CalibrationConfig};
use cca_core::cli::{run, EXIT_NOT_CONVERGED, EXIT_NUMERICAL, EXIT_OK, EXIT_VALIDATION};
use cca_core::device::{
    device_spectrum, generate_dataset, generate_device, DeviceRanges, DeviceTruth, NoiseSpec, Protocol,
};
use cca_core::eigen::{decompose, DEFAULT_DEFECT_TOL};
use cca_core::io::{from_json, to_json, DatasetFile, DeviceFile};
use cca_core::lattice::{build_h_eff, LatticeSpec};
use cca_core::response::{modal_response, resolvent_response, FrequencyGrid, SpectrumKind};
use cca_core::thermal::{delta_mu, eta, eta_at, j_norm, orbit_table, CrosstalkModel, VoltageProfile, N_BETA};
use cca_core::tomography::{
    estimate_gamma_out, fit_reflection, reconstruct, validate_reconstruction, FitConfig, ReconstructConfig,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

fn zero_offset_device(seed: u64) -> DeviceTruth {
    let mut d = generate_device(seed, 8, &DeviceRanges::default()).unwrap();
    d.model.delta = vec![0.0; 8];
    d
}

fn random_lattice(rng: &mut ChaCha8Rng, lossless: bool) -> LatticeSpec {
    let n = rng.random_range(2..=10);
    LatticeSpec {
        mu: (0..n).map(|_| rng.random_range(-5.0..5.0)).collect(),
        hop: (1..n).map(|_| rng.random_range(10.0..50.0)).collect(),
        kappa: (0..n).map(|_| if lossless { 0.0 } else { rng.random_range(0.0..2.0) }).collect(),
        gamma_in: rng.random_range(0.2..2.0),
        gamma_out: rng.random_range(0.2..2.0),
        ref_wavelength: 1550.0,
    }
}

fn wide_grid(spec: &LatticeSpec, points: usize) -> FrequencyGrid {
    let reach = 2.0 * spec.hop.iter().fold(0.0f64, |a, b| a.max(*b)) + 10.0;
    FrequencyGrid::linspace(-reach, reach + 0.0173, points).unwrap()
}

fn tomography_round_trip() -> Verdict {
    let start = Instant::now();
    let mut good = 0;
    let mut worst_mu: f64 = 0.0;
    let mut worst_j: f64 = 0.0;
    for seed in 0..100 {
        let d = zero_offset_device(seed);
        let grid = d.covering_grid(&VoltageProfile::zeros(8), 25.0, 2001).unwrap();
        let s = device_spectrum(&d, &VoltageProfile::zeros(8), &grid, &NoiseSpec::default(), SpectrumKind::Reflection)
            .unwrap();
        let Ok(rec) = fit_reflection(&s, 8, &FitConfig::default())
            .and_then(|(f, _)| reconstruct(&f, &ReconstructConfig::default()))
        else {
            continue;
        };
        let jn = d.spec.hop.iter().sum::<f64>() / 7.0;
        let mu =
            rec.hamiltonian.diagonal().iter().zip(&d.spec.mu).map(|(a, b)| (a.re - b).abs() / jn).fold(0.0, f64::max);
        let j = rec
            .hamiltonian
            .superdiagonal()
            .iter()
            .zip(&d.spec.hop)
            .map(|(a, b)| (a.re - b).abs() / b)
            .fold(0.0, f64::max);
        worst_mu = worst_mu.max(mu);
        worst_j = worst_j.max(j);
        if mu < 0.01 && j < 0.02 {
            good += 1;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    verdict(
        good >= 95 && secs < 300.0,
        format!(
            "{good}/100 devices within tolerance, worst mu {worst_mu:.2e} J_norm, worst J {worst_j:.2e}, {secs:.1} s"
        ),
    )
}

fn transmission_validation() -> Verdict {
    let mut worst: f64 = 0.0;
    for seed in 0..10 {
        let d = zero_offset_device(seed);
        let v = VoltageProfile::zeros(8);
        let grid = d.covering_grid(&v, 25.0, 2001).unwrap();
        let r = device_spectrum(&d, &v, &grid, &NoiseSpec::default(), SpectrumKind::Reflection).unwrap();
        let t = device_spectrum(&d, &v, &grid, &NoiseSpec::default(), SpectrumKind::Transmission).unwrap();
        let (fit, _) = fit_reflection(&r, 8, &FitConfig::default()).unwrap();
        let rec = reconstruct(&fit, &ReconstructConfig::default()).unwrap();
        let g_out = estimate_gamma_out(&rec.hamiltonian, d.spec.gamma_in, &t).unwrap();
        worst = worst.max(validate_reconstruction(&rec.hamiltonian, d.spec.gamma_in, g_out, &t).unwrap());
    }
    verdict(worst < 1e-4, format!("worst normalized L2 misfit {worst:.2e} over 10 devices"))
}

fn unitarity() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let spec = random_lattice(&mut rng, true);
        let (r, t) =
            resolvent_response(&build_h_eff(&spec).unwrap(), spec.gamma_in, spec.gamma_out, &wide_grid(&spec, 2001))
                .unwrap();
        for (a, b) in r.values().iter().zip(t.values()) {
            worst = worst.max((a + b - 1.0).abs());
        }
    }
    verdict(worst < 1e-9, format!("max ||R|^2+|T|^2-1| = {worst:.2e} over 50 lossless devices"))
}

fn method_equivalence() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let spec = random_lattice(&mut rng, false);
        let h = build_h_eff(&spec).unwrap();
        let grid = wide_grid(&spec, 2001);
        let (r1, t1) = resolvent_response(&h, spec.gamma_in, spec.gamma_out, &grid).unwrap();
        let eig = decompose(&h, DEFAULT_DEFECT_TOL).unwrap();
        let (r2, t2) = modal_response(&eig, spec.gamma_in, spec.gamma_out, &grid).unwrap();
        for (a, b) in r1.values().iter().zip(r2.values()).chain(t1.values().iter().zip(t2.values())) {
            worst = worst.max((a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE));
        }
    }
    verdict(worst < 1e-9, format!("max relative modal/resolvent difference {worst:.2e} over 50 lossy devices"))
}

fn parameter_counting() -> Verdict {
    let t = orbit_table();
    verdict(N_BETA == 3 && t.n_orbits() == 12, format!("{N_BETA} beta distances, {} gamma orbits", t.n_orbits()))
}

fn quadratic_law_and_locality() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut scaling_exact = true;
    let mut worst_c3_ulps: f64 = 0.0;
    let mut locality_exact = true;
    for _ in 0..200 {
        let n = rng.random_range(4..=12);
        let model = CrosstalkModel {
            delta: vec![0.0; n],
            alpha: (0..n).map(|_| rng.random_range(0.1..1.0)).collect(),
            beta: std::array::from_fn(|_| rng.random_range(-0.05..0.05)),
            gamma_cross: std::array::from_fn(|_| rng.random_range(-0.005..0.005)),
        };
        let v = VoltageProfile::new((0..n).map(|_| rng.random_range(0.0..1.0)).collect()).unwrap();
        let base = delta_mu(&model, &v).unwrap();
        for c in [0.5, 2.0, 0.25, 4.0] {
            let s = delta_mu(&model, &v.scaled(c).unwrap()).unwrap();
            scaling_exact &= s.iter().zip(&base).all(|(x, y)| *x == c * c * y);
        }
        // rounding scales with the summed term magnitudes, not with the result
        let magnitude = CrosstalkModel {
            beta: model.beta.map(f64::abs),
            gamma_cross: model.gamma_cross.map(f64::abs),
            ..model.clone()
        };
        let size = delta_mu(&magnitude, &v).unwrap();
        let s = delta_mu(&model, &v.scaled(3.0).unwrap()).unwrap();
        for ((x, y), m) in s.iter().zip(&base).zip(&size) {
            if *m > 0.0 {
                worst_c3_ulps = worst_c3_ulps.max((x - 9.0 * y).abs() / (9.0 * m * f64::EPSILON));
            }
        }
        let site = rng.random_range(0..n);
        let single = delta_mu(&model, &VoltageProfile::single(n, site, 0.7).unwrap()).unwrap();
        locality_exact &= single.iter().enumerate().all(|(k, d)| k.abs_diff(site) <= 3 || *d == 0.0);
    }
    verdict(
        scaling_exact && locality_exact && worst_c3_ulps <= 16.0,
        format!(
            "f(cV) = c^2 f(V) bitwise for c in {{1/4, 1/2, 2, 4}}: {scaling_exact}; c = 3 within {worst_c3_ulps:.1} ulp of the summed terms; zero beyond distance 3: {locality_exact}"
        ),
    )
}

fn calibration_reproduction() -> Verdict {
    let truth = generate_device(7, 8, &DeviceRanges::default()).unwrap();
    let jn = j_norm(&truth.hamiltonian().unwrap(), truth.spec.ref_wavelength).unwrap();
    let run = |noise: NoiseSpec| {
        let seeding = generate_dataset(&truth, &Protocol::ramps(10, 0), &noise).unwrap();
        let train = generate_dataset(&truth, &Protocol::random(288, 1), &noise).unwrap();
        let holdout =
            generate_dataset(&truth, &Protocol::random(20, 2), &NoiseSpec { seed: noise.seed + 1, ..noise }).unwrap();
        let fit = fit_full_seeded(&train, &seeding.records, &CalibrationConfig::default()).unwrap();
        let report = holdout_evaluate(&fit.model, &holdout).unwrap();
        (fit.model, report.deviation_summary.unwrap().mean)
    };
    let (clean, _) = run(NoiseSpec::default());
    let coefficients = |m: &CrosstalkModel| -> Vec<f64> {
        m.delta.iter().chain(&m.alpha).chain(&m.beta).chain(&m.gamma_cross).copied().collect()
    };
    let worst = coefficients(&clean)
        .iter()
        .zip(coefficients(&truth.model))
        .map(|(a, b)| (a - b).abs() / b.abs())
        .fold(0.0, f64::max);
    let (_, deviation) = run(NoiseSpec { spectrum_mult_sigma: 0.0, eigen_sigma_nm: 0.01 * jn, seed: 42 });
    verdict(
        worst < 0.01 && deviation <= 0.04,
        format!(
            "noiseless worst coefficient error {worst:.2e} relative; sigma = 1% J_norm hold-out mean deviation {:.2}% of J_norm",
            100.0 * deviation
        ),
    )
}

fn eta_metric() -> Verdict {
    let truth = generate_device(11, 8, &DeviceRanges::default()).unwrap();
    let exact = (0..7).all(|s| eta(&truth.model, s).unwrap() == 0.024);
    let mut worst_ulps: f64 = 0.0;
    for s in 0..7 {
        for k in 1..=40 {
            let e = eta_at(&truth.model, s, 0.02 * k as f64).unwrap();
            worst_ulps = worst_ulps.max((e - 0.024).abs() / (0.024 * f64::EPSILON));
        }
    }
    verdict(
        exact && worst_ulps <= 1.0,
        format!(
            "eta = 0.024 exactly at every site: {exact}; shift-ratio eta over 40 voltages within {worst_ulps:.1} ulp"
        ),
    )
}

fn cca(args: &[&str]) -> i32 {
    let argv: Vec<OsString> = std::iter::once("cca").chain(args.iter().copied()).map(OsString::from).collect();
    run(argv, &mut Vec::new(), &mut Vec::new())
}

fn p(dir: &Path, name: &str) -> String {
    dir.join(name).to_str().unwrap().to_string()
}

fn cli_suite() -> Verdict {
    let golden: PathBuf = [env!("CARGO_MANIFEST_DIR"), "tests", "golden"].iter().collect();
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    let mut codes_ok = true;
    for dir in &dirs {
        let d = dir.path();
        let steps: [Vec<String>; 6] = [
            vec![
                "gen-device".into(),
                "--seed".into(),
                "3".into(),
                "-o".into(),
                p(d, "dev.json"),
                "--hamiltonian".into(),
                p(d, "h0.json"),
            ],
            vec![
                "simulate".into(),
                "--device".into(),
                p(d, "dev.json"),
                "--points".into(),
                "2001".into(),
                "--noise".into(),
                "0.01".into(),
                "--seed".into(),
                "5".into(),
                "-o".into(),
                p(d, "r.csv"),
            ],
            vec![
                "gen-dataset".into(),
                "--device".into(),
                p(d, "dev.json"),
                "--random".into(),
                "40".into(),
                "--eigen-noise-jnorm".into(),
                "0.01".into(),
                "--seed".into(),
                "9".into(),
                "-o".into(),
                p(d, "ds.json"),
            ],
            vec![
                "tomography".into(),
                "--spectrum".into(),
                p(d, "r.csv"),
                "--modes".into(),
                "8".into(),
                "--starts".into(),
                "2".into(),
                "-o".into(),
                p(d, "h.json"),
            ],
            vec![
                "calibrate".into(),
                "--h0".into(),
                p(d, "h0.json"),
                "--dataset".into(),
                p(d, "ds.json"),
                "--perturb".into(),
                "0.1".into(),
                "--seed".into(),
                "4".into(),
                "-o".into(),
                p(d, "model.json"),
            ],
            vec![
                "simulate".into(),
                "--device".into(),
                p(d, "dev.json"),
                "--volts".into(),
                "0.2,0,0,0.5,0,0,0,0.1".into(),
                "--points".into(),
                "21".into(),
                "-o".into(),
                p(d, "small.csv"),
            ],
        ];
        for step in &steps {
            let args: Vec<&str> = step.iter().map(String::as_str).collect();
            codes_ok &= cca(&args) == EXIT_OK;
        }
    }
    let files = ["dev.json", "h0.json", "r.csv", "ds.json", "h.json", "model.json", "small.csv"];
    let deterministic =
        files.iter().all(|f| fs::read(dirs[0].path().join(f)).ok() == fs::read(dirs[1].path().join(f)).ok());
    let d = dirs[0].path();
    let golden_ok = fs::read(d.join("dev.json")).ok() == fs::read(golden.join("device_seed3.json")).ok()
        && fs::read(d.join("small.csv")).ok() == fs::read(golden.join("simulate_r.csv")).ok();
    let round_trip = |name: &str| -> bool {
        let text = fs::read_to_string(d.join(name)).unwrap();
        match name {
            "dev.json" => from_json::<DeviceFile>(&text).map(|f| to_json(&f).unwrap() == text).unwrap_or(false),
            _ => from_json::<DatasetFile>(&text).map(|f| to_json(&f).unwrap() == text).unwrap_or(false),
        }
    };
    let stable = round_trip("dev.json") && round_trip("ds.json");
    fs::write(
        d.join("one.json"),
        r#"{"version":1,"generator":"t","lattice":{"mu_ghz":[0.0],"hop_ghz":[],"kappa_ghz":[0.0],"gamma_in_ghz":0.0,"gamma_out_ghz":0.0,"ref_wavelength_nm":1550.0}}"#,
    )
    .unwrap();
    let exit_codes = cca(&["tomography", "--spectrum", &p(d, "r.csv"), "--modes", "0"]) == EXIT_VALIDATION
        && cca(&[
            "simulate",
            "--device",
            &p(d, "one.json"),
            "--start-ghz",
            "-1",
            "--stop-ghz",
            "1",
            "--points",
            "3",
            "-o",
            &p(d, "s.csv"),
        ]) == EXIT_NUMERICAL
        && cca(&[
            "calibrate",
            "--h0",
            &p(d, "h0.json"),
            "--dataset",
            &p(d, "ds.json"),
            "--max-iter",
            "1",
            "-o",
            &p(d, "m1.json"),
        ]) == EXIT_NOT_CONVERGED;
    verdict(
        codes_ok && deterministic && golden_ok && stable && exit_codes,
        format!(
            "commands ok: {codes_ok}; byte-identical reruns: {deterministic}; golden match: {golden_ok}; JSON round trip stable: {stable}; exit codes 2/3/4: {exit_codes}"
        ),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Verdict); 9] = [
        ("tomography round trip", tomography_round_trip),
        ("transmission validation", transmission_validation),
        ("two-port unitarity", unitarity),
        ("method equivalence", method_equivalence),
        ("crosstalk parameter counting", parameter_counting),
        ("quadratic law and locality", quadratic_law_and_locality),
        ("calibration reproduction", calibration_reproduction),
        ("eta metric", eta_metric),
        ("CLI golden-file suite", cli_suite),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let v = check();
        if !v.pass {
            failed += 1;
        }
        println!("{} criterion {} ({name}): {}", if v.pass { "PASS" } else { "FAIL" }, i + 1, v.detail);
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
