//! Acceptance run. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.
//!
//! `cargo test --test acceptance`; pass criterion numbers to run a subset,
//! e.g. `cargo test --test acceptance -- 4 5`.

use std::hint::black_box;
use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use specsense::calibration::{domain, exceedance_rate, null_covariances, statistics, threshold_from_statistics, TrialConfig};
use specsense::covariance::{covariance_of_slice, CovAccumulator};
use specsense::detectors::{Detector, EcModel};
use specsense::eig::{full_eigensystem_oracle, leading_eigenvector, PowerIterConfig};
use specsense::experiment::{learn_template, monte_carlo_power_config, run_sweep, synthetic_stability, SweepConfig};
use specsense::feature_learning::{similarity_of, FlaConfig, TE_SIMULATION};
use specsense::simgen::{NoiseModel, SignalModel};
use specsense::{CovMatrix, DetectorId};

struct Outcome {
    id: &'static str,
    name: &'static str,
    pass: bool,
    detail: String,
}

type Criterion = (&'static str, fn() -> Vec<Outcome>);

fn outcome(id: &'static str, name: &'static str, pass: bool, detail: String) -> Outcome {
    Outcome { id, name, pass, detail }
}

fn desk_sweep_config() -> SweepConfig {
    let grid: Vec<f64> = (-24..=-8).map(f64::from).collect();
    SweepConfig::desk(SignalModel::ar1(0.9).unwrap(), grid)
}

fn fmt_snr(s: Option<f64>) -> String {
    s.map_or("never".into(), |v| format!("{v} dB"))
}

fn ordering_and_mme_cav() -> Vec<Outcome> {
    let cfg = desk_sweep_config();
    let start = Instant::now();
    let report = run_sweep(&cfg).expect("desk sweep");
    let secs = start.elapsed().as_secs_f64();

    let ec = report.first_snr_reaching(DetectorId::EcAvg, 0.95);
    let ftm = report.first_snr_reaching(DetectorId::Ftm, 0.95);
    let mme = report.first_snr_reaching(DetectorId::Mme, 0.95);
    let ordering = match (ec, ftm, mme) {
        (Some(e), Some(f), Some(m)) => {
            let (g1, g2) = (f - e, m - f);
            (1.0..=4.0).contains(&g1) && (1.0..=4.0).contains(&g2)
        }
        _ => false,
    };
    let mut table = String::new();
    for &snr in &cfg.snr_grid {
        let pd = |d| report.pd(d, snr).unwrap();
        table.push_str(&format!(
            "\n      {snr:>5} dB  EC {:.3}  FTM {:.3}  MME {:.3}  CAV {:.3}",
            pd(DetectorId::EcAvg),
            pd(DetectorId::Ftm),
            pd(DetectorId::Mme),
            pd(DetectorId::Cav)
        ));
    }
    let first = outcome(
        "1",
        "detector ordering, Pd >= 0.95 crossing, gaps in [1, 4] dB",
        ordering,
        format!(
            "EC {}, FTM {}, MME {} ({} trials/point, {secs:.0} s){table}",
            fmt_snr(ec),
            fmt_snr(ftm),
            fmt_snr(mme),
            cfg.trials
        ),
    );

    let (worst_snr, worst_gap) = cfg
        .snr_grid
        .iter()
        .map(|&s| {
            let gap = (report.pd(DetectorId::Mme, s).unwrap() - report.pd(DetectorId::Cav, s).unwrap()).abs();
            (s, gap)
        })
        .fold((f64::NAN, 0.0), |acc, x| if x.1 > acc.1 { x } else { acc });
    let second = outcome(
        "2",
        "max |Pd(MME) - Pd(CAV)| <= 0.05",
        worst_gap <= 0.05,
        format!("max gap {worst_gap:.3} at {worst_snr} dB"),
    );
    let mut worst = 0.0f64;
    for &snr in &cfg.snr_grid {
        let pd = |d| report.pd(d, snr).unwrap();
        worst = worst
            .max(pd(DetectorId::Ftm) - pd(DetectorId::EcAvg))
            .max(pd(DetectorId::Mme) - pd(DetectorId::Ftm));
    }
    let pointwise = outcome(
        "1b",
        "pointwise Pd(EC) >= Pd(FTM) - 0.03 and Pd(FTM) >= Pd(MME) - 0.03",
        worst <= 0.03,
        format!("largest inversion {worst:.3}"),
    );
    vec![first, pointwise, second]
}

fn stability() -> Vec<Outcome> {
    let noise = NoiseModel::new(1.0).unwrap();
    let mut fla = FlaConfig::new(TE_SIMULATION, 32, 10_000).unwrap();
    fla.power = monte_carlo_power_config(1);
    let ar = SignalModel::ar1(0.9).unwrap();
    let sig = synthetic_stability(&ar, &noise, 0.0, 100, &fla, 1).unwrap();
    let null = synthetic_stability(&SignalModel::silent(), &noise, 0.0, 100, &fla, 1).unwrap();
    let pass = sig.fraction_above_te >= 0.95 && sig.first_last_rho >= 0.95 && null.fraction_above_te <= 0.05;
    vec![outcome(
        "3",
        "feature stability (AR(1) at 0 dB and noise, 100 segments, T_e = 0.9)",
        pass,
        format!(
            "signal fraction {:.3}, first-last rho {:.4}; noise fraction {:.3}",
            sig.fraction_above_te, sig.first_last_rho, null.fraction_above_te
        ),
    )]
}

fn calibration_validity() -> Vec<Outcome> {
    let base = desk_sweep_config();
    let power = base.power;
    let template = learn_template(&base).unwrap().feature.expect("template learned");
    let noise = base.noise;
    let cal_cfg = TrialConfig { n: 32, ns: 10_000, trials: 2000, seed: base.seed };
    let calibration = null_covariances(&noise, &cal_cfg, domain::CALIBRATION).unwrap();
    let fresh = null_covariances(&noise, &cal_cfg, domain::FRESH_NULL).unwrap();

    let p = base.signal.power_for(&noise, -18.0);
    let rs = base.signal.signal_covariance(p, 32, 10_000).unwrap();
    let detectors = [
        Detector::Ec(EcModel::new(rs, noise.sigma2).unwrap()),
        Detector::Ftm(template),
        Detector::Mme,
        Detector::Cav,
    ];
    let mut pass = true;
    let mut detail = Vec::new();
    for d in &detectors {
        let run = threshold_from_statistics(d.id(), statistics(d, &calibration, &power).unwrap(), 0.1).unwrap();
        let pf = exceedance_rate(&statistics(d, &fresh, &power).unwrap(), run.threshold.gamma);
        pass &= (pf - 0.1).abs() <= 0.025;
        detail.push(format!("{} {pf:.4}", d.id()));
    }
    vec![outcome(
        "4",
        "Pf within 0.1 +- 0.025 on 2000 fresh noise trials",
        pass,
        detail.join(", "),
    )]
}

fn random_spd(rng: &mut ChaCha8Rng, n: usize) -> CovMatrix {
    let m: Vec<f64> = (0..n * n).map(|_| rng.sample(StandardNormal)).collect();
    let mut a = vec![0.0; n * n];
    for i in 0..n {
        for j in i..n {
            let v: f64 = (0..n).map(|k| m[k * n + i] * m[k * n + j]).sum::<f64>() + if i == j { 0.1 } else { 0.0 };
            a[i * n + j] = v;
            a[j * n + i] = v;
        }
    }
    CovMatrix::from_entries(n, a).unwrap()
}

fn unit(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let v: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    let s = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.into_iter().map(|x| x / s).collect()
}

fn numerical_oracles() -> Vec<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let cfg = PowerIterConfig::default();

    let mut worst_value = 0.0f64;
    let mut worst_vector = 0.0f64;
    for _ in 0..100 {
        let n = rng.gen_range(2..=32);
        let r = random_spd(&mut rng, n);
        let (feature, lambda) = leading_eigenvector(&r, &cfg).unwrap();
        let oracle = full_eigensystem_oracle(&r).unwrap();
        let top = &oracle.pairs[0];
        worst_value = worst_value.max((lambda - top.value).abs() / top.value);
        let d: f64 = feature.values().iter().zip(top.vector.values()).map(|(a, b)| a * b).sum();
        let err = feature
            .values()
            .iter()
            .zip(top.vector.values())
            .map(|(a, b)| (a - d.signum() * b).powi(2))
            .sum::<f64>()
            .sqrt();
        worst_vector = worst_vector.max(err);
    }
    let eig_pass = worst_value <= 1e-6 && worst_vector <= 1e-6;

    let mut worst_stream = 0.0f64;
    for _ in 0..20 {
        let n = rng.gen_range(2..=32);
        let ns = rng.gen_range(1..=3000);
        let x: Vec<f64> = (0..n + ns - 1).map(|_| rng.sample::<f64, _>(StandardNormal) * 3.0).collect();
        let batch = covariance_of_slice(&x, n, ns).unwrap();
        let mut acc = CovAccumulator::new(n).unwrap();
        for chunk in x.chunks(rng.gen_range(1..=97)) {
            acc.extend_from_slice(chunk).unwrap();
        }
        let stream = acc.finalize().unwrap();
        for (a, b) in batch.entries().iter().zip(stream.entries()) {
            worst_stream = worst_stream.max((a - b).abs());
        }
    }
    let stream_pass = worst_stream <= 1e-12;

    let mut violations = 0usize;
    let draws = 10_000;
    for _ in 0..draws {
        let n = rng.gen_range(2..=64);
        let a = unit(&mut rng, n);
        let b = unit(&mut rng, n);
        let rho = similarity_of(&a, &b).unwrap();
        let neg: Vec<f64> = a.iter().map(|x| -x).collect();
        let shift = rng.gen_range(0..n);
        let mut rotated = b.clone();
        rotated.rotate_right(shift);
        let ok = (0.0..=1.0).contains(&rho)
            && (similarity_of(&neg, &b).unwrap() - rho).abs() <= 1e-12
            && (similarity_of(&a, &rotated).unwrap() - rho).abs() <= 1e-12
            && (similarity_of(&b, &a).unwrap() - rho).abs() <= 1e-12
            && similarity_of(&a, &a).unwrap() >= 1.0 - 1e-12;
        violations += usize::from(!ok);
    }

    vec![
        outcome(
            "5a",
            "leading eigenpair vs Jacobi oracle, 100 random SPD matrices, N <= 32",
            eig_pass,
            format!("max rel. eigenvalue error {worst_value:.2e}, max eigenvector error {worst_vector:.2e}"),
        ),
        outcome(
            "5b",
            "streaming covariance vs batch within 1e-12",
            stream_pass,
            format!("max abs difference {worst_stream:.2e}"),
        ),
        outcome(
            "5c",
            "similarity in [0, 1], sign and circular-shift invariant",
            violations == 0,
            format!("{violations} violations in {draws} draws"),
        ),
    ]
}

fn spiked(n: usize, rng: &mut ChaCha8Rng) -> CovMatrix {
    let u = unit(rng, n);
    let mut a = vec![0.0; n * n];
    for i in 0..n {
        for j in i..n {
            let v = 10.0 * (u[i] * u[j]) + if i == j { 1.0 } else { 0.0 };
            a[i * n + j] = v;
            a[j * n + i] = v;
        }
    }
    CovMatrix::from_entries(n, a).unwrap()
}

fn complexity() -> Vec<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let cfg = PowerIterConfig::default();
    let sizes = [32usize, 64, 128, 256];
    let mut points = Vec::new();
    for &n in &sizes {
        let r = spiked(n, &mut rng);
        let mut reps = 1usize;
        loop {
            let t = Instant::now();
            for _ in 0..reps {
                black_box(leading_eigenvector(black_box(&r), &cfg).unwrap());
            }
            if t.elapsed().as_secs_f64() > 0.05 {
                break;
            }
            reps *= 2;
        }
        let best = (0..7)
            .map(|_| {
                let t = Instant::now();
                for _ in 0..reps {
                    black_box(leading_eigenvector(black_box(&r), &cfg).unwrap());
                }
                t.elapsed().as_secs_f64() / reps as f64
            })
            .fold(f64::INFINITY, f64::min);
        points.push(((n as f64).ln(), best.ln()));
    }
    let k = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / k;
    let my = points.iter().map(|p| p.1).sum::<f64>() / k;
    let slope = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>()
        / points.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
    let times: Vec<String> = sizes
        .iter()
        .zip(&points)
        .map(|(n, p)| format!("N={n}: {:.1} us", p.1.exp() * 1e6))
        .collect();
    vec![outcome(
        "6",
        "log-log runtime slope of leading_eigenvector in [1.6, 2.4]",
        (1.6..=2.4).contains(&slope),
        format!("slope {slope:.2} ({})", times.join(", ")),
    )]
}

fn main() -> ExitCode {
    let filter: Vec<String> = std::env::args()
        .skip(1)
        .filter(|a| !a.starts_with('-'))
        .collect();
    let wanted = |id: &str| filter.is_empty() || filter.iter().any(|f| f == id);

    let mut results = Vec::new();
    let criteria: [Criterion; 5] = [
        ("5", numerical_oracles),
        ("6", complexity),
        ("3", stability),
        ("4", calibration_validity),
        ("1", ordering_and_mme_cav),
    ];
    for (id, run) in criteria {
        if !(wanted(id) || (id == "1" && wanted("2"))) {
            continue;
        }
        for o in run() {
            println!(
                "ACCEPTANCE {:<3} {} : {}\n      {}",
                o.id,
                if o.pass { "PASS" } else { "FAIL" },
                o.name,
                o.detail
            );
            results.push(o);
        }
    }
    if wanted("7") {
        println!(
            "ACCEPTANCE 7   NOT REPRODUCIBLE (declared) : absolute hardware sensitivities in dBm, \
             the broadcast-capture statistics and the DSP latency figure need the original \
             hardware; the relative criteria above stand in for them"
        );
    }
    let failed: Vec<&str> = results.iter().filter(|o| !o.pass).map(|o| o.id).collect();
    println!(
        "acceptance: {} passed, {} failed{}",
        results.len() - failed.len(),
        failed.len(),
        if failed.is_empty() { String::new() } else { format!(" ({})", failed.join(", ")) }
    );
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
