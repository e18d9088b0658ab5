//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.

use std::f64::consts::{E, FRAC_PI_2};
use std::process::Command;
use std::time::{Duration, Instant};

use isoflow::euclid_iouf::{self, OUFlowModel};
use isoflow::montecarlo::{estimate_sync_probability, estimate_top_lyapunov, SimConfig};
use isoflow::numerics::{gegenbauer_at_one, gegenbauer_eval};
use isoflow::scalar_diffusion::{
    scale_density, scale_function, speed_density, speed_mass, synchronization_verdict, DiffusionSpec, Verdict,
};
use isoflow::sphere_ibf::{self, SphereModel};
use isoflow::Extended;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ContinuousCDF, Normal};

type Outcome = Result<String, String>;
/// Name, runtime budget and check.
type Criterion<'a> = (&'static str, Duration, Box<dyn Fn() -> Outcome + 'a>);

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

/// 200 sphere models with d in {3, 4, 5} and sparse coefficients in [0, 1), skipping draws
/// whose distance process is degenerate (σ² ≡ 0, e.g. pure rotations). Returns the skip count too.
fn sphere_models() -> (Vec<SphereModel<f64>>, usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(20240501);
    let mut models = Vec::with_capacity(200);
    let mut skipped = 0;
    while models.len() < 200 {
        let d = rng.random_range(3..=5);
        let mut draw = |max_len: usize| -> Vec<f64> {
            let len = rng.random_range(0..=max_len);
            (0..len)
                .map(|_| if rng.random_bool(0.3) { 0.0 } else { rng.random_range(0.0..1.0) })
                .collect()
        };
        let (a, b) = (draw(6), draw(6));
        match SphereModel::new(d, a, b) {
            Ok(m) if sphere_ibf::distance_diffusion(&m).is_ok() => models.push(m),
            _ => skipped += 1,
        }
    }
    (models, skipped)
}

fn equivalence(models: &[SphereModel<f64>], skipped: usize) -> Outcome {
    let sign = |v: f64| if v.abs() <= 1e-9 { 0 } else { v.signum() as i32 };
    let (mut exceptions, mut counts) = (Vec::new(), [0usize; 3]);
    for m in models {
        let lambda1 = sphere_ibf::lyapunov_spectrum(m).map_err(|e| format!("{}: {e}", m.describe()))?[0];
        let gamma1 = sphere_ibf::gamma1(m).map_err(|e| format!("{}: {e}", m.describe()))?;
        counts[(sign(lambda1) + 1) as usize] += 1;
        if sign(gamma1 - 1.0) != sign(lambda1) {
            exceptions.push(m.describe());
        }
    }
    check(
        exceptions.is_empty(),
        format!(
            "{} models ({skipped} degenerate draws skipped), lambda1 <0/=0/>0: {:?}, exceptions: {}",
            models.len(),
            counts,
            exceptions.len()
        ),
    )
}

fn dichotomy(models: &[SphereModel<f64>]) -> Outcome {
    let (mut compared, mut critical, mut mismatches) = (0, 0, Vec::new());
    for m in models {
        let lambda1 = sphere_ibf::lyapunov_spectrum(m).map_err(|e| e.to_string())?[0];
        let spec = sphere_ibf::distance_diffusion(m).map_err(|e| e.to_string())?;
        let v = synchronization_verdict(&spec).map_err(|e| format!("{}: {e}", m.describe()))?;
        if lambda1.abs() < 1e-4 {
            critical += 1;
            continue;
        }
        compared += 1;
        // Antipodally symmetric models also carry infinite mass at π; the dichotomy concerns 0.
        let agrees = if m.is_antipodally_symmetric() {
            (v.speed_near_zero == Some(Extended::PosInfinity)) == (lambda1 <= 0.0)
        } else if lambda1 <= 0.0 {
            v.verdict == Verdict::Synchronizes && v.speed_total == Some(Extended::PosInfinity)
        } else {
            v.verdict == Verdict::Ergodic && v.speed_total.is_some_and(|t| t.is_finite())
        };
        if !agrees {
            mismatches.push(format!("{} lambda1 {lambda1} verdict {:?}", m.describe(), v.verdict));
        }
    }
    check(
        mismatches.is_empty(),
        format!("{compared} compared, {critical} critical skipped, mismatches: {mismatches:?}"),
    )
}

fn iouf_criterion() -> Outcome {
    let mut flips = Vec::new();
    let mut bad = Vec::new();
    let mut last_finite = None;
    for i in 1..=10 {
        let c = 0.25 * i as f64;
        let model = OUFlowModel::gaussian(4, c).map_err(|e| e.to_string())?;
        let lambda1 = euclid_iouf::top_lyapunov(&model).lambda1;
        let spec = euclid_iouf::distance_diffusion(&model).map_err(|e| e.to_string())?;
        let finite = speed_mass(&spec, 0.0, f64::INFINITY).map_err(|e| e.to_string())?.is_finite();
        if finite != (lambda1 > 0.0) {
            bad.push(c);
        }
        if last_finite == Some(true) && !finite {
            flips.push(c);
        }
        last_finite = Some(finite);
    }
    let at_one = euclid_iouf::top_lyapunov(&OUFlowModel::gaussian(4, 1.0).map_err(|e| e.to_string())?).lambda1;
    check(
        bad.is_empty() && flips == [1.0] && at_one == 0.0,
        format!("disagreements at c = {bad:?}, finite -> infinite at c = {flips:?}, lambda1(c=1) = {at_one}"),
    )
}

fn closed_forms() -> Outcome {
    let mut worst: f64 = 0.0;
    let err = |e: isoflow::Error| e.to_string();
    for kappa in [0.1, 0.25, 0.4] {
        let spec = DiffusionSpec::<f64>::new(f64::INFINITY, move |x| kappa * x, |x| x, 1.0, "geometric").map_err(err)?;
        let q = 1.0 - 2.0 * kappa;
        for x in [1e-4f64, 0.05, 0.5, 3.0, 40.0] {
            worst = worst
                .max(rel(scale_density(&spec, x).map_err(err)?, x.powf(-2.0 * kappa)))
                .max(rel(scale_function(&spec, x).map_err(err)?, (x.powf(q) - 1.0) / q))
                .max(rel(speed_density(&spec, x).map_err(err)?, 2.0 * x.powf(2.0 * kappa - 2.0)));
        }
        for (a, b) in [(0.1f64, 1.0f64), (0.5, 4.0), (2.0, 30.0)] {
            let got = speed_mass(&spec, a, b).map_err(err)?.to_real();
            worst = worst.max(rel(got, 2.0 * (a.powf(-q) - b.powf(-q)) / q));
        }
    }
    let logistic = DiffusionSpec::<f64>::new(f64::INFINITY, |x| x - x * x, |x| x, 1.0, "logistic").map_err(err)?;
    for x in [1e-3f64, 0.2, 1.5, 6.0] {
        worst = worst
            .max(rel(scale_density(&logistic, x).map_err(err)?, x.powi(-2) * (2.0 * (x - 1.0)).exp()))
            .max(rel(speed_density(&logistic, x).map_err(err)?, 2.0 * (2.0 - 2.0 * x).exp()));
    }
    let low = speed_mass(&logistic, 0.0, 0.01).map_err(err)?.to_real();
    worst = worst.max(rel(low, E * E * (1.0 - (-0.02f64).exp())));
    let total = speed_mass(&logistic, 0.0, f64::INFINITY).map_err(err)?.to_real();
    check(
        worst < 1e-6 && (total - E * E).abs() < 1e-5,
        format!("max relative error {worst:.2e}, logistic mass - e^2 = {:.2e}", total - E * E),
    )
}

fn monte_carlo_oracle() -> Outcome {
    let spec = DiffusionSpec::<f64>::new(f64::INFINITY, |x| 0.25 * x, |x| x, 1.0, "geometric").map_err(|e| e.to_string())?;
    let cfg = SimConfig::new(1e-3, 40.0, 100_000, 2024);
    let est = estimate_sync_probability(&spec, 1.0, &[0.01], &[40.0], &cfg).map_err(|e| e.to_string())?;
    let exact = Normal::new(0.0, 1.0).unwrap().cdf((0.01f64.ln() + 10.0) / 40f64.sqrt());
    let p = est.prob[0][0];
    check((p - exact).abs() <= 0.02, format!("p_hat {p:.4} vs {exact:.4} over {} paths", est.paths_used))
}

fn lyapunov_estimator() -> Outcome {
    let err = |e: isoflow::Error| e.to_string();
    let cfg = SimConfig::<f64>::new(1e-3, 4.0, 10_000, 99);
    let sphere = sphere_ibf::distance_diffusion(&SphereModel::new(3, vec![0.0, 1.0], vec![]).map_err(err)?).map_err(err)?;
    let iouf = |c| euclid_iouf::distance_diffusion(&OUFlowModel::gaussian(4, c).map_err(err)?).map_err(err);
    let s = estimate_top_lyapunov(&sphere, 1e-6, &cfg).map_err(err)?;
    let strong = estimate_top_lyapunov(&iouf(2.0)?, 1e-6, &cfg).map_err(err)?;
    let critical = estimate_top_lyapunov(&iouf(1.0)?, 1e-6, &cfg).map_err(err)?;
    check(
        (s.mean + 2.0).abs() <= 0.1
            && (strong.mean + 1.0).abs() <= 0.1
            && critical.ci_lo <= 0.0
            && critical.ci_hi >= 0.0,
        format!(
            "sphere {:.4} ± {:.4}, iouf c=2 {:.4} ± {:.4}, iouf c=1 CI [{:.4}, {:.4}]",
            s.mean, s.std_error, strong.mean, strong.std_error, critical.ci_lo, critical.ci_hi
        ),
    )
}

fn critical_synchronization() -> Outcome {
    let err = |e: isoflow::Error| e.to_string();
    let sphere = sphere_ibf::distance_diffusion(&SphereModel::new(3, vec![0.0, 0.5], vec![0.0, 1.0]).map_err(err)?)
        .map_err(err)?;
    let iouf = euclid_iouf::distance_diffusion(&OUFlowModel::gaussian(4, 1.0).map_err(err)?).map_err(err)?;
    let times = [10.0, 20.0, 40.0, 80.0];
    let mut details = Vec::new();
    let mut ok = true;
    for (name, spec, r0) in [("sphere", &sphere, FRAC_PI_2), ("iouf", &iouf, 1.0)] {
        let v = synchronization_verdict(spec).map_err(err)?;
        let cfg = SimConfig::new(5e-3, 80.0, 4000, 77);
        let est = estimate_sync_probability(spec, r0, &[0.05], &times, &cfg).map_err(err)?;
        let p: Vec<f64> = est.prob.iter().map(|row| row[0]).collect();
        let hw: Vec<f64> = est.ci_halfwidth.iter().map(|row| row[0]).collect();
        let monotone = (1..p.len()).all(|i| p[i] + hw[i] + hw[i - 1] >= p[i - 1]);
        ok &= v.verdict == Verdict::Synchronizes
            && v.critical
            && v.speed_total == Some(Extended::PosInfinity)
            && monotone
            && p[p.len() - 1] > 0.5;
        details.push(format!(
            "{name}: {:?} critical={} p_hat {:?}",
            v.verdict,
            v.critical,
            p.iter().map(|x| (x * 1000.0).round() / 1000.0).collect::<Vec<_>>()
        ));
    }
    check(ok, details.join("; "))
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let config = dir.path().join("sim.json");
    std::fs::write(
        &config,
        r#"{"command": "simulate",
            "model": {"kind": "sphere", "d": 3, "a": [0, 0.5], "b": [0, 1]},
            "sim": {"dt": 0.005, "horizon": 10, "paths": 3000, "seed": 31,
                    "r0": 1.5707963267948966, "eta": [0.05, 0.2], "times": [2, 5, 10]}}"#,
    )
    .map_err(|e| e.to_string())?;
    let mut outputs = Vec::new();
    for threads in ["1", "2", "4"] {
        let out = dir.path().join(format!("t{threads}"));
        let run = Command::new(env!("CARGO_BIN_EXE_isoflow"))
            .args(["simulate", "--config"])
            .arg(&config)
            .arg("--out")
            .arg(&out)
            .args(["--threads", threads])
            .env_remove("ISOFLOW_THREADS")
            .output()
            .map_err(|e| e.to_string())?;
        if !run.status.success() {
            return Err(format!("simulate with {threads} threads exited with {}", run.status));
        }
        outputs.push(std::fs::read(out.join("distance_law.csv")).map_err(|e| e.to_string())?);
    }
    check(
        outputs.windows(2).all(|w| w[0] == w[1]),
        format!("threads 1/2/4, {} CSV bytes each", outputs[0].len()),
    )
}

fn gegenbauer() -> Outcome {
    let mut worst: f64 = 0.0;
    for nu in [0.5f64, 1.0, 1.5, 2.0, 2.5, 3.5] {
        for n in 0..=10usize {
            let binom = (0..n).fold(1.0, |acc, j| acc * (n as f64 + 2.0 * nu - 1.0 - j as f64) / (j as f64 + 1.0));
            let at_one = gegenbauer_at_one(nu, n).map_err(|e| e.to_string())?;
            let eval = gegenbauer_eval(nu, n, 1.0).map_err(|e| e.to_string())?;
            worst = worst.max(rel(at_one, binom)).max(rel(eval, binom));
        }
        for x in [-0.95f64, -0.5, 0.0, 0.3, 0.8] {
            let explicit = [
                1.0,
                2.0 * nu * x,
                2.0 * nu * (nu + 1.0) * x * x - nu,
                4.0 / 3.0 * nu * (nu + 1.0) * (nu + 2.0) * x.powi(3) - 2.0 * nu * (nu + 1.0) * x,
            ];
            for (n, want) in explicit.iter().enumerate() {
                let got = gegenbauer_eval(nu, n, x).map_err(|e| e.to_string())?;
                worst = worst.max((got - want).abs() / want.abs().max(1.0));
            }
        }
    }
    check(worst <= 1e-12, format!("max error {worst:.2e}"))
}

fn main() {
    let (models, skipped) = sphere_models();
    let criteria: [Criterion; 9] = [
        ("sphere sign equivalence", Duration::from_secs(10), Box::new(|| equivalence(&models, skipped))),
        ("sphere speed-mass dichotomy", Duration::from_secs(120), Box::new(|| dichotomy(&models))),
        ("IOUF speed finiteness vs lambda1", Duration::from_secs(30), Box::new(iouf_criterion)),
        ("closed-form quadrature", Duration::from_secs(5), Box::new(closed_forms)),
        ("Monte Carlo geometric oracle", Duration::from_secs(120), Box::new(monte_carlo_oracle)),
        ("Lyapunov estimator", Duration::from_secs(180), Box::new(lyapunov_estimator)),
        ("critical-case synchronization", Duration::from_secs(300), Box::new(critical_synchronization)),
        ("determinism across thread counts", Duration::from_secs(60), Box::new(determinism)),
        ("Gegenbauer closed forms", Duration::from_secs(1), Box::new(gegenbauer)),
    ];
    let mut failed = 0;
    for (i, (name, budget, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = run();
        let took = start.elapsed();
        let (status, detail) = match &outcome {
            Ok(d) => ("PASS", d),
            Err(d) => ("FAIL", d),
        };
        let over = if took > *budget { ", runtime over budget" } else { "" };
        println!(
            "criterion {}: {status} {name}: {detail} [{:.2}s of {}s{over}]",
            i + 1,
            took.as_secs_f64(),
            budget.as_secs()
        );
        if outcome.is_err() {
            failed += 1;
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
