use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use isoflow::euclid_iouf;
use isoflow::montecarlo::{estimate_sync_probability, estimate_top_lyapunov, DistanceLawEstimate};
use isoflow::scalar_diffusion::{boundary_classify, synchronization_verdict, Boundary, DiffusionSpec, SyncVerdict, Verdict};
use isoflow::sphere_ibf;
use isoflow::Extended;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{Model, ModelConfig, RunConfig};
use crate::error::{CliError, CliResult};

pub const SCHEMA: &str = "isoflow/1";
pub const SIMULATE_HEADER: [&str; 7] = ["t", "eta", "p_hat", "ci_lo", "ci_hi", "paths", "seed"];
pub const SWEEP_HEADER: [&str; 6] = ["parameter", "value", "lambda1", "gamma1", "verdict", "speed_mass"];
/// Clamp events per step above which the ceiling treatment is flagged.
const CLAMP_LIMIT: f64 = 1e-3;

pub fn verdict_name(v: Verdict) -> &'static str {
    match v {
        Verdict::Synchronizes => "Synchronizes",
        Verdict::Ergodic => "Ergodic",
        Verdict::NotApplicable => "NotApplicable",
        Verdict::Critical => "Critical",
    }
}

fn speed_class(total: Option<Extended<f64>>) -> &'static str {
    match total {
        Some(e) if e.is_finite() => "finite",
        Some(_) => "infinite",
        None => "undetermined",
    }
}

fn prepare(out: &Path) -> CliResult<()> {
    fs::create_dir_all(out).map_err(|e| CliError::config(format!("cannot create output directory {}: {e}", out.display())))
}

fn write_json(path: &Path, value: &Value) -> CliResult<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

fn csv_writer(path: &Path) -> CliResult<csv::Writer<File>> {
    Ok(csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)?)
}

fn to_value<S: Serialize>(s: &S) -> CliResult<Value> {
    Ok(serde_json::to_value(s)?)
}

/// The model's distance diffusion with its verdict and any model-specific report.
struct Classified {
    spec: DiffusionSpec<f64>,
    verdict: Option<SyncVerdict<f64>>,
    lambda1: Option<f64>,
    gamma1: Option<f64>,
    analysis: Value,
}

fn classify_model(model: &Model) -> CliResult<Classified> {
    match model {
        Model::Sphere(m) => {
            let report = sphere_ibf::classify(m)?;
            Ok(Classified {
                spec: sphere_ibf::distance_diffusion(m)?,
                lambda1: Some(report.lambda1),
                gamma1: Some(report.gamma1),
                analysis: to_value(&report)?,
                verdict: Some(report.verdict),
            })
        }
        Model::Iouf(m) => {
            let report = euclid_iouf::classify(m)?;
            Ok(Classified {
                spec: euclid_iouf::distance_diffusion(m)?,
                lambda1: Some(report.lyapunov.lambda1),
                gamma1: None,
                analysis: to_value(&report)?,
                verdict: report.verdict.clone(),
            })
        }
        Model::Diffusion(spec) => {
            let verdict = synchronization_verdict(spec)?;
            Ok(Classified {
                spec: spec.clone(),
                lambda1: None,
                gamma1: None,
                analysis: to_value(&verdict)?,
                verdict: Some(verdict),
            })
        }
    }
}

pub fn classify(cfg: &RunConfig, out: &Path) -> CliResult<PathBuf> {
    let start = Instant::now();
    let model = cfg.model.build()?;
    let c = classify_model(&model)?;
    let verdict = match (&c.verdict, &model) {
        (Some(v), _) => v,
        (None, Model::Iouf(m)) => {
            return Err(CliError::precondition(format!(
                "{}: no verdict for c = 0, the one-point motion has no invariant probability measure",
                m.describe()
            )))
        }
        (None, _) => return Err(CliError::precondition("no verdict available for this model")),
    };
    let boundaries = [Boundary::Zero, Boundary::Upper]
        .into_iter()
        .map(|b| boundary_classify(&c.spec, b).map_err(CliError::from).and_then(|r| to_value(&r)))
        .collect::<CliResult<Vec<_>>>()?;
    let report = json!({
        "schema": SCHEMA,
        "command": "classify",
        "model": cfg.model,
        "description": c.spec.label(),
        "verdict": verdict_name(verdict.verdict),
        "lambda1": c.lambda1,
        "gamma1": c.gamma1,
        "analysis": c.analysis,
        "boundaries": boundaries,
        "wall_time_s": start.elapsed().as_secs_f64(),
    });
    prepare(out)?;
    let path = out.join("report.json");
    write_json(&path, &report)?;
    Ok(path)
}

fn sorted_unique(v: &[f64]) -> Vec<f64> {
    let mut v = v.to_vec();
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

/// `true` when `P(r_t ≤ η)` for the smallest threshold rises beyond its intervals or is
/// already close to 1; `None` for a single time.
fn rising_trend(est: &DistanceLawEstimate<f64>) -> Option<bool> {
    let n = est.times.len();
    if n < 2 {
        return None;
    }
    let (first, last) = (est.prob[0][0], est.prob[n - 1][0]);
    let slack = est.ci_halfwidth[0][0] + est.ci_halfwidth[n - 1][0];
    Some(last + slack >= first && (last - first > slack || last >= 0.9))
}

pub fn simulate(cfg: &RunConfig, out: &Path) -> CliResult<(PathBuf, PathBuf)> {
    let start = Instant::now();
    let sim = cfg.sim()?;
    let model = cfg.model.build()?;
    let c = classify_model(&model)?;
    let etas = sorted_unique(&sim.eta);
    let times = sorted_unique(&sim.times);
    let est = estimate_sync_probability(&c.spec, sim.r0, &etas, &times, &sim.sim_config())?;

    prepare(out)?;
    let csv_path = out.join("distance_law.csv");
    let mut w = csv_writer(&csv_path)?;
    w.write_record(SIMULATE_HEADER)?;
    for (i, t) in times.iter().enumerate() {
        for (j, eta) in etas.iter().enumerate() {
            w.write_record([
                t.to_string(),
                eta.to_string(),
                est.prob[i][j].to_string(),
                est.ci_lo[i][j].to_string(),
                est.ci_hi[i][j].to_string(),
                est.paths_used.to_string(),
                est.seed.to_string(),
            ])?;
        }
    }
    w.flush()?;

    let lyapunov = match &sim.lyapunov {
        Some(l) => {
            let mut lc = sim.sim_config();
            lc.horizon = l.horizon;
            lc.dt = l.dt.unwrap_or(sim.dt);
            lc.paths = l.paths.unwrap_or(sim.paths);
            to_value(&estimate_top_lyapunov(&c.spec, l.r0, &lc)?)?
        }
        None => Value::Null,
    };
    let verdict = c.verdict.as_ref().map(|v| v.verdict);
    let trend = rising_trend(&est);
    let concordant = match (verdict, trend) {
        (Some(Verdict::Synchronizes), Some(up)) => Some(up),
        (Some(Verdict::Ergodic), Some(up)) => Some(!up),
        _ => None,
    };
    let summary = json!({
        "schema": SCHEMA,
        "command": "simulate",
        "model": cfg.model,
        "description": c.spec.label(),
        "sim": sim,
        "csv": "distance_law.csv",
        "paths_used": est.paths_used,
        "seed": est.seed,
        "floor_hits": est.floor_hits,
        "clamp_fraction": est.clamp_fraction,
        "clamp_warning": est.clamp_fraction > CLAMP_LIMIT,
        "verdict": verdict.map(verdict_name),
        "lambda1": c.lambda1,
        "concordance": {
            "trend": trend.map(|up| if up { "toward_one" } else { "plateau" }),
            "concordant": concordant,
        },
        "lyapunov": lyapunov,
        "wall_time_s": start.elapsed().as_secs_f64(),
    });
    let json_path = out.join("summary.json");
    write_json(&json_path, &summary)?;
    Ok((csv_path, json_path))
}

pub fn spectrum(cfg: &RunConfig, out: &Path) -> CliResult<PathBuf> {
    let body = match cfg.model.build()? {
        Model::Sphere(m) => {
            let b = sphere_ibf::boundary_coefficients(&m)?;
            let spectrum = sphere_ibf::lyapunov_spectrum(&m)?;
            let gamma1 = sphere_ibf::gamma1(&m).ok();
            json!({
                "description": m.describe(),
                "alpha1": b.alpha1,
                "alpha1_prime": b.alpha1_prime,
                "beta1": b.beta1,
                "spectrum": spectrum,
                "lambda1": spectrum[0],
                "gamma1": gamma1,
            })
        }
        Model::Iouf(m) => {
            let top = euclid_iouf::top_lyapunov(&m);
            json!({
                "description": m.describe(),
                "lambda1": top.lambda1,
                "lambda1_undamped": top.lambda1_undamped,
                "damping": m.damping(),
                "shift_identity": top.lambda1 == top.lambda1_undamped - m.damping(),
            })
        }
        Model::Diffusion(_) => return Err(CliError::config("spectrum needs a sphere or iouf model")),
    };
    let mut report = json!({ "schema": SCHEMA, "command": "spectrum", "model": cfg.model });
    if let (Value::Object(r), Value::Object(b)) = (&mut report, body) {
        r.extend(b);
    }
    prepare(out)?;
    let path = out.join("spectrum.json");
    write_json(&path, &report)?;
    Ok(path)
}

/// `model` with the named field set to `value`.
fn with_parameter(model: &ModelConfig, name: &str, value: f64) -> CliResult<ModelConfig> {
    let mut m = model.clone();
    let unknown = || CliError::config(format!("sweep parameter '{name}' does not apply to this model"));
    match &mut m {
        ModelConfig::Iouf { c, .. } if name == "c" => *c = value,
        ModelConfig::Sphere { a, b, .. } => {
            let (series, index) = match name.split_at_checked(1) {
                Some(("a", l)) => (a, l),
                Some(("b", l)) => (b, l),
                _ => return Err(unknown()),
            };
            let l: usize = index.parse().ok().filter(|&l| l >= 1).ok_or_else(unknown)?;
            if series.len() < l {
                series.resize(l, 0.0);
            }
            series[l - 1] = value;
        }
        _ => return Err(unknown()),
    }
    Ok(m)
}

pub fn sweep(cfg: &RunConfig, out: &Path) -> CliResult<PathBuf> {
    let block = cfg.sweep.as_ref().ok_or_else(|| CliError::config("config has no \"sweep\" block"))?;
    if block.values.is_empty() {
        return Err(CliError::config("sweep grid is empty"));
    }
    let models = block
        .values
        .iter()
        .map(|&v| with_parameter(&cfg.model, &block.parameter, v))
        .collect::<CliResult<Vec<_>>>()?;
    let rows = models
        .par_iter()
        .map(|m| -> CliResult<[String; 4]> {
            let c = classify_model(&m.build()?)?;
            let fmt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
            Ok([
                fmt(c.lambda1),
                fmt(c.gamma1),
                c.verdict.as_ref().map_or("NotApplicable", |v| verdict_name(v.verdict)).to_string(),
                speed_class(c.verdict.as_ref().and_then(|v| v.speed_total)).to_string(),
            ])
        })
        .collect::<CliResult<Vec<_>>>()?;
    prepare(out)?;
    let path = out.join("sweep.csv");
    let mut w = csv_writer(&path)?;
    w.write_record(SWEEP_HEADER)?;
    for (value, [lambda1, gamma1, verdict, speed]) in block.values.iter().zip(rows) {
        w.write_record([block.parameter.clone(), value.to_string(), lambda1, gamma1, verdict, speed])?;
    }
    w.flush()?;
    Ok(path)
}
