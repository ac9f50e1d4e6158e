//! Reproducible experiment driver. Each experiment reads an
//! [`ExperimentConfig`], computes in parallel over replicas and writes, into
//! the output directory:
//!
//! - `records.csv`: one row per `(N, seed)`, sorted, no timing columns
//! - `timings.csv`: wall time per replica, excluded from comparisons
//! - `summary.json`
//! - `manifest.json`: the configuration echo and a content hash of the inputs
//!
//! plus experiment-specific files.

pub mod config;

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::{info, warn};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::alpha::AlphaField;
use crate::concavity::{check_condition, gamma_ratio_sup, hessian_eigen_check};
use crate::domain::{LipschitzPath, RectangleDomain};
use crate::error::{Error, Result};
use crate::euler_lagrange::{solve_bvp, summarize_roots, RootSummary};
use crate::lattice::{lpp_solve, path_sup_distance, sample_rewards, LatticeSpec};
use crate::tasep::{
    convexity_check, crossing_time_replicas, discretization_error, gstar_curve, simulate,
    slope_plateaus, TasepConfig,
};
use crate::variational::{functional_eval, riemann_upper, variational_dp, DiscretizedPathSpace};

pub use config::{ExperimentConfig, FieldSpec};

/// The experiments behind the command-line subcommands.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Lpp,
    Variational,
    Ode,
    Concavity,
    Tasep,
    Crossval,
    Theorem1,
    Theorem2,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Lpp => "lpp",
            Command::Variational => "variational",
            Command::Ode => "ode",
            Command::Concavity => "concavity",
            Command::Tasep => "tasep",
            Command::Crossval => "crossval",
            Command::Theorem1 => "theorem1",
            Command::Theorem2 => "theorem2",
        }
    }
}

/// One replica. `wall_time` (seconds) goes to `timings.csv` only.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConvergenceRecord {
    pub n: u32,
    pub seed: u64,
    pub g: f64,
    pub sup_distance: Option<f64>,
    #[serde(skip)]
    pub wall_time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NSummary {
    pub n: u32,
    pub replicas: usize,
    pub mean_g: Option<f64>,
    pub std_g: Option<f64>,
    pub exceedance: Option<f64>,
    pub mean_sup_distance: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceSummary {
    pub experiment: String,
    pub g_star: f64,
    pub delta: f64,
    pub replicas: usize,
    pub per_n: Vec<NSummary>,
    /// Present for path experiments: whether the concavity condition held.
    pub concavity_satisfied: Option<bool>,
    /// Sup distance between the global maximizer and the best ODE root.
    pub bvp_sup_distance: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRun {
    pub records: Vec<ConvergenceRecord>,
    pub summary: ConvergenceSummary,
}

fn mean_std(v: &[f64]) -> (Option<f64>, Option<f64>) {
    if v.is_empty() {
        return (None, None);
    }
    let m = v.iter().sum::<f64>() / v.len() as f64;
    let s = if v.len() > 1 {
        Some((v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt())
    } else {
        None
    };
    (Some(m), s)
}

fn replicas(
    cfg: &ExperimentConfig,
    field: &AlphaField,
    reference: Option<&LipschitzPath>,
) -> Result<Vec<ConvergenceRecord>> {
    let jobs: Vec<(LatticeSpec, u64)> = cfg
        .lattices()?
        .into_iter()
        .flat_map(|spec| cfg.seeds.iter().map(move |&s| (spec.clone(), s)))
        .collect();
    let mut records: Vec<ConvergenceRecord> = jobs
        .par_iter()
        .map(|(spec, seed)| {
            let start = Instant::now();
            let sol = lpp_solve(&sample_rewards(spec, field, *seed)?);
            let sup_distance = reference.map(|y| path_sup_distance(&sol.path, y)).transpose()?;
            Ok(ConvergenceRecord {
                n: spec.n(),
                seed: *seed,
                g: sol.value,
                sup_distance,
                wall_time: start.elapsed().as_secs_f64(),
            })
        })
        .collect::<Result<_>>()?;
    records.sort_by_key(|r| (r.n, r.seed));
    Ok(records)
}

fn summarize(
    cfg: &ExperimentConfig,
    records: &[ConvergenceRecord],
    g_star: f64,
    delta: f64,
) -> Result<Vec<NSummary>> {
    cfg.lattices()?
        .iter()
        .map(|spec| {
            let rows: Vec<&ConvergenceRecord> = records.iter().filter(|r| r.n == spec.n()).collect();
            let g: Vec<f64> = rows.iter().map(|r| r.g).collect();
            let d: Vec<f64> = rows.iter().filter_map(|r| r.sup_distance).collect();
            let (mean_g, std_g) = mean_std(&g);
            let exceed = g.iter().filter(|&&v| (v - g_star).abs() > delta).count();
            Ok(NSummary {
                n: spec.n(),
                replicas: rows.len(),
                mean_g,
                std_g,
                exceedance: (!g.is_empty()).then(|| exceed as f64 / g.len() as f64),
                mean_sup_distance: mean_std(&d).0,
            })
        })
        .collect()
}

/// `G(ξ_N)` over `(N, seed)`, with mean, spread and the fraction of replicas
/// farther than `δ` from `𝒢*`.
pub fn run_theorem1(cfg: &ExperimentConfig) -> Result<ConvergenceRun> {
    let field = cfg.field()?;
    let g_star = variational_dp(&field, &cfg.space()?)?.g_star;
    let delta = cfg.delta.unwrap_or(0.1 * g_star);
    let records = replicas(cfg, &field, None)?;
    let per_n = summarize(cfg, &records, g_star, delta)?;
    Ok(ConvergenceRun {
        summary: ConvergenceSummary {
            experiment: cfg.name.clone(),
            g_star,
            delta,
            replicas: records.len(),
            per_n,
            concavity_satisfied: None,
            bvp_sup_distance: None,
        },
        records,
    })
}

fn best_root(
    field: &AlphaField,
    cfg: &ExperimentConfig,
) -> Result<(Vec<RootSummary>, Option<LipschitzPath>)> {
    let domain = cfg.domain()?;
    let roots = solve_bvp(field, &domain, &cfg.bvp_options())?;
    let summaries = summarize_roots(&roots, field, domain)?;
    let best = summaries
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.g_value.total_cmp(&b.1.g_value))
        .map(|(i, _)| roots[i].to_path(domain))
        .transpose()?;
    Ok((summaries, best))
}

/// Sup distance between the lattice maximal path and the variational
/// maximizer over `(N, seed)`.
pub fn run_theorem2(cfg: &ExperimentConfig) -> Result<ConvergenceRun> {
    let field = cfg.field()?;
    let concave = check_condition(&field, cfg.density)?;
    if !concave.satisfied {
        warn!(
            "{}: concavity condition fails ({} violations); the maximizer may not be unique",
            cfg.name,
            concave.violations.len()
        );
    }
    let sol = variational_dp(&field, &cfg.space()?)?;
    let bvp_sup_distance = if field.require_positive().is_ok() {
        best_root(&field, cfg)?.1.map(|p| p.sup_distance(&sol.y_star))
    } else {
        None
    };
    let delta = cfg.delta.unwrap_or(0.1 * sol.g_star);
    let records = replicas(cfg, &field, Some(&sol.y_star))?;
    let per_n = summarize(cfg, &records, sol.g_star, delta)?;
    Ok(ConvergenceRun {
        summary: ConvergenceSummary {
            experiment: cfg.name.clone(),
            g_star: sol.g_star,
            delta,
            replicas: records.len(),
            per_n,
            concavity_satisfied: Some(concave.satisfied),
            bvp_sup_distance,
        },
        records,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CrossvalReport {
    pub g_star: f64,
    pub roots: Vec<RootSummary>,
    pub best_root_g: Option<f64>,
    pub g_difference: Option<f64>,
    pub sup_distance: Option<f64>,
    pub dy: f64,
}

/// Global maximizer against every Euler-Lagrange root.
pub fn run_crossval(cfg: &ExperimentConfig) -> Result<(CrossvalReport, LipschitzPath)> {
    let field = cfg.field()?;
    let space = cfg.space()?;
    let sol = variational_dp(&field, &space)?;
    let (roots, best) = best_root(&field, cfg)?;
    let best_root_g = roots.iter().map(|r| r.g_value).reduce(f64::max);
    Ok((
        CrossvalReport {
            g_star: sol.g_star,
            best_root_g,
            g_difference: best_root_g.map(|g| (sol.g_star - g).abs()),
            sup_distance: best.as_ref().map(|p| p.sup_distance(&sol.y_star)),
            roots,
            dy: space.dy(),
        },
        sol.y_star,
    ))
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<()> {
    let mut w = create(dir, name)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn write_records(dir: &Path, records: &[ConvergenceRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(dir, "records.csv")?);
    if records.is_empty() {
        w.write_record(["n", "seed", "g", "sup_distance"])?;
    }
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    let mut t = csv::Writer::from_writer(create(dir, "timings.csv")?);
    t.write_record(["n", "seed", "wall_seconds"])?;
    for r in records {
        t.write_record(&[r.n.to_string(), r.seed.to_string(), r.wall_time.to_string()])?;
    }
    t.flush()?;
    Ok(())
}

fn write_lipschitz(dir: &Path, name: &str, y: &LipschitzPath) -> Result<()> {
    let mut w = create(dir, name)?;
    y.write_xy(&mut w)?;
    w.flush()?;
    Ok(())
}

/// Git-style blob hash, `sha256("blob <len>\0" ++ bytes)`.
pub fn content_hash(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", bytes.len()).as_bytes());
    h.update(bytes);
    hex::encode(h.finalize())
}

fn write_manifest(dir: &Path, command: Command, cfg: &ExperimentConfig) -> Result<()> {
    let inputs = cfg.input_files()?;
    let mut all = Sha256::new();
    all.update(content_hash(cfg.source.as_bytes()).as_bytes());
    let files: Vec<_> = inputs
        .iter()
        .map(|(path, bytes)| {
            let h = content_hash(bytes);
            all.update(h.as_bytes());
            json!({ "path": path, "hash": h })
        })
        .collect();
    let manifest = json!({
        "command": command.name(),
        "experiment": cfg.name,
        "config": cfg.source,
        "effective": {
            "n_list": cfg.n_list,
            "seeds": cfg.seeds,
            "auto_adjust_n": cfg.auto_adjust_n,
        },
        "config_hash": content_hash(cfg.source.as_bytes()),
        "inputs": files,
        "inputs_hash": hex::encode(all.finalize()),
        "version": env!("CARGO_PKG_VERSION"),
    });
    write_json(dir, "manifest.json", &manifest)
}

/// Runs `command` and writes its outputs into `cfg.out_dir`; returns that
/// directory.
pub fn run(command: Command, cfg: &ExperimentConfig) -> Result<PathBuf> {
    if matches!(command, Command::Lpp | Command::Theorem1 | Command::Theorem2) {
        cfg.lattices()?;
    }
    let dir = cfg.out_dir.clone();
    fs::create_dir_all(&dir)?;
    info!("{}: writing to {}", command.name(), dir.display());
    match command {
        Command::Theorem1 | Command::Theorem2 => {
            let run = if command == Command::Theorem1 { run_theorem1(cfg)? } else { run_theorem2(cfg)? };
            write_records(&dir, &run.records)?;
            write_json(&dir, "summary.json", &run.summary)?;
        }
        Command::Lpp => lpp_outputs(cfg, &dir)?,
        Command::Variational => variational_outputs(cfg, &dir)?,
        Command::Ode => ode_outputs(cfg, &dir)?,
        Command::Concavity => concavity_outputs(cfg, &dir)?,
        Command::Tasep => tasep_outputs(cfg, &dir)?,
        Command::Crossval => {
            let (report, y_star) = run_crossval(cfg)?;
            write_json(&dir, "summary.json", &report)?;
            write_lipschitz(&dir, "y_star.txt", &y_star)?;
        }
    }
    write_manifest(&dir, command, cfg)?;
    Ok(dir)
}

fn lpp_outputs(cfg: &ExperimentConfig, dir: &Path) -> Result<()> {
    let field = cfg.field()?;
    let records = replicas(cfg, &field, None)?;
    write_records(dir, &records)?;
    // maximal path of the first seed at every N
    if let Some(&seed) = cfg.seeds.first() {
        for spec in cfg.lattices()? {
            let sol = lpp_solve(&sample_rewards(&spec, &field, seed)?);
            let mut w = create(dir, &format!("path_n{}_seed{seed}.txt", spec.n()))?;
            for (x, y) in sol.path.points() {
                writeln!(w, "{x:.12e} {y:.12e}")?;
            }
            w.flush()?;
        }
    }
    let (mean, std) = mean_std(&records.iter().map(|r| r.g).collect::<Vec<_>>());
    let per_n: Vec<_> = cfg
        .lattices()?
        .iter()
        .map(|spec| {
            let g: Vec<f64> = records.iter().filter(|r| r.n == spec.n()).map(|r| r.g).collect();
            let (m, s) = mean_std(&g);
            json!({ "n": spec.n(), "replicas": g.len(), "mean_g": m, "std_g": s })
        })
        .collect();
    write_json(dir, "summary.json", &json!({
        "experiment": cfg.name, "replicas": records.len(), "mean_g": mean, "std_g": std, "per_n": per_n,
    }))
}

fn variational_outputs(cfg: &ExperimentConfig, dir: &Path) -> Result<()> {
    let field = cfg.field()?;
    let space = cfg.space()?;
    let sol = variational_dp(&field, &space)?;
    let riemann: Vec<_> = cfg
        .m_list
        .iter()
        .map(|&m| Ok(json!({ "m": m, "g_m": riemann_upper(&sol.y_star, &field, m)? })))
        .collect::<Result<_>>()?;
    write_lipschitz(dir, "y_star.txt", &sol.y_star)?;
    write_json(dir, "summary.json", &json!({
        "experiment": cfg.name,
        "n_x": space.n_x(),
        "n_y": space.n_y(),
        "g_star": sol.g_star,
        "functional": functional_eval(&sol.y_star, &field)?,
        "riemann": riemann,
    }))
}

fn ode_outputs(cfg: &ExperimentConfig, dir: &Path) -> Result<()> {
    let field = cfg.field()?;
    let domain = cfg.domain()?;
    let roots = solve_bvp(&field, &domain, &cfg.bvp_options())?;
    for (i, r) in roots.iter().enumerate() {
        let mut w = create(dir, &format!("trajectory_{i}.txt"))?;
        r.write_trajectory(&mut w)?;
        w.flush()?;
    }
    write_json(dir, "summary.json", &json!({
        "experiment": cfg.name,
        "roots": summarize_roots(&roots, &field, domain)?,
    }))
}

fn concavity_outputs(cfg: &ExperimentConfig, dir: &Path) -> Result<()> {
    let field = cfg.field()?;
    let cond = check_condition(&field, cfg.density)?;
    let hess = hessian_eigen_check(&field, 0.5 * cfg.l, cfg.density)?;
    let (ratio, at) = gamma_ratio_sup(4096)?;
    let condition: serde_json::Value = serde_json::from_str(&cond.to_json()?)?;
    let hessian: serde_json::Value = serde_json::from_str(&hess.to_json()?)?;
    write_json(dir, "summary.json", &json!({
        "experiment": cfg.name,
        "condition": condition,
        "hessian": hessian,
        "gamma_ratio_sup": { "value": ratio, "abs_w": at },
    }))?;
    let mut w = csv::Writer::from_writer(create(dir, "violations.csv")?);
    w.write_record(["x", "y", "inequality", "margin"])?;
    for v in &cond.violations {
        w.write_record(&[v.x.to_string(), v.y.to_string(), format!("{:?}", v.inequality), v.margin.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

fn tasep_outputs(cfg: &ExperimentConfig, dir: &Path) -> Result<()> {
    let field = cfg.field()?;
    let n = match (cfg.tasep_n, cfg.n_list.first()) {
        (Some(n), _) => n,
        (None, Some(&n)) => n as usize,
        (None, None) => return Err(Error::Config("tasep.n or lattice.n_list is required".into())),
    };
    let k = cfg.tasep_k.unwrap_or((cfg.l * n as f64 / 2.0).floor() as usize).max(1);
    let tc = TasepConfig::new(field, n, k)?;
    for &seed in &cfg.seeds {
        let ct = simulate(&tc, k, seed, None)?;
        ct.write_csv(create(dir, &format!("crossing_seed{seed}.csv"))?)?;
    }
    let t = crossing_time_replicas(&tc, k, &cfg.seeds)?;
    let mut w = csv::Writer::from_writer(create(dir, "records.csv")?);
    w.write_record(["seed", "t_k_over_n"])?;
    for (s, v) in cfg.seeds.iter().zip(&t) {
        w.write_record(&[s.to_string(), v.to_string()])?;
    }
    w.flush()?;
    let (mean, std) = mean_std(&t);
    let mut summary = json!({
        "experiment": cfg.name, "n": n, "k": k, "replicas": t.len(), "mean": mean, "std": std,
    });
    if !cfg.l_values.is_empty() {
        summary["curve"] = curve_outputs(cfg, dir)?;
    }
    write_json(dir, "summary.json", &summary)
}

/// `𝒢*[l]` over `l_values`, checked for convexity against five times the
/// difference to a half-resolution curve.
fn curve_outputs(cfg: &ExperimentConfig, dir: &Path) -> Result<serde_json::Value> {
    let l_max = *cfg.l_values.last().unwrap();
    let big = RectangleDomain::new(l_max, 0.0)?;
    let field = match &cfg.field {
        FieldSpec::Preset { name, params } => AlphaField::preset(name, params, big)?,
        FieldSpec::GridFile(_) => cfg.field()?,
    };
    let space = cfg.space()?;
    let ratio = space.ratio() as usize;
    let fine = gstar_curve(&field, &cfg.l_values, &space)?;
    let coarse_space = DiscretizedPathSpace::with_ratio(*space.domain(), space.n_x() / 2, ratio)
        .and_then(|s| if s.n_x() * 2 == space.n_x() { Ok(s) } else { Err(Error::Discretization("n_x must be even".into())) })?;
    let coarse = gstar_curve(&field, &cfg.l_values, &coarse_space)?;
    let err = discretization_error(&fine, &coarse)?;
    fine.write_csv(create(dir, "curve.csv")?)?;
    let value = if cfg.l_values.len() >= 3 {
        let report = convexity_check(&fine, 5.0 * err)?;
        write_json(dir, "convexity.json", &report)?;
        json!({ "discretization_error": err, "convex": report.passed,
                "plateaus": slope_plateaus(&fine.slopes(), 0.05, 3) })
    } else {
        json!({ "discretization_error": err })
    };
    Ok(value)
}
