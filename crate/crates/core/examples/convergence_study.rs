//! Monte Carlo convergence of the passage value and of the maximal path,
//! driven by the experiment runner and written to an output directory.
//!
//! cargo run --release --example convergence_study -- /tmp/lpp-study

use std::path::Path;

use lpp::experiments::{run, run_theorem1, Command, ExperimentConfig};

const CONFIG: &str = "
[experiment]
name = study

[field]
preset = quadratic
params = 2.0, -1.0

[domain]
l = 1.0
b = 0.0

[lattice]
n_list = 50, 100, 200
seed_count = 40

[solver]
n_x = 200
n_y = 800
";

fn main() -> lpp::Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "out/study".into());
    let mut cfg = ExperimentConfig::parse(CONFIG, Path::new("."))?;
    cfg.out_dir = out.into();

    let values = run_theorem1(&cfg)?;
    println!("g* = {:.6}, δ = {:.3}", values.summary.g_star, values.summary.delta);
    for s in &values.summary.per_n {
        println!(
            "N = {:>4}: mean G = {:.5}  std = {:.5}  P(|G - g*| > δ) = {:.3}",
            s.n,
            s.mean_g.unwrap_or(f64::NAN),
            s.std_g.unwrap_or(f64::NAN),
            s.exceedance.unwrap_or(f64::NAN)
        );
    }
    let dir = run(Command::Theorem2, &cfg)?;
    println!("path distances written to {}", dir.join("records.csv").display());
    Ok(())
}
