//! Exclusion process with step initial condition: rescaled crossing times
//! against the lattice passage value they are coupled to.
//!
//! cargo run --release --example tasep_crossing -- 200

use lpp::tasep::crossing_time_replicas;
use lpp::{lpp_solve, sample_rewards, AlphaField, LatticeSpec, RectangleDomain, TasepConfig};
use rayon::prelude::*;

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn main() -> lpp::Result<()> {
    let n: usize = std::env::args().nth(1).map(|s| s.parse().expect("N")).unwrap_or(200);
    let domain = RectangleDomain::new(1.0, 0.0)?;
    let field = AlphaField::preset("bumps", &[1.0, 0.5, 8.0, 0.2], domain)?;
    let seeds: Vec<u64> = (0..200).collect();

    // particle lN/2 + 1 crosses at exactly the passage time to (l, 0)
    let k = n / 2 + 1;
    let config = TasepConfig::new(field.clone(), n, k)?;
    let t = crossing_time_replicas(&config, k, &seeds)?;
    let spec = LatticeSpec::new(domain, n as u32)?;
    let g: Vec<f64> = seeds
        .par_iter()
        .map(|&s| sample_rewards(&spec, &field, s).map(|r| lpp_solve(&r).value))
        .collect::<lpp::Result<_>>()?;
    println!("N = {n}, k = {k}, {} replicas", seeds.len());
    println!("mean T_k / N      = {:.5}", mean(&t));
    println!("mean G to (1, 0)  = {:.5}", mean(&g));
    Ok(())
}
