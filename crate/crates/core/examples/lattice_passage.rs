//! Sample an inhomogeneous reward field, solve the last passage problem and
//! print the passage value together with a coarse view of the maximal path.
//!
//! cargo run --release --example lattice_passage -- 400 7

use lpp::{lpp_solve, sample_rewards, AlphaField, LatticeSpec, RectangleDomain};

fn main() -> lpp::Result<()> {
    let mut args = std::env::args().skip(1);
    let n: u32 = args.next().map(|s| s.parse().expect("N")).unwrap_or(200);
    let seed: u64 = args.next().map(|s| s.parse().expect("seed")).unwrap_or(1);

    let domain = RectangleDomain::new(1.0, 0.0)?;
    // α(x, y) = 2 - y²
    let field = AlphaField::preset("quadratic", &[2.0, -1.0], domain)?;
    let spec = LatticeSpec::new(domain, n)?;
    let rewards = sample_rewards(&spec, &field, seed)?;
    let sol = lpp_solve(&rewards);

    println!("N = {n}, seed = {seed}, sites = {}", spec.site_count());
    println!("G = {:.6}  (limit 4)", sol.value);
    let step = (sol.path.sites().len() / 10).max(1);
    for (x, y) in sol.path.points().step_by(step) {
        println!("  x = {x:.3}  y = {y:+.4}");
    }
    Ok(())
}
