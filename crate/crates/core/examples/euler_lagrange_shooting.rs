//! Shooting on the initial slope for the Euler-Lagrange equation. A concave
//! field has one root; a double well has several, and only the best one is
//! the global maximizer.
//!
//! cargo run --release --example euler_lagrange_shooting

use lpp::euler_lagrange::summarize_roots;
use lpp::{solve_bvp, variational_dp, AlphaField, BvpOptions, DiscretizedPathSpace, RectangleDomain};

fn main() -> lpp::Result<()> {
    let domain = RectangleDomain::new(1.0, 0.0)?;
    let opts = BvpOptions::default();
    let space = DiscretizedPathSpace::with_ratio(domain, 100, 16)?;

    for (name, field) in [
        ("2 - y^2", AlphaField::preset("quadratic", &[2.0, -1.0], domain)?),
        ("double well", AlphaField::preset("bumps", &[1.0, 2.0, 20.0, 0.3, 2.0, 20.0, -0.3], domain)?),
    ] {
        let roots = solve_bvp(&field, &domain, &opts)?;
        let g_star = variational_dp(&field, &space)?.g_star;
        println!("{name}: {} root(s), dynamic programming g* = {g_star:.6}", roots.len());
        for r in summarize_roots(&roots, &field, domain)? {
            println!("  w0 = {:+.6}  G = {:.6}  |y(l) - b| = {:.1e}", r.w0, r.g_value, r.endpoint_error.abs());
        }
    }
    Ok(())
}
