//! Global maximizer of the limiting functional on a discretized path space,
//! with the Riemann-sum upper bounds along it.
//!
//! cargo run --release --example variational_maximizer

use lpp::{functional_eval, riemann_upper, variational_dp, AlphaField, DiscretizedPathSpace, RectangleDomain};

fn main() -> lpp::Result<()> {
    let domain = RectangleDomain::new(1.0, 0.5)?;

    let flat = AlphaField::constant(1.0, domain)?;
    let space = DiscretizedPathSpace::with_ratio(domain, 100, 16)?;
    let sol = variational_dp(&flat, &space)?;
    println!("constant α, b = 0.5: g* = {:.6} (γ(0.5) = {:.6})", sol.g_star, lpp::gamma(0.5)?);

    let bumps = AlphaField::preset("bumps", &[1.0, 1.5, 10.0, 0.4], domain)?;
    let sol = variational_dp(&bumps, &space)?;
    println!("bump at y = 0.4: g* = {:.6}", sol.g_star);
    println!("  functional at the maximizer: {:.6}", functional_eval(&sol.y_star, &bumps)?);
    for m in [2, 4, 8, 16, 64] {
        println!("  G_{m:<3} = {:.6}", riemann_upper(&sol.y_star, &bumps, m)?);
    }
    for x in [0.25, 0.5, 0.75] {
        println!("  y*({x}) = {:+.4}", sol.y_star.eval(x));
    }
    Ok(())
}
