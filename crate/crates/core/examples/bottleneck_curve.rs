//! Passage value to (l, 0) as a function of l for a two-peak field: the
//! slope jumps each time the maximizer reaches a slower region.
//!
//! cargo run --release --example bottleneck_curve

use lpp::tasep::{convexity_check, discretization_error, gstar_curve, slope_plateaus};
use lpp::{AlphaField, DiscretizedPathSpace, RectangleDomain};

fn main() -> lpp::Result<()> {
    let field = AlphaField::preset("bumps", &[1.0, 3.0, 50.0, 1.0, 6.0, 50.0, 2.0], RectangleDomain::new(8.0, 0.0)?)?;
    let ls: Vec<f64> = (2..=32).map(|i| 0.25 * i as f64).collect();
    let cell = RectangleDomain::new(0.25, 0.0)?;
    let fine = gstar_curve(&field, &ls, &DiscretizedPathSpace::with_ratio(cell, 20, 16)?)?;
    let coarse = gstar_curve(&field, &ls, &DiscretizedPathSpace::with_ratio(cell, 10, 16)?)?;
    let err = discretization_error(&fine, &coarse)?;

    fine.write_csv(std::io::stdout().lock())?;
    let report = convexity_check(&fine, 5.0 * err)?;
    println!("\ndiscretization error ≈ {err:.2e}, convex: {}", report.passed);
    for p in slope_plateaus(&fine.slopes(), 0.05, 3) {
        println!("plateau at slope {:.3} over l in [{}, {}]", p.level, ls[p.start], ls[p.start + p.len]);
    }
    Ok(())
}
