//! Screen a few fields against the strict concavity condition and the
//! pointwise Hessian test.
//!
//! cargo run --release --example concavity_screen

use lpp::concavity::{check_condition, gamma_ratio_sup, hessian_eigen_check};
use lpp::{AlphaField, RectangleDomain};

fn main() -> lpp::Result<()> {
    let domain = RectangleDomain::new(1.0, 0.0)?;
    let fields = [
        ("2 - y^2", AlphaField::preset("quadratic", &[2.0, -1.0], domain)?),
        ("constant", AlphaField::constant(1.0, domain)?),
        ("2 + y^2", AlphaField::preset("quadratic", &[2.0, 1.0], domain)?),
        ("exp(-y)", AlphaField::preset("exponential", &[1.0, -1.0], domain)?),
    ];
    for (name, field) in &fields {
        let cond = check_condition(field, 128)?;
        let hess = hessian_eigen_check(field, 0.5, 128)?;
        println!(
            "{name:>9}: condition {:5}  hessian {:5}  min margin {:+.4}",
            cond.satisfied, hess.satisfied, cond.min_margin
        );
    }
    let (sup, w) = gamma_ratio_sup(4096)?;
    println!("sup (γ')²/(-γγ'') = {sup:.8} at |w| = {w:.4}");
    Ok(())
}
