//! Sampled checks of the sufficient condition for strict concavity of the
//! functional: `α_yy < 0` and `-α α_yy >= α_y² / 2`, together with the
//! pointwise Hessian test on `z(y, w) = α(x0, y) γ(w)`.
//!
//! `x` enters only as a parameter; the condition is checked verbatim at each
//! sampled `(x, y)`.

use rayon::prelude::*;
use serde::Serialize;

use crate::alpha::AlphaField;
use crate::domain::{gamma, gamma_derivatives};
use crate::error::{Error, Result};

pub const DEFAULT_DENSITY: usize = 256;
/// The Hessian test stays inside `|w| <= 1 - W_MARGIN`, where `γ''` is finite.
pub const W_MARGIN: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Inequality {
    /// `α_yy < 0`
    NegativeCurvature,
    /// `-α α_yy - α_y² / 2 >= 0`
    Dominance,
    /// `s = α γ'' + α_yy γ < 0`
    HessianTrace,
    /// `p = α α_yy γ γ'' - (α_y γ')² > 0`
    HessianDeterminant,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Violation {
    pub x: f64,
    pub y: f64,
    pub w: Option<f64>,
    pub inequality: Inequality,
    /// Signed margin; negative (or zero for strict inequalities) when violated.
    pub margin: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SamplePoint {
    pub x: f64,
    pub y: f64,
    pub w: Option<f64>,
}

/// Minimum margin of one inequality over the sample, with its location.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Margin {
    pub inequality: Inequality,
    pub value: f64,
    pub at: SamplePoint,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConcavityReport {
    pub satisfied: bool,
    pub violations: Vec<Violation>,
    pub min_margin: f64,
    pub margins: Vec<Margin>,
}

#[derive(Serialize)]
struct Summary<'a> {
    satisfied: bool,
    min_margins: Vec<(Inequality, f64)>,
    worst_points: Vec<&'a SamplePoint>,
    violation_count: usize,
}

impl ConcavityReport {
    fn build(checks: &[Inequality], samples: Vec<(SamplePoint, Vec<f64>)>, strict: &[bool]) -> Self {
        let mut margins: Vec<Margin> = checks
            .iter()
            .map(|&inequality| Margin {
                inequality,
                value: f64::INFINITY,
                at: SamplePoint { x: f64::NAN, y: f64::NAN, w: None },
            })
            .collect();
        let mut violations = Vec::new();
        for (at, values) in samples {
            for (k, &v) in values.iter().enumerate() {
                if v < margins[k].value {
                    margins[k].value = v;
                    margins[k].at = at;
                }
                let failed = if strict[k] { !(v > 0.0) } else { !(v >= 0.0) };
                if failed {
                    violations.push(Violation {
                        x: at.x,
                        y: at.y,
                        w: at.w,
                        inequality: checks[k],
                        margin: v,
                    });
                }
            }
        }
        let min_margin = margins.iter().map(|m| m.value).fold(f64::INFINITY, f64::min);
        Self { satisfied: violations.is_empty(), violations, min_margin, margins }
    }

    pub fn margin(&self, inequality: Inequality) -> Option<f64> {
        self.margins.iter().find(|m| m.inequality == inequality).map(|m| m.value)
    }

    /// `{satisfied, min_margins, worst_points}` as pretty JSON.
    pub fn to_json(&self) -> Result<String> {
        let summary = Summary {
            satisfied: self.satisfied,
            min_margins: self.margins.iter().map(|m| (m.inequality, m.value)).collect(),
            worst_points: self.margins.iter().map(|m| &m.at).collect(),
            violation_count: self.violations.len(),
        };
        Ok(serde_json::to_string_pretty(&summary)?)
    }
}

fn nodes(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| if i + 1 == n { hi } else { lo + (hi - lo) * i as f64 / (n - 1) as f64 })
        .collect()
}

fn check_density(density: usize) -> Result<()> {
    if density < 2 {
        return Err(Error::Discretization(format!("grid density {density} must be at least 2")));
    }
    Ok(())
}

fn finite(values: &[f64], x: f64, y: f64) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::Numerical(format!("derivative evaluation failed at ({x}, {y})")))
    }
}

/// Both inequalities on a `density × density` sample of `Q`: `density`
/// abscissae and, at each, `density` points across the cross-section.
pub fn check_condition(field: &AlphaField, density: usize) -> Result<ConcavityReport> {
    check_density(density)?;
    let domain = *field.domain();
    let samples: Vec<(SamplePoint, Vec<f64>)> = nodes(0.0, domain.l(), density)
        .into_par_iter()
        .map(|x| {
            let (lo, hi) = domain.y_range(x);
            nodes(lo, hi, density)
                .into_iter()
                .map(|y| {
                    let a = field.raw(x, y);
                    let (_, ay) = field.raw_grad(x, y);
                    let ayy = field.raw_yy(x, y);
                    let values = vec![-ayy, -a * ayy - 0.5 * ay * ay];
                    finite(&values, x, y)?;
                    Ok((SamplePoint { x, y, w: None }, values))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    Ok(ConcavityReport::build(
        &[Inequality::NegativeCurvature, Inequality::Dominance],
        samples,
        &[true, false],
    ))
}

/// Eigenvalue test on the Hessian of `(y, w) ↦ α(x0, y) γ(w)`, sampled on a
/// `density × density` grid of the cross-section at `x0` and `|w| <= 1 - 1e-3`.
pub fn hessian_eigen_check(field: &AlphaField, x0: f64, density: usize) -> Result<ConcavityReport> {
    check_density(density)?;
    let domain = *field.domain();
    if !(x0 > 0.0 && x0 < domain.l()) {
        return Err(Error::OutOfDomain { x: x0, y: 0.0 });
    }
    let (lo, hi) = domain.y_range(x0);
    let ws = nodes(-(1.0 - W_MARGIN), 1.0 - W_MARGIN, density);
    let samples: Vec<(SamplePoint, Vec<f64>)> = nodes(lo, hi, density)
        .into_par_iter()
        .map(|y| {
            let a = field.raw(x0, y);
            let (_, ay) = field.raw_grad(x0, y);
            let ayy = field.raw_yy(x0, y);
            finite(&[a, ay, ayy], x0, y)?;
            ws.iter()
                .map(|&w| {
                    let g = gamma(w)?;
                    let (g1, g2) = gamma_derivatives(w)?;
                    let s = a * g2 + ayy * g;
                    let p = a * ayy * g * g2 - (ay * g1).powi(2);
                    Ok((SamplePoint { x: x0, y, w: Some(w) }, vec![-s, p]))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    Ok(ConcavityReport::build(
        &[Inequality::HessianTrace, Inequality::HessianDeterminant],
        samples,
        &[true, true],
    ))
}

/// Maximum of `(γ')² / (-γ γ'')` over a uniform grid of `points` slopes in
/// `|w| <= 1 - 1e-3`, with the maximizing `|w|`.
pub fn gamma_ratio_sup(points: usize) -> Result<(f64, f64)> {
    check_density(points)?;
    let mut best = (f64::NEG_INFINITY, 0.0);
    for w in nodes(-(1.0 - W_MARGIN), 1.0 - W_MARGIN, points) {
        let (g1, g2) = gamma_derivatives(w)?;
        let r = g1 * g1 / (-gamma(w)? * g2);
        if r > best.0 {
            best = (r, w.abs());
        }
    }
    Ok(best)
}
