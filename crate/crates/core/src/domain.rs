//! Geometry of the macroscopic rectangle, the homogeneous shape function and
//! 1-Lipschitz candidate paths.
//!
//! The rectangle `Q` has the origin and the endpoint `(l, b)` as opposite
//! vertices and its sides have slopes ±1:
//!
//! ```text
//! Q = { (x, y) : 0 <= x <= l, |y| <= x, |b - y| <= l - x }
//! ```

use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};

/// Slopes within this band beyond ±1 are clamped instead of rejected.
pub const SLOPE_CLAMP: f64 = 1e-12;

/// Discrete Lipschitz tolerance for candidate paths.
pub const LIPSCHITZ_TOL: f64 = 1e-12;

/// Slack used when checking that floating-point points lie in `Q`.
pub(crate) fn geometric_eps(l: f64) -> f64 {
    1e-9 * l.max(1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RectangleDomain {
    l: f64,
    b: f64,
}

impl RectangleDomain {
    pub fn new(l: f64, b: f64) -> Result<Self> {
        if !(l.is_finite() && b.is_finite()) {
            return Err(Error::InvalidDomain(format!("non-finite endpoint ({l}, {b})")));
        }
        if l <= 0.0 {
            return Err(Error::InvalidDomain(format!("l = {l} must be positive")));
        }
        if b.abs() >= l {
            return Err(Error::InvalidDomain(format!("|b| = {} must be < l = {l}", b.abs())));
        }
        Ok(Self { l, b })
    }

    pub fn l(&self) -> f64 {
        self.l
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        (0.0..=self.l).contains(&x) && y.abs() <= x && (self.b - y).abs() <= self.l - x
    }

    /// Membership with an absolute slack `eps` on every inequality.
    pub fn contains_within(&self, x: f64, y: f64, eps: f64) -> bool {
        x >= -eps
            && x <= self.l + eps
            && y.abs() <= x + eps
            && (self.b - y).abs() <= self.l - x + eps
    }

    /// Vertical cross-section `[lo, hi]` of `Q` at abscissa `x` (clamped to `[0, l]`).
    pub fn y_range(&self, x: f64) -> (f64, f64) {
        let x = x.clamp(0.0, self.l);
        let lo = (-x).max(self.b - (self.l - x));
        let hi = x.min(self.b + (self.l - x));
        (lo, hi.max(lo))
    }

    /// Nearest point of `Q` on the same vertical line (x clamped to `[0, l]`).
    pub fn project(&self, x: f64, y: f64) -> (f64, f64) {
        let x = x.clamp(0.0, self.l);
        let (lo, hi) = self.y_range(x);
        (x, y.clamp(lo, hi))
    }

    /// Vertical extent of the bounding box of `Q`.
    pub fn y_bounds(&self) -> (f64, f64) {
        ((self.b - self.l) / 2.0, (self.b + self.l) / 2.0)
    }

    /// True when `other` is a subset of `self`.
    pub fn covers(&self, other: &RectangleDomain) -> bool {
        let eps = geometric_eps(self.l);
        [
            (0.0, 0.0),
            (other.l, other.b),
            ((other.l + other.b) / 2.0, (other.l + other.b) / 2.0),
            ((other.l - other.b) / 2.0, -(other.l - other.b) / 2.0),
        ]
        .iter()
        .all(|&(x, y)| self.contains_within(x, y, eps))
    }
}

/// Limiting passage time per unit length at slope `w` for unit rate:
/// `1 + sqrt(1 - w^2)`.
pub fn gamma(w: f64) -> Result<f64> {
    let w = clamp_slope(w)?;
    Ok(1.0 + (1.0 - w * w).max(0.0).sqrt())
}

/// `(γ'(w), γ''(w))` on the open interval `(-1, 1)`.
pub fn gamma_derivatives(w: f64) -> Result<(f64, f64)> {
    if !(w.abs() < 1.0) {
        return Err(Error::SlopeOutOfRange(w));
    }
    let u2 = 1.0 - w * w;
    let u = u2.sqrt();
    Ok((-w / u, -1.0 / (u2 * u)))
}

pub(crate) fn clamp_slope(w: f64) -> Result<f64> {
    if w.abs() <= 1.0 {
        Ok(w)
    } else if w.abs() <= 1.0 + SLOPE_CLAMP {
        Ok(w.signum())
    } else {
        Err(Error::SlopeOutOfRange(w))
    }
}

/// A piecewise-linear member of the path space `X`: 1-Lipschitz, starting at
/// the origin and ending at `(l, b)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LipschitzPath {
    domain: RectangleDomain,
    xs: Vec<f64>,
    ys: Vec<f64>,
}

impl LipschitzPath {
    pub fn new(domain: RectangleDomain, xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        if xs.len() != ys.len() {
            return Err(Error::InvalidPath(format!(
                "{} abscissae but {} ordinates",
                xs.len(),
                ys.len()
            )));
        }
        if xs.len() < 2 {
            return Err(Error::InvalidPath("need at least two grid points".into()));
        }
        let eps = geometric_eps(domain.l());
        let last = xs.len() - 1;
        if xs[0] != 0.0 || (xs[last] - domain.l()).abs() > eps {
            return Err(Error::InvalidPath(format!(
                "grid must run from 0 to l = {}, got [{}, {}]",
                domain.l(),
                xs[0],
                xs[last]
            )));
        }
        if ys[0].abs() > eps || (ys[last] - domain.b()).abs() > eps {
            return Err(Error::InvalidPath(format!(
                "endpoints must be 0 and b = {}, got {} and {}",
                domain.b(),
                ys[0],
                ys[last]
            )));
        }
        for i in 0..last {
            let dx = xs[i + 1] - xs[i];
            if !(dx > 0.0) {
                return Err(Error::InvalidPath(format!("grid not increasing at index {i}")));
            }
            let dy = ys[i + 1] - ys[i];
            if dy.abs() > dx + LIPSCHITZ_TOL {
                return Err(Error::InvalidPath(format!(
                    "slope {} on segment {i} exceeds 1",
                    dy / dx
                )));
            }
        }
        for (&x, &y) in xs.iter().zip(&ys) {
            if !domain.contains_within(x, y, eps) {
                return Err(Error::InvalidPath(format!("({x}, {y}) outside the rectangle")));
            }
        }
        Ok(Self { domain, xs, ys })
    }

    /// Path on the uniform grid `x_i = i l / (len - 1)`.
    pub fn uniform(domain: RectangleDomain, ys: Vec<f64>) -> Result<Self> {
        let n = ys.len().saturating_sub(1).max(1);
        let xs = uniform_grid(domain.l(), n);
        Self::new(domain, xs, ys)
    }

    /// Samples `f` on `segments + 1` uniform nodes.
    pub fn from_fn(
        domain: RectangleDomain,
        segments: usize,
        f: impl Fn(f64) -> f64,
    ) -> Result<Self> {
        let xs = uniform_grid(domain.l(), segments);
        let ys = xs.iter().map(|&x| f(x)).collect();
        Self::new(domain, xs, ys)
    }

    pub fn straight_line(domain: RectangleDomain, segments: usize) -> Result<Self> {
        let slope = domain.b() / domain.l();
        Self::from_fn(domain, segments, |x| slope * x)
    }

    pub fn domain(&self) -> &RectangleDomain {
        &self.domain
    }

    pub fn xs(&self) -> &[f64] {
        &self.xs
    }

    pub fn ys(&self) -> &[f64] {
        &self.ys
    }

    pub fn segments(&self) -> usize {
        self.xs.len() - 1
    }

    /// Linear interpolation; `x` is clamped to `[0, l]`.
    pub fn eval(&self, x: f64) -> f64 {
        let x = x.clamp(0.0, self.domain.l());
        let k = match self.xs.partition_point(|&xi| xi <= x) {
            0 => 0,
            p => (p - 1).min(self.xs.len() - 2),
        };
        let (x0, x1) = (self.xs[k], self.xs[k + 1]);
        let t = ((x - x0) / (x1 - x0)).clamp(0.0, 1.0);
        self.ys[k] + t * (self.ys[k + 1] - self.ys[k])
    }

    /// Mirror image `y -> -y`, which lives in the rectangle with endpoint `(l, -b)`.
    pub fn reflect(&self) -> Self {
        Self {
            domain: RectangleDomain { l: self.domain.l, b: -self.domain.b },
            xs: self.xs.clone(),
            ys: self.ys.iter().map(|y| -y).collect(),
        }
    }

    /// Uniform sup-norm distance after evaluating both paths on the union of grids.
    pub fn sup_distance(&self, other: &LipschitzPath) -> f64 {
        self.xs
            .iter()
            .chain(other.xs.iter())
            .map(|&x| (self.eval(x) - other.eval(x)).abs())
            .fold(0.0, f64::max)
    }

    /// Two-column `x y` text export.
    pub fn write_xy<W: Write>(&self, mut out: W) -> Result<()> {
        for (x, y) in self.xs.iter().zip(&self.ys) {
            writeln!(out, "{x:.12e} {y:.12e}")?;
        }
        Ok(())
    }
}

pub(crate) fn uniform_grid(l: f64, segments: usize) -> Vec<f64> {
    let mut xs: Vec<f64> = (0..=segments).map(|i| l * i as f64 / segments as f64).collect();
    xs[segments] = l;
    xs
}
