//! Shooting solver for the Euler-Lagrange boundary value problem of the
//! limiting functional, written as the first-order system
//!
//! ```text
//! w' = -(1/α) [ α_y (1 - w²)^{3/2} + (α_x w + α_y)(1 - w²) ]
//! y' = w,            y(0) = 0,  w(0) = w0
//! ```
//!
//! and shot on `w0` until `y(l) = b`.

use std::io::Write;

use log::warn;
use rayon::prelude::*;
use serde::Serialize;

use crate::alpha::AlphaField;
use crate::domain::{clamp_slope, LipschitzPath, RectangleDomain};
use crate::error::{Error, Result};
use crate::variational::functional_eval;

/// Default number of RK4 steps across `[0, l]`.
pub const DEFAULT_STEPS: usize = 2000;
pub const DEFAULT_SCAN_POINTS: usize = 512;
pub const DEFAULT_TOL: f64 = 1e-10;
const MAX_BISECTIONS: usize = 200;
const DUPLICATE_ROOT: f64 = 1e-9;

/// Right-hand side of the slope equation; exactly zero at `|w| = 1`.
pub fn el_rhs(x: f64, y: f64, w: f64, field: &AlphaField) -> Result<f64> {
    let w = clamp_slope(w)?;
    let a = field.eval(x, y)?;
    let (ax, ay) = field.grad(x, y)?;
    rhs_from(x, y, w, a, ax, ay)
}

fn rhs_from(x: f64, y: f64, w: f64, a: f64, ax: f64, ay: f64) -> Result<f64> {
    if !(a > 0.0) {
        return Err(Error::NonPositiveAlpha { x, y, value: a });
    }
    let u2 = (1.0 - w * w).max(0.0);
    if u2 == 0.0 {
        return Ok(0.0);
    }
    let u3 = u2 * u2.sqrt();
    Ok(-(ay * u3 + (ax * w + ay) * u2) / a)
}

/// The slope field along a trajectory. The state may leave the field's
/// rectangle transiently; `α` is then evaluated at the vertical projection.
fn projected_rhs(field: &AlphaField, x: f64, y: f64, w: f64) -> Result<f64> {
    let (px, py) = field.domain().project(x, y);
    let w = w.clamp(-1.0, 1.0);
    let a = field.raw(px, py);
    let (ax, ay) = field.raw_grad(px, py);
    rhs_from(px, py, w, a, ax, ay)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrajectoryPoint {
    pub x: f64,
    pub y: f64,
    pub w: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShootingSolution {
    pub w0: f64,
    pub trajectory: Vec<TrajectoryPoint>,
    /// `y(l) - b`
    pub endpoint_error: f64,
}

impl ShootingSolution {
    pub fn end(&self) -> TrajectoryPoint {
        *self.trajectory.last().expect("trajectory is never empty")
    }

    pub fn max_abs_slope(&self) -> f64 {
        self.trajectory.iter().map(|p| p.w.abs()).fold(0.0, f64::max)
    }

    /// The trajectory as a member of `X`, with the endpoint residual removed
    /// by a linear correction `y - (x/l) * endpoint_error`.
    pub fn to_path(&self, domain: RectangleDomain) -> Result<LipschitzPath> {
        let l = domain.l();
        let xs = self.trajectory.iter().map(|p| p.x).collect();
        let mut ys: Vec<f64> =
            self.trajectory.iter().map(|p| p.y - p.x / l * self.endpoint_error).collect();
        ys[0] = 0.0;
        *ys.last_mut().unwrap() = domain.b();
        LipschitzPath::new(domain, xs, ys)
    }

    /// Three-column `x y w` text export.
    pub fn write_trajectory<W: Write>(&self, mut out: W) -> Result<()> {
        for p in &self.trajectory {
            writeln!(out, "{:.12e} {:.12e} {:.12e}", p.x, p.y, p.w)?;
        }
        Ok(())
    }
}

fn check_inputs(field: &AlphaField, domain: &RectangleDomain) -> Result<()> {
    field.require_positive()?;
    if !field.domain().covers(domain) {
        return Err(Error::InvalidField("alpha field does not cover the rectangle".into()));
    }
    Ok(())
}

/// Classical fixed-step RK4 from `x = 0` to `x = l`; `w` is clamped to
/// `[-1, 1]` after every step. The step is shrunk so that it divides `l`.
pub fn shoot(field: &AlphaField, domain: &RectangleDomain, w0: f64, h: f64) -> Result<ShootingSolution> {
    check_inputs(field, domain)?;
    let l = domain.l();
    if !(h > 0.0) || h > l / 100.0 {
        return Err(Error::Numerical(format!("step {h} must lie in (0, l/100]")));
    }
    let w0 = clamp_slope(w0)?;
    let steps = (l / h - 1e-9).ceil() as usize;
    let h = l / steps as f64;
    let f = |x: f64, y: f64, w: f64| projected_rhs(field, x, y, w);

    let mut trajectory = Vec::with_capacity(steps + 1);
    let (mut y, mut w) = (0.0f64, w0);
    trajectory.push(TrajectoryPoint { x: 0.0, y, w });
    for k in 0..steps {
        let x = k as f64 * h;
        let k1y = w;
        let k1w = f(x, y, w)?;
        let k2y = w + 0.5 * h * k1w;
        let k2w = f(x + 0.5 * h, y + 0.5 * h * k1y, k2y)?;
        let k3y = w + 0.5 * h * k2w;
        let k3w = f(x + 0.5 * h, y + 0.5 * h * k2y, k3y)?;
        let k4y = w + h * k3w;
        let k4w = f(x + h, y + h * k3y, k4y)?;
        let dy = h / 6.0 * (k1y + 2.0 * k2y.clamp(-1.0, 1.0) + 2.0 * k3y.clamp(-1.0, 1.0) + k4y.clamp(-1.0, 1.0));
        y += dy;
        w = (w + h / 6.0 * (k1w + 2.0 * k2w + 2.0 * k3w + k4w)).clamp(-1.0, 1.0);
        if !(y.is_finite() && w.is_finite()) {
            return Err(Error::Numerical(format!("non-finite state at x = {}", x + h)));
        }
        let xn = if k + 1 == steps { l } else { (k + 1) as f64 * h };
        trajectory.push(TrajectoryPoint { x: xn, y, w });
    }
    Ok(ShootingSolution { w0, trajectory, endpoint_error: y - domain.b() })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BvpOptions {
    /// Bisection stops once `|y(l) - b| <= tol`.
    pub tol: f64,
    /// Uniform scan points over `w0 ∈ [-1, 1]`.
    pub scan_points: usize,
    /// RK4 step; `None` means `l / 2000`.
    pub step: Option<f64>,
}

impl Default for BvpOptions {
    fn default() -> Self {
        Self { tol: DEFAULT_TOL, scan_points: DEFAULT_SCAN_POINTS, step: None }
    }
}

impl BvpOptions {
    pub fn new(tol: f64, scan_points: usize) -> Self {
        Self { tol, scan_points, step: None }
    }

    pub fn with_step(mut self, h: f64) -> Self {
        self.step = Some(h);
        self
    }
}

/// All roots of `F(w0) = y(l; w0) - b` found by scanning and bisecting each
/// sign change, sorted by `w0`.
pub fn solve_bvp(
    field: &AlphaField,
    domain: &RectangleDomain,
    opts: &BvpOptions,
) -> Result<Vec<ShootingSolution>> {
    check_inputs(field, domain)?;
    if !(opts.tol > 0.0) {
        return Err(Error::Numerical(format!("tolerance {} must be positive", opts.tol)));
    }
    if opts.scan_points < 16 {
        return Err(Error::Numerical(format!(
            "scan_points = {} must be at least 16",
            opts.scan_points
        )));
    }
    let h = opts.step.unwrap_or(domain.l() / DEFAULT_STEPS as f64);
    let n = opts.scan_points;
    let grid: Vec<f64> = (0..n)
        .map(|i| if i + 1 == n { 1.0 } else { -1.0 + 2.0 * i as f64 / (n - 1) as f64 })
        .collect();
    let shots: Vec<ShootingSolution> = grid
        .par_iter()
        .map(|&w0| shoot(field, domain, w0, h))
        .collect::<Result<_>>()?;

    let mut roots: Vec<ShootingSolution> = Vec::new();
    for k in 0..n {
        let fa = shots[k].endpoint_error;
        let root = if fa == 0.0 {
            Some(shots[k].clone())
        } else if k + 1 < n && fa * shots[k + 1].endpoint_error < 0.0 {
            Some(bisect(field, domain, h, opts.tol, &shots[k], &shots[k + 1])?)
        } else {
            None
        };
        if let Some(r) = root {
            if roots.last().is_some_and(|p| (p.w0 - r.w0).abs() <= DUPLICATE_ROOT) {
                continue;
            }
            roots.push(r);
        }
    }
    let spacing = 2.0 / (n - 1) as f64;
    for pair in roots.windows(2) {
        if pair[1].w0 - pair[0].w0 < spacing {
            warn!(
                "roots w0 = {} and {} are closer than the scan spacing {spacing}",
                pair[0].w0, pair[1].w0
            );
        }
    }
    Ok(roots)
}

fn bisect(
    field: &AlphaField,
    domain: &RectangleDomain,
    h: f64,
    tol: f64,
    a: &ShootingSolution,
    b: &ShootingSolution,
) -> Result<ShootingSolution> {
    let (mut neg, mut pos) = if a.endpoint_error < 0.0 { (a.w0, b.w0) } else { (b.w0, a.w0) };
    let mut best = if a.endpoint_error.abs() <= b.endpoint_error.abs() { a.clone() } else { b.clone() };
    for _ in 0..MAX_BISECTIONS {
        if best.endpoint_error.abs() <= tol {
            return Ok(best);
        }
        let mid = 0.5 * (neg + pos);
        if mid == neg || mid == pos {
            break;
        }
        let s = shoot(field, domain, mid, h)?;
        if s.endpoint_error < 0.0 {
            neg = mid;
        } else {
            pos = mid;
        }
        if s.endpoint_error.abs() <= best.endpoint_error.abs() {
            best = s;
        }
    }
    if best.endpoint_error.abs() > tol {
        warn!(
            "bisection stalled at w0 = {} with |F| = {:e} > {tol:e}",
            best.w0,
            best.endpoint_error.abs()
        );
    }
    Ok(best)
}

/// One JSON record per root.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RootSummary {
    pub w0: f64,
    pub endpoint_error: f64,
    pub g_value: f64,
}

pub fn summarize_roots(
    roots: &[ShootingSolution],
    field: &AlphaField,
    domain: RectangleDomain,
) -> Result<Vec<RootSummary>> {
    roots
        .iter()
        .map(|r| {
            Ok(RootSummary {
                w0: r.w0,
                endpoint_error: r.endpoint_error,
                g_value: functional_eval(&r.to_path(domain)?, field)?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::alpha::Profile;
    use approx::assert_abs_diff_eq;

    fn q(l: f64, b: f64) -> RectangleDomain {
        RectangleDomain::new(l, b).unwrap()
    }

    #[test]
    fn constant_alpha_has_flat_slope_field() {
        let d = q(1.0, 0.0);
        let f = AlphaField::constant(1.5, d).unwrap();
        for &(x, y, w) in &[(0.5, 0.1, 0.3), (0.2, -0.1, -0.9), (0.9, 0.0, 0.0)] {
            assert_eq!(el_rhs(x, y, w, &f).unwrap(), 0.0);
        }
    }

    #[test]
    fn exponential_profile_value() {
        let d = q(1.0, 0.0);
        let f = AlphaField::analytic(Profile::Exponential { scale: 1.0, rate: -1.0 }, d).unwrap();
        assert_abs_diff_eq!(el_rhs(0.5, 0.2, 0.0, &f).unwrap(), 2.0, epsilon = 1e-14);
        assert_abs_diff_eq!(el_rhs(0.5, -0.3, 0.0, &f).unwrap(), 2.0, epsilon = 1e-14);
    }

    #[test]
    fn vanishes_at_extreme_slopes() {
        let d = q(1.0, 0.0);
        let f = AlphaField::preset("bumps", &[1.0, 2.0, 20.0, 0.3], d).unwrap();
        assert_eq!(el_rhs(0.5, 0.1, 1.0, &f).unwrap(), 0.0);
        assert_eq!(el_rhs(0.5, 0.1, -1.0, &f).unwrap(), 0.0);
        assert!(el_rhs(0.5, 0.1, 1.1, &f).is_err());
        assert!(el_rhs(0.5, 0.9, 0.0, &f).is_err());
    }

    #[test]
    fn zero_alpha_rejected() {
        let d = q(1.0, 0.0);
        let f = AlphaField::preset("affine", &[0.0, 1.0, 0.0], d).unwrap();
        assert!(shoot(&f, &d, 0.0, 0.001).is_err());
        assert!(matches!(el_rhs(0.0, 0.0, 0.0, &f), Err(Error::NonPositiveAlpha { .. })));
    }

    #[test]
    fn straight_shots_under_constant_alpha() {
        let d = q(1.0, 0.0);
        let f = AlphaField::constant(1.0, d).unwrap();
        let s = shoot(&f, &d, 0.3, 1.0 / 2000.0).unwrap();
        assert_abs_diff_eq!(s.end().y, 0.3, epsilon = 1e-12);
        assert_eq!(s.trajectory.len(), 2001);
        assert!(shoot(&f, &d, 0.3, 0.5).is_err());
    }

    #[test]
    fn extreme_initial_slopes_are_invariant() {
        let d = q(1.0, 0.2);
        let f = AlphaField::preset("bumps", &[1.0, 2.0, 20.0, 0.3, 2.0, 20.0, -0.3], d).unwrap();
        let up = shoot(&f, &d, 1.0, 0.001).unwrap();
        let down = shoot(&f, &d, -1.0, 0.001).unwrap();
        assert!(up.trajectory.iter().all(|p| p.w == 1.0));
        assert!(down.trajectory.iter().all(|p| p.w == -1.0));
        assert_abs_diff_eq!(up.end().y, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(down.end().y, -1.0, epsilon = 1e-12);
    }

    #[test]
    fn rk4_converges_at_fourth_order() {
        // the field lives on a larger rectangle so the trajectory never hits its edge
        let d = q(1.0, 0.0);
        let f = AlphaField::analytic(
            Profile::preset("polynomial", &[0.0, 0.0, 2.0, 1.0, 0.0, 0.5, 0.0, 2.0, -1.0, 1.0, 1.0, 0.3])
                .unwrap(),
            q(2.0, 0.0),
        )
        .unwrap();
        let end = |h: f64| shoot(&f, &d, 0.2, h).unwrap().end().y;
        let (a, b, c) = (end(1.0 / 100.0), end(1.0 / 200.0), end(1.0 / 400.0));
        let ratio = (a - b) / (b - c);
        assert!((ratio - 16.0).abs() <= 0.3 * 16.0, "ratio {ratio}");
    }

    #[test]
    fn linear_shooting_map_under_constant_alpha() {
        let d = q(1.0, 0.4);
        let f = AlphaField::constant(1.0, d).unwrap();
        let roots = solve_bvp(&f, &d, &BvpOptions::default()).unwrap();
        assert_eq!(roots.len(), 1);
        assert_abs_diff_eq!(roots[0].w0, 0.4, epsilon = 1e-9);
        let path = roots[0].to_path(d).unwrap();
        let line = LipschitzPath::straight_line(d, 10).unwrap();
        assert!(path.sup_distance(&line) < 1e-9);
    }

    #[test]
    fn symmetric_concave_field_has_the_axis_as_only_root() {
        let d = q(1.0, 0.0);
        let f = AlphaField::analytic(Profile::quadratic_y(2.0, -1.0), d).unwrap();
        let roots = solve_bvp(&f, &d, &BvpOptions::default()).unwrap();
        assert_eq!(roots.len(), 1);
        assert!(roots[0].w0.abs() < 1e-9);
        assert!(roots[0].trajectory.iter().all(|p| p.y.abs() < 1e-9));
    }

    #[test]
    fn double_well_has_several_roots() {
        let d = q(1.0, 0.0);
        let f = AlphaField::preset("bumps", &[1.0, 2.0, 20.0, 0.3, 2.0, 20.0, -0.3], d).unwrap();
        let roots = solve_bvp(&f, &d, &BvpOptions::default()).unwrap();
        assert!(roots.len() >= 2, "{} roots", roots.len());
        for r in &roots {
            assert!(r.endpoint_error.abs() <= 1e-10);
            assert!(r.max_abs_slope() < 1.0);
        }
    }

    #[test]
    fn option_validation() {
        let d = q(1.0, 0.0);
        let f = AlphaField::constant(1.0, d).unwrap();
        assert!(solve_bvp(&f, &d, &BvpOptions::new(1e-8, 8)).is_err());
        assert!(solve_bvp(&f, &d, &BvpOptions::new(0.0, 64)).is_err());
    }

    #[test]
    fn trajectory_export() {
        let d = q(1.0, 0.0);
        let f = AlphaField::constant(1.0, d).unwrap();
        let s = shoot(&f, &d, 0.0, 0.01).unwrap();
        let mut buf = Vec::new();
        s.write_trajectory(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 101);
        assert_eq!(text.lines().next().unwrap().split_whitespace().count(), 3);
    }
}
