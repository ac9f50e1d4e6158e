//! The limiting functional `𝒢(y) = ∫ α(x, y) γ(y') dx`, its Riemann-sum upper
//! bounds and a global maximizer computed by dynamic programming over a
//! discretized path space.

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::alpha::AlphaField;
use crate::domain::{gamma, LipschitzPath, RectangleDomain};
use crate::error::{Error, Result};

const ALIGN_TOL: f64 = 1e-9;

/// Minimum number of samples per strip when estimating `sup α` along a curve.
pub const SUP_MIN_SAMPLES: usize = 16;
const SUP_MAX_SAMPLES: usize = 1 << 16;
const SUP_STABLE: f64 = 1e-10;

/// Node grid over `Q` with `Δx = l / n_x` and `Δy = l / n_y`.
///
/// `n_y` must be a multiple of `n_x`, so every slope `k Δy / Δx` with
/// `|k| <= n_y / n_x` is representable, including ±1.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiscretizedPathSpace {
    domain: RectangleDomain,
    n_x: usize,
    n_y: usize,
    ratio: i64,
    end_level: i64,
}

impl DiscretizedPathSpace {
    pub fn new(domain: RectangleDomain, n_x: usize, n_y: usize) -> Result<Self> {
        if n_x == 0 || n_y == 0 {
            return Err(Error::Discretization("n_x and n_y must be positive".into()));
        }
        if n_y % n_x != 0 {
            return Err(Error::Discretization(format!(
                "Δx/Δy = n_y/n_x = {n_y}/{n_x} must be an integer"
            )));
        }
        let levels = domain.b() * n_y as f64 / domain.l();
        let end_level = levels.round();
        if (levels - end_level).abs() > ALIGN_TOL * levels.abs().max(1.0) {
            return Err(Error::Discretization(format!(
                "b = {} is not a multiple of Δy = {}",
                domain.b(),
                domain.l() / n_y as f64
            )));
        }
        Ok(Self { domain, n_x, n_y, ratio: (n_y / n_x) as i64, end_level: end_level as i64 })
    }

    /// `n_y = ratio · n_x`.
    pub fn with_ratio(domain: RectangleDomain, n_x: usize, ratio: usize) -> Result<Self> {
        Self::new(domain, n_x, n_x * ratio)
    }

    /// Same mesh on another rectangle: `Δx` and `Δy` are kept, the counts change.
    pub fn rebind(&self, domain: RectangleDomain) -> Result<Self> {
        let cols = domain.l() / self.dx();
        let n_x = cols.round();
        if (cols - n_x).abs() > ALIGN_TOL * cols.max(1.0) || n_x < 1.0 {
            return Err(Error::Discretization(format!(
                "l = {} is not a multiple of Δx = {}",
                domain.l(),
                self.dx()
            )));
        }
        Self::with_ratio(domain, n_x as usize, self.ratio as usize)
    }

    pub fn domain(&self) -> &RectangleDomain {
        &self.domain
    }

    pub fn n_x(&self) -> usize {
        self.n_x
    }

    pub fn n_y(&self) -> usize {
        self.n_y
    }

    /// Largest admissible level increment per column (`Δx / Δy`).
    pub fn ratio(&self) -> i64 {
        self.ratio
    }

    pub fn dx(&self) -> f64 {
        self.domain.l() / self.n_x as f64
    }

    pub fn dy(&self) -> f64 {
        self.domain.l() / self.n_y as f64
    }

    /// Level range `[lo, hi]` of the nodes in column `i`.
    pub fn column(&self, i: usize) -> (i64, i64) {
        let (i, rest) = (i as i64, (self.n_x - i) as i64);
        let lo = (-i * self.ratio).max(self.end_level - rest * self.ratio);
        let hi = (i * self.ratio).min(self.end_level + rest * self.ratio);
        (lo, hi)
    }

    pub fn x(&self, i: usize) -> f64 {
        if i == self.n_x {
            self.domain.l()
        } else {
            i as f64 * self.dx()
        }
    }

    pub fn y(&self, level: i64) -> f64 {
        if level == self.end_level {
            self.domain.b()
        } else {
            level as f64 * self.dy()
        }
    }

    pub(crate) fn path_from_levels(&self, levels: &[i64]) -> Result<LipschitzPath> {
        let xs = (0..=self.n_x).map(|i| self.x(i)).collect();
        let ys = levels.iter().map(|&j| self.y(j)).collect();
        LipschitzPath::new(self.domain, xs, ys)
    }
}

/// Midpoint rule per segment: `Σ α(x_mid, y_mid) γ(slope) Δx`.
pub fn functional_eval(y: &LipschitzPath, field: &AlphaField) -> Result<f64> {
    let (xs, ys) = (y.xs(), y.ys());
    let mut total = 0.0;
    for k in 0..y.segments() {
        let dx = xs[k + 1] - xs[k];
        let slope = (ys[k + 1] - ys[k]) / dx;
        let a = field.eval(0.5 * (xs[k] + xs[k + 1]), 0.5 * (ys[k] + ys[k + 1]))?;
        total += a * gamma(slope)? * dx;
    }
    Ok(total)
}

/// Riemann-sum upper bound `𝒢_m(y) = Σ (l/m) [sup_strip α(x, y(x))] γ(chord slope)`.
///
/// The strip supremum is sampled on at least [`SUP_MIN_SAMPLES`] uniform
/// points, doubled until it moves by less than `1e-10`; the vertices and
/// segment midpoints of `y` inside the strip are always included.
pub fn riemann_upper(y: &LipschitzPath, field: &AlphaField, m: usize) -> Result<f64> {
    if m < 1 {
        return Err(Error::Discretization("m must be at least 1".into()));
    }
    let l = y.domain().l();
    let width = l / m as f64;
    let mut total = 0.0;
    for i in 0..m {
        let a = l * i as f64 / m as f64;
        let b = if i + 1 == m { l } else { l * (i + 1) as f64 / m as f64 };
        let chord = (y.eval(b) - y.eval(a)) / width;
        total += width * strip_sup(y, field, a, b)? * gamma(chord)?;
    }
    Ok(total)
}

fn strip_sup(y: &LipschitzPath, field: &AlphaField, a: f64, b: f64) -> Result<f64> {
    let along = |x: f64| field.eval(x, y.eval(x));
    let (xs, _) = (y.xs(), y.ys());
    let mut fixed = f64::NEG_INFINITY;
    for k in 0..xs.len() {
        if xs[k] >= a && xs[k] <= b {
            fixed = fixed.max(along(xs[k])?);
        }
        if k + 1 < xs.len() {
            let mid = 0.5 * (xs[k] + xs[k + 1]);
            if mid >= a && mid <= b {
                fixed = fixed.max(along(mid)?);
            }
        }
    }
    let sample = |n: usize| -> Result<f64> {
        let mut s = fixed;
        for t in 0..=n {
            s = s.max(along(a + (b - a) * t as f64 / n as f64)?);
        }
        Ok(s)
    };
    let mut n = SUP_MIN_SAMPLES;
    let mut sup = sample(n)?;
    while n < SUP_MAX_SAMPLES {
        n *= 2;
        let refined = sample(n)?;
        let settled = (refined - sup).abs() < SUP_STABLE;
        sup = refined;
        if settled {
            break;
        }
    }
    Ok(sup)
}

#[derive(Debug, Clone, PartialEq)]
pub struct VariationalSolution {
    pub g_star: f64,
    pub y_star: LipschitzPath,
    /// Node levels of the maximizer, one per column.
    pub levels: Vec<i64>,
}

/// Transition rewards between consecutive columns.
struct Transitions {
    /// `γ(k/r)`, indexed by `k + r`.
    gamma: Vec<f64>,
    dx: f64,
}

impl Transitions {
    fn new(space: &DiscretizedPathSpace) -> Result<Self> {
        let r = space.ratio;
        let gamma = (-r..=r).map(|k| gamma(k as f64 / r as f64)).collect::<Result<_>>()?;
        Ok(Self { gamma, dx: space.dx() })
    }

    /// `α` at the midpoints of column `i -> i + 1`, indexed by
    /// `j + j' - (lo_i + lo_{i+1})`.
    fn alpha_midpoints(
        space: &DiscretizedPathSpace,
        field: &AlphaField,
        i: usize,
    ) -> Result<(i64, Vec<f64>)> {
        let (lo0, hi0) = space.column(i);
        let (lo1, hi1) = space.column(i + 1);
        let x = (i as f64 + 0.5) * space.dx();
        let half = 0.5 * space.dy();
        let values = (lo0 + lo1..=hi0 + hi1)
            .map(|m| field.eval(x, m as f64 * half))
            .collect::<Result<_>>()?;
        Ok((lo0 + lo1, values))
    }
}

/// Node values of every column and the chosen predecessor of every node.
pub(crate) struct ForwardPass {
    pub values: Vec<Vec<f64>>,
    choices: Vec<Vec<i64>>,
}

impl ForwardPass {
    /// Value of node `(i, level)`, if the node exists.
    pub fn value(&self, space: &DiscretizedPathSpace, i: usize, level: i64) -> Option<f64> {
        let (lo, hi) = space.column(i);
        (lo..=hi).contains(&level).then(|| self.values[i][(level - lo) as usize])
    }

    /// Levels of the optimal path from the origin to node `(end, level)`.
    pub fn backtrack(&self, space: &DiscretizedPathSpace, end: usize, level: i64) -> Vec<i64> {
        let mut levels = vec![0i64; end + 1];
        levels[end] = level;
        for i in (0..end).rev() {
            let (lo1, _) = space.column(i + 1);
            levels[i] = self.choices[i][(levels[i + 1] - lo1) as usize];
        }
        levels
    }
}

pub(crate) fn forward_pass(field: &AlphaField, space: &DiscretizedPathSpace) -> Result<ForwardPass> {
    if !field.domain().covers(space.domain()) {
        return Err(Error::Discretization("alpha field does not cover the rectangle".into()));
    }
    let r = space.ratio;
    let tr = Transitions::new(space)?;
    let mut values = Vec::with_capacity(space.n_x + 1);
    values.push(vec![0.0f64]);
    let mut choices: Vec<Vec<i64>> = Vec::with_capacity(space.n_x);
    for i in 0..space.n_x {
        let (lo0, hi0) = space.column(i);
        let (lo1, hi1) = space.column(i + 1);
        let (m0, alpha) = Transitions::alpha_midpoints(space, field, i)?;
        let prev = &values[i];
        let (next, pick): (Vec<f64>, Vec<i64>) = (lo1..=hi1)
            .into_par_iter()
            .map(|j1| {
                let mut best = f64::NEG_INFINITY;
                let mut best_j = i64::MIN;
                for j0 in (j1 - r).max(lo0)..=(j1 + r).min(hi0) {
                    let k = j1 - j0;
                    let v = prev[(j0 - lo0) as usize]
                        + alpha[(j0 + j1 - m0) as usize] * tr.gamma[(k + r) as usize] * tr.dx;
                    let better = v > best
                        || (v == best && (j0.abs(), j0) < (best_j.abs(), best_j));
                    if better {
                        best = v;
                        best_j = j0;
                    }
                }
                (best, best_j)
            })
            .unzip();
        values.push(next);
        choices.push(pick);
    }
    Ok(ForwardPass { values, choices })
}

/// Exact maximizer of the discretized functional (transition reward
/// `α_mid γ(slope) Δx`) by a forward pass and backtracking. Ties are broken
/// towards the predecessor with the smallest `|y|`, then the lower `y`.
pub fn variational_dp(field: &AlphaField, space: &DiscretizedPathSpace) -> Result<VariationalSolution> {
    let pass = forward_pass(field, space)?;
    let g_star = pass.value(space, space.n_x, space.end_level).unwrap_or(f64::NEG_INFINITY);
    if !g_star.is_finite() {
        return Err(Error::Numerical("endpoint unreachable in the discretized space".into()));
    }
    let levels = pass.backtrack(space, space.n_x, space.end_level);
    let y_star = space.path_from_levels(&levels)?;
    Ok(VariationalSolution { g_star, y_star, levels })
}

/// Discrete objective of a node path (one level per column), the quantity
/// maximized by [`variational_dp`].
pub fn discrete_objective(
    field: &AlphaField,
    space: &DiscretizedPathSpace,
    levels: &[i64],
) -> Result<f64> {
    if levels.len() != space.n_x + 1 {
        return Err(Error::InvalidPath(format!(
            "{} levels for {} columns",
            levels.len(),
            space.n_x + 1
        )));
    }
    let r = space.ratio;
    let mut total = 0.0;
    for i in 0..space.n_x {
        let (j0, j1) = (levels[i], levels[i + 1]);
        let (lo0, hi0) = space.column(i);
        let (lo1, hi1) = space.column(i + 1);
        if !(lo0..=hi0).contains(&j0) || !(lo1..=hi1).contains(&j1) || (j1 - j0).abs() > r {
            return Err(Error::InvalidPath(format!("infeasible transition at column {i}")));
        }
        let x = (i as f64 + 0.5) * space.dx();
        let a = field.eval(x, (j0 + j1) as f64 * 0.5 * space.dy())?;
        total += a * gamma((j1 - j0) as f64 / r as f64)? * space.dx();
    }
    Ok(total)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RefinementRow {
    pub n_x: usize,
    pub n_y: usize,
    pub g_star: f64,
}

/// `g_star` over a list of `(n_x, n_y)` resolutions.
pub fn refinement_study(
    field: &AlphaField,
    domain: RectangleDomain,
    resolutions: &[(usize, usize)],
) -> Result<Vec<RefinementRow>> {
    resolutions
        .iter()
        .map(|&(n_x, n_y)| {
            let space = DiscretizedPathSpace::new(domain, n_x, n_y)?;
            Ok(RefinementRow { n_x, n_y, g_star: variational_dp(field, &space)?.g_star })
        })
        .collect()
}

/// CSV with header `n_x,n_y,g_star`.
pub fn write_refinement_csv<W: Write>(rows: &[RefinementRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}
