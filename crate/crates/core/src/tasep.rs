//! Totally asymmetric exclusion with step initial condition and
//! site-dependent jump rates, and the macroscopic crossing-time curve
//! `l ↦ 𝒢*[l]` (passage value to `(l, 0)`).
//!
//! Particle `p = 1, 2, ...` starts at site `1 - p`. Its `q`-th jump, from site
//! `q - p`, is the lattice site `(p + q - 2, q - p)` of the percolation model,
//! so the time particle `p` crosses from 0 to 1 is the passage time to
//! `(2p - 2, 0)`.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use rayon::prelude::*;
use serde::Serialize;

use crate::alpha::AlphaField;
use crate::domain::{LipschitzPath, RectangleDomain};
use crate::error::{Error, Result};
use crate::variational::{forward_pass, DiscretizedPathSpace};

/// Mean waiting time of a jump attempted from `site` by particle `particle`
/// (1-based).
pub trait JumpRate: Sync {
    fn mean_wait(&self, site: i64, particle: usize) -> f64;
}

/// `α(site / N)` from a y-only field.
#[derive(Debug, Clone)]
pub struct SpatialRate {
    field: AlphaField,
    n: f64,
}

impl SpatialRate {
    pub fn new(field: AlphaField, n: usize) -> Result<Self> {
        field.eval_y(0.0)?;
        if n == 0 {
            return Err(Error::Tasep("N must be positive".into()));
        }
        Ok(Self { field, n: n as f64 })
    }
}

impl JumpRate for SpatialRate {
    fn mean_wait(&self, site: i64, _particle: usize) -> f64 {
        self.field.eval_y(site as f64 / self.n).unwrap_or(f64::NAN)
    }
}

/// Rates given by a closure `(site, particle) -> mean waiting time`, for
/// particle-dependent scenarios.
pub struct RateFn<F>(pub F);

impl<F: Fn(i64, usize) -> f64 + Sync> JumpRate for RateFn<F> {
    fn mean_wait(&self, site: i64, particle: usize) -> f64 {
        (self.0)(site, particle)
    }
}

#[derive(Debug, Clone)]
pub struct TasepConfig<R = SpatialRate> {
    rate: R,
    n: usize,
    window: (i64, i64),
    particle_budget: usize,
}

impl TasepConfig<SpatialRate> {
    /// Spatial rates `α(s / N)`; the window defaults to
    /// `±(budget + budget / 2)`.
    pub fn new(field: AlphaField, n: usize, particle_budget: usize) -> Result<Self> {
        Self::with_rate(SpatialRate::new(field, n)?, n, particle_budget)
    }
}

impl<R: JumpRate> TasepConfig<R> {
    pub fn with_rate(rate: R, n: usize, particle_budget: usize) -> Result<Self> {
        if n == 0 || particle_budget == 0 {
            return Err(Error::Tasep("N and the particle budget must be positive".into()));
        }
        let half = (particle_budget + particle_budget / 2) as i64;
        Ok(Self { rate, n, window: (-half, half), particle_budget })
    }

    /// Simulated sites `lo..=hi`; particles jumping past `hi` leave the system.
    pub fn with_window(mut self, lo: i64, hi: i64) -> Result<Self> {
        if lo > 0 || hi < 1 {
            return Err(Error::Tasep(format!("window [{lo}, {hi}] must contain sites 0 and 1")));
        }
        self.window = (lo, hi);
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn window(&self) -> (i64, i64) {
        self.window
    }

    pub fn particle_budget(&self) -> usize {
        self.particle_budget
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Clock {
    time: f64,
    particle: usize,
}

impl Eq for Clock {}

impl Ord for Clock {
    fn cmp(&self, other: &Self) -> Ordering {
        // min-heap on time, ties by particle index
        other.time.total_cmp(&self.time).then(other.particle.cmp(&self.particle))
    }
}

impl PartialOrd for Clock {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Unscaled crossing times `T_1 <= ... <= T_k` of one replica.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossingTimes {
    pub n: usize,
    pub times: Vec<f64>,
}

impl CrossingTimes {
    pub fn rescaled(&self, k: usize) -> f64 {
        self.times[k - 1] / self.n as f64
    }

    /// CSV `k,t_k,t_k_over_n`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["k", "t_k", "t_k_over_n"])?;
        for (k, t) in self.times.iter().enumerate() {
            w.write_record(&[
                (k + 1).to_string(),
                format!("{t:.12e}"),
                format!("{:.12e}", t / self.n as f64),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Event-driven simulation until particle `k` jumps from 0 to 1. The observer
/// sees the positions of the particles still in the window after every jump.
pub fn simulate<R: JumpRate>(
    config: &TasepConfig<R>,
    k: usize,
    seed: u64,
    mut observer: Option<&mut dyn FnMut(&[i64])>,
) -> Result<CrossingTimes> {
    if k == 0 || k > config.particle_budget {
        return Err(Error::Tasep(format!(
            "k = {k} must lie in [1, {}]",
            config.particle_budget
        )));
    }
    let (lo, hi) = config.window;
    if (1 - k as i64) < lo || hi < 1 {
        return Err(Error::WindowOverrun(format!(
            "window [{lo}, {hi}] cannot hold particle {k} starting at {}",
            1 - k as i64
        )));
    }
    // one stream per particle: the q-th draw of stream p is the clock of
    // particle p's q-th jump, whatever the event order
    let mut streams: Vec<ChaCha8Rng> = (0..k)
        .map(|p| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(p as u64);
            rng
        })
        .collect();
    let mut wait = |site: i64, particle: usize| -> Result<f64> {
        let mean = config.rate.mean_wait(site, particle);
        if !(mean > 0.0 && mean.is_finite()) {
            return Err(Error::NonPositiveAlpha {
                x: particle as f64,
                y: site as f64 / config.n as f64,
                value: mean,
            });
        }
        let e: f64 = Exp1.sample(&mut streams[particle - 1]);
        Ok(e * mean)
    };

    // particles 1..=k; pos[p - 1] strictly decreasing
    let mut pos: Vec<i64> = (1..=k as i64).map(|p| 1 - p).collect();
    let mut jumps = vec![0usize; k];
    let mut gone = vec![false; k];
    let mut exited = 0usize;
    let mut times = Vec::with_capacity(k);
    let mut heap = BinaryHeap::new();
    heap.push(Clock { time: wait(0, 1)?, particle: 1 });

    while let Some(Clock { time, particle }) = heap.pop() {
        let p = particle - 1;
        let from = pos[p];
        pos[p] += 1;
        jumps[p] += 1;
        if from == 0 {
            times.push(time);
            if particle == k {
                break;
            }
        }
        if pos[p] > hi {
            if jumps[p] < k {
                return Err(Error::WindowOverrun(format!(
                    "particle {particle} left the window after {} of {k} relevant jumps",
                    jumps[p]
                )));
            }
            gone[p] = true;
            exited += 1;
        } else if p == 0 || gone[p - 1] || pos[p - 1] > pos[p] + 1 {
            heap.push(Clock { time: time + wait(pos[p], particle)?, particle });
        }
        // the follower was blocked by this particle until now
        if p + 1 < k && pos[p + 1] == from - 1 {
            heap.push(Clock {
                time: time + wait(pos[p + 1], particle + 1)?,
                particle: particle + 1,
            });
        }
        if let Some(obs) = observer.as_deref_mut() {
            obs(&pos[exited..]);
        }
    }
    if times.len() != k {
        return Err(Error::Tasep("simulation ended before the last crossing".into()));
    }
    Ok(CrossingTimes { n: config.n, times })
}

/// `T_k / N` for one replica.
pub fn tasep_crossing_time<R: JumpRate>(config: &TasepConfig<R>, k: usize, seed: u64) -> Result<f64> {
    Ok(simulate(config, k, seed, None)?.rescaled(k))
}

/// `T_k / N` over independent replicas, in seed order.
pub fn crossing_time_replicas<R: JumpRate>(
    config: &TasepConfig<R>,
    k: usize,
    seeds: &[u64],
) -> Result<Vec<f64>> {
    seeds.par_iter().map(|&s| tasep_crossing_time(config, k, s)).collect()
}

/// Passage values `𝒢*[l]` to `(l, 0)` on a common mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct GStarCurve {
    pub l_values: Vec<f64>,
    pub g_values: Vec<f64>,
    pub maximizers: Vec<LipschitzPath>,
    /// Largest `α` over the nodes of each maximizer.
    pub alpha_bar: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
struct CurveRow {
    l: f64,
    g_star: f64,
    slope: Option<f64>,
}

impl GStarCurve {
    /// Backward difference quotients; `slopes()[i]` belongs to
    /// `[l_i, l_{i+1}]`.
    pub fn slopes(&self) -> Vec<f64> {
        self.l_values
            .windows(2)
            .zip(self.g_values.windows(2))
            .map(|(l, g)| (g[1] - g[0]) / (l[1] - l[0]))
            .collect()
    }

    /// CSV `l,g_star,slope`; the slope column is empty on the first row.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let slopes = self.slopes();
        let mut w = csv::Writer::from_writer(out);
        for i in 0..self.l_values.len() {
            w.serialize(CurveRow {
                l: self.l_values[i],
                g_star: self.g_values[i],
                slope: i.checked_sub(1).map(|k| slopes[k]),
            })?;
        }
        w.flush()?;
        Ok(())
    }

    /// Pairs `(l0, l)` with `l > l0` violating
    /// `𝒢*[l] >= 𝒢*[l0] + 2 ᾱ(l0) (l - l0) - tol`.
    pub fn shift_bound_violations(&self, tol: f64) -> Vec<(f64, f64)> {
        let mut bad = Vec::new();
        for a in 0..self.l_values.len() {
            for b in a + 1..self.l_values.len() {
                let bound = self.g_values[a]
                    + 2.0 * self.alpha_bar[a] * (self.l_values[b] - self.l_values[a]);
                if self.g_values[b] < bound - tol {
                    bad.push((self.l_values[a], self.l_values[b]));
                }
            }
        }
        bad
    }
}

/// `𝒢*[l]` for each `l` on the mesh of `space` (same `Δx`, `Δy`). One forward
/// pass over the largest rectangle serves every `l`: a 1-Lipschitz path from
/// the origin to `(l, 0)` never leaves `Q(l, 0)`.
pub fn gstar_curve(field: &AlphaField, l_values: &[f64], space: &DiscretizedPathSpace) -> Result<GStarCurve> {
    if l_values.is_empty() {
        return Err(Error::Discretization("no l values".into()));
    }
    if l_values.windows(2).any(|w| !(w[1] > w[0])) || !(l_values[0] > 0.0) {
        return Err(Error::Discretization("l values must be positive and increasing".into()));
    }
    let l_max = *l_values.last().unwrap();
    let big = space.rebind(RectangleDomain::new(l_max, 0.0)?)?;
    let pass = forward_pass(field, &big)?;
    let mut curve = GStarCurve {
        l_values: l_values.to_vec(),
        g_values: Vec::with_capacity(l_values.len()),
        maximizers: Vec::with_capacity(l_values.len()),
        alpha_bar: Vec::with_capacity(l_values.len()),
    };
    for &l in l_values {
        let small = space.rebind(RectangleDomain::new(l, 0.0)?)?;
        let end = small.n_x();
        let g = pass
            .value(&big, end, 0)
            .filter(|v| v.is_finite())
            .ok_or_else(|| Error::Numerical(format!("(l, 0) unreachable for l = {l}")))?;
        let levels = pass.backtrack(&big, end, 0);
        let path = small.path_from_levels(&levels)?;
        let alpha_bar = path
            .xs()
            .iter()
            .zip(path.ys())
            .map(|(&x, &y)| field.eval(x, y))
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .fold(f64::NEG_INFINITY, f64::max);
        curve.g_values.push(g);
        curve.maximizers.push(path);
        curve.alpha_bar.push(alpha_bar);
    }
    Ok(curve)
}

/// `max |g_fine - g_coarse|` over common `l`, used as the discretization
/// error estimate of the finer curve.
pub fn discretization_error(fine: &GStarCurve, coarse: &GStarCurve) -> Result<f64> {
    if fine.l_values.len() != coarse.l_values.len()
        || fine.l_values.iter().zip(&coarse.l_values).any(|(a, b)| (a - b).abs() > 1e-12)
    {
        return Err(Error::Discretization("curves are sampled at different l".into()));
    }
    Ok(fine.g_values.iter().zip(&coarse.g_values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvexityReport {
    pub passed: bool,
    pub tol: f64,
    pub min_second_difference: f64,
    /// Interior indices with second difference below `-tol`.
    pub failures: Vec<usize>,
}

impl ConvexityReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// All second differences `𝒢*[l+Δ] - 2𝒢*[l] + 𝒢*[l-Δ] >= -tol`.
pub fn convexity_check(curve: &GStarCurve, tol: f64) -> Result<ConvexityReport> {
    let l = &curve.l_values;
    if l.len() < 3 {
        return Err(Error::Discretization("convexity needs at least 3 values of l".into()));
    }
    let step = l[1] - l[0];
    if l.windows(2).any(|w| ((w[1] - w[0]) - step).abs() > 1e-9 * step.abs().max(1.0)) {
        return Err(Error::Discretization("l values are not uniformly spaced".into()));
    }
    let g = &curve.g_values;
    let mut min_second_difference = f64::INFINITY;
    let mut failures = Vec::new();
    for i in 1..g.len() - 1 {
        let d2 = g[i + 1] - 2.0 * g[i] + g[i - 1];
        min_second_difference = min_second_difference.min(d2);
        if d2 < -tol {
            failures.push(i);
        }
    }
    Ok(ConvexityReport { passed: failures.is_empty(), tol, min_second_difference, failures })
}

/// Maximal run of slopes within `tol` of the run's first slope.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Plateau {
    pub start: usize,
    pub len: usize,
    pub level: f64,
}

/// Runs of at least `min_len` consecutive slopes staying within `tol` of the
/// run's first slope; `level` is the run's mean.
pub fn slope_plateaus(slopes: &[f64], tol: f64, min_len: usize) -> Vec<Plateau> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < slopes.len() {
        let mut j = i + 1;
        while j < slopes.len() && (slopes[j] - slopes[i]).abs() <= tol {
            j += 1;
        }
        if j - i >= min_len {
            let level = slopes[i..j].iter().sum::<f64>() / (j - i) as f64;
            out.push(Plateau { start: i, len: j - i, level });
        }
        i = j;
    }
    out
}
