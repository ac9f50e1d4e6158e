//! Microscopic model: exponential rewards on the refined even lattice inside
//! `Q` and the last passage value computed by dynamic programming.
//!
//! Sites are integer pairs `(i, j)` with `i + j` even, standing for the
//! macroscopic point `(i/N, j/N)`. A directed path moves by `(1, ±1)` per
//! step from `(0, 0)` to `(N l, N b)`.

use std::io::{Read, Write};

use bitvec::prelude::*;
use rand::SeedableRng;
use rand_distr::{Distribution, Exp1};
use rand_pcg::Pcg64Mcg;
use rayon::prelude::*;
use serde::Serialize;

use crate::alpha::AlphaField;
use crate::domain::{LipschitzPath, RectangleDomain};
use crate::error::{Error, Result};

const INTEGRALITY_TOL: f64 = 1e-9;

/// Upper limit for the automatic search of an admissible refinement.
const MAX_ADJUST_STEPS: u32 = 1_000_000;

fn as_integer(v: f64) -> Option<i64> {
    let r = v.round();
    ((v - r).abs() <= INTEGRALITY_TOL * v.abs().max(1.0)).then_some(r as i64)
}

/// `S_N = Q ∩ (1/N) Z̃²`, enumerated column by column.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LatticeSpec {
    domain: RectangleDomain,
    n: u32,
    steps: i64,
    end_level: i64,
    #[serde(skip)]
    offsets: Vec<usize>,
}

impl LatticeSpec {
    /// Rejects `(l, b, N)` unless `(l, b)` is a vertex of the refined lattice.
    pub fn new(domain: RectangleDomain, n: u32) -> Result<Self> {
        if n == 0 {
            return Err(Error::Lattice("N must be positive".into()));
        }
        let nf = n as f64;
        let steps = as_integer(nf * domain.l()).ok_or_else(|| {
            Error::Lattice(format!("N l = {} is not an integer", nf * domain.l()))
        })?;
        let end_level = as_integer(nf * domain.b()).ok_or_else(|| {
            Error::Lattice(format!("N b = {} is not an integer", nf * domain.b()))
        })?;
        if (steps + end_level).rem_euclid(2) != 0 {
            return Err(Error::Lattice(format!(
                "N (l + b) = {} is odd",
                steps + end_level
            )));
        }
        let mut offsets = Vec::with_capacity(steps as usize + 2);
        let mut acc = 0usize;
        offsets.push(0);
        for i in 0..=steps {
            let (lo, hi) = column_bounds(steps, end_level, i);
            acc += ((hi - lo) / 2 + 1) as usize;
            offsets.push(acc);
        }
        Ok(Self { domain, n, steps, end_level, offsets })
    }

    /// Smallest admissible refinement `N' >= n`.
    pub fn auto_adjust(domain: RectangleDomain, n: u32) -> Result<Self> {
        let start = n.max(1);
        for candidate in start..start.saturating_add(MAX_ADJUST_STEPS) {
            if let Ok(spec) = Self::new(domain, candidate) {
                return Ok(spec);
            }
        }
        Err(Error::Lattice(format!(
            "no admissible N in [{start}, {}] for l = {}, b = {}",
            start.saturating_add(MAX_ADJUST_STEPS),
            domain.l(),
            domain.b()
        )))
    }

    pub fn domain(&self) -> &RectangleDomain {
        &self.domain
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    /// `N l`, the number of steps of every directed path.
    pub fn steps(&self) -> i64 {
        self.steps
    }

    /// `N b`, the final lattice level.
    pub fn end_level(&self) -> i64 {
        self.end_level
    }

    /// Lowest and highest `j` in column `i` (same parity as `i`).
    pub fn column(&self, i: i64) -> (i64, i64) {
        column_bounds(self.steps, self.end_level, i)
    }

    pub fn site_count(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    pub fn contains_site(&self, i: i64, j: i64) -> bool {
        if i < 0 || i > self.steps || (i + j).rem_euclid(2) != 0 {
            return false;
        }
        let (lo, hi) = self.column(i);
        (lo..=hi).contains(&j)
    }

    /// Position of `(i, j)` in slice order.
    pub fn index(&self, i: i64, j: i64) -> Option<usize> {
        self.contains_site(i, j).then(|| {
            let (lo, _) = self.column(i);
            self.offsets[i as usize] + ((j - lo) / 2) as usize
        })
    }

    pub fn coords(&self, i: i64, j: i64) -> (f64, f64) {
        let nf = self.n as f64;
        (i as f64 / nf, j as f64 / nf)
    }

    fn column_slices<'a>(&self, values: &'a mut [f64]) -> Vec<&'a mut [f64]> {
        let mut out = Vec::with_capacity(self.steps as usize + 1);
        let mut rest = values;
        for i in 0..=self.steps as usize {
            let (head, tail) = rest.split_at_mut(self.offsets[i + 1] - self.offsets[i]);
            out.push(head);
            rest = tail;
        }
        out
    }
}

fn column_bounds(steps: i64, end_level: i64, i: i64) -> (i64, i64) {
    let lo = (-i).max(end_level - (steps - i));
    let hi = i.min(end_level + (steps - i));
    (lo, hi)
}

/// Per-site stream key: `seed ⊕ hash(i, j)`.
fn site_key(seed: u64, i: i64, j: i64) -> u64 {
    let packed = ((i as u64) << 32) ^ (j as u32 as u64);
    let mut h = packed.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    h ^= h >> 29;
    h = h.wrapping_mul(0xBF58_476D_1CE4_E5B9);
    h ^= h >> 32;
    seed ^ h
}

/// Unit-mean exponential variable attached to site `(i, j)` under `seed`.
pub fn site_exponential(seed: u64, i: i64, j: i64) -> f64 {
    let mut rng = Pcg64Mcg::seed_from_u64(site_key(seed, i, j));
    Exp1.sample(&mut rng)
}

/// One realization of the reward field on `S_N`, stored in slice order.
#[derive(Debug, Clone, PartialEq)]
pub struct RewardField {
    spec: LatticeSpec,
    rewards: Vec<f64>,
    seed: u64,
}

impl RewardField {
    /// Wraps explicit rewards (slice order).
    pub fn from_values(spec: LatticeSpec, rewards: Vec<f64>, seed: u64) -> Result<Self> {
        if rewards.len() != spec.site_count() {
            return Err(Error::Lattice(format!(
                "{} rewards for {} sites",
                rewards.len(),
                spec.site_count()
            )));
        }
        if let Some(v) = rewards.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::Lattice(format!("reward {v} is negative or not finite")));
        }
        Ok(Self { spec, rewards, seed })
    }

    pub fn spec(&self) -> &LatticeSpec {
        &self.spec
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn rewards(&self) -> &[f64] {
        &self.rewards
    }

    pub fn get(&self, i: i64, j: i64) -> Option<f64> {
        self.spec.index(i, j).map(|k| self.rewards[k])
    }

    /// Binary dump: `N` (u64), `l`, `b` (f64), `seed` (u64), then the
    /// rewards in slice order; all little-endian.
    pub fn write_binary<W: Write>(&self, mut out: W) -> Result<()> {
        out.write_all(&(self.spec.n as u64).to_le_bytes())?;
        out.write_all(&self.spec.domain.l().to_le_bytes())?;
        out.write_all(&self.spec.domain.b().to_le_bytes())?;
        out.write_all(&self.seed.to_le_bytes())?;
        for r in &self.rewards {
            out.write_all(&r.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut input: R) -> Result<Self> {
        let mut word = [0u8; 8];
        let mut next = |input: &mut R| -> Result<[u8; 8]> {
            input.read_exact(&mut word)?;
            Ok(word)
        };
        let n = u64::from_le_bytes(next(&mut input)?);
        let l = f64::from_le_bytes(next(&mut input)?);
        let b = f64::from_le_bytes(next(&mut input)?);
        let seed = u64::from_le_bytes(next(&mut input)?);
        let n = u32::try_from(n).map_err(|_| Error::Lattice(format!("N = {n} too large")))?;
        let spec = LatticeSpec::new(RectangleDomain::new(l, b)?, n)?;
        let mut rewards = Vec::with_capacity(spec.site_count());
        for _ in 0..spec.site_count() {
            rewards.push(f64::from_le_bytes(next(&mut input)?));
        }
        Self::from_values(spec, rewards, seed)
    }
}

/// Draws `ξ_p = (α(p)/N) E_p` with `E_p ~ Exp(1)` independently per site.
///
/// `E_p` depends only on `(seed, i, j)`, so fields with different `α`
/// sampled under one seed are coupled monotonically.
pub fn sample_rewards(spec: &LatticeSpec, field: &AlphaField, seed: u64) -> Result<RewardField> {
    if !field.domain().covers(spec.domain()) {
        return Err(Error::Lattice("alpha field does not cover the lattice rectangle".into()));
    }
    let mut rewards = vec![0.0; spec.site_count()];
    let nf = spec.n as f64;
    spec.column_slices(&mut rewards)
        .into_par_iter()
        .enumerate()
        .try_for_each(|(i, column)| -> Result<()> {
            let i = i as i64;
            let (lo, _) = spec.column(i);
            for (k, slot) in column.iter_mut().enumerate() {
                let j = lo + 2 * k as i64;
                let (x, y) = spec.coords(i, j);
                let a = field.eval(x, y)?;
                *slot = if a == 0.0 { 0.0 } else { a / nf * site_exponential(seed, i, j) };
            }
            Ok(())
        })?;
    Ok(RewardField { spec: spec.clone(), rewards, seed })
}

/// Lattice path from `(0, 0)` to `(N l, N b)` with `(1, ±1)` steps.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DirectedPath {
    n: u32,
    sites: Vec<(i64, i64)>,
}

impl DirectedPath {
    pub fn new(spec: &LatticeSpec, sites: Vec<(i64, i64)>) -> Result<Self> {
        if sites.first() != Some(&(0, 0)) {
            return Err(Error::InvalidPath("path must start at the origin".into()));
        }
        if sites.last() != Some(&(spec.steps, spec.end_level)) {
            return Err(Error::InvalidPath("path must end at (N l, N b)".into()));
        }
        for w in sites.windows(2) {
            let (a, b) = (w[0], w[1]);
            if b.0 - a.0 != 1 || (b.1 - a.1).abs() != 1 {
                return Err(Error::InvalidPath(format!("illegal step {a:?} -> {b:?}")));
            }
        }
        if let Some(s) = sites.iter().find(|&&(i, j)| !spec.contains_site(i, j)) {
            return Err(Error::InvalidPath(format!("site {s:?} outside S_N")));
        }
        Ok(Self { n: spec.n, sites })
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn sites(&self) -> &[(i64, i64)] {
        &self.sites
    }

    /// Macroscopic `(x, y)` coordinates.
    pub fn points(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        let nf = self.n as f64;
        self.sites.iter().map(move |&(i, j)| (i as f64 / nf, j as f64 / nf))
    }

    /// Sum of rewards along the path, accumulated from the origin.
    pub fn reward_sum(&self, rewards: &RewardField) -> Result<f64> {
        self.sites.iter().try_fold(0.0, |acc, &(i, j)| {
            rewards
                .get(i, j)
                .map(|r| acc + r)
                .ok_or_else(|| Error::InvalidPath(format!("site ({i}, {j}) has no reward")))
        })
    }

    /// Mirror image `j -> -j`.
    pub fn reflect(&self) -> Self {
        Self { n: self.n, sites: self.sites.iter().map(|&(i, j)| (i, -j)).collect() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LppSolution {
    pub value: f64,
    pub path: DirectedPath,
}

/// Last passage value `G(ξ_N)` and the maximal path.
///
/// `V(p) = ξ_p + max V(p - (1, ±1))` over predecessors inside `S_N`, one
/// backpointer bit per site. Ties go to the upper predecessor.
pub fn lpp_solve(rewards: &RewardField) -> LppSolution {
    let spec = &rewards.spec;
    let mut upper = bitvec![0; spec.site_count()];
    let mut prev: Vec<f64> = vec![rewards.rewards[0]];
    let mut prev_lo = 0i64;
    for i in 1..=spec.steps {
        let (lo, hi) = spec.column(i);
        let (plo, phi) = (prev_lo, prev_lo + 2 * (prev.len() as i64 - 1));
        let base = spec.offsets[i as usize];
        let mut cur = Vec::with_capacity(((hi - lo) / 2 + 1) as usize);
        for (k, j) in (lo..=hi).step_by(2).enumerate() {
            let below = (j - 1 >= plo && j - 1 <= phi).then(|| prev[((j - 1 - plo) / 2) as usize]);
            let above = (j + 1 >= plo && j + 1 <= phi).then(|| prev[((j + 1 - plo) / 2) as usize]);
            let best = match (below, above) {
                (Some(d), Some(u)) if u >= d => {
                    upper.set(base + k, true);
                    u
                }
                (Some(d), Some(_)) => d,
                (None, Some(u)) => {
                    upper.set(base + k, true);
                    u
                }
                (Some(d), None) => d,
                (None, None) => unreachable!("every site beyond the origin has a predecessor"),
            };
            cur.push(best + rewards.rewards[base + k]);
        }
        prev = cur;
        prev_lo = lo;
    }
    let value = prev[((spec.end_level - prev_lo) / 2) as usize];

    let mut sites = Vec::with_capacity(spec.steps as usize + 1);
    let (mut i, mut j) = (spec.steps, spec.end_level);
    sites.push((i, j));
    while i > 0 {
        let k = spec.index(i, j).expect("backtrack stays on the lattice");
        j += if upper[k] { 1 } else { -1 };
        i -= 1;
        sites.push((i, j));
    }
    sites.reverse();
    LppSolution { value, path: DirectedPath { n: spec.n, sites } }
}

/// `max_x |π(x) - y(x)|` over the lattice abscissae, `y` linearly interpolated.
pub fn path_sup_distance(path: &DirectedPath, y: &LipschitzPath) -> Result<f64> {
    let nf = path.n as f64;
    let l_path = path.sites.last().map(|s| s.0 as f64 / nf).unwrap_or(0.0);
    if (l_path - y.domain().l()).abs() > 1e-9 * l_path.max(1.0) {
        return Err(Error::InvalidPath(format!(
            "lattice path spans [0, {l_path}] but the curve spans [0, {}]",
            y.domain().l()
        )));
    }
    Ok(path.points().map(|(x, py)| (py - y.eval(x)).abs()).fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn q(l: f64, b: f64) -> RectangleDomain {
        RectangleDomain::new(l, b).unwrap()
    }

    fn unit_field(domain: RectangleDomain) -> AlphaField {
        AlphaField::constant(1.0, domain).unwrap()
    }

    #[test]
    fn admissibility() {
        assert!(LatticeSpec::new(q(1.0, 0.0), 2).is_ok());
        assert!(LatticeSpec::new(q(1.0, 0.5), 2).is_err()); // N(l+b) = 3
        assert!(LatticeSpec::new(q(1.0, 0.3), 4).is_err()); // N b = 1.2
        assert!(LatticeSpec::new(q(1.0, 0.0), 0).is_err());
        let adj = LatticeSpec::auto_adjust(q(1.0, 0.5), 3).unwrap();
        assert_eq!(adj.n(), 4);
        let adj = LatticeSpec::auto_adjust(q(1.0, 0.25), 5).unwrap();
        assert_eq!(adj.n(), 8);
    }

    #[test]
    fn site_enumeration_matches_membership() {
        let spec = LatticeSpec::new(q(1.5, 0.5), 4).unwrap();
        let mut count = 0;
        for i in -1..=8 {
            for j in -8..=8 {
                let (x, y) = spec.coords(i, j);
                let inside = (i + j) % 2 == 0 && spec.domain().contains(x, y);
                assert_eq!(spec.contains_site(i, j), inside, "({i}, {j})");
                if inside {
                    assert_eq!(spec.index(i, j), Some(count));
                    count += 1;
                }
            }
        }
        assert_eq!(count, spec.site_count());
    }

    #[test]
    fn two_path_example() {
        let spec = LatticeSpec::new(q(1.0, 0.0), 2).unwrap();
        // slice order: (0,0), (1,-1), (1,1), (2,0)
        let rewards = RewardField::from_values(spec.clone(), vec![0.1, 0.2, 0.3, 0.4], 0).unwrap();
        let sol = lpp_solve(&rewards);
        assert_relative_eq!(sol.value, 0.8, epsilon = 1e-15);
        assert_eq!(sol.path.sites(), &[(0, 0), (1, 1), (2, 0)]);
    }

    #[test]
    fn zero_field_prefers_upper_predecessors() {
        let spec = LatticeSpec::new(q(2.0, 1.0), 2).unwrap();
        let rewards = RewardField::from_values(spec.clone(), vec![0.0; spec.site_count()], 0).unwrap();
        let sol = lpp_solve(&rewards);
        assert_eq!(sol.value, 0.0);
        // hugs the upper boundary: up while |y| <= x binds, then down
        let expected: Vec<(i64, i64)> =
            vec![(0, 0), (1, 1), (2, 2), (3, 3), (4, 2)];
        assert_eq!(sol.path.sites(), expected.as_slice());
    }

    #[test]
    fn zero_alpha_gives_zero_rewards() {
        let domain = q(1.0, 0.0);
        let field = AlphaField::preset("affine", &[0.0, 1.0, 0.0], domain).unwrap();
        let spec = LatticeSpec::new(domain, 10).unwrap();
        let rewards = sample_rewards(&spec, &field, 3).unwrap();
        assert_eq!(rewards.get(0, 0), Some(0.0));
        assert!(rewards.get(5, 1).unwrap() > 0.0);
    }

    #[test]
    fn sampling_is_deterministic() {
        let domain = q(1.0, 0.0);
        let spec = LatticeSpec::new(domain, 40).unwrap();
        let a = sample_rewards(&spec, &unit_field(domain), 11).unwrap();
        let b = sample_rewards(&spec, &unit_field(domain), 11).unwrap();
        let c = sample_rewards(&spec, &unit_field(domain), 12).unwrap();
        assert_eq!(a.rewards(), b.rewards());
        assert_ne!(a.rewards(), c.rewards());
    }

    #[test]
    fn rewards_have_mean_alpha_over_n() {
        let domain = q(1.0, 0.0);
        let spec = LatticeSpec::new(domain, 100).unwrap();
        for seed in 0..5 {
            let r = sample_rewards(&spec, &unit_field(domain), seed).unwrap();
            let mean = r.rewards().iter().sum::<f64>() / r.rewards().len() as f64;
            assert!((0.009..=0.011).contains(&mean), "seed {seed}: {mean}");
        }
    }

    #[test]
    fn out_of_cover_field_rejected() {
        let spec = LatticeSpec::new(q(2.0, 0.0), 2).unwrap();
        assert!(sample_rewards(&spec, &unit_field(q(1.0, 0.0)), 0).is_err());
    }

    #[test]
    fn binary_dump_round_trip() {
        let domain = q(1.0, 0.5);
        let spec = LatticeSpec::new(domain, 8).unwrap();
        let r = sample_rewards(&spec, &unit_field(domain), 99).unwrap();
        let mut buf = Vec::new();
        r.write_binary(&mut buf).unwrap();
        assert_eq!(buf.len(), 32 + 8 * spec.site_count());
        assert_eq!(&buf[..8], &8u64.to_le_bytes());
        let back = RewardField::read_binary(buf.as_slice()).unwrap();
        assert_eq!(back, r);
        assert!(RewardField::read_binary(&buf[..40]).is_err());
    }

    #[test]
    fn alternating_path_is_one_step_from_the_axis() {
        let domain = q(1.0, 0.0);
        let spec = LatticeSpec::new(domain, 10).unwrap();
        let sites = (0..=10).map(|i| (i, i % 2)).collect();
        let path = DirectedPath::new(&spec, sites).unwrap();
        let line = LipschitzPath::straight_line(domain, 7).unwrap();
        assert_relative_eq!(path_sup_distance(&path, &line).unwrap(), 0.1, epsilon = 1e-15);
        assert_relative_eq!(
            path_sup_distance(&path.reflect(), &line.reflect()).unwrap(),
            0.1,
            epsilon = 1e-15
        );
    }

    #[test]
    fn lattice_path_as_curve_has_zero_distance() {
        let domain = q(1.0, 0.2);
        let spec = LatticeSpec::new(domain, 10).unwrap();
        let sites: Vec<(i64, i64)> =
            vec![(0, 0), (1, 1), (2, 2), (3, 1), (4, 2), (5, 1), (6, 2), (7, 3), (8, 2), (9, 3), (10, 2)];
        let path = DirectedPath::new(&spec, sites.clone()).unwrap();
        let curve = LipschitzPath::uniform(domain, sites.iter().map(|s| s.1 as f64 / 10.0).collect()).unwrap();
        assert!(path_sup_distance(&path, &curve).unwrap() < 1e-15);
        let other = LipschitzPath::straight_line(q(2.0, 0.2), 4).unwrap();
        assert!(path_sup_distance(&path, &other).is_err());
    }

    #[test]
    fn invalid_paths_rejected() {
        let spec = LatticeSpec::new(q(1.0, 0.0), 4).unwrap();
        assert!(DirectedPath::new(&spec, vec![(0, 0), (1, 1), (2, 2), (3, 1), (4, 0)]).is_ok());
        assert!(DirectedPath::new(&spec, vec![(0, 0), (1, 1), (2, 2), (3, 3), (4, 2)]).is_err());
        assert!(DirectedPath::new(&spec, vec![(0, 0), (1, 1), (2, 0), (3, 1)]).is_err());
        assert!(DirectedPath::new(&spec, vec![(0, 0), (2, 0), (4, 0)]).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn path_resums_to_value(seed in any::<u64>(), n in 1u32..30) {
            let domain = q(1.0, 0.0);
            let spec = LatticeSpec::new(domain, 2 * n).unwrap();
            let field = AlphaField::preset("bumps", &[1.0, 2.0, 10.0, 0.2], domain).unwrap();
            let r = sample_rewards(&spec, &field, seed).unwrap();
            let sol = lpp_solve(&r);
            let check = DirectedPath::new(&spec, sol.path.sites().to_vec()).unwrap();
            let sum = check.reward_sum(&r).unwrap();
            prop_assert!((sum - sol.value).abs() <= 1e-12 * sol.value.abs().max(1e-300));
        }

        #[test]
        fn value_is_monotone_in_each_reward(seed in any::<u64>(), pick in any::<prop::sample::Index>(), bump in 0.0f64..0.5) {
            let domain = q(1.0, 0.2);
            let spec = LatticeSpec::new(domain, 20).unwrap();
            let r = sample_rewards(&spec, &unit_field(domain), seed).unwrap();
            let before = lpp_solve(&r).value;
            let mut raised = r.rewards().to_vec();
            let k = pick.index(raised.len());
            raised[k] += bump;
            let after = lpp_solve(&RewardField::from_values(spec, raised, seed).unwrap()).value;
            prop_assert!(after >= before);
        }

        #[test]
        fn larger_alpha_dominates_pathwise(seed in any::<u64>(), extra in 0.0f64..2.0) {
            let domain = q(1.0, 0.0);
            let spec = LatticeSpec::new(domain, 30).unwrap();
            let small = AlphaField::preset("quadratic", &[2.0, -1.0], domain).unwrap();
            let large = AlphaField::preset("quadratic", &[2.0 + extra, -1.0], domain).unwrap();
            let g_small = lpp_solve(&sample_rewards(&spec, &small, seed).unwrap()).value;
            let g_large = lpp_solve(&sample_rewards(&spec, &large, seed).unwrap()).value;
            prop_assert!(g_large >= g_small);
        }
    }
}
