//! The inhomogeneity field `α` on the rectangle.
//!
//! A field is either a closed-form profile with exact derivatives or a
//! rectangular sample array with bilinear interpolation and central finite
//! differences. Queries are restricted to the field's rectangle.

use std::fmt;
use std::io::{BufRead, Write};
use std::path::Path;

use serde::Serialize;

use crate::domain::{geometric_eps, RectangleDomain};
use crate::error::{Error, Result};

/// Resolution of the sweep used to bound analytic profiles over `Q`.
const BOUND_SAMPLES: usize = 257;

/// `coef * x^px * y^py`
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Monomial {
    pub px: u32,
    pub py: u32,
    pub coef: f64,
}

/// `amplitude * exp(-sharpness * (y - center)^2)`
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Bump {
    pub amplitude: f64,
    pub sharpness: f64,
    pub center: f64,
}

/// Closed-form profiles with exact first and second derivatives.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Profile {
    Polynomial(Vec<Monomial>),
    /// `scale * exp(rate * y)`
    Exponential { scale: f64, rate: f64 },
    /// `base + Σ bumps`, depends on `y` only.
    Bumps { base: f64, bumps: Vec<Bump> },
}

fn powi(v: f64, p: u32) -> f64 {
    v.powi(p as i32)
}

impl Profile {
    pub fn constant(c: f64) -> Self {
        Profile::Polynomial(vec![Monomial { px: 0, py: 0, coef: c }])
    }

    /// `c0 + c2 * y^2`
    pub fn quadratic_y(c0: f64, c2: f64) -> Self {
        Profile::Polynomial(vec![
            Monomial { px: 0, py: 0, coef: c0 },
            Monomial { px: 0, py: 2, coef: c2 },
        ])
    }

    pub fn value(&self, x: f64, y: f64) -> f64 {
        match self {
            Profile::Polynomial(terms) => {
                terms.iter().map(|t| t.coef * powi(x, t.px) * powi(y, t.py)).sum()
            }
            Profile::Exponential { scale, rate } => scale * (rate * y).exp(),
            Profile::Bumps { base, bumps } => {
                base + bumps
                    .iter()
                    .map(|b| b.amplitude * (-b.sharpness * (y - b.center).powi(2)).exp())
                    .sum::<f64>()
            }
        }
    }

    pub fn d_x(&self, x: f64, y: f64) -> f64 {
        match self {
            Profile::Polynomial(terms) => terms
                .iter()
                .filter(|t| t.px > 0)
                .map(|t| t.coef * t.px as f64 * powi(x, t.px - 1) * powi(y, t.py))
                .sum(),
            _ => 0.0,
        }
    }

    pub fn d_y(&self, x: f64, y: f64) -> f64 {
        match self {
            Profile::Polynomial(terms) => terms
                .iter()
                .filter(|t| t.py > 0)
                .map(|t| t.coef * t.py as f64 * powi(x, t.px) * powi(y, t.py - 1))
                .sum(),
            Profile::Exponential { scale, rate } => scale * rate * (rate * y).exp(),
            Profile::Bumps { bumps, .. } => bumps
                .iter()
                .map(|b| {
                    let d = y - b.center;
                    -2.0 * b.sharpness * d * b.amplitude * (-b.sharpness * d * d).exp()
                })
                .sum(),
        }
    }

    pub fn d_yy(&self, x: f64, y: f64) -> f64 {
        match self {
            Profile::Polynomial(terms) => terms
                .iter()
                .filter(|t| t.py > 1)
                .map(|t| {
                    t.coef * (t.py * (t.py - 1)) as f64 * powi(x, t.px) * powi(y, t.py - 2)
                })
                .sum(),
            Profile::Exponential { scale, rate } => scale * rate * rate * (rate * y).exp(),
            Profile::Bumps { bumps, .. } => bumps
                .iter()
                .map(|b| {
                    let d = y - b.center;
                    let s = b.sharpness;
                    b.amplitude * (4.0 * s * s * d * d - 2.0 * s) * (-s * d * d).exp()
                })
                .sum(),
        }
    }

    pub fn depends_on_x(&self) -> bool {
        match self {
            Profile::Polynomial(terms) => terms.iter().any(|t| t.px > 0 && t.coef != 0.0),
            _ => false,
        }
    }

    /// Builds a profile from a preset name and a flat parameter list.
    ///
    /// | name          | parameters                                  |
    /// |---------------|---------------------------------------------|
    /// | `constant`    | `c`                                         |
    /// | `affine`      | `c0 cx cy` (α = c0 + cx·x + cy·y)           |
    /// | `quadratic`   | `c0 c2` (α = c0 + c2·y²)                    |
    /// | `polynomial`  | triples `px py coef`                        |
    /// | `exponential` | `scale rate` (α = scale·e^(rate·y))         |
    /// | `bumps`       | `base` then triples `amplitude sharpness center` |
    pub fn preset(name: &str, params: &[f64]) -> Result<Self> {
        let want = |n: usize| -> Result<()> {
            if params.len() == n {
                Ok(())
            } else {
                Err(Error::InvalidField(format!(
                    "preset `{name}` takes {n} parameters, got {}",
                    params.len()
                )))
            }
        };
        match name {
            "constant" => {
                want(1)?;
                Ok(Profile::constant(params[0]))
            }
            "affine" => {
                want(3)?;
                Ok(Profile::Polynomial(vec![
                    Monomial { px: 0, py: 0, coef: params[0] },
                    Monomial { px: 1, py: 0, coef: params[1] },
                    Monomial { px: 0, py: 1, coef: params[2] },
                ]))
            }
            "quadratic" => {
                want(2)?;
                Ok(Profile::quadratic_y(params[0], params[1]))
            }
            "polynomial" => {
                if params.is_empty() || params.len() % 3 != 0 {
                    return Err(Error::InvalidField(
                        "preset `polynomial` takes triples `px py coef`".into(),
                    ));
                }
                let mut terms = Vec::with_capacity(params.len() / 3);
                for t in params.chunks(3) {
                    if t[0] < 0.0 || t[1] < 0.0 || t[0].fract() != 0.0 || t[1].fract() != 0.0 {
                        return Err(Error::InvalidField(format!(
                            "exponents must be non-negative integers, got {} {}",
                            t[0], t[1]
                        )));
                    }
                    terms.push(Monomial { px: t[0] as u32, py: t[1] as u32, coef: t[2] });
                }
                Ok(Profile::Polynomial(terms))
            }
            "exponential" => {
                want(2)?;
                Ok(Profile::Exponential { scale: params[0], rate: params[1] })
            }
            "bumps" => {
                if params.is_empty() || (params.len() - 1) % 3 != 0 {
                    return Err(Error::InvalidField(
                        "preset `bumps` takes `base` followed by triples".into(),
                    ));
                }
                let bumps = params[1..]
                    .chunks(3)
                    .map(|t| Bump { amplitude: t[0], sharpness: t[1], center: t[2] })
                    .collect();
                Ok(Profile::Bumps { base: params[0], bumps })
            }
            other => Err(Error::InvalidField(format!("unknown preset `{other}`"))),
        }
    }
}

/// Samples on a uniform mesh over the bounding box of `Q`, bilinearly interpolated.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledGrid {
    nx: usize,
    ny: usize,
    y0: f64,
    hx: f64,
    hy: f64,
    /// Row-major, row 0 is the lowest y level.
    samples: Vec<f64>,
}

impl SampledGrid {
    fn interpolate(&self, x: f64, y: f64) -> f64 {
        let fx = (x / self.hx).clamp(0.0, (self.nx - 1) as f64);
        let fy = ((y - self.y0) / self.hy).clamp(0.0, (self.ny - 1) as f64);
        let i = (fx.floor() as usize).min(self.nx - 2);
        let j = (fy.floor() as usize).min(self.ny - 2);
        let (tx, ty) = (fx - i as f64, fy - j as f64);
        let at = |ii: usize, jj: usize| self.samples[jj * self.nx + ii];
        (1.0 - ty) * ((1.0 - tx) * at(i, j) + tx * at(i + 1, j))
            + ty * ((1.0 - tx) * at(i, j + 1) + tx * at(i + 1, j + 1))
    }

    pub fn mesh(&self) -> (f64, f64) {
        (self.hx, self.hy)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum FieldKind {
    Analytic(Profile),
    Gridded(SampledGrid),
}

/// `α` restricted to a rectangle, with declared bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct AlphaField {
    kind: FieldKind,
    domain: RectangleDomain,
    alpha_min: f64,
    alpha_max: f64,
}

impl AlphaField {
    pub fn analytic(profile: Profile, domain: RectangleDomain) -> Result<Self> {
        let (lo, hi) = sweep_bounds(&domain, |x, y| profile.value(x, y));
        if !(lo.is_finite() && hi.is_finite()) {
            return Err(Error::InvalidField("profile is not finite on the rectangle".into()));
        }
        if lo < 0.0 {
            return Err(Error::InvalidField(format!("profile takes negative value {lo}")));
        }
        Ok(Self { kind: FieldKind::Analytic(profile), domain, alpha_min: lo, alpha_max: hi })
    }

    pub fn constant(c: f64, domain: RectangleDomain) -> Result<Self> {
        Self::analytic(Profile::constant(c), domain)
    }

    pub fn preset(name: &str, params: &[f64], domain: RectangleDomain) -> Result<Self> {
        Self::analytic(Profile::preset(name, params)?, domain)
    }

    /// `samples` has `ny` rows of `nx` values, lowest y level first, covering
    /// `[0, l] x [(b - l)/2, (b + l)/2]`.
    pub fn gridded(
        domain: RectangleDomain,
        nx: usize,
        ny: usize,
        samples: Vec<f64>,
    ) -> Result<Self> {
        if nx < 2 || ny < 2 {
            return Err(Error::InvalidField(format!("grid needs at least 2x2 samples, got {nx}x{ny}")));
        }
        if samples.len() != nx * ny {
            return Err(Error::InvalidField(format!(
                "expected {} samples, got {}",
                nx * ny,
                samples.len()
            )));
        }
        if let Some((k, v)) =
            samples.iter().enumerate().find(|(_, v)| !(v.is_finite() && **v >= 0.0))
        {
            return Err(Error::InvalidField(format!(
                "sample {v} at row {} column {} is negative or not finite",
                k / nx,
                k % nx
            )));
        }
        let (y0, y1) = domain.y_bounds();
        let grid = SampledGrid {
            nx,
            ny,
            y0,
            hx: domain.l() / (nx - 1) as f64,
            hy: (y1 - y0) / (ny - 1) as f64,
            samples,
        };
        let lo = grid.samples.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = grid.samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Ok(Self { kind: FieldKind::Gridded(grid), domain, alpha_min: lo, alpha_max: hi })
    }

    /// Samples this field on an `nx x ny` mesh of the bounding box of `Q`.
    /// Mesh points outside `Q` take the value at their projection onto `Q`.
    pub fn resample(&self, nx: usize, ny: usize) -> Result<Self> {
        let (y0, y1) = self.domain.y_bounds();
        let l = self.domain.l();
        let mut samples = Vec::with_capacity(nx * ny);
        for j in 0..ny {
            let y = y0 + (y1 - y0) * j as f64 / (ny - 1) as f64;
            for i in 0..nx {
                let x = l * i as f64 / (nx - 1) as f64;
                let (px, py) = self.domain.project(x, y);
                samples.push(self.raw(px, py));
            }
        }
        Self::gridded(self.domain, nx, ny, samples)
    }

    /// Reads the plain-text matrix format: a header line `nx ny l b` followed
    /// by `ny` rows of `nx` whitespace-separated samples, bottom row first.
    pub fn read_grid<R: BufRead>(reader: R) -> Result<Self> {
        let mut lines = reader.lines().filter(|l| match l {
            Ok(s) => !s.trim().is_empty(),
            Err(_) => true,
        });
        let header = lines
            .next()
            .ok_or_else(|| Error::InvalidField("empty grid file".into()))??;
        let head: Vec<&str> = header.split_whitespace().collect();
        if head.len() != 4 {
            return Err(Error::InvalidField(format!("bad header `{header}`")));
        }
        let parse_usize = |s: &str| {
            s.parse::<usize>()
                .map_err(|e| Error::InvalidField(format!("bad header value `{s}`: {e}")))
        };
        let parse_f64 = |s: &str| {
            s.parse::<f64>()
                .map_err(|e| Error::InvalidField(format!("bad number `{s}`: {e}")))
        };
        let nx = parse_usize(head[0])?;
        let ny = parse_usize(head[1])?;
        let domain = RectangleDomain::new(parse_f64(head[2])?, parse_f64(head[3])?)?;
        let mut samples = Vec::with_capacity(nx * ny);
        for row in 0..ny {
            let line = lines
                .next()
                .ok_or_else(|| Error::InvalidField(format!("missing row {row}")))??;
            let before = samples.len();
            for tok in line.split_whitespace() {
                samples.push(parse_f64(tok)?);
            }
            if samples.len() - before != nx {
                return Err(Error::InvalidField(format!(
                    "row {row} has {} values, expected {nx}",
                    samples.len() - before
                )));
            }
        }
        Self::gridded(domain, nx, ny, samples)
    }

    pub fn from_grid_file(path: impl AsRef<Path>) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::read_grid(std::io::BufReader::new(file))
    }

    pub fn write_grid<W: Write>(&self, mut out: W) -> Result<()> {
        let FieldKind::Gridded(g) = &self.kind else {
            return Err(Error::InvalidField("only gridded fields can be written".into()));
        };
        writeln!(out, "{} {} {} {}", g.nx, g.ny, self.domain.l(), self.domain.b())?;
        for row in g.samples.chunks(g.nx) {
            let line: Vec<String> = row.iter().map(|v| format!("{v:e}")).collect();
            writeln!(out, "{}", line.join(" "))?;
        }
        Ok(())
    }

    pub fn kind(&self) -> &FieldKind {
        &self.kind
    }

    pub fn domain(&self) -> &RectangleDomain {
        &self.domain
    }

    /// Declared lower bound (sampled minimum for analytic profiles, sample
    /// minimum for gridded fields).
    pub fn alpha_min(&self) -> f64 {
        self.alpha_min
    }

    /// `sup_Q |α|`.
    pub fn alpha_max(&self) -> f64 {
        self.alpha_max
    }

    /// Fields entering the Euler-Lagrange equation must be bounded away from zero.
    pub fn require_positive(&self) -> Result<()> {
        if self.alpha_min > 0.0 {
            Ok(())
        } else {
            Err(Error::InvalidField(format!(
                "alpha_min = {} must be positive for the Euler-Lagrange equation",
                self.alpha_min
            )))
        }
    }

    pub fn depends_on_x(&self) -> bool {
        match &self.kind {
            FieldKind::Analytic(p) => p.depends_on_x(),
            FieldKind::Gridded(_) => true,
        }
    }

    fn check(&self, x: f64, y: f64) -> Result<()> {
        if self.domain.contains_within(x, y, geometric_eps(self.domain.l())) {
            Ok(())
        } else {
            Err(Error::OutOfDomain { x, y })
        }
    }

    /// Value without the membership check. Analytic profiles are evaluated
    /// in closed form, gridded fields are clamped to their bounding box.
    pub(crate) fn raw(&self, x: f64, y: f64) -> f64 {
        match &self.kind {
            FieldKind::Analytic(p) => p.value(x, y),
            FieldKind::Gridded(g) => g.interpolate(x, y),
        }
    }

    pub fn eval(&self, x: f64, y: f64) -> Result<f64> {
        self.check(x, y)?;
        Ok(self.raw(x, y))
    }

    /// `(α_x, α_y)`; exact for analytic profiles, central differences with
    /// step `max(h_x, h_y)` for gridded fields.
    pub fn grad(&self, x: f64, y: f64) -> Result<(f64, f64)> {
        self.check(x, y)?;
        Ok(self.raw_grad(x, y))
    }

    pub fn alpha_yy(&self, x: f64, y: f64) -> Result<f64> {
        self.check(x, y)?;
        Ok(self.raw_yy(x, y))
    }

    pub(crate) fn raw_grad(&self, x: f64, y: f64) -> (f64, f64) {
        match &self.kind {
            FieldKind::Analytic(p) => (p.d_x(x, y), p.d_y(x, y)),
            FieldKind::Gridded(g) => self.fd_gradient(x, y, g.hx.max(g.hy)),
        }
    }

    pub(crate) fn raw_yy(&self, x: f64, y: f64) -> f64 {
        match &self.kind {
            FieldKind::Analytic(p) => p.d_yy(x, y),
            FieldKind::Gridded(g) => self.fd_yy(x, y, g.hx.max(g.hy)),
        }
    }

    /// Central-difference gradient of the underlying interpolant or profile.
    pub fn fd_gradient(&self, x: f64, y: f64, step: f64) -> (f64, f64) {
        let dx = (self.raw(x + step, y) - self.raw(x - step, y)) / (2.0 * step);
        let dy = (self.raw(x, y + step) - self.raw(x, y - step)) / (2.0 * step);
        (dx, dy)
    }

    pub fn fd_yy(&self, x: f64, y: f64, step: f64) -> f64 {
        (self.raw(x, y + step) - 2.0 * self.raw(x, y) + self.raw(x, y - step)) / (step * step)
    }

    /// `α(y)` for fields without x-dependence; used by the exclusion process,
    /// whose sites are not restricted to `Q`.
    pub fn eval_y(&self, y: f64) -> Result<f64> {
        match &self.kind {
            FieldKind::Analytic(p) if !p.depends_on_x() => Ok(p.value(0.0, y)),
            _ => Err(Error::InvalidField(
                "field depends on x; a y-only profile is required".into(),
            )),
        }
    }
}

impl fmt::Display for AlphaField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            FieldKind::Analytic(p) => write!(f, "analytic {p:?}")?,
            FieldKind::Gridded(g) => write!(f, "gridded {}x{}", g.nx, g.ny)?,
        }
        write!(f, " on Q(l={}, b={})", self.domain.l(), self.domain.b())
    }
}

fn sweep_bounds(domain: &RectangleDomain, f: impl Fn(f64, f64) -> f64) -> (f64, f64) {
    let n = BOUND_SAMPLES;
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..n {
        let x = domain.l() * i as f64 / (n - 1) as f64;
        let (y0, y1) = domain.y_range(x);
        for j in 0..n {
            let y = y0 + (y1 - y0) * j as f64 / (n - 1) as f64;
            let v = f(x, y);
            if v.is_nan() {
                return (f64::NAN, f64::NAN);
            }
            lo = lo.min(v);
            hi = hi.max(v.abs());
        }
    }
    (lo, hi)
}
