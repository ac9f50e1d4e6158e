//! Flat `key = value` experiment configuration with section headers.
//!
//! ```ini
//! [experiment]
//! name = homogeneous
//!
//! [field]
//! preset = constant
//! params = 1.0
//! # grid_file = alpha.grid
//!
//! [domain]
//! l = 1.0
//! b = 0.0
//!
//! [lattice]
//! n_list = 50, 100, 200, 400
//! seed_count = 100
//! seed_base = 0
//! # seeds = 3, 5, 8
//! auto_adjust_n = false
//!
//! [solver]
//! n_x = 200
//! n_y = 3200
//! h = 0.0005
//! m_list = 2, 4, 8, 16, 64
//! scan_points = 512
//! tol = 1e-10
//!
//! [tasep]
//! k = 200
//! l_values = 0.5, 0.75, 1.0
//!
//! [output]
//! dir = out/homogeneous
//!
//! [tolerance]
//! delta = 0.3
//! ```

use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use ini::{Ini, Properties};

use crate::alpha::AlphaField;
use crate::domain::RectangleDomain;
use crate::error::{Error, Result};
use crate::euler_lagrange::{BvpOptions, DEFAULT_SCAN_POINTS, DEFAULT_STEPS, DEFAULT_TOL};
use crate::lattice::LatticeSpec;
use crate::variational::DiscretizedPathSpace;

const KNOWN: &[(&str, &[&str])] = &[
    ("experiment", &["name"]),
    ("field", &["preset", "params", "grid_file"]),
    ("domain", &["l", "b"]),
    ("lattice", &["n_list", "seeds", "seed_count", "seed_base", "auto_adjust_n"]),
    ("solver", &["n_x", "n_y", "h", "m_list", "scan_points", "tol", "density"]),
    ("tasep", &["k", "l_values", "n"]),
    ("output", &["dir"]),
    ("tolerance", &["delta"]),
];

#[derive(Debug, Clone, PartialEq)]
pub enum FieldSpec {
    Preset { name: String, params: Vec<f64> },
    GridFile(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub name: String,
    pub field: FieldSpec,
    pub l: f64,
    pub b: f64,
    pub n_list: Vec<u32>,
    pub seeds: Vec<u64>,
    pub auto_adjust_n: bool,
    pub n_x: usize,
    pub n_y: usize,
    /// RK4 step; `None` means `l / 2000`.
    pub h: Option<f64>,
    pub m_list: Vec<usize>,
    pub scan_points: usize,
    pub tol: f64,
    pub density: usize,
    /// TASEP particle index; `None` means `⌊l N / 2⌋`.
    pub tasep_k: Option<usize>,
    pub tasep_n: Option<usize>,
    pub l_values: Vec<f64>,
    pub out_dir: PathBuf,
    /// Exceedance threshold; `None` means `0.1 𝒢*`.
    pub delta: Option<f64>,
    /// The text the configuration was parsed from, echoed into manifests.
    pub source: String,
}

fn parse_list<T: FromStr>(key: &str, text: &str) -> Result<Vec<T>> {
    text.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(|s| s.parse().map_err(|_| Error::Config(format!("{key}: cannot parse `{s}`"))))
        .collect()
}

fn parse_one<T: FromStr>(key: &str, text: &str) -> Result<T> {
    text.trim().parse().map_err(|_| Error::Config(format!("{key}: cannot parse `{text}`")))
}

struct Reader<'a> {
    ini: &'a Ini,
}

impl<'a> Reader<'a> {
    fn get(&self, section: &str, key: &str) -> Option<&'a str> {
        self.ini.section(Some(section)).and_then(|p: &Properties| p.get(key))
    }

    fn one<T: FromStr>(&self, section: &str, key: &str) -> Result<Option<T>> {
        self.get(section, key).map(|v| parse_one(&format!("{section}.{key}"), v)).transpose()
    }

    fn list<T: FromStr>(&self, section: &str, key: &str) -> Result<Option<Vec<T>>> {
        self.get(section, key).map(|v| parse_list(&format!("{section}.{key}"), v)).transpose()
    }
}

impl ExperimentConfig {
    /// Parses configuration text. Relative grid paths resolve against `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let ini = Ini::load_from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        for (section, props) in ini.iter() {
            let Some(section) = section else {
                if props.iter().next().is_some() {
                    return Err(Error::Config("keys outside of any section".into()));
                }
                continue;
            };
            let Some((_, keys)) = KNOWN.iter().find(|(s, _)| *s == section) else {
                return Err(Error::Config(format!("unknown section [{section}]")));
            };
            for (key, _) in props.iter() {
                if !keys.contains(&key) {
                    return Err(Error::Config(format!("unknown key {section}.{key}")));
                }
            }
        }
        let r = Reader { ini: &ini };

        let field = match (r.get("field", "preset"), r.get("field", "grid_file")) {
            (Some(_), Some(_)) => {
                return Err(Error::Config("field: give either preset or grid_file".into()))
            }
            (Some(name), None) => FieldSpec::Preset {
                name: name.trim().to_string(),
                params: r.list("field", "params")?.unwrap_or_default(),
            },
            (None, Some(path)) => {
                let path = base.join(path.trim());
                if !path.is_file() {
                    return Err(Error::Config(format!("grid file {} does not exist", path.display())));
                }
                FieldSpec::GridFile(path)
            }
            (None, None) => return Err(Error::Config("field: preset or grid_file required".into())),
        };

        let seeds = match r.list::<u64>("lattice", "seeds")? {
            Some(s) => {
                if r.get("lattice", "seed_count").is_some() {
                    return Err(Error::Config("lattice: give either seeds or seed_count".into()));
                }
                s
            }
            None => {
                let count: u64 = r.one("lattice", "seed_count")?.unwrap_or(0);
                let base: u64 = r.one("lattice", "seed_base")?.unwrap_or(0);
                (base..base + count).collect()
            }
        };

        let l: f64 = r.one("domain", "l")?.ok_or_else(|| Error::Config("domain.l is required".into()))?;
        let cfg = Self {
            name: r.get("experiment", "name").unwrap_or("experiment").trim().to_string(),
            field,
            l,
            b: r.one("domain", "b")?.unwrap_or(0.0),
            n_list: r.list("lattice", "n_list")?.unwrap_or_default(),
            seeds,
            auto_adjust_n: r.one("lattice", "auto_adjust_n")?.unwrap_or(false),
            n_x: r.one("solver", "n_x")?.unwrap_or(200),
            n_y: r.one("solver", "n_y")?.unwrap_or(3200),
            h: r.one("solver", "h")?,
            m_list: r.list("solver", "m_list")?.unwrap_or_else(|| vec![2, 4, 8, 16, 64]),
            scan_points: r.one("solver", "scan_points")?.unwrap_or(DEFAULT_SCAN_POINTS),
            tol: r.one("solver", "tol")?.unwrap_or(DEFAULT_TOL),
            density: r.one("solver", "density")?.unwrap_or(crate::concavity::DEFAULT_DENSITY),
            tasep_k: r.one("tasep", "k")?,
            tasep_n: r.one("tasep", "n")?,
            l_values: r.list("tasep", "l_values")?.unwrap_or_default(),
            out_dir: PathBuf::from(r.get("output", "dir").unwrap_or("out").trim()),
            delta: r.one("tolerance", "delta")?,
            source: text.to_string(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }

    fn validate(&self) -> Result<()> {
        let domain = self.domain()?;
        if self.h.is_some_and(|h| !(h > 0.0)) {
            return Err(Error::Config("solver.h must be positive".into()));
        }
        if self.delta.is_some_and(|d| !(d > 0.0)) {
            return Err(Error::Config("tolerance.delta must be positive".into()));
        }
        if self.m_list.contains(&0) {
            return Err(Error::Config("solver.m_list entries must be positive".into()));
        }
        DiscretizedPathSpace::new(domain, self.n_x, self.n_y)?;
        Ok(())
    }

    pub fn domain(&self) -> Result<RectangleDomain> {
        RectangleDomain::new(self.l, self.b)
    }

    pub fn field(&self) -> Result<AlphaField> {
        match &self.field {
            FieldSpec::Preset { name, params } => AlphaField::preset(name, params, self.domain()?),
            FieldSpec::GridFile(path) => {
                let f = AlphaField::from_grid_file(path)?;
                if !f.domain().covers(&self.domain()?) {
                    return Err(Error::Config(format!(
                        "grid file {} does not cover Q(l = {}, b = {})",
                        path.display(),
                        self.l,
                        self.b
                    )));
                }
                Ok(f)
            }
        }
    }

    /// Lattices for `n_list`, adjusted upwards when `auto_adjust_n` is set.
    pub fn lattices(&self) -> Result<Vec<LatticeSpec>> {
        let domain = self.domain()?;
        self.n_list
            .iter()
            .map(|&n| if self.auto_adjust_n { LatticeSpec::auto_adjust(domain, n) } else { LatticeSpec::new(domain, n) })
            .collect()
    }

    pub fn space(&self) -> Result<DiscretizedPathSpace> {
        DiscretizedPathSpace::new(self.domain()?, self.n_x, self.n_y)
    }

    pub fn bvp_options(&self) -> BvpOptions {
        let opts = BvpOptions::new(self.tol, self.scan_points);
        opts.with_step(self.h.unwrap_or(self.l / DEFAULT_STEPS as f64))
    }

    /// Bytes of every input file, for the manifest hash.
    pub(crate) fn input_files(&self) -> Result<Vec<(String, Vec<u8>)>> {
        match &self.field {
            FieldSpec::GridFile(path) => Ok(vec![(path.display().to_string(), fs::read(path)?)]),
            FieldSpec::Preset { .. } => Ok(Vec::new()),
        }
    }
}
