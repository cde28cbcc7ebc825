//! Run configuration: a flat `key = value` file with dotted keys.
//!
//! ```text
//! # comment
//! N = 1
//! alpha = 1.5
//! epsilon = 0.2, 0.1, 0.05
//! grid.L = 50.26548245743669
//! grid.n = 512
//! [time]          # optional section header, prefixes following keys
//! T = 0.5
//! dt = 1e-3
//! ```
//!
//! Every key may be given at most once per source. Command-line overrides are
//! applied on top of the file and reported as line 0.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::equilibrium::{kernel_by_name, EquilibriumSpec, TurningKernel};
use crate::error::{Error, Result};
use crate::grid::{MacroField, TorusGrid};
use crate::vector::Vec2;

/// Keys understood by [`RunConfig`].
pub const KEYS: &[&str] = &[
    "N",
    "alpha",
    "epsilon",
    "grid.L",
    "grid.n",
    "time.T",
    "time.dt",
    "kernel.name",
    "c",
    "init.name",
    "output.path",
    "seed",
    "velocity.core",
    "velocity.tail",
    "particles.n",
    "snapshots",
];

/// Line number used for values that came from the command line.
pub const COMMAND_LINE: usize = 0;

#[derive(Debug, Clone, PartialEq)]
struct Entry {
    value: String,
    line: usize,
}

/// Parsed but uninterpreted key/value pairs with their source lines.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RawConfig {
    entries: BTreeMap<String, Entry>,
}

fn config_error(line: usize, key: &str, message: impl Into<String>) -> Error {
    Error::Config { line, key: key.to_string(), message: message.into() }
}

impl RawConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut raw = RawConfig::default();
        let mut section = String::new();
        for (idx, full) in text.lines().enumerate() {
            let line = idx + 1;
            let content = full.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            if let Some(rest) = content.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| config_error(line, content, "unterminated section header"))?
                    .trim();
                if name.is_empty() || name.contains(char::is_whitespace) {
                    return Err(config_error(line, content, "invalid section name"));
                }
                section = format!("{name}.");
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| config_error(line, content, "expected `key = value`"))?;
            let key = format!("{section}{}", key.trim());
            let value = value.trim();
            if key.is_empty() || key.ends_with('.') || key.contains(char::is_whitespace) {
                return Err(config_error(line, &key, "invalid key"));
            }
            if value.is_empty() {
                return Err(config_error(line, &key, "missing value"));
            }
            if let Some(prev) = raw.entries.get(&key) {
                return Err(config_error(line, &key, format!("duplicate key, first set on line {}", prev.line)));
            }
            raw.entries.insert(key, Entry { value: value.to_string(), line });
        }
        Ok(raw)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// Applies a `key=value` override, replacing any file value.
    pub fn set_override(&mut self, assignment: &str) -> Result<()> {
        let (key, value) = assignment
            .split_once('=')
            .ok_or_else(|| config_error(COMMAND_LINE, assignment, "expected `key=value`"))?;
        self.set(key.trim(), value.trim())
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        if value.is_empty() {
            return Err(config_error(COMMAND_LINE, key, "missing value"));
        }
        self.entries.insert(key.to_string(), Entry { value: value.to_string(), line: COMMAND_LINE });
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|e| e.value.as_str())
    }

    pub fn line_of(&self, key: &str) -> Option<usize> {
        self.entries.get(key).map(|e| e.line)
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    /// Rejects keys outside `allowed`.
    pub fn check_keys(&self, allowed: &[&str]) -> Result<()> {
        match self.entries.iter().find(|(k, _)| !allowed.contains(&k.as_str())) {
            Some((k, e)) => Err(config_error(e.line, k, "unknown key")),
            None => Ok(()),
        }
    }

    fn parsed<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        match self.entries.get(key) {
            None => Ok(None),
            Some(e) => e
                .value
                .parse::<T>()
                .map(Some)
                .map_err(|err| config_error(e.line, key, format!("cannot parse `{}`: {err}", e.value))),
        }
    }

    fn list(&self, key: &str) -> Result<Option<Vec<f64>>> {
        let Some(e) = self.entries.get(key) else { return Ok(None) };
        e.value
            .split(',')
            .map(|s| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|err| config_error(e.line, key, format!("cannot parse `{}`: {err}", s.trim())))
            })
            .collect::<Result<Vec<f64>>>()
            .map(Some)
    }

    fn invalid(&self, key: &str, message: impl Into<String>) -> Error {
        config_error(self.line_of(key).unwrap_or(COMMAND_LINE), key, message)
    }
}

/// Initial density profiles selectable by `init.name`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum InitProfile {
    /// 1 + 0.5 cos(2πx₁/L)
    Cosine,
    /// ≡ 1
    Constant,
    /// periodic Gaussian bump of width L/16 on a unit background
    Bump,
}

impl InitProfile {
    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "cosine" => Some(InitProfile::Cosine),
            "constant" => Some(InitProfile::Constant),
            "bump" => Some(InitProfile::Bump),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            InitProfile::Cosine => "cosine",
            InitProfile::Constant => "constant",
            InitProfile::Bump => "bump",
        }
    }

    pub fn field(&self, grid: TorusGrid) -> MacroField {
        let l = grid.length();
        match self {
            InitProfile::Cosine => MacroField::from_fn(grid, 0.0, |x| 1.0 + 0.5 * (2.0 * PI * x[0] / l).cos()),
            InitProfile::Constant => MacroField::from_fn(grid, 0.0, |_| 1.0),
            InitProfile::Bump => {
                let width = l / 16.0;
                let dim = grid.dim();
                MacroField::from_fn(grid, 0.0, |x| {
                    let d2: f64 = x[..dim]
                        .iter()
                        .map(|&xi| {
                            let d = (xi - 0.5 * l).rem_euclid(l);
                            d.min(l - d).powi(2)
                        })
                        .sum();
                    1.0 + (-0.5 * d2 / (width * width)).exp()
                })
            }
        }
    }
}

/// A validated run configuration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub dim: usize,
    pub alpha: f64,
    /// One value for single runs, a strictly decreasing list for sweeps.
    pub epsilons: Vec<f64>,
    pub grid_length: f64,
    pub grid_n: usize,
    pub t_final: f64,
    pub dt: f64,
    pub kernel: String,
    pub c: Vec2,
    pub init: InitProfile,
    pub output: Option<PathBuf>,
    pub seed: Option<u64>,
    pub core_order: usize,
    pub tail_order: usize,
    pub particles: usize,
    pub snapshots: Vec<f64>,
}

impl Default for RunConfig {
    /// N = 1, α = 1.5, L = 16π, 512 points, cosine profile, T = 0.5,
    /// simple kernel with c = 1.
    fn default() -> Self {
        RunConfig {
            dim: 1,
            alpha: 1.5,
            epsilons: vec![0.2, 0.1, 0.05, 0.025],
            grid_length: 2.0 * PI * 8.0,
            grid_n: 512,
            t_final: 0.5,
            dt: 1e-3,
            kernel: "simple".into(),
            c: [1.0, 0.0],
            init: InitProfile::Cosine,
            output: None,
            seed: None,
            core_order: 16,
            tail_order: 64,
            particles: 100_000,
            snapshots: Vec::new(),
        }
    }
}

impl RunConfig {
    /// Defaults overridden by `raw`, validated key by key.
    pub fn from_raw(raw: &RawConfig) -> Result<Self> {
        raw.check_keys(KEYS)?;
        let mut cfg = RunConfig::default();
        if let Some(n) = raw.parsed::<usize>("N")? {
            if n != 1 && n != 2 {
                return Err(raw.invalid("N", format!("dimension must be 1 or 2, got {n}")));
            }
            cfg.dim = n;
        }
        if let Some(a) = raw.parsed::<f64>("alpha")? {
            if !(a > 1.0 && a < 2.0) {
                return Err(raw.invalid("alpha", format!("must lie in (1, 2), got {a}")));
            }
            cfg.alpha = a;
        }
        if let Some(eps) = raw.list("epsilon")? {
            if eps.iter().any(|e| !(*e > 0.0 && *e <= 1.0)) {
                return Err(raw.invalid("epsilon", "values must lie in (0, 1]"));
            }
            if eps.windows(2).any(|w| w[1] >= w[0]) {
                return Err(raw.invalid("epsilon", "list must be strictly decreasing"));
            }
            cfg.epsilons = eps;
        }
        if let Some(l) = raw.parsed::<f64>("grid.L")? {
            if !(l > 0.0 && l.is_finite()) {
                return Err(raw.invalid("grid.L", format!("must be positive, got {l}")));
            }
            cfg.grid_length = l;
        }
        if let Some(n) = raw.parsed::<usize>("grid.n")? {
            if n < 2 {
                return Err(raw.invalid("grid.n", format!("need at least 2 points, got {n}")));
            }
            cfg.grid_n = n;
        }
        if let Some(t) = raw.parsed::<f64>("time.T")? {
            if !(t > 0.0 && t.is_finite()) {
                return Err(raw.invalid("time.T", format!("must be positive, got {t}")));
            }
            cfg.t_final = t;
        }
        if let Some(dt) = raw.parsed::<f64>("time.dt")? {
            if !(dt > 0.0) {
                return Err(raw.invalid("time.dt", format!("must be positive, got {dt}")));
            }
            cfg.dt = dt;
        }
        if cfg.dt > cfg.t_final {
            return Err(raw.invalid("time.dt", format!("exceeds time.T = {}", cfg.t_final)));
        }
        if let Some(name) = raw.get("kernel.name") {
            kernel_by_name(name).map_err(|_| raw.invalid("kernel.name", format!("unknown kernel `{name}`")))?;
            cfg.kernel = name.to_string();
        }
        if let Some(c) = raw.list("c")? {
            cfg.c = match c.as_slice() {
                [x] => [*x, 0.0],
                [x, y] if cfg.dim == 2 => [*x, *y],
                [_, _] => return Err(raw.invalid("c", "two components need N = 2")),
                _ => return Err(raw.invalid("c", "expected one or two components")),
            };
        }
        if let Some(name) = raw.get("init.name") {
            cfg.init = InitProfile::from_name(name)
                .ok_or_else(|| raw.invalid("init.name", format!("unknown profile `{name}` (cosine, constant, bump)")))?;
        }
        cfg.output = raw.get("output.path").map(PathBuf::from);
        cfg.seed = raw.parsed::<u64>("seed")?;
        if let Some(n) = raw.parsed::<usize>("velocity.core")? {
            if n == 0 {
                return Err(raw.invalid("velocity.core", "must be positive"));
            }
            cfg.core_order = n;
        }
        if let Some(n) = raw.parsed::<usize>("velocity.tail")? {
            if n == 0 {
                return Err(raw.invalid("velocity.tail", "must be positive"));
            }
            cfg.tail_order = n;
        }
        if let Some(n) = raw.parsed::<usize>("particles.n")? {
            if n == 0 {
                return Err(raw.invalid("particles.n", "must be positive"));
            }
            cfg.particles = n;
        }
        if let Some(times) = raw.list("snapshots")? {
            if times.iter().any(|t| !(*t >= 0.0 && *t <= cfg.t_final)) {
                return Err(raw.invalid("snapshots", format!("times must lie in [0, {}]", cfg.t_final)));
            }
            cfg.snapshots = times;
        }
        // contraction of the perturbed-equilibrium map at the largest ε
        let kernel = cfg.kernel()?;
        let s = cfg.epsilons[0].powf(cfg.alpha - 1.0) * kernel.phi_bound(cfg.c);
        if s >= 1.0 {
            return Err(raw.invalid(
                "epsilon",
                format!("eps^(alpha-1) * phi_bar = {s} >= 1, outside the contraction regime"),
            ));
        }
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<Self> {
        Self::from_raw(&RawConfig::parse(text)?)
    }

    /// The single ε of a non-sweep run.
    pub fn eps(&self) -> f64 {
        self.epsilons[0]
    }

    pub fn spec(&self) -> Result<EquilibriumSpec> {
        EquilibriumSpec::flat(self.dim, self.alpha)
    }

    pub fn kernel(&self) -> Result<Box<dyn TurningKernel>> {
        kernel_by_name(&self.kernel)
    }

    pub fn grid(&self) -> Result<TorusGrid> {
        TorusGrid::new(self.dim, self.grid_n, self.grid_length)
    }

    pub fn initial_density(&self) -> Result<MacroField> {
        Ok(self.init.field(self.grid()?))
    }

    /// The seed, required by stochastic runs.
    pub fn require_seed(&self) -> Result<u64> {
        self.seed.ok_or_else(|| config_error(COMMAND_LINE, "seed", "required for stochastic runs"))
    }
}
