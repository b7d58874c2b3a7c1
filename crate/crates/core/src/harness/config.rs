//! Plain-text run configuration.
//!
//! Lines are `key = value`, optionally grouped under `[section]` headers;
//! keys may also be written fully qualified as `section.key`. `#` starts a
//! comment outside quoted strings. Values are numbers, booleans, quoted or
//! bare strings, or bracketed numeric lists.
//!
//! | key | type | default |
//! |---|---|---|
//! | `grid.surrogate_n` | integer | 4096 |
//! | `grid.surrogate_length` | number (log-units) | 100 |
//! | `grid.prime_n` | integer | 2000 |
//! | `grid.arithmetic` | `surrogate` or `circle` | `surrogate` |
//! | `grid.circle_n` | integer | 1024 |
//! | `kernel.delta0` | number (log-units) | 0.05 |
//! | `kernel.cutoff` | number | 1e-14 |
//! | `windows.points_per_decade` | integer | 64 |
//! | `windows.zeta_t` | `[lo, hi]` | `[3e-3, 3e-2]` |
//! | `zeros.source` | `bundled`, `path`, `harmonic` or `rvm-synthetic` | `bundled` |
//! | `zeros.path` | string | empty |
//! | `zeros.count` | integer | 10000 |
//! | `zeros.sanity_gate` | boolean | true |
//! | `bands.arithmetic_alpha` | `[lo, hi]` | `[0.21, 0.29]` |
//! | `bands.zeta_rel_tol` | number | 0.10 |
//! | `run.seed` | integer | 42 |
//! | `run.version` | string | crate version |
//! | `run.eigen_cap` | integer | 4096 |
//! | `run.prime_trend` | boolean | true |

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ArithmeticStage {
    /// Squared fixed-kernel Laplacian on a uniform surrogate grid.
    Surrogate,
    /// Plain circle Laplacian, a second-order control with α = ½.
    Circle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ZeroSource {
    Bundled,
    Path,
    Harmonic,
    RvmSynthetic,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridConfig {
    pub surrogate_n: usize,
    pub surrogate_length: f64,
    pub prime_n: usize,
    pub arithmetic: ArithmeticStage,
    pub circle_n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KernelConfig {
    pub delta0: f64,
    pub cutoff: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WindowConfig {
    pub points_per_decade: usize,
    pub zeta_t: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ZerosConfig {
    pub source: ZeroSource,
    pub path: String,
    pub count: usize,
    pub sanity_gate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BandsConfig {
    pub arithmetic_alpha: [f64; 2],
    pub zeta_rel_tol: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSection {
    pub seed: u64,
    pub version: String,
    pub eigen_cap: usize,
    pub prime_trend: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub grid: GridConfig,
    pub kernel: KernelConfig,
    pub windows: WindowConfig,
    pub zeros: ZerosConfig,
    pub bands: BandsConfig,
    pub run: RunSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            grid: GridConfig {
                surrogate_n: 4096,
                surrogate_length: 100.0,
                prime_n: 2000,
                arithmetic: ArithmeticStage::Surrogate,
                circle_n: 1024,
            },
            kernel: KernelConfig {
                delta0: 0.05,
                cutoff: crate::discrete_op::DEFAULT_CUTOFF,
            },
            windows: WindowConfig {
                points_per_decade: 64,
                zeta_t: [3e-3, 3e-2],
            },
            zeros: ZerosConfig {
                source: ZeroSource::Bundled,
                path: String::new(),
                count: 10_000,
                sanity_gate: true,
            },
            bands: BandsConfig {
                arithmetic_alpha: [0.21, 0.29],
                zeta_rel_tol: 0.10,
            },
            run: RunSection {
                seed: 42,
                version: env!("CARGO_PKG_VERSION").to_string(),
                eigen_cap: crate::spectral::DEFAULT_EIGEN_CAP,
                prime_trend: true,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Value {
    Number(f64),
    Bool(bool),
    Str(String),
    List(Vec<f64>),
}

struct Raw<'a> {
    key: &'a str,
    text: &'a str,
    value: Value,
}

impl Raw<'_> {
    fn mismatch(&self, expected: &'static str) -> Error {
        Error::TypeMismatch {
            key: self.key.to_string(),
            expected,
            found: self.text.to_string(),
        }
    }

    fn number(&self) -> Result<f64> {
        match self.value {
            Value::Number(v) if v.is_finite() => Ok(v),
            _ => Err(self.mismatch("number")),
        }
    }

    fn positive(&self) -> Result<f64> {
        match self.value {
            Value::Number(v) if v > 0.0 && v.is_finite() => Ok(v),
            _ => Err(self.mismatch("positive number")),
        }
    }

    fn count(&self) -> Result<usize> {
        match self.value {
            Value::Number(v) if v >= 1.0 && v.fract() == 0.0 && v < 1e15 => Ok(v as usize),
            _ => Err(self.mismatch("positive integer")),
        }
    }

    fn integer(&self) -> Result<u64> {
        match self.value {
            Value::Number(v) if v >= 0.0 && v.fract() == 0.0 && v < 9.0e15 => Ok(v as u64),
            _ => Err(self.mismatch("nonnegative integer")),
        }
    }

    fn boolean(&self) -> Result<bool> {
        match self.value {
            Value::Bool(b) => Ok(b),
            _ => Err(self.mismatch("boolean")),
        }
    }

    fn string(&self) -> Result<String> {
        match &self.value {
            Value::Str(s) => Ok(s.clone()),
            _ => Err(self.mismatch("string")),
        }
    }

    fn band(&self) -> Result<[f64; 2]> {
        match &self.value {
            Value::List(v) if v.len() == 2 && v[0] < v[1] => Ok([v[0], v[1]]),
            _ => Err(self.mismatch("two-element list [lo, hi] with lo < hi")),
        }
    }
}

fn parse_value(text: &str) -> Option<Value> {
    let t = text.trim();
    if t.is_empty() {
        return None;
    }
    if let Some(inner) = t.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
        if inner.trim().is_empty() {
            return Some(Value::List(Vec::new()));
        }
        let items: Option<Vec<f64>> = inner.split(',').map(|s| s.trim().parse().ok()).collect();
        return Some(items.map_or_else(|| Value::Str(t.to_string()), Value::List));
    }
    if let Some(inner) = t.strip_prefix('"').and_then(|s| s.strip_suffix('"')) {
        return Some(Value::Str(inner.to_string()));
    }
    match t {
        "true" => return Some(Value::Bool(true)),
        "false" => return Some(Value::Bool(false)),
        _ => {}
    }
    Some(t.parse::<f64>().map_or_else(|_| Value::Str(t.to_string()), Value::Number))
}

fn strip_comment(line: &str) -> &str {
    let mut quoted = false;
    for (k, c) in line.char_indices() {
        match c {
            '"' => quoted = !quoted,
            '#' if !quoted => return &line[..k],
            _ => {}
        }
    }
    line
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        let mut section = String::new();
        for (k, raw) in text.lines().enumerate() {
            let line = k + 1;
            let s = strip_comment(raw).trim();
            if s.is_empty() {
                continue;
            }
            if let Some(name) = s.strip_prefix('[').and_then(|r| r.strip_suffix(']')) {
                let name = name.trim();
                if !matches!(name, "grid" | "kernel" | "windows" | "zeros" | "bands" | "run") {
                    return Err(Error::UnknownKey(format!("[{name}]")));
                }
                section = name.to_string();
                continue;
            }
            let Some((key, value)) = s.split_once('=') else {
                return Err(Error::Config {
                    line,
                    message: format!("expected 'key = value', got '{s}'"),
                });
            };
            let key = key.trim();
            let full = if key.contains('.') || section.is_empty() {
                key.to_string()
            } else {
                format!("{section}.{key}")
            };
            let text = value.trim();
            let value = parse_value(text).ok_or_else(|| Error::Config {
                line,
                message: format!("missing value for '{full}'"),
            })?;
            cfg.apply(&Raw { key: &full, text, value })?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    fn apply(&mut self, raw: &Raw<'_>) -> Result<()> {
        match raw.key {
            "grid.surrogate_n" => self.grid.surrogate_n = raw.count()?,
            "grid.surrogate_length" => self.grid.surrogate_length = raw.positive()?,
            "grid.prime_n" => self.grid.prime_n = raw.count()?,
            "grid.circle_n" => self.grid.circle_n = raw.count()?,
            "grid.arithmetic" => {
                self.grid.arithmetic = match raw.string()?.as_str() {
                    "surrogate" => ArithmeticStage::Surrogate,
                    "circle" => ArithmeticStage::Circle,
                    _ => return Err(raw.mismatch("'surrogate' or 'circle'")),
                }
            }
            "kernel.delta0" => self.kernel.delta0 = raw.positive()?,
            "kernel.cutoff" => {
                let c = raw.number()?;
                if !(0.0..1.0).contains(&c) {
                    return Err(raw.mismatch("number in [0, 1)"));
                }
                self.kernel.cutoff = c;
            }
            "windows.points_per_decade" => self.windows.points_per_decade = raw.count()?,
            "windows.zeta_t" => {
                let band = raw.band()?;
                if band[0] <= 0.0 {
                    return Err(raw.mismatch("positive window [lo, hi]"));
                }
                self.windows.zeta_t = band;
            }
            "zeros.source" => {
                self.zeros.source = match raw.string()?.as_str() {
                    "bundled" => ZeroSource::Bundled,
                    "path" => ZeroSource::Path,
                    "harmonic" => ZeroSource::Harmonic,
                    "rvm-synthetic" => ZeroSource::RvmSynthetic,
                    _ => return Err(raw.mismatch("'bundled', 'path', 'harmonic' or 'rvm-synthetic'")),
                }
            }
            "zeros.path" => self.zeros.path = raw.string()?,
            "zeros.count" => self.zeros.count = raw.count()?,
            "zeros.sanity_gate" => self.zeros.sanity_gate = raw.boolean()?,
            "bands.arithmetic_alpha" => self.bands.arithmetic_alpha = raw.band()?,
            "bands.zeta_rel_tol" => self.bands.zeta_rel_tol = raw.positive()?,
            "run.seed" => self.run.seed = raw.integer()?,
            "run.version" => {
                self.run.version = match &raw.value {
                    Value::Str(s) => s.clone(),
                    Value::Number(_) => raw.text.to_string(),
                    _ => return Err(raw.mismatch("string")),
                }
            }
            "run.eigen_cap" => self.run.eigen_cap = raw.count()?,
            "run.prime_trend" => self.run.prime_trend = raw.boolean()?,
            other => return Err(Error::UnknownKey(other.to_string())),
        }
        Ok(())
    }

    /// Canonical `key = value` listing in a fixed key order.
    pub fn canonical(&self, include_seed: bool) -> String {
        let mut out = String::new();
        let g = &self.grid;
        let _ = writeln!(out, "grid.surrogate_n = {}", g.surrogate_n);
        let _ = writeln!(out, "grid.surrogate_length = {:?}", g.surrogate_length);
        let _ = writeln!(out, "grid.prime_n = {}", g.prime_n);
        let _ = writeln!(out, "grid.arithmetic = {:?}", g.arithmetic);
        let _ = writeln!(out, "grid.circle_n = {}", g.circle_n);
        let _ = writeln!(out, "kernel.delta0 = {:?}", self.kernel.delta0);
        let _ = writeln!(out, "kernel.cutoff = {:?}", self.kernel.cutoff);
        let _ = writeln!(out, "windows.points_per_decade = {}", self.windows.points_per_decade);
        let _ = writeln!(out, "windows.zeta_t = {:?}", self.windows.zeta_t);
        let z = &self.zeros;
        let _ = writeln!(out, "zeros.source = {:?}", z.source);
        let _ = writeln!(out, "zeros.path = {:?}", z.path);
        let _ = writeln!(out, "zeros.count = {}", z.count);
        let _ = writeln!(out, "zeros.sanity_gate = {}", z.sanity_gate);
        let _ = writeln!(out, "bands.arithmetic_alpha = {:?}", self.bands.arithmetic_alpha);
        let _ = writeln!(out, "bands.zeta_rel_tol = {:?}", self.bands.zeta_rel_tol);
        if include_seed {
            let _ = writeln!(out, "run.seed = {}", self.run.seed);
        }
        let _ = writeln!(out, "run.version = {:?}", self.run.version);
        let _ = writeln!(out, "run.eigen_cap = {}", self.run.eigen_cap);
        let _ = writeln!(out, "run.prime_trend = {}", self.run.prime_trend);
        out
    }

    /// SHA-256 of the canonical listing without the seed.
    pub fn hash(&self) -> String {
        crate::zeta::sha256_hex(self.canonical(false).as_bytes())
    }
}
