//! Zeta-zero ordinates: ingestion, counting, heat traces and the
//! logarithmically corrected small-time law.
//!
//! Convention: only positive ordinates are used and never symmetrized, so
//! `N(T) = #{γ_n ≤ T}` and the Tauberian slope target is `1/(2π)`.

use std::f64::consts::PI;
use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::time::Duration;

use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::spectral::{self, HeatTraceCurve, Provenance, Selection, SpectralFit, Window};

/// First 100 positive ordinates, shipped for offline tests.
pub const FIXTURE_100: &str = include_str!("../data/zeros_100.txt");

/// First 10⁴ positive ordinates, shipped as the default table.
pub const BUNDLED_10K: &str = include_str!("../data/zeros_1e4.txt");

/// Environment variable naming the default data directory.
pub const DATA_DIR_ENV: &str = "SPECOBS_DATA_DIR";

/// Truncation guard: traces are only evaluated for `t ≥ GUARD / γ_max`.
pub const GUARD: f64 = 10.0;

pub const TAUBERIAN_SLOPE: f64 = 1.0 / (2.0 * PI);

#[derive(Debug, Clone, Serialize)]
pub struct ZeroTable {
    #[serde(skip)]
    ordinates: Vec<f64>,
    pub source: String,
    pub checksum: String,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl ZeroTable {
    /// Parses one decimal ordinate per line; `#` lines and blank lines are skipped.
    /// With `sanity_gate`, the first ordinate must lie in (14.0, 14.2).
    pub fn parse(text: &str, source: &str, sanity_gate: bool) -> Result<Self> {
        let mut ordinates = Vec::new();
        for (k, raw) in text.lines().enumerate() {
            let line = k + 1;
            let s = raw.trim();
            if s.is_empty() || s.starts_with('#') {
                continue;
            }
            let value: f64 = s.parse().map_err(|_| Error::Parse {
                line,
                message: format!("'{s}' is not a decimal ordinate"),
            })?;
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::Parse {
                    line,
                    message: format!("ordinate {value} is not positive"),
                });
            }
            if let Some(&previous) = ordinates.last() {
                if !(value > previous) {
                    return Err(Error::Monotonicity { line, previous, value });
                }
            }
            ordinates.push(value);
        }
        if ordinates.is_empty() {
            return Err(Error::Parse {
                line: text.lines().count().max(1),
                message: "no ordinates found".into(),
            });
        }
        if sanity_gate && !(ordinates[0] > 14.0 && ordinates[0] < 14.2) {
            return Err(Error::SanityGate(ordinates[0]));
        }
        Ok(ZeroTable {
            ordinates,
            source: source.to_string(),
            checksum: sha256_hex(text.as_bytes()),
        })
    }

    /// Builds a table from explicit ordinates (synthetic spectra).
    pub fn from_ordinates(ordinates: Vec<f64>, source: &str) -> Result<Self> {
        if ordinates.is_empty() {
            return Err(Error::InvalidInput("ordinate list is empty".into()));
        }
        for (k, w) in ordinates.windows(2).enumerate() {
            if !(w[1] > w[0]) {
                return Err(Error::Monotonicity {
                    line: k + 2,
                    previous: w[0],
                    value: w[1],
                });
            }
        }
        if !(ordinates[0] > 0.0) {
            return Err(Error::InvalidInput("ordinates must be positive".into()));
        }
        let mut hasher = Sha256::new();
        for v in &ordinates {
            hasher.update(v.to_le_bytes());
        }
        Ok(ZeroTable {
            ordinates,
            source: source.to_string(),
            checksum: hex::encode(hasher.finalize()),
        })
    }

    pub fn fixture() -> Self {
        Self::parse(FIXTURE_100, "bundled:zeros_100", true).expect("bundled fixture is valid")
    }

    pub fn bundled() -> Self {
        Self::parse(BUNDLED_10K, "bundled:zeros_1e4", true).expect("bundled table is valid")
    }

    /// `γ_n = n` for `n = 1..=count`; its trace is `1/(e^t - 1)`.
    pub fn harmonic(count: usize) -> Result<Self> {
        Self::from_ordinates((1..=count).map(|n| n as f64).collect(), "synthetic:harmonic")
    }

    /// Ordinates solving `rvm_main(γ_n) = n - ½`.
    pub fn rvm_synthetic(count: usize) -> Result<Self> {
        let ordinates = (1..=count)
            .into_par_iter()
            .map(|n| invert_rvm(n as f64 - 0.5))
            .collect::<Result<Vec<_>>>()?;
        Self::from_ordinates(ordinates, "synthetic:rvm-main")
    }

    pub fn ordinates(&self) -> &[f64] {
        &self.ordinates
    }

    pub fn len(&self) -> usize {
        self.ordinates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ordinates.is_empty()
    }

    pub fn gamma_max(&self) -> f64 {
        *self.ordinates.last().expect("tables are nonempty")
    }

    /// Smallest admissible heat-trace time.
    pub fn t_min(&self) -> f64 {
        GUARD / self.gamma_max()
    }

    pub fn truncated(&self, count: usize) -> Self {
        let mut out = self.clone();
        out.ordinates.truncate(count.max(1));
        out
    }

    /// `N(T) = #{γ_n ≤ T}`.
    pub fn count(&self, t: f64) -> usize {
        self.ordinates.partition_point(|&g| g <= t)
    }

    fn guard(&self, t: f64, factor: f64) -> Result<()> {
        let t_min = factor / self.gamma_max();
        if t < t_min {
            Err(Error::TruncationGuard { t, t_min })
        } else {
            Ok(())
        }
    }
}

/// Reads and validates a zero table from disk.
pub fn load_zeros(path: &Path, sanity_gate: bool) -> Result<ZeroTable> {
    let text = fs::read_to_string(resolve(path)).map_err(|e| Error::io(path, e))?;
    ZeroTable::parse(&text, &path.display().to_string(), sanity_gate)
}

/// Relative paths are taken from the data directory when one is configured.
pub fn resolve(path: &Path) -> PathBuf {
    match std::env::var_os(DATA_DIR_ENV) {
        Some(dir) if path.is_relative() && !path.exists() => Path::new(&dir).join(path),
        _ => path.to_path_buf(),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FetchRecord {
    pub url: String,
    pub path: PathBuf,
    pub sha256: String,
    pub bytes: u64,
}

/// Downloads `url` to `destination` via a sibling temporary file. On any
/// failure, including a checksum pin mismatch, no file is left behind.
pub fn fetch_zeros(url: &str, destination: &Path, pin: Option<&str>) -> Result<FetchRecord> {
    let dir = match destination.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let name = destination
        .file_name()
        .ok_or_else(|| Error::InvalidInput(format!("destination {} has no file name", destination.display())))?;
    let partial = dir.join(format!(".{}.part", name.to_string_lossy()));
    let result = download(url, &partial).and_then(|bytes| {
        let sha256 = sha256_hex(&bytes);
        if let Some(expected) = pin {
            if !expected.eq_ignore_ascii_case(&sha256) {
                return Err(Error::ChecksumMismatch {
                    expected: expected.to_string(),
                    actual: sha256,
                });
            }
        }
        fs::rename(&partial, destination).map_err(|e| Error::io(destination, e))?;
        Ok(FetchRecord {
            url: url.to_string(),
            path: destination.to_path_buf(),
            sha256,
            bytes: bytes.len() as u64,
        })
    });
    if result.is_err() {
        let _ = fs::remove_file(&partial);
    }
    result
}

fn download(url: &str, partial: &Path) -> Result<Vec<u8>> {
    let agent = ureq::AgentBuilder::new()
        .timeout(Duration::from_secs(60))
        .build();
    let response = agent.get(url).call().map_err(|e| Error::Network(e.to_string()))?;
    let mut bytes = Vec::new();
    response
        .into_reader()
        .read_to_end(&mut bytes)
        .map_err(|e| Error::Network(e.to_string()))?;
    let mut file = fs::File::create(partial).map_err(|e| Error::io(partial, e))?;
    file.write_all(&bytes).map_err(|e| Error::io(partial, e))?;
    file.sync_all().map_err(|e| Error::io(partial, e))?;
    Ok(bytes)
}

/// Main term `(T/2π) log(T/2π) - T/2π`, defined for `T > 2π`.
pub fn rvm_main(t: f64) -> Result<f64> {
    if !(t > 2.0 * PI) {
        return Err(Error::Domain(format!("main term needs T > 2π, got {t}")));
    }
    let x = t / (2.0 * PI);
    Ok(x * x.ln() - x)
}

/// Solves `rvm_main(T) = target` for `T > 2πe`, where the main term is
/// positive and increasing.
fn invert_rvm(target: f64) -> Result<f64> {
    if !(target > 0.0) {
        return Err(Error::Domain(format!("cannot invert the main term at {target}")));
    }
    let mut lo = 2.0 * PI * std::f64::consts::E;
    let mut hi = lo * 2.0;
    while rvm_main(hi)? < target {
        lo = hi;
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if rvm_main(mid)? < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct CountingRow {
    #[serde(rename = "T")]
    pub t: f64,
    pub n_actual: usize,
    pub main: f64,
    pub diff: f64,
}

pub fn counting_compare(table: &ZeroTable, ts: &[f64]) -> Result<Vec<CountingRow>> {
    ts.iter()
        .map(|&t| {
            if t > table.gamma_max() {
                return Err(Error::Range(format!(
                    "T = {t} lies beyond the last ordinate {}",
                    table.gamma_max()
                )));
            }
            let main = rvm_main(t)?;
            let n_actual = table.count(t);
            Ok(CountingRow {
                t,
                n_actual,
                main,
                diff: n_actual as f64 - main,
            })
        })
        .collect()
}

/// `Θ(t) = Σ_n exp(-t γ_n)`, each t summed in ascending n.
pub fn zeta_heat_trace(table: &ZeroTable, ts: &[f64]) -> Result<HeatTraceCurve> {
    zeta_heat_trace_guarded(table, ts, GUARD)
}

/// As [`zeta_heat_trace`] with the guard `t ≥ factor / γ_max`; a factor of 0
/// evaluates the finite sum without any truncation claim.
pub fn zeta_heat_trace_guarded(table: &ZeroTable, ts: &[f64], factor: f64) -> Result<HeatTraceCurve> {
    if ts.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidInput("t grid must be strictly ascending".into()));
    }
    for &t in ts {
        table.guard(t, factor)?;
    }
    let theta = ts
        .par_iter()
        .map(|&t| table.ordinates.iter().map(|&g| (-t * g).exp()).sum())
        .collect();
    Ok(HeatTraceCurve {
        t: ts.to_vec(),
        theta,
        per_unit_length: false,
        provenance: Provenance::ZeroTable,
    })
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct LaplaceValue {
    pub t: f64,
    /// `t ∫_0^{γ_max} exp(-tT) N(T) dT`.
    pub value: f64,
    /// `N e^{-t γ_max}`, the omitted tail, plus a summation rounding allowance.
    pub tail_bound: f64,
}

/// Laplace transform of the empirical counting function by Abel summation:
/// `Σ_{n<N} n (e^{-tγ_n} - e^{-tγ_{n+1}})` over the table's range.
pub fn laplace_counting(table: &ZeroTable, t: f64) -> Result<LaplaceValue> {
    table.guard(t, GUARD)?;
    let g = &table.ordinates;
    let mut value = 0.0;
    let mut here = (-t * g[0]).exp();
    for (n, &next) in g.iter().enumerate().skip(1) {
        let there = (-t * next).exp();
        value += n as f64 * (here - there);
        here = there;
    }
    let count = g.len() as f64;
    let tail = count * (-t * table.gamma_max()).exp();
    let rounding = 4.0 * count * f64::EPSILON * (value + tail);
    Ok(LaplaceValue {
        t,
        value,
        tail_bound: tail + rounding,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ZetaFit {
    /// OLS slope of `tΘ(t)` against `log(1/t)`.
    pub slope: f64,
    pub intercept: f64,
    pub target: f64,
    pub relative_error: f64,
    pub window: Window,
    pub selection: Selection,
    pub log_corrected: SpectralFit,
    pub d_s: f64,
}

/// Regresses `tΘ(t)` on `log(1/t)` inside `window` and runs model selection.
pub fn fit_zeta_law(table: &ZeroTable, window: Window, per_decade: usize) -> Result<ZetaFit> {
    table.guard(window.lo, GUARD)?;
    let ts = spectral::log_spaced(window.lo, window.hi, per_decade)?;
    let curve = zeta_heat_trace(table, &ts)?;
    let xs: Vec<f64> = ts.iter().map(|t| (1.0 / t).ln()).collect();
    let ys: Vec<f64> = ts.iter().zip(&curve.theta).map(|(t, v)| t * v).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let selection = spectral::model_select(&curve, window)?;
    let log_corrected = selection.log_corrected.clone();
    Ok(ZetaFit {
        slope,
        intercept,
        target: TAUBERIAN_SLOPE,
        relative_error: (slope - TAUBERIAN_SLOPE) / TAUBERIAN_SLOPE,
        window,
        d_s: log_corrected.d_s,
        selection,
        log_corrected,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn three_line_file() {
        let t = ZeroTable::parse("14.134725\n21.022040\n25.010858\n", "inline", true).unwrap();
        assert_eq!(t.len(), 3);
        assert!((t.ordinates()[0] - 14.134725).abs() < 1e-12);
    }

    #[test]
    fn empty_and_unordered() {
        assert!(matches!(ZeroTable::parse("", "e", false), Err(Error::Parse { .. })));
        assert!(matches!(
            ZeroTable::parse("# header\n14.1\n13.0\n", "u", false),
            Err(Error::Monotonicity { line: 3, .. })
        ));
        assert!(matches!(
            ZeroTable::parse("14.1\nabc\n", "p", false),
            Err(Error::Parse { line: 2, .. })
        ));
        assert!(matches!(ZeroTable::parse("3.0\n", "g", true), Err(Error::SanityGate(_))));
    }

    #[test]
    fn main_term_values() {
        assert!(rvm_main(2.0 * PI * std::f64::consts::E).unwrap().abs() < 1e-12);
        assert!((rvm_main(100.0).unwrap() - 28.127).abs() < 1e-3);
        assert!((rvm_main(1000.0).unwrap() - 647.74).abs() < 1e-2);
        assert!(matches!(rvm_main(6.0), Err(Error::Domain(_))));
    }

    #[test]
    fn fixture_counts() {
        let t = ZeroTable::fixture();
        assert_eq!(t.len(), 100);
        assert_eq!(t.count(100.0), 29);
        assert_eq!(t.count(14.0), 0);
    }

    #[test]
    fn single_ordinate_trace() {
        let t = ZeroTable::from_ordinates(vec![14.134725], "one").unwrap();
        let c = zeta_heat_trace_guarded(&t, &[0.1], 0.0).unwrap();
        assert!((c.theta[0] - 0.243_297).abs() < 1e-6);
        assert!(matches!(
            zeta_heat_trace(&t, &[0.1]),
            Err(Error::TruncationGuard { .. })
        ));
    }

    #[test]
    fn synthetic_rvm_inverts() {
        let t = ZeroTable::rvm_synthetic(50).unwrap();
        for (n, &g) in t.ordinates().iter().enumerate() {
            assert!((rvm_main(g).unwrap() - (n as f64 + 0.5)).abs() < 1e-9);
        }
    }
}
