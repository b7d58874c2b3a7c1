//! End-to-end obstruction experiment and its rendering.
//!
//! The verdict is `incompatible` only when (a) the arithmetic operator selects
//! the pure-power class with α inside its band and (b) the zeta trace selects
//! the log-corrected class with slope inside its band.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::continuum;
use crate::discrete_op::{self, SymmetricOperator};
use crate::error::{Error, Result};
use crate::gibbs;
use crate::harness::config::{ArithmeticStage as StageKind, RunConfig, ZeroSource};
use crate::primegrid::LogGrid;
use crate::spectral::{self, HeatTraceCurve, Model, Selection, SpectralFit, Window};
use crate::zeta::{self, ZeroTable};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitSummary {
    pub model: Model,
    pub alpha: f64,
    pub d_s: f64,
    pub coefficients: Vec<f64>,
    /// Log-space RMS residual; absent when the model is nonpositive on the window.
    pub residual: Option<f64>,
    pub points: usize,
}

impl From<&SpectralFit> for FitSummary {
    fn from(f: &SpectralFit) -> Self {
        FitSummary {
            model: f.model,
            alpha: f.alpha,
            d_s: f.d_s,
            coefficients: f.coefficients.clone(),
            residual: f.residual.is_finite().then_some(f.residual),
            points: f.points,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionSummary {
    pub model: Model,
    pub ratio: f64,
    pub window: Window,
    pub pure_power: FitSummary,
    pub log_corrected: FitSummary,
}

impl From<&Selection> for SelectionSummary {
    fn from(s: &Selection) -> Self {
        SelectionSummary {
            model: s.model,
            ratio: s.ratio,
            window: s.pure_power.window,
            pure_power: (&s.pure_power).into(),
            log_corrected: (&s.log_corrected).into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArithmeticReport {
    pub operator: String,
    pub n: usize,
    pub normalization: f64,
    pub selection: SelectionSummary,
    pub alpha: f64,
    /// Median local slope inside the window.
    pub plateau_slope: f64,
    pub band: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZetaReport {
    pub source: String,
    pub count: usize,
    pub checksum: String,
    pub slope: f64,
    pub intercept: f64,
    pub target: f64,
    pub relative_error: f64,
    pub rel_tol: f64,
    pub selection: SelectionSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TorusBaseline {
    pub d: usize,
    pub m: f64,
    pub cap: usize,
    pub expected_d_s: f64,
    pub fitted_d_s: f64,
    pub model: Model,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrimeTrendPoint {
    pub n: usize,
    pub beta_min: f64,
    pub beta_max: f64,
    pub window: Window,
    pub alpha: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Condition {
    pub holds: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Incompatible,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObstructionReport {
    pub schema_version: u32,
    pub config_hash: String,
    pub arithmetic: ArithmeticReport,
    pub zeta: ZetaReport,
    pub torus: Vec<TorusBaseline>,
    /// Row-solved prime-grid runs; reported, never gating.
    pub prime_trend: Vec<PrimeTrendPoint>,
    pub condition_a: Condition,
    pub condition_b: Condition,
    pub verdict: Verdict,
    pub diagnostics: Vec<String>,
}

/// Output of the arithmetic stage, including the raw curve for callers that
/// need more than the summary.
pub struct ArithmeticRun {
    pub report: ArithmeticReport,
    pub curve: HeatTraceCurve,
    pub eigenvalues: Vec<f64>,
    pub operator: SymmetricOperator,
}

fn median(mut v: Vec<f64>) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let k = v.len() / 2;
    if v.len() % 2 == 1 {
        v[k]
    } else {
        0.5 * (v[k - 1] + v[k])
    }
}

/// Builds the configured arithmetic operator, eigensolves it and fits the
/// per-unit-length heat trace on the operator's window.
pub fn arithmetic_stage(cfg: &RunConfig) -> Result<ArithmeticRun> {
    let (label, operator) = match cfg.grid.arithmetic {
        StageKind::Surrogate => (
            "surrogate-squared",
            discrete_op::surrogate_squared(
                cfg.grid.surrogate_n,
                cfg.grid.surrogate_length,
                cfg.kernel.delta0,
                cfg.kernel.cutoff,
            )?,
        ),
        StageKind::Circle => ("circle-laplacian", discrete_op::circle_laplacian(cfg.grid.circle_n)?),
    };
    let window = operator.window().expect("stage operators carry a window");
    let eigenvalues = spectral::eigenvalues(&operator, cfg.run.eigen_cap)?;
    let ts = spectral::log_spaced(window.lo, window.hi, cfg.windows.points_per_decade)?;
    let curve = spectral::heat_trace(&eigenvalues, &ts, Some(operator.normalization()))?;
    let selection = spectral::model_select(&curve, window)?;
    let plateau_slope = median(curve.local_slope());
    let report = ArithmeticReport {
        operator: label.to_string(),
        n: operator.len(),
        normalization: operator.normalization(),
        alpha: selection.pure_power.alpha,
        selection: (&selection).into(),
        plateau_slope,
        band: cfg.bands.arithmetic_alpha,
    };
    Ok(ArithmeticRun {
        report,
        curve,
        eigenvalues,
        operator,
    })
}

pub fn zero_table(cfg: &RunConfig) -> Result<ZeroTable> {
    let z = &cfg.zeros;
    let table = match z.source {
        ZeroSource::Bundled => ZeroTable::bundled(),
        ZeroSource::Path => {
            if z.path.is_empty() {
                return Err(Error::InvalidInput("zeros.source = path needs zeros.path".into()));
            }
            zeta::load_zeros(std::path::Path::new(&z.path), z.sanity_gate)?
        }
        ZeroSource::Harmonic => ZeroTable::harmonic(z.count)?,
        ZeroSource::RvmSynthetic => ZeroTable::rvm_synthetic(z.count)?,
    };
    Ok(if table.len() > z.count { table.truncated(z.count) } else { table })
}

pub fn zeta_stage(cfg: &RunConfig) -> Result<ZetaReport> {
    let table = zero_table(cfg)?;
    let window = Window::new(cfg.windows.zeta_t[0], cfg.windows.zeta_t[1])?;
    let fit = zeta::fit_zeta_law(&table, window, cfg.windows.points_per_decade)?;
    Ok(ZetaReport {
        source: table.source.clone(),
        count: table.len(),
        checksum: table.checksum.clone(),
        slope: fit.slope,
        intercept: fit.intercept,
        target: fit.target,
        relative_error: fit.relative_error,
        rel_tol: cfg.bands.zeta_rel_tol,
        selection: (&fit.selection).into(),
    })
}

pub const TORUS_CASES: [(usize, f64); 3] = [(1, 2.0), (1, 4.0), (2, 2.0)];

pub fn torus_baseline(d: usize, m: f64, per_decade: usize) -> Result<TorusBaseline> {
    let window = continuum::torus_window(m);
    let cap = continuum::torus_cap(m, window.lo);
    let ts = spectral::log_spaced(window.lo, window.hi, per_decade)?;
    let curve = continuum::torus_heat_trace(d, m, cap, &ts)?;
    let selection = spectral::model_select(&curve, window)?;
    Ok(TorusBaseline {
        d,
        m,
        cap,
        expected_d_s: continuum::seeley_exponent(d, m)?,
        fitted_d_s: selection.pure_power.d_s,
        model: selection.model,
        ratio: selection.ratio,
    })
}

/// Row-solved prime-grid operator: Gibbs rows at δ₀, symmetrized kernel,
/// squared Laplacian, fitted on the spectral bulk `[10/λ_max, 0.1/λ_min⁺]`.
pub fn prime_trend_point(n: usize, delta0: f64, cutoff: f64, cap: usize, per_decade: usize) -> Result<PrimeTrendPoint> {
    let grid = LogGrid::primes(n)?;
    let rows = gibbs::solve_all(&grid, delta0, 1e-12)?;
    let kernel = discrete_op::kernel_from_rows(&grid, &rows, cutoff)?;
    let squared = discrete_op::square(&kernel.laplacian())?;
    let eigs = spectral::eigenvalues(&squared, cap)?;
    let top = *eigs.last().expect("nonempty spectrum");
    let floor = eigs.iter().copied().find(|&l| l > 1e-9 * top).unwrap_or(top);
    let window = Window::new(10.0 / top, 0.1 / floor)?;
    let ts = spectral::log_spaced(window.lo, window.hi, per_decade)?;
    let curve = spectral::heat_trace(&eigs, &ts, Some(grid.length()))?;
    let fit = spectral::fit_power(&curve, window)?;
    let (beta_min, beta_max) = rows
        .iter()
        .fold((f64::INFINITY, 0.0_f64), |(lo, hi), r| (lo.min(r.beta), hi.max(r.beta)));
    Ok(PrimeTrendPoint {
        n,
        beta_min,
        beta_max,
        window,
        alpha: fit.alpha,
    })
}

fn condition_a(a: &ArithmeticReport) -> Condition {
    let [lo, hi] = a.band;
    let model_ok = a.selection.model == Model::PurePower;
    let band_ok = a.alpha >= lo && a.alpha <= hi;
    Condition {
        holds: model_ok && band_ok,
        detail: format!(
            "{} selects {:?} (ratio {:.3}); alpha = {:.4} {} band [{lo}, {hi}]",
            a.operator,
            a.selection.model,
            a.selection.ratio,
            a.alpha,
            if band_ok { "inside" } else { "outside" }
        ),
    }
}

fn condition_b(z: &ZetaReport) -> Condition {
    let model_ok = z.selection.model == Model::LogCorrected;
    let band_ok = z.relative_error.abs() <= z.rel_tol;
    Condition {
        holds: model_ok && band_ok,
        detail: format!(
            "{} selects {:?} (ratio {:.3}); slope = {:.6} vs 1/(2π) = {:.6}, relative error {:+.4} {} tolerance {}",
            z.source,
            z.selection.model,
            z.selection.ratio,
            z.slope,
            z.target,
            z.relative_error,
            if band_ok { "within" } else { "outside" },
            z.rel_tol
        ),
    }
}

/// Assembles a report from already computed stages.
pub fn assemble(
    cfg: &RunConfig,
    arithmetic: ArithmeticReport,
    zeta: ZetaReport,
    torus: Vec<TorusBaseline>,
    prime_trend: Vec<PrimeTrendPoint>,
    mut diagnostics: Vec<String>,
) -> ObstructionReport {
    let condition_a = condition_a(&arithmetic);
    let condition_b = condition_b(&zeta);
    let verdict = if condition_a.holds && condition_b.holds {
        Verdict::Incompatible
    } else {
        Verdict::Inconclusive
    };
    diagnostics.push(format!(
        "arithmetic window [{:.6e}, {:.6e}], plateau slope {:.4}",
        arithmetic.selection.window.lo, arithmetic.selection.window.hi, arithmetic.plateau_slope
    ));
    for b in &torus {
        diagnostics.push(format!(
            "torus d={} m={}: d_s = {:.4} (expected {:.4})",
            b.d, b.m, b.fitted_d_s, b.expected_d_s
        ));
    }
    ObstructionReport {
        schema_version: SCHEMA_VERSION,
        config_hash: cfg.hash(),
        arithmetic,
        zeta,
        torus,
        prime_trend,
        condition_a,
        condition_b,
        verdict,
        diagnostics,
    }
}

/// Runs every stage in order. Stage failures abort with the stage name.
pub fn run_obstruction(cfg: &RunConfig) -> Result<ObstructionReport> {
    let arithmetic = arithmetic_stage(cfg).map_err(Error::in_stage("arithmetic"))?.report;
    let zeta = zeta_stage(cfg).map_err(Error::in_stage("zeta"))?;
    let torus = TORUS_CASES
        .iter()
        .map(|&(d, m)| torus_baseline(d, m, cfg.windows.points_per_decade))
        .collect::<Result<Vec<_>>>()
        .map_err(Error::in_stage("torus"))?;
    let mut diagnostics = Vec::new();
    let mut prime_trend = Vec::new();
    if cfg.run.prime_trend {
        for n in [cfg.grid.prime_n / 2, cfg.grid.prime_n] {
            match prime_trend_point(n, cfg.kernel.delta0, cfg.kernel.cutoff, cfg.run.eigen_cap, cfg.windows.points_per_decade) {
                Ok(p) => prime_trend.push(p),
                Err(e) => diagnostics.push(format!("prime trend at N = {n} skipped: {e}")),
            }
        }
    }
    Ok(assemble(cfg, arithmetic, zeta, torus, prime_trend, diagnostics))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Json,
    Text,
}

impl std::str::FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(Format::Json),
            "text" => Ok(Format::Text),
            other => Err(Error::UnknownFormat(other.to_string())),
        }
    }
}

pub fn render(report: &ObstructionReport, format: Format) -> Result<String> {
    match format {
        Format::Json => {
            let mut s = serde_json::to_string_pretty(report)?;
            s.push('\n');
            Ok(s)
        }
        Format::Text => Ok(render_text(report)),
    }
}

fn render_text(r: &ObstructionReport) -> String {
    let mut s = String::new();
    let a = &r.arithmetic;
    let z = &r.zeta;
    let _ = writeln!(s, "obstruction report (schema {})", r.schema_version);
    let _ = writeln!(s, "config hash: {}", r.config_hash);
    let _ = writeln!(s);
    let _ = writeln!(s, "arithmetic operator: {} (N = {})", a.operator, a.n);
    let _ = writeln!(
        s,
        "  alpha = {:.4}, d_s = {:.4}, model = {:?}, residual ratio = {:.3}",
        a.alpha,
        2.0 * a.alpha,
        a.selection.model,
        a.selection.ratio
    );
    let _ = writeln!(
        s,
        "  window t in [{:.4e}, {:.4e}], plateau slope = {:.4}",
        a.selection.window.lo, a.selection.window.hi, a.plateau_slope
    );
    let _ = writeln!(s, "zeta spectrum: {} ({} ordinates)", z.source, z.count);
    let _ = writeln!(
        s,
        "  slope A = {:.6} (target {:.6}), intercept B = {:.6}, model = {:?}, residual ratio = {:.3}",
        z.slope, z.target, z.intercept, z.selection.model, z.selection.ratio
    );
    let _ = writeln!(s, "torus baselines:");
    for b in &r.torus {
        let _ = writeln!(
            s,
            "  d = {}, m = {}: d_s = {:.4} (expected {:.4}), model = {:?}",
            b.d, b.m, b.fitted_d_s, b.expected_d_s, b.model
        );
    }
    if !r.prime_trend.is_empty() {
        let _ = writeln!(s, "prime-grid trend (diagnostic only):");
        for p in &r.prime_trend {
            let _ = writeln!(
                s,
                "  N = {}: alpha = {:.4}, beta in [{:.3}, {:.3}]",
                p.n, p.alpha, p.beta_min, p.beta_max
            );
        }
    }
    let _ = writeln!(s);
    for (name, c) in [("(a) arithmetic", &r.condition_a), ("(b) zeta", &r.condition_b)] {
        let status = if c.holds { "holds" } else { "FAILS" };
        let _ = writeln!(s, "condition {name} {status}: {}", c.detail);
    }
    for d in &r.diagnostics {
        let _ = writeln!(s, "note: {d}");
    }
    let verdict = match r.verdict {
        Verdict::Incompatible => "incompatible",
        Verdict::Inconclusive => "inconclusive",
    };
    let _ = writeln!(s, "verdict: {verdict}");
    s
}
