use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use specobs::continuum;
use specobs::discrete_op::{self, SymmetricOperator};
use specobs::gibbs;
use specobs::harness::persist::{self, Artifact, InputRecord};
use specobs::harness::{GridSpec, RunConfig};
use specobs::primegrid::LogGrid;
use specobs::report::{self, Format};
use specobs::spectral::{self, HeatTraceCurve, Provenance, Window};
use specobs::zeta::{self, ZeroTable};
use specobs::{Error, Result};

#[derive(Parser)]
#[command(name = "specobs", version, about = "Heat-trace exponents of arithmetic and zeta spectra")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Run configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output file (report: output directory). Defaults to stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Output format: csv, json or text (subcommand dependent).
    #[arg(long, global = true)]
    format: Option<String>,
    /// Overrides run.seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for row assembly and trace sums.
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Coordinates and gaps of a grid.
    Grid {
        /// primes:N or uniform:a:b:n
        #[arg(long, default_value = "primes:100")]
        grid: GridSpec,
    },
    /// Solves one Gibbs row on a prime grid.
    GibbsSolve {
        #[arg(long, default_value_t = 2000)]
        n_primes: usize,
        #[arg(long)]
        delta0: Option<f64>,
        #[arg(long, default_value_t = 0)]
        row: usize,
        #[arg(long, default_value_t = 1e-12)]
        tol: f64,
    },
    /// Exports a Laplacian (or its square) as row,col,value triplets.
    Operator(OperatorArgs),
    /// Heat trace of an operator with local slopes.
    HeatTrace {
        #[command(flatten)]
        op: OperatorArgs,
        #[arg(long)]
        t_min: Option<f64>,
        #[arg(long)]
        t_max: Option<f64>,
        /// Divide by the operator's length.
        #[arg(long)]
        per_length: bool,
    },
    /// Fits a heat-trace CSV (t, theta columns).
    Fit {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        t_lo: f64,
        #[arg(long)]
        t_hi: f64,
        /// pure-power, log-corrected or select
        #[arg(long, default_value = "select")]
        model: String,
    },
    /// Continuum references: biharmonic diagonal or torus heat trace.
    Continuum {
        /// biharmonic or torus
        #[arg(long, default_value = "biharmonic")]
        model: String,
        #[arg(long, default_value_t = 1)]
        d: usize,
        #[arg(long, default_value_t = 4.0)]
        m: f64,
        #[arg(long, default_value_t = 1.0)]
        c4: f64,
        /// lo:hi
        #[arg(long)]
        t_range: Option<String>,
    },
    /// Validates a zero table and prints a summary.
    ZerosLoad {
        /// File path; the bundled table when omitted.
        #[arg(long)]
        path: Option<PathBuf>,
        #[arg(long)]
        no_sanity_gate: bool,
    },
    /// Downloads a zero table over HTTP.
    ZerosFetch {
        #[arg(long)]
        url: String,
        #[arg(long)]
        dest: PathBuf,
        #[arg(long)]
        pin_checksum: Option<String>,
    },
    /// Zeta heat trace over a log-spaced t grid.
    ZetaTrace {
        #[command(flatten)]
        zeros: ZerosArg,
        #[arg(long, default_value_t = 3e-3)]
        t_min: f64,
        #[arg(long, default_value_t = 3e-2)]
        t_max: f64,
    },
    /// Tauberian slope fit and model selection on a zero table.
    ZetaFit {
        #[command(flatten)]
        zeros: ZerosArg,
        #[arg(long, default_value_t = 3e-3)]
        t_lo: f64,
        #[arg(long, default_value_t = 3e-2)]
        t_hi: f64,
    },
    /// Full obstruction experiment.
    Report,
}

#[derive(Args, Clone)]
struct OperatorArgs {
    /// primes:N, uniform:a:b:n or circle:N
    #[arg(long, default_value = "uniform:0:100:512")]
    grid: GridSpec,
    /// Fixed inverse temperature.
    #[arg(long, conflicts_with = "delta0")]
    beta: Option<f64>,
    /// Row-solved kernel at this mean-divergence target.
    #[arg(long)]
    delta0: Option<f64>,
    #[arg(long)]
    cutoff: Option<f64>,
    #[arg(long)]
    square: bool,
}

#[derive(Args, Clone)]
struct ZerosArg {
    /// bundled, fixture, harmonic:N, rvm:N or a file path
    #[arg(long, default_value = "bundled")]
    zeros: String,
}

impl ZerosArg {
    fn table(&self) -> Result<ZeroTable> {
        let s = self.zeros.as_str();
        if let Some(n) = s.strip_prefix("harmonic:") {
            return ZeroTable::harmonic(parse_count(n)?);
        }
        if let Some(n) = s.strip_prefix("rvm:") {
            return ZeroTable::rvm_synthetic(parse_count(n)?);
        }
        match s {
            "bundled" => Ok(ZeroTable::bundled()),
            "fixture" => Ok(ZeroTable::fixture()),
            path => zeta::load_zeros(Path::new(path), true),
        }
    }
}

fn parse_count(s: &str) -> Result<usize> {
    s.parse().map_err(|_| Error::InvalidInput(format!("'{s}' is not a count")))
}

struct Ctx {
    cfg: RunConfig,
    out: Option<PathBuf>,
    format: Option<String>,
}

impl Ctx {
    fn format(&self, allowed: &[&'static str]) -> Result<&str> {
        match self.format.as_deref() {
            None => Ok(allowed[0]),
            Some(f) if allowed.contains(&f) => Ok(f),
            Some(f) => Err(Error::UnknownFormat(f.to_string())),
        }
    }

    fn emit(&self, text: &str) -> Result<()> {
        match &self.out {
            Some(path) => {
                if let Some(dir) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
                    std::fs::create_dir_all(dir).map_err(|e| Error::Io {
                        path: dir.to_path_buf(),
                        source: e,
                    })?;
                }
                std::fs::write(path, text).map_err(|e| Error::Io {
                    path: path.clone(),
                    source: e,
                })
            }
            None => {
                let mut stdout = std::io::stdout().lock();
                stdout.write_all(text.as_bytes()).map_err(|e| Error::Io {
                    path: PathBuf::from("<stdout>"),
                    source: e,
                })
            }
        }
    }

    fn emit_json<T: Serialize>(&self, value: &T) -> Result<()> {
        self.format(&["json"])?;
        let mut s = serde_json::to_string_pretty(value)?;
        s.push('\n');
        self.emit(&s)
    }
}

fn build_operator(args: &OperatorArgs, cfg: &RunConfig) -> Result<SymmetricOperator> {
    let cutoff = args.cutoff.unwrap_or(cfg.kernel.cutoff);
    let lap = match args.grid {
        GridSpec::Circle(n) => discrete_op::circle_laplacian(n)?,
        spec => {
            let grid = spec.build()?;
            match (args.beta, args.delta0) {
                (Some(beta), _) => discrete_op::laplacian(&grid, beta, cutoff)?,
                (None, delta0) => {
                    let delta0 = delta0.unwrap_or(cfg.kernel.delta0);
                    let rows = gibbs::solve_all(&grid, delta0, 1e-12)?;
                    discrete_op::kernel_from_rows(&grid, &rows, cutoff)?.laplacian()
                }
            }
        }
    };
    if args.square {
        discrete_op::square(&lap)
    } else {
        Ok(lap)
    }
}

fn curve_csv(curve: &HeatTraceCurve) -> Result<String> {
    let mut buf = Vec::new();
    curve.write_csv(&mut buf).map_err(|e| Error::Io {
        path: PathBuf::from("<buffer>"),
        source: e,
    })?;
    Ok(String::from_utf8(buf).expect("csv is ascii"))
}

fn read_curve(path: &Path) -> Result<HeatTraceCurve> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    let (mut t, mut theta) = (Vec::new(), Vec::new());
    for (k, line) in text.lines().enumerate().skip(1) {
        let mut cols = line.split(',');
        let mut next = || -> Result<f64> {
            cols.next()
                .and_then(|c| c.trim().parse().ok())
                .ok_or_else(|| Error::Parse {
                    line: k + 1,
                    message: format!("expected t,theta columns in '{line}'"),
                })
        };
        t.push(next()?);
        theta.push(next()?);
    }
    Ok(HeatTraceCurve {
        t,
        theta,
        per_unit_length: false,
        provenance: Provenance::EigenSum,
    })
}

fn parse_range(s: &str) -> Result<(f64, f64)> {
    let bad = || Error::InvalidInput(format!("t range '{s}': expected lo:hi"));
    let (a, b) = s.split_once(':').ok_or_else(bad)?;
    Ok((a.parse().map_err(|_| bad())?, b.parse().map_err(|_| bad())?))
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = match &cli.global.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.global.seed {
        cfg.run.seed = seed;
    }
    if let Some(threads) = cli.global.threads {
        // Fails only if the pool already exists, which cannot happen here.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    }
    specobs::init_linear_algebra();
    let ctx = Ctx {
        cfg,
        out: cli.global.out,
        format: cli.global.format,
    };
    let cfg = &ctx.cfg;
    let ppd = cfg.windows.points_per_decade;
    match cli.command {
        Command::Grid { grid } => {
            ctx.format(&["csv"])?;
            let grid = grid.build()?;
            let mut s = String::from("index,u (log-units),gap (log-units)\n");
            let coords = grid.coords();
            for (k, &u) in coords.iter().enumerate() {
                let gap = if k == 0 { String::new() } else { format!("{:e}", u - coords[k - 1]) };
                let _ = writeln!(s, "{k},{u:.17e},{gap}");
            }
            ctx.emit(&s)
        }
        Command::GibbsSolve {
            n_primes,
            delta0,
            row,
            tol,
        } => {
            let grid = LogGrid::primes(n_primes)?;
            let solved = gibbs::solve_beta(&grid, row, delta0.unwrap_or(cfg.kernel.delta0), tol)?;
            ctx.emit_json(&solved)
        }
        Command::Operator(args) => {
            ctx.format(&["csv"])?;
            let op = build_operator(&args, cfg)?;
            let mut buf = Vec::new();
            op.write_triplets(&mut buf).map_err(|e| Error::Io {
                path: PathBuf::from("<buffer>"),
                source: e,
            })?;
            ctx.emit(&String::from_utf8(buf).expect("csv is ascii"))
        }
        Command::HeatTrace {
            op,
            t_min,
            t_max,
            per_length,
        } => {
            ctx.format(&["csv"])?;
            let op = build_operator(&op, cfg)?;
            let window = match (t_min, t_max, op.window()) {
                (Some(lo), Some(hi), _) => Window::new(lo, hi)?,
                (None, None, Some(w)) => w,
                _ => return Err(Error::InvalidInput("give --t-min and --t-max for this operator".into())),
            };
            let eigs = spectral::eigenvalues(&op, cfg.run.eigen_cap)?;
            let ts = spectral::log_spaced(window.lo, window.hi, ppd)?;
            let norm = per_length.then(|| op.normalization());
            ctx.emit(&curve_csv(&spectral::heat_trace(&eigs, &ts, norm)?)?)
        }
        Command::Fit {
            input,
            t_lo,
            t_hi,
            model,
        } => {
            let curve = read_curve(&input)?;
            let window = Window::new(t_lo, t_hi)?;
            match model.as_str() {
                "pure-power" => ctx.emit_json(&spectral::fit_power(&curve, window)?),
                "log-corrected" => ctx.emit_json(&spectral::fit_log_corrected(&curve, window)?),
                "select" => ctx.emit_json(&spectral::model_select(&curve, window)?),
                other => Err(Error::InvalidInput(format!("unknown model '{other}'"))),
            }
        }
        Command::Continuum {
            model,
            d,
            m,
            c4,
            t_range,
        } => {
            ctx.format(&["csv"])?;
            let range = t_range.as_deref().map(parse_range).transpose()?;
            match model.as_str() {
                "biharmonic" => {
                    let (lo, hi) = range.unwrap_or((1e-3, 10.0));
                    let mut s = String::from("t (inverse-eigenvalue time),diag (1/log-units),closed_form (1/log-units)\n");
                    for t in spectral::log_spaced(lo, hi, ppd)? {
                        let q = continuum::biharmonic_diag(t, c4)?;
                        let _ = writeln!(s, "{t:e},{q:e},{:e}", continuum::biharmonic_closed_form(t, c4));
                    }
                    ctx.emit(&s)
                }
                "torus" => {
                    let w = continuum::torus_window(m);
                    let (lo, hi) = range.unwrap_or((w.lo, w.hi));
                    let ts = spectral::log_spaced(lo, hi, ppd)?;
                    let cap = continuum::torus_cap(m, lo);
                    ctx.emit(&curve_csv(&continuum::torus_heat_trace(d, m, cap, &ts)?)?)
                }
                other => Err(Error::InvalidInput(format!("unknown continuum model '{other}'"))),
            }
        }
        Command::ZerosLoad { path, no_sanity_gate } => {
            let table = match path {
                Some(p) => zeta::load_zeros(&p, !no_sanity_gate)?,
                None => ZeroTable::bundled(),
            };
            #[derive(Serialize)]
            struct Summary<'a> {
                source: &'a str,
                checksum: &'a str,
                count: usize,
                first: f64,
                last: f64,
            }
            ctx.emit_json(&Summary {
                source: &table.source,
                checksum: &table.checksum,
                count: table.len(),
                first: table.ordinates()[0],
                last: table.gamma_max(),
            })
        }
        Command::ZerosFetch { url, dest, pin_checksum } => {
            let dest = zeta::resolve(&dest);
            let record = zeta::fetch_zeros(&url, &dest, pin_checksum.as_deref())?;
            zeta::load_zeros(&record.path, true)?;
            ctx.emit_json(&record)
        }
        Command::ZetaTrace { zeros, t_min, t_max } => {
            ctx.format(&["csv"])?;
            let table = zeros.table()?;
            let ts = spectral::log_spaced(t_min, t_max, ppd)?;
            ctx.emit(&curve_csv(&zeta::zeta_heat_trace(&table, &ts)?)?)
        }
        Command::ZetaFit { zeros, t_lo, t_hi } => {
            let table = zeros.table()?;
            ctx.emit_json(&zeta::fit_zeta_law(&table, Window::new(t_lo, t_hi)?, ppd)?)
        }
        Command::Report => {
            let format: Format = ctx.format(&["json", "text"])?.parse()?;
            let rep = report::run_obstruction(cfg)?;
            let rendered = report::render(&rep, format)?;
            match &ctx.out {
                None => ctx.emit(&rendered),
                Some(dir) => {
                    let name = match format {
                        Format::Json => "report.json",
                        Format::Text => "report.txt",
                    };
                    let inputs = vec![InputRecord {
                        name: rep.zeta.source.clone(),
                        sha256: rep.zeta.checksum.clone(),
                    }];
                    let artifacts = vec![
                        Artifact::new(name, rendered),
                        Artifact::new("config.txt", cfg.canonical(true)),
                    ];
                    persist::persist_run(cfg, &inputs, &artifacts, dir)?;
                    Ok(())
                }
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_usage() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}

