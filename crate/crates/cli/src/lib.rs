//! `solvq` command-line front end.

// `!(a < b)` is how NaN is rejected throughout
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod output;

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use solvq_core::covering::{build_d_covering, verify_covering};
use solvq_core::green::{norm_bracket, solve_on_grid, uniform_grid, ForcingFunction};
use solvq_core::{
    classify, classify_example8, classify_thm12, cross_check_example8, scan_d, sup_scan, Decision, Direction,
    Functional, HypothesisCert, Space,
};

pub use config::RunConfig;
pub use error::CliError;
use output::{csv_table, emit, Report};

#[derive(Debug, Parser)]
#[command(
    name = "solvq",
    version,
    about = "Correct solvability of -r y' + q y = f on the real line"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalOpts,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalOpts {
    /// Run configuration (JSON).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output file; stdout when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Exit with status 2 when every verdict is Inconclusive.
    #[arg(long, global = true)]
    pub strict: bool,
    #[arg(long, global = true)]
    pub tol_criteria: Option<f64>,
    #[arg(long, global = true)]
    pub tol_green: Option<f64>,
    /// Output format; each subcommand has its own default.
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DirArg {
    Left,
    Right,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Numeric solvability verdict for the configured pair.
    Classify {
        #[arg(long, value_parser = parse_space)]
        space: Space,
        /// Use the coefficient-only table with this certificate `a,b,lo,hi`.
        #[arg(long, value_parser = parse_cert)]
        table: Option<HypothesisCert>,
    },
    /// Exact verdict for r = e^{alpha|x|}, q = e^{beta|x|}(1 + cos e^{gamma|x|}).
    Example8 {
        #[arg(long, allow_hyphen_values = true)]
        alpha: f64,
        #[arg(long, allow_hyphen_values = true)]
        beta: f64,
        #[arg(long)]
        gamma: f64,
        #[arg(long, value_parser = parse_space)]
        space: Space,
        /// Also run the numeric classifier and compare.
        #[arg(long)]
        cross_check: bool,
    },
    /// The localization function d on the scan grid.
    DScan,
    /// Scan of one criterion functional.
    Criteria {
        #[arg(long, value_parser = parse_functional)]
        functional: Functional,
        #[arg(long, default_value_t = 2.0)]
        p: f64,
    },
    /// Covering by segments of mass 2 starting at x0.
    Covering {
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        x0: f64,
        #[arg(long, value_enum, default_value_t = DirArg::Right)]
        dir: DirArg,
        #[arg(long, default_value_t = 16)]
        n: usize,
    },
    /// y = Gf on a uniform grid.
    Solve {
        /// Forcing: an expression in x, `gaussian`, `indicator[a,b]` or `hat[c,w,h]`.
        #[arg(long = "f", allow_hyphen_values = true)]
        forcing: String,
        #[arg(long, allow_hyphen_values = true)]
        xmin: f64,
        #[arg(long, allow_hyphen_values = true)]
        xmax: f64,
        #[arg(long, default_value_t = 801)]
        n: usize,
    },
    /// Empirical operator-norm bracket; `--p inf` for C.
    Norms {
        #[arg(long, default_value_t = 2.0)]
        p: f64,
        #[arg(long, default_value_t = 200)]
        samples: usize,
        /// Defaults to the config seed.
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn parse_space(s: &str) -> Result<Space, String> {
    s.parse().map_err(|e: solvq_core::Error| e.to_string())
}

fn parse_functional(s: &str) -> Result<Functional, String> {
    s.parse().map_err(|e: solvq_core::Error| e.to_string())
}

fn parse_cert(s: &str) -> Result<HypothesisCert, String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|e| format!("{t}: {e}")))
        .collect::<Result<_, _>>()?;
    match v[..] {
        [a, b, lo, hi] => Ok(HypothesisCert {
            a,
            b,
            interval: (lo, hi),
        }),
        _ => Err("expected a,b,lo,hi".into()),
    }
}

/// Result of one subcommand: text to write and whether any verdict was definite.
struct Outcome {
    text: String,
    decisions: Vec<Decision>,
}

impl Outcome {
    fn plain(text: String) -> Self {
        Outcome {
            text,
            decisions: Vec::new(),
        }
    }
}

fn load_config(global: &GlobalOpts) -> Result<RunConfig, CliError> {
    let path = global
        .config
        .as_deref()
        .ok_or_else(|| CliError::Usage("this subcommand needs --config <file>".into()))?;
    let mut cfg = RunConfig::load(path)?;
    if let Some(t) = global.tol_criteria {
        cfg.tolerances.criteria = t;
    }
    if let Some(t) = global.tol_green {
        cfg.tolerances.green = t;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn json_report<T: Serialize>(command: &str, cfg: Option<&RunConfig>, body: &T) -> Result<String, CliError> {
    let mut r = Report::new(command).flatten(body)?;
    if let Some(cfg) = cfg {
        r = r.field("config", cfg)?;
    }
    r.to_string_pretty()
}

fn execute(cli: &Cli) -> Result<(Outcome, Option<PathBuf>), CliError> {
    let g = &cli.global;
    let mut out_path = g.out.clone();
    let outcome = match &cli.command {
        Command::Example8 {
            alpha,
            beta,
            gamma,
            space,
            cross_check,
        } => {
            if *cross_check {
                let mut cfg = None;
                let policy = match &g.config {
                    Some(_) => {
                        let c = load_config(g)?;
                        let p = c.scan_policy();
                        cfg = Some(c);
                        p
                    }
                    None => solvq_core::ScanPolicy::default(),
                };
                let report = cross_check_example8(*alpha, *beta, *gamma, *space, &policy)?;
                Outcome {
                    text: json_report("example8", cfg.as_ref(), &report)?,
                    decisions: vec![report.numeric.decision, report.symbolic.decision],
                }
            } else {
                let v = classify_example8(*alpha, *beta, *gamma, *space)?;
                #[derive(Serialize)]
                struct Params {
                    alpha: f64,
                    beta: f64,
                    gamma: f64,
                }
                let text = Report::new("example8")
                    .flatten(&Params {
                        alpha: *alpha,
                        beta: *beta,
                        gamma: *gamma,
                    })?
                    .flatten(&v)?
                    .to_string_pretty()?;
                Outcome {
                    text,
                    decisions: vec![v.decision],
                }
            }
        }
        command => {
            let cfg = load_config(g)?;
            if out_path.is_none() {
                out_path = cfg.out.clone();
            }
            run_with_config(command, &cfg, g.format)?
        }
    };
    Ok((outcome, out_path))
}

fn run_with_config(command: &Command, cfg: &RunConfig, format: Option<Format>) -> Result<Outcome, CliError> {
    let pair = cfg.pair()?;
    let policy = cfg.scan_policy();
    let fmt = |default: Format| format.unwrap_or(default);
    Ok(match command {
        Command::Classify { space, table } => {
            let v = match table {
                Some(cert) => classify_thm12(&pair, *space, cert, &policy)?,
                None => classify(&pair, *space, &policy),
            };
            Outcome {
                text: json_report("classify", Some(cfg), &v)?,
                decisions: vec![v.decision],
            }
        }
        Command::DScan => {
            let (grid, _) = policy.grid_for(&pair);
            let prof = scan_d(&pair, &grid, cfg.tolerances.criteria)?;
            Outcome::plain(match fmt(Format::Csv) {
                Format::Csv => {
                    let rows: Vec<Vec<f64>> = prof.samples.iter().map(|s| vec![s.x, s.d, s.residual]).collect();
                    csv_table(&["x", "d", "residual"], &rows)
                }
                Format::Json => json_report("d-scan", Some(cfg), &prof)?,
            })
        }
        Command::Criteria { functional, p } => {
            let rep = sup_scan(*functional, &pair, *p, &policy)?;
            Outcome::plain(match fmt(Format::Json) {
                Format::Csv => {
                    let rows: Vec<Vec<f64>> = rep
                        .grid
                        .iter()
                        .zip(&rep.values)
                        .zip(&rep.running_sup)
                        .map(|((x, v), s)| vec![*x, *v, *s])
                        .collect();
                    csv_table(&["x", "value", "running_sup"], &rows)
                }
                Format::Json => json_report("criteria", Some(cfg), &rep)?,
            })
        }
        Command::Covering { x0, dir, n } => {
            let dir = match dir {
                DirArg::Left => Direction::Left,
                DirArg::Right => Direction::Right,
            };
            let chain = build_d_covering(&pair, *x0, dir, *n, cfg.tolerances.criteria)?;
            let check = verify_covering(&chain, &pair, cfg.tolerances.criteria);
            Outcome::plain(match fmt(Format::Json) {
                Format::Csv => {
                    let rows: Vec<Vec<f64>> = chain
                        .segments
                        .iter()
                        .map(|s| vec![s.index as f64, s.center, s.half_width, s.lo, s.hi, s.mass])
                        .collect();
                    csv_table(&["index", "center", "half_width", "lo", "hi", "mass"], &rows)
                }
                Format::Json => {
                    #[derive(Serialize)]
                    struct Body<'a> {
                        chain: &'a solvq_core::CoveringChain,
                        verification: &'a solvq_core::covering::CoveringReport,
                    }
                    json_report(
                        "covering",
                        Some(cfg),
                        &Body {
                            chain: &chain,
                            verification: &check,
                        },
                    )?
                }
            })
        }
        Command::Solve { forcing, xmin, xmax, n } => {
            if !(xmin < xmax) || *n < 2 {
                return Err(CliError::Usage("solve needs xmin < xmax and n >= 2".into()));
            }
            let f: ForcingFunction = forcing.parse()?;
            let curve = solve_on_grid(&pair, &f, &uniform_grid(*xmin, *xmax, *n), cfg.tolerances.green)?;
            Outcome::plain(match fmt(Format::Csv) {
                Format::Csv => {
                    let rows: Vec<Vec<f64>> = (0..curve.xs.len())
                        .map(|i| vec![curve.xs[i], curve.ys[i], curve.per_point_error[i]])
                        .collect();
                    csv_table(&["x", "y", "err"], &rows)
                }
                Format::Json => json_report("solve", Some(cfg), &curve)?,
            })
        }
        Command::Norms { p, samples, seed } => {
            let bracket = norm_bracket(&pair, *p, *samples, seed.unwrap_or(cfg.seed), cfg.tolerances.green)?;
            Outcome::plain(json_report("norms", Some(cfg), &bracket)?)
        }
        Command::Example8 { .. } => unreachable!("handled without a config"),
    })
}

/// Caps rayon's worker count from `SOLVQ_THREADS`.
fn init_threads() {
    if let Some(n) = std::env::var("SOLVQ_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
    {
        // a pool may already exist when run() is called twice in one process
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
}

/// Parses `argv` (program name first), runs the subcommand and returns the
/// exit code: 0 on success, 1 on errors, 2 under `--strict` when every
/// verdict is Inconclusive.
pub fn run<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    init_threads();
    match execute(&cli).and_then(|(o, path)| emit(&o.text, path.as_deref()).map(|_| o)) {
        Ok(o) => {
            if cli.global.strict && !o.decisions.is_empty() && o.decisions.iter().all(|d| *d == Decision::Inconclusive)
            {
                2
            } else {
                0
            }
        }
        Err(e) => {
            eprintln!("solvq: {e}");
            if matches!(e, CliError::Usage(_)) {
                let mut cmd = <Cli as clap::CommandFactory>::command();
                eprintln!("{}", cmd.render_usage());
            }
            1
        }
    }
}

/// Writes a config echo that [`RunConfig::load`] reads back unchanged.
pub fn write_config(cfg: &RunConfig, path: &Path) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(cfg)?;
    std::fs::write(path, text).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}
