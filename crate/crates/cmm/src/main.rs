use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use cmm::cmm_core::solver::{InitPolicy, RestartRule, Truncation};
use cmm::cmm_core::{FlipMethod, MassKind, OrderKey, Variant};
use cmm::harness::{self, Arm, ComparePlan};
use cmm::{Error, GeneratorSpec, MeshSource, RunConfig, RunReport};

/// Compressed manifold modes on triangle meshes.
///
/// Without a subcommand, runs one solve and writes modes.csv,
/// eigenvalues.csv, trace.csv and report.json into --out.
#[derive(Parser)]
#[command(name = "cmmode", version, args_conflicts_with_subcommands = true)]
struct Cli {
    #[command(subcommand)]
    command: Option<Command>,
    #[command(flatten)]
    run: RunArgs,
}

#[derive(Subcommand)]
enum Command {
    /// Run the accelerated and plain solvers from shared initializations.
    Compare(CompareArgs),
}

#[derive(Args)]
struct CompareArgs {
    /// Comma-separated seeds; `a..b` expands to a, a+1, ..., b-1.
    #[arg(long, required = true)]
    seeds: String,
    /// Variant of the accelerated arm.
    #[arg(long, value_enum, default_value = "fast_admm")]
    fast_arm: VariantArg,
    /// Variant of the baseline arm.
    #[arg(long, value_enum, default_value = "admm")]
    baseline: VariantArg,
    #[command(flatten)]
    run: RunArgs,
}

#[derive(Args, Default)]
struct RunArgs {
    /// JSON run configuration (or a previous report.json); flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// .off or .obj mesh.
    #[arg(long, conflicts_with = "generate")]
    mesh: Option<PathBuf>,
    /// Procedural mesh: `lshape:m=8` or `sphere:level=2`.
    #[arg(long)]
    generate: Option<String>,
    #[arg(long, allow_negative_numbers = true)]
    mu: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    k: Option<i64>,
    #[arg(long, value_enum)]
    variant: Option<VariantArg>,
    #[arg(long, value_enum)]
    init: Option<InitArg>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    mass: Option<MassArg>,
    #[arg(long, allow_negative_numbers = true)]
    rho0: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    eps_abs: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    eps_rel: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    eta: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    max_iter: Option<i64>,
    #[arg(long, value_enum)]
    restart_rule: Option<RestartArg>,
    #[arg(long, value_enum)]
    order: Option<OrderArg>,
    #[arg(long, value_enum)]
    flip: Option<FlipArg>,
    /// Residual-balancing penalty updates.
    #[arg(long, value_enum)]
    penalty_adapt: Option<Switch>,
    /// Keep rho at least this multiple of the largest Lagrange multiplier
    /// (0 disables).
    #[arg(long, allow_negative_numbers = true)]
    floor_margin: Option<f64>,
    /// Zero entries of Phi below --truncate-tol after this many iterations.
    #[arg(long, requires = "truncate_tol")]
    truncate_after: Option<usize>,
    #[arg(long, requires = "truncate_after", allow_negative_numbers = true)]
    truncate_tol: Option<f64>,
    /// Write modes.ply colored by this mode (1-based rank).
    #[arg(long)]
    ply_mode: Option<usize>,
    /// Write W.mtx and A.mtx.
    #[arg(long)]
    dump_operators: bool,
    #[arg(long, default_value = "cmmode-out")]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
#[value(rename_all = "snake_case")]
enum VariantArg {
    Admm,
    FastAdmm,
}

impl From<VariantArg> for Variant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::Admm => Variant::Admm,
            VariantArg::FastAdmm => Variant::FastAdmm,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum InitArg {
    Random,
    Eigen,
}

#[derive(Clone, Copy, ValueEnum)]
enum MassArg {
    Lumped,
    Unlumped,
}

#[derive(Clone, Copy, ValueEnum)]
enum RestartArg {
    Paper,
    Goldstein,
}

#[derive(Clone, Copy, ValueEnum)]
enum OrderArg {
    Compressed,
    Dirichlet,
}

#[derive(Clone, Copy, ValueEnum)]
enum FlipArg {
    Extremum,
    Integral,
    None,
}

#[derive(Clone, Copy, ValueEnum)]
enum Switch {
    On,
    Off,
}

fn count(flag: &str, v: i64) -> Result<usize, Error> {
    usize::try_from(v).map_err(|_| Error::config(flag, format!("{v}: must be >= 0")))
}

impl RunArgs {
    fn into_config(self) -> Result<(RunConfig, PathBuf), Error> {
        let mesh = match (&self.mesh, &self.generate) {
            (Some(p), _) => Some(MeshSource::File(p.clone())),
            (None, Some(g)) => Some(MeshSource::Generate(g.parse::<GeneratorSpec>()?)),
            (None, None) => None,
        };
        let mut cfg = match (&self.config, mesh) {
            (Some(path), mesh) => {
                let mut c = load_config(path)?;
                if let Some(m) = mesh {
                    c.mesh = m;
                }
                c
            }
            (None, Some(m)) => RunConfig::new(m),
            (None, None) => {
                return Err(Error::config(
                    "--mesh",
                    "one of --mesh or --generate is required",
                ))
            }
        };
        if let Some(m) = self.mass {
            cfg.mass = match m {
                MassArg::Lumped => MassKind::Lumped,
                MassArg::Unlumped => MassKind::Unlumped,
            };
        }
        let s = &mut cfg.solver;
        if let Some(v) = self.mu {
            s.mu = v;
        }
        if let Some(v) = self.k {
            s.k = count("--k", v)?;
        }
        if let Some(v) = self.variant {
            s.variant = v.into();
        }
        if let Some(v) = self.init {
            s.init = match v {
                InitArg::Random => InitPolicy::Random,
                InitArg::Eigen => InitPolicy::Eigen,
            };
        }
        if let Some(v) = self.seed {
            s.seed = v;
        }
        if let Some(v) = self.rho0 {
            s.rho0 = v;
        }
        if let Some(v) = self.eps_abs {
            s.eps_abs = v;
        }
        if let Some(v) = self.eps_rel {
            s.eps_rel = v;
        }
        if let Some(v) = self.eta {
            s.eta = v;
        }
        if let Some(v) = self.max_iter {
            s.max_iter = count("--max-iter", v)?;
        }
        if let Some(v) = self.restart_rule {
            s.restart_rule = match v {
                RestartArg::Paper => RestartRule::Paper,
                RestartArg::Goldstein => RestartRule::Goldstein,
            };
        }
        if let Some(v) = self.order {
            s.order = match v {
                OrderArg::Compressed => OrderKey::Compressed,
                OrderArg::Dirichlet => OrderKey::Dirichlet,
            };
        }
        if let Some(v) = self.flip {
            s.flip = match v {
                FlipArg::Extremum => FlipMethod::Extremum,
                FlipArg::Integral => FlipMethod::Integral,
                FlipArg::None => FlipMethod::None,
            };
        }
        if let Some(v) = self.penalty_adapt {
            s.penalty_adapt.enabled = matches!(v, Switch::On);
        }
        if let Some(v) = self.floor_margin {
            s.penalty_adapt.floor_margin = v;
        }
        if let (Some(after), Some(tolerance)) = (self.truncate_after, self.truncate_tol) {
            s.truncation = Some(Truncation { after, tolerance });
        }
        if self.ply_mode.is_some() {
            cfg.ply_mode = self.ply_mode;
        }
        cfg.dump_operators |= self.dump_operators;
        cfg.validate()?;
        Ok((cfg, self.out))
    }
}

fn load_config(path: &std::path::Path) -> Result<RunConfig, Error> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    let value: serde_json::Value = serde_json::from_str(&text)?;
    // a report.json carries the config under "config"
    let inner = match value.get("config") {
        Some(c) if value.get("rng").is_some() => c.clone(),
        _ => value,
    };
    serde_json::from_value(inner).map_err(|e| Error::config("--config", e.to_string()))
}

fn parse_seeds(text: &str) -> Result<Vec<u64>, Error> {
    let bad =
        |item: &str| Error::config("--seeds", format!("'{item}' is not a seed or a..b range"));
    let mut seeds = Vec::new();
    for item in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        if let Some((a, b)) = item.split_once("..") {
            let a: u64 = a.trim().parse().map_err(|_| bad(item))?;
            let b: u64 = b.trim().parse().map_err(|_| bad(item))?;
            seeds.extend(a..b);
        } else {
            seeds.push(item.parse().map_err(|_| bad(item))?);
        }
    }
    Ok(seeds)
}

fn summarize_run(report: &RunReport) {
    eprintln!(
        "{} after {} iterations ({} restarts, {:.2} s); objective {:.6e}, \
         orthonormality error {:.2e}, sparsity {:.3}",
        if report.converged {
            "converged"
        } else {
            "max_iter reached"
        },
        report.iterations,
        report.restarts,
        report.wall_time,
        report.objective,
        report.orthonormality_error,
        report.sparsity,
    );
    for row in &report.eigenvalues {
        eprintln!(
            "  mode {:>3}: lambda {:.6e}  dirichlet {:.6e}  l1 {:.4}",
            row.rank, row.lambda, row.dirichlet_energy, row.l1_norm
        );
    }
}

fn execute(cli: Cli) -> Result<i32, Error> {
    match cli.command {
        None => {
            let (cfg, out) = cli.run.into_config()?;
            let report = harness::run(&cfg, &out)?;
            summarize_run(&report);
            Ok(harness::exit_code(report.termination))
        }
        Some(Command::Compare(args)) => {
            let seeds = parse_seeds(&args.seeds)?;
            let (cfg, out) = args.run.into_config()?;
            let rule = cfg.solver.restart_rule;
            let plan = ComparePlan {
                fast: Arm {
                    variant: args.fast_arm.into(),
                    restart_rule: rule,
                },
                vanilla: Arm {
                    variant: args.baseline.into(),
                    restart_rule: rule,
                },
            };
            let report = harness::compare(&cfg, &seeds, plan)?;
            let path = harness::write_comparison(&report, &out)?;
            for p in &report.pairs {
                match (&p.fast, &p.vanilla, &p.error) {
                    (Some(f), Some(v), None) => eprintln!(
                        "seed {:>6}: fast {:>6} vanilla {:>6} ({:+.1}%)",
                        p.seed,
                        f.iterations,
                        v.iterations,
                        p.iteration_reduction().unwrap_or(f64::NAN)
                    ),
                    (_, _, err) => eprintln!(
                        "seed {:>6}: failed: {}",
                        p.seed,
                        err.as_deref().unwrap_or("unknown")
                    ),
                }
            }
            if let Some(r) = report.iterations {
                eprintln!(
                    "iteration reduction: mean {:.1}%, median {:.1}% over {} pairs",
                    r.mean, r.median, report.completed
                );
            }
            eprintln!("wrote {}", path.display());
            Ok(if report.completed == 0 { 3 } else { 0 })
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
