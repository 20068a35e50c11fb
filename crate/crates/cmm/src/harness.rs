//! Single runs with file output and paired seed comparisons.

use std::path::{Path, PathBuf};
use std::time::Instant;

use cmm_core::solver::{initialize, objective, RestartRule};
use cmm_core::spectra::stationarity_residual;
use cmm_core::{
    mesh, solve_from, DMatrix, LaplaceOperator, SolveOutput, Termination, TriangleMesh, Variant,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{GeneratorSpec, MeshSource, RunConfig};
use crate::error::{Error, Result};
use crate::io;
use crate::report::{
    mean, median, sparsity, write_eigenvalues_csv, write_modes_csv, ArmSummary, ComparisonReport,
    Reduction, RngIdentity, RunReport, SeedPair, TraceWriter,
};

pub const THREADS_ENV: &str = "CMMODE_THREADS";

pub fn load(source: &MeshSource) -> Result<TriangleMesh> {
    match source {
        MeshSource::File(path) => io::load_mesh(path),
        MeshSource::Generate(GeneratorSpec::LShape { m }) => {
            mesh::generate_lshape(*m).map_err(Error::Mesh)
        }
        MeshSource::Generate(GeneratorSpec::Sphere { level }) => {
            mesh::generate_sphere(*level).map_err(Error::Mesh)
        }
    }
}

/// Loads the mesh and assembles `(W, A)` after validating the config.
pub fn prepare(cfg: &RunConfig) -> Result<(TriangleMesh, LaplaceOperator)> {
    cfg.validate()?;
    let mesh = load(&cfg.mesh)?;
    let op = LaplaceOperator::assemble(&mesh, cfg.mass).map_err(Error::Mesh)?;
    if cfg.solver.k > op.dim() {
        return Err(Error::config(
            "--k",
            format!("{}: exceeds the vertex count {}", cfg.solver.k, op.dim()),
        ));
    }
    Ok((mesh, op))
}

/// `max |Phi^T A Phi - I|`
pub fn orthonormality_error(phi: &DMatrix<f64>, op: &LaplaceOperator) -> f64 {
    let g = op.mass.gram(phi, phi);
    let k = g.nrows();
    (g - DMatrix::identity(k, k)).amax()
}

struct Solved {
    out: SolveOutput,
    wall_time: f64,
    checksum: u64,
}

fn solve_observed(
    op: &LaplaceOperator,
    cfg: &cmm_core::SolveConfig,
    observer: &mut dyn FnMut(&cmm_core::TraceRecord),
) -> Result<Solved> {
    let start = Instant::now();
    let init = initialize(op, cfg).map_err(Error::Solver)?;
    let checksum = init.checksum();
    let out = solve_from(op, cfg, init, observer).map_err(Error::Solver)?;
    Ok(Solved {
        out,
        wall_time: start.elapsed().as_secs_f64(),
        checksum,
    })
}

fn build_report(cfg: &RunConfig, op: &LaplaceOperator, s: &Solved) -> RunReport {
    let out = &s.out;
    let last = out.trace.records.last();
    RunReport {
        config: cfg.clone(),
        rng: RngIdentity::default(),
        n_vertices: op.dim(),
        converged: out.converged(),
        termination: out.termination,
        iterations: out.iterations(),
        restarts: out.trace.restarts(),
        refactorizations: out.refactorizations,
        wall_time: s.wall_time,
        final_primal: last.map_or(f64::NAN, |r| r.primal),
        final_dual: last.map_or(f64::NAN, |r| r.dual),
        final_rho: out.state.rho,
        objective: objective(&out.modes.modes, op, cfg.solver.mu),
        eigenvalues: out.modes.table(),
        stationarity: stationarity_residual(&out.modes.modes, op, cfg.solver.mu),
        sparsity: sparsity(&out.modes.modes),
        orthonormality_error: orthonormality_error(&out.phi, op),
        init_checksum: s.checksum,
    }
}

/// Runs one solve and writes `modes.csv`, `eigenvalues.csv`, `trace.csv`,
/// `report.json` and, if requested, `modes.ply`, `W.mtx`, `A.mtx` into
/// `out_dir`. Non-convergence is reported through
/// [`RunReport::termination`], not as an error.
pub fn run(cfg: &RunConfig, out_dir: &Path) -> Result<RunReport> {
    let (mesh, op) = prepare(cfg)?;
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;

    if cfg.dump_operators {
        for (name, m) in [("W.mtx", &op.weight), ("A.mtx", &op.mass)] {
            let path = out_dir.join(name);
            io::write_matrix_market(io::create(&path)?, m).map_err(|e| Error::io(&path, e))?;
        }
    }

    let mut trace = TraceWriter::create(&out_dir.join("trace.csv"))?;
    let solved = solve_observed(&op, &cfg.solver, &mut |r| trace.push(r));
    trace.finish()?;
    let solved = solved?;

    write_modes_csv(&out_dir.join("modes.csv"), &solved.out.modes.modes)?;
    let report = build_report(cfg, &op, &solved);
    write_eigenvalues_csv(&out_dir.join("eigenvalues.csv"), &report.eigenvalues)?;
    if let Some(rank) = cfg.ply_mode {
        let path = out_dir.join("modes.ply");
        let colors = io::diverging_colors(&solved.out.modes.mode(rank - 1));
        io::write_ply(io::create(&path)?, &mesh, Some(&colors)).map_err(|e| Error::io(&path, e))?;
    }
    report.write(&out_dir.join("report.json"))?;
    Ok(report)
}

/// Solver settings that differ between the two arms of a comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Arm {
    pub variant: Variant,
    pub restart_rule: RestartRule,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComparePlan {
    pub fast: Arm,
    pub vanilla: Arm,
}

impl ComparePlan {
    /// Accelerated variant with the configured restart rule against plain
    /// ADMM.
    pub fn standard(cfg: &RunConfig) -> Self {
        let rule = cfg.solver.restart_rule;
        Self {
            fast: Arm {
                variant: Variant::FastAdmm,
                restart_rule: rule,
            },
            vanilla: Arm {
                variant: Variant::Admm,
                restart_rule: rule,
            },
        }
    }
}

fn run_arm(
    cfg: &RunConfig,
    op: &LaplaceOperator,
    seed: u64,
    arm: Arm,
) -> std::result::Result<(u64, ArmSummary), String> {
    let mut solver = cfg.solver.clone();
    solver.seed = seed;
    solver.variant = arm.variant;
    solver.restart_rule = arm.restart_rule;
    let s = solve_observed(op, &solver, &mut |_| {}).map_err(|e| e.to_string())?;
    let out = &s.out;
    Ok((
        s.checksum,
        ArmSummary {
            variant: arm.variant,
            restart_rule: arm.restart_rule,
            converged: out.converged(),
            iterations: out.iterations(),
            restarts: out.trace.restarts(),
            wall_time: s.wall_time,
            objective: objective(&out.modes.modes, op, solver.mu),
            orthonormality_error: orthonormality_error(&out.phi, op),
            sparsity: sparsity(&out.modes.modes),
        },
    ))
}

fn run_pair(cfg: &RunConfig, op: &LaplaceOperator, seed: u64, plan: ComparePlan) -> SeedPair {
    let mut pair = SeedPair {
        seed,
        init_checksum: None,
        fast: None,
        vanilla: None,
        error: None,
    };
    let fast = run_arm(cfg, op, seed, plan.fast);
    let vanilla = run_arm(cfg, op, seed, plan.vanilla);
    match (fast, vanilla) {
        (Ok((cf, f)), Ok((cv, v))) => {
            if cf != cv {
                pair.error = Some(format!("initial states differ: {cf:016x} vs {cv:016x}"));
            } else {
                pair.init_checksum = Some(cf);
                pair.fast = Some(f);
                pair.vanilla = Some(v);
            }
        }
        (Err(e), _) => pair.error = Some(format!("fast arm: {e}")),
        (_, Err(e)) => pair.error = Some(format!("vanilla arm: {e}")),
    }
    pair
}

/// Thread cap from `CMMODE_THREADS`; unset means rayon's default.
pub fn thread_cap() -> Result<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Err(std::env::VarError::NotPresent) => Ok(None),
        Err(_) => Err(Error::config(THREADS_ENV, "not valid unicode")),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(Some(n)),
            _ => Err(Error::config(
                THREADS_ENV,
                format!("'{v}': must be an integer >= 1"),
            )),
        },
    }
}

/// Runs both arms of `plan` for every seed from the same initial state.
/// Seed pairs run concurrently; a failing pair is recorded and the batch
/// continues. Rows come back in the order of `seeds`.
pub fn compare(cfg: &RunConfig, seeds: &[u64], plan: ComparePlan) -> Result<ComparisonReport> {
    if seeds.len() < 2 {
        return Err(Error::config("--seeds", "at least 2 seeds are required"));
    }
    let (_, op) = prepare(cfg)?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = thread_cap()? {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::config(THREADS_ENV, e.to_string()))?;
    let pairs: Vec<SeedPair> = pool.install(|| {
        seeds
            .par_iter()
            .map(|&seed| run_pair(cfg, &op, seed, plan))
            .collect()
    });
    Ok(summarize(cfg, pairs))
}

fn summarize(cfg: &RunConfig, pairs: Vec<SeedPair>) -> ComparisonReport {
    let iters: Vec<f64> = pairs
        .iter()
        .filter_map(SeedPair::iteration_reduction)
        .collect();
    let times: Vec<f64> = pairs.iter().filter_map(SeedPair::time_reduction).collect();
    let reduce = |v: &[f64]| {
        Some(Reduction {
            mean: mean(v)?,
            median: median(v)?,
        })
    };
    let arm_iters = |pick: fn(&SeedPair) -> Option<&ArmSummary>| {
        let v: Vec<f64> = pairs
            .iter()
            .filter(|p| p.error.is_none())
            .filter_map(|p| pick(p).map(|a| a.iterations as f64))
            .collect();
        median(&v)
    };
    let completed = pairs.iter().filter(|p| p.error.is_none()).count();
    ComparisonReport {
        config: cfg.clone(),
        rng: RngIdentity::default(),
        completed,
        failed: pairs.len() - completed,
        iterations: reduce(&iters),
        wall_time: reduce(&times),
        median_iterations_fast: arm_iters(|p| p.fast.as_ref()),
        median_iterations_vanilla: arm_iters(|p| p.vanilla.as_ref()),
        pairs,
    }
}

/// Writes `comparison.json` and `comparison.csv` into `out_dir`.
pub fn write_comparison(report: &ComparisonReport, out_dir: &Path) -> Result<PathBuf> {
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let json = out_dir.join("comparison.json");
    report.write(&json)?;
    report.write_csv(&out_dir.join("comparison.csv"))?;
    Ok(json)
}

/// 0 on convergence, 4 when the iteration cap was reached.
pub fn exit_code(termination: Termination) -> i32 {
    match termination {
        Termination::Converged => 0,
        Termination::MaxIterReached => 4,
    }
}
