use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use cmm_core::spectra::EigenRow;
use cmm_core::{DMatrix, Termination, TraceRecord};
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{Error, Result};

/// Entries with magnitude below this count as zero in the sparsity figure.
pub const SPARSITY_THRESHOLD: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngIdentity {
    pub generator: String,
    pub seeding: String,
    pub draw_order: String,
}

impl Default for RngIdentity {
    fn default() -> Self {
        Self {
            generator: "ChaCha8Rng (rand_chacha 0.9)".into(),
            seeding: "seed_from_u64(seed); uniform [0,1) from the top 53 bits of next_u64".into(),
            draw_order: "Phi, E, S; column-major".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub config: RunConfig,
    pub rng: RngIdentity,
    pub n_vertices: usize,
    pub converged: bool,
    pub termination: Termination,
    pub iterations: usize,
    pub restarts: usize,
    pub refactorizations: usize,
    pub wall_time: f64,
    pub final_primal: f64,
    pub final_dual: f64,
    pub final_rho: f64,
    pub objective: f64,
    pub eigenvalues: Vec<EigenRow>,
    /// Per-mode mean |W phi + (mu/2) sign(phi) - A Phi Lambda_col| with the
    /// full Lagrange multiplier matrix.
    pub stationarity: Vec<f64>,
    pub sparsity: f64,
    pub orthonormality_error: f64,
    pub init_checksum: u64,
}

impl RunReport {
    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut w = crate::io::create(path)?;
        serde_json::to_writer_pretty(&mut w, self)?;
        writeln!(w)
            .and_then(|_| w.flush())
            .map_err(|e| Error::io(path, e))
    }
}

/// Fraction of entries with `|x| < SPARSITY_THRESHOLD`.
pub fn sparsity(phi: &DMatrix<f64>) -> f64 {
    if phi.is_empty() {
        return 0.0;
    }
    let small = phi.iter().filter(|v| v.abs() < SPARSITY_THRESHOLD).count();
    small as f64 / phi.len() as f64
}

/// One row per vertex, one column per ordered mode.
pub fn write_modes_csv(path: &Path, modes: &DMatrix<f64>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record((1..=modes.ncols()).map(|r| format!("mode_{r}")))?;
    for i in 0..modes.nrows() {
        w.write_record(modes.row(i).iter().map(|v| format!("{v:e}")))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_eigenvalues_csv(path: &Path, rows: &[EigenRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Streams `trace.csv`, flushing every `FLUSH_EVERY` records. Write errors
/// are held until [`TraceWriter::finish`].
pub struct TraceWriter {
    path: PathBuf,
    out: BufWriter<File>,
    pending: usize,
    error: Option<std::io::Error>,
}

impl TraceWriter {
    pub const FLUSH_EVERY: usize = 100;

    pub fn create(path: &Path) -> Result<Self> {
        let mut out = crate::io::create(path)?;
        writeln!(out, "iter,primal,dual,c_k,rho,objective").map_err(|e| Error::io(path, e))?;
        Ok(Self {
            path: path.to_path_buf(),
            out,
            pending: 0,
            error: None,
        })
    }

    pub fn push(&mut self, r: &TraceRecord) {
        if self.error.is_some() {
            return;
        }
        // `{:e}` prints the shortest exact representation
        let res = writeln!(
            self.out,
            "{},{:e},{:e},{:e},{:e},{:e}",
            r.iter, r.primal, r.dual, r.c_k, r.rho, r.objective
        );
        self.pending += 1;
        let res = res.and_then(|_| {
            if self.pending >= Self::FLUSH_EVERY {
                self.pending = 0;
                self.out.flush()
            } else {
                Ok(())
            }
        });
        if let Err(e) = res {
            self.error = Some(e);
        }
    }

    pub fn finish(mut self) -> Result<()> {
        if let Some(e) = self.error.take() {
            return Err(Error::io(&self.path, e));
        }
        self.out.flush().map_err(|e| Error::io(&self.path, e))
    }
}

/// One seed of a comparison: both arms, or the error that stopped them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedPair {
    pub seed: u64,
    pub init_checksum: Option<u64>,
    pub fast: Option<ArmSummary>,
    pub vanilla: Option<ArmSummary>,
    pub error: Option<String>,
}

impl SeedPair {
    /// `100 (1 - fast/vanilla)` in iterations, when both arms finished.
    pub fn iteration_reduction(&self) -> Option<f64> {
        let (f, v) = (self.fast.as_ref()?, self.vanilla.as_ref()?);
        Some(percent_reduction(f.iterations as f64, v.iterations as f64))
    }

    pub fn time_reduction(&self) -> Option<f64> {
        let (f, v) = (self.fast.as_ref()?, self.vanilla.as_ref()?);
        Some(percent_reduction(f.wall_time, v.wall_time))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmSummary {
    pub variant: cmm_core::Variant,
    pub restart_rule: cmm_core::solver::RestartRule,
    pub converged: bool,
    pub iterations: usize,
    pub restarts: usize,
    pub wall_time: f64,
    pub objective: f64,
    pub orthonormality_error: f64,
    pub sparsity: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Reduction {
    pub mean: f64,
    pub median: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub config: RunConfig,
    pub rng: RngIdentity,
    pub pairs: Vec<SeedPair>,
    pub completed: usize,
    pub failed: usize,
    /// Percent reductions of per-seed iteration counts.
    pub iterations: Option<Reduction>,
    pub wall_time: Option<Reduction>,
    pub median_iterations_fast: Option<f64>,
    pub median_iterations_vanilla: Option<f64>,
}

impl ComparisonReport {
    pub fn write(&self, path: &Path) -> Result<()> {
        let mut w = crate::io::create(path)?;
        serde_json::to_writer_pretty(&mut w, self)?;
        writeln!(w)
            .and_then(|_| w.flush())
            .map_err(|e| Error::io(path, e))
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record([
            "seed",
            "fast_iterations",
            "vanilla_iterations",
            "iteration_reduction",
            "fast_time",
            "vanilla_time",
            "error",
        ])?;
        let opt = |v: Option<String>| v.unwrap_or_default();
        for p in &self.pairs {
            w.write_record([
                p.seed.to_string(),
                opt(p.fast.as_ref().map(|a| a.iterations.to_string())),
                opt(p.vanilla.as_ref().map(|a| a.iterations.to_string())),
                opt(p.iteration_reduction().map(|r| format!("{r:.3}"))),
                opt(p.fast.as_ref().map(|a| format!("{:.6}", a.wall_time))),
                opt(p.vanilla.as_ref().map(|a| format!("{:.6}", a.wall_time))),
                opt(p.error.clone()),
            ])?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

pub fn percent_reduction(fast: f64, vanilla: f64) -> f64 {
    if vanilla == 0.0 {
        return 0.0;
    }
    100.0 * (1.0 - fast / vanilla)
}

pub fn mean(values: &[f64]) -> Option<f64> {
    (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
}

pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    })
}
