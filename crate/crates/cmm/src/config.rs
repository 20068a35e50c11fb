use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use cmm_core::{MassKind, SolveConfig};
use serde::{Deserialize, Serialize};

use crate::error::Error;

/// Procedural mesh in `name:key=value` form, e.g. `lshape:m=8` or
/// `sphere:level=2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GeneratorSpec {
    LShape { m: usize },
    Sphere { level: u32 },
}

impl FromStr for GeneratorSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        let bad = |reason: String| Error::config("--generate", format!("'{s}': {reason}"));
        let (name, args) = s.split_once(':').unwrap_or((s, ""));
        let mut params = Vec::new();
        for kv in args.split(',').filter(|a| !a.is_empty()) {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| bad(format!("expected key=value, got '{kv}'")))?;
            params.push((k.trim(), v.trim()));
        }
        let single = |key: &str| -> Result<&str, Error> {
            match params.as_slice() {
                [(k, v)] if *k == key => Ok(*v),
                [] => Err(bad(format!("missing {key}="))),
                _ => Err(bad(format!("only {key}= is accepted"))),
            }
        };
        match name.trim() {
            "lshape" => {
                let v = single("m")?;
                let m = v
                    .parse()
                    .map_err(|_| bad(format!("m must be a positive integer, got '{v}'")))?;
                if m == 0 {
                    return Err(bad("m must be >= 1".into()));
                }
                Ok(GeneratorSpec::LShape { m })
            }
            "sphere" => {
                let v = single("level")?;
                let level = v
                    .parse()
                    .map_err(|_| bad(format!("level must be an integer >= 0, got '{v}'")))?;
                Ok(GeneratorSpec::Sphere { level })
            }
            other => Err(bad(format!("unknown generator '{other}' (lshape, sphere)"))),
        }
    }
}

impl fmt::Display for GeneratorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GeneratorSpec::LShape { m } => write!(f, "lshape:m={m}"),
            GeneratorSpec::Sphere { level } => write!(f, "sphere:level={level}"),
        }
    }
}

impl Serialize for GeneratorSpec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for GeneratorSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeshSource {
    File(PathBuf),
    Generate(GeneratorSpec),
}

impl fmt::Display for MeshSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MeshSource::File(p) => write!(f, "{}", p.display()),
            MeshSource::Generate(g) => write!(f, "{g}"),
        }
    }
}

/// Everything needed to reproduce one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub mesh: MeshSource,
    #[serde(default)]
    pub mass: MassKind,
    #[serde(default)]
    pub solver: SolveConfig,
    /// 1-based rank of the mode written to `modes.ply`.
    #[serde(default)]
    pub ply_mode: Option<usize>,
    /// Also write `W.mtx` and `A.mtx`.
    #[serde(default)]
    pub dump_operators: bool,
}

impl RunConfig {
    pub fn new(mesh: MeshSource) -> Self {
        Self {
            mesh,
            mass: MassKind::default(),
            solver: SolveConfig::default(),
            ply_mode: None,
            dump_operators: false,
        }
    }

    /// Checks the solver settings and reports the offending flag and value.
    pub fn validate(&self) -> Result<(), Error> {
        if let Err(err) = self.solver.validate() {
            return Err(self.describe(err));
        }
        if let Some(r) = self.ply_mode {
            if r == 0 || r > self.solver.k {
                return Err(Error::config(
                    "--ply-mode",
                    format!("{r}: must lie in 1..={}", self.solver.k),
                ));
            }
        }
        Ok(())
    }

    fn describe(&self, err: cmm_core::CmmError) -> Error {
        let cmm_core::CmmError::Config { field, reason } = err else {
            return Error::Solver(err);
        };
        let value = serde_json::to_value(&self.solver)
            .ok()
            .and_then(|v| field.split('.').try_fold(v, |v, key| v.get(key).cloned()));
        let flag = crate::error::flag_name(field);
        match value {
            Some(v) => Error::config(flag, format!("{v}: {reason}")),
            None => Error::config(flag, reason),
        }
    }
}
