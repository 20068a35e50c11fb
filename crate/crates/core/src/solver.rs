//! Baseline ADMM for
//!
//! ```text
//! min  Tr(Phi^T W Phi) + mu ||Phi||_1   s.t.  Phi^T A Phi = I
//! ```
//!
//! split three ways as `iota(Phi) + Tr(E^T W E) + mu ||S||_1` with the
//! consensus constraints `Phi = E`, `Phi = S`. All quadratic penalties are
//! measured in the mass inner product `<X, Y>_A = Tr(X^T A Y)`, so the
//! orthonormality step has the closed form `Y (Y^T A Y)^{-1/2}` and the
//! fixed points are stationary points of the constrained problem.
//!
//! The metric is normalized by the mean vertex mass `a_bar = sum(A) / n`, so
//! a penalty `rho` acts as `rho / a_bar` on `A` and the sub-steps coincide
//! with their Euclidean forms when `A = a_bar I`.
//!
//! Scaled duals enter the penalties as `||Phi - E - dual_E||_A^2` and are
//! updated as `dual_E += E - Phi` (likewise for `S`).

use alloc::vec::Vec;

use nalgebra::DMatrix;
use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::cholesky::EnvelopeCholesky;
use crate::eigen::symmetric_eigen;
use crate::error::{CmmError, Result};
use crate::operators::{generalized_eigs, LaplaceOperator, DENSE_EIG_CAP};
use crate::sparse::SparseSymmetric;
use crate::spectra::{lagrangian_readout, FlipMethod, OrderKey};

/// Gram eigenvalues at or below this make the projection fail.
pub const RANK_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Admm,
    #[default]
    FastAdmm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitPolicy {
    /// I.i.d. uniform `[0, 1)` entries for `Phi`, `E` and `S`.
    #[default]
    Random,
    /// First `K` generalized eigenvectors of `(W, A)`.
    Eigen,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RestartRule {
    /// Reset momentum when `c_k < eta * c_{k-1}`.
    #[default]
    Paper,
    /// Accelerate while `c_k < eta * c_{k-1}`; otherwise reset momentum, fall
    /// back to the previous iterate as the shadow and set `c_k = c_{k-1}/eta`.
    Goldstein,
}

/// Residual-balancing penalty update with a spectral floor.
///
/// The iteration only has a fixed point when the effective penalty exceeds
/// the largest Lagrange multiplier of the current modes, so rho is kept at
/// or above `floor_margin` times the top eigenvalue of the readout
/// `Phi^T W Phi + (mu/2) Phi^T sign(Phi)` (in normalized units).
/// `floor_margin = 0` disables the floor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PenaltyAdapt {
    pub enabled: bool,
    /// multiplicative step for rho
    pub tau: f64,
    /// imbalance between residuals that triggers a change
    pub ratio: f64,
    /// stop adapting after this many iterations
    pub freeze_after: Option<usize>,
    pub floor_margin: f64,
}

impl Default for PenaltyAdapt {
    fn default() -> Self {
        Self {
            enabled: true,
            tau: 2.0,
            ratio: 10.0,
            freeze_after: None,
            floor_margin: 2.0,
        }
    }
}

/// Zero small entries of `Phi` after `after` iterations and restart from it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Truncation {
    pub after: usize,
    pub tolerance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolveConfig {
    pub mu: f64,
    pub k: usize,
    pub rho0: f64,
    pub eps_abs: f64,
    pub eps_rel: f64,
    pub eta: f64,
    pub max_iter: usize,
    pub init: InitPolicy,
    pub seed: u64,
    pub variant: Variant,
    pub restart_rule: RestartRule,
    pub penalty_adapt: PenaltyAdapt,
    pub truncation: Option<Truncation>,
    pub order: OrderKey,
    pub flip: FlipMethod,
    pub dense_eig_cap: usize,
}

impl Default for SolveConfig {
    fn default() -> Self {
        Self {
            mu: 0.0,
            k: 6,
            rho0: 1.0,
            eps_abs: 1e-8,
            eps_rel: 1e-6,
            eta: 0.999,
            max_iter: 50_000,
            init: InitPolicy::Random,
            seed: 0,
            variant: Variant::FastAdmm,
            restart_rule: RestartRule::Paper,
            penalty_adapt: PenaltyAdapt::default(),
            truncation: None,
            order: OrderKey::Compressed,
            flip: FlipMethod::Extremum,
            dense_eig_cap: DENSE_EIG_CAP,
        }
    }
}

impl SolveConfig {
    pub fn validate(&self) -> Result<()> {
        fn bad(field: &'static str, reason: &str) -> Result<()> {
            Err(CmmError::Config {
                field,
                reason: reason.into(),
            })
        }
        if !(self.mu >= 0.0 && self.mu.is_finite()) {
            return bad("mu", "must be a finite value >= 0");
        }
        if self.k == 0 {
            return bad("k", "must be >= 1");
        }
        if !(self.rho0 > 0.0 && self.rho0.is_finite()) {
            return bad("rho0", "must be > 0");
        }
        if !(self.eps_abs >= 0.0) {
            return bad("eps_abs", "must be >= 0");
        }
        if !(self.eps_rel >= 0.0) {
            return bad("eps_rel", "must be >= 0");
        }
        if !(self.eta > 0.0 && self.eta < 1.0) {
            return bad("eta", "must lie in (0, 1)");
        }
        if self.max_iter == 0 {
            return bad("max_iter", "must be >= 1");
        }
        let p = &self.penalty_adapt;
        if !(p.tau > 1.0) {
            return bad("penalty_adapt.tau", "must be > 1");
        }
        if !(p.ratio > 1.0) {
            return bad("penalty_adapt.ratio", "must be > 1");
        }
        if !(p.floor_margin >= 0.0 && p.floor_margin.is_finite()) {
            return bad("penalty_adapt.floor_margin", "must be a finite value >= 0");
        }
        if let Some(t) = &self.truncation {
            if !(t.tolerance >= 0.0) {
                return bad("truncation.tolerance", "must be >= 0");
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResidualRecord {
    pub primal: f64,
    pub dual: f64,
    pub combined: f64,
}

/// Iterates of one ADMM run. All blocks are `N x K`.
#[derive(Debug, Clone, PartialEq)]
pub struct AdmmState {
    pub phi: DMatrix<f64>,
    pub e: DMatrix<f64>,
    pub s: DMatrix<f64>,
    pub dual_e: DMatrix<f64>,
    pub dual_s: DMatrix<f64>,
    pub rho: f64,
    pub iter: usize,
    pub residual_history: Vec<ResidualRecord>,
}

impl AdmmState {
    pub fn zeros(n: usize, k: usize, rho: f64) -> Self {
        let z = DMatrix::zeros(n, k);
        Self {
            phi: z.clone(),
            e: z.clone(),
            s: z.clone(),
            dual_e: z.clone(),
            dual_s: z,
            rho,
            iter: 0,
            residual_history: Vec::new(),
        }
    }

    /// FNV-1a over the bit patterns of `Phi`, `E`, `S` and the duals.
    pub fn checksum(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for m in [&self.phi, &self.e, &self.s, &self.dual_e, &self.dual_s] {
            for v in m.iter() {
                for b in v.to_bits().to_le_bytes() {
                    h ^= b as u64;
                    h = h.wrapping_mul(0x0000_0100_0000_01b3);
                }
            }
        }
        h
    }
}

/// `Tr(Phi^T W Phi) + mu * sum |Phi_ij|`.
pub fn objective(phi: &DMatrix<f64>, op: &LaplaceOperator, mu: f64) -> f64 {
    let dirichlet: f64 = op.weight.column_forms(phi, phi).iter().sum();
    dirichlet + mu * l1_norm(phi)
}

pub fn l1_norm(m: &DMatrix<f64>) -> f64 {
    m.iter().map(|v| v.abs()).sum()
}

/// Soft threshold `sign(z) max(|z| - t, 0)`, the minimizer of
/// `t |s| + (s - z)^2 / 2`.
pub fn shrink_scalar(z: f64, t: f64) -> f64 {
    if z > t {
        z - t
    } else if z < -t {
        z + t
    } else {
        0.0
    }
}

pub fn shrink(z: &DMatrix<f64>, t: f64) -> DMatrix<f64> {
    z.map(|v| shrink_scalar(v, t))
}

/// Row-wise soft threshold with threshold `t[i]` for row `i`.
pub fn shrink_rows(z: &DMatrix<f64>, t: &[f64]) -> DMatrix<f64> {
    DMatrix::from_fn(z.nrows(), z.ncols(), |i, j| shrink_scalar(z[(i, j)], t[i]))
}

/// `Y V Sigma^{-1/2} V^T` where `Y^T A Y = V Sigma V^T`; the result is
/// A-orthonormal and is the A-metric nearest such matrix to `Y`.
pub fn project_a_orthonormal(y: &DMatrix<f64>, a: &SparseSymmetric) -> Result<DMatrix<f64>> {
    if y.nrows() != a.dim() {
        return Err(CmmError::Shape(alloc::format!(
            "{} rows against a {}x{} mass matrix",
            y.nrows(),
            a.dim(),
            a.dim()
        )));
    }
    let (sigma, v) = symmetric_eigen(&a.gram(y, y));
    let smallest = sigma.first().copied().unwrap_or(f64::INFINITY);
    if !(smallest > RANK_TOLERANCE) {
        return Err(CmmError::RankDeficient(smallest));
    }
    let inv_sqrt = DMatrix::from_fn(sigma.len(), sigma.len(), |i, j| {
        if i == j {
            1.0 / libm::sqrt(sigma[i])
        } else {
            0.0
        }
    });
    Ok(y * (&v * inv_sqrt * v.transpose()))
}

/// Cached factorization of `2W + rho A`, rebuilt when rho changes.
#[derive(Debug, Clone, Default)]
pub struct FactorCache {
    entry: Option<(f64, EnvelopeCholesky)>,
    refactorizations: usize,
}

impl FactorCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn refactorizations(&self) -> usize {
        self.refactorizations
    }

    pub fn invalidate(&mut self) {
        self.entry = None;
    }

    fn get(&mut self, op: &LaplaceOperator, rho: f64) -> Result<&EnvelopeCholesky> {
        let stale = !matches!(&self.entry, Some((r, _)) if *r == rho);
        if stale {
            let system = op.weight.linear_combination(2.0, &op.mass, rho)?;
            let chol = EnvelopeCholesky::factor(&system)
                .map_err(|e| CmmError::Factorization(alloc::format!("rho = {rho}: {e}")))?;
            self.entry = Some((rho, chol));
            self.refactorizations += 1;
        }
        Ok(&self.entry.as_ref().expect("filled above").1)
    }
}

/// `argmin_E Tr(E^T W E) + (rho/2) ||Phi - E - dual_E||_A^2`, i.e. the
/// solution of `(2W + rho A) E = rho A (Phi - dual_E)`.
pub fn update_e(
    phi: &DMatrix<f64>,
    dual_e: &DMatrix<f64>,
    op: &LaplaceOperator,
    rho: f64,
    cache: &mut FactorCache,
) -> Result<DMatrix<f64>> {
    if !(rho > 0.0) {
        return Err(CmmError::Factorization(alloc::format!(
            "rho = {rho} is not positive"
        )));
    }
    let rhs = op.mass.mul_mat(&(phi - dual_e)) * rho;
    Ok(cache.get(op, rho)?.solve_mat(&rhs))
}

/// Proximal map of `mu ||S||_1` in the mass metric:
/// `argmin_S mu ||S||_1 + (rho/2) ||S - Z||_A^2`.
#[derive(Debug, Clone)]
pub enum SparsityProx {
    /// Diagonal mass: row-wise soft threshold `mu / (rho a_ii)`.
    Diagonal(Vec<f64>),
    /// Galerkin mass: proximal gradient preconditioned by the lumped
    /// diagonal `D`, which dominates `A`.
    Galerkin {
        mass: SparseSymmetric,
        lumped: Vec<f64>,
        max_inner: usize,
        tolerance: f64,
    },
}

impl SparsityProx {
    pub fn new(mass: &SparseSymmetric) -> Self {
        if mass.is_diagonal() {
            Self::Diagonal(mass.diagonal())
        } else {
            Self::Galerkin {
                mass: mass.clone(),
                lumped: mass.row_sums(),
                max_inner: 2000,
                tolerance: 1e-13,
            }
        }
    }

    /// `warm` seeds the inner iteration for the Galerkin case.
    pub fn apply(&self, z: &DMatrix<f64>, warm: &DMatrix<f64>, mu: f64, rho: f64) -> DMatrix<f64> {
        match self {
            Self::Diagonal(d) => {
                let t: Vec<f64> = d.iter().map(|&a| mu / (rho * a)).collect();
                shrink_rows(z, &t)
            }
            Self::Galerkin {
                mass,
                lumped,
                max_inner,
                tolerance,
            } => {
                let t: Vec<f64> = lumped.iter().map(|&a| mu / (rho * a)).collect();
                let mut s = warm.clone();
                for _ in 0..*max_inner {
                    let grad = mass.mul_mat(&(&s - z));
                    let step = DMatrix::from_fn(s.nrows(), s.ncols(), |i, j| {
                        s[(i, j)] - grad[(i, j)] / lumped[i]
                    });
                    let next = shrink_rows(&step, &t);
                    let change = (&next - &s).amax();
                    let scale = next.amax().max(z.amax()).max(1.0);
                    s = next;
                    if change <= tolerance * scale {
                        break;
                    }
                }
                s
            }
        }
    }
}

/// Problem-level workspace shared by the plain and accelerated iterations.
#[derive(Debug, Clone)]
pub struct Workspace {
    pub factor: FactorCache,
    pub prox: SparsityProx,
    /// `1 / a_bar`
    pub metric_scale: f64,
}

impl Workspace {
    pub fn new(op: &LaplaceOperator) -> Self {
        let total: f64 = op.mass.row_sums().iter().sum();
        let metric_scale = if total > 0.0 {
            op.dim() as f64 / total
        } else {
            1.0
        };
        Self {
            factor: FactorCache::new(),
            prox: SparsityProx::new(&op.mass),
            metric_scale,
        }
    }
}

/// Iterates produced by one pass of the three sub-steps and the dual update.
#[derive(Debug, Clone)]
pub(crate) struct Cycle {
    pub phi: DMatrix<f64>,
    pub e: DMatrix<f64>,
    pub s: DMatrix<f64>,
    pub dual_e: DMatrix<f64>,
    pub dual_s: DMatrix<f64>,
}

/// One sweep `Phi -> E -> S -> duals` starting from the given (possibly
/// over-relaxed) `E`, `S` and duals.
#[allow(clippy::too_many_arguments)]
pub(crate) fn cycle(
    op: &LaplaceOperator,
    mu: f64,
    rho: f64,
    e_in: &DMatrix<f64>,
    s_in: &DMatrix<f64>,
    dual_e_in: &DMatrix<f64>,
    dual_s_in: &DMatrix<f64>,
    ws: &mut Workspace,
) -> Result<Cycle> {
    let target = (e_in + dual_e_in + s_in + dual_s_in) * 0.5;
    let phi = project_a_orthonormal(&target, &op.mass)?;
    let rho_a = rho * ws.metric_scale;
    let e = update_e(&phi, dual_e_in, op, rho_a, &mut ws.factor)?;
    let s = ws.prox.apply(&(&phi - dual_s_in), s_in, mu, rho_a);
    let dual_e = dual_e_in + &e - &phi;
    let dual_s = dual_s_in + &s - &phi;
    Ok(Cycle {
        phi,
        e,
        s,
        dual_e,
        dual_s,
    })
}

/// Frobenius norms `||[Phi - E; Phi - S]||` and
/// `rho ||(E - E_prev) + (S - S_prev)||`.
pub fn residuals(prev: &AdmmState, state: &AdmmState, rho: f64) -> (f64, f64) {
    residual_norms(&state.phi, &state.e, &state.s, &prev.e, &prev.s, rho)
}

pub(crate) fn residual_norms(
    phi: &DMatrix<f64>,
    e: &DMatrix<f64>,
    s: &DMatrix<f64>,
    e_prev: &DMatrix<f64>,
    s_prev: &DMatrix<f64>,
    rho: f64,
) -> (f64, f64) {
    let r_e = (phi - e).norm_squared();
    let r_s = (phi - s).norm_squared();
    let primal = libm::sqrt(r_e + r_s);
    let dual = rho * ((e - e_prev) + (s - s_prev)).norm();
    (primal, dual)
}

/// `(eps_pri, eps_dual)` for `n` vertices.
pub fn stopping_tolerances(
    n: usize,
    eps_abs: f64,
    eps_rel: f64,
    phi_norm: f64,
    e_norm: f64,
    s_norm: f64,
    dual_norm: f64,
) -> (f64, f64) {
    let n = n as f64;
    let pri = libm::sqrt(2.0 * n) * eps_abs
        + eps_rel * phi_norm.max(libm::sqrt(e_norm * e_norm + s_norm * s_norm));
    let dual = libm::sqrt(n) * eps_abs + eps_rel * dual_norm;
    (pri, dual)
}

/// Both residuals of the latest record within their tolerances.
pub fn check_stop(state: &AdmmState, cfg: &SolveConfig, n: usize) -> bool {
    let Some(last) = state.residual_history.last() else {
        return false;
    };
    let dual_norm = libm::sqrt(state.dual_e.norm_squared() + state.dual_s.norm_squared());
    let (pri, dual) = stopping_tolerances(
        n,
        cfg.eps_abs,
        cfg.eps_rel,
        state.phi.norm(),
        state.e.norm(),
        state.s.norm(),
        dual_norm,
    );
    last.primal <= pri && last.dual <= dual
}

/// Residual balancing: returns the factor applied to the scaled duals
/// (`0.5` when rho doubled, `2` when it halved), or `None`.
pub fn adapt_penalty(
    state: &mut AdmmState,
    primal: f64,
    dual: f64,
    adapt: &PenaltyAdapt,
) -> Option<f64> {
    let scale = if primal > adapt.ratio * dual {
        state.rho *= adapt.tau;
        1.0 / adapt.tau
    } else if dual > adapt.ratio * primal {
        state.rho /= adapt.tau;
        adapt.tau
    } else {
        return None;
    };
    state.dual_e *= scale;
    state.dual_s *= scale;
    Some(scale)
}

/// Uniform `[0, 1)` from the top 53 bits of a 64-bit draw.
pub(crate) fn uniform01(rng: &mut impl RngCore) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Seeded random or eigenfunction start; duals are zero.
pub fn initialize(op: &LaplaceOperator, cfg: &SolveConfig) -> Result<AdmmState> {
    cfg.validate()?;
    let n = op.dim();
    if cfg.k > n {
        return Err(CmmError::Config {
            field: "k",
            reason: alloc::format!("{} modes requested on {n} vertices", cfg.k),
        });
    }
    let mut state = AdmmState::zeros(n, cfg.k, cfg.rho0);
    match cfg.init {
        InitPolicy::Random => {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(cfg.seed);
            let fill = || DMatrix::<f64>::zeros(n, cfg.k);
            let (mut phi, mut e, mut s) = (fill(), fill(), fill());
            for m in [&mut phi, &mut e, &mut s] {
                for v in m.iter_mut() {
                    *v = uniform01(&mut rng);
                }
            }
            state.phi = project_a_orthonormal(&phi, &op.mass)?;
            state.e = e;
            state.s = s;
        }
        InitPolicy::Eigen => {
            let (_, vecs) = generalized_eigs(&op.weight, &op.mass, cfg.k, cfg.dense_eig_cap)?;
            state.phi = vecs.clone();
            state.e = vecs.clone();
            state.s = vecs;
        }
    }
    Ok(state)
}

/// One unaccelerated iteration: sub-steps, duals, residuals and (if
/// enabled) penalty adaptation. Returns the new residual record.
pub fn admm_step(
    state: &mut AdmmState,
    op: &LaplaceOperator,
    cfg: &SolveConfig,
    ws: &mut Workspace,
) -> Result<ResidualRecord> {
    let rho = state.rho;
    let c = cycle(
        op,
        cfg.mu,
        rho,
        &state.e,
        &state.s,
        &state.dual_e,
        &state.dual_s,
        ws,
    )?;
    let (primal, dual) = residual_norms(&c.phi, &c.e, &c.s, &state.e, &state.s, rho);
    let combined = rho
        * ((&c.dual_e - &state.dual_e).norm_squared()
            + (&c.dual_s - &state.dual_s).norm_squared()
            + (&c.e - &state.e).norm_squared()
            + (&c.s - &state.s).norm_squared());
    state.phi = c.phi;
    state.e = c.e;
    state.s = c.s;
    state.dual_e = c.dual_e;
    state.dual_s = c.dual_s;
    state.iter += 1;
    let record = ResidualRecord {
        primal,
        dual,
        combined,
    };
    state.residual_history.push(record);
    Ok(record)
}

/// Adapts rho after an iteration unless the config disables it or the
/// freeze point has passed.
pub(crate) fn maybe_adapt(
    state: &mut AdmmState,
    op: &LaplaceOperator,
    cfg: &SolveConfig,
    ws: &mut Workspace,
) -> Option<f64> {
    let p = &cfg.penalty_adapt;
    if !p.enabled || p.freeze_after.is_some_and(|f| state.iter > f) {
        return None;
    }
    let last = *state.residual_history.last()?;
    let floor = penalty_floor(state, op, cfg, ws);
    let rho_before = state.rho;
    let lowering = last.dual > p.ratio * last.primal;
    let mut scale = 1.0;
    if !lowering || state.rho / p.tau >= floor {
        scale = adapt_penalty(state, last.primal, last.dual, p).unwrap_or(1.0);
    }
    scale *= raise_to(state, floor, p.tau);
    if state.rho == rho_before {
        return None;
    }
    ws.factor.invalidate();
    Some(scale)
}

/// Applies the spectral floor alone, e.g. before the first iteration.
pub(crate) fn enforce_floor(
    state: &mut AdmmState,
    op: &LaplaceOperator,
    cfg: &SolveConfig,
    ws: &mut Workspace,
) -> Option<f64> {
    if !cfg.penalty_adapt.enabled {
        return None;
    }
    let floor = penalty_floor(state, op, cfg, ws);
    let scale = raise_to(state, floor, cfg.penalty_adapt.tau);
    if scale == 1.0 {
        return None;
    }
    ws.factor.invalidate();
    Some(scale)
}

fn penalty_floor(
    state: &AdmmState,
    op: &LaplaceOperator,
    cfg: &SolveConfig,
    ws: &Workspace,
) -> f64 {
    let margin = cfg.penalty_adapt.floor_margin;
    if margin > 0.0 {
        margin * top_multiplier(&state.phi, op, cfg.mu) / ws.metric_scale
    } else {
        0.0
    }
}

/// Multiplies rho by `tau` until it reaches `floor`; returns the dual scale.
fn raise_to(state: &mut AdmmState, floor: f64, tau: f64) -> f64 {
    let mut scale = 1.0;
    while state.rho < floor {
        state.rho *= tau;
        state.dual_e /= tau;
        state.dual_s /= tau;
        scale /= tau;
    }
    scale
}

/// Largest eigenvalue of the symmetrized Lagrangian readout of `phi`.
fn top_multiplier(phi: &DMatrix<f64>, op: &LaplaceOperator, mu: f64) -> f64 {
    let lambda = lagrangian_readout(phi, &op.weight, mu);
    let (values, _) = symmetric_eigen(&lambda);
    values.last().copied().unwrap_or(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{generate_lshape, generate_sphere};
    use crate::operators::MassKind;
    use alloc::vec;

    fn scalar_op(w: f64, a: f64) -> LaplaceOperator {
        LaplaceOperator {
            weight: SparseSymmetric::from_diagonal(&[w]),
            mass: SparseSymmetric::from_diagonal(&[a]),
            mass_kind: MassKind::Lumped,
        }
    }

    #[test]
    fn shrink_examples() {
        assert!((shrink_scalar(0.5, 0.2) - 0.3).abs() < 1e-15);
        assert_eq!(shrink_scalar(-0.1, 0.2), 0.0);
        assert!((shrink_scalar(-0.7, 0.2) + 0.5).abs() < 1e-15);
        assert_eq!(shrink_scalar(0.3, 0.0), 0.3);
    }

    #[test]
    fn objective_examples() {
        let op = scalar_op(2.0, 1.0);
        assert_eq!(objective(&DMatrix::zeros(1, 1), &op, 4.0), 0.0);
        assert_eq!(objective(&DMatrix::from_element(1, 1, 3.0), &op, 4.0), 30.0);
    }

    #[test]
    fn update_e_examples() {
        let op = scalar_op(1.0, 1.0);
        let mut cache = FactorCache::new();
        let phi = DMatrix::from_element(1, 1, 3.5);
        let dual = DMatrix::from_element(1, 1, 0.5);
        let e = update_e(&phi, &dual, &op, 2.0, &mut cache).unwrap();
        assert!((e[(0, 0)] - 1.5).abs() < 1e-15);
        // cache reuse vs. refactorization
        update_e(&phi, &dual, &op, 2.0, &mut cache).unwrap();
        assert_eq!(cache.refactorizations(), 1);
        update_e(&phi, &dual, &op, 4.0, &mut cache).unwrap();
        assert_eq!(cache.refactorizations(), 2);
        assert!(update_e(&phi, &dual, &op, 0.0, &mut cache).is_err());

        // W = 0 reduces to Phi - dual
        let mesh = generate_lshape(2).unwrap();
        let mut op = LaplaceOperator::assemble(&mesh, MassKind::Unlumped).unwrap();
        op.weight = SparseSymmetric::from_diagonal(&vec![0.0; mesh.n_vertices()]);
        let phi = DMatrix::from_fn(mesh.n_vertices(), 3, |i, j| (i * 3 + j) as f64 * 0.1);
        let dual = DMatrix::from_fn(mesh.n_vertices(), 3, |i, j| (i + j) as f64 * 0.01);
        let e = update_e(&phi, &dual, &op, 3.0, &mut FactorCache::new()).unwrap();
        assert!((e - (&phi - &dual)).amax() < 1e-12);
    }

    #[test]
    fn projection_examples() {
        let a = SparseSymmetric::from_diagonal(&[1.0; 3]);
        let y = DMatrix::from_row_slice(3, 2, &[1.0, 1.0, 1.0, -1.0, 0.0, 0.0]);
        let phi = project_a_orthonormal(&y, &a).unwrap();
        assert!((&phi - &y / libm::sqrt(2.0)).amax() < 1e-15);

        let mesh = generate_sphere(1).unwrap();
        let op = LaplaceOperator::assemble(&mesh, MassKind::Unlumped).unwrap();
        let (_, q) = generalized_eigs(&op.weight, &op.mass, 4, DENSE_EIG_CAP).unwrap();
        assert!((project_a_orthonormal(&q, &op.mass).unwrap() - &q).amax() < 1e-12);
        assert!((project_a_orthonormal(&(&q * 2.0), &op.mass).unwrap() - &q).amax() < 1e-12);

        let collinear = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 1.0, 2.0, 0.0, 0.0]);
        assert!(matches!(
            project_a_orthonormal(&collinear, &a),
            Err(CmmError::RankDeficient(_))
        ));
    }

    #[test]
    fn residual_examples() {
        let n = 4;
        let k = 2;
        let mut st = AdmmState::zeros(n, k, 1.0);
        st.phi = DMatrix::from_element(n, k, 1.0);
        st.e = st.phi.clone();
        st.s = st.phi.clone();
        assert_eq!(residuals(&st, &st, 3.0), (0.0, 0.0));

        let prev = st.clone();
        let mut cur = st.clone();
        cur.e = &cur.phi - DMatrix::from_element(n, k, 1.0);
        let mut prev2 = prev.clone();
        prev2.e = cur.e.clone();
        let (p, d) = residuals(&prev2, &cur, 3.0);
        assert!((p - libm::sqrt((n * k) as f64)).abs() < 1e-15);
        assert_eq!(d, 0.0);

        // E - E_prev = S_prev - S cancels
        let mut cur = st.clone();
        cur.e.add_scalar_mut(0.5);
        cur.s.add_scalar_mut(-0.5);
        assert_eq!(residuals(&st, &cur, 2.0).1, 0.0);
    }

    #[test]
    fn stopping_formula() {
        let (pri, dual) = stopping_tolerances(100, 1e-8, 1e-6, 1.0, 1.0, 1.0, 2.0);
        let expect_pri = libm::sqrt(200.0) * 1e-8 + 1e-6 * libm::sqrt(2.0);
        assert!((pri - expect_pri).abs() < 1e-18);
        assert!((pri - 1.5556e-6).abs() < 1e-9);
        assert!((dual - 2.1e-6).abs() < 1e-18);
    }

    #[test]
    fn check_stop_conjunction() {
        let cfg = SolveConfig::default();
        let mut st = AdmmState::zeros(3, 1, 1.0);
        assert!(!check_stop(&st, &cfg, 3));
        st.residual_history.push(ResidualRecord {
            primal: 0.0,
            dual: 0.0,
            combined: 0.0,
        });
        assert!(check_stop(&st, &cfg, 3));
        st.residual_history.push(ResidualRecord {
            primal: 0.0,
            dual: 1.0,
            combined: 0.0,
        });
        assert!(!check_stop(&st, &cfg, 3));
    }

    #[test]
    fn penalty_examples() {
        let adapt = PenaltyAdapt::default();
        let mut st = AdmmState::zeros(2, 1, 1.0);
        st.dual_e = DMatrix::from_element(2, 1, 4.0);
        st.dual_s = DMatrix::from_element(2, 1, -4.0);
        assert_eq!(adapt_penalty(&mut st, 1.0, 0.05, &adapt), Some(0.5));
        assert_eq!(st.rho, 2.0);
        assert_eq!(st.dual_e[(0, 0)], 2.0);
        assert_eq!(st.dual_s[(0, 0)], -2.0);
        assert_eq!(adapt_penalty(&mut st, 0.3, 0.3, &adapt), None);
        assert_eq!(st.rho, 2.0);
        assert_eq!(adapt_penalty(&mut st, 0.05, 1.0, &adapt), Some(2.0));
        assert_eq!(st.rho, 1.0);
        assert_eq!(st.dual_e[(0, 0)], 4.0);
    }

    #[test]
    fn config_validation_names_field() {
        let cfg = SolveConfig {
            mu: -1.0,
            ..SolveConfig::default()
        };
        match cfg.validate() {
            Err(CmmError::Config { field, .. }) => assert_eq!(field, "mu"),
            other => panic!("{other:?}"),
        }
        let cfg = SolveConfig {
            eta: 1.0,
            ..SolveConfig::default()
        };
        assert!(cfg.validate().is_err());
        assert_eq!(SolveConfig::default().eta, 0.999);
        assert_eq!(SolveConfig::default().eps_abs, 1e-8);
        assert_eq!(SolveConfig::default().eps_rel, 1e-6);
        assert_eq!(SolveConfig::default().rho0, 1.0);
    }

    #[test]
    fn galerkin_prox_matches_subgradient_condition() {
        let mesh = generate_lshape(2).unwrap();
        let op = LaplaceOperator::assemble(&mesh, MassKind::Unlumped).unwrap();
        let prox = SparsityProx::new(&op.mass);
        let n = mesh.n_vertices();
        let z = DMatrix::from_fn(n, 2, |i, j| libm::sin((i * 7 + j * 3) as f64) * 2.0);
        let (mu, rho) = (0.05, 1.5);
        let s = prox.apply(&z, &DMatrix::zeros(n, 2), mu, rho);
        // optimality: rho A (Z - S) in mu * subdifferential of |S|
        let g = op.mass.mul_mat(&(&z - &s)) * rho;
        for i in 0..n {
            for j in 0..2 {
                if s[(i, j)] != 0.0 {
                    assert!((g[(i, j)] - mu * s[(i, j)].signum()).abs() < 1e-9);
                } else {
                    assert!(g[(i, j)].abs() <= mu + 1e-9);
                }
            }
        }
    }

    #[test]
    fn random_init_is_deterministic_and_orthonormal() {
        let mesh = generate_lshape(3).unwrap();
        for kind in [MassKind::Lumped, MassKind::Unlumped] {
            let op = LaplaceOperator::assemble(&mesh, kind).unwrap();
            let cfg = SolveConfig {
                k: 4,
                seed: 7,
                ..SolveConfig::default()
            };
            let a = initialize(&op, &cfg).unwrap();
            let b = initialize(&op, &cfg).unwrap();
            assert_eq!(a, b);
            assert_eq!(a.checksum(), b.checksum());
            let gram = op.mass.gram(&a.phi, &a.phi);
            assert!((gram - DMatrix::identity(4, 4)).amax() < 1e-10);
            assert!(a.e.iter().all(|&v| (0.0..1.0).contains(&v)));
            let other = initialize(&op, &SolveConfig { seed: 8, ..cfg }).unwrap();
            assert_ne!(a.checksum(), other.checksum());
        }
    }
}
