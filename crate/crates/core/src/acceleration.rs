//! Nesterov-type over-relaxation with restart around the ADMM sweep, and the
//! top-level [`solve`] driver for both variants.
//!
//! Per iteration the sweep runs from the shadows `(E^, S^, dual^)`; the
//! combined residual
//!
//! ```text
//! c_k = rho (||dual_k - dual^_k||^2 + ||v_k - v^_k||^2)
//! ```
//!
//! decides whether the momentum sequence `alpha_{k+1} = (1 + sqrt(1 + 4 alpha_k^2)) / 2`
//! restarts, and the next shadows are `v_k + (alpha_k - 1)/alpha_{k+1} (v_k - v_{k-1})`.

use alloc::vec::Vec;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::operators::LaplaceOperator;
use crate::solver::{
    admm_step, check_stop, cycle, enforce_floor, initialize, maybe_adapt, objective,
    project_a_orthonormal, residual_norms, AdmmState, ResidualRecord, RestartRule, SolveConfig,
    Variant, Workspace,
};
use crate::spectra::{order_modes, ModeSet};

/// Over-relaxation state carried between accelerated iterations.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentumState {
    pub alpha: f64,
    pub v_hat_e: DMatrix<f64>,
    pub v_hat_s: DMatrix<f64>,
    pub dual_hat_e: DMatrix<f64>,
    pub dual_hat_s: DMatrix<f64>,
    pub c_prev: f64,
    pub prev_e: DMatrix<f64>,
    pub prev_s: DMatrix<f64>,
    pub prev_dual_e: DMatrix<f64>,
    pub prev_dual_s: DMatrix<f64>,
}

impl MomentumState {
    /// `alpha = 1`, shadows equal to the current iterates, `c_0 = +inf`.
    pub fn new(state: &AdmmState) -> Self {
        Self {
            alpha: 1.0,
            v_hat_e: state.e.clone(),
            v_hat_s: state.s.clone(),
            dual_hat_e: state.dual_e.clone(),
            dual_hat_s: state.dual_s.clone(),
            c_prev: f64::INFINITY,
            prev_e: state.e.clone(),
            prev_s: state.s.clone(),
            prev_dual_e: state.dual_e.clone(),
            prev_dual_s: state.dual_s.clone(),
        }
    }

    fn scale_duals(&mut self, scale: f64) {
        self.dual_hat_e *= scale;
        self.dual_hat_s *= scale;
        self.prev_dual_e *= scale;
        self.prev_dual_s *= scale;
    }
}

pub fn update_alpha(alpha: f64) -> f64 {
    (1.0 + libm::sqrt(1.0 + 4.0 * alpha * alpha)) / 2.0
}

pub fn combined_residual(state: &AdmmState, momentum: &MomentumState, rho: f64) -> f64 {
    rho * ((&state.dual_e - &momentum.dual_hat_e).norm_squared()
        + (&state.dual_s - &momentum.dual_hat_s).norm_squared()
        + (&state.e - &momentum.v_hat_e).norm_squared()
        + (&state.s - &momentum.v_hat_s).norm_squared())
}

/// What an accelerated iteration did besides updating the iterates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AccelInfo {
    pub record: ResidualRecord,
    pub restarted: bool,
    /// momentum coefficient used for the next shadows
    pub coefficient: f64,
}

/// One iteration of the accelerated scheme. `state` receives `(Phi_k, v_k,
/// dual_k)`; `momentum` receives the shadows for iteration `k + 1`.
pub fn accelerated_step(
    state: &mut AdmmState,
    momentum: &mut MomentumState,
    op: &LaplaceOperator,
    cfg: &SolveConfig,
    ws: &mut Workspace,
) -> Result<AccelInfo> {
    let rho = state.rho;
    let c = cycle(
        op,
        cfg.mu,
        rho,
        &momentum.v_hat_e,
        &momentum.v_hat_s,
        &momentum.dual_hat_e,
        &momentum.dual_hat_s,
        ws,
    )?;
    let (primal, dual) = residual_norms(&c.phi, &c.e, &c.s, &state.e, &state.s, rho);

    // v_{k-1}, dual_{k-1}
    momentum.prev_e = core::mem::replace(&mut state.e, c.e);
    momentum.prev_s = core::mem::replace(&mut state.s, c.s);
    momentum.prev_dual_e = core::mem::replace(&mut state.dual_e, c.dual_e);
    momentum.prev_dual_s = core::mem::replace(&mut state.dual_s, c.dual_s);
    state.phi = c.phi;
    state.iter += 1;

    let ck = combined_residual(state, momentum, rho);
    // c_0 = +inf: the first iteration never restarts under either rule
    let first = momentum.c_prev.is_infinite();
    let decreased = first || ck < cfg.eta * momentum.c_prev;
    let mut restarted = false;
    let coefficient;
    match cfg.restart_rule {
        RestartRule::Paper => {
            if decreased && !first {
                momentum.alpha = 1.0;
                restarted = true;
            }
            let next = update_alpha(momentum.alpha);
            coefficient = (momentum.alpha - 1.0) / next;
            extrapolate(state, momentum, coefficient);
            momentum.alpha = next;
            momentum.c_prev = ck;
        }
        RestartRule::Goldstein => {
            if decreased {
                let next = update_alpha(momentum.alpha);
                coefficient = (momentum.alpha - 1.0) / next;
                extrapolate(state, momentum, coefficient);
                momentum.alpha = next;
                momentum.c_prev = ck;
            } else {
                coefficient = 0.0;
                momentum.alpha = 1.0;
                momentum.v_hat_e = momentum.prev_e.clone();
                momentum.v_hat_s = momentum.prev_s.clone();
                momentum.dual_hat_e = momentum.prev_dual_e.clone();
                momentum.dual_hat_s = momentum.prev_dual_s.clone();
                momentum.c_prev /= cfg.eta;
                restarted = true;
            }
        }
    }
    let record = ResidualRecord {
        primal,
        dual,
        combined: ck,
    };
    state.residual_history.push(record);
    Ok(AccelInfo {
        record,
        restarted,
        coefficient,
    })
}

fn extrapolate(state: &AdmmState, m: &mut MomentumState, coef: f64) {
    let step = |cur: &DMatrix<f64>, prev: &DMatrix<f64>| {
        if coef == 0.0 {
            cur.clone()
        } else {
            cur + (cur - prev) * coef
        }
    };
    m.v_hat_e = step(&state.e, &m.prev_e);
    m.v_hat_s = step(&state.s, &m.prev_s);
    m.dual_hat_e = step(&state.dual_e, &m.prev_dual_e);
    m.dual_hat_s = step(&state.dual_s, &m.prev_dual_s);
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub iter: usize,
    pub primal: f64,
    pub dual: f64,
    pub c_k: f64,
    /// penalty used during this iteration
    pub rho: f64,
    pub objective: f64,
    pub alpha: f64,
    pub restarted: bool,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConvergenceTrace {
    pub records: Vec<TraceRecord>,
}

impl ConvergenceTrace {
    pub fn restarts(&self) -> usize {
        self.records.iter().filter(|r| r.restarted).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Converged,
    MaxIterReached,
}

#[derive(Debug, Clone)]
pub struct SolveOutput {
    /// Ordered, oriented modes supported on the sparsity iterate.
    pub modes: ModeSet,
    /// The A-orthonormal iterate with the same column order and signs.
    pub phi: DMatrix<f64>,
    pub state: AdmmState,
    pub trace: ConvergenceTrace,
    pub termination: Termination,
    pub refactorizations: usize,
}

impl SolveOutput {
    pub fn converged(&self) -> bool {
        self.termination == Termination::Converged
    }

    pub fn iterations(&self) -> usize {
        self.state.iter
    }
}

/// Runs the configured variant from [`initialize`].
pub fn solve(op: &LaplaceOperator, cfg: &SolveConfig) -> Result<SolveOutput> {
    let init = initialize(op, cfg)?;
    solve_from(op, cfg, init, &mut |_| {})
}

/// Runs the configured variant from a given state until the stopping test
/// passes or `max_iter` iterations have run. `observer` sees every trace
/// record as it is produced.
pub fn solve_from(
    op: &LaplaceOperator,
    cfg: &SolveConfig,
    mut state: AdmmState,
    observer: &mut dyn FnMut(&TraceRecord),
) -> Result<SolveOutput> {
    cfg.validate()?;
    let n = op.dim();
    let mut ws = Workspace::new(op);
    enforce_floor(&mut state, op, cfg, &mut ws);
    let mut momentum = MomentumState::new(&state);
    let mut trace = ConvergenceTrace::default();
    let mut termination = Termination::MaxIterReached;

    while state.iter < cfg.max_iter {
        if let Some(t) = cfg.truncation {
            if state.iter == t.after && state.iter > 0 {
                truncate_and_restart(&mut state, op, t.tolerance)?;
                momentum = MomentumState::new(&state);
            }
        }
        let rho = state.rho;
        let (record, alpha, restarted) = match cfg.variant {
            Variant::Admm => (admm_step(&mut state, op, cfg, &mut ws)?, 1.0, false),
            Variant::FastAdmm => {
                let alpha = momentum.alpha;
                let info = accelerated_step(&mut state, &mut momentum, op, cfg, &mut ws)?;
                (
                    info.record,
                    if info.restarted { 1.0 } else { alpha },
                    info.restarted,
                )
            }
        };
        let rec = TraceRecord {
            iter: state.iter,
            primal: record.primal,
            dual: record.dual,
            c_k: record.combined,
            rho,
            objective: objective(&state.phi, op, cfg.mu),
            alpha,
            restarted,
        };
        observer(&rec);
        trace.records.push(rec);
        if check_stop(&state, cfg, n) {
            termination = Termination::Converged;
            break;
        }
        if let Some(scale) = maybe_adapt(&mut state, op, cfg, &mut ws) {
            momentum.scale_duals(scale);
        }
    }

    let support = DMatrix::from_fn(n, state.phi.ncols(), |i, j| {
        if state.s[(i, j)] == 0.0 {
            0.0
        } else {
            state.phi[(i, j)]
        }
    });
    let mut modes = order_modes(&support, &op.weight, cfg.mu, cfg.order);
    let signs = modes.flip_all(cfg.flip, &op.mass);
    modes.compute_accuracy(op);
    let mut phi = DMatrix::zeros(n, modes.k());
    for (r, &j) in modes.permutation.iter().enumerate() {
        phi.set_column(r, &(state.phi.column(j) * signs[r]));
    }
    Ok(SolveOutput {
        modes,
        phi,
        state,
        trace,
        termination,
        refactorizations: ws.factor.refactorizations(),
    })
}

fn truncate_and_restart(state: &mut AdmmState, op: &LaplaceOperator, tol: f64) -> Result<()> {
    let truncated = state.phi.map(|v| if v.abs() < tol { 0.0 } else { v });
    state.phi = project_a_orthonormal(&truncated, &op.mass)?;
    state.e = state.phi.clone();
    state.s = state.phi.clone();
    state.dual_e.fill(0.0);
    state.dual_s.fill(0.0);
    Ok(())
}
