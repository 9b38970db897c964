//! ADMM for `min ||x||_1  s.t.  Z g = x,  1^T g = c`.
//!
//! Per iteration:
//!
//! ```text
//! g  <- Gamma^{-1} [ Z^T (rho_l x - lambda) + (rho_m c - mu) 1 ],  Gamma = rho_l Z^T Z + rho_m 1 1^T
//! x  <- S_{1/rho_l}(Z g + lambda / rho_l)
//! lambda <- lambda + rho_l (Z g - x)
//! mu     <- mu + rho_m (1^T g - c)
//! ```
//!
//! `Gamma` is diagonal plus rank one, so its inverse is a cached
//! [`WoodburyFactor`] built once per solve.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::lifted::LiftedOperator;
use super::prox::shrink;
use super::woodbury::WoodburyFactor;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdmmConfig {
    pub rho_lambda: f64,
    pub rho_mu: f64,
    pub scale_c: f64,
    pub max_iters: usize,
    pub tol_primal: f64,
    pub tol_dual: f64,
}

impl Default for AdmmConfig {
    fn default() -> Self {
        Self {
            rho_lambda: 1.0,
            rho_mu: 1.0,
            scale_c: 1.0,
            max_iters: 5000,
            tol_primal: 1e-6,
            tol_dual: 1e-6,
        }
    }
}

impl AdmmConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rho_lambda > 0.0 && self.rho_mu > 0.0) {
            return Err(Error::InvalidParams(format!(
                "penalties must be positive, got rho_lambda={}, rho_mu={}",
                self.rho_lambda, self.rho_mu
            )));
        }
        if self.max_iters == 0 || !(self.tol_primal > 0.0) || !(self.tol_dual > 0.0) {
            return Err(Error::InvalidParams(
                "max_iters and tolerances must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdmmState {
    pub g_tilde: DVector<f64>,
    /// `N x P` source estimate (column-major `vec` gives the `NP` vector).
    pub x: DMatrix<f64>,
    pub lambda: DMatrix<f64>,
    pub mu: f64,
    pub iter: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub converged: bool,
}

impl AdmmState {
    pub fn zeros(n: usize, p: usize) -> Self {
        Self {
            g_tilde: DVector::zeros(n),
            x: DMatrix::zeros(n, p),
            lambda: DMatrix::zeros(n, p),
            mu: 0.0,
            iter: 0,
            primal_residual: f64::INFINITY,
            dual_residual: f64::INFINITY,
            converged: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterRecord {
    /// `||x||_1` after the iteration.
    pub objective: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
    /// `1^T g - c`.
    pub constraint_violation: f64,
}

pub struct AdmmSolver<'a> {
    op: &'a LiftedOperator,
    cfg: AdmmConfig,
    gamma: WoodburyFactor,
}

impl<'a> AdmmSolver<'a> {
    pub fn new(op: &'a LiftedOperator, cfg: AdmmConfig) -> Result<Self> {
        cfg.validate()?;
        if op.floored() {
            log::debug!("lifted diagonal was floored; observations are degenerate");
        }
        let ones = DMatrix::from_element(op.n_nodes(), 1, 1.0);
        // Gamma = rho_l (diag(z) + (rho_m / rho_l) 1 1^T)
        let gamma = WoodburyFactor::new(op.z_regularized(), cfg.rho_mu / cfg.rho_lambda, &ones)?;
        Ok(Self { op, cfg, gamma })
    }

    pub fn config(&self) -> &AdmmConfig {
        &self.cfg
    }

    pub fn initial_state(&self) -> AdmmState {
        AdmmState::zeros(self.op.n_nodes(), self.op.n_signals())
    }

    /// The `g` update alone: minimizer of the augmented Lagrangian in `g`.
    pub fn filter_update(&self, x: &DMatrix<f64>, lambda: &DMatrix<f64>, mu: f64) -> DVector<f64> {
        let cfg = &self.cfg;
        let drive = x * cfg.rho_lambda - lambda;
        let mut rhs = self.op.adjoint(&drive);
        rhs.add_scalar_mut(cfg.rho_mu * cfg.scale_c - mu);
        self.gamma.solve(&rhs) / cfg.rho_lambda
    }

    /// One full iteration; updates residuals and the convergence flag.
    pub fn step(&self, state: &mut AdmmState) -> IterRecord {
        let cfg = &self.cfg;
        let g = self.filter_update(&state.x, &state.lambda, state.mu);
        let zg = self.op.matvec(&g);
        let t = 1.0 / cfg.rho_lambda;
        let x_new = zg.zip_map(&state.lambda, |a, l| shrink(a + l * t, t));
        let gap = &zg - &x_new;
        state.lambda += &gap * cfg.rho_lambda;
        let violation = g.sum() - cfg.scale_c;
        state.mu += cfg.rho_mu * violation;

        let primal = gap.norm() / zg.norm().max(x_new.norm()).max(1.0);
        let dual = cfg.rho_lambda * (&x_new - &state.x).norm() / state.lambda.norm().max(1.0);
        state.g_tilde = g;
        state.x = x_new;
        state.iter += 1;
        state.primal_residual = primal;
        state.dual_residual = dual;
        state.converged = primal <= cfg.tol_primal
            && dual <= cfg.tol_dual
            && violation.abs() <= cfg.tol_primal * cfg.scale_c.abs().max(1.0);
        IterRecord {
            objective: state.x.iter().map(|v| v.abs()).sum(),
            primal_residual: primal,
            dual_residual: dual,
            constraint_violation: violation,
        }
    }

    /// Iterate from `state` until convergence or `max_iters` total iterations.
    pub fn run(&self, mut state: AdmmState) -> (AdmmState, Vec<IterRecord>) {
        let mut history = Vec::with_capacity(self.cfg.max_iters.min(1024));
        while state.iter < self.cfg.max_iters {
            history.push(self.step(&mut state));
            if state.converged {
                break;
            }
        }
        (state, history)
    }
}

/// Solve from zero initial conditions. Running out of iterations is reported
/// through `converged = false`, not as an error.
pub fn admm_solve(op: &LiftedOperator, cfg: &AdmmConfig) -> Result<(AdmmState, Vec<IterRecord>)> {
    let solver = AdmmSolver::new(op, *cfg)?;
    let init = solver.initial_state();
    Ok(solver.run(init))
}
