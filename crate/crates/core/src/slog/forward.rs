//! Forward pass: filter, sources and multiplier sub-layers, composed `K` times.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use super::params::{LayerParams, SlogModel};
use crate::admm::{build_lifted, shrink, LiftedOperator, WoodburyFactor};
use crate::error::{Error, Result};
use crate::rng::{child_rng, stream};

/// Recurrent state `(x, lambda, mu)` between layers.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerState {
    pub x: DMatrix<f64>,
    pub lambda: DMatrix<f64>,
    pub mu: DVector<f64>,
}

impl LayerState {
    pub fn zeros(n: usize, p: usize, d: usize) -> Self {
        Self {
            x: DMatrix::zeros(n, p),
            lambda: DMatrix::zeros(n, p),
            mu: DVector::zeros(d),
        }
    }

    /// `x, lambda ~ N(0, 1)` entrywise and `mu ~ N(0, I_d)`.
    pub fn random(n: usize, p: usize, d: usize, seed: u64) -> Self {
        let mut rng = child_rng(seed, stream::INIT_STATES, 0);
        let mut normal = || -> f64 { rng.sample(StandardNormal) };
        let x = DMatrix::from_fn(n, p, |_, _| normal());
        let lambda = DMatrix::from_fn(n, p, |_, _| normal());
        let mu = DVector::from_fn(d, |_, _| normal());
        Self { x, lambda, mu }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitStates {
    Zero,
    Random { seed: u64 },
    Given(LayerState),
}

impl InitStates {
    pub fn materialize(&self, n: usize, p: usize, d: usize) -> Result<LayerState> {
        match self {
            Self::Zero => Ok(LayerState::zeros(n, p, d)),
            Self::Random { seed } => Ok(LayerState::random(n, p, d, *seed)),
            Self::Given(s) => {
                if s.x.shape() != (n, p) || s.lambda.shape() != (n, p) || s.mu.len() != d {
                    return Err(Error::DimensionMismatch(format!(
                        "initial state shapes {:?}, {:?}, {} do not match ({n}, {p}), d = {d}",
                        s.x.shape(),
                        s.lambda.shape(),
                        s.mu.len()
                    )));
                }
                Ok(s.clone())
            }
        }
    }
}

/// Everything a layer computed that the backward pass needs.
#[derive(Debug, Clone)]
pub struct LayerCache {
    pub g_tilde: DVector<f64>,
    /// `unvec(Z g)`.
    pub zg: DMatrix<f64>,
    /// Soft-threshold input `alpha1 Z g + alpha2 lambda`.
    pub pre_threshold: DMatrix<f64>,
    pub factor: WoodburyFactor,
}

#[derive(Debug, Clone)]
pub struct ForwardTrace {
    pub op: LiftedOperator,
    /// `K + 1` states; `states[0]` is the initial state.
    pub states: Vec<LayerState>,
    pub layers: Vec<LayerCache>,
    pub output: DMatrix<f64>,
    pub model_version: u64,
}

impl ForwardTrace {
    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn g_tilde(&self) -> &DVector<f64> {
        &self.layers.last().expect("trace has at least one layer").g_tilde
    }

    /// Re-run the forward pass from the recorded initial state.
    pub fn replay(&self, model: &SlogModel) -> Result<DMatrix<f64>> {
        if model.version != self.model_version {
            return Err(Error::StaleTrace {
                trace: self.model_version,
                model: model.version,
            });
        }
        let init = InitStates::Given(self.states[0].clone());
        Ok(run_layers(model, self.op.clone(), &init)?.output)
    }
}

fn check_layer_shapes(op: &LiftedOperator, p: &LayerParams) -> Result<()> {
    if p.basis.nrows() != op.n_nodes() || p.basis.ncols() != p.target.len() {
        return Err(Error::DimensionMismatch(format!(
            "basis {:?} and target {} against {} nodes",
            p.basis.shape(),
            p.target.len(),
            op.n_nodes()
        )));
    }
    Ok(())
}

fn check_state_shapes(op: &LiftedOperator, x: &DMatrix<f64>, lambda: &DMatrix<f64>) -> Result<()> {
    let want = (op.n_nodes(), op.n_signals());
    if x.shape() != want || lambda.shape() != want {
        return Err(Error::DimensionMismatch(format!(
            "states {:?} and {:?}, expected {want:?}",
            x.shape(),
            lambda.shape()
        )));
    }
    Ok(())
}

fn filter_with_factor(
    op: &LiftedOperator,
    x: &DMatrix<f64>,
    lambda: &DMatrix<f64>,
    mu: &DVector<f64>,
    p: &LayerParams,
) -> Result<(DVector<f64>, WoodburyFactor)> {
    check_layer_shapes(op, p)?;
    check_state_shapes(op, x, lambda)?;
    if mu.len() != p.target.len() {
        return Err(Error::DimensionMismatch(format!(
            "mu has {} entries, constraint dimension is {}",
            mu.len(),
            p.target.len()
        )));
    }
    let factor = WoodburyFactor::new(op.z_regularized(), p.rho2, &p.basis)?;
    let drive = x - lambda * p.rho1;
    let rhs = op.adjoint(&drive) + &p.basis * (&p.target * p.rho2 - mu * p.rho1);
    Ok((factor.solve(&rhs), factor))
}

/// `g = (Z^T Z + rho2 M M^T)^{-1} [Z^T (x - rho1 lambda) + M (rho2 m - rho1 mu)]`.
pub fn filter_sublayer(
    op: &LiftedOperator,
    x: &DMatrix<f64>,
    lambda: &DMatrix<f64>,
    mu: &DVector<f64>,
    p: &LayerParams,
) -> Result<DVector<f64>> {
    Ok(filter_with_factor(op, x, lambda, mu, p)?.0)
}

fn threshold_input(zg: &DMatrix<f64>, lambda: &DMatrix<f64>, p: &LayerParams) -> DMatrix<f64> {
    zg.zip_map(lambda, |u, l| p.alpha1 * u + p.alpha2 * l)
}

/// `x = S_tau(alpha1 Z g + alpha2 lambda)`.
pub fn sources_sublayer(
    op: &LiftedOperator,
    g_tilde: &DVector<f64>,
    lambda: &DMatrix<f64>,
    p: &LayerParams,
) -> Result<DMatrix<f64>> {
    if !(p.tau >= 0.0) {
        return Err(Error::NegativeThreshold(p.tau));
    }
    let zg = op.matvec(g_tilde);
    check_state_shapes(op, &zg, lambda)?;
    Ok(threshold_input(&zg, lambda, p).map(|v| shrink(v, p.tau)))
}

fn multipliers_from_zg(
    g_tilde: &DVector<f64>,
    zg: &DMatrix<f64>,
    x: &DMatrix<f64>,
    lambda_prev: &DMatrix<f64>,
    mu_prev: &DVector<f64>,
    p: &LayerParams,
) -> (DMatrix<f64>, DVector<f64>) {
    let mut lambda = lambda_prev * p.beta1;
    lambda += zg * p.beta2;
    lambda += x * p.beta3;
    let mu = mu_prev * p.gamma + p.basis.tr_mul(g_tilde) + &p.target;
    (lambda, mu)
}

/// `lambda = beta1 lambda_prev + beta2 Z g + beta3 x`, `mu = gamma mu_prev + M^T g + m`.
pub fn multipliers_sublayer(
    op: &LiftedOperator,
    g_tilde: &DVector<f64>,
    x: &DMatrix<f64>,
    lambda_prev: &DMatrix<f64>,
    mu_prev: &DVector<f64>,
    p: &LayerParams,
) -> Result<(DMatrix<f64>, DVector<f64>)> {
    check_layer_shapes(op, p)?;
    check_state_shapes(op, x, lambda_prev)?;
    if g_tilde.len() != op.n_nodes() || mu_prev.len() != p.target.len() {
        return Err(Error::DimensionMismatch(format!(
            "g has {} entries and mu {}, expected {} and {}",
            g_tilde.len(),
            mu_prev.len(),
            op.n_nodes(),
            p.target.len()
        )));
    }
    let zg = op.matvec(g_tilde);
    Ok(multipliers_from_zg(g_tilde, &zg, x, lambda_prev, mu_prev, p))
}

fn run_layers(model: &SlogModel, op: LiftedOperator, init: &InitStates) -> Result<ForwardTrace> {
    let (n, p, d) = (op.n_nodes(), op.n_signals(), model.constraint_dim());
    let mut state = init.materialize(n, p, d)?;
    let mut states = Vec::with_capacity(model.n_layers() + 1);
    let mut layers = Vec::with_capacity(model.n_layers());
    for params in &model.layers {
        if !(params.tau >= 0.0) {
            return Err(Error::NegativeThreshold(params.tau));
        }
        let (g_tilde, factor) = filter_with_factor(&op, &state.x, &state.lambda, &state.mu, params)?;
        let zg = op.matvec(&g_tilde);
        let pre_threshold = threshold_input(&zg, &state.lambda, params);
        let x = pre_threshold.map(|v| shrink(v, params.tau));
        let (lambda, mu) = multipliers_from_zg(&g_tilde, &zg, &x, &state.lambda, &state.mu, params);
        states.push(std::mem::replace(&mut state, LayerState { x, lambda, mu }));
        layers.push(LayerCache {
            g_tilde,
            zg,
            pre_threshold,
            factor,
        });
    }
    states.push(state);
    let output = layers.last().expect("model has at least one layer").zg.clone();
    Ok(ForwardTrace {
        op,
        states,
        layers,
        output,
        model_version: model.version,
    })
}

/// Run the network on observations `Y` (`N x P`) given the GFT basis `V`.
/// The estimate is `unvec(Z g_K)`; it is also `trace.output`.
pub fn forward(
    model: &SlogModel,
    v: &DMatrix<f64>,
    y: &DMatrix<f64>,
    init: &InitStates,
) -> Result<(DMatrix<f64>, DVector<f64>, ForwardTrace)> {
    if y.nrows() != model.n_nodes() {
        return Err(Error::DimensionMismatch(format!(
            "model has {} nodes, Y has {} rows",
            model.n_nodes(),
            y.nrows()
        )));
    }
    let op = build_lifted(v, y)?;
    forward_lifted(model, op, init)
}

/// [`forward`] on a prebuilt lifted operator.
pub fn forward_lifted(
    model: &SlogModel,
    op: LiftedOperator,
    init: &InitStates,
) -> Result<(DMatrix<f64>, DVector<f64>, ForwardTrace)> {
    if op.n_nodes() != model.n_nodes() {
        return Err(Error::DimensionMismatch(format!(
            "model has {} nodes, operator has {}",
            model.n_nodes(),
            op.n_nodes()
        )));
    }
    let trace = run_layers(model, op, init)?;
    Ok((trace.output.clone(), trace.g_tilde().clone(), trace))
}
