//! Sign-invariant loss and its reverse-mode gradient through the unrolled layers.

use nalgebra::{DMatrix, DVector};

use super::forward::ForwardTrace;
use super::params::{LayerParams, SlogModel};
use crate::error::{Error, Result};

/// `min(||Xhat - X||, ||Xhat + X||) / ||X||` (Frobenius norms).
pub fn loss(x_hat: &DMatrix<f64>, x: &DMatrix<f64>) -> Result<f64> {
    Ok(loss_with_grad(x_hat, x)?.0)
}

/// Loss and its gradient with respect to `Xhat`. Ties go to the `Xhat - X` branch.
pub fn loss_with_grad(x_hat: &DMatrix<f64>, x: &DMatrix<f64>) -> Result<(f64, DMatrix<f64>)> {
    if x_hat.shape() != x.shape() {
        return Err(Error::DimensionMismatch(format!(
            "estimate {:?} vs target {:?}",
            x_hat.shape(),
            x.shape()
        )));
    }
    let scale = x.norm();
    if !(scale > 0.0) {
        return Err(Error::ZeroTarget);
    }
    let minus = x_hat - x;
    let plus = x_hat + x;
    let (nm, np) = (minus.norm(), plus.norm());
    let (residual, r) = if nm <= np { (minus, nm) } else { (plus, np) };
    let grad = if r > 0.0 {
        residual / (r * scale)
    } else {
        DMatrix::zeros(x.nrows(), x.ncols())
    };
    Ok((r / scale, grad))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<LayerParams>,
}

impl Gradients {
    pub fn zeros_like(model: &SlogModel) -> Self {
        Self {
            layers: vec![LayerParams::zeros(model.n_nodes(), model.constraint_dim()); model.n_layers()],
        }
    }

    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for l in &self.layers {
            l.write_flat(&mut out);
        }
        out
    }
}

fn dot(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(u, v)| u * v).sum()
}

/// Loss against `x_true` and its gradient with respect to every parameter of
/// the model that produced `trace`. The lifted operator, and hence `Y`, is
/// taken from the trace.
pub fn backward(model: &SlogModel, trace: &ForwardTrace, x_true: &DMatrix<f64>) -> Result<(f64, Gradients)> {
    if model.version != trace.model_version {
        return Err(Error::StaleTrace {
            trace: trace.model_version,
            model: model.version,
        });
    }
    if trace.depth() != model.n_layers() {
        return Err(Error::DimensionMismatch(format!(
            "trace depth {} vs {} layers",
            trace.depth(),
            model.n_layers()
        )));
    }
    let (value, out_bar) = loss_with_grad(&trace.output, x_true)?;
    let op = &trace.op;
    let (n, p, d) = (op.n_nodes(), op.n_signals(), model.constraint_dim());
    let mut grads = Gradients::zeros_like(model);

    // Adjoints of the state leaving the current layer.
    let mut x_bar = DMatrix::zeros(n, p);
    let mut lambda_bar = DMatrix::zeros(n, p);
    let mut mu_bar = DVector::zeros(d);

    for k in (0..model.n_layers()).rev() {
        let prm = &model.layers[k];
        let cache = &trace.layers[k];
        let input = &trace.states[k];
        let output = &trace.states[k + 1];
        let grad = &mut grads.layers[k];
        let g = &cache.g_tilde;

        let mut u_bar = if k + 1 == model.n_layers() {
            out_bar.clone()
        } else {
            DMatrix::zeros(n, p)
        };

        // Multipliers: lambda' = b1 lambda + b2 u + b3 x', mu' = gamma mu + M^T g + m.
        grad.beta1 = dot(&lambda_bar, &input.lambda);
        grad.beta2 = dot(&lambda_bar, &cache.zg);
        grad.beta3 = dot(&lambda_bar, &output.x);
        let mut lambda_in_bar = &lambda_bar * prm.beta1;
        u_bar += &lambda_bar * prm.beta2;
        let x_out_bar = &x_bar + &lambda_bar * prm.beta3;

        grad.gamma = mu_bar.dot(&input.mu);
        let mut mu_in_bar = &mu_bar * prm.gamma;
        let mut g_bar = &prm.basis * &mu_bar;
        grad.basis += g * mu_bar.transpose();
        grad.target += &mu_bar;

        // Sources: x' = S_tau(a1 u + a2 lambda); zero subgradient on |pre| <= tau.
        let mut pre_bar = DMatrix::zeros(n, p);
        let mut tau_bar = 0.0;
        for ((pb, &pre), &xb) in pre_bar.iter_mut().zip(cache.pre_threshold.iter()).zip(x_out_bar.iter()) {
            if pre.abs() > prm.tau {
                *pb = xb;
                tau_bar -= pre.signum() * xb;
            }
        }
        grad.tau = tau_bar;
        grad.alpha1 = dot(&pre_bar, &cache.zg);
        grad.alpha2 = dot(&pre_bar, &input.lambda);
        u_bar += &pre_bar * prm.alpha1;
        lambda_in_bar += &pre_bar * prm.alpha2;

        // u = Z g.
        g_bar += op.adjoint(&u_bar);

        // Filter: A g = r with A = diag(z) + rho2 M M^T and
        // r = Z^T (x - rho1 lambda) + M (rho2 m - rho1 mu).
        let r_bar = cache.factor.solve(&g_bar);
        let mt_r = prm.basis.tr_mul(&r_bar);
        let mt_g = prm.basis.tr_mul(g);
        grad.rho2 = -mt_r.dot(&mt_g) + mt_r.dot(&prm.target);
        let constraint_drive = &prm.target * prm.rho2 - &input.mu * prm.rho1;
        grad.basis += (&r_bar * mt_g.transpose() + g * mt_r.transpose()) * -prm.rho2;
        grad.basis += &r_bar * constraint_drive.transpose();
        grad.target += &mt_r * prm.rho2;

        let z_r = op.matvec(&r_bar);
        grad.rho1 = -(dot(&z_r, &input.lambda) + mt_r.dot(&input.mu));
        lambda_in_bar -= &z_r * prm.rho1;
        mu_in_bar -= &mt_r * prm.rho1;

        x_bar = z_r;
        lambda_bar = lambda_in_bar;
        mu_bar = mu_in_bar;
    }
    Ok((value, grads))
}
