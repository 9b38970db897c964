//! Learnable parameters of the unrolled network.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::rng::{child_rng, stream};

/// Parameters of one layer. The same type doubles as the gradient container.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams {
    pub rho1: f64,
    pub rho2: f64,
    pub alpha1: f64,
    pub alpha2: f64,
    pub tau: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub beta3: f64,
    pub gamma: f64,
    /// `M`, `N x d`: the learned constraint `M^T g = m`.
    pub basis: DMatrix<f64>,
    /// `m`, length `d`.
    pub target: DVector<f64>,
}

const SCALARS: usize = 9;

impl LayerParams {
    pub fn zeros(n: usize, d: usize) -> Self {
        Self {
            rho1: 0.0,
            rho2: 0.0,
            alpha1: 0.0,
            alpha2: 0.0,
            tau: 0.0,
            beta1: 0.0,
            beta2: 0.0,
            beta3: 0.0,
            gamma: 0.0,
            basis: DMatrix::zeros(n, d),
            target: DVector::zeros(d),
        }
    }

    pub fn n_params(n: usize, d: usize) -> usize {
        SCALARS + n * d + d
    }

    /// Parameters under which a layer performs one ADMM iteration with
    /// penalties `(rho_lambda, rho_mu)` and scale `c`.
    ///
    /// The constraint basis is `sqrt(rho_mu) 1` so that both the filter
    /// solve and the additive multiplier update line up. The network's `mu`
    /// is then an affine image of the ADMM multiplier (see
    /// [`admm_mu_from_network`]); start it at [`admm_initial_mu`] to track
    /// ADMM from zero.
    pub fn admm_specialization(n: usize, rho_lambda: f64, rho_mu: f64, c: f64) -> Self {
        let inv = 1.0 / rho_lambda;
        let a = rho_mu.sqrt();
        Self {
            rho1: inv,
            rho2: inv,
            alpha1: 1.0,
            alpha2: inv,
            tau: inv,
            beta1: 1.0,
            beta2: rho_lambda,
            beta3: -rho_lambda,
            gamma: 1.0,
            basis: DMatrix::from_element(n, 1, a),
            target: DVector::from_element(1, -a * c),
        }
    }

    /// Flatten in declared field order; `basis` column-major.
    pub fn write_flat(&self, out: &mut Vec<f64>) {
        out.extend_from_slice(&[
            self.rho1,
            self.rho2,
            self.alpha1,
            self.alpha2,
            self.tau,
            self.beta1,
            self.beta2,
            self.beta3,
            self.gamma,
        ]);
        out.extend_from_slice(self.basis.as_slice());
        out.extend_from_slice(self.target.as_slice());
    }

    pub fn read_flat(values: &[f64], n: usize, d: usize) -> Result<Self> {
        if values.len() != Self::n_params(n, d) {
            return Err(Error::DimensionMismatch(format!(
                "layer needs {} values, got {}",
                Self::n_params(n, d),
                values.len()
            )));
        }
        let (s, rest) = values.split_at(SCALARS);
        let (basis, target) = rest.split_at(n * d);
        Ok(Self {
            rho1: s[0],
            rho2: s[1],
            alpha1: s[2],
            alpha2: s[3],
            tau: s[4],
            beta1: s[5],
            beta2: s[6],
            beta3: s[7],
            gamma: s[8],
            basis: DMatrix::from_column_slice(n, d, basis),
            target: DVector::from_column_slice(target),
        })
    }

    /// Clamp the nonnegative parameters `rho1`, `rho2`, `tau` at zero.
    pub fn project(&mut self) {
        self.rho1 = self.rho1.max(0.0);
        self.rho2 = self.rho2.max(0.0);
        self.tau = self.tau.max(0.0);
    }
}

/// Network `mu` corresponding to a zero ADMM multiplier under
/// [`LayerParams::admm_specialization`].
pub fn admm_initial_mu(rho_mu: f64, c: f64) -> DVector<f64> {
    DVector::from_element(1, -2.0 * rho_mu.sqrt() * c)
}

/// ADMM multiplier `mu` represented by the network state `mu_net`:
/// `sqrt(rho_mu) mu_net + 2 rho_mu c`.
pub fn admm_mu_from_network(mu_net: f64, rho_mu: f64, c: f64) -> f64 {
    rho_mu.sqrt() * mu_net + 2.0 * rho_mu * c
}

#[derive(Debug, Clone, PartialEq)]
pub struct SlogModel {
    pub layers: Vec<LayerParams>,
    n_nodes: usize,
    constraint_dim: usize,
    pub seed: u64,
    /// Bumped on every parameter update; traces remember the version they saw.
    pub version: u64,
}

impl SlogModel {
    pub fn from_layers(layers: Vec<LayerParams>, seed: u64) -> Result<Self> {
        let first = layers
            .first()
            .ok_or_else(|| Error::InvalidParams("model needs at least one layer".into()))?;
        let (n, d) = first.basis.shape();
        if d == 0 || d > n {
            return Err(Error::InvalidParams(format!("constraint dimension {d} not in 1..={n}")));
        }
        for (k, l) in layers.iter().enumerate() {
            if l.basis.shape() != (n, d) || l.target.len() != d {
                return Err(Error::DimensionMismatch(format!(
                    "layer {k} has basis {:?} and target {}, expected ({n}, {d}) and {d}",
                    l.basis.shape(),
                    l.target.len()
                )));
            }
        }
        Ok(Self {
            layers,
            n_nodes: n,
            constraint_dim: d,
            seed,
            version: 0,
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn constraint_dim(&self) -> usize {
        self.constraint_dim
    }

    pub fn n_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn n_params(&self) -> usize {
        self.layers.len() * LayerParams::n_params(self.n_nodes, self.constraint_dim)
    }

    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_params());
        for l in &self.layers {
            l.write_flat(&mut out);
        }
        out
    }

    /// Overwrite all parameters from a flat vector (see [`LayerParams::write_flat`]).
    pub fn set_flat(&mut self, values: &[f64]) -> Result<()> {
        let per = LayerParams::n_params(self.n_nodes, self.constraint_dim);
        if values.len() != per * self.layers.len() {
            return Err(Error::DimensionMismatch(format!(
                "model needs {} values, got {}",
                per * self.layers.len(),
                values.len()
            )));
        }
        for (layer, chunk) in self.layers.iter_mut().zip(values.chunks_exact(per)) {
            *layer = LayerParams::read_flat(chunk, self.n_nodes, self.constraint_dim)?;
        }
        self.version += 1;
        Ok(())
    }
}

/// Random initialization: `rho1, rho2, tau ~ U[0, 1]`, everything else `N(0, 1)`.
pub fn init_model(n: usize, d: usize, k: usize, seed: u64) -> Result<SlogModel> {
    if k == 0 {
        return Err(Error::InvalidParams("model needs at least one layer".into()));
    }
    if d == 0 || d > n {
        return Err(Error::InvalidParams(format!("constraint dimension {d} not in 1..={n}")));
    }
    let mut rng = child_rng(seed, stream::INIT_PARAMS, 0);
    let mut layers = Vec::with_capacity(k);
    for _ in 0..k {
        let rho1 = rng.random::<f64>();
        let rho2 = rng.random::<f64>();
        let tau = rng.random::<f64>();
        let mut normal = || -> f64 { rng.sample(StandardNormal) };
        layers.push(LayerParams {
            rho1,
            rho2,
            alpha1: normal(),
            alpha2: normal(),
            tau,
            beta1: normal(),
            beta2: normal(),
            beta3: normal(),
            gamma: normal(),
            basis: DMatrix::from_fn(n, d, |_, _| normal()),
            target: DVector::from_fn(d, |_, _| normal()),
        });
    }
    SlogModel::from_layers(layers, seed)
}
