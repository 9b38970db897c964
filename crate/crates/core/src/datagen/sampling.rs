//! Bernoulli-Gaussian sources, random diffusion filters and noisy observations.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::rng_from_seed;
use crate::spectral::{apply_filter, check_invertibility, FilterSpec, SpectralGraph, INVERTIBILITY_TOL};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SourceModel {
    pub n_nodes: usize,
    /// Probability that an entry is active.
    pub sparsity: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterModel {
    pub order: usize,
    pub impulsiveness: f64,
    pub seed: u64,
}

/// `X = Omega . R` with `Omega ~ Bernoulli(theta)` and `R ~ Normal(0, 1)`,
/// drawn entry by entry in column-major order.
pub fn sample_sources(model: &SourceModel, count: usize) -> Result<DMatrix<f64>> {
    if !(0.0..=1.0).contains(&model.sparsity) {
        return Err(Error::InvalidParams(format!(
            "sparsity {} outside [0, 1]",
            model.sparsity
        )));
    }
    let mut rng = rng_from_seed(model.seed);
    let mut x = DMatrix::zeros(model.n_nodes, count);
    for v in x.iter_mut() {
        let active = rng.random::<f64>() < model.sparsity;
        let amplitude: f64 = rng.sample(StandardNormal);
        if active {
            *v = amplitude;
        }
    }
    Ok(x)
}

const FILTER_RESAMPLES: usize = 10;

/// `h = (e1 + phi b) / ||e1 + phi b||_1` with `b ~ Normal(0, I_L)`.
pub fn sample_filter(model: &FilterModel) -> Result<DVector<f64>> {
    if model.order == 0 {
        return Err(Error::InvalidParams("filter order must be at least 1".into()));
    }
    if !(model.impulsiveness >= 0.0) {
        return Err(Error::InvalidParams(format!(
            "impulsiveness {} must be nonnegative",
            model.impulsiveness
        )));
    }
    let mut rng = rng_from_seed(model.seed);
    for _ in 0..FILTER_RESAMPLES {
        let mut h = DVector::from_fn(model.order, |_, _| {
            model.impulsiveness * rng.sample::<f64, _>(StandardNormal)
        });
        h[0] += 1.0;
        let l1 = h.lp_norm(1);
        if l1 >= 1e-12 {
            return Ok(h / l1);
        }
    }
    Err(Error::DegenerateFilter)
}

#[derive(Debug, Clone)]
pub struct Synthesis {
    pub y: DMatrix<f64>,
    /// Whether the filter passed the invertibility check.
    pub invertible: bool,
}

/// `Y = V diag(Psi_L h) V^T X + eta U` with `U ~ Uniform(-1, 1)`.
pub fn synthesize(
    sg: &SpectralGraph,
    h: &FilterSpec,
    x: &DMatrix<f64>,
    eta: f64,
    seed: u64,
) -> Result<Synthesis> {
    if !(eta >= 0.0) {
        return Err(Error::InvalidParams(format!("noise level {eta} must be nonnegative")));
    }
    let response = h.response(sg)?;
    let invertible = check_invertibility(&response, INVERTIBILITY_TOL);
    if !invertible {
        log::warn!("sampled filter fails the invertibility check");
    }
    let mut y = apply_filter(sg, h, x)?;
    if eta > 0.0 {
        let mut rng = rng_from_seed(seed);
        for v in y.iter_mut() {
            *v += eta * rng.random_range(-1.0..1.0);
        }
    }
    Ok(Synthesis { y, invertible })
}
