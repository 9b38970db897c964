//! Shift-operator spectra and polynomial graph filters.
//!
//! The shift operator is the degree-normalized adjacency `S = D^{-1/2} A D^{-1/2}`.
//! Filters `H = sum_l h_l S^l` act diagonally in the eigenbasis of `S`, with
//! frequency response `Psi_L h` where `Psi_L` is the eigenvalue Vandermonde matrix.

use std::collections::HashMap;
use std::sync::{Arc, RwLock};

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::graph::Graph;

/// Default relative tolerance for [`check_invertibility`].
pub const INVERTIBILITY_TOL: f64 = 1e-8;

#[derive(Debug)]
pub struct SpectralGraph {
    graph: Graph,
    shift: DMatrix<f64>,
    eigvecs: DMatrix<f64>,
    eigvals: DVector<f64>,
    psi_cache: RwLock<HashMap<usize, Arc<DMatrix<f64>>>>,
}

impl Clone for SpectralGraph {
    fn clone(&self) -> Self {
        Self {
            graph: self.graph.clone(),
            shift: self.shift.clone(),
            eigvecs: self.eigvecs.clone(),
            eigvals: self.eigvals.clone(),
            psi_cache: RwLock::new(self.psi_cache.read().expect("cache lock").clone()),
        }
    }
}

/// Build the normalized shift operator and its sorted eigendecomposition.
pub fn build_shift(graph: &Graph) -> Result<SpectralGraph> {
    let n = graph.n_nodes();
    let degrees = graph.degrees();
    if let Some(node) = degrees.iter().position(|&d| d <= 0.0) {
        return Err(Error::IsolatedNode { node });
    }
    let inv_sqrt: Vec<f64> = degrees.iter().map(|d| 1.0 / d.sqrt()).collect();
    let a = graph.adjacency();
    let shift = DMatrix::from_fn(n, n, |i, j| inv_sqrt[i] * a[(i, j)] * inv_sqrt[j]);
    // Symmetrize exactly so the eigensolver sees a self-adjoint matrix.
    let shift = (&shift + shift.transpose()) * 0.5;

    let eig = SymmetricEigen::new(shift.clone());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));

    let eigvals = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut eigvecs = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        let mut col = eig.eigenvectors.column(src).clone_owned();
        // Largest-magnitude entry positive; the first index wins ties.
        let mut best = 0;
        for i in 1..n {
            if col[i].abs() > col[best].abs() {
                best = i;
            }
        }
        if col[best] < 0.0 {
            col.neg_mut();
        }
        eigvecs.set_column(dst, &col);
    }

    Ok(SpectralGraph {
        graph: graph.clone(),
        shift,
        eigvecs,
        eigvals,
        psi_cache: RwLock::new(HashMap::new()),
    })
}

impl SpectralGraph {
    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn n_nodes(&self) -> usize {
        self.eigvals.len()
    }

    pub fn shift(&self) -> &DMatrix<f64> {
        &self.shift
    }

    /// Orthonormal eigenvectors `V`, one per column, matching [`Self::eigvals`].
    pub fn eigvecs(&self) -> &DMatrix<f64> {
        &self.eigvecs
    }

    /// Eigenvalues in ascending order.
    pub fn eigvals(&self) -> &DVector<f64> {
        &self.eigvals
    }

    /// `N x L` Vandermonde matrix with entries `lambda_i^j`, `j = 0..L`.
    pub fn vandermonde(&self, order: usize) -> Result<Arc<DMatrix<f64>>> {
        let n = self.n_nodes();
        if order == 0 || order > n {
            return Err(Error::OrderOutOfRange { order, max: n });
        }
        if let Some(psi) = self.psi_cache.read().expect("cache lock").get(&order) {
            return Ok(Arc::clone(psi));
        }
        let psi = Arc::new(DMatrix::from_fn(n, order, |i, j| self.eigvals[i].powi(j as i32)));
        self.psi_cache
            .write()
            .expect("cache lock")
            .insert(order, Arc::clone(&psi));
        Ok(psi)
    }

    /// Graph Fourier transform `V^T x`.
    pub fn gft(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        self.eigvecs.tr_mul(x)
    }

    pub fn igft(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        &self.eigvecs * x
    }

    /// Apply `V diag(response) V^T` to every column of `x`.
    pub fn apply_response(&self, response: &DVector<f64>, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let n = self.n_nodes();
        if response.len() != n || x.nrows() != n {
            return Err(Error::DimensionMismatch(format!(
                "response has {} entries and signal has {} rows; graph has {n} nodes",
                response.len(),
                x.nrows()
            )));
        }
        let mut spectral = self.gft(x);
        for (i, mut row) in spectral.row_iter_mut().enumerate() {
            row *= response[i];
        }
        Ok(self.igft(&spectral))
    }
}

/// Filter coefficients, frequency response, or both.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterSpec {
    coeffs: Option<DVector<f64>>,
    freq_response: Option<DVector<f64>>,
}

impl FilterSpec {
    pub fn from_coeffs(h: DVector<f64>) -> Self {
        Self {
            coeffs: Some(h),
            freq_response: None,
        }
    }

    pub fn from_response(response: DVector<f64>) -> Self {
        Self {
            coeffs: None,
            freq_response: Some(response),
        }
    }

    /// Attach both; fails if `response != Psi_L h` beyond 1e-10.
    pub fn with_both(sg: &SpectralGraph, h: DVector<f64>, response: DVector<f64>) -> Result<Self> {
        let expected = FilterSpec::from_coeffs(h.clone()).response(sg)?;
        if expected.len() != response.len() || (&expected - &response).amax() > 1e-10 {
            return Err(Error::InvalidParams(
                "frequency response does not match Psi_L h".into(),
            ));
        }
        Ok(Self {
            coeffs: Some(h),
            freq_response: Some(response),
        })
    }

    pub fn coeffs(&self) -> Option<&DVector<f64>> {
        self.coeffs.as_ref()
    }

    pub fn order(&self) -> Option<usize> {
        self.coeffs.as_ref().map(|h| h.len())
    }

    /// Frequency response on `sg`; computed as `Psi_L h` when only coefficients are stored.
    pub fn response(&self, sg: &SpectralGraph) -> Result<DVector<f64>> {
        if let Some(r) = &self.freq_response {
            return Ok(r.clone());
        }
        let h = self
            .coeffs
            .as_ref()
            .ok_or_else(|| Error::InvalidParams("filter has neither coefficients nor response".into()))?;
        let psi = sg.vandermonde(h.len())?;
        Ok(psi.as_ref() * h)
    }
}

/// Returns `V diag(Psi_L h) V^T X`.
pub fn apply_filter(sg: &SpectralGraph, h: &FilterSpec, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let response = h.response(sg)?;
    sg.apply_response(&response, x)
}

/// `min |h_i| > tol * max |h_i|`.
pub fn check_invertibility(h_tilde: &DVector<f64>, tol: f64) -> bool {
    if h_tilde.is_empty() {
        return false;
    }
    let min = h_tilde.iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
    let max = h_tilde.amax();
    max > 0.0 && min > tol * max
}

pub fn inverse_response(h_tilde: &DVector<f64>) -> Result<DVector<f64>> {
    if !check_invertibility(h_tilde, INVERTIBILITY_TOL) {
        let min = h_tilde.iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
        return Err(Error::NonInvertibleFilter {
            min,
            max: h_tilde.amax(),
        });
    }
    Ok(h_tilde.map(|h| 1.0 / h))
}

#[derive(Debug, Clone)]
pub struct FilterFit {
    pub coeffs: DVector<f64>,
    /// `||Psi_L h - 1/g||_2`.
    pub residual: f64,
    pub rank: usize,
    pub rank_deficient: bool,
}

/// Minimum-norm least-squares fit of `Psi_L h ~ 1/g_tilde`.
pub fn recover_filter_coeffs(sg: &SpectralGraph, g_tilde: &DVector<f64>, order: usize) -> Result<FilterFit> {
    let n = sg.n_nodes();
    if g_tilde.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "g_tilde has {} entries, graph has {n} nodes",
            g_tilde.len()
        )));
    }
    let psi = sg.vandermonde(order)?;
    let target = g_tilde.map(|g| 1.0 / g);
    let svd = psi.as_ref().clone().svd(true, true);
    let sigma_max = svd.singular_values.max();
    let cutoff = n.max(order) as f64 * f64::EPSILON * sigma_max;
    let rank = svd.singular_values.iter().filter(|&&s| s > cutoff).count();
    let coeffs = svd
        .solve(&target, cutoff)
        .map_err(|e| Error::InvalidParams(e.to_string()))?;
    let residual = (psi.as_ref() * &coeffs - &target).norm();
    Ok(FilterFit {
        coeffs,
        residual,
        rank,
        rank_deficient: rank < order,
    })
}

/// `||(I - 11^T / N) g||_2`, the conditioning diagnostic of a recovery instance.
pub fn projector_norm(g_tilde: &DVector<f64>) -> f64 {
    if g_tilde.is_empty() {
        return 0.0;
    }
    let mean = g_tilde.mean();
    g_tilde.iter().map(|g| (g - mean).powi(2)).sum::<f64>().sqrt()
}
