//! The lifted operator `Z = Y^T V (Khatri-Rao) V`, kept implicit.
//!
//! Column `i` of `Z` is `vec(v_i ytilde_i^T)` where `ytilde_i` is row `i` of
//! `Ytilde = V^T Y`. Orthonormality of `V` makes `Z^T Z = diag(z)` with
//! `z_i = ||ytilde_i||^2`, so neither `Z` nor `Z^T Z` is ever formed.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative floor applied to `z` before any inversion.
pub const Z_FLOOR: f64 = 1e-12;

/// Largest `N * P` for which [`LiftedOperator::explicit`] will materialize `Z`.
pub const EXPLICIT_LIMIT: usize = 10_000;

#[derive(Debug, Clone)]
pub struct LiftedOperator {
    v: DMatrix<f64>,
    y_tilde: DMatrix<f64>,
    ztz_diag: DVector<f64>,
    z_regularized: DVector<f64>,
    floored: bool,
}

pub fn build_lifted(v: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<LiftedOperator> {
    let n = v.nrows();
    if v.ncols() != n || y.nrows() != n {
        return Err(Error::DimensionMismatch(format!(
            "V is {}x{}, Y is {}x{}",
            v.nrows(),
            v.ncols(),
            y.nrows(),
            y.ncols()
        )));
    }
    let y_tilde = v.tr_mul(y);
    let ztz_diag = DVector::from_iterator(n, y_tilde.row_iter().map(|r| r.norm_squared()));
    let (z_regularized, floored) = regularize_z(&ztz_diag, Z_FLOOR);
    Ok(LiftedOperator {
        v: v.clone(),
        y_tilde,
        ztz_diag,
        z_regularized,
        floored,
    })
}

/// Floor entries below `eps * max(z)`. An all-zero `z` (from `Y = 0`) is
/// replaced by ones: `Z = 0` there, so any positive diagonal gives the same
/// products.
pub fn regularize_z(z: &DVector<f64>, eps: f64) -> (DVector<f64>, bool) {
    let max = z.max();
    if !(max > 0.0) {
        return (DVector::from_element(z.len(), 1.0), true);
    }
    let floor = eps * max;
    let mut floored = false;
    let out = z.map(|v| {
        if v < floor {
            floored = true;
            floor
        } else {
            v
        }
    });
    (out, floored)
}

impl LiftedOperator {
    pub fn n_nodes(&self) -> usize {
        self.v.nrows()
    }

    pub fn n_signals(&self) -> usize {
        self.y_tilde.ncols()
    }

    pub fn v(&self) -> &DMatrix<f64> {
        &self.v
    }

    pub fn y_tilde(&self) -> &DMatrix<f64> {
        &self.y_tilde
    }

    /// Raw diagonal of `Z^T Z`.
    pub fn ztz_diag(&self) -> &DVector<f64> {
        &self.ztz_diag
    }

    /// Diagonal after flooring; this is what solvers invert.
    pub fn z_regularized(&self) -> &DVector<f64> {
        &self.z_regularized
    }

    /// Whether any diagonal entry had to be floored.
    pub fn floored(&self) -> bool {
        self.floored
    }

    /// `Z g`, returned as the `N x P` matrix `V diag(g) Ytilde`.
    pub fn matvec(&self, g_tilde: &DVector<f64>) -> DMatrix<f64> {
        let mut scaled = self.y_tilde.clone();
        for (i, mut row) in scaled.row_iter_mut().enumerate() {
            row *= g_tilde[i];
        }
        &self.v * scaled
    }

    /// `Z^T vec(x)`: entry `i` is `v_i^T x ytilde_i`.
    pub fn adjoint(&self, x: &DMatrix<f64>) -> DVector<f64> {
        let projected = self.v.tr_mul(x);
        DVector::from_iterator(
            self.n_nodes(),
            projected
                .row_iter()
                .zip(self.y_tilde.row_iter())
                .map(|(a, b)| a.dot(&b)),
        )
    }

    /// Materialize `Z` (`NP x N`). Intended for checks on small instances.
    pub fn explicit(&self) -> Result<DMatrix<f64>> {
        let (n, p) = (self.n_nodes(), self.n_signals());
        if n * p > EXPLICIT_LIMIT {
            return Err(Error::InvalidParams(format!(
                "refusing to materialize a {}x{n} lifted matrix",
                n * p
            )));
        }
        Ok(DMatrix::from_fn(n * p, n, |row, i| {
            let (node, col) = (row % n, row / n);
            self.v[(node, i)] * self.y_tilde[(i, col)]
        }))
    }
}

/// `unvec(Z g)`, the sources implied by an inverse-filter response.
pub fn recover_sources(op: &LiftedOperator, g_tilde: &DVector<f64>) -> DMatrix<f64> {
    op.matvec(g_tilde)
}
