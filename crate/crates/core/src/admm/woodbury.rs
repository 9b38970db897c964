//! Solves with `diag(z) + rho M M^T` through the matrix inversion lemma:
//!
//! `(diag(z) + rho M M^T)^{-1} = diag(1/z) - diag(1/z) M Mbar^{-1} M^T diag(1/z)`
//! with the `d x d` capacitance `Mbar = I/rho + M^T diag(1/z) M`.
//!
//! Only `Mbar^{-1}` is stored; every apply costs `O(N d + d^2)`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct WoodburyFactor {
    z_inv: DVector<f64>,
    m: DMatrix<f64>,
    rho: f64,
    cap_inv: Capacitance,
}

#[derive(Debug, Clone)]
enum Capacitance {
    /// `rho = 0`: the correction vanishes.
    None,
    /// `d = 1`: `1 / zeta` with `zeta = 1/rho + sum_i m_i^2 / z_i`.
    Scalar(f64),
    Dense(DMatrix<f64>),
}

impl WoodburyFactor {
    /// `z` must be strictly positive (apply [`super::regularize_z`] first).
    pub fn new(z: &DVector<f64>, rho: f64, m: &DMatrix<f64>) -> Result<Self> {
        let n = z.len();
        if m.nrows() != n || m.ncols() == 0 {
            return Err(Error::DimensionMismatch(format!(
                "M is {}x{}, expected {n} rows and at least one column",
                m.nrows(),
                m.ncols()
            )));
        }
        if !(rho >= 0.0) {
            return Err(Error::InvalidParams(format!("rho = {rho} must be nonnegative")));
        }
        if let Some(index) = z.iter().position(|&v| !(v > 0.0)) {
            return Err(Error::ZeroDiagonal { index, value: z[index] });
        }
        let z_inv = z.map(|v| 1.0 / v);
        let cap_inv = if rho == 0.0 {
            Capacitance::None
        } else if m.ncols() == 1 {
            let col = m.column(0);
            let quad: f64 = col.iter().zip(z_inv.iter()).map(|(mi, zi)| mi * mi * zi).sum();
            let zeta = 1.0 / rho + quad;
            if !(zeta.is_finite() && zeta.abs() > 0.0) {
                return Err(Error::SingularCapacitance);
            }
            Capacitance::Scalar(1.0 / zeta)
        } else {
            // Mbar^{-1} = rho (I + rho M^T diag(1/z) M)^{-1}; the shifted form
            // stays finite as rho -> 0.
            let d = m.ncols();
            let mut scaled = m.clone();
            for (i, mut row) in scaled.row_iter_mut().enumerate() {
                row *= z_inv[i];
            }
            let gram = m.tr_mul(&scaled);
            let shifted = DMatrix::identity(d, d) + gram * rho;
            let chol = shifted.cholesky().ok_or(Error::SingularCapacitance)?;
            let inv = chol.inverse() * rho;
            if inv.iter().any(|v| !v.is_finite()) {
                return Err(Error::SingularCapacitance);
            }
            Capacitance::Dense(inv)
        };
        Ok(Self {
            z_inv,
            m: m.clone(),
            rho,
            cap_inv,
        })
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn m(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn z_inv(&self) -> &DVector<f64> {
        &self.z_inv
    }

    /// `Mbar^{-1}` as a `d x d` matrix (zero when `rho = 0`).
    pub fn capacitance_inverse(&self) -> DMatrix<f64> {
        let d = self.m.ncols();
        match &self.cap_inv {
            Capacitance::None => DMatrix::zeros(d, d),
            Capacitance::Scalar(s) => DMatrix::from_element(1, 1, *s),
            Capacitance::Dense(m) => m.clone(),
        }
    }

    /// `(diag(z) + rho M M^T)^{-1} rhs`.
    pub fn solve(&self, rhs: &DVector<f64>) -> DVector<f64> {
        let w = self.z_inv.component_mul(rhs);
        let correction = match &self.cap_inv {
            Capacitance::None => return w,
            Capacitance::Scalar(inv_zeta) => {
                let col = self.m.column(0);
                col * (inv_zeta * col.dot(&w))
            }
            Capacitance::Dense(cap_inv) => &self.m * (cap_inv * self.m.tr_mul(&w)),
        };
        w - self.z_inv.component_mul(&correction)
    }
}

pub fn woodbury_solve(z: &DVector<f64>, rho: f64, m: &DMatrix<f64>, rhs: &DVector<f64>) -> Result<DVector<f64>> {
    if rhs.len() != z.len() {
        return Err(Error::DimensionMismatch(format!(
            "rhs has {} entries, z has {}",
            rhs.len(),
            z.len()
        )));
    }
    Ok(WoodburyFactor::new(z, rho, m)?.solve(rhs))
}
