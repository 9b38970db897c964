use nalgebra::DMatrix;

use crate::error::{Error, Result};

#[inline]
pub fn shrink(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

/// Elementwise `sign(v) max(|v| - t, 0)`.
pub fn soft_threshold(v: &DMatrix<f64>, t: f64) -> Result<DMatrix<f64>> {
    if !(t >= 0.0) {
        return Err(Error::NegativeThreshold(t));
    }
    Ok(v.map(|x| shrink(x, t)))
}
