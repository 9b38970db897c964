use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Default support threshold.
pub const DEFAULT_KAPPA: f64 = 0.1;

/// Sign that best aligns `x_hat` with `x`: `+1` unless `-x_hat` is strictly closer.
pub fn best_sign(x_hat: &DMatrix<f64>, x: &DMatrix<f64>) -> f64 {
    let minus: f64 = x_hat.iter().zip(x.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
    let plus: f64 = x_hat.iter().zip(x.iter()).map(|(a, b)| (a + b) * (a + b)).sum();
    if minus <= plus {
        1.0
    } else {
        -1.0
    }
}

fn check_same_shape(x_hat: &DMatrix<f64>, x: &DMatrix<f64>) -> Result<()> {
    if x_hat.shape() != x.shape() {
        return Err(Error::DimensionMismatch(format!(
            "estimate {:?} vs reference {:?}",
            x_hat.shape(),
            x.shape()
        )));
    }
    Ok(())
}

/// `min_s ||s Xhat - X||_F / ||X||_F` over `s in {+1, -1}`.
pub fn relative_error_signed(x_hat: &DMatrix<f64>, x: &DMatrix<f64>) -> Result<f64> {
    check_same_shape(x_hat, x)?;
    let scale = x.norm();
    if !(scale > 0.0) {
        return Err(Error::ZeroTarget);
    }
    let s = best_sign(x_hat, x);
    Ok((x_hat * s - x).norm() / scale)
}

/// Least-squares scale taking `g_hat` onto `g0`.
pub fn alignment_scale(g_hat: &DVector<f64>, g0: &DVector<f64>) -> Result<f64> {
    if g_hat.len() != g0.len() {
        return Err(Error::DimensionMismatch(format!(
            "estimate has {} entries, reference {}",
            g_hat.len(),
            g0.len()
        )));
    }
    let den = g_hat.norm_squared();
    if !(den > 0.0) || !(g0.norm() > 0.0) {
        return Err(Error::ZeroVector);
    }
    Ok(g_hat.dot(g0) / den)
}

/// `||s* g_hat - g0|| / ||g0||` with `s* = <g_hat, g0> / ||g_hat||^2`.
pub fn relative_error_aligned(g_hat: &DVector<f64>, g0: &DVector<f64>) -> Result<f64> {
    let s = alignment_scale(g_hat, g0)?;
    Ok((g_hat * s - g0).norm() / g0.norm())
}

/// Fraction of entries classified alike by `|.| >= kappa` in the sign-aligned
/// estimate and in the reference.
pub fn support_accuracy(x_hat: &DMatrix<f64>, x: &DMatrix<f64>, kappa: f64) -> Result<f64> {
    check_same_shape(x_hat, x)?;
    if !(kappa > 0.0) {
        return Err(Error::InvalidParams(format!("kappa = {kappa} must be positive")));
    }
    if x.is_empty() {
        return Ok(1.0);
    }
    // The support test is on magnitudes, so the sign alignment cannot change it.
    let agree = x_hat
        .iter()
        .zip(x.iter())
        .filter(|(a, b)| (a.abs() >= kappa) == (b.abs() >= kappa))
        .count();
    Ok(agree as f64 / x.len() as f64)
}

/// Community of the largest-magnitude entry of `x_hat` (lowest index on ties).
pub fn community_estimate(x_hat: &DVector<f64>, communities: &[usize]) -> Result<usize> {
    if communities.len() != x_hat.len() || x_hat.is_empty() {
        return Err(Error::DimensionMismatch(format!(
            "{} entries vs {} community labels",
            x_hat.len(),
            communities.len()
        )));
    }
    let mut best = 0;
    for (i, v) in x_hat.iter().enumerate() {
        if v.abs() > x_hat[best].abs() {
            best = i;
        }
    }
    Ok(communities[best])
}

/// Fraction of columns whose estimated community matches `labels`.
pub fn community_accuracy(x_hat: &DMatrix<f64>, communities: &[usize], labels: &[usize]) -> Result<f64> {
    if labels.len() != x_hat.ncols() || labels.is_empty() {
        return Err(Error::DimensionMismatch(format!(
            "{} columns vs {} labels",
            x_hat.ncols(),
            labels.len()
        )));
    }
    let mut hits = 0;
    for (j, &want) in labels.iter().enumerate() {
        if community_estimate(&x_hat.column(j).into_owned(), communities)? == want {
            hits += 1;
        }
    }
    Ok(hits as f64 / labels.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::{random_matrix, random_vector};
    use proptest::prelude::*;

    #[test]
    fn signed_error_examples() {
        let x = random_matrix(5, 4, 1);
        assert_eq!(relative_error_signed(&x, &x).unwrap(), 0.0);
        assert_eq!(relative_error_signed(&-&x, &x).unwrap(), 0.0);
        let mut e = random_matrix(5, 4, 2);
        e *= 0.1 * x.norm() / e.norm();
        let got = relative_error_signed(&(&x + &e), &x).unwrap();
        assert!((got - 0.1).abs() < 1e-12);
        assert!(matches!(
            relative_error_signed(&x, &DMatrix::zeros(5, 4)),
            Err(Error::ZeroTarget)
        ));
    }

    #[test]
    fn aligned_error_examples() {
        let g0 = random_vector(6, 3);
        assert!(relative_error_aligned(&(&g0 * 3.0), &g0).unwrap() < 1e-15);
        let mut ortho = random_vector(6, 4);
        ortho -= &g0 * (ortho.dot(&g0) / g0.norm_squared());
        assert!((relative_error_aligned(&ortho, &g0).unwrap() - 1.0).abs() < 1e-12);

        // g_hat = g0 + E with E orthogonal and ||E|| = 0.2 ||g0||:
        // s* = 1/1.04 and the residual is 0.2/sqrt(1.04).
        let e = &ortho * (0.2 * g0.norm() / ortho.norm());
        let got = relative_error_aligned(&(&g0 + e), &g0).unwrap();
        assert!((got - 0.2 / 1.04f64.sqrt()).abs() < 1e-12);
        assert!(matches!(
            relative_error_aligned(&DVector::zeros(6), &g0),
            Err(Error::ZeroVector)
        ));
    }

    #[test]
    fn accuracy_examples() {
        let x = DMatrix::from_row_slice(2, 3, &[0.0, 0.5, -0.2, 0.05, 0.0, 1.0]);
        assert_eq!(support_accuracy(&x, &x, 0.1).unwrap(), 1.0);
        // Three entries reach the threshold.
        assert_eq!(support_accuracy(&DMatrix::zeros(2, 3), &x, 0.1).unwrap(), 0.5);
        assert!(support_accuracy(&x, &x, 0.0).is_err());
    }

    #[test]
    fn community_examples() {
        let blocks = [0, 0, 1, 1, 2];
        let mut e = DVector::zeros(5);
        e[3] = -1.0;
        assert_eq!(community_estimate(&e, &blocks).unwrap(), 1);
        let tie = DVector::from_vec(vec![0.0, 2.0, 0.0, 0.0, -2.0]);
        assert_eq!(community_estimate(&tie, &blocks).unwrap(), 0);
        assert!(community_estimate(&tie, &blocks[..4]).is_err());
    }

    proptest! {
        #[test]
        fn signed_error_ignores_global_sign(seed in 0u64..1000) {
            let x = random_matrix(4, 3, seed);
            let xh = random_matrix(4, 3, seed + 1);
            prop_assert_eq!(relative_error_signed(&xh, &x).unwrap(), relative_error_signed(&-&xh, &x).unwrap());
            prop_assert_eq!(support_accuracy(&xh, &x, 0.3).unwrap(), support_accuracy(&-&xh, &x, 0.3).unwrap());
        }

        #[test]
        fn aligned_error_ignores_scale(seed in 0u64..1000, s in prop_oneof![-50.0f64..-0.01, 0.01f64..50.0]) {
            let g0 = random_vector(7, seed);
            let gh = random_vector(7, seed + 1);
            let a = relative_error_aligned(&gh, &g0).unwrap();
            let b = relative_error_aligned(&(&gh * s), &g0).unwrap();
            prop_assert!((a - b).abs() <= 1e-12 * a.max(1.0));
        }

        #[test]
        fn accuracy_stays_in_unit_interval(seed in 0u64..1000, kappa in 0.01f64..2.0) {
            let acc = support_accuracy(&random_matrix(3, 5, seed), &random_matrix(3, 5, seed + 7), kappa).unwrap();
            prop_assert!((0.0..=1.0).contains(&acc));
        }
    }
}
