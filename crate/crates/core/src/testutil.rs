//! Helpers shared by unit tests.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::rng::rng_from_seed;

pub fn random_matrix(rows: usize, cols: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = rng_from_seed(seed);
    DMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

pub fn random_vector(n: usize, seed: u64) -> DVector<f64> {
    random_matrix(n, 1, seed).column(0).into_owned()
}

pub fn random_orthonormal(n: usize, seed: u64) -> DMatrix<f64> {
    random_matrix(n, n, seed).qr().q()
}

/// Gauss-Jordan elimination with partial pivoting.
pub fn gauss_jordan_solve(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let n = a.nrows();
    let mut m = DMatrix::zeros(n, n + 1);
    m.view_mut((0, 0), (n, n)).copy_from(a);
    m.set_column(n, b);
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| m[(i, col)].abs().total_cmp(&m[(j, col)].abs()))
            .unwrap();
        m.swap_rows(col, pivot);
        let p = m[(col, col)];
        for j in 0..=n {
            m[(col, j)] /= p;
        }
        for i in 0..n {
            if i != col {
                let f = m[(i, col)];
                for j in 0..=n {
                    m[(i, j)] -= f * m[(col, j)];
                }
            }
        }
    }
    m.column(n).into_owned()
}
