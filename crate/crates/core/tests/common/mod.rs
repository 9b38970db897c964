#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use slog_core::datagen::{gen_graph, GraphSpec};
use slog_core::rng::rng_from_seed;
use slog_core::{build_shift, SpectralGraph};

pub fn random_matrix(rows: usize, cols: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = rng_from_seed(seed);
    DMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

pub fn random_vector(n: usize, seed: u64) -> DVector<f64> {
    random_matrix(n, 1, seed).column(0).into_owned()
}

pub fn er_graph(n: usize, seed: u64) -> SpectralGraph {
    let g = gen_graph(&GraphSpec::Er { n, p: 0.4 }, seed).unwrap();
    build_shift(&g).unwrap()
}

pub fn vec_of(m: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_column_slice(m.as_slice())
}

/// Dense solve by Gaussian elimination with partial pivoting.
pub fn dense_solve(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let n = a.nrows();
    let mut m = a.clone();
    let mut x = b.clone();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| m[(i, col)].abs().total_cmp(&m[(j, col)].abs()))
            .unwrap();
        m.swap_rows(col, piv);
        x.swap_rows(col, piv);
        for i in col + 1..n {
            let f = m[(i, col)] / m[(col, col)];
            for j in col..n {
                m[(i, j)] -= f * m[(col, j)];
            }
            x[i] -= f * x[col];
        }
    }
    for i in (0..n).rev() {
        let mut s = x[i];
        for j in i + 1..n {
            s -= m[(i, j)] * x[j];
        }
        x[i] = s / m[(i, i)];
    }
    x
}
