#![allow(dead_code)]

use blast_core::{BlastMatrix, BlastShape, DenseMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian_vec(rng: &mut impl Rng, len: usize) -> Vec<f64> {
    (0..len).map(|_| rng.sample(StandardNormal)).collect()
}

pub fn random_dense(rng: &mut impl Rng, rows: usize, cols: usize) -> DenseMatrix<f64> {
    DenseMatrix::new(rows, cols, gaussian_vec(rng, rows * cols)).unwrap()
}

pub fn random_blast(rng: &mut impl Rng, m: usize, n: usize, b: usize, r: usize) -> BlastMatrix<f64> {
    let shape = BlastShape::new(m, n, b, r).unwrap();
    BlastMatrix::from_parts(
        shape,
        gaussian_vec(rng, m * r),
        gaussian_vec(rng, n * r),
        gaussian_vec(rng, b * b * r),
    )
    .unwrap()
}

/// Entry-by-entry definition of the dense form; shares no code with the library.
pub fn naive_dense(f: &BlastMatrix<f64>) -> DenseMatrix<f64> {
    let s = f.shape();
    let (p, q, r) = (s.p(), s.q(), s.r());
    DenseMatrix::from_fn(s.m(), s.n(), |row, col| {
        let (i, a) = (row / p, row % p);
        let (j, c) = (col / q, col % q);
        let (u, v, cp) = (f.u_block(i), f.v_block(j), f.coupling(i, j));
        (0..r).map(|k| u[a * r + k] * cp[k] * v[c * r + k]).sum()
    })
}

pub fn naive_matvec(d: &DenseMatrix<f64>, x: &[f64]) -> Vec<f64> {
    (0..d.rows())
        .map(|i| (0..d.cols()).map(|j| d[(i, j)] * x[j]).sum())
        .collect()
}

pub fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// `|a - b|_inf / |b|_inf`.
pub fn rel_inf(a: &[f64], b: &[f64]) -> f64 {
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    inf_norm(&diff) / inf_norm(b).max(f64::MIN_POSITIVE)
}

pub fn rel_fro(a: &DenseMatrix<f64>, b: &DenseMatrix<f64>) -> f64 {
    a.sub(b).unwrap().frobenius_norm() / b.frobenius_norm().max(f64::MIN_POSITIVE)
}

pub fn to_nalgebra(m: &DenseMatrix<f64>) -> nalgebra::DMatrix<f64> {
    nalgebra::DMatrix::from_row_slice(m.rows(), m.cols(), m.as_slice())
}

pub fn from_nalgebra(m: &nalgebra::DMatrix<f64>) -> DenseMatrix<f64> {
    DenseMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

/// Random orthonormal columns via QR of a Gaussian matrix.
pub fn orthonormal(rng: &mut impl Rng, rows: usize, cols: usize) -> DenseMatrix<f64> {
    let g = to_nalgebra(&random_dense(rng, rows, cols));
    from_nalgebra(&g.qr().q())
}
