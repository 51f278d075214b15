//! Small dense kernels used by the factorizer: Gram and Hadamard products,
//! largest-eigenvalue estimation and regularized SPD solves.

use crate::dense::{dot, DenseMatrix};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const POWER_ITERS: usize = 50;
pub const POWER_TOL: f64 = 1e-8;

/// `X^T X` for a row-major `p x r` slice. The result is symmetric bit for bit.
pub fn gram_slice<T: Scalar>(x: &[T], r: usize) -> DenseMatrix<T> {
    let mut g = DenseMatrix::zeros(r, r);
    for row in x.chunks_exact(r) {
        for a in 0..r {
            let ra = row[a];
            for c in a..r {
                g[(a, c)] += ra * row[c];
            }
        }
    }
    for a in 0..r {
        for c in 0..a {
            g[(a, c)] = g[(c, a)];
        }
    }
    g
}

/// `X^T X`.
pub fn gram<T: Scalar>(x: &DenseMatrix<T>) -> DenseMatrix<T> {
    gram_slice(x.as_slice(), x.cols())
}

/// Elementwise product.
pub fn hadamard<T: Scalar>(a: &DenseMatrix<T>, b: &DenseMatrix<T>) -> Result<DenseMatrix<T>> {
    if a.shape() != b.shape() {
        return Err(Error::dims(format!(
            "Hadamard product of {:?} and {:?}",
            a.shape(),
            b.shape()
        )));
    }
    Ok(DenseMatrix::from_vec_unchecked(
        a.rows(),
        a.cols(),
        a.as_slice().iter().zip(b.as_slice()).map(|(&x, &y)| x * y).collect(),
    ))
}

/// Largest eigenvalue of a symmetric PSD matrix (its spectral norm) by power
/// iteration from the normalized all-ones vector.
///
/// Stops once successive Rayleigh quotients agree to `tol` relative. Returns
/// [`Error::NoConvergence`] with the last estimate when `iters` runs out. A
/// zero matrix yields `0.0`.
pub fn sigma_max<T: Scalar>(m: &DenseMatrix<T>, iters: usize, tol: f64) -> Result<f64> {
    let n = m.rows();
    if m.cols() != n {
        return Err(Error::dims(format!("sigma_max needs a square matrix, got {:?}", m.shape())));
    }
    if n == 0 {
        return Ok(0.0);
    }
    let max_diag = m.diagonal().into_iter().fold(T::zero(), T::max).to_f64_lossless();
    if max_diag <= 0.0 {
        // A PSD matrix with a zero diagonal is zero.
        return Ok(0.0);
    }

    let start = vec![T::one(); n];
    let (est, converged) = power_iterate(m, start, iters, tol);
    // Rayleigh quotients never exceed the top eigenvalue, and every diagonal
    // entry is a Rayleigh quotient, so falling below the largest diagonal entry
    // means the ones vector missed the top eigenvector. Restart from that axis.
    let (est, converged) = if est < max_diag * (1.0 - tol) {
        let k = (0..n)
            .max_by(|&a, &b| m[(a, a)].partial_cmp(&m[(b, b)]).unwrap())
            .unwrap();
        let mut axis = vec![T::zero(); n];
        axis[k] = T::one();
        let retry = power_iterate(m, axis, iters, tol);
        if retry.0 >= est {
            retry
        } else {
            (est, converged)
        }
    } else {
        (est, converged)
    };

    if converged {
        Ok(est)
    } else {
        Err(Error::NoConvergence { estimate: est })
    }
}

/// Like [`sigma_max`], but on non-convergence returns the estimate inflated by
/// 1% so reciprocal step sizes err small.
pub fn sigma_max_bound<T: Scalar>(m: &DenseMatrix<T>, iters: usize, tol: f64) -> Result<f64> {
    match sigma_max(m, iters, tol) {
        Ok(v) => Ok(v),
        Err(Error::NoConvergence { estimate }) => Ok(estimate * 1.01),
        Err(e) => Err(e),
    }
}

fn power_iterate<T: Scalar>(m: &DenseMatrix<T>, mut v: Vec<T>, iters: usize, tol: f64) -> (f64, bool) {
    normalize(&mut v);
    let mut prev = f64::NAN;
    let mut w = vec![T::zero(); v.len()];
    for _ in 0..iters {
        for (i, o) in w.iter_mut().enumerate() {
            *o = dot(m.row(i), &v);
        }
        let rayleigh = dot(&v, &w).to_f64_lossless();
        if normalize(&mut w) == 0.0 {
            return (0.0, true);
        }
        std::mem::swap(&mut v, &mut w);
        if (rayleigh - prev).abs() <= tol * rayleigh.abs() {
            return (rayleigh, true);
        }
        prev = rayleigh;
    }
    (prev, false)
}

fn normalize<T: Scalar>(v: &mut [T]) -> f64 {
    let norm = dot(v, v).sqrt();
    if norm > T::zero() {
        v.iter_mut().for_each(|x| *x /= norm);
    }
    norm.to_f64_lossless()
}

/// Cholesky factor of `G + delta I`, reusable across right-hand sides.
#[derive(Debug, Clone)]
pub struct SpdSolveWorkspace<T> {
    dim: usize,
    delta: f64,
    /// Lower-triangular factor, row-major.
    chol: DenseMatrix<T>,
}

impl<T: Scalar> SpdSolveWorkspace<T> {
    /// Factors `G + delta I`. On a non-positive pivot retries once with
    /// `delta` raised by `10 delta` before reporting [`Error::NotPositiveDefinite`].
    pub fn new(g: &DenseMatrix<T>, delta: f64) -> Result<Self> {
        if g.rows() != g.cols() {
            return Err(Error::dims(format!("Gram matrix must be square, got {:?}", g.shape())));
        }
        match cholesky(g, delta) {
            Ok(chol) => Ok(Self { dim: g.rows(), delta, chol }),
            Err(_) => {
                let bumped = delta + 10.0 * delta;
                let chol = cholesky(g, bumped)?;
                Ok(Self { dim: g.rows(), delta: bumped, chol })
            }
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// The regularization actually used, after any retry.
    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Solves `(G + delta I) x = rhs` in place.
    pub fn solve_vec(&self, rhs: &mut [T]) {
        let n = self.dim;
        let l = &self.chol;
        for i in 0..n {
            let mut acc = rhs[i];
            for k in 0..i {
                acc -= l[(i, k)] * rhs[k];
            }
            rhs[i] = acc / l[(i, i)];
        }
        for i in (0..n).rev() {
            let mut acc = rhs[i];
            for k in i + 1..n {
                acc -= l[(k, i)] * rhs[k];
            }
            rhs[i] = acc / l[(i, i)];
        }
    }

    /// `(G + delta I)^{-1} B` for an `r x k` right-hand side.
    pub fn solve(&self, b: &DenseMatrix<T>) -> Result<DenseMatrix<T>> {
        if b.rows() != self.dim {
            return Err(Error::dims(format!(
                "right-hand side has {} rows, system has {}",
                b.rows(),
                self.dim
            )));
        }
        let bt = b.transpose();
        let mut xt = bt.clone();
        for col in xt.as_mut_slice().chunks_exact_mut(self.dim) {
            self.solve_vec(col);
        }
        Ok(xt.transpose())
    }

    /// `X (G + delta I)^{-1}` for a row-major `p x r` slice, in place. Uses the
    /// symmetry of the system: each row of `X` is an independent solve.
    pub fn solve_rows_in_place(&self, x: &mut [T]) {
        for row in x.chunks_exact_mut(self.dim) {
            self.solve_vec(row);
        }
    }
}

fn cholesky<T: Scalar>(g: &DenseMatrix<T>, delta: f64) -> Result<DenseMatrix<T>> {
    let n = g.rows();
    let d = T::from_f64_lossy(delta);
    let mut l = DenseMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let mut acc = g[(i, j)];
            if i == j {
                acc += d;
            }
            for k in 0..j {
                acc -= l[(i, k)] * l[(j, k)];
            }
            if i == j {
                if !(acc > T::zero()) || !acc.is_finite() {
                    return Err(Error::NotPositiveDefinite {
                        row: i,
                        pivot: acc.to_f64_lossless(),
                    });
                }
                l[(i, i)] = acc.sqrt();
            } else {
                l[(i, j)] = acc / l[(j, j)];
            }
        }
    }
    Ok(l)
}

/// Solves `(G + delta I) X = B` without forming the inverse.
pub fn spd_solve<T: Scalar>(g: &DenseMatrix<T>, delta: f64, b: &DenseMatrix<T>) -> Result<DenseMatrix<T>> {
    SpdSolveWorkspace::new(g, delta)?.solve(b)
}

/// Whether a symmetric matrix admits a Cholesky factorization as is.
pub fn is_positive_definite<T: Scalar>(g: &DenseMatrix<T>) -> bool {
    g.rows() == g.cols() && cholesky(g, 0.0).is_ok()
}
