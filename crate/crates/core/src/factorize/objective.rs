//! The blockwise least-squares objective and its analytic gradients.
//!
//! Notation: `Vbar_i` stacks `V_j diag(s_ij)` over `j`, so block-row `i` of the
//! model is `U_i Vbar_i^T`; `Ubar_j` stacks `U_i diag(s_ij)` over `i`, so
//! block-column `j` is `Ubar_j V_j^T`. Their Gram matrices are assembled from
//! the per-block Grams without materializing the stacks:
//! `Vbar_i^T Vbar_i = sum_j (V_j^T V_j) .* (s_ij s_ij^T)`.

use crate::blast::{BlastMatrix, BlastShape};
use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::linalg::gram_slice;
use crate::ops::to_dense;
use crate::scalar::Scalar;

pub(crate) fn check_target<T: Scalar>(a: &DenseMatrix<T>, f: &BlastMatrix<T>) -> Result<()> {
    let shape = f.shape();
    if a.shape() != (shape.m(), shape.n()) {
        return Err(Error::dims(format!(
            "target is {}x{}, factors describe {}x{}",
            a.rows(),
            a.cols(),
            shape.m(),
            shape.n()
        )));
    }
    Ok(())
}

/// `sum_ij 1/2 ||A_ij - U_i diag(s_ij) V_j^T||_F^2`, accumulated in `f64`.
pub fn loss<T: Scalar>(a: &DenseMatrix<T>, f: &BlastMatrix<T>) -> Result<f64> {
    check_target(a, f)?;
    let model = to_dense(f);
    let sq: f64 = a
        .as_slice()
        .iter()
        .zip(model.as_slice())
        .map(|(&x, &y)| {
            let d = (x - y).to_f64_lossless();
            d * d
        })
        .sum();
    Ok(0.5 * sq)
}

pub(crate) fn u_grams<T: Scalar>(f: &BlastMatrix<T>) -> Vec<DenseMatrix<T>> {
    (0..f.shape().b()).map(|i| gram_slice(f.u_block(i), f.shape().r())).collect()
}

pub(crate) fn v_grams<T: Scalar>(f: &BlastMatrix<T>) -> Vec<DenseMatrix<T>> {
    (0..f.shape().b()).map(|j| gram_slice(f.v_block(j), f.shape().r())).collect()
}

/// `sum_k G_k .* (s_k s_k^T)` for pairs `(G_k, s_k)`.
fn coupled_gram<'a, T: Scalar>(
    r: usize,
    terms: impl Iterator<Item = (&'a DenseMatrix<T>, &'a [T])>,
) -> DenseMatrix<T> {
    let mut out = DenseMatrix::zeros(r, r);
    for (g, s) in terms {
        for a in 0..r {
            for c in 0..r {
                out[(a, c)] += g[(a, c)] * s[a] * s[c];
            }
        }
    }
    out
}

pub(crate) fn row_gram_with<T: Scalar>(
    f: &BlastMatrix<T>,
    v_grams: &[DenseMatrix<T>],
    i: usize,
) -> DenseMatrix<T> {
    coupled_gram(f.shape().r(), v_grams.iter().enumerate().map(|(j, g)| (g, f.coupling(i, j))))
}

pub(crate) fn col_gram_with<T: Scalar>(
    f: &BlastMatrix<T>,
    u_grams: &[DenseMatrix<T>],
    j: usize,
) -> DenseMatrix<T> {
    coupled_gram(f.shape().r(), u_grams.iter().enumerate().map(|(i, g)| (g, f.coupling(i, j))))
}

/// `Vbar_i^T Vbar_i`.
pub fn row_gram<T: Scalar>(f: &BlastMatrix<T>, i: usize) -> DenseMatrix<T> {
    row_gram_with(f, &v_grams(f), i)
}

/// `Ubar_j^T Ubar_j`.
pub fn col_gram<T: Scalar>(f: &BlastMatrix<T>, j: usize) -> DenseMatrix<T> {
    col_gram_with(f, &u_grams(f), j)
}

/// `W_ij = (U_i^T U_i) .* (V_j^T V_j)`.
pub fn coupling_gram<T: Scalar>(f: &BlastMatrix<T>, i: usize, j: usize) -> DenseMatrix<T> {
    let r = f.shape().r();
    hadamard_of(&gram_slice(f.u_block(i), r), &gram_slice(f.v_block(j), r))
}

pub(crate) fn hadamard_of<T: Scalar>(a: &DenseMatrix<T>, b: &DenseMatrix<T>) -> DenseMatrix<T> {
    crate::linalg::hadamard(a, b).expect("Gram matrices share the rank dimension")
}

/// `A_ij V_j` as a row-major `p x r` buffer.
pub(crate) fn block_times_v<T: Scalar>(a: &DenseMatrix<T>, f: &BlastMatrix<T>, i: usize, j: usize) -> Vec<T> {
    let shape = f.shape();
    let (p, q, r) = (shape.p(), shape.q(), shape.r());
    let vj = f.v_block(j);
    let mut out = vec![T::zero(); p * r];
    for (row, dst) in out.chunks_exact_mut(r).enumerate() {
        let a_row = &a.row(i * p + row)[j * q..(j + 1) * q];
        for (&x, vrow) in a_row.iter().zip(vj.chunks_exact(r)) {
            for (o, &v) in dst.iter_mut().zip(vrow) {
                *o += x * v;
            }
        }
    }
    out
}

/// `A_ij^T U_i` as a row-major `q x r` buffer.
pub(crate) fn block_t_times_u<T: Scalar>(a: &DenseMatrix<T>, f: &BlastMatrix<T>, i: usize, j: usize) -> Vec<T> {
    let shape = f.shape();
    let (p, q, r) = (shape.p(), shape.q(), shape.r());
    let ui = f.u_block(i);
    let mut out = vec![T::zero(); q * r];
    for (row, urow) in ui.chunks_exact(r).enumerate() {
        let a_row = &a.row(i * p + row)[j * q..(j + 1) * q];
        for (&x, dst) in a_row.iter().zip(out.chunks_exact_mut(r)) {
            for (o, &u) in dst.iter_mut().zip(urow) {
                *o += x * u;
            }
        }
    }
    out
}

/// `X G - sum_k Y_k diag(s_k)` for a row-major `rows x r` factor `X`.
fn factor_gradient<T: Scalar>(
    x: &[T],
    g: &DenseMatrix<T>,
    r: usize,
    cross: impl Iterator<Item = (Vec<T>, Vec<T>)>,
) -> Vec<T> {
    let mut out = vec![T::zero(); x.len()];
    for (dst, xrow) in out.chunks_exact_mut(r).zip(x.chunks_exact(r)) {
        for (k, &xv) in xrow.iter().enumerate() {
            for (o, &gv) in dst.iter_mut().zip(g.row(k)) {
                *o += xv * gv;
            }
        }
    }
    for (y, s) in cross {
        for (dst, yrow) in out.chunks_exact_mut(r).zip(y.chunks_exact(r)) {
            for ((o, &yv), &sv) in dst.iter_mut().zip(yrow).zip(&s) {
                *o -= yv * sv;
            }
        }
    }
    out
}

pub(crate) fn grad_u_with<T: Scalar>(
    a: &DenseMatrix<T>,
    f: &BlastMatrix<T>,
    i: usize,
    gbar: &DenseMatrix<T>,
) -> Vec<T> {
    let b = f.shape().b();
    factor_gradient(
        f.u_block(i),
        gbar,
        f.shape().r(),
        (0..b).map(|j| (block_times_v(a, f, i, j), f.coupling(i, j).to_vec())),
    )
}

pub(crate) fn grad_v_with<T: Scalar>(
    a: &DenseMatrix<T>,
    f: &BlastMatrix<T>,
    j: usize,
    gbar: &DenseMatrix<T>,
) -> Vec<T> {
    let b = f.shape().b();
    factor_gradient(
        f.v_block(j),
        gbar,
        f.shape().r(),
        (0..b).map(|i| (block_t_times_u(a, f, i, j), f.coupling(i, j).to_vec())),
    )
}

/// `diag(U_i^T A_ij V_j)`.
pub(crate) fn projected_diag<T: Scalar>(a: &DenseMatrix<T>, f: &BlastMatrix<T>, i: usize, j: usize) -> Vec<T> {
    let r = f.shape().r();
    let av = block_times_v(a, f, i, j);
    let mut d = vec![T::zero(); r];
    for (urow, avrow) in f.u_block(i).chunks_exact(r).zip(av.chunks_exact(r)) {
        for ((o, &u), &x) in d.iter_mut().zip(urow).zip(avrow) {
            *o += u * x;
        }
    }
    d
}

pub(crate) fn grad_s_with<T: Scalar>(
    a: &DenseMatrix<T>,
    f: &BlastMatrix<T>,
    i: usize,
    j: usize,
    w: &DenseMatrix<T>,
) -> Vec<T> {
    let s = f.coupling(i, j);
    let d = projected_diag(a, f, i, j);
    (0..s.len())
        .map(|c| crate::dense::dot(w.row(c), s) - d[c])
        .collect()
}

fn check_index(shape: BlastShape, idx: &[usize]) -> Result<()> {
    if idx.iter().any(|&k| k >= shape.b()) {
        return Err(Error::dims(format!("block index {idx:?} out of range for b={}", shape.b())));
    }
    Ok(())
}

/// Gradient of the objective with respect to `U_i`: `(U_i Vbar_i^T - A_i*) Vbar_i`.
pub fn grad_u<T: Scalar>(a: &DenseMatrix<T>, f: &BlastMatrix<T>, i: usize) -> Result<DenseMatrix<T>> {
    check_target(a, f)?;
    check_index(f.shape(), &[i])?;
    let g = grad_u_with(a, f, i, &row_gram(f, i));
    Ok(DenseMatrix::from_vec_unchecked(f.shape().p(), f.shape().r(), g))
}

/// Gradient with respect to `V_j`: `(Ubar_j V_j^T - A_*j)^T Ubar_j`.
pub fn grad_v<T: Scalar>(a: &DenseMatrix<T>, f: &BlastMatrix<T>, j: usize) -> Result<DenseMatrix<T>> {
    check_target(a, f)?;
    check_index(f.shape(), &[j])?;
    let g = grad_v_with(a, f, j, &col_gram(f, j));
    Ok(DenseMatrix::from_vec_unchecked(f.shape().q(), f.shape().r(), g))
}

/// Gradient with respect to `s_ij`: `W_ij s_ij - diag(U_i^T A_ij V_j)`.
pub fn grad_s<T: Scalar>(a: &DenseMatrix<T>, f: &BlastMatrix<T>, i: usize, j: usize) -> Result<Vec<T>> {
    check_target(a, f)?;
    check_index(f.shape(), &[i, j])?;
    Ok(grad_s_with(a, f, i, j, &coupling_gram(f, i, j)))
}
