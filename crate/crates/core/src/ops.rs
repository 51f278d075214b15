//! Structured products with a BLAST matrix and dense materialization.
//!
//! Summation orders are fixed (ascending row index inside `V_j^T x_j`,
//! ascending `j` when aggregating couplings, ascending rank index inside
//! `U_i z`) so `matmul` reproduces `matvec` bit for bit row by row.

use crate::blast::BlastMatrix;
use crate::dense::{dot, DenseMatrix};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Observer for the scalar multiplications a product performs.
pub trait MulCounter {
    fn add(&mut self, count: usize);
}

/// Counter that records nothing and compiles away.
#[derive(Debug, Default, Clone, Copy)]
pub struct NoCount;

impl MulCounter for NoCount {
    #[inline(always)]
    fn add(&mut self, _: usize) {}
}

/// Counter that tallies every multiplication.
#[derive(Debug, Default, Clone, Copy, PartialEq, Eq)]
pub struct MulTally(pub usize);

impl MulCounter for MulTally {
    #[inline]
    fn add(&mut self, count: usize) {
        self.0 += count;
    }
}

/// `y = A x`.
pub fn matvec<T: Scalar>(a: &BlastMatrix<T>, x: &[T]) -> Result<Vec<T>> {
    matvec_counted(a, x, &mut NoCount)
}

/// `y = A x`, reporting each scalar multiplication to `counter`.
///
/// The right-factor projections `z_j = V_j^T x_j` are computed once and reused
/// by every output chunk `y_i = U_i sum_j (s_ij * z_j)`.
pub fn matvec_counted<T: Scalar, C: MulCounter>(
    a: &BlastMatrix<T>,
    x: &[T],
    counter: &mut C,
) -> Result<Vec<T>> {
    let shape = a.shape();
    let (b, p, q, r) = (shape.b(), shape.p(), shape.q(), shape.r());
    if x.len() != shape.n() {
        return Err(Error::dims(format!(
            "input vector has length {}, expected {}",
            x.len(),
            shape.n()
        )));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteInput("input vector"));
    }

    let mut z = vec![T::zero(); b * r];
    for j in 0..b {
        project_right(a.v_block(j), &x[j * q..(j + 1) * q], r, &mut z[j * r..(j + 1) * r], counter);
    }

    let mut y = vec![T::zero(); shape.m()];
    let mut agg = vec![T::zero(); r];
    for i in 0..b {
        aggregate_couplings(a, i, &z, &mut agg, counter);
        apply_left(a.u_block(i), &agg, r, &mut y[i * p..(i + 1) * p], counter);
    }
    Ok(y)
}

/// `out = V^T x` for a row-major `q x r` factor.
#[inline]
fn project_right<T: Scalar, C: MulCounter>(
    v: &[T],
    x: &[T],
    r: usize,
    out: &mut [T],
    counter: &mut C,
) {
    out.fill(T::zero());
    for (row, &xv) in v.chunks_exact(r).zip(x) {
        for (o, &f) in out.iter_mut().zip(row) {
            *o += f * xv;
        }
    }
    counter.add(x.len() * r);
}

/// `agg = sum_j s_ij * z_j` over ascending `j`.
#[inline]
fn aggregate_couplings<T: Scalar, C: MulCounter>(
    a: &BlastMatrix<T>,
    i: usize,
    z: &[T],
    agg: &mut [T],
    counter: &mut C,
) {
    let r = agg.len();
    agg.fill(T::zero());
    for (j, zj) in z.chunks_exact(r).enumerate() {
        for ((o, &s), &zv) in agg.iter_mut().zip(a.coupling(i, j)).zip(zj) {
            *o += s * zv;
        }
    }
    counter.add(z.len());
}

/// `out = U agg` for a row-major `p x r` factor.
#[inline]
fn apply_left<T: Scalar, C: MulCounter>(
    u: &[T],
    agg: &[T],
    r: usize,
    out: &mut [T],
    counter: &mut C,
) {
    for (o, row) in out.iter_mut().zip(u.chunks_exact(r)) {
        *o = dot(row, agg);
    }
    counter.add(out.len() * r);
}

/// `Y = X A^T` for a batch `X` whose rows are samples (`N x n` in, `N x m` out).
///
/// Runs as three batched stages: every right-factor projection `Z_j = X_j V_j`
/// for the whole batch, then the coupling aggregation per block-row, then the
/// left-factor product. Each output row equals [`matvec`] of the matching input
/// row exactly.
pub fn matmul<T: Scalar>(a: &BlastMatrix<T>, x: &DenseMatrix<T>) -> Result<DenseMatrix<T>> {
    let shape = a.shape();
    let (b, p, q, r) = (shape.b(), shape.p(), shape.q(), shape.r());
    if x.cols() != shape.n() {
        return Err(Error::dims(format!(
            "batch has {} columns, expected {}",
            x.cols(),
            shape.n()
        )));
    }
    if !x.is_finite() {
        return Err(Error::NonFiniteInput("input batch"));
    }
    let batch = x.rows();

    // z[j][k] holds the length-r projection of sample k onto V_j.
    let mut z = vec![T::zero(); b * batch * r];
    for j in 0..b {
        let vj = a.v_block(j);
        for k in 0..batch {
            let xk = &x.row(k)[j * q..(j + 1) * q];
            let dst = (j * batch + k) * r;
            project_right(vj, xk, r, &mut z[dst..dst + r], &mut NoCount);
        }
    }

    let mut out = DenseMatrix::zeros(batch, shape.m());
    let mut agg = vec![T::zero(); batch * r];
    for i in 0..b {
        agg.fill(T::zero());
        for j in 0..b {
            let s = a.coupling(i, j);
            let zj = &z[j * batch * r..(j + 1) * batch * r];
            for (acc, zk) in agg.chunks_exact_mut(r).zip(zj.chunks_exact(r)) {
                for ((o, &sv), &zv) in acc.iter_mut().zip(s).zip(zk) {
                    *o += sv * zv;
                }
            }
        }
        let ui = a.u_block(i);
        let data = out.as_mut_slice();
        for (k, acc) in agg.chunks_exact(r).enumerate() {
            let dst = k * shape.m() + i * p;
            apply_left(ui, acc, r, &mut data[dst..dst + p], &mut NoCount);
        }
    }
    Ok(out)
}

/// Materializes the full `m x n` matrix, block `(i, j)` being `U_i diag(s_ij) V_j^T`.
pub fn to_dense<T: Scalar>(a: &BlastMatrix<T>) -> DenseMatrix<T> {
    let shape = a.shape();
    let (b, p, q, r) = (shape.b(), shape.p(), shape.q(), shape.r());
    let mut out = DenseMatrix::zeros(shape.m(), shape.n());
    let mut scaled = vec![T::zero(); r];
    for i in 0..b {
        let ui = a.u_block(i);
        for j in 0..b {
            let s = a.coupling(i, j);
            let vj = a.v_block(j);
            for row in 0..p {
                for ((o, &u), &sv) in scaled.iter_mut().zip(&ui[row * r..(row + 1) * r]).zip(s) {
                    *o = u * sv;
                }
                for col in 0..q {
                    out[(i * p + row, j * q + col)] = dot(&scaled, &vj[col * r..(col + 1) * r]);
                }
            }
        }
    }
    out
}

/// Textbook dense product `D x`; the reference the structured products are checked against.
pub fn dense_matvec<T: Scalar>(d: &DenseMatrix<T>, x: &[T]) -> Result<Vec<T>> {
    if x.len() != d.cols() {
        return Err(Error::dims(format!(
            "input vector has length {}, expected {}",
            x.len(),
            d.cols()
        )));
    }
    Ok((0..d.rows()).map(|i| dot(d.row(i), x)).collect())
}
