//! Preconditioned alternating gradient descent.
//!
//! Each gradient is multiplied by the regularized inverse of its block's Gram
//! matrix, `(G + delta I)^{-1}`, realized as a Cholesky solve. `delta` tracks
//! the square root of the current loss so the regularization fades as the fit
//! improves.

use crate::blast::BlastMatrix;
use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::linalg::SpdSolveWorkspace;
use crate::scalar::Scalar;

use super::objective::{
    check_target, col_gram_with, grad_s_with, grad_u_with, grad_v_with, hadamard_of, row_gram_with,
    u_grams, v_grams,
};

pub const DEFAULT_DELTA_FLOOR: f64 = 1e-12;

/// `max(delta0 * sqrt(loss), floor)`.
pub fn delta_rule(loss: f64, delta0: f64, floor: f64) -> f64 {
    (delta0 * loss.max(0.0).sqrt()).max(floor)
}

/// Explicit preconditioners for one factor snapshot. Only used for inspection;
/// [`precgd_step`] never forms these inverses.
#[derive(Debug, Clone)]
pub struct Preconditioners<T> {
    /// `(Vbar_i^T Vbar_i + delta I)^{-1}` per block-row.
    pub p_u: Vec<DenseMatrix<T>>,
    /// `(Ubar_j^T Ubar_j + delta I)^{-1}` per block-column.
    pub p_v: Vec<DenseMatrix<T>>,
    /// `(W_ij + delta I)^{-1}`, row-major over `(i, j)`.
    pub p_s: Vec<DenseMatrix<T>>,
}

pub fn precondition_matrices<T: Scalar>(
    a: &DenseMatrix<T>,
    f: &BlastMatrix<T>,
    delta: f64,
) -> Result<Preconditioners<T>> {
    check_target(a, f)?;
    check_delta(delta)?;
    let shape = f.shape();
    let (b, r) = (shape.b(), shape.r());
    let eye = DenseMatrix::identity(r);
    let inv = |g: &DenseMatrix<T>| SpdSolveWorkspace::new(g, delta)?.solve(&eye);
    let (ug, vg) = (u_grams(f), v_grams(f));
    Ok(Preconditioners {
        p_u: (0..b).map(|i| inv(&row_gram_with(f, &vg, i))).collect::<Result<_>>()?,
        p_v: (0..b).map(|j| inv(&col_gram_with(f, &ug, j))).collect::<Result<_>>()?,
        p_s: (0..b * b)
            .map(|k| inv(&hadamard_of(&ug[k / b], &vg[k % b])))
            .collect::<Result<_>>()?,
    })
}

fn check_delta(delta: f64) -> Result<()> {
    if !(delta.is_finite() && delta > 0.0) {
        return Err(Error::InvalidConfig(format!("delta must be positive and finite, got {delta}")));
    }
    Ok(())
}

/// One preconditioned alternating step `U -> V -> s` with step size `eta` and
/// regularization `delta`.
pub fn precgd_step<T: Scalar>(
    a: &DenseMatrix<T>,
    f: &BlastMatrix<T>,
    eta: f64,
    delta: f64,
) -> Result<BlastMatrix<T>> {
    check_target(a, f)?;
    check_delta(delta)?;
    if !(eta.is_finite() && eta >= 0.0) {
        return Err(Error::InvalidConfig(format!("step size must be finite and non-negative, got {eta}")));
    }
    let b = f.shape().b();
    let step = T::from_f64_lossy(eta);
    let mut next = f.clone();

    let vg = v_grams(f);
    let mut updates = Vec::with_capacity(b);
    for i in 0..b {
        let gbar = row_gram_with(f, &vg, i);
        let mut g = grad_u_with(a, f, i, &gbar);
        SpdSolveWorkspace::new(&gbar, delta)?.solve_rows_in_place(&mut g);
        updates.push(g);
    }
    for (i, g) in updates.into_iter().enumerate() {
        next.u_block_mut(i).iter_mut().zip(&g).for_each(|(x, &d)| *x -= step * d);
    }

    let snap = next.clone();
    let ug = u_grams(&snap);
    let mut updates = Vec::with_capacity(b);
    for j in 0..b {
        let gbar = col_gram_with(&snap, &ug, j);
        let mut g = grad_v_with(a, &snap, j, &gbar);
        SpdSolveWorkspace::new(&gbar, delta)?.solve_rows_in_place(&mut g);
        updates.push(g);
    }
    for (j, g) in updates.into_iter().enumerate() {
        next.v_block_mut(j).iter_mut().zip(&g).for_each(|(x, &d)| *x -= step * d);
    }

    let snap = next.clone();
    let vg = v_grams(&snap);
    for i in 0..b {
        for j in 0..b {
            let w = hadamard_of(&ug[i], &vg[j]);
            let mut g = grad_s_with(a, &snap, i, j, &w);
            SpdSolveWorkspace::new(&w, delta)?.solve_vec(&mut g);
            next.coupling_mut(i, j).iter_mut().zip(&g).for_each(|(x, &d)| *x -= step * d);
        }
    }

    if !next.is_finite() {
        return Err(Error::NonFiniteUpdate { iteration: 0 });
    }
    Ok(next)
}
