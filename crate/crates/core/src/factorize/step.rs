//! Plain alternating gradient descent and its guaranteed-descent step sizes.
//!
//! One step updates every `U_i`, then every `V_j` against the new `U`, then
//! every `s_ij` against the new `U` and `V`. For a fixed phase the objective
//! separates over blocks, so all blocks of a phase are updated from the same
//! snapshot. A step of at most `1 / L` on each block, with `L` the largest
//! eigenvalue of that block's Gram matrix, cannot increase the objective.

use crate::blast::BlastMatrix;
use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::linalg::{sigma_max_bound, POWER_ITERS, POWER_TOL};
use crate::scalar::Scalar;

use super::objective::{
    check_target, col_gram_with, grad_s_with, grad_u_with, grad_v_with, hadamard_of, row_gram_with,
    u_grams, v_grams,
};

/// Reciprocal Lipschitz constants for every block of one factor snapshot.
///
/// An entry is `+inf` when its Gram matrix is zero; the matching gradient is
/// then zero as well and the update is skipped.
#[derive(Debug, Clone, PartialEq)]
pub struct StepSizes {
    /// `1 / sigma_1(Vbar_i^T Vbar_i)`, one per block-row.
    pub eta_u: Vec<f64>,
    /// `1 / sigma_1(Ubar_j^T Ubar_j)`, one per block-column.
    pub eta_v: Vec<f64>,
    /// `1 / sigma_1(W_ij)`, row-major over `(i, j)`.
    pub eta_s: Vec<f64>,
}

impl StepSizes {
    pub fn is_degenerate(&self) -> bool {
        self.eta_u
            .iter()
            .chain(&self.eta_v)
            .chain(&self.eta_s)
            .any(|x| x.is_infinite())
    }
}

fn reciprocal<T: Scalar>(g: &DenseMatrix<T>) -> Result<f64> {
    let sigma = sigma_max_bound(g, POWER_ITERS, POWER_TOL)?;
    Ok(if sigma > 0.0 { 1.0 / sigma } else { f64::INFINITY })
}

pub fn u_step_bounds<T: Scalar>(f: &BlastMatrix<T>) -> Result<Vec<f64>> {
    let vg = v_grams(f);
    (0..f.shape().b()).map(|i| reciprocal(&row_gram_with(f, &vg, i))).collect()
}

pub fn v_step_bounds<T: Scalar>(f: &BlastMatrix<T>) -> Result<Vec<f64>> {
    let ug = u_grams(f);
    (0..f.shape().b()).map(|j| reciprocal(&col_gram_with(f, &ug, j))).collect()
}

pub fn s_step_bounds<T: Scalar>(f: &BlastMatrix<T>) -> Result<Vec<f64>> {
    let b = f.shape().b();
    let (ug, vg) = (u_grams(f), v_grams(f));
    (0..b * b)
        .map(|k| reciprocal(&hadamard_of(&ug[k / b], &vg[k % b])))
        .collect()
}

/// All three bound families evaluated on the single snapshot `f`.
///
/// Descent is guaranteed when the `V` bounds come from a snapshot whose `U`
/// is already updated, and the `s` bounds from one whose `U` and `V` are;
/// [`gd_step`] with [`StepRule::Theorem1`] handles that sequencing itself.
pub fn theorem1_step_sizes<T: Scalar>(f: &BlastMatrix<T>) -> Result<StepSizes> {
    if !f.is_finite() {
        return Err(Error::NonFiniteInput("BLAST factors"));
    }
    Ok(StepSizes {
        eta_u: u_step_bounds(f)?,
        eta_v: v_step_bounds(f)?,
        eta_s: s_step_bounds(f)?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepRule {
    /// One step size for every block of every phase.
    Uniform(f64),
    /// Per-block `scale / L`, with `L` recomputed at the start of each phase.
    /// `scale = 1` is the guaranteed-descent choice.
    Theorem1 { scale: f64 },
}

impl StepRule {
    fn validate(&self) -> Result<()> {
        let v = match *self {
            StepRule::Uniform(eta) => eta,
            StepRule::Theorem1 { scale } => scale,
        };
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::InvalidConfig(format!("step size must be positive and finite, got {v}")));
        }
        Ok(())
    }

    fn eta<T: Scalar>(&self, g: &DenseMatrix<T>) -> Result<f64> {
        match *self {
            StepRule::Uniform(eta) => Ok(eta),
            StepRule::Theorem1 { scale } => Ok(scale * reciprocal(g)?),
        }
    }
}

fn axpy<T: Scalar>(dst: &mut [T], eta: f64, grad: &[T]) {
    if !eta.is_finite() {
        return;
    }
    let eta = T::from_f64_lossy(eta);
    for (d, &g) in dst.iter_mut().zip(grad) {
        *d -= eta * g;
    }
}

/// One alternating gradient step `U -> V -> s`.
///
/// Fails with [`Error::NonFiniteUpdate`] (iteration 0; the driver fills in the
/// real index) if any factor entry overflows.
pub fn gd_step<T: Scalar>(a: &DenseMatrix<T>, f: &BlastMatrix<T>, rule: StepRule) -> Result<BlastMatrix<T>> {
    check_target(a, f)?;
    rule.validate()?;
    let b = f.shape().b();
    let mut next = f.clone();

    let vg = v_grams(f);
    let mut updates = Vec::with_capacity(b);
    for i in 0..b {
        let gbar = row_gram_with(f, &vg, i);
        updates.push((rule.eta(&gbar)?, grad_u_with(a, f, i, &gbar)));
    }
    for (i, (eta, g)) in updates.into_iter().enumerate() {
        axpy(next.u_block_mut(i), eta, &g);
    }

    let snap = next.clone();
    let ug = u_grams(&snap);
    let mut updates = Vec::with_capacity(b);
    for j in 0..b {
        let gbar = col_gram_with(&snap, &ug, j);
        updates.push((rule.eta(&gbar)?, grad_v_with(a, &snap, j, &gbar)));
    }
    for (j, (eta, g)) in updates.into_iter().enumerate() {
        axpy(next.v_block_mut(j), eta, &g);
    }

    let snap = next.clone();
    let vg = v_grams(&snap);
    for i in 0..b {
        for j in 0..b {
            let w = hadamard_of(&ug[i], &vg[j]);
            let eta = rule.eta(&w)?;
            let g = grad_s_with(a, &snap, i, j, &w);
            axpy(next.coupling_mut(i, j), eta, &g);
        }
    }

    if !next.is_finite() {
        return Err(Error::NonFiniteUpdate { iteration: 0 });
    }
    Ok(next)
}
