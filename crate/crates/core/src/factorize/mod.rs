//! Fitting BLAST factors to a dense target.
//!
//! [`factorize`] minimizes the blockwise squared error from a small random
//! initialization by alternating gradient descent, optionally preconditioned.

mod objective;
mod precond;
mod step;

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::blast::{BlastMatrix, BlastShape};
use crate::dense::{relative_error, DenseMatrix};
use crate::error::{Error, Result};
use crate::ops::to_dense;
use crate::scalar::Scalar;

pub use objective::{col_gram, coupling_gram, grad_s, grad_u, grad_v, loss, row_gram};
pub use precond::{delta_rule, precgd_step, precondition_matrices, Preconditioners, DEFAULT_DELTA_FLOOR};
pub use step::{gd_step, s_step_bounds, theorem1_step_sizes, u_step_bounds, v_step_bounds, StepRule, StepSizes};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Gd,
    PrecGd,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Gd => "gd",
            Method::PrecGd => "precgd",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum StepSchedule {
    /// `eta_k = start + (end - start) k / K` for `k = 0..K`.
    LinearDecay { start: f64, end: f64 },
    Constant(f64),
    /// Per-block reciprocal Lipschitz bounds (plain GD only).
    Theorem1,
}

impl StepSchedule {
    pub fn eta(&self, k: usize, iters: usize) -> f64 {
        match *self {
            StepSchedule::LinearDecay { start, end } => start + (end - start) * k as f64 / iters as f64,
            StepSchedule::Constant(eta) => eta,
            StepSchedule::Theorem1 => 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorizeConfig {
    pub b: usize,
    pub r: usize,
    pub iters: usize,
    /// Standard deviation of the Gaussian initialization of `U` and `V`.
    pub epsilon: f64,
    pub delta0: f64,
    pub delta_floor: f64,
    pub schedule: StepSchedule,
    pub seed: u64,
    pub method: Method,
}

impl FactorizeConfig {
    pub const DEFAULT_ITERS: usize = 300;
    pub const DEFAULT_EPSILON: f64 = 1e-2;
    pub const DEFAULT_DELTA0: f64 = 0.1;

    /// Preconditioned descent, 300 iterations, step linearly decayed from 1 to 0.
    pub fn new(b: usize, r: usize) -> Self {
        Self {
            b,
            r,
            iters: Self::DEFAULT_ITERS,
            epsilon: Self::DEFAULT_EPSILON,
            delta0: Self::DEFAULT_DELTA0,
            delta_floor: DEFAULT_DELTA_FLOOR,
            schedule: StepSchedule::LinearDecay { start: 1.0, end: 0.0 },
            seed: 0,
            method: Method::PrecGd,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.iters == 0 {
            return bad("iteration count must be at least 1".into());
        }
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return bad(format!("epsilon must be positive, got {}", self.epsilon));
        }
        if !(self.delta0.is_finite() && self.delta0 > 0.0) {
            return bad(format!("delta0 must be positive, got {}", self.delta0));
        }
        if !(self.delta_floor.is_finite() && self.delta_floor > 0.0) {
            return bad(format!("delta floor must be positive, got {}", self.delta_floor));
        }
        match self.schedule {
            StepSchedule::LinearDecay { start, end } if !(start >= 0.0 && end >= 0.0 && start.is_finite() && end.is_finite()) => {
                bad(format!("linear decay endpoints must be finite and non-negative, got {start} -> {end}"))
            }
            StepSchedule::Constant(eta) if !(eta.is_finite() && eta > 0.0) => {
                bad(format!("constant step must be positive, got {eta}"))
            }
            StepSchedule::Theorem1 if self.method == Method::PrecGd => {
                bad("the theorem1 schedule applies to plain gradient descent only".into())
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub iteration: usize,
    pub loss: f64,
    /// `||A - A_hat||_F / ||A||_F`; `None` for an all-zero target.
    pub rel_err: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct FactorizeReport<T> {
    pub factors: BlastMatrix<T>,
    /// Iteration 0 is the initialization, so there are `iters + 1` entries.
    pub history: Vec<HistoryEntry>,
    pub iteration_times: Vec<Duration>,
}

impl<T> FactorizeReport<T> {
    pub fn final_entry(&self) -> &HistoryEntry {
        self.history.last().expect("history always holds the initial entry")
    }
}

/// Gaussian `N(0, epsilon^2)` entries for `U` and `V`, uniform `[0, 1)` couplings.
/// Draws `U`, then `V`, then `S` from a ChaCha8 stream seeded with `seed`.
pub fn init_factors<T: Scalar>(shape: BlastShape, epsilon: f64, seed: u64) -> BlastMatrix<T> {
    init_factors_with(shape, epsilon, &mut ChaCha8Rng::seed_from_u64(seed))
}

pub(crate) fn init_factors_with<T: Scalar, R: Rng>(shape: BlastShape, epsilon: f64, rng: &mut R) -> BlastMatrix<T> {
    let mut gauss = |len: usize| -> Vec<T> {
        (0..len)
            .map(|_| T::from_f64_lossy(epsilon * rng.sample::<f64, _>(StandardNormal)))
            .collect()
    };
    let u = gauss(shape.m() * shape.r());
    let v = gauss(shape.n() * shape.r());
    let s = (0..shape.b() * shape.b() * shape.r())
        .map(|_| T::from_f64_lossy(rng.random::<f64>()))
        .collect();
    BlastMatrix::from_parts_unchecked(shape, u, v, s)
}

fn entry<T: Scalar>(a: &DenseMatrix<T>, f: &BlastMatrix<T>, iteration: usize) -> Result<HistoryEntry> {
    let model = to_dense(f);
    Ok(HistoryEntry {
        iteration,
        loss: loss(a, f)?,
        rel_err: relative_error(&model, a)?,
    })
}

/// Fits BLAST factors to `a` per `cfg`.
pub fn factorize<T: Scalar>(a: &DenseMatrix<T>, cfg: &FactorizeConfig) -> Result<FactorizeReport<T>> {
    cfg.validate()?;
    let shape = BlastShape::new(a.rows(), a.cols(), cfg.b, cfg.r)?;
    if !a.is_finite() {
        return Err(Error::NonFiniteInput("target matrix"));
    }
    let init = init_factors(shape, cfg.epsilon, cfg.seed);
    factorize_from(a, init, cfg)
}

/// Runs the iterations of [`factorize`] from caller-supplied initial factors.
pub fn factorize_from<T: Scalar>(
    a: &DenseMatrix<T>,
    init: BlastMatrix<T>,
    cfg: &FactorizeConfig,
) -> Result<FactorizeReport<T>> {
    cfg.validate()?;
    objective::check_target(a, &init)?;
    let mut f = init;
    let mut history = Vec::with_capacity(cfg.iters + 1);
    let mut times = Vec::with_capacity(cfg.iters);
    history.push(entry(a, &f, 0)?);

    for k in 0..cfg.iters {
        let started = Instant::now();
        let current_loss = history[k].loss;
        let step = match (cfg.method, cfg.schedule) {
            (Method::Gd, StepSchedule::Theorem1) => gd_step(a, &f, StepRule::Theorem1 { scale: 1.0 }),
            (Method::Gd, schedule) => {
                let eta = schedule.eta(k, cfg.iters);
                if eta > 0.0 {
                    gd_step(a, &f, StepRule::Uniform(eta))
                } else {
                    Ok(f.clone())
                }
            }
            (Method::PrecGd, schedule) => {
                let delta = delta_rule(current_loss, cfg.delta0, cfg.delta_floor);
                precgd_step(a, &f, schedule.eta(k, cfg.iters), delta)
            }
        };
        f = step.map_err(|e| match e {
            Error::NonFiniteUpdate { .. } => Error::NonFiniteUpdate { iteration: k + 1 },
            other => other,
        })?;
        history.push(entry(a, &f, k + 1)?);
        times.push(started.elapsed());
    }

    Ok(FactorizeReport {
        factors: f,
        history,
        iteration_times: times,
    })
}
