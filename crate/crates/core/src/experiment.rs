//! Synthetic convergence experiments comparing plain and preconditioned
//! descent on random low-rank and random BLAST targets.
//!
//! Targets are scaled to unit root-mean-square entry (`||A||_F = sqrt(mn)`),
//! so the default initialization scale is small next to the target. Target
//! `k` is drawn from ChaCha8 stream 1 of `seed + k`; the factor initialization
//! for that run uses stream 0 of the same seed.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::blast::BlastShape;
use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::factorize::{factorize, init_factors_with, FactorizeConfig, Method, StepSchedule};
use crate::ops::to_dense;

const TARGET_STREAM: u64 = 1;

fn target_rng(seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(TARGET_STREAM);
    rng
}

fn normalized(m: DenseMatrix<f64>) -> DenseMatrix<f64> {
    let norm = m.frobenius_norm();
    if norm > 0.0 {
        m.scale(((m.rows() * m.cols()) as f64).sqrt() / norm)
    } else {
        m
    }
}

/// `G1 G2^T` with standard normal `n x rank` factors, scaled to unit RMS entry.
pub fn low_rank_target(n: usize, rank: usize, seed: u64) -> DenseMatrix<f64> {
    let mut rng = target_rng(seed);
    let mut gauss = |rows: usize| {
        DenseMatrix::from_fn(rows, rank, |_, _| rng.sample::<f64, _>(StandardNormal))
    };
    let g1 = gauss(n);
    let g2 = gauss(n);
    normalized(g1.matmul_transpose(&g2).expect("conforming factors"))
}

/// A random BLAST matrix (unit-variance bases, uniform couplings), densified
/// and scaled to unit RMS entry.
pub fn blast_target(n: usize, b: usize, rank: usize, seed: u64) -> Result<DenseMatrix<f64>> {
    let shape = BlastShape::new(n, n, b, rank)?;
    let f = init_factors_with::<f64, _>(shape, 1.0, &mut target_rng(seed));
    Ok(normalized(to_dense(&f)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TargetKind {
    LowRank,
    Blast,
}

impl TargetKind {
    pub fn name(&self) -> &'static str {
        match self {
            TargetKind::LowRank => "lowrank",
            TargetKind::Blast => "blast",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub target: TargetKind,
    pub n: usize,
    /// Rank parameter of the target.
    pub rank_star: usize,
    pub b: usize,
    /// Rank parameter of the fitted factors.
    pub r: usize,
    pub iters: usize,
    pub seeds: usize,
    pub base_seed: u64,
    pub epsilon: f64,
    pub delta0: f64,
    /// Step schedule of the plain descent runs.
    pub gd_schedule: StepSchedule,
    /// Step schedule of the preconditioned runs.
    pub precgd_schedule: StepSchedule,
}

impl SynthConfig {
    /// Plain descent's step starts at this value and decays linearly to zero.
    /// A uniform step must stay below the reciprocal block Gram norms, which
    /// scale with the target; at unit RMS entry twice this already diverges.
    pub const DEFAULT_GD_ETA0: f64 = 0.01;

    /// 256 x 256 target of rank parameter 8, 16 x 16 blocks, 100 iterations,
    /// 5 seeds. Preconditioned runs decay their step from 1 to 0.
    pub fn new(target: TargetKind, r: usize) -> Self {
        Self {
            target,
            n: 256,
            rank_star: 8,
            b: 16,
            r,
            iters: 100,
            seeds: 5,
            base_seed: 0,
            epsilon: FactorizeConfig::DEFAULT_EPSILON,
            delta0: FactorizeConfig::DEFAULT_DELTA0,
            gd_schedule: StepSchedule::LinearDecay { start: Self::DEFAULT_GD_ETA0, end: 0.0 },
            precgd_schedule: StepSchedule::LinearDecay { start: 1.0, end: 0.0 },
        }
    }

    fn validate(&self) -> Result<()> {
        if [self.n, self.rank_star, self.b, self.r, self.iters, self.seeds].contains(&0) {
            return Err(Error::InvalidConfig("synthetic experiment parameters must be positive".into()));
        }
        BlastShape::new(self.n, self.n, self.b, self.r)?;
        Ok(())
    }

    fn target(&self, seed: u64) -> Result<DenseMatrix<f64>> {
        match self.target {
            TargetKind::LowRank => Ok(low_rank_target(self.n, self.rank_star, seed)),
            TargetKind::Blast => blast_target(self.n, self.b, self.rank_star, seed),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthRun {
    pub method: Method,
    pub seed: u64,
    /// Relative error after each iteration, starting with the initialization.
    pub rel_err: Vec<f64>,
    /// Set when the run stopped early on non-finite factors; the final error
    /// is then reported as infinite.
    pub diverged_at: Option<usize>,
}

impl SynthRun {
    pub fn final_rel_err(&self) -> f64 {
        if self.diverged_at.is_some() {
            f64::INFINITY
        } else {
            *self.rel_err.last().unwrap()
        }
    }
}

#[derive(Debug, Clone)]
pub struct SynthResult {
    pub config: SynthConfig,
    pub runs: Vec<SynthRun>,
}

pub fn median(values: &mut [f64]) -> f64 {
    assert!(!values.is_empty(), "median of an empty set");
    values.sort_by(f64::total_cmp);
    let mid = values.len() / 2;
    if values.len() % 2 == 1 {
        values[mid]
    } else {
        0.5 * (values[mid - 1] + values[mid])
    }
}

impl SynthResult {
    pub fn median_final(&self, method: Method) -> f64 {
        let mut v: Vec<f64> = self
            .runs
            .iter()
            .filter(|r| r.method == method)
            .map(SynthRun::final_rel_err)
            .collect();
        median(&mut v)
    }

    /// Median over seeds of the relative error after `iteration` steps.
    pub fn median_at(&self, method: Method, iteration: usize) -> f64 {
        let mut v: Vec<f64> = self
            .runs
            .iter()
            .filter(|r| r.method == method)
            .map(|r| r.rel_err.get(iteration).copied().unwrap_or(f64::INFINITY))
            .collect();
        median(&mut v)
    }

    /// Long-format CSV: `experiment,method,seed,iter,rel_err`.
    pub fn write_csv<W: Write>(&self, w: &mut W) -> Result<()> {
        writeln!(w, "experiment,method,seed,iter,rel_err")?;
        for run in &self.runs {
            for (k, e) in run.rel_err.iter().enumerate() {
                writeln!(
                    w,
                    "{},{},{},{},{:.16e}",
                    self.config.target.name(),
                    run.method.name(),
                    run.seed,
                    k,
                    e
                )?;
            }
        }
        Ok(())
    }
}

/// Runs plain and preconditioned descent on `seeds` independent targets.
pub fn run_synth(cfg: &SynthConfig) -> Result<SynthResult> {
    cfg.validate()?;
    let mut runs = Vec::with_capacity(2 * cfg.seeds);
    for k in 0..cfg.seeds as u64 {
        let seed = cfg.base_seed + k;
        let target = cfg.target(seed)?;
        for method in [Method::Gd, Method::PrecGd] {
            let fc = FactorizeConfig {
                b: cfg.b,
                r: cfg.r,
                iters: cfg.iters,
                epsilon: cfg.epsilon,
                delta0: cfg.delta0,
                delta_floor: crate::factorize::DEFAULT_DELTA_FLOOR,
                schedule: match method {
                    Method::Gd => cfg.gd_schedule,
                    Method::PrecGd => cfg.precgd_schedule,
                },
                seed,
                method,
            };
            let run = match factorize(&target, &fc) {
                Ok(report) => SynthRun {
                    method,
                    seed,
                    rel_err: report.history.iter().map(|h| h.rel_err.unwrap_or(f64::NAN)).collect(),
                    diverged_at: None,
                },
                Err(Error::NonFiniteUpdate { iteration }) => SynthRun {
                    method,
                    seed,
                    rel_err: Vec::new(),
                    diverged_at: Some(iteration),
                },
                Err(e) => return Err(e),
            };
            runs.push(run);
        }
    }
    Ok(SynthResult {
        config: cfg.clone(),
        runs,
    })
}
