use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::time::{Duration, Instant};

use blast_core::experiment::{run_synth, SynthConfig, TargetKind};
use blast_core::io::{read_blast, read_dense_with_dtype, write_blast, write_dense, write_history_csv, Dtype};
use blast_core::{
    factorize, matmul, relative_error, to_dense, BlastShape, DenseMatrix, Error, FactorizeConfig, Method,
    StepSchedule,
};
use log::{info, warn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{BenchArgs, CompressArgs, ExperimentArg, InfoArgs, MethodArg, ReconstructArgs, SynthArgs};

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Core(Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(Error::NonFiniteUpdate { .. }) => 3,
            _ => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(msg) => f.write_str(msg),
            CliError::Core(e) => e.fmt(f),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Core(Error::Io(e))
    }
}

type CliResult = Result<(), CliError>;

fn parse_schedule(text: &str) -> Result<StepSchedule, CliError> {
    match text {
        "linear" => Ok(StepSchedule::LinearDecay { start: 1.0, end: 0.0 }),
        "theorem1" => Ok(StepSchedule::Theorem1),
        other => {
            let eta = other
                .strip_prefix("constant:")
                .and_then(|v| v.parse::<f64>().ok())
                .ok_or_else(|| {
                    CliError::Usage(format!(
                        "invalid --schedule {other:?}: expected linear, constant:ETA or theorem1"
                    ))
                })?;
            Ok(StepSchedule::Constant(eta))
        }
    }
}

fn positive(name: &str, v: usize) -> Result<(), CliError> {
    if v == 0 {
        return Err(CliError::Usage(format!("--{name} must be at least 1")));
    }
    Ok(())
}

pub fn compress(args: CompressArgs) -> CliResult {
    positive("b", args.b)?;
    positive("r", args.r)?;
    let cfg = FactorizeConfig {
        b: args.b,
        r: args.r,
        iters: args.iters,
        epsilon: args.epsilon,
        delta0: args.delta0,
        delta_floor: blast_core::factorize::DEFAULT_DELTA_FLOOR,
        schedule: parse_schedule(&args.schedule)?,
        seed: args.seed,
        method: match args.method {
            MethodArg::Gd => Method::Gd,
            MethodArg::Precgd => Method::PrecGd,
        },
    };
    cfg.validate()?;

    let (a, dtype) = read_dense_with_dtype(&args.input)?;
    if dtype == Dtype::F32 {
        info!("input is float32; factorizing in float64");
    }
    let shape = BlastShape::new(a.rows(), a.cols(), args.b, args.r)?;
    info!(
        "factorizing {}x{} with b={} r={} ({}, {} iterations)",
        a.rows(),
        a.cols(),
        args.b,
        args.r,
        cfg.method.name(),
        cfg.iters
    );
    let started = Instant::now();
    let report = factorize(&a, &cfg)?;
    info!("done in {:.2?}", started.elapsed());

    write_blast(&args.output, &report.factors)?;
    if let Some(path) = &args.history {
        write_history_csv(path, &report.history)?;
    }

    let last = report.final_entry();
    let mut out = std::io::stdout().lock();
    writeln!(out, "loss: {:.17e}", last.loss)?;
    match last.rel_err {
        Some(e) => writeln!(out, "rel_err: {e:.6e}")?,
        None => writeln!(out, "rel_err: undefined (zero target)")?,
    }
    writeln!(out, "param_count: {}", shape.param_count())?;
    writeln!(out, "compression_ratio: {:.6}", shape.compression_ratio())?;
    writeln!(out, "matvec_flops: {}", shape.matvec_flops())?;
    Ok(())
}

pub fn reconstruct(args: ReconstructArgs) -> CliResult {
    let f = read_blast(&args.input)?;
    write_dense(&args.output, &to_dense(&f))?;
    Ok(())
}

pub fn info(args: InfoArgs) -> CliResult {
    let f = read_blast(&args.input)?;
    let s = f.shape();
    let json = serde_json::json!({
        "m": s.m(),
        "n": s.n(),
        "b": s.b(),
        "r": s.r(),
        "param_count": s.param_count(),
        "matvec_flops": s.matvec_flops(),
        "compression_ratio": s.compression_ratio(),
    });
    println!("{json}");
    Ok(())
}

fn median_duration(mut times: Vec<Duration>) -> Duration {
    times.sort();
    times[times.len() / 2]
}

pub fn bench(args: BenchArgs) -> CliResult {
    positive("trials", args.trials)?;
    positive("batch", args.batch)?;
    let f = read_blast(&args.input)?;
    let s = f.shape();
    let dense = to_dense(&f);
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let x = DenseMatrix::new(
        args.batch,
        s.n(),
        (0..args.batch * s.n()).map(|_| rng.random_range(-1.0..1.0)).collect(),
    )?;

    let structured = matmul(&f, &x)?;
    let reference = x.matmul_transpose(&dense)?;
    let err = relative_error(&structured, &reference)?.unwrap_or(0.0);
    if err > 1e-10 {
        return Err(CliError::Usage(format!(
            "structured and dense products disagree (relative error {err:e})"
        )));
    }

    let time = |run: &dyn Fn()| {
        (0..args.trials)
            .map(|_| {
                let t = Instant::now();
                run();
                t.elapsed()
            })
            .collect::<Vec<_>>()
    };
    let blast_t = median_duration(time(&|| {
        std::hint::black_box(matmul(&f, &x).unwrap());
    }));
    let dense_t = median_duration(time(&|| {
        std::hint::black_box(x.matmul_transpose(&dense).unwrap());
    }));

    println!("batch: {}  trials: {}", args.batch, args.trials);
    println!("blast_median_s: {:.6e}", blast_t.as_secs_f64());
    println!("dense_median_s: {:.6e}", dense_t.as_secs_f64());
    println!("speedup: {:.3}", dense_t.as_secs_f64() / blast_t.as_secs_f64());
    println!("flops_ratio: {:.6}", s.matvec_flops() as f64 / (s.m() * s.n()) as f64);
    Ok(())
}

pub fn synth(args: SynthArgs) -> CliResult {
    for (name, v) in [
        ("n", args.n),
        ("rstar", args.rstar),
        ("b", args.b),
        ("r", args.r),
        ("iters", args.iters),
        ("seeds", args.seeds),
    ] {
        positive(name, v)?;
    }
    let target = match args.experiment {
        ExperimentArg::Lowrank => TargetKind::LowRank,
        ExperimentArg::Blast => TargetKind::Blast,
    };
    let mut cfg = SynthConfig::new(target, args.r);
    cfg.n = args.n;
    cfg.rank_star = args.rstar;
    cfg.b = args.b;
    cfg.iters = args.iters;
    cfg.seeds = args.seeds;
    cfg.base_seed = args.seed;
    cfg.epsilon = args.epsilon;
    cfg.delta0 = args.delta0;
    cfg.gd_schedule = StepSchedule::LinearDecay { start: args.gd_eta0, end: 0.0 };
    cfg.precgd_schedule = StepSchedule::LinearDecay { start: args.precgd_eta0, end: 0.0 };
    // Catch bad step sizes before spending time on targets.
    for schedule in [cfg.gd_schedule, cfg.precgd_schedule] {
        let mut probe = FactorizeConfig::new(cfg.b, cfg.r);
        probe.schedule = schedule;
        probe.epsilon = cfg.epsilon;
        probe.delta0 = cfg.delta0;
        probe.validate()?;
    }

    info!(
        "{} target {}x{}, r*={}, b={}, r={}, {} iterations, {} seeds",
        target.name(),
        cfg.n,
        cfg.n,
        cfg.rank_star,
        cfg.b,
        cfg.r,
        cfg.iters,
        cfg.seeds
    );
    let result = run_synth(&cfg)?;
    for run in result.runs.iter().filter(|r| r.diverged_at.is_some()) {
        warn!("{} seed {} diverged at iteration {}", run.method.name(), run.seed, run.diverged_at.unwrap());
    }
    let mut w = BufWriter::new(File::create(&args.out)?);
    result.write_csv(&mut w)?;
    w.flush()?;

    let milestone = 30.min(cfg.iters);
    for method in [Method::Gd, Method::PrecGd] {
        println!(
            "{}: median final rel_err {:.3e} (at iteration {milestone}: {:.3e})",
            method.name(),
            result.median_final(method),
            result.median_at(method, milestone)
        );
    }
    Ok(())
}
