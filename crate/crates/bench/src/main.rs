use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use lowrank_bench::config::{parse_assignments, parse_override, ExperimentConfig, GridSpec};
use lowrank_bench::experiment::{format_grid, format_solver_summaries, phase_grid, run_experiment, WallClock};
use lowrank_bench::io;
use lowrank_core::hankel::{fiht_solve, HankelMode, HankelOptions, HankelShape, PartialSignal, SpectralSignal};
use lowrank_core::measurements::sample_without_replacement;
use lowrank_core::rpca::{accaltproj_solve, altproj_solve, RpcaInstance, RpcaOptions, ThresholdSchedule};
use lowrank_core::{derive_seed, Scenario};
use nalgebra::DVector;
use num_complex::Complex64;

#[derive(Parser)]
#[command(name = "lowrank", version, about = "Low-rank matrix recovery experiments")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Seeded solver comparisons and success-rate grids.
    Bench {
        #[command(subcommand)]
        cmd: BenchCmd,
    },
    /// Split a matrix into low-rank and sparse parts.
    Rpca(RpcaArgs),
    /// Spectrally sparse signals.
    Hankel {
        #[command(subcommand)]
        cmd: HankelCmd,
    },
    /// Write a seeded instance to a directory.
    Generate(GenerateArgs),
}

#[derive(Subcommand)]
enum BenchCmd {
    /// Run solvers over seeds; writes summary, aggregate and trace CSVs.
    Run(ConfigArgs),
    /// Success counts over an (r, m) grid; writes grid.csv.
    Grid(ConfigArgs),
}

#[derive(Args)]
struct ConfigArgs {
    /// `key = value` config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one key, e.g. `--set n=100`. Repeatable; applied after the file.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// PGD parameter preset; same as `--set preset=...`.
    #[arg(long, value_parser = ["faithful", "bench"])]
    preset: Option<String>,
    /// Step rule for iht, niht, rgrad and rcg: `const:VAL`, `niht` or `exact`.
    #[arg(long, value_name = "RULE")]
    stepsize: Option<String>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

impl ConfigArgs {
    fn assignments(&self) -> Result<Vec<(String, String)>> {
        let mut out = Vec::new();
        if let Some(path) = &self.config {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            out.extend(parse_assignments(&text).with_context(|| path.display().to_string())?);
        }
        for s in &self.set {
            out.push(parse_override(s).with_context(|| format!("--set {s}"))?);
        }
        if let Some(p) = &self.preset {
            out.push(("preset".to_string(), p.clone()));
        }
        if let Some(s) = &self.stepsize {
            out.push(("stepsize".to_string(), s.clone()));
        }
        Ok(out)
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Algo {
    Altproj,
    Accaltproj,
}

#[derive(Args)]
struct RpcaArgs {
    /// Matrix file holding D.
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    rank: usize,
    #[arg(long, value_enum, default_value = "accaltproj")]
    algo: Algo,
    #[arg(long)]
    out_lowrank: Option<PathBuf>,
    #[arg(long)]
    out_sparse: Option<PathBuf>,
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Threshold scale; 0.6/√n when absent.
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long, default_value_t = 0.6)]
    gamma: f64,
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
    #[arg(long, default_value_t = 500)]
    max_iters: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Iht,
    Fiht,
}

#[derive(Subcommand)]
enum HankelCmd {
    /// Complete a signal from observed `index,re,im` lines.
    Recover {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        r: usize,
        #[arg(long, value_enum, default_value = "fiht")]
        mode: Mode,
        /// Rows of the lifted matrix; the squarest shape when absent.
        #[arg(long)]
        n1: Option<usize>,
        /// Full signal for error tracking.
        #[arg(long)]
        truth: Option<PathBuf>,
        /// Where to write the recovered signal.
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long)]
        trace: Option<PathBuf>,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        #[arg(long, default_value_t = 1000)]
        max_iters: usize,
    },
    /// Draw a random signal and a uniformly random subset of its samples.
    Generate {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        r: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Fraction of samples observed.
        #[arg(long, default_value_t = 0.3)]
        fraction: f64,
        #[arg(long)]
        out_signal: PathBuf,
        #[arg(long)]
        out_obs: PathBuf,
    },
}

#[derive(Args)]
struct GenerateArgs {
    /// sensing, completion, full-completion, phase-retrieval or rpca.
    #[arg(long)]
    model: String,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    r: usize,
    /// Measurement count; `⌈ρ(2n − r)r⌉` when absent.
    #[arg(long)]
    m: Option<usize>,
    #[arg(long, default_value_t = 3.0)]
    rho: f64,
    /// Corrupted fraction for rpca.
    #[arg(long, default_value_t = 0.05)]
    fraction: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out_dir: PathBuf,
}

fn main() -> Result<()> {
    match Cli::parse().cmd {
        Cmd::Bench { cmd } => bench(cmd),
        Cmd::Rpca(args) => rpca(args),
        Cmd::Hankel { cmd } => hankel(cmd),
        Cmd::Generate(args) => generate(args),
    }
}

fn bench(cmd: BenchCmd) -> Result<()> {
    match cmd {
        BenchCmd::Run(args) => {
            let mut cfg = ExperimentConfig::default();
            for (k, v) in args.assignments()? {
                cfg.set(&k, &v)?;
            }
            if let Some(dir) = args.out_dir {
                cfg.out_dir = Some(dir);
            }
            let out = run_experiment(&cfg)?;
            print!("{}", format_solver_summaries(&out.summaries));
        }
        BenchCmd::Grid(args) => {
            let mut spec = GridSpec::default();
            for (k, v) in args.assignments()? {
                spec.set(&k, &v)?;
            }
            if let Some(dir) = args.out_dir {
                spec.out_dir = Some(dir);
            }
            print!("{}", format_grid(&phase_grid(&spec)?));
        }
    }
    Ok(())
}

fn rpca(args: RpcaArgs) -> Result<()> {
    let d = io::read_matrix(&args.input)?;
    let p = RpcaInstance::new(d, args.rank)?;
    let mut sched = ThresholdSchedule::default_for(&p);
    sched.gamma = args.gamma;
    if let Some(b) = args.beta {
        sched.beta = b;
    }
    let opts = RpcaOptions {
        tol: args.tol,
        max_iters: args.max_iters,
        initial_sparse: None,
    };
    let clock = WallClock::start();
    let rep = match args.algo {
        Algo::Altproj => altproj_solve(&p, &sched, &opts, &clock)?,
        Algo::Accaltproj => accaltproj_solve(&p, &sched, &opts, &clock)?,
    };
    if let Some(path) = &args.out_lowrank {
        io::write_matrix(path, &rep.estimate.lowrank.to_dense())?;
    }
    if let Some(path) = &args.out_sparse {
        io::write_matrix(path, &rep.estimate.sparse)?;
    }
    if let Some(path) = &args.trace {
        io::write_trace(path, &rep.trace)?;
    }
    let nnz = rep.estimate.sparse.iter().filter(|v| **v != 0.0).count();
    println!(
        "status={} iters={} rel_residual={:e} sparse_nnz={}",
        rep.status.as_str(),
        rep.iterations(),
        rep.final_rel_residual(),
        nnz
    );
    Ok(())
}

fn full_signal(entries: &[(usize, Complex64)], n: usize, path: &Path) -> Result<DVector<Complex64>> {
    if entries.len() != n || entries.iter().enumerate().any(|(k, e)| e.0 != k) {
        bail!("{}: expected every index 0..{n}", path.display());
    }
    Ok(DVector::from_iterator(n, entries.iter().map(|e| e.1)))
}

fn hankel(cmd: HankelCmd) -> Result<()> {
    match cmd {
        HankelCmd::Recover {
            input,
            n,
            r,
            mode,
            n1,
            truth,
            output,
            trace,
            tol,
            max_iters,
        } => {
            let entries = io::read_signal(&input)?;
            let (omega, values) = entries.iter().copied().unzip();
            let mut obs = PartialSignal::new(n, omega, values)?;
            if let Some(path) = &truth {
                obs.truth = Some(full_signal(&io::read_signal(path)?, n, path)?);
            }
            let shape = match n1 {
                Some(n1) if n1 >= 1 && n1 <= n => Some(HankelShape::new(n1, n + 1 - n1)?),
                Some(_) => bail!("--n1 must lie in 1..={n}"),
                None => None,
            };
            let opts = HankelOptions {
                mode: match mode {
                    Mode::Iht => HankelMode::Iht,
                    Mode::Fiht => HankelMode::Fiht,
                },
                shape,
                tol,
                max_iters,
            };
            let rep = fiht_solve(&obs, r, &opts, &WallClock::start())?;
            if let Some(path) = &output {
                let est: Vec<_> = rep.estimate.iter().copied().enumerate().collect();
                io::write_signal(path, &est)?;
            }
            if let Some(path) = &trace {
                io::write_trace(path, &rep.trace)?;
            }
            let err = rep.final_rel_error().map(|e| format!(" rel_error={e:e}")).unwrap_or_default();
            println!(
                "status={} iters={} rel_residual={:e}{err}",
                rep.status.as_str(),
                rep.iterations(),
                rep.final_rel_residual()
            );
        }
        HankelCmd::Generate {
            n,
            r,
            seed,
            fraction,
            out_signal,
            out_obs,
        } => {
            if !(fraction > 0.0 && fraction <= 1.0) {
                bail!("--fraction must lie in (0, 1]");
            }
            let sig = SpectralSignal::random(n, r, seed)?;
            let count = ((fraction * n as f64).round() as usize).max(1);
            let omega = sample_without_replacement(n, count, derive_seed(seed, 1));
            let all: Vec<_> = sig.samples.iter().copied().enumerate().collect();
            let seen: Vec<_> = omega.iter().map(|&k| all[k]).collect();
            io::write_signal(&out_signal, &all)?;
            io::write_signal(&out_obs, &seen)?;
        }
    }
    Ok(())
}

fn generate(args: GenerateArgs) -> Result<()> {
    if args.model == "rpca" {
        let p = RpcaInstance::generate(args.n, args.r, args.fraction, args.seed)?;
        fs::create_dir_all(&args.out_dir).with_context(|| args.out_dir.display().to_string())?;
        io::write_matrix(&args.out_dir.join("D.mat"), &p.d)?;
        if let (Some(x), Some(y)) = (&p.lowrank_truth, &p.sparse_truth) {
            io::write_matrix(&args.out_dir.join("lowrank.mat"), &x.to_dense())?;
            io::write_matrix(&args.out_dir.join("sparse.mat"), y)?;
        }
        return Ok(());
    }
    let scenario: Scenario = args
        .model
        .parse()
        .map_err(|_| anyhow::anyhow!("unknown model `{}`", args.model))?;
    let mut cfg = ExperimentConfig {
        model: scenario,
        n: args.n,
        r: args.r,
        rho: args.rho,
        m: args.m,
        ..ExperimentConfig::default()
    };
    if scenario == Scenario::PhaseRetrieval && cfg.m.is_none() {
        cfg.m = Some(8 * args.n);
    }
    let p = io::generate_to(&args.out_dir, scenario, args.n, args.r, cfg.measurements(), args.seed)?;
    println!("wrote {} (n={}, r={}, m={})", args.out_dir.display(), p.n(), p.r, p.m());
    Ok(())
}
