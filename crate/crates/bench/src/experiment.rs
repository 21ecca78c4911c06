//! Solver dispatch, seeded experiments and success-rate grids.

use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use lowrank_core::convex::{admm_solve, fbs_solve, svt_solve, ConvexOptions};
use lowrank_core::factored::{
    iht_warm_start, pgd_solve, wirtinger_flow, FactoredState, PgdOptions, WfOptions, WfStep,
};
use lowrank_core::manifold::{
    iht_solve, rcg_solve, rgrad_phase, rgrad_solve, CgBeta, ManifoldOptions, ManifoldStep,
};
use lowrank_core::measurements::generate_instance;
use lowrank_core::{derive_seed, Clock, IterTrace, ProblemInstance, Scenario, SolverReport, Status};
use rayon::prelude::*;

use crate::config::{ConfigError, ExperimentConfig, GridSpec, PgdPreset, SolverId, SolverSettings};
use crate::io::{format_trace, write_in, IoError};

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Io(#[from] IoError),
    #[error(transparent)]
    Core(#[from] lowrank_core::Error),
}

/// Wall-clock time since construction.
#[derive(Debug, Clone, Copy)]
pub struct WallClock(Instant);

impl WallClock {
    pub fn start() -> Self {
        WallClock(Instant::now())
    }
}

impl Clock for WallClock {
    fn elapsed_ms(&self) -> f64 {
        self.0.elapsed().as_secs_f64() * 1e3
    }
}

/// Outcome of one solver on one instance.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub solver: SolverId,
    pub seed: u64,
    pub iters: usize,
    pub status: Status,
    pub final_rel_residual: f64,
    pub final_rel_error: Option<f64>,
    pub elapsed_ms: f64,
    pub trace: Vec<IterTrace>,
}

impl RunRecord {
    pub fn converged(&self) -> bool {
        self.status == Status::Converged
    }

    pub fn succeeded(&self, threshold: f64) -> bool {
        self.final_rel_error.is_some_and(|e| e <= threshold)
    }
}

fn record<E>(solver: SolverId, seed: u64, rep: SolverReport<E>, clock: &WallClock) -> RunRecord {
    RunRecord {
        solver,
        seed,
        iters: rep.iterations(),
        status: rep.status,
        final_rel_residual: rep.final_rel_residual(),
        final_rel_error: rep.final_rel_error(),
        elapsed_ms: clock.elapsed_ms(),
        trace: rep.trace,
    }
}

/// Run one solver on `p` with the shared settings.
pub fn run_solver(
    p: &ProblemInstance,
    solver: SolverId,
    settings: &SolverSettings,
    tol: f64,
    max_iters: usize,
) -> Result<RunRecord, HarnessError> {
    let clock = WallClock::start();
    let convex = ConvexOptions {
        tol,
        max_iters,
        mu: settings.admm_mu,
        ..ConvexOptions::default()
    };
    let manifold = |step: ManifoldStep, cg_beta: CgBeta| -> Result<ManifoldOptions, HarnessError> {
        let initial = match settings.warm_start {
            0 => None,
            k => Some(iht_warm_start(p, k)?),
        };
        Ok(ManifoldOptions {
            step: settings.stepsize.unwrap_or(step),
            cg_beta,
            tol,
            max_iters,
            initial,
            ..ManifoldOptions::default()
        })
    };
    let seed = p.seed;
    let rec = match solver {
        SolverId::Svt => {
            let opts = ConvexOptions {
                lambda: settings.svt_tau.unwrap_or(5.0 * p.n() as f64),
                ..convex
            };
            record(solver, seed, svt_solve(p, &opts, &clock)?, &clock)
        }
        SolverId::Fbs => record(solver, seed, fbs_solve(p, settings.lambda, &convex, &clock)?, &clock),
        SolverId::Admm => record(solver, seed, admm_solve(p, settings.lambda, &convex, &clock)?, &clock),
        SolverId::Pgd => {
            let base = match settings.pgd_preset {
                PgdPreset::Bench => PgdOptions::bench(),
                PgdPreset::Faithful => PgdOptions::faithful(),
            };
            let initial = match settings.warm_start {
                0 => None,
                k => Some(FactoredState::balanced(&iht_warm_start(p, k)?)),
            };
            let opts = PgdOptions {
                tol,
                max_iters,
                initial,
                ..base
            };
            record(solver, seed, pgd_solve(p, &opts, &clock)?, &clock)
        }
        SolverId::Wf => {
            let base = WfOptions::default();
            let warmup = match base.step {
                WfStep::Normalized { warmup, .. } => warmup,
                WfStep::Constant(_) => 0.0,
            };
            let opts = WfOptions {
                step: WfStep::Normalized {
                    c: settings.wf_step,
                    warmup,
                },
                tol,
                max_iters,
                ..base
            };
            record(solver, seed, wirtinger_flow(p, &opts, &clock)?, &clock)
        }
        SolverId::Iht => {
            let step = ManifoldStep::Constant(p.ensemble.spectral_scale());
            record(solver, seed, iht_solve(p, &manifold(step, CgBeta::None)?, &clock)?, &clock)
        }
        SolverId::Niht => {
            let opts = manifold(ManifoldStep::Niht, CgBeta::None)?;
            record(solver, seed, iht_solve(p, &opts, &clock)?, &clock)
        }
        SolverId::Rgrad => {
            let opts = manifold(ManifoldStep::ExactLine, CgBeta::None)?;
            record(solver, seed, rgrad_solve(p, &opts, &clock)?, &clock)
        }
        SolverId::Rcg => {
            let opts = manifold(ManifoldStep::ExactLine, settings.cg_beta)?;
            record(solver, seed, rcg_solve(p, &opts, &clock)?, &clock)
        }
        SolverId::RgradPhase => {
            let opts = ManifoldOptions {
                tol,
                max_iters,
                ..ManifoldOptions::default()
            };
            record(solver, seed, rgrad_phase(p, &opts, &clock)?, &clock)
        }
    };
    Ok(rec)
}

/// Per-solver aggregate over seeds.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverSummary {
    pub solver: SolverId,
    pub runs: usize,
    pub successes: usize,
    pub converged: usize,
    pub mean_iters: f64,
    /// Mean wall-clock of the converged runs; `NaN` when none converged.
    pub mean_elapsed_ms: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutcome {
    /// Ordered by seed, then by the configured solver order.
    pub runs: Vec<RunRecord>,
    pub summaries: Vec<SolverSummary>,
}

impl ExperimentOutcome {
    pub fn summary(&self, solver: SolverId) -> Option<&SolverSummary> {
        self.summaries.iter().find(|s| s.solver == solver)
    }
}

/// Run every configured solver on every seed's instance. Seeds run in
/// parallel; results do not depend on the thread count.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutcome, HarnessError> {
    cfg.validate()?;
    let m = cfg.measurements();
    let scenario = cfg.model;
    let per_seed: Vec<Result<Vec<RunRecord>, HarnessError>> = cfg
        .seeds
        .par_iter()
        .map(|&seed| {
            let p = generate_instance(scenario, cfg.n, cfg.r, m, seed)?;
            cfg.solvers
                .iter()
                .map(|&s| run_solver(&p, s, &cfg.settings, cfg.tol, cfg.max_iters))
                .collect()
        })
        .collect();
    let mut runs = Vec::new();
    for r in per_seed {
        runs.extend(r?);
    }
    let summaries = cfg
        .solvers
        .iter()
        .map(|&solver| {
            let mine: Vec<&RunRecord> = runs.iter().filter(|r| r.solver == solver).collect();
            let conv: Vec<&&RunRecord> = mine.iter().filter(|r| r.converged()).collect();
            SolverSummary {
                solver,
                runs: mine.len(),
                successes: mine.iter().filter(|r| r.succeeded(cfg.success_threshold)).count(),
                converged: conv.len(),
                mean_iters: mine.iter().map(|r| r.iters as f64).sum::<f64>() / mine.len() as f64,
                mean_elapsed_ms: conv.iter().map(|r| r.elapsed_ms).sum::<f64>() / conv.len() as f64,
            }
        })
        .collect();
    let out = ExperimentOutcome { runs, summaries };
    if let Some(dir) = &cfg.out_dir {
        write_experiment(dir, &out)?;
    }
    Ok(out)
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// `solver,seed,iters,converged,final_rel_residual,final_rel_error,elapsed_ms`.
pub fn format_summary(runs: &[RunRecord]) -> String {
    let mut out = String::from("solver,seed,iters,converged,final_rel_residual,final_rel_error,elapsed_ms\n");
    for r in runs {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{:.3}",
            r.solver,
            r.seed,
            r.iters,
            r.converged(),
            r.final_rel_residual,
            opt(r.final_rel_error),
            r.elapsed_ms
        );
    }
    out
}

/// Mean and standard deviation of the relative residual at each iteration,
/// over the runs still active at that iteration.
pub fn format_aggregate(runs: &[RunRecord], solvers: &[SolverId]) -> String {
    let mut out = String::from("solver,iter,runs,mean_rel_residual,std_rel_residual\n");
    for &s in solvers {
        let mine: Vec<&RunRecord> = runs.iter().filter(|r| r.solver == s).collect();
        let len = mine.iter().map(|r| r.trace.len()).max().unwrap_or(0);
        for k in 0..len {
            let vals: Vec<f64> = mine.iter().filter_map(|r| r.trace.get(k)).map(|t| t.rel_residual).collect();
            let n = vals.len() as f64;
            let mean = vals.iter().sum::<f64>() / n;
            let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
            let _ = writeln!(out, "{s},{k},{},{mean},{}", vals.len(), var.sqrt());
        }
    }
    out
}

pub fn format_solver_summaries(summaries: &[SolverSummary]) -> String {
    let mut out = String::from("solver,runs,successes,converged,mean_iters,mean_elapsed_ms\n");
    for s in summaries {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{:.3}",
            s.solver, s.runs, s.successes, s.converged, s.mean_iters, s.mean_elapsed_ms
        );
    }
    out
}

/// Write `summary.csv`, `aggregate.csv`, `solvers.csv` and one
/// `traces/<solver>_seed<seed>.csv` per run.
pub fn write_experiment(dir: &Path, out: &ExperimentOutcome) -> Result<(), IoError> {
    let solvers: Vec<SolverId> = out.summaries.iter().map(|s| s.solver).collect();
    write_in(dir, "summary.csv", &format_summary(&out.runs))?;
    write_in(dir, "aggregate.csv", &format_aggregate(&out.runs, &solvers))?;
    write_in(dir, "solvers.csv", &format_solver_summaries(&out.summaries))?;
    let traces = dir.join("traces");
    for r in &out.runs {
        write_in(&traces, &format!("{}_seed{}.csv", r.solver, r.seed), &format_trace(&r.trace))?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridCell {
    pub r: usize,
    pub m: usize,
    pub successes: usize,
    pub trials: usize,
}

impl GridCell {
    pub fn rate(&self) -> f64 {
        self.successes as f64 / self.trials as f64
    }
}

/// Seed of trial `t` in cell `c`, derived from the master seed alone.
pub fn trial_seed(master: u64, cell: usize, trial: usize) -> u64 {
    derive_seed(derive_seed(master, cell as u64), trial as u64)
}

/// Success counts over the `ranks × measurements` grid (ranks outermost).
pub fn phase_grid(spec: &GridSpec) -> Result<Vec<GridCell>, HarnessError> {
    spec.validate()?;
    let scenario = match spec.model {
        Scenario::FullCompletion => Scenario::Completion,
        s => s,
    };
    let cells: Vec<(usize, usize)> = spec
        .ranks
        .iter()
        .flat_map(|&r| spec.measurements.iter().map(move |&m| (r, m)))
        .collect();
    let jobs: Vec<(usize, usize)> = (0..cells.len())
        .flat_map(|c| (0..spec.trials).map(move |t| (c, t)))
        .collect();
    let results: Vec<Result<bool, HarnessError>> = jobs
        .par_iter()
        .map(|&(c, t)| {
            let (r, m) = cells[c];
            let p = generate_instance(scenario, spec.n, r, m, trial_seed(spec.seed, c, t))?;
            let rec = run_solver(&p, spec.solver, &spec.settings, spec.tol, spec.max_iters)?;
            Ok(rec.succeeded(spec.threshold))
        })
        .collect();
    let mut out: Vec<GridCell> = cells
        .iter()
        .map(|&(r, m)| GridCell {
            r,
            m,
            successes: 0,
            trials: spec.trials,
        })
        .collect();
    for ((c, _), res) in jobs.iter().zip(results) {
        if res? {
            out[*c].successes += 1;
        }
    }
    if let Some(dir) = &spec.out_dir {
        write_in(dir, "grid.csv", &format_grid(&out))?;
    }
    Ok(out)
}

/// `r,m,successes,trials`.
pub fn format_grid(cells: &[GridCell]) -> String {
    let mut out = String::from("r,m,successes,trials\n");
    for c in cells {
        let _ = writeln!(out, "{},{},{},{}", c.r, c.m, c.successes, c.trials);
    }
    out
}

/// Whether success rates are nondecreasing along `m` for every rank, allowing
/// a drop of at most `slack` successes between neighbouring cells.
pub fn monotone_in_m(cells: &[GridCell], slack: usize) -> bool {
    cells
        .windows(2)
        .filter(|w| w[0].r == w[1].r)
        .all(|w| w[1].successes + slack >= w[0].successes)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trial_seeds_are_distinct() {
        let mut seen = std::collections::HashSet::new();
        for c in 0..20 {
            for t in 0..20 {
                assert!(seen.insert(trial_seed(7, c, t)));
            }
        }
    }

    #[test]
    fn monotonicity_with_slack() {
        let cell = |m, s| GridCell {
            r: 1,
            m,
            successes: s,
            trials: 10,
        };
        assert!(monotone_in_m(&[cell(1, 0), cell(2, 5), cell(3, 10)], 0));
        assert!(monotone_in_m(&[cell(1, 0), cell(2, 6), cell(3, 5)], 1));
        assert!(!monotone_in_m(&[cell(1, 0), cell(2, 7), cell(3, 5)], 1));
    }

    #[test]
    fn aggregate_counts_active_runs() {
        let t = |k, v| IterTrace {
            iter: k,
            rel_residual: v,
            rel_error: None,
            elapsed_ms: 0.0,
            objective: None,
        };
        let run = |seed, trace: Vec<IterTrace>| RunRecord {
            solver: SolverId::Rgrad,
            seed,
            iters: trace.len() - 1,
            status: Status::Converged,
            final_rel_residual: 0.0,
            final_rel_error: None,
            elapsed_ms: 0.0,
            trace,
        };
        let runs = [run(0, vec![t(0, 1.0), t(1, 0.5)]), run(1, vec![t(0, 3.0)])];
        let text = format_aggregate(&runs, &[SolverId::Rgrad]);
        assert_eq!(
            text,
            "solver,iter,runs,mean_rel_residual,std_rel_residual\nrgrad,0,2,2,1\nrgrad,1,1,0.5,0\n"
        );
    }
}
