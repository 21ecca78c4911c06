//! Per-iteration traces and solver outcomes shared by every solver.

use alloc::vec::Vec;

/// Source of wall-clock time for traces. The core crate has no clock of its
/// own; `lowrank-bench` provides one backed by `std::time::Instant`.
pub trait Clock {
    /// Milliseconds since the clock was started.
    fn elapsed_ms(&self) -> f64;
}

/// A clock that always reads zero.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoClock;

impl Clock for NoClock {
    fn elapsed_ms(&self) -> f64 {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Converged,
    MaxIters,
    Diverged,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Converged => "converged",
            Status::MaxIters => "max_iters",
            Status::Diverged => "diverged",
        }
    }
}

/// One row of a convergence trace. Row 0 describes the initial iterate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterTrace {
    pub iter: usize,
    pub rel_residual: f64,
    /// Relative error against the ground truth, when one is known.
    pub rel_error: Option<f64>,
    pub elapsed_ms: f64,
    /// Solver-specific objective value (primal objective for forward-backward
    /// splitting, dual objective for SVT, regularized loss for PGD).
    pub objective: Option<f64>,
}

/// Recoverable irregularities that a solver handled on its own.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SolverEvent {
    /// Line-search denominator vanished; the fallback stepsize was used.
    StepsizeDegenerate { iter: usize, fallback: f64 },
    /// The rank-1 PSD retraction had no positive eigenvalue; restarted from
    /// the spectral initialization.
    RetractionDegenerate { iter: usize },
    /// Conjugate direction lost descent; β was reset to zero.
    DescentReset { iter: usize },
}

#[derive(Debug, Clone)]
pub struct SolverReport<E> {
    pub estimate: E,
    pub trace: Vec<IterTrace>,
    pub status: Status,
    pub events: Vec<SolverEvent>,
}

impl<E> SolverReport<E> {
    /// Number of iterations performed (the initial row is not counted).
    pub fn iterations(&self) -> usize {
        self.trace.len().saturating_sub(1)
    }

    pub fn final_rel_residual(&self) -> f64 {
        self.trace.last().map_or(f64::NAN, |t| t.rel_residual)
    }

    pub fn final_rel_error(&self) -> Option<f64> {
        self.trace.last().and_then(|t| t.rel_error)
    }

    pub fn converged(&self) -> bool {
        self.status == Status::Converged
    }

    pub fn map<F, G: FnOnce(E) -> F>(self, f: G) -> SolverReport<F> {
        SolverReport {
            estimate: f(self.estimate),
            trace: self.trace,
            status: self.status,
            events: self.events,
        }
    }
}

/// Residual growth beyond this factor of the initial residual counts as divergence.
pub const DIVERGENCE_FACTOR: f64 = 1e6;

pub(crate) struct Tracer<'a> {
    clock: &'a dyn Clock,
    trace: Vec<IterTrace>,
    events: Vec<SolverEvent>,
    initial_residual: Option<f64>,
}

impl<'a> Tracer<'a> {
    pub(crate) fn new(clock: &'a dyn Clock) -> Self {
        Tracer {
            clock,
            trace: Vec::new(),
            events: Vec::new(),
            initial_residual: None,
        }
    }

    /// Record a row and report whether the iteration has diverged.
    pub(crate) fn record(
        &mut self,
        rel_residual: f64,
        rel_error: Option<f64>,
        objective: Option<f64>,
    ) -> bool {
        let iter = self.trace.len();
        self.trace.push(IterTrace {
            iter,
            rel_residual,
            rel_error,
            elapsed_ms: self.clock.elapsed_ms(),
            objective,
        });
        let initial = *self.initial_residual.get_or_insert(rel_residual);
        !rel_residual.is_finite() || (initial > 0.0 && rel_residual > DIVERGENCE_FACTOR * initial)
    }

    pub(crate) fn event(&mut self, event: SolverEvent) {
        self.events.push(event);
    }

    /// Iterations recorded so far, excluding the initial row.
    pub(crate) fn iterations(&self) -> usize {
        self.trace.len().saturating_sub(1)
    }

    pub(crate) fn finish<E>(self, estimate: E, status: Status) -> SolverReport<E> {
        SolverReport {
            estimate,
            trace: self.trace,
            status,
            events: self.events,
        }
    }
}
