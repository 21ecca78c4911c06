//! First-order methods for nuclear-norm formulations.
//!
//! * [`svt_solve`]: Uzawa / singular value thresholding on
//!   `min λ‖Z‖_* + ½‖Z‖_F²  s.t.  A(Z) = y`.
//! * [`fbs_solve`]: forward-backward splitting on
//!   `min ½‖A(Z) − y‖² + λ‖Z‖_*`.
//! * [`admm_solve`]: ADMM on the split form of the same problem.
//!
//! All three start from zero.

use alloc::format;

use nalgebra::{DMatrix, DVector};
// Float methods under no_std; std shadows them when linked into the build.
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{invalid_options, Error, Result};
use crate::linalg::{compact_svd, svt, svt_triple};
use crate::measurements::{Ensemble, ProblemInstance};
use crate::report::{Clock, SolverReport, Status, Tracer};

/// Power iterations used to estimate `‖A‖₂²`.
pub const NORM_ESTIMATE_ITERS: usize = 50;

/// Stepsize for SVT and forward-backward splitting.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepRule {
    /// Fixed `α`, which must lie in `(0, 2/‖A‖₂²)`.
    Constant(f64),
    /// `α = c/‖A‖₂²` with `c ∈ (0, 2)`.
    NormBound(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvexOptions {
    /// Weight of the nuclear norm in [`svt_solve`].
    pub lambda: f64,
    /// ADMM penalty `μ`.
    pub mu: f64,
    pub step: StepRule,
    /// ADMM multiplier stepsize, in `(0, (√5 + 1)/2)`.
    pub admm_relax: f64,
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for ConvexOptions {
    fn default() -> Self {
        ConvexOptions {
            lambda: 1.0,
            mu: 1.0,
            step: StepRule::NormBound(1.0),
            admm_relax: 1.0,
            tol: 1e-6,
            max_iters: 1000,
        }
    }
}

impl ConvexOptions {
    fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) || !self.tol.is_finite() {
            return Err(invalid_options("tol must be positive"));
        }
        if self.max_iters == 0 {
            return Err(invalid_options("max_iters must be at least 1"));
        }
        Ok(())
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(invalid_options("lambda must be finite and nonnegative"));
    }
    Ok(())
}

/// Resolve the stepsize rule against an estimate of `‖A‖₂²`.
pub fn resolve_step(ensemble: &Ensemble, rule: StepRule, seed: u64) -> Result<f64> {
    let norm_sq = ensemble.op_norm_sq(NORM_ESTIMATE_ITERS, seed)?;
    if !(norm_sq > 0.0) {
        return Err(Error::Numerical("measurement operator is zero".into()));
    }
    match rule {
        StepRule::Constant(alpha) => {
            if !(alpha > 0.0) || alpha >= 2.0 / norm_sq {
                return Err(invalid_options(format!(
                    "stepsize {alpha} outside (0, 2/‖A‖²) = (0, {})",
                    2.0 / norm_sq
                )));
            }
            Ok(alpha)
        }
        StepRule::NormBound(c) => {
            if !(c > 0.0 && c < 2.0) {
                return Err(invalid_options("norm-bound factor must lie in (0, 2)"));
            }
            Ok(c / norm_sq)
        }
    }
}

/// `A(Z) − y` and the relative residual.
fn residual(p: &ProblemInstance, z: &DMatrix<f64>) -> Result<(DVector<f64>, f64)> {
    let az = p.ensemble.forward(z)?;
    let rel = p.rel_residual_of(&az);
    Ok((az - &p.y, rel))
}

fn zero_report(p: &ProblemInstance, clock: &dyn Clock) -> SolverReport<DMatrix<f64>> {
    let n = p.n();
    let z = DMatrix::zeros(n, n);
    let mut tracer = Tracer::new(clock);
    tracer.record(0.0, Some(p.rel_error(&z)), Some(0.0));
    tracer.finish(z, Status::Converged)
}

/// Singular value thresholding (Uzawa's algorithm):
///
/// ```text
/// Y_{k+1} = Y_k − α A*(A(Z_k) − y)
/// Z_{k+1} = D_λ(Y_{k+1})
/// ```
///
/// Stops when `‖A(Z_k) − y‖/‖y‖ ≤ tol`. The trace objective is the dual
/// value `⟨v, y⟩ − ½‖Z‖_F²` with `Y = A*(v)`, which is nondecreasing for
/// admissible stepsizes.
pub fn svt_solve(
    p: &ProblemInstance,
    opts: &ConvexOptions,
    clock: &dyn Clock,
) -> Result<SolverReport<DMatrix<f64>>> {
    opts.validate()?;
    check_lambda(opts.lambda)?;
    if p.y.iter().all(|v| *v == 0.0) {
        return Ok(zero_report(p, clock));
    }
    let alpha = resolve_step(&p.ensemble, opts.step, p.seed)?;
    let n = p.n();
    let mut y_mat = DMatrix::zeros(n, n);
    let mut dual = DVector::zeros(p.m());
    let mut z = DMatrix::zeros(n, n);
    let mut tracer = Tracer::new(clock);

    let (mut res, mut rel) = residual(p, &z)?;
    tracer.record(rel, Some(p.rel_error(&z)), Some(0.0));
    let mut status = Status::MaxIters;
    if rel <= opts.tol {
        status = Status::Converged;
    }
    while status == Status::MaxIters && tracer.iterations() < opts.max_iters {
        y_mat -= alpha * p.ensemble.adjoint(&res)?;
        dual -= alpha * &res;
        z = svt(&y_mat, opts.lambda)?;
        (res, rel) = residual(p, &z)?;
        let objective = dual.dot(&p.y) - 0.5 * z.norm_squared();
        if tracer.record(rel, Some(p.rel_error(&z)), Some(objective)) {
            status = Status::Diverged;
        } else if rel <= opts.tol {
            status = Status::Converged;
        }
    }
    Ok(tracer.finish(z, status))
}

/// Forward-backward splitting,
/// `Z_{k+1} = D_{αλ}(Z_k − α A*(A(Z_k) − y))`.
///
/// Stops when `‖Z_{k+1} − Z_k‖_F / max(1, ‖Z_k‖_F) ≤ tol`. The trace objective
/// is `½‖A(Z) − y‖² + λ‖Z‖_*`.
pub fn fbs_solve(
    p: &ProblemInstance,
    lambda: f64,
    opts: &ConvexOptions,
    clock: &dyn Clock,
) -> Result<SolverReport<DMatrix<f64>>> {
    let n = p.n();
    fbs_from(p, lambda, opts, DMatrix::zeros(n, n), clock)
}

fn fbs_from(
    p: &ProblemInstance,
    lambda: f64,
    opts: &ConvexOptions,
    start: DMatrix<f64>,
    clock: &dyn Clock,
) -> Result<SolverReport<DMatrix<f64>>> {
    opts.validate()?;
    check_lambda(lambda)?;
    if p.y.iter().all(|v| *v == 0.0) {
        return Ok(zero_report(p, clock));
    }
    let alpha = resolve_step(&p.ensemble, opts.step, p.seed)?;
    let mut z = start;
    let mut nuclear: f64 = compact_svd(&z)?.sigma.iter().sum();
    let mut tracer = Tracer::new(clock);

    let (mut res, rel) = residual(p, &z)?;
    tracer.record(rel, Some(p.rel_error(&z)), Some(0.5 * res.norm_squared() + lambda * nuclear));
    let mut status = Status::MaxIters;
    while tracer.iterations() < opts.max_iters {
        let forward = &z - alpha * p.ensemble.adjoint(&res)?;
        let next = svt_triple(&forward, alpha * lambda)?;
        nuclear = next.sigma.iter().sum();
        let next = next.to_dense();
        let change = (&next - &z).norm() / z.norm().max(1.0);
        z = next;
        let rel;
        (res, rel) = residual(p, &z)?;
        let objective = 0.5 * res.norm_squared() + lambda * nuclear;
        if tracer.record(rel, Some(p.rel_error(&z)), Some(objective)) {
            status = Status::Diverged;
            break;
        }
        if change <= opts.tol {
            status = Status::Converged;
            break;
        }
    }
    Ok(tracer.finish(z, status))
}

/// Forward-backward splitting with λ decreased geometrically from
/// `lambda_start` to `lambda_end` over `stages` warm-started runs.
///
/// The returned trace concatenates the stages (with the initial row of each
/// later stage dropped) and renumbers iterations.
pub fn fbs_continuation(
    p: &ProblemInstance,
    lambda_start: f64,
    lambda_end: f64,
    stages: usize,
    opts: &ConvexOptions,
    clock: &dyn Clock,
) -> Result<SolverReport<DMatrix<f64>>> {
    if stages == 0 {
        return Err(invalid_options("continuation needs at least one stage"));
    }
    if !(lambda_start >= lambda_end && lambda_end > 0.0) {
        return Err(invalid_options("continuation needs lambda_start ≥ lambda_end > 0"));
    }
    let ratio = if stages > 1 {
        (lambda_end / lambda_start).powf(1.0 / (stages - 1) as f64)
    } else {
        1.0
    };
    let n = p.n();
    let mut lambda = if stages > 1 { lambda_start } else { lambda_end };
    let mut report = fbs_from(p, lambda, opts, DMatrix::zeros(n, n), clock)?;
    for _ in 1..stages {
        if report.status == Status::Diverged {
            break;
        }
        lambda *= ratio;
        let next = fbs_from(p, lambda, opts, report.estimate.clone(), clock)?;
        let offset = report.trace.len() - 1;
        report.trace.extend(next.trace.into_iter().skip(1).map(|mut row| {
            row.iter += offset;
            row
        }));
        report.events.extend(next.events);
        report.estimate = next.estimate;
        report.status = next.status;
    }
    Ok(report)
}

/// ADMM on `min ½‖A(Z) − y‖² + λ‖Y‖_*  s.t.  Y = Z`:
///
/// ```text
/// Z_{k+1} = (A*A + μI)⁻¹ (A*y + μY_k + Λ_k)
/// Y_{k+1} = D_{λ/μ}(Z_{k+1} − Λ_k/μ)
/// Λ_{k+1} = Λ_k + α μ (Y_{k+1} − Z_{k+1})
/// ```
///
/// The `Z`-update is entrywise for completion and uses conjugate gradients
/// (relative tolerance `1e-10`) otherwise. Stops when the primal gap
/// `‖Y_{k+1} − Z_{k+1}‖_F` and the dual residual `μ‖Y_{k+1} − Y_k‖_F` are
/// both at most `tol ‖Z_{k+1}‖_F`; the gap alone is already tiny after one
/// sweep when `λ` is small. The estimate is `Y`.
pub fn admm_solve(
    p: &ProblemInstance,
    lambda: f64,
    opts: &ConvexOptions,
    clock: &dyn Clock,
) -> Result<SolverReport<DMatrix<f64>>> {
    opts.validate()?;
    check_lambda(lambda)?;
    if !(opts.mu > 0.0) || !opts.mu.is_finite() {
        return Err(invalid_options("mu must be positive"));
    }
    let golden = (5f64.sqrt() + 1.0) / 2.0;
    if !(opts.admm_relax > 0.0 && opts.admm_relax < golden) {
        return Err(invalid_options("ADMM relaxation must lie in (0, (√5+1)/2)"));
    }
    if p.y.iter().all(|v| *v == 0.0) {
        return Ok(zero_report(p, clock));
    }
    let n = p.n();
    let mu = opts.mu;
    let aty = p.ensemble.adjoint(&p.y)?;
    let mut state = AdmmState {
        z: DMatrix::zeros(n, n),
        y: DMatrix::zeros(n, n),
        lambda_mult: DMatrix::zeros(n, n),
    };
    let mut tracer = Tracer::new(clock);
    let (_, rel) = residual(p, &state.y)?;
    tracer.record(rel, Some(p.rel_error(&state.y)), None);
    let mut status = Status::MaxIters;
    while tracer.iterations() < opts.max_iters {
        let previous = state.y.clone();
        let gap = admm_step(p, &aty, lambda, mu, opts.admm_relax, &mut state)?;
        let dual_residual = mu * (&state.y - &previous).norm();
        let (_, rel) = residual(p, &state.y)?;
        if tracer.record(rel, Some(p.rel_error(&state.y)), None) {
            status = Status::Diverged;
            break;
        }
        let scale = opts.tol * state.z.norm();
        if gap <= scale && dual_residual <= scale {
            status = Status::Converged;
            break;
        }
    }
    Ok(tracer.finish(state.y, status))
}

#[derive(Debug, Clone)]
pub(crate) struct AdmmState {
    pub(crate) z: DMatrix<f64>,
    pub(crate) y: DMatrix<f64>,
    pub(crate) lambda_mult: DMatrix<f64>,
}

/// One ADMM sweep; returns `‖Y_{k+1} − Z_{k+1}‖_F`.
pub(crate) fn admm_step(
    p: &ProblemInstance,
    aty: &DMatrix<f64>,
    lambda: f64,
    mu: f64,
    relax: f64,
    s: &mut AdmmState,
) -> Result<f64> {
    let rhs = aty + mu * &s.y + &s.lambda_mult;
    s.z = match &p.ensemble {
        Ensemble::Completion(sampling) => {
            let counts = sampling.multiplicity();
            rhs.zip_map(&counts, |r, c| r / (c + mu))
        }
        _ => conjugate_gradient(&p.ensemble, mu, &rhs, &s.z, 1e-10)?,
    };
    s.y = svt(&(&s.z - &s.lambda_mult / mu), lambda / mu)?;
    let diff = &s.y - &s.z;
    s.lambda_mult += relax * mu * &diff;
    Ok(diff.norm())
}

/// Solve `(A*A + μI) Z = rhs` by conjugate gradients from `start`.
fn conjugate_gradient(
    e: &Ensemble,
    mu: f64,
    rhs: &DMatrix<f64>,
    start: &DMatrix<f64>,
    rel_tol: f64,
) -> Result<DMatrix<f64>> {
    let apply = |z: &DMatrix<f64>| -> Result<DMatrix<f64>> { Ok(e.adjoint(&e.forward(z)?)? + mu * z) };
    let target = rel_tol * rhs.norm();
    let mut z = start.clone();
    let mut r = rhs - apply(&z)?;
    let mut d = r.clone();
    let mut rr = r.norm_squared();
    let limit = 10 * rhs.len() + 100;
    for _ in 0..limit {
        if rr.sqrt() <= target {
            return Ok(z);
        }
        let ad = apply(&d)?;
        let curvature = d.dot(&ad);
        if !(curvature > 0.0) {
            return Err(Error::Numerical("conjugate gradients lost positive curvature".into()));
        }
        let step = rr / curvature;
        z += step * &d;
        r -= step * &ad;
        let rr_next = r.norm_squared();
        d = &r + (rr_next / rr) * &d;
        rr = rr_next;
    }
    if rr.sqrt() <= target {
        Ok(z)
    } else {
        Err(Error::Numerical("conjugate gradients did not converge".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measurements::{generate_instance, Sampling, Scenario};
    use crate::report::NoClock;

    fn full(n: usize, r: usize, seed: u64) -> ProblemInstance {
        generate_instance(Scenario::FullCompletion, n, r, n * n, seed).unwrap()
    }

    #[test]
    fn zero_data_returns_zero() {
        let mut p = full(5, 1, 0);
        p.truth = DMatrix::zeros(5, 5);
        p.y = DVector::zeros(25);
        let opts = ConvexOptions::default();
        for rep in [
            svt_solve(&p, &opts, &NoClock).unwrap(),
            fbs_solve(&p, 1.0, &opts, &NoClock).unwrap(),
            admm_solve(&p, 1.0, &opts, &NoClock).unwrap(),
        ] {
            assert_eq!(rep.estimate, DMatrix::zeros(5, 5));
            assert_eq!(rep.trace.len(), 1);
        }
    }

    #[test]
    fn step_rule_validation() {
        let p = full(4, 1, 0);
        let bad = ConvexOptions {
            step: StepRule::Constant(2.5),
            ..Default::default()
        };
        assert!(matches!(svt_solve(&p, &bad, &NoClock), Err(Error::InvalidOptions(_))));
        let bad = ConvexOptions {
            step: StepRule::NormBound(2.0),
            ..Default::default()
        };
        assert!(matches!(fbs_solve(&p, 1.0, &bad, &NoClock), Err(Error::InvalidOptions(_))));
        let bad = ConvexOptions {
            admm_relax: 1.7,
            ..Default::default()
        };
        assert!(matches!(admm_solve(&p, 1.0, &bad, &NoClock), Err(Error::InvalidOptions(_))));
    }

    #[test]
    fn svt_full_observation_reaches_tol() {
        let p = full(20, 2, 3);
        let sigma_r = p.ground_truth.sigma[1];
        let opts = ConvexOptions {
            lambda: 0.5 * sigma_r,
            step: StepRule::Constant(1.0),
            tol: 1e-6,
            max_iters: 5000,
            ..Default::default()
        };
        let rep = svt_solve(&p, &opts, &NoClock).unwrap();
        assert_eq!(rep.status, Status::Converged);
        assert!(rep.final_rel_residual() < 1e-6);
    }

    #[test]
    fn svt_dual_objective_nondecreasing() {
        let n = 12;
        let p = generate_instance(Scenario::Sensing, n, 2, 100, 4).unwrap();
        let opts = ConvexOptions {
            lambda: 5.0 * n as f64,
            max_iters: 300,
            ..Default::default()
        };
        let rep = svt_solve(&p, &opts, &NoClock).unwrap();
        for w in rep.trace.windows(2) {
            let (a, b) = (w[0].objective.unwrap(), w[1].objective.unwrap());
            assert!(b >= a - 1e-12 * a.abs().max(1.0), "{a} -> {b}");
        }
    }

    #[test]
    fn svt_sensing_large_lambda_recovers() {
        let n = 20;
        let p = generate_instance(Scenario::Sensing, n, 2, 500, 11).unwrap();
        let opts = ConvexOptions {
            lambda: 10.0 * n as f64,
            tol: 1e-7,
            max_iters: 5000,
            ..Default::default()
        };
        let rep = svt_solve(&p, &opts, &NoClock).unwrap();
        assert!(rep.final_rel_error().unwrap() <= 1e-3, "{:?}", rep.final_rel_error());
    }

    #[test]
    fn fbs_identity_one_step_fixed_point() {
        let p = full(8, 2, 5);
        let lambda = 0.3 * p.ground_truth.sigma[1];
        let opts = ConvexOptions {
            step: StepRule::Constant(1.0),
            tol: 1e-14,
            max_iters: 10,
            ..Default::default()
        };
        let rep = fbs_solve(&p, lambda, &opts, &NoClock).unwrap();
        let expected = svt(&p.truth, lambda).unwrap();
        assert!((&rep.estimate - &expected).norm() < 1e-12 * expected.norm());
        assert_eq!(rep.status, Status::Converged);
        assert_eq!(rep.iterations(), 2);
    }

    #[test]
    fn fbs_large_lambda_kills_everything() {
        let p = full(6, 2, 6);
        let lambda = p.ground_truth.spectral_norm();
        let opts = ConvexOptions {
            step: StepRule::Constant(1.0),
            ..Default::default()
        };
        let rep = fbs_solve(&p, lambda, &opts, &NoClock).unwrap();
        assert_eq!(rep.estimate, DMatrix::zeros(6, 6));
    }

    #[test]
    fn fbs_objective_descends() {
        let n = 20;
        let p = generate_instance(Scenario::Sensing, n, 2, 240, 7).unwrap();
        let lambda = 1e-3 * p.y.norm();
        let opts = ConvexOptions {
            tol: 1e-9,
            max_iters: 400,
            ..Default::default()
        };
        let rep = fbs_solve(&p, lambda, &opts, &NoClock).unwrap();
        for w in rep.trace.windows(2) {
            let (a, b) = (w[0].objective.unwrap(), w[1].objective.unwrap());
            assert!(b <= a + 1e-12 * a.abs(), "{a} -> {b}");
        }
    }

    #[test]
    fn admm_zero_lambda_y_equals_z() {
        let p = generate_instance(Scenario::Completion, 6, 1, 20, 1).unwrap();
        let aty = p.ensemble.adjoint(&p.y).unwrap();
        let mut s = AdmmState {
            z: DMatrix::zeros(6, 6),
            y: DMatrix::zeros(6, 6),
            lambda_mult: DMatrix::zeros(6, 6),
        };
        admm_step(&p, &aty, 0.0, 1.0, 1.0, &mut s).unwrap();
        assert_eq!(s.y, s.z);
    }

    #[test]
    fn admm_single_entry_closed_form() {
        let ensemble = Ensemble::Completion(Sampling::new(3, alloc::vec![(0, 0)]).unwrap());
        let mut truth = DMatrix::zeros(3, 3);
        truth[(0, 0)] = 5.0;
        let p = ProblemInstance::from_truth(Scenario::Completion, ensemble, truth, 1, 0).unwrap();
        let aty = p.ensemble.adjoint(&p.y).unwrap();
        let mut s = AdmmState {
            z: DMatrix::zeros(3, 3),
            y: DMatrix::zeros(3, 3),
            lambda_mult: DMatrix::zeros(3, 3),
        };
        admm_step(&p, &aty, 0.0, 1.0, 1.0, &mut s).unwrap();
        let mut expected = DMatrix::zeros(3, 3);
        expected[(0, 0)] = 2.5;
        assert_eq!(s.z, expected);
    }

    #[test]
    fn admm_full_observation_converges() {
        let p = full(10, 1, 8);
        let opts = ConvexOptions {
            tol: 1e-10,
            max_iters: 2000,
            ..Default::default()
        };
        let rep = admm_solve(&p, 1e-4, &opts, &NoClock).unwrap();
        assert!(rep.final_rel_error().unwrap() <= 1e-3);
    }

    #[test]
    fn admm_sensing_uses_cg() {
        let n = 8;
        let p = generate_instance(Scenario::Sensing, n, 1, 100, 9).unwrap();
        let opts = ConvexOptions {
            tol: 1e-8,
            max_iters: 3000,
            ..Default::default()
        };
        let rep = admm_solve(&p, 1e-6, &opts, &NoClock).unwrap();
        assert!(rep.final_rel_error().unwrap() <= 1e-3, "{:?}", rep.final_rel_error());
    }

    #[test]
    fn all_solvers_exact_with_vanishing_lambda() {
        let p = full(10, 2, 12);
        let opts = ConvexOptions {
            lambda: 1e-3,
            step: StepRule::Constant(1.0),
            tol: 1e-12,
            max_iters: 20000,
            ..Default::default()
        };
        let svt_rep = svt_solve(&p, &opts, &NoClock).unwrap();
        assert!(svt_rep.final_rel_error().unwrap() <= 1e-6);
        let fbs_rep = fbs_continuation(&p, 1.0, 1e-9, 10, &opts, &NoClock).unwrap();
        assert!(fbs_rep.final_rel_error().unwrap() <= 1e-6);
        let admm_rep = admm_solve(&p, 1e-9, &opts, &NoClock).unwrap();
        assert!(admm_rep.final_rel_error().unwrap() <= 1e-6);
    }
}
