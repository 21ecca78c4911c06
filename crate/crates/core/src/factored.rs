//! Gradient methods on Burer–Monteiro factors `Z = L Rᵀ`.
//!
//! [`pgd_solve`] runs projected gradient descent on
//!
//! ```text
//! f(L, R) = ½‖A(L Rᵀ) − y‖² + λ‖LᵀL − RᵀR‖_F²
//! ```
//!
//! with optional row trimming onto `C = {‖L‖_{2,∞}, ‖R‖_{2,∞} ≤ ρ}` for
//! completion. [`wirtinger_flow`] is the phase-retrieval specialization
//! `L = R = z`.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
// Float methods under no_std; std shadows them when linked into the build.
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{invalid_input, invalid_options, Result};
use crate::linalg::{truncate_rank, LinearOperand, SvdTriple};
use crate::manifold::{iht_solve, ManifoldOptions, ManifoldStep};
use crate::measurements::{incoherence, Ensemble, ProblemInstance};
use crate::report::{Clock, NoClock, SolverReport, Status, Tracer};

/// Spectral initialization `Z₀ = T_r(α A*(y))`.
pub fn spectral_init(p: &ProblemInstance, alpha: f64, r: usize) -> Result<SvdTriple> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(invalid_input("spectral scaling must be positive"));
    }
    let mut z0 = truncate_rank(&p.ensemble.adjoint(&p.y)?, r)?;
    z0.sigma *= alpha;
    Ok(z0)
}

/// `iters` IHT steps (NIHT stepsize) from the spectral initialization.
pub fn iht_warm_start(p: &ProblemInstance, iters: usize) -> Result<SvdTriple> {
    if iters == 0 {
        return Err(invalid_input("the warm start needs at least one IHT iteration"));
    }
    let opts = ManifoldOptions {
        step: ManifoldStep::Niht,
        tol: f64::MIN_POSITIVE,
        max_iters: iters,
        ..Default::default()
    };
    Ok(iht_solve(p, &opts, &NoClock)?.estimate)
}

/// Current factors; the estimate is `L Rᵀ`.
#[derive(Debug, Clone, PartialEq)]
pub struct FactoredState {
    pub l: DMatrix<f64>,
    pub r: DMatrix<f64>,
}

impl FactoredState {
    /// Balanced factors `U Σ^{1/2}`, `V Σ^{1/2}`.
    pub fn balanced(z: &SvdTriple) -> Self {
        let mut l = z.u.clone();
        let mut r = z.v.clone();
        for (j, s) in z.sigma.iter().enumerate() {
            let h = s.sqrt();
            l.column_mut(j).scale_mut(h);
            r.column_mut(j).scale_mut(h);
        }
        FactoredState { l, r }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        &self.l * self.r.transpose()
    }

    /// `‖LᵀL − RᵀR‖_F`.
    pub fn imbalance(&self) -> f64 {
        (self.l.tr_mul(&self.l) - self.r.tr_mul(&self.r)).norm()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PgdStep {
    Constant(f64),
    /// `α = c·s/‖Z₀‖₂`, where `s` is the spectral scaling of the ensemble
    /// (`n²/m` for completion, `1` otherwise).
    Normalized(f64),
    /// Armijo backtracking from the normalized step `c·s/‖Z₀‖₂`.
    Backtracking {
        initial: f64,
        shrink: f64,
        sufficient_decrease: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct PgdOptions {
    /// Weight `λ` of the balance regularizer.
    pub lambda_bal: f64,
    /// Incoherence parameter of the trimming set; the incoherence of `Z₀`
    /// when absent.
    pub mu0: Option<f64>,
    pub step: PgdStep,
    /// Trim rows onto `C` (completion only; sensing has no constraint).
    pub use_projection: bool,
    pub tol: f64,
    pub max_iters: usize,
    /// Starting factors; the (trimmed) spectral initialization when absent.
    pub initial: Option<FactoredState>,
}

impl Default for PgdOptions {
    fn default() -> Self {
        PgdOptions::faithful()
    }
}

impl PgdOptions {
    /// Regularizer and trimming on.
    pub fn faithful() -> Self {
        PgdOptions {
            lambda_bal: 1.0 / 16.0,
            mu0: None,
            step: PgdStep::Backtracking {
                initial: 2.0,
                shrink: 0.5,
                sufficient_decrease: 1e-4,
            },
            use_projection: true,
            tol: 1e-6,
            max_iters: 5000,
            initial: None,
        }
    }

    /// Plain gradient descent on the factors: no regularizer, no trimming.
    pub fn bench() -> Self {
        PgdOptions {
            lambda_bal: 0.0,
            use_projection: false,
            ..PgdOptions::faithful()
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.lambda_bal >= 0.0) || !self.lambda_bal.is_finite() {
            return Err(invalid_options("lambda_bal must be nonnegative"));
        }
        if !(self.tol > 0.0) || self.max_iters == 0 {
            return Err(invalid_options("tol must be positive and max_iters at least 1"));
        }
        if let Some(mu0) = self.mu0 {
            if !(mu0 > 0.0) {
                return Err(invalid_options("mu0 must be positive"));
            }
        }
        match self.step {
            PgdStep::Constant(a) | PgdStep::Normalized(a) if !(a > 0.0) || !a.is_finite() => {
                Err(invalid_options("stepsize must be positive"))
            }
            PgdStep::Backtracking {
                initial,
                shrink,
                sufficient_decrease,
            } if !(initial > 0.0)
                || !(shrink > 0.0 && shrink < 1.0)
                || !(sufficient_decrease > 0.0 && sufficient_decrease < 1.0) =>
            {
                Err(invalid_options("backtracking needs initial > 0 and shrink, c in (0, 1)"))
            }
            _ => Ok(()),
        }
    }
}

/// Trim every row of `m` to norm at most `radius`, keeping its direction.
pub fn trim_rows(m: &DMatrix<f64>, radius: f64) -> DMatrix<f64> {
    let mut out = m.clone();
    for mut row in out.row_iter_mut() {
        let norm = row.norm();
        if norm > radius {
            row.scale_mut(radius / norm);
        }
    }
    out
}

/// `f(L, R) = ½‖A(L Rᵀ) − y‖² + λ‖LᵀL − RᵀR‖_F²`.
pub fn pgd_objective(p: &ProblemInstance, state: &FactoredState, lambda_bal: f64) -> Result<f64> {
    let res = p.ensemble.forward_factors(&state.l, &state.r)? - &p.y;
    Ok(0.5 * res.norm_squared() + lambda_bal * state.imbalance().powi(2))
}

/// Partial gradients of [`pgd_objective`]:
///
/// ```text
/// ∇_L f = A*(A(LRᵀ) − y) R + 4λ L (LᵀL − RᵀR)
/// ∇_R f = A*(A(LRᵀ) − y)ᵀ L − 4λ R (LᵀL − RᵀR)
/// ```
pub fn pgd_gradients(
    p: &ProblemInstance,
    state: &FactoredState,
    lambda_bal: f64,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let res = p.ensemble.forward_factors(&state.l, &state.r)? - &p.y;
    gradients_from_residual(&p.ensemble, state, &res, lambda_bal)
}

fn gradients_from_residual(
    e: &Ensemble,
    state: &FactoredState,
    res: &DVector<f64>,
    lambda_bal: f64,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let g = e.adjoint_operand(res)?;
    let mut gl = g.mul_right(&state.r);
    let mut gr = g.adjoint_mul(&state.l);
    if lambda_bal > 0.0 {
        let d = state.l.tr_mul(&state.l) - state.r.tr_mul(&state.r);
        gl += 4.0 * lambda_bal * &state.l * &d;
        gr -= 4.0 * lambda_bal * &state.r * &d;
    }
    Ok((gl, gr))
}

fn zero_factors(p: &ProblemInstance) -> FactoredState {
    FactoredState {
        l: DMatrix::zeros(p.n(), p.r),
        r: DMatrix::zeros(p.n(), p.r),
    }
}

/// Projected gradient descent on `(L, R)`.
///
/// Starts from `L₀ = P_C[U₀Σ₀^{1/2}]`, `R₀ = P_C[V₀Σ₀^{1/2}]` with `Z₀` the
/// spectral initialization (scaling `n²/m` for completion, `1` for sensing);
/// stops when `‖A(LRᵀ) − y‖/‖y‖ ≤ tol`.
pub fn pgd_solve(
    p: &ProblemInstance,
    opts: &PgdOptions,
    clock: &dyn Clock,
) -> Result<SolverReport<FactoredState>> {
    opts.validate()?;
    if matches!(p.ensemble, Ensemble::PhaseRetrieval(_)) {
        return Err(invalid_input("use wirtinger_flow for phase retrieval"));
    }
    let mut tracer = Tracer::new(clock);
    if p.y.iter().all(|v| *v == 0.0) {
        let z = zero_factors(p);
        tracer.record(0.0, Some(p.rel_error(&z.to_dense())), Some(0.0));
        return Ok(tracer.finish(z, Status::Converged));
    }

    let scale = p.ensemble.spectral_scale();
    let z0 = spectral_init(p, scale, p.r)?;
    let z0_norm = z0.spectral_norm();
    let radius = match (&p.ensemble, opts.use_projection) {
        (Ensemble::Completion(_), true) => {
            let mu0 = opts.mu0.unwrap_or_else(|| incoherence(&z0));
            Some((2.0 * mu0 * p.r as f64 / p.n() as f64).sqrt() * z0_norm.sqrt())
        }
        _ => None,
    };
    let project = |s: FactoredState| match radius {
        Some(rad) => FactoredState {
            l: trim_rows(&s.l, rad),
            r: trim_rows(&s.r, rad),
        },
        None => s,
    };
    let mut state = match &opts.initial {
        Some(s) => {
            if s.l.shape() != (p.n(), p.r) || s.r.shape() != (p.n(), p.r) {
                return Err(invalid_input("initial factors must be n×r"));
            }
            s.clone()
        }
        None => project(FactoredState::balanced(&z0)),
    };
    let normalized = |c: f64| c * scale / z0_norm.max(f64::MIN_POSITIVE);

    let mut res = p.ensemble.forward_factors(&state.l, &state.r)? - &p.y;
    let y_norm = p.y.norm();
    let objective = |res: &DVector<f64>, s: &FactoredState| {
        0.5 * res.norm_squared() + opts.lambda_bal * s.imbalance().powi(2)
    };
    let mut f = objective(&res, &state);
    let mut rel = res.norm() / y_norm;
    tracer.record(rel, Some(p.rel_error(&state.to_dense())), Some(f));
    let mut status = if rel <= opts.tol { Status::Converged } else { Status::MaxIters };

    while status == Status::MaxIters && tracer.iterations() < opts.max_iters {
        let (gl, gr) = gradients_from_residual(&p.ensemble, &state, &res, opts.lambda_bal)?;
        let step_to = |alpha: f64| {
            project(FactoredState {
                l: &state.l - alpha * &gl,
                r: &state.r - alpha * &gr,
            })
        };
        let (next, next_res) = match opts.step {
            PgdStep::Constant(a) => {
                let s = step_to(a);
                let r = p.ensemble.forward_factors(&s.l, &s.r)? - &p.y;
                (s, r)
            }
            PgdStep::Normalized(c) => {
                let s = step_to(normalized(c));
                let r = p.ensemble.forward_factors(&s.l, &s.r)? - &p.y;
                (s, r)
            }
            PgdStep::Backtracking {
                initial,
                shrink,
                sufficient_decrease,
            } => {
                let grad_sq = gl.norm_squared() + gr.norm_squared();
                let mut alpha = normalized(initial);
                let mut accepted = None;
                for _ in 0..60 {
                    let s = step_to(alpha);
                    let r = p.ensemble.forward_factors(&s.l, &s.r)? - &p.y;
                    if objective(&r, &s) <= f - sufficient_decrease * alpha * grad_sq {
                        accepted = Some((s, r));
                        break;
                    }
                    alpha *= shrink;
                }
                match accepted {
                    Some(x) => x,
                    None => {
                        let s = step_to(alpha);
                        let r = p.ensemble.forward_factors(&s.l, &s.r)? - &p.y;
                        (s, r)
                    }
                }
            }
        };
        state = next;
        res = next_res;
        f = objective(&res, &state);
        rel = res.norm() / y_norm;
        if tracer.record(rel, Some(p.rel_error(&state.to_dense())), Some(f)) {
            status = Status::Diverged;
        } else if rel <= opts.tol {
            status = Status::Converged;
        }
    }
    Ok(tracer.finish(state, status))
}

/// How the spectral direction is rescaled before Wirtinger flow starts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WfInitNorm {
    /// `‖z₀‖ = ‖y‖₁/m`.
    MeanIntensity,
    /// `‖z₀‖ = (‖y‖₁/m)^{1/2}`, the usual estimate of `‖x‖`.
    RootMeanIntensity,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WfStep {
    Constant(f64),
    /// `α_k = c_k/‖z_k‖²` with the ramp `c_k = c (1 − e^{−(k+1)/K})`; `K = 0`
    /// disables the ramp.
    Normalized { c: f64, warmup: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct WfOptions {
    pub step: WfStep,
    pub init_norm: WfInitNorm,
    pub tol: f64,
    pub max_iters: usize,
    pub initial: Option<DVector<f64>>,
}

impl Default for WfOptions {
    fn default() -> Self {
        WfOptions {
            step: WfStep::Normalized { c: 0.2, warmup: 10.0 },
            init_norm: WfInitNorm::MeanIntensity,
            tol: 1e-10,
            max_iters: 1000,
            initial: None,
        }
    }
}

fn phase_vectors(p: &ProblemInstance) -> Result<&DMatrix<f64>> {
    match &p.ensemble {
        Ensemble::PhaseRetrieval(pm) => Ok(pm.vectors()),
        _ => Err(invalid_input("Wirtinger flow needs a phase-retrieval instance")),
    }
}

/// `(1/4m) Σ_ℓ ((a_ℓᵀz)² − y_ℓ)²`, scaled so that its gradient is exactly
/// the Wirtinger-flow direction [`wf_gradient`].
pub fn wf_objective(p: &ProblemInstance, z: &DVector<f64>) -> Result<f64> {
    let a = phase_vectors(p)?;
    let az = a * z;
    let m = a.nrows() as f64;
    Ok(az.iter().zip(p.y.iter()).map(|(t, y)| (t * t - y).powi(2)).sum::<f64>() / (4.0 * m))
}

/// `(1/m) Σ_ℓ ((a_ℓᵀz)² − y_ℓ)(a_ℓᵀz) a_ℓ`.
pub fn wf_gradient(p: &ProblemInstance, z: &DVector<f64>) -> Result<DVector<f64>> {
    let a = phase_vectors(p)?;
    if z.len() != a.ncols() {
        return Err(invalid_input("iterate length does not match the ensemble"));
    }
    let az = a * z;
    let w = DVector::from_iterator(
        az.len(),
        az.iter().zip(p.y.iter()).map(|(t, y)| (t * t - y) * t),
    );
    Ok(a.tr_mul(&w) / a.nrows() as f64)
}

/// Spectral initialization for phase retrieval: the leading eigenvector of
/// `A*(y) = Σ y_ℓ a_ℓ a_ℓᵀ`, rescaled per `norm`.
pub fn wf_initial(p: &ProblemInstance, norm: WfInitNorm) -> Result<DVector<f64>> {
    let a = phase_vectors(p)?;
    let z0 = spectral_init(p, 1.0, 1)?;
    let mean = p.y.iter().map(|v| v.abs()).sum::<f64>() / a.nrows() as f64;
    let target = match norm {
        WfInitNorm::MeanIntensity => mean,
        WfInitNorm::RootMeanIntensity => mean.sqrt(),
    };
    Ok(z0.u.column(0) * target)
}

/// Wirtinger flow,
/// `z_{k+1} = z_k − (α_k/m) Σ_ℓ ((a_ℓᵀz_k)² − y_ℓ)(a_ℓᵀz_k) a_ℓ`.
///
/// The trace residual is `‖|Az|² − y‖/‖y‖`; the error is sign-invariant.
pub fn wirtinger_flow(
    p: &ProblemInstance,
    opts: &WfOptions,
    clock: &dyn Clock,
) -> Result<SolverReport<DVector<f64>>> {
    let a = phase_vectors(p)?;
    if !(opts.tol > 0.0) || opts.max_iters == 0 {
        return Err(invalid_options("tol must be positive and max_iters at least 1"));
    }
    match opts.step {
        WfStep::Constant(c) | WfStep::Normalized { c, .. } if !(c > 0.0) || !c.is_finite() => {
            return Err(invalid_options("stepsize must be positive"));
        }
        WfStep::Normalized { warmup, .. } if !(warmup >= 0.0) => {
            return Err(invalid_options("warmup must be nonnegative"));
        }
        _ => {}
    }
    let mut z = match &opts.initial {
        Some(z) if z.len() == a.ncols() => z.clone(),
        Some(_) => return Err(invalid_input("initial iterate has the wrong length")),
        None => wf_initial(p, opts.init_norm)?,
    };
    let y_norm = p.y.norm();
    let residual = |z: &DVector<f64>| {
        let az = a * z;
        let d: Vec<f64> = az.iter().zip(p.y.iter()).map(|(t, y)| t * t - y).collect();
        let n = d.iter().map(|x| x * x).sum::<f64>().sqrt();
        if y_norm > 0.0 {
            n / y_norm
        } else {
            n
        }
    };
    let mut tracer = Tracer::new(clock);
    let mut rel = residual(&z);
    tracer.record(rel, p.signal_rel_error(&z), Some(wf_objective(p, &z)?));
    let mut status = if rel <= opts.tol { Status::Converged } else { Status::MaxIters };
    while status == Status::MaxIters && tracer.iterations() < opts.max_iters {
        let alpha = match opts.step {
            WfStep::Constant(a) => a,
            WfStep::Normalized { c, warmup } => {
                let k = tracer.iterations() as f64;
                let ramp = if warmup > 0.0 { 1.0 - (-(k + 1.0) / warmup).exp() } else { 1.0 };
                c * ramp / z.norm_squared().max(f64::MIN_POSITIVE)
            }
        };
        z -= alpha * wf_gradient(p, &z)?;
        rel = residual(&z);
        if tracer.record(rel, p.signal_rel_error(&z), Some(wf_objective(p, &z)?)) {
            status = Status::Diverged;
        } else if rel <= opts.tol {
            status = Status::Converged;
        }
    }
    Ok(tracer.finish(z, status))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measurements::{generate_instance, PhaseMeasurements, Scenario};
    use crate::rng::{gaussian_matrix, gaussian_vector, stream};

    fn fd_check(f: impl Fn(&DMatrix<f64>) -> f64, x: &DMatrix<f64>, grad: &DMatrix<f64>) {
        let h = 1e-6 * x.norm().max(1.0);
        let mut fd = DMatrix::zeros(x.nrows(), x.ncols());
        for k in 0..x.len() {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[k] += h;
            xm[k] -= h;
            fd[k] = (f(&xp) - f(&xm)) / (2.0 * h);
        }
        let rel = (&fd - grad).norm() / grad.norm().max(1e-300);
        assert!(rel <= 1e-5, "finite-difference mismatch {rel}");
    }

    #[test]
    fn pgd_gradients_match_finite_differences() {
        for (k, scenario) in [Scenario::Sensing, Scenario::Completion].into_iter().enumerate() {
            let p = generate_instance(scenario, 10, 2, 120, 40 + k as u64).unwrap();
            let mut rng = stream(7 + k as u64);
            for _ in 0..20 {
                let s = FactoredState {
                    l: gaussian_matrix(&mut rng, 10, 2),
                    r: gaussian_matrix(&mut rng, 10, 2),
                };
                let lam = 0.3;
                let (gl, gr) = pgd_gradients(&p, &s, lam).unwrap();
                let fl = |l: &DMatrix<f64>| {
                    pgd_objective(&p, &FactoredState { l: l.clone(), r: s.r.clone() }, lam).unwrap()
                };
                fd_check(fl, &s.l, &gl);
                let fr = |r: &DMatrix<f64>| {
                    pgd_objective(&p, &FactoredState { l: s.l.clone(), r: r.clone() }, lam).unwrap()
                };
                fd_check(fr, &s.r, &gr);
            }
        }
    }

    #[test]
    fn wf_gradient_matches_finite_differences() {
        let p = generate_instance(Scenario::PhaseRetrieval, 12, 1, 80, 3).unwrap();
        let mut rng = stream(9);
        for _ in 0..20 {
            let z = gaussian_vector(&mut rng, 12);
            let g = wf_gradient(&p, &z).unwrap();
            let f = |m: &DMatrix<f64>| wf_objective(&p, &m.column(0).into_owned()).unwrap();
            fd_check(f, &DMatrix::from_column_slice(12, 1, z.as_slice()), &DMatrix::from_column_slice(12, 1, g.as_slice()));
        }
    }

    #[test]
    fn balanced_truth_is_stationary() {
        let p = generate_instance(Scenario::Sensing, 10, 2, 150, 2).unwrap();
        let s = FactoredState::balanced(&p.ground_truth);
        let (gl, gr) = pgd_gradients(&p, &s, 1.0 / 16.0).unwrap();
        let scale = p.ground_truth.spectral_norm();
        assert!(gl.norm() <= 1e-10 * scale && gr.norm() <= 1e-10 * scale);
    }

    #[test]
    fn trimming_rescales_long_rows_only() {
        let m = DMatrix::from_row_slice(2, 2, &[3.0, 4.0, 0.3, 0.4]);
        let t = trim_rows(&m, 1.0);
        assert!((t.row(0).norm() - 1.0).abs() < 1e-15);
        assert!((t[(0, 0)] / t[(0, 1)] - 0.75).abs() < 1e-15);
        assert_eq!(t.row(1), m.row(1));
        // Idempotent, never lengthens a row.
        assert_eq!(trim_rows(&t, 1.0), t);
        let mut rng = stream(1);
        let g = gaussian_matrix(&mut rng, 30, 3);
        let tg = trim_rows(&g, 1.2);
        for i in 0..30 {
            assert!(tg.row(i).norm() <= g.row(i).norm());
        }
    }

    #[test]
    fn spectral_init_examples() {
        let p = generate_instance(Scenario::FullCompletion, 8, 2, 64, 1).unwrap();
        let z0 = spectral_init(&p, 1.0, 2).unwrap();
        assert!((z0.to_dense() - &p.truth).norm() < 1e-10 * p.truth.norm());

        let mut zero = p.clone();
        zero.y.fill(0.0);
        assert_eq!(spectral_init(&zero, 1.0, 2).unwrap().to_dense(), DMatrix::zeros(8, 8));
        assert!(spectral_init(&p, 0.0, 2).is_err());
    }

    #[test]
    fn spectral_init_bounds_spectral_norm() {
        let n = 100;
        for seed in 0..10 {
            let p = generate_instance(Scenario::Completion, n, 2, 3 * n * n / 10, seed).unwrap();
            let z0 = spectral_init(&p, p.ensemble.spectral_scale(), 2).unwrap();
            assert!(p.ground_truth.spectral_norm() <= 2.0 * z0.spectral_norm());
        }
    }

    #[test]
    fn warm_start_examples() {
        let p = generate_instance(Scenario::FullCompletion, 8, 2, 64, 3).unwrap();
        let z = iht_warm_start(&p, 1).unwrap();
        assert!((z.to_dense() - &p.truth).norm() < 1e-10 * p.truth.norm());
        assert!(iht_warm_start(&p, 0).is_err());
    }

    #[test]
    fn warm_start_improves_sensing_init() {
        let (n, r) = (30, 2);
        let mut wins = 0;
        for seed in 0..10 {
            let p = generate_instance(Scenario::Sensing, n, r, 6 * n * r, 100 + seed).unwrap();
            let spec = spectral_init(&p, 1.0, r).unwrap().to_dense();
            let warm = iht_warm_start(&p, 5).unwrap().to_dense();
            if (&warm - &p.truth).norm() < (&spec - &p.truth).norm() {
                wins += 1;
            }
        }
        assert!(wins >= 9, "{wins}/10");
    }

    #[test]
    fn pgd_initial_estimate_is_scale_invariant() {
        let p = generate_instance(Scenario::Sensing, 8, 2, 100, 5).unwrap();
        let s = FactoredState::balanced(&spectral_init(&p, 1.0, 2).unwrap());
        let c = 3.7;
        let scaled = FactoredState {
            l: &s.l * c,
            r: &s.r / c,
        };
        assert!((s.to_dense() - scaled.to_dense()).norm() <= 1e-12 * s.to_dense().norm());
    }

    #[test]
    fn pgd_full_observation_converges_fast() {
        let p = generate_instance(Scenario::FullCompletion, 20, 2, 400, 6).unwrap();
        let rep = pgd_solve(&p, &PgdOptions::faithful(), &NoClock).unwrap();
        assert_eq!(rep.status, Status::Converged);
    }

    #[test]
    fn pgd_completion_recovers_and_balances() {
        let (n, r) = (60, 2);
        let m = 3 * (2 * n - r) * r;
        let p = generate_instance(Scenario::Completion, n, r, m, 21).unwrap();
        let opts = PgdOptions {
            tol: 1e-9,
            ..PgdOptions::faithful()
        };
        let rep = pgd_solve(&p, &opts, &NoClock).unwrap();
        assert_eq!(rep.status, Status::Converged, "{:?}", rep.trace.last());
        assert!(rep.final_rel_error().unwrap() <= 1e-6);
        assert!(rep.estimate.imbalance() <= 1e-6 * p.ground_truth.spectral_norm());
    }

    #[test]
    fn pgd_backtracking_descends() {
        let p = generate_instance(Scenario::Sensing, 15, 2, 180, 4).unwrap();
        let opts = PgdOptions {
            step: PgdStep::Backtracking {
                initial: 1.0,
                shrink: 0.5,
                sufficient_decrease: 1e-4,
            },
            max_iters: 300,
            ..PgdOptions::faithful()
        };
        let rep = pgd_solve(&p, &opts, &NoClock).unwrap();
        for w in rep.trace.windows(2) {
            assert!(w[1].objective.unwrap() <= w[0].objective.unwrap());
        }
    }

    #[test]
    fn wf_single_step_arithmetic() {
        let e = Ensemble::PhaseRetrieval(PhaseMeasurements::new(DMatrix::from_element(1, 1, 1.0)).unwrap());
        let truth = DMatrix::from_element(1, 1, 4.0);
        let p = ProblemInstance::from_truth(crate::Scenario::PhaseRetrieval, e, truth, 1, 0).unwrap();
        let opts = WfOptions {
            step: WfStep::Constant(1.0 / 6.0),
            max_iters: 1,
            initial: Some(DVector::from_element(1, 1.0)),
            ..Default::default()
        };
        let rep = wirtinger_flow(&p, &opts, &NoClock).unwrap();
        assert!((rep.estimate[0] - 1.5).abs() < 1e-15);
    }

    #[test]
    fn wf_truth_is_stationary() {
        let p = generate_instance(Scenario::PhaseRetrieval, 10, 1, 60, 8).unwrap();
        let x = p.signal.clone().unwrap();
        assert!(wf_gradient(&p, &x).unwrap().norm() < 1e-10 * x.norm().powi(3));
    }

    #[test]
    fn wf_rejects_other_ensembles() {
        let p = generate_instance(Scenario::Sensing, 4, 1, 10, 0).unwrap();
        assert!(wirtinger_flow(&p, &WfOptions::default(), &NoClock).is_err());
    }

    #[test]
    fn wf_recovers_up_to_sign() {
        let n = 32;
        let p = generate_instance(Scenario::PhaseRetrieval, n, 1, 8 * n, 77).unwrap();
        let rep = wirtinger_flow(&p, &WfOptions::default(), &NoClock).unwrap();
        assert!(rep.final_rel_error().unwrap() <= 1e-5, "{:?}", rep.trace.last());
    }
}
