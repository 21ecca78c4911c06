//! Iterative hard thresholding and Riemannian methods on the manifold of
//! rank-`r` matrices.
//!
//! With `G_k = A*(y − A(Z_k))`:
//!
//! * IHT / NIHT: `Z_{k+1} = T_r(Z_k + α_k G_k)`;
//! * RGrad: `Z_{k+1} = T_r(Z_k + α_k P_{T_k}(G_k))`, retracted through the
//!   `2r × 2r` core so no dense `n × n` matrix is formed;
//! * RCG: the same with a conjugate direction built from the transported
//!   previous direction.
//!
//! [`rgrad_phase`] specializes RGrad to rank-1 PSD iterates for phase
//! retrieval.

use nalgebra::{DMatrix, DVector};
// Float methods under no_std; std shadows them when linked into the build.
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{invalid_input, invalid_options, Result};
use crate::factored::spectral_init;
use crate::linalg::{
    project_tangent, retract, sum_sq, truncate_rank, SvdTriple, TangentSpace,
    TangentVector,
};
use crate::measurements::{Ensemble, ProblemInstance};
use crate::report::{Clock, SolverEvent, SolverReport, Status, Tracer};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ManifoldStep {
    Constant(f64),
    /// `α = ‖U Uᵀ G‖_F² / ‖A(U Uᵀ G)‖²` (line search along the column space).
    Niht,
    /// `α = ‖D‖_F² / ‖A(D)‖²` along the search direction `D`.
    ExactLine,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CgBeta {
    None,
    /// Polak–Ribière, clamped at zero.
    PolakRibierePlus,
    FletcherReeves,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManifoldOptions {
    pub step: ManifoldStep,
    pub cg_beta: CgBeta,
    pub tol: f64,
    pub max_iters: usize,
    /// Empirical RIP constant `δ̂` used by the fallback stepsize
    /// `1/(2(1 + δ̂))` when a line search degenerates.
    pub rip_delta: Option<f64>,
    /// Starting point; the spectral initialization when absent.
    pub initial: Option<SvdTriple>,
}

impl Default for ManifoldOptions {
    fn default() -> Self {
        ManifoldOptions {
            step: ManifoldStep::ExactLine,
            cg_beta: CgBeta::PolakRibierePlus,
            tol: 1e-6,
            max_iters: 1000,
            rip_delta: None,
            initial: None,
        }
    }
}

impl ManifoldOptions {
    fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) || self.max_iters == 0 {
            return Err(invalid_options("tol must be positive and max_iters at least 1"));
        }
        if let ManifoldStep::Constant(a) = self.step {
            if !(a > 0.0) || !a.is_finite() {
                return Err(invalid_options("stepsize must be positive"));
            }
        }
        if let Some(d) = self.rip_delta {
            if !(d >= 0.0) {
                return Err(invalid_options("rip_delta must be nonnegative"));
            }
        }
        Ok(())
    }

    fn fallback_step(&self) -> f64 {
        match self.rip_delta {
            Some(d) => 1.0 / (2.0 * (1.0 + d)),
            None => 0.5,
        }
    }
}

/// Line-search ratio `num/den`, falling back when the denominator vanishes.
fn ratio_or_fallback(
    num: f64,
    den: f64,
    opts: &ManifoldOptions,
    iter: usize,
    tracer: &mut Tracer<'_>,
) -> f64 {
    if den > 0.0 && den.is_finite() {
        return num / den;
    }
    let fallback = opts.fallback_step();
    if num > 0.0 {
        tracer.event(SolverEvent::StepsizeDegenerate { iter, fallback });
    }
    fallback
}

fn initial_point(p: &ProblemInstance, opts: &ManifoldOptions) -> Result<SvdTriple> {
    match &opts.initial {
        Some(z) => {
            if z.nrows() != p.n() || z.ncols() != p.n() || z.rank() != p.r {
                return Err(invalid_input("initial point must be an n×n rank-r triple"));
            }
            Ok(z.clone())
        }
        None => spectral_init(p, p.ensemble.spectral_scale(), p.r),
    }
}

fn check_linear(p: &ProblemInstance) -> Result<()> {
    if matches!(p.ensemble, Ensemble::PhaseRetrieval(_)) {
        return Err(invalid_input("use rgrad_phase for phase retrieval"));
    }
    Ok(())
}

fn zero_data(p: &ProblemInstance) -> bool {
    p.y.iter().all(|v| *v == 0.0)
}

fn zero_triple(p: &ProblemInstance) -> SvdTriple {
    let mut z = truncate_rank(&DMatrix::<f64>::zeros(p.n(), p.n()), p.r).expect("rank checked");
    z.sigma.fill(0.0);
    z
}

/// NIHT stepsize `‖U Uᵀ G‖_F² / ‖A(U Uᵀ G)‖²` for a dense `G`.
pub fn niht_step(e: &Ensemble, u: &DMatrix<f64>, g: &DMatrix<f64>) -> Result<(f64, f64)> {
    // U Uᵀ G = U (Gᵀ U)ᵀ
    let gtu = g.tr_mul(u);
    let num = gtu.norm_squared();
    let den = sum_sq(e.forward_factors(u, &gtu)?.as_slice());
    Ok((num, den))
}

/// Exact line-search stepsize `‖W‖_F² / ‖A(W)‖²` along a tangent vector.
pub fn tangent_step(
    e: &Ensemble,
    space: &TangentSpace,
    w: &TangentVector,
) -> Result<(f64, f64)> {
    let num = w.norm_squared();
    let den = sum_sq(e.forward_tangent(space, w)?.as_slice());
    Ok((num, den))
}

/// Iterative hard thresholding, `Z_{k+1} = T_r(Z_k + α_k G_k)`.
pub fn iht_solve(
    p: &ProblemInstance,
    opts: &ManifoldOptions,
    clock: &dyn Clock,
) -> Result<SolverReport<SvdTriple>> {
    opts.validate()?;
    check_linear(p)?;
    let mut tracer = Tracer::new(clock);
    if zero_data(p) {
        let z = zero_triple(p);
        tracer.record(0.0, Some(p.rel_error(&z.to_dense())), None);
        return Ok(tracer.finish(z, Status::Converged));
    }
    let mut z = initial_point(p, opts)?;
    let mut az = p.ensemble.forward_svd(&z)?;
    let mut rel = p.rel_residual_of(&az);
    let mut dense = z.to_dense();
    tracer.record(rel, Some(p.rel_error(&dense)), None);
    let mut status = if rel <= opts.tol { Status::Converged } else { Status::MaxIters };
    while status == Status::MaxIters && tracer.iterations() < opts.max_iters {
        let iter = tracer.iterations() + 1;
        let g = p.ensemble.adjoint(&(&p.y - &az))?;
        let alpha = match opts.step {
            ManifoldStep::Constant(a) => a,
            ManifoldStep::Niht => {
                let (num, den) = niht_step(&p.ensemble, &z.u, &g)?;
                ratio_or_fallback(num, den, opts, iter, &mut tracer)
            }
            ManifoldStep::ExactLine => {
                let num = g.norm_squared();
                let den = sum_sq(p.ensemble.forward(&g)?.as_slice());
                ratio_or_fallback(num, den, opts, iter, &mut tracer)
            }
        };
        z = truncate_rank(&(&dense + alpha * g), p.r)?;
        dense = z.to_dense();
        az = p.ensemble.forward_svd(&z)?;
        rel = p.rel_residual_of(&az);
        if tracer.record(rel, Some(p.rel_error(&dense)), None) {
            status = Status::Diverged;
        } else if rel <= opts.tol {
            status = Status::Converged;
        }
    }
    Ok(tracer.finish(z, status))
}

/// Riemannian gradient descent. `opts.cg_beta` is ignored.
pub fn rgrad_solve(
    p: &ProblemInstance,
    opts: &ManifoldOptions,
    clock: &dyn Clock,
) -> Result<SolverReport<SvdTriple>> {
    riemannian(p, opts, CgBeta::None, clock)
}

/// Riemannian conjugate gradient. Requires `opts.cg_beta ≠ None`.
pub fn rcg_solve(
    p: &ProblemInstance,
    opts: &ManifoldOptions,
    clock: &dyn Clock,
) -> Result<SolverReport<SvdTriple>> {
    if opts.cg_beta == CgBeta::None {
        return Err(invalid_options("RCG needs a β rule"));
    }
    riemannian(p, opts, opts.cg_beta, clock)
}

/// One Riemannian step from `z` along the tangent direction `d` with
/// stepsize `alpha`: `T_r(Z + α D)`, where `Z` is embedded as `B = VΣ, C = 0`.
pub fn tangent_update(z: &SvdTriple, d: &TangentVector, alpha: f64) -> Result<SvdTriple> {
    let space = z.tangent_space();
    let w = space.embed_point(&z.sigma).axpy(alpha, d);
    retract(&space, &w, z.rank())
}

/// Riemannian gradient `P_T(A*(y − A(Z)))` and the residual `y − A(Z)`.
pub fn riemannian_gradient(
    p: &ProblemInstance,
    z: &SvdTriple,
) -> Result<(TangentVector, DVector<f64>)> {
    let res = &p.y - p.ensemble.forward_svd(z)?;
    let g = p.ensemble.adjoint_operand(&res)?;
    Ok((project_tangent(&z.tangent_space(), &g)?, res))
}

fn riemannian(
    p: &ProblemInstance,
    opts: &ManifoldOptions,
    beta_rule: CgBeta,
    clock: &dyn Clock,
) -> Result<SolverReport<SvdTriple>> {
    opts.validate()?;
    check_linear(p)?;
    let mut tracer = Tracer::new(clock);
    if zero_data(p) {
        let z = zero_triple(p);
        tracer.record(0.0, Some(p.rel_error(&z.to_dense())), None);
        return Ok(tracer.finish(z, Status::Converged));
    }
    let mut z = initial_point(p, opts)?;
    let mut res = &p.y - p.ensemble.forward_svd(&z)?;
    let y_norm = p.y.norm();
    let mut rel = res.norm() / y_norm;
    tracer.record(rel, Some(p.rel_error(&z.to_dense())), None);
    let mut status = if rel <= opts.tol { Status::Converged } else { Status::MaxIters };

    // Previous (space, gradient, direction) for the conjugate update.
    let mut previous: Option<(TangentSpace, TangentVector, TangentVector)> = None;
    while status == Status::MaxIters && tracer.iterations() < opts.max_iters {
        let iter = tracer.iterations() + 1;
        let space = z.tangent_space();
        let g = project_tangent(&space, &p.ensemble.adjoint_operand(&res)?)?;

        let mut direction = g.clone();
        if let Some((old_space, old_g, old_d)) = &previous {
            let g_sq_old = old_g.norm_squared();
            let beta = match beta_rule {
                CgBeta::None => 0.0,
                CgBeta::FletcherReeves => g.norm_squared() / g_sq_old,
                CgBeta::PolakRibierePlus => {
                    let moved = space.transport(old_space, old_g);
                    (g.norm_squared() - g.inner(&moved)) / g_sq_old
                }
            }
            .max(0.0);
            if beta > 0.0 && beta.is_finite() {
                let candidate = g.axpy(beta, &space.transport(old_space, old_d));
                if candidate.inner(&g) > 0.0 {
                    direction = candidate;
                } else {
                    tracer.event(SolverEvent::DescentReset { iter });
                }
            }
        }

        let alpha = match opts.step {
            ManifoldStep::Constant(a) => a,
            ManifoldStep::Niht => {
                // U Uᵀ (U Bᵀ + C Vᵀ) = U Bᵀ
                let col = TangentVector {
                    b: direction.b.clone(),
                    c: DMatrix::zeros(direction.c.nrows(), direction.c.ncols()),
                };
                let (num, den) = tangent_step(&p.ensemble, &space, &col)?;
                ratio_or_fallback(num, den, opts, iter, &mut tracer)
            }
            ManifoldStep::ExactLine => {
                // Minimizer of ‖r − α A(D)‖² is ⟨D, G⟩/‖A(D)‖²; for D = P_T(G)
                // this is the RGrad stepsize.
                let num = direction.inner(&g);
                let den = sum_sq(p.ensemble.forward_tangent(&space, &direction)?.as_slice());
                ratio_or_fallback(num, den, opts, iter, &mut tracer)
            }
        };

        z = tangent_update(&z, &direction, alpha)?;
        res = &p.y - p.ensemble.forward_svd(&z)?;
        rel = res.norm() / y_norm;
        if beta_rule != CgBeta::None {
            previous = Some((space, g, direction));
        }
        if tracer.record(rel, Some(p.rel_error(&z.to_dense())), None) {
            status = Status::Diverged;
        } else if rel <= opts.tol {
            status = Status::Converged;
        }
    }
    Ok(tracer.finish(z, status))
}

/// Rank-1 PSD iterate `σ u uᵀ`.
#[derive(Debug, Clone, PartialEq)]
pub struct PsdRankOne {
    pub u: DVector<f64>,
    pub sigma: f64,
}

impl PsdRankOne {
    /// The signal estimate `√σ u`.
    pub fn signal(&self) -> DVector<f64> {
        &self.u * self.sigma.max(0.0).sqrt()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        &self.u * self.u.transpose() * self.sigma
    }
}

/// Projection of a symmetric `W` onto `T = {u bᵀ + b uᵀ}`:
/// `P_T(W) = u uᵀW + W u uᵀ − u uᵀ W u uᵀ = u bᵀ + b uᵀ` with
/// `b = W u − ½(uᵀ W u) u`. Takes `W u`.
pub fn psd_tangent_b(u: &DVector<f64>, wu: &DVector<f64>) -> DVector<f64> {
    wu - u * (0.5 * u.dot(wu))
}

/// Best rank-1 PSD approximation of `σ u uᵀ + α(u bᵀ + b uᵀ)` from its
/// `2 × 2` restriction to `span{u, b}`. `None` when the top eigenvalue is
/// not positive.
pub fn psd_retract(z: &PsdRankOne, b: &DVector<f64>, alpha: f64) -> Option<PsdRankOne> {
    let c = z.u.dot(b);
    let perp = b - &z.u * c;
    let beta = perp.norm();
    let a11 = z.sigma + 2.0 * alpha * c;
    let off = alpha * beta;
    // Eigen-decomposition of [[a11, off], [off, 0]].
    let half = 0.5 * a11;
    let lambda = half + (half * half + off * off).sqrt();
    if !(lambda > 0.0) {
        return None;
    }
    let u = if beta > 0.0 && off != 0.0 {
        // Eigenvector (λ, off) in the (u, q) basis.
        let q = perp / beta;
        let v = &z.u * lambda + q * off;
        let norm = v.norm();
        v / norm
    } else {
        z.u.clone()
    };
    Some(PsdRankOne { u, sigma: lambda })
}

fn phase_vectors(p: &ProblemInstance) -> Result<&DMatrix<f64>> {
    match &p.ensemble {
        Ensemble::PhaseRetrieval(pm) => Ok(pm.vectors()),
        _ => Err(invalid_input("rgrad_phase needs a phase-retrieval instance")),
    }
}

/// Spectral direction with the least-squares scale `⟨A(uuᵀ), y⟩/‖A(uuᵀ)‖²`.
fn psd_initial(p: &ProblemInstance) -> Result<PsdRankOne> {
    let a = phase_vectors(p)?;
    let z0 = spectral_init(p, 1.0, 1)?;
    let u = z0.u.column(0).into_owned();
    let au = (a * &u).map(|t| t * t);
    let den = au.norm_squared();
    let sigma = if den > 0.0 { au.dot(&p.y) / den } else { 0.0 };
    Ok(PsdRankOne {
        u,
        sigma: sigma.max(0.0),
    })
}

/// Riemannian gradient descent over rank-1 PSD matrices for phase retrieval.
///
/// The gradient `G = Σ_ℓ (y_ℓ − (a_ℓᵀu)²σ) a_ℓ a_ℓᵀ` is symmetric by
/// construction and only enters through `G u`, which costs `O(mn)`. The
/// stepsize is the exact line search along `P_T(G)`. Starts from the
/// spectral direction with a least-squares scale; a retraction without a
/// positive eigenvalue restarts from that point.
pub fn rgrad_phase(
    p: &ProblemInstance,
    opts: &ManifoldOptions,
    clock: &dyn Clock,
) -> Result<SolverReport<PsdRankOne>> {
    opts.validate()?;
    let a = phase_vectors(p)?;
    let start = match &opts.initial {
        Some(z) => {
            if z.rank() != 1 || z.nrows() != p.n() {
                return Err(invalid_input("initial point must be rank 1"));
            }
            PsdRankOne {
                u: z.u.column(0).into_owned(),
                sigma: z.sigma[0],
            }
        }
        None => psd_initial(p)?,
    };
    let y_norm = p.y.norm();
    let measure = |z: &PsdRankOne| {
        let au = a * &z.u;
        let az = au.map(|t| t * t * z.sigma);
        (au, &p.y - az)
    };
    let rel_of = |res: &DVector<f64>| if y_norm > 0.0 { res.norm() / y_norm } else { res.norm() };

    let mut tracer = Tracer::new(clock);
    let mut z = start.clone();
    let (mut au, mut res) = measure(&z);
    let mut rel = rel_of(&res);
    tracer.record(rel, p.signal_rel_error(&z.signal()), None);
    let mut status = if rel <= opts.tol { Status::Converged } else { Status::MaxIters };
    while status == Status::MaxIters && tracer.iterations() < opts.max_iters {
        let iter = tracer.iterations() + 1;
        // G u = Aᵀ (res ∘ (A u))
        let gu = a.tr_mul(&res.component_mul(&au));
        let b = psd_tangent_b(&z.u, &gu);
        let alpha = match opts.step {
            ManifoldStep::Constant(c) => c,
            _ => {
                // ‖u bᵀ + b uᵀ‖² = 2‖b‖² + 2(uᵀb)²; A(u bᵀ + b uᵀ)_ℓ = 2(a_ℓᵀu)(a_ℓᵀb)
                let ub = z.u.dot(&b);
                let num = 2.0 * b.norm_squared() + 2.0 * ub * ub;
                let ab = a * &b;
                let den = 4.0 * au.component_mul(&ab).norm_squared();
                ratio_or_fallback(num, den, opts, iter, &mut tracer)
            }
        };
        z = match psd_retract(&z, &b, alpha) {
            Some(next) => next,
            None => {
                tracer.event(SolverEvent::RetractionDegenerate { iter });
                start.clone()
            }
        };
        (au, res) = measure(&z);
        rel = rel_of(&res);
        if tracer.record(rel, p.signal_rel_error(&z.signal()), None) {
            status = Status::Diverged;
        } else if rel <= opts.tol {
            status = Status::Converged;
        }
    }
    Ok(tracer.finish(z, status))
}
