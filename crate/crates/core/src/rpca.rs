//! Robust PCA: split `D = X + Y` into a rank-`r` part and a sparse part.
//!
//! AltProj alternates `Z_{k+1} = T_r(D − S_k)` and
//! `S_{k+1} = H_ζ(D − Z_{k+1})`. AccAltProj replaces the first step with
//! `T_r P_{T_k}(D − S_k)`, which only needs a `2r × 2r` SVD.
//!
//! Thresholds follow `ζ_{k+1} = β(σ_{r+1}(W_k) + γ^{k+1} σ₁(W_k))`, where
//! `W_k` is `D − S_k` for AltProj and `P_{T_k}(D − S_k)` for AccAltProj.

use alloc::vec::Vec;

use nalgebra::DMatrix;
// Float methods under no_std; std shadows them when linked into the build.
#[allow(unused_imports)]
use num_traits::Float;
use rand::Rng;

use crate::error::{invalid_input, invalid_options, Error, Result};
use crate::linalg::{compact_svd, hard_threshold_entries, project_tangent, tangent_svd, SvdTriple};
use crate::measurements::sample_without_replacement;
use crate::report::{Clock, SolverReport, Status, Tracer};
use crate::rng::{derive_seed, gaussian_matrix, stream};

#[derive(Debug, Clone, PartialEq)]
pub struct RpcaInstance {
    pub d: DMatrix<f64>,
    pub r: usize,
    pub sparse_truth: Option<DMatrix<f64>>,
    pub lowrank_truth: Option<SvdTriple>,
    pub seed: Option<u64>,
}

impl RpcaInstance {
    pub fn new(d: DMatrix<f64>, r: usize) -> Result<Self> {
        if d.iter().any(|v| !v.is_finite()) {
            return Err(invalid_input("D must be finite"));
        }
        let max = d.nrows().min(d.ncols());
        if r == 0 || r >= max {
            return Err(Error::InvalidRank {
                rank: r,
                max: max.saturating_sub(1),
            });
        }
        Ok(RpcaInstance {
            d,
            r,
            sparse_truth: None,
            lowrank_truth: None,
            seed: None,
        })
    }

    /// `X = G₁G₂ᵀ/√r` with Gaussian `n × r` factors, plus `round(frac·n²)`
    /// corruptions on a uniformly random support with random signs and
    /// magnitudes uniform on `[1, 2]`.
    pub fn generate(n: usize, r: usize, frac: f64, seed: u64) -> Result<Self> {
        if !(0.0..=1.0).contains(&frac) {
            return Err(invalid_input("sparsity fraction must lie in [0, 1]"));
        }
        let mut rng = stream(derive_seed(seed, 0));
        let g1 = gaussian_matrix(&mut rng, n, r);
        let g2 = gaussian_matrix(&mut rng, n, r);
        let x = (&g1 * g2.transpose()) / (r as f64).sqrt();
        let count = (frac * (n * n) as f64).round() as usize;
        let support = sample_without_replacement(n * n, count, derive_seed(seed, 1));
        let mut y = DMatrix::zeros(n, n);
        let mut rng = stream(derive_seed(seed, 2));
        for idx in support {
            let mag = 1.0 + rng.random::<f64>();
            let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
            y[(idx % n, idx / n)] = sign * mag;
        }
        let mut p = RpcaInstance::new(&x + &y, r)?;
        p.lowrank_truth = Some(compact_svd(&x)?.truncated(r));
        p.sparse_truth = Some(y);
        p.seed = Some(seed);
        Ok(p)
    }

    /// `(‖Z − X‖_F/‖X‖_F, ‖S − Y‖_F/‖Y‖_F)` when the truths are known. A zero
    /// truth falls back to the absolute error.
    pub fn rel_errors(&self, z: &DMatrix<f64>, s: &DMatrix<f64>) -> Option<(f64, f64)> {
        let x = self.lowrank_truth.as_ref()?.to_dense();
        let y = self.sparse_truth.as_ref()?;
        let rel = |a: &DMatrix<f64>, b: &DMatrix<f64>| {
            let nb = b.norm();
            if nb == 0.0 {
                a.norm()
            } else {
                (a - b).norm() / nb
            }
        };
        Some((rel(z, &x), rel(s, y)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdSchedule {
    pub beta: f64,
    pub gamma: f64,
}

impl ThresholdSchedule {
    /// `β = 0.6/√n`, `γ = 0.6`, with `n` the larger dimension.
    pub fn default_for(p: &RpcaInstance) -> Self {
        let n = p.d.nrows().max(p.d.ncols()) as f64;
        ThresholdSchedule {
            beta: 0.6 / n.sqrt(),
            gamma: 0.6,
        }
    }

    /// `ζ_{k+1}` from the spectrum of `W_k`.
    pub fn threshold(&self, k: usize, sigma_next: f64, sigma_top: f64) -> f64 {
        self.beta * (sigma_next + self.gamma.powi(k as i32 + 1) * sigma_top)
    }

    fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0) || !self.beta.is_finite() {
            return Err(invalid_options("beta must be positive"));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(invalid_options("gamma must lie in (0, 1)"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RpcaOptions {
    pub tol: f64,
    pub max_iters: usize,
    /// Starting sparse part `S₀`; zero when absent.
    pub initial_sparse: Option<DMatrix<f64>>,
}

impl Default for RpcaOptions {
    fn default() -> Self {
        RpcaOptions {
            tol: 1e-9,
            max_iters: 500,
            initial_sparse: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RpcaEstimate {
    pub lowrank: SvdTriple,
    pub sparse: DMatrix<f64>,
    /// Modelled flops of the SVD stage, one entry per iteration.
    pub svd_flops: Vec<u64>,
}

/// Golub–Van Loan operation count for a full SVD of an `m × n` matrix,
/// `4m²n + 8mn² + 9n³` (with `m ≥ n`).
pub fn dense_svd_flops(m: usize, n: usize) -> u64 {
    let (m, n) = (m.max(n) as u64, m.min(n) as u64);
    4 * m * m * n + 8 * m * n * n + 9 * n * n * n
}

/// SVD stage of a tangent-space retraction on an `n₁ × n₂` matrix of rank
/// `r`: two orthogonalizations against the current bases, the `2r × 2r`
/// core SVD, and the rotation of the stacked bases.
pub fn tangent_svd_flops(n1: usize, n2: usize, r: usize) -> u64 {
    let (n1, n2, r) = (n1 as u64, n2 as u64, r as u64);
    let complement = |n: u64| 4 * n * r * r + 2 * n * r * r;
    let rotate = |n: u64| 2 * n * (2 * r) * (2 * r);
    complement(n1) + complement(n2) + dense_svd_flops(2 * r as usize, 2 * r as usize) + rotate(n1) + rotate(n2)
}

fn initial_sparse(p: &RpcaInstance, opts: &RpcaOptions) -> Result<DMatrix<f64>> {
    if !(opts.tol > 0.0) || opts.max_iters == 0 {
        return Err(invalid_options("tol must be positive and max_iters at least 1"));
    }
    match &opts.initial_sparse {
        Some(s) if s.shape() != p.d.shape() => Err(invalid_input("S₀ must have the shape of D")),
        Some(s) => Ok(s.clone()),
        None => Ok(DMatrix::zeros(p.d.nrows(), p.d.ncols())),
    }
}

fn sigma_at(z: &SvdTriple, k: usize) -> f64 {
    z.sigma.get(k).copied().unwrap_or(0.0)
}

struct Progress<'a, 'c> {
    p: &'a RpcaInstance,
    tol: f64,
    d_norm: f64,
    tracer: Tracer<'c>,
}

impl Progress<'_, '_> {
    /// Record `(Z, S)`; returns the status once the run should stop.
    fn record(&mut self, z: &SvdTriple, s: &DMatrix<f64>) -> Option<Status> {
        let zd = z.to_dense();
        let res = (&self.p.d - &zd - s).norm();
        let rel = if self.d_norm == 0.0 { res } else { res / self.d_norm };
        let err = self.p.rel_errors(&zd, s).map(|(a, _)| a);
        if self.tracer.record(rel, err, None) {
            Some(Status::Diverged)
        } else if rel <= self.tol {
            Some(Status::Converged)
        } else {
            None
        }
    }
}

/// Alternating projections with a dense SVD per iteration.
pub fn altproj_solve(
    p: &RpcaInstance,
    sched: &ThresholdSchedule,
    opts: &RpcaOptions,
    clock: &dyn Clock,
) -> Result<SolverReport<RpcaEstimate>> {
    sched.validate()?;
    let mut s = initial_sparse(p, opts)?;
    let (n1, n2) = p.d.shape();
    let mut flops = Vec::new();
    let mut prog = Progress {
        p,
        tol: opts.tol,
        d_norm: p.d.norm(),
        tracer: Tracer::new(clock),
    };
    let mut z = compact_svd(&DMatrix::<f64>::zeros(n1, n2))?.truncated(p.r);
    z.sigma.fill(0.0);
    let mut status = prog.record(&z, &s).unwrap_or(Status::MaxIters);

    let mut k = 0;
    while status == Status::MaxIters && k < opts.max_iters {
        let full = compact_svd(&(&p.d - &s))?;
        flops.push(dense_svd_flops(n1, n2));
        let zeta = sched.threshold(k, sigma_at(&full, p.r), sigma_at(&full, 0));
        z = full.truncated(p.r);
        s = hard_threshold_entries(&(&p.d - z.to_dense()), zeta)?;
        k += 1;
        if let Some(st) = prog.record(&z, &s) {
            status = st;
        }
    }
    Ok(prog.tracer.finish(
        RpcaEstimate {
            lowrank: z,
            sparse: s,
            svd_flops: flops,
        },
        status,
    ))
}

/// `T_r P_T(W)` through the `2r × 2r` core, together with the full `2r`
/// spectrum of `P_T(W)`.
pub(crate) fn projected_lowrank(prev: &SvdTriple, w: &DMatrix<f64>) -> Result<SvdTriple> {
    let space = prev.tangent_space();
    let tv = project_tangent(&space, w)?;
    tangent_svd(&space, &tv)
}

/// Accelerated alternating projections: the low-rank step is restricted to
/// the tangent space of the current estimate.
///
/// The first iteration starts from `T_r(D − S₀)`, computed with a dense SVD
/// and counted in that iteration's flops.
pub fn accaltproj_solve(
    p: &RpcaInstance,
    sched: &ThresholdSchedule,
    opts: &RpcaOptions,
    clock: &dyn Clock,
) -> Result<SolverReport<RpcaEstimate>> {
    sched.validate()?;
    let mut s = initial_sparse(p, opts)?;
    let (n1, n2) = p.d.shape();
    let mut flops = Vec::new();
    let mut prog = Progress {
        p,
        tol: opts.tol,
        d_norm: p.d.norm(),
        tracer: Tracer::new(clock),
    };
    let mut z = compact_svd(&DMatrix::<f64>::zeros(n1, n2))?.truncated(p.r);
    z.sigma.fill(0.0);
    let mut status = prog.record(&z, &s).unwrap_or(Status::MaxIters);
    if status != Status::MaxIters {
        return Ok(prog.tracer.finish(
            RpcaEstimate {
                lowrank: z,
                sparse: s,
                svd_flops: flops,
            },
            status,
        ));
    }

    let mut anchor = compact_svd(&(&p.d - &s))?.truncated(p.r);
    let mut setup = dense_svd_flops(n1, n2);
    let mut k = 0;
    while status == Status::MaxIters && k < opts.max_iters {
        let full = projected_lowrank(&anchor, &(&p.d - &s))?;
        flops.push(setup + tangent_svd_flops(n1, n2, p.r));
        setup = 0;
        let zeta = sched.threshold(k, sigma_at(&full, p.r), sigma_at(&full, 0));
        z = full.truncated(p.r);
        s = hard_threshold_entries(&(&p.d - z.to_dense()), zeta)?;
        anchor = z.clone();
        k += 1;
        if let Some(st) = prog.record(&z, &s) {
            status = st;
        }
    }
    Ok(prog.tracer.finish(
        RpcaEstimate {
            lowrank: z,
            sparse: s,
            svd_flops: flops,
        },
        status,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::truncate_rank;
    use crate::report::NoClock;
    use crate::rng::gaussian_matrix;
    use proptest::prelude::*;

    fn lowrank_only(n: usize, r: usize, seed: u64) -> RpcaInstance {
        let mut p = RpcaInstance::generate(n, r, 0.0, seed).unwrap();
        p.sparse_truth = Some(DMatrix::zeros(n, n));
        p
    }

    #[test]
    fn no_sparse_part_converges_in_one_step() {
        let p = lowrank_only(30, 3, 1);
        let sched = ThresholdSchedule::default_for(&p);
        for solve in [altproj_solve, accaltproj_solve] {
            let rep = solve(&p, &sched, &RpcaOptions::default(), &NoClock).unwrap();
            assert!(rep.converged());
            assert_eq!(rep.iterations(), 1);
            assert!(rep.estimate.sparse.iter().all(|v| *v == 0.0));
            let (ez, _) = p.rel_errors(&rep.estimate.lowrank.to_dense(), &rep.estimate.sparse).unwrap();
            assert!(ez < 1e-12);
        }
    }

    #[test]
    fn one_sparse_matrix_has_zero_residual() {
        let mut d = DMatrix::zeros(6, 6);
        d[(0, 1)] = 5.0;
        let p = RpcaInstance::new(d, 1).unwrap();
        let sched = ThresholdSchedule { beta: 0.6, gamma: 0.6 };
        for solve in [altproj_solve, accaltproj_solve] {
            let rep = solve(&p, &sched, &RpcaOptions::default(), &NoClock).unwrap();
            let e = &rep.estimate;
            assert!((&p.d - e.lowrank.to_dense() - &e.sparse).norm() <= 1e-8);
        }
    }

    #[test]
    fn both_recover_corrupted_lowrank() {
        let p = RpcaInstance::generate(100, 5, 0.05, 3).unwrap();
        let sched = ThresholdSchedule::default_for(&p);
        let alt = altproj_solve(&p, &sched, &RpcaOptions::default(), &NoClock).unwrap();
        let acc = accaltproj_solve(&p, &sched, &RpcaOptions::default(), &NoClock).unwrap();
        for rep in [&alt, &acc] {
            assert!(rep.converged(), "{:?}", rep.trace.last());
            let (ez, es) = p.rel_errors(&rep.estimate.lowrank.to_dense(), &rep.estimate.sparse).unwrap();
            assert!(ez <= 1e-4 && es <= 1e-4, "{ez} {es}");
        }
        let (fa, fc) = (&alt.estimate.svd_flops, &acc.estimate.svd_flops);
        for k in 1..fa.len().min(fc.len()) {
            assert!(fc[k] < fa[k]);
        }
    }

    #[test]
    fn truth_is_a_fixed_point() {
        let p = RpcaInstance::generate(40, 2, 0.05, 8).unwrap();
        let y = p.sparse_truth.clone().unwrap();
        let x = p.lowrank_truth.clone().unwrap().to_dense();
        let sched = ThresholdSchedule { beta: 1e-3, gamma: 0.5 };
        let opts = RpcaOptions {
            initial_sparse: Some(y.clone()),
            ..Default::default()
        };
        let rep = accaltproj_solve(&p, &sched, &opts, &NoClock).unwrap();
        assert!(rep.iterations() <= 1);
        assert!((rep.estimate.lowrank.to_dense() - &x).norm() <= 1e-10 * x.norm());
        assert!((&rep.estimate.sparse - &y).norm() <= 1e-10 * y.norm());
    }

    #[test]
    fn projected_update_matches_dense_oracle() {
        let mut rng = stream(4);
        for (n, r) in [(12, 2), (30, 3), (50, 5)] {
            let prev = truncate_rank(&gaussian_matrix(&mut rng, n, n), r).unwrap();
            let w = gaussian_matrix(&mut rng, n, n);
            let fast = projected_lowrank(&prev, &w).unwrap().truncated(r).to_dense();
            let (u, v) = (&prev.u, &prev.v);
            let pu = u * u.transpose();
            let pv = v * v.transpose();
            let dense = &pu * &w + &w * &pv - &pu * &w * &pv;
            let oracle = truncate_rank(&dense, r).unwrap().to_dense();
            assert!((fast - oracle).norm() <= 1e-10 * w.norm());
        }
    }

    #[test]
    fn flop_models() {
        assert_eq!(dense_svd_flops(2, 2), 4 * 8 + 8 * 8 + 9 * 8);
        assert_eq!(dense_svd_flops(3, 5), dense_svd_flops(5, 3));
        assert!(tangent_svd_flops(100, 100, 5) < dense_svd_flops(100, 100));
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(matches!(
            RpcaInstance::new(DMatrix::zeros(4, 4), 4),
            Err(Error::InvalidRank { .. })
        ));
        let p = lowrank_only(10, 2, 1);
        let bad = ThresholdSchedule { beta: 0.1, gamma: 1.0 };
        assert!(altproj_solve(&p, &bad, &RpcaOptions::default(), &NoClock).is_err());
        let opts = RpcaOptions {
            initial_sparse: Some(DMatrix::zeros(3, 3)),
            ..Default::default()
        };
        let sched = ThresholdSchedule::default_for(&p);
        assert!(accaltproj_solve(&p, &sched, &opts, &NoClock).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn iterate_invariants(seed in any::<u64>(), iters in 1usize..6, acc in any::<bool>()) {
            let p = RpcaInstance::generate(20, 2, 0.1, seed).unwrap();
            let sched = ThresholdSchedule::default_for(&p);
            let opts = RpcaOptions { max_iters: iters, tol: 1e-14, ..Default::default() };
            let rep = if acc {
                accaltproj_solve(&p, &sched, &opts, &NoClock).unwrap()
            } else {
                altproj_solve(&p, &sched, &opts, &NoClock).unwrap()
            };
            let e = &rep.estimate;
            prop_assert!(e.lowrank.rank() <= 2);
            let diff = &p.d - e.lowrank.to_dense();
            for (sv, dv) in e.sparse.iter().zip(diff.iter()) {
                // S copies D − Z on its support, so the residual vanishes there.
                prop_assert!(*sv == 0.0 || sv == dv);
            }
        }
    }
}
