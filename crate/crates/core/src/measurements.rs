//! Measurement ensembles for the three recovery scenarios and seeded problem
//! generation.
//!
//! * Gaussian sensing: `y_ℓ = ⟨A_ℓ, Z⟩` with i.i.d. `N(0, 1/m)` entries.
//! * Completion: `y_ℓ = Z_{i_ℓ j_ℓ}` for a multiset `Ω` of index pairs drawn
//!   uniformly with replacement.
//! * Phase retrieval: `y_ℓ = (a_ℓᵀ x)² = ⟨a_ℓ a_ℓᵀ, x xᵀ⟩` with
//!   `a_ℓ ~ N(0, I_n)`.
//!
//! Indices are 0-based in memory; the on-disk format in `lowrank-bench` is
//! 1-based.

use alloc::format;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use nalgebra::{DMatrix, DVector};
// Float methods under no_std; std shadows them when linked into the build.
#[allow(unused_imports)]
use num_traits::Float;
use rand::Rng;

use crate::error::{invalid_input, Error, Result};
use crate::linalg::{
    ensure_finite, max_row_norm_sq, sum_sq, truncate_rank, LinearOperand, SvdTriple, TangentSpace,
    TangentVector,
};
use crate::rng::{derive_seed, gaussian_matrix, gaussian_vector, stream};

/// Which measurement model a problem instance uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scenario {
    Sensing,
    Completion,
    /// Completion where `Ω` enumerates every entry exactly once.
    FullCompletion,
    PhaseRetrieval,
}

impl Scenario {
    pub fn as_str(self) -> &'static str {
        match self {
            Scenario::Sensing => "sensing",
            Scenario::Completion => "completion",
            Scenario::FullCompletion => "full-completion",
            Scenario::PhaseRetrieval => "phase-retrieval",
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "sensing" => Ok(Scenario::Sensing),
            "completion" => Ok(Scenario::Completion),
            "full-completion" | "full_completion" => Ok(Scenario::FullCompletion),
            "phase-retrieval" | "phase_retrieval" | "phase" => Ok(Scenario::PhaseRetrieval),
            other => Err(invalid_input(format!("unknown scenario `{other}`"))),
        }
    }
}

/// Dense Gaussian sensing operator. Row `ℓ` of `operator` is `vec(A_ℓ)` in
/// column-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianSensing {
    n: usize,
    operator: DMatrix<f64>,
}

impl GaussianSensing {
    pub fn new(n: usize, matrices: &[DMatrix<f64>]) -> Result<Self> {
        if matrices.is_empty() {
            return Err(invalid_input("at least one measurement matrix is required"));
        }
        let mut operator = DMatrix::zeros(matrices.len(), n * n);
        for (l, a) in matrices.iter().enumerate() {
            if a.shape() != (n, n) {
                return Err(invalid_input("measurement matrices must be n×n"));
            }
            ensure_finite(a, "measurement matrix")?;
            for (k, x) in a.iter().enumerate() {
                operator[(l, k)] = *x;
            }
        }
        Ok(GaussianSensing { n, operator })
    }

    /// The `ℓ`-th measurement matrix.
    pub fn matrix(&self, l: usize) -> DMatrix<f64> {
        DMatrix::from_iterator(self.n, self.n, self.operator.row(l).iter().copied())
    }

    pub fn operator(&self) -> &DMatrix<f64> {
        &self.operator
    }
}

/// Entry sampling `P_Ω`. `omega` may contain duplicates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sampling {
    n: usize,
    omega: Vec<(usize, usize)>,
}

impl Sampling {
    pub fn new(n: usize, omega: Vec<(usize, usize)>) -> Result<Self> {
        if omega.is_empty() {
            return Err(invalid_input("Ω must contain at least one index"));
        }
        if omega.iter().any(|&(i, j)| i >= n || j >= n) {
            return Err(invalid_input("Ω index outside the matrix"));
        }
        Ok(Sampling { n, omega })
    }

    /// Every entry once, in column-major order.
    pub fn full(n: usize) -> Self {
        let omega = (0..n).flat_map(|j| (0..n).map(move |i| (i, j))).collect();
        Sampling { n, omega }
    }

    pub fn omega(&self) -> &[(usize, usize)] {
        &self.omega
    }

    /// Number of times each entry is sampled.
    pub fn multiplicity(&self) -> DMatrix<f64> {
        let mut c = DMatrix::zeros(self.n, self.n);
        for &(i, j) in &self.omega {
            c[(i, j)] += 1.0;
        }
        c
    }
}

/// Phase-retrieval measurement vectors, stored as the rows of an `m × n` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseMeasurements {
    vectors: DMatrix<f64>,
}

impl PhaseMeasurements {
    pub fn new(vectors: DMatrix<f64>) -> Result<Self> {
        ensure_finite(&vectors, "measurement vectors")?;
        Ok(PhaseMeasurements { vectors })
    }

    pub fn vectors(&self) -> &DMatrix<f64> {
        &self.vectors
    }

    /// The phaseless map `x ↦ |A x|²`.
    pub fn intensities(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        if x.len() != self.vectors.ncols() {
            return Err(invalid_input("signal length does not match the measurement vectors"));
        }
        Ok((&self.vectors * x).map(|t| t * t))
    }
}

/// A linear measurement map `A: ℝ^{n×n} → ℝ^m` with its adjoint.
#[derive(Debug, Clone, PartialEq)]
pub enum Ensemble {
    Sensing(GaussianSensing),
    Completion(Sampling),
    PhaseRetrieval(PhaseMeasurements),
}

/// `A*(v)` in a form suited to the ensemble: a dense matrix for sensing,
/// the weighted sample list for completion, and `Aᵀ diag(v) A` kept
/// implicit for phase retrieval.
#[derive(Debug, Clone)]
pub enum Operand<'a> {
    Dense(DMatrix<f64>),
    Sampled {
        n: usize,
        omega: &'a [(usize, usize)],
        weights: DVector<f64>,
    },
    Lifted {
        vectors: &'a DMatrix<f64>,
        weights: DVector<f64>,
    },
}

impl Operand<'_> {
    pub fn to_dense(&self) -> DMatrix<f64> {
        match self {
            Operand::Dense(d) => d.clone(),
            Operand::Sampled { n, omega, weights } => {
                let mut out = DMatrix::zeros(*n, *n);
                for (&(i, j), w) in omega.iter().zip(weights.iter()) {
                    out[(i, j)] += w;
                }
                out
            }
            Operand::Lifted { vectors, weights } => {
                let mut scaled = (*vectors).clone();
                for (mut row, w) in scaled.row_iter_mut().zip(weights.iter()) {
                    row.scale_mut(*w);
                }
                vectors.tr_mul(&scaled)
            }
        }
    }
}

impl LinearOperand<f64> for Operand<'_> {
    fn nrows(&self) -> usize {
        match self {
            Operand::Dense(d) => d.nrows(),
            Operand::Sampled { n, .. } => *n,
            Operand::Lifted { vectors, .. } => vectors.ncols(),
        }
    }

    fn ncols(&self) -> usize {
        self.nrows()
    }

    fn mul_right(&self, v: &DMatrix<f64>) -> DMatrix<f64> {
        match self {
            Operand::Dense(d) => d * v,
            Operand::Sampled { n, omega, weights } => {
                let mut out = DMatrix::zeros(*n, v.ncols());
                for (&(i, j), w) in omega.iter().zip(weights.iter()) {
                    for c in 0..v.ncols() {
                        out[(i, c)] += w * v[(j, c)];
                    }
                }
                out
            }
            Operand::Lifted { vectors, weights } => lifted_mul(vectors, weights, v),
        }
    }

    fn adjoint_mul(&self, u: &DMatrix<f64>) -> DMatrix<f64> {
        match self {
            Operand::Dense(d) => d.tr_mul(u),
            Operand::Sampled { n, omega, weights } => {
                let mut out = DMatrix::zeros(*n, u.ncols());
                for (&(i, j), w) in omega.iter().zip(weights.iter()) {
                    for c in 0..u.ncols() {
                        out[(j, c)] += w * u[(i, c)];
                    }
                }
                out
            }
            // Aᵀ diag(w) A is symmetric.
            Operand::Lifted { vectors, weights } => lifted_mul(vectors, weights, u),
        }
    }
}

fn lifted_mul(vectors: &DMatrix<f64>, weights: &DVector<f64>, v: &DMatrix<f64>) -> DMatrix<f64> {
    let mut av = vectors * v;
    for (mut row, w) in av.row_iter_mut().zip(weights.iter()) {
        row.scale_mut(*w);
    }
    vectors.tr_mul(&av)
}

impl Ensemble {
    pub fn full_observation(n: usize) -> Self {
        Ensemble::Completion(Sampling::full(n))
    }

    /// Ambient dimension `n` (matrices are `n × n`).
    pub fn n(&self) -> usize {
        match self {
            Ensemble::Sensing(s) => s.n,
            Ensemble::Completion(s) => s.n,
            Ensemble::PhaseRetrieval(p) => p.vectors.ncols(),
        }
    }

    /// Number of measurements `m`.
    pub fn m(&self) -> usize {
        match self {
            Ensemble::Sensing(s) => s.operator.nrows(),
            Ensemble::Completion(s) => s.omega.len(),
            Ensemble::PhaseRetrieval(p) => p.vectors.nrows(),
        }
    }

    /// Scaling `α` of the spectral initialization `T_r(α A*(y))`: `n²/m` for
    /// completion, `1` otherwise.
    pub fn spectral_scale(&self) -> f64 {
        match self {
            Ensemble::Completion(s) => (s.n * s.n) as f64 / s.omega.len() as f64,
            _ => 1.0,
        }
    }

    fn check_matrix(&self, z: &DMatrix<f64>) -> Result<()> {
        let n = self.n();
        if z.shape() != (n, n) {
            return Err(invalid_input(format!(
                "expected a {n}×{n} matrix, got {}×{}",
                z.nrows(),
                z.ncols()
            )));
        }
        Ok(())
    }

    fn check_vector(&self, v: &DVector<f64>) -> Result<()> {
        if v.len() != self.m() {
            return Err(invalid_input(format!(
                "expected a vector of length {}, got {}",
                self.m(),
                v.len()
            )));
        }
        Ok(())
    }

    /// `A(Z)`.
    pub fn forward(&self, z: &DMatrix<f64>) -> Result<DVector<f64>> {
        self.check_matrix(z)?;
        Ok(match self {
            Ensemble::Sensing(s) => &s.operator * DVector::from_column_slice(z.as_slice()),
            Ensemble::Completion(s) => {
                DVector::from_iterator(s.omega.len(), s.omega.iter().map(|&(i, j)| z[(i, j)]))
            }
            Ensemble::PhaseRetrieval(p) => {
                let az = &p.vectors * z;
                DVector::from_iterator(
                    az.nrows(),
                    az.row_iter().zip(p.vectors.row_iter()).map(|(x, a)| x.dot(&a)),
                )
            }
        })
    }

    /// `A(L Rᵀ)` without forming the product where the ensemble allows it.
    pub fn forward_factors(&self, l: &DMatrix<f64>, r: &DMatrix<f64>) -> Result<DVector<f64>> {
        let n = self.n();
        if l.nrows() != n || r.nrows() != n || l.ncols() != r.ncols() {
            return Err(invalid_input("factor shapes do not match the ensemble"));
        }
        Ok(match self {
            Ensemble::Sensing(_) => return self.forward(&(l * r.transpose())),
            Ensemble::Completion(s) => DVector::from_iterator(
                s.omega.len(),
                s.omega.iter().map(|&(i, j)| l.row(i).dot(&r.row(j))),
            ),
            Ensemble::PhaseRetrieval(p) => {
                let al = &p.vectors * l;
                let ar = &p.vectors * r;
                DVector::from_iterator(
                    al.nrows(),
                    al.row_iter().zip(ar.row_iter()).map(|(x, y)| x.dot(&y)),
                )
            }
        })
    }

    /// `A(U Σ Vᵀ)`.
    pub fn forward_svd(&self, z: &SvdTriple) -> Result<DVector<f64>> {
        self.forward_factors(&z.u_sigma(), &z.v)
    }

    /// `A(U Bᵀ + C Vᵀ)`, using `W = [U C] [B V]ᵀ`.
    pub fn forward_tangent(&self, space: &TangentSpace, w: &TangentVector) -> Result<DVector<f64>> {
        let left = crate::linalg::hstack(&space.u, &w.c);
        let right = crate::linalg::hstack(&w.b, &space.v);
        self.forward_factors(&left, &right)
    }

    /// `A*(v) = Σ_ℓ v_ℓ A_ℓ` as a dense matrix. Duplicate samples sum.
    pub fn adjoint(&self, v: &DVector<f64>) -> Result<DMatrix<f64>> {
        Ok(self.adjoint_operand(v)?.to_dense())
    }

    /// `A*(v)` in structured form.
    pub fn adjoint_operand(&self, v: &DVector<f64>) -> Result<Operand<'_>> {
        self.check_vector(v)?;
        Ok(match self {
            Ensemble::Sensing(s) => {
                let flat = s.operator.tr_mul(v);
                Operand::Dense(DMatrix::from_column_slice(s.n, s.n, flat.as_slice()))
            }
            Ensemble::Completion(s) => Operand::Sampled {
                n: s.n,
                omega: &s.omega,
                weights: v.clone(),
            },
            Ensemble::PhaseRetrieval(p) => Operand::Lifted {
                vectors: &p.vectors,
                weights: v.clone(),
            },
        })
    }

    /// Estimate `‖A‖₂²` (largest eigenvalue of `A*A`) by power iteration from
    /// a seeded random start.
    pub fn op_norm_sq(&self, iters: usize, seed: u64) -> Result<f64> {
        let n = self.n();
        let mut rng = stream(derive_seed(seed, 0x0A0A));
        let mut z = gaussian_matrix(&mut rng, n, n);
        z.unscale_mut(z.norm());
        let mut estimate = 0.0;
        for _ in 0..iters.max(1) {
            let next = self.adjoint(&self.forward(&z)?)?;
            estimate = next.dot(&z);
            let norm = next.norm();
            if norm == 0.0 {
                return Ok(0.0);
            }
            z = next / norm;
        }
        Ok(estimate)
    }
}

/// A generated (or loaded) recovery problem: ensemble, data and ground truth.
#[derive(Debug, Clone)]
pub struct ProblemInstance {
    pub scenario: Scenario,
    pub ensemble: Ensemble,
    pub y: DVector<f64>,
    pub r: usize,
    pub seed: u64,
    /// Dense ground truth `X`.
    pub truth: DMatrix<f64>,
    /// Compact rank-`r` SVD of `X`.
    pub ground_truth: SvdTriple,
    /// The signal `x` with `X = x xᵀ` (phase retrieval only).
    pub signal: Option<DVector<f64>>,
}

impl ProblemInstance {
    /// Build an instance around a known truth, computing `y = A(X)`.
    pub fn from_truth(
        scenario: Scenario,
        ensemble: Ensemble,
        truth: DMatrix<f64>,
        r: usize,
        seed: u64,
    ) -> Result<Self> {
        let y = ensemble.forward(&truth)?;
        Self::from_parts(scenario, ensemble, truth, y, r, seed)
    }

    /// Assemble an instance from stored parts (for example, loaded from disk).
    pub fn from_parts(
        scenario: Scenario,
        ensemble: Ensemble,
        truth: DMatrix<f64>,
        y: DVector<f64>,
        r: usize,
        seed: u64,
    ) -> Result<Self> {
        ensemble.check_matrix(&truth)?;
        ensemble.check_vector(&y)?;
        let ground_truth = truncate_rank(&truth, r)?;
        let signal = match scenario {
            Scenario::PhaseRetrieval => {
                if r != 1 {
                    return Err(invalid_input("phase retrieval instances have rank 1"));
                }
                Some(&ground_truth.u.column(0) * ground_truth.sigma[0].sqrt())
            }
            _ => None,
        };
        Ok(ProblemInstance {
            scenario,
            ensemble,
            y,
            r,
            seed,
            truth,
            ground_truth,
            signal,
        })
    }

    pub fn n(&self) -> usize {
        self.ensemble.n()
    }

    pub fn m(&self) -> usize {
        self.ensemble.m()
    }

    /// `‖Z − X‖_F / ‖X‖_F`.
    pub fn rel_error(&self, z: &DMatrix<f64>) -> f64 {
        let denom = self.truth.norm();
        let num = (z - &self.truth).norm();
        if denom == 0.0 {
            num
        } else {
            num / denom
        }
    }

    /// `min(‖z − x‖, ‖z + x‖) / ‖x‖` for phase retrieval, where the global
    /// sign of `x` is unidentifiable.
    pub fn signal_rel_error(&self, z: &DVector<f64>) -> Option<f64> {
        let x = self.signal.as_ref()?;
        let denom = x.norm();
        let err = (z - x).norm().min((z + x).norm());
        Some(if denom == 0.0 { err } else { err / denom })
    }

    /// `‖A(Z) − y‖ / ‖y‖` given `A(Z)`.
    pub fn rel_residual_of(&self, az: &DVector<f64>) -> f64 {
        let denom = self.y.norm();
        let num = (az - &self.y).norm();
        if denom == 0.0 {
            num
        } else {
            num / denom
        }
    }
}

/// Generate a seeded instance.
///
/// The ground truth is `X = L Rᵀ` with standard Gaussian `n × r` factors
/// (`X = x xᵀ` with `x ~ N(0, I)` for phase retrieval). Sensing matrices have
/// `N(0, 1/m)` entries; completion draws `m` indices uniformly with
/// replacement; phase retrieval uses `a_ℓ ~ N(0, I_n)`.
pub fn generate_instance(scenario: Scenario, n: usize, r: usize, m: usize, seed: u64) -> Result<ProblemInstance> {
    if n == 0 || m == 0 {
        return Err(invalid_input("n and m must be positive"));
    }
    if r == 0 || r > n {
        return Err(invalid_input(format!("rank {r} must lie in 1..={n}")));
    }
    if scenario == Scenario::PhaseRetrieval && r != 1 {
        return Err(invalid_input("phase retrieval requires r = 1"));
    }
    if scenario == Scenario::FullCompletion && m != n * n {
        return Err(invalid_input("full-observation completion requires m = n²"));
    }
    let mut rng = stream(seed);

    let truth = match scenario {
        Scenario::PhaseRetrieval => {
            let x = gaussian_vector(&mut rng, n);
            &x * x.transpose()
        }
        _ => {
            let l = gaussian_matrix(&mut rng, n, r);
            let rr = gaussian_matrix(&mut rng, n, r);
            l * rr.transpose()
        }
    };

    let ensemble = match scenario {
        Scenario::Sensing => {
            let mut operator = gaussian_matrix(&mut rng, m, n * n);
            operator.unscale_mut((m as f64).sqrt());
            Ensemble::Sensing(GaussianSensing { n, operator })
        }
        Scenario::Completion => {
            let omega = (0..m)
                .map(|_| (rng.random_range(0..n), rng.random_range(0..n)))
                .collect();
            Ensemble::Completion(Sampling { n, omega })
        }
        Scenario::FullCompletion => Ensemble::full_observation(n),
        Scenario::PhaseRetrieval => Ensemble::PhaseRetrieval(PhaseMeasurements {
            vectors: gaussian_matrix(&mut rng, m, n),
        }),
    };

    let y = match (&ensemble, scenario) {
        (Ensemble::PhaseRetrieval(p), _) => {
            // Phaseless data are produced from the signal, not the lifted matrix.
            let x = truncate_rank(&truth, 1)?;
            let x = &x.u.column(0) * x.sigma[0].sqrt();
            p.intensities(&x)?
        }
        _ => ensemble.forward(&truth)?,
    };
    ProblemInstance::from_parts(scenario, ensemble, truth, y, r, seed)
}

/// Empirical range of `‖A(Z)‖² / ‖Z‖_F²` over random rank-`r` probes.
///
/// This is a necessary-condition probe for the restricted isometry property,
/// not a certificate: the returned `[lo, hi]` only bounds `δ_r` from below.
/// For a completion ensemble that misses some entry, a spike on the first
/// unobserved entry (column-major) is probed as well, which drives `lo` to 0.
pub fn rip_probe(ensemble: &Ensemble, r: usize, trials: usize, seed: u64) -> Result<(f64, f64)> {
    let n = ensemble.n();
    if trials == 0 {
        return Err(invalid_input("at least one trial is required"));
    }
    if r == 0 || r > n {
        return Err(Error::InvalidRank { rank: r, max: n });
    }
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let mut push = |ratio: f64| {
        lo = lo.min(ratio);
        hi = hi.max(ratio);
    };
    for t in 0..trials {
        let mut rng = stream(derive_seed(seed, t as u64));
        let l = gaussian_matrix(&mut rng, n, r);
        let rr = gaussian_matrix(&mut rng, n, r);
        let z = l * rr.transpose();
        let az = ensemble.forward(&z)?;
        push(sum_sq(az.as_slice()) / sum_sq(z.as_slice()));
    }
    if let Ensemble::Completion(s) = ensemble {
        let counts = s.multiplicity();
        if let Some(k) = counts.iter().position(|c| *c == 0.0) {
            let mut spike = DMatrix::zeros(n, n);
            spike[(k % n, k / n)] = 1.0;
            let az = ensemble.forward(&spike)?;
            push(sum_sq(az.as_slice()));
        }
    }
    Ok((lo, hi))
}

/// Smallest `μ₀` with `‖U‖²_{2,∞} ≤ μ₀ r / n` and `‖V‖²_{2,∞} ≤ μ₀ r / n`.
pub fn incoherence(x: &SvdTriple) -> f64 {
    let n = x.nrows() as f64;
    let r = x.rank() as f64;
    n / r * max_row_norm_sq(&x.u).max(max_row_norm_sq(&x.v))
}

/// Draw `count` distinct indices from `0..n` (partial Fisher–Yates), sorted.
pub fn sample_without_replacement(n: usize, count: usize, seed: u64) -> Vec<usize> {
    let mut rng = stream(seed);
    let mut pool: Vec<usize> = (0..n).collect();
    let count = count.min(n);
    for i in 0..count {
        let j = rng.random_range(i..n);
        pool.swap(i, j);
    }
    let mut out = pool[..count].to_vec();
    out.sort_unstable();
    out
}
