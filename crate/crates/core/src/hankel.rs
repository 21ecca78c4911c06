//! Spectrally sparse signals recovered through Hankel lifting.
//!
//! A signal `x_k = Σ_j d_j w_j^k` with `w_j = exp(2πi f_j − τ_j)` lifts to an
//! `n₁ × n₂` Hankel matrix `[Hx]_{ij} = x_{i+j}` of rank `r`. [`fiht_solve`]
//! completes `x` from a subset of its entries by hard thresholding in the
//! lifted domain, either densely (IHT) or through the tangent space of the
//! previous estimate (FIHT).

use alloc::vec::Vec;
use core::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
// Float methods under no_std; std shadows them when linked into the build.
#[allow(unused_imports)]
use num_traits::Float;
use rand::Rng;

use crate::error::{invalid_input, invalid_options, Error, Result};
use crate::linalg::{
    project_tangent, retract, truncate_rank, LinearOperand, SvdTriple, TangentSpace, TangentVector,
};
use crate::report::{Clock, SolverEvent, SolverReport, Status, Tracer};
use crate::rng::stream;

type C64 = Complex64;

/// Sum of damped complex exponentials sampled at `k = 0..n`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralSignal {
    pub n: usize,
    pub frequencies: Vec<f64>,
    pub dampings: Vec<f64>,
    pub amplitudes: Vec<C64>,
    pub samples: DVector<C64>,
}

impl SpectralSignal {
    pub fn new(n: usize, frequencies: Vec<f64>, dampings: Vec<f64>, amplitudes: Vec<C64>) -> Result<Self> {
        let r = frequencies.len();
        if n == 0 || r == 0 {
            return Err(invalid_input("a signal needs n ≥ 1 and at least one component"));
        }
        if dampings.len() != r || amplitudes.len() != r {
            return Err(invalid_input("frequencies, dampings and amplitudes differ in length"));
        }
        if frequencies.iter().any(|f| !(0.0..1.0).contains(f)) {
            return Err(invalid_input("frequencies must lie in [0, 1)"));
        }
        if dampings.iter().any(|t| !(*t >= 0.0) || !t.is_finite()) {
            return Err(invalid_input("dampings must be finite and nonnegative"));
        }
        for (i, f) in frequencies.iter().enumerate() {
            if frequencies[..i].contains(f) {
                return Err(invalid_input("frequencies must be distinct"));
            }
        }
        let mut samples = DVector::zeros(n);
        for ((f, tau), d) in frequencies.iter().zip(&dampings).zip(&amplitudes) {
            let w = C64::new(-tau, 2.0 * PI * f).exp();
            let mut p = *d;
            for k in 0..n {
                samples[k] += p;
                p *= w;
            }
        }
        Ok(SpectralSignal {
            n,
            frequencies,
            dampings,
            amplitudes,
            samples,
        })
    }

    /// Random signal with `r` components: frequencies at wrap-around distance
    /// at least `min(1.5/n, 1/(2r))`, dampings uniform on `[0, 1/n]`,
    /// amplitudes `(1 + u) e^{iφ}` with `u ~ U[0, 1]`.
    pub fn random(n: usize, r: usize, seed: u64) -> Result<Self> {
        if n == 0 || r == 0 || r > n {
            return Err(invalid_input("need 1 ≤ r ≤ n"));
        }
        let mut rng = stream(seed);
        let sep = (1.5 / n as f64).min(0.5 / r as f64);
        let mut freqs: Vec<f64> = Vec::with_capacity(r);
        let mut tries = 0;
        while freqs.len() < r && tries < 10_000 {
            tries += 1;
            let f: f64 = rng.random();
            if freqs.iter().all(|g| wrap_distance(f, *g) >= sep) {
                freqs.push(f);
            }
        }
        if freqs.len() < r {
            // Jittered grid, always separated by at least half a cell.
            let offset: f64 = rng.random();
            freqs = (0..r)
                .map(|j| {
                    let jitter: f64 = rng.random_range(-0.25..0.25);
                    let t = (j as f64 + offset + jitter) / r as f64;
                    t - t.floor()
                })
                .collect();
        }
        let dampings = (0..r).map(|_| rng.random::<f64>() / n as f64).collect();
        let amplitudes = (0..r)
            .map(|_| {
                let mag = 1.0 + rng.random::<f64>();
                let phase = 2.0 * PI * rng.random::<f64>();
                C64::from_polar(mag, phase)
            })
            .collect();
        SpectralSignal::new(n, freqs, dampings, amplitudes)
    }

    pub fn rank(&self) -> usize {
        self.frequencies.len()
    }
}

fn wrap_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).abs();
    d.min(1.0 - d)
}

/// Shape of the lifted matrix; `n₁ + n₂ = n + 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HankelShape {
    pub n1: usize,
    pub n2: usize,
}

impl HankelShape {
    pub fn new(n1: usize, n2: usize) -> Result<Self> {
        if n1 == 0 || n2 == 0 {
            return Err(invalid_input("Hankel dimensions must be positive"));
        }
        Ok(HankelShape { n1, n2 })
    }

    /// The squarest shape, `n₁ = ⌈(n+1)/2⌉`.
    pub fn square(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(invalid_input("signal length must be positive"));
        }
        let n1 = (n + 2) / 2;
        HankelShape::new(n1, n + 1 - n1)
    }

    /// Signal length `n₁ + n₂ − 1`.
    pub fn len(&self) -> usize {
        self.n1 + self.n2 - 1
    }

    /// Number of entries on anti-diagonal `k`.
    pub fn diagonal_count(&self, k: usize) -> usize {
        let lo = k.saturating_sub(self.n2 - 1);
        let hi = k.min(self.n1 - 1);
        hi + 1 - lo
    }

    fn check_len(&self, n: usize) -> Result<()> {
        if n != self.len() {
            return Err(invalid_input("signal length does not match the Hankel shape"));
        }
        Ok(())
    }

    fn check_matrix(&self, m: &DMatrix<C64>) -> Result<()> {
        if m.shape() != (self.n1, self.n2) {
            return Err(invalid_input("matrix is not n1×n2"));
        }
        Ok(())
    }
}

/// `[Hz]_{ij} = z_{i+j}`.
pub fn hankel_lift(z: &DVector<C64>, shape: HankelShape) -> Result<DMatrix<C64>> {
    shape.check_len(z.len())?;
    Ok(DMatrix::from_fn(shape.n1, shape.n2, |i, j| z[i + j]))
}

/// Anti-diagonal sums, the adjoint `H*` of [`hankel_lift`].
pub fn hankel_adjoint(m: &DMatrix<C64>, shape: HankelShape) -> Result<DVector<C64>> {
    shape.check_matrix(m)?;
    let mut out = DVector::zeros(shape.len());
    for j in 0..shape.n2 {
        for i in 0..shape.n1 {
            out[i + j] += m[(i, j)];
        }
    }
    Ok(out)
}

/// Anti-diagonal averages, the pseudo-inverse `H† = (H*H)⁻¹H*`.
pub fn hankel_pinv(m: &DMatrix<C64>, shape: HankelShape) -> Result<DVector<C64>> {
    let mut out = hankel_adjoint(m, shape)?;
    average_diagonals(&mut out, shape);
    Ok(out)
}

/// `H†(U Σ Vᴴ)` without forming the product.
pub fn hankel_pinv_factored(z: &SvdTriple<C64>, shape: HankelShape) -> Result<DVector<C64>> {
    if z.nrows() != shape.n1 || z.ncols() != shape.n2 {
        return Err(invalid_input("factors do not match the Hankel shape"));
    }
    let mut out = DVector::zeros(shape.len());
    add_diagonal_sums(&mut out, &z.u_sigma(), &z.v);
    average_diagonals(&mut out, shape);
    Ok(out)
}

/// Accumulate the anti-diagonal sums of `A Bᴴ` into `out`.
fn add_diagonal_sums(out: &mut DVector<C64>, a: &DMatrix<C64>, b: &DMatrix<C64>) {
    for l in 0..a.ncols() {
        let (u, v) = (a.column(l), b.column(l));
        for j in 0..b.nrows() {
            let vj = v[j].conj();
            for i in 0..a.nrows() {
                out[i + j] += u[i] * vj;
            }
        }
    }
}

fn average_diagonals(out: &mut DVector<C64>, shape: HankelShape) {
    for (k, v) in out.iter_mut().enumerate() {
        *v /= shape.diagonal_count(k) as f64;
    }
}

/// `H†(U Bᴴ + C Vᴴ)` for a tangent vector, without forming it.
fn hankel_pinv_tangent(space: &TangentSpace<C64>, w: &TangentVector<C64>, shape: HankelShape) -> DVector<C64> {
    let mut out = DVector::zeros(shape.len());
    add_diagonal_sums(&mut out, &space.u, &w.b);
    add_diagonal_sums(&mut out, &w.c, &space.v);
    average_diagonals(&mut out, shape);
    out
}

/// `H z` as a linear operand: products with thin matrices cost `O(n₁ n₂ k)`
/// and no `n₁ × n₂` storage.
#[derive(Debug, Clone, Copy)]
pub struct HankelOperand<'a> {
    pub z: &'a DVector<C64>,
    pub shape: HankelShape,
}

impl<'a> HankelOperand<'a> {
    pub fn new(z: &'a DVector<C64>, shape: HankelShape) -> Result<Self> {
        shape.check_len(z.len())?;
        Ok(HankelOperand { z, shape })
    }
}

impl LinearOperand<C64> for HankelOperand<'_> {
    fn nrows(&self) -> usize {
        self.shape.n1
    }

    fn ncols(&self) -> usize {
        self.shape.n2
    }

    fn mul_right(&self, v: &DMatrix<C64>) -> DMatrix<C64> {
        let mut out = DMatrix::zeros(self.shape.n1, v.ncols());
        for c in 0..v.ncols() {
            for j in 0..self.shape.n2 {
                let vj = v[(j, c)];
                for i in 0..self.shape.n1 {
                    out[(i, c)] += self.z[i + j] * vj;
                }
            }
        }
        out
    }

    fn adjoint_mul(&self, u: &DMatrix<C64>) -> DMatrix<C64> {
        let mut out = DMatrix::zeros(self.shape.n2, u.ncols());
        for c in 0..u.ncols() {
            for j in 0..self.shape.n2 {
                let mut acc = C64::new(0.0, 0.0);
                for i in 0..self.shape.n1 {
                    acc += self.z[i + j].conj() * u[(i, c)];
                }
                out[(j, c)] = acc;
            }
        }
        out
    }
}

/// Observed entries `x_ω, ω ∈ Ω` of a length-`n` signal.
#[derive(Debug, Clone, PartialEq)]
pub struct PartialSignal {
    pub n: usize,
    /// Sorted, distinct, 0-based indices.
    pub omega: Vec<usize>,
    pub values: Vec<C64>,
    /// Full signal, when known, for error tracking.
    pub truth: Option<DVector<C64>>,
}

impl PartialSignal {
    pub fn new(n: usize, omega: Vec<usize>, values: Vec<C64>) -> Result<Self> {
        if omega.is_empty() || omega.len() != values.len() {
            return Err(invalid_input("need at least one observation and one value per index"));
        }
        if omega.windows(2).any(|w| w[0] >= w[1]) || omega[omega.len() - 1] >= n {
            return Err(invalid_input("indices must be sorted, distinct and below n"));
        }
        if values.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(invalid_input("observations must be finite"));
        }
        Ok(PartialSignal {
            n,
            omega,
            values,
            truth: None,
        })
    }

    /// Observe `x` on `omega` and keep `x` as the truth.
    pub fn observe(x: &DVector<C64>, omega: Vec<usize>) -> Result<Self> {
        let values = omega.iter().filter(|&&k| k < x.len()).map(|&k| x[k]).collect();
        let mut s = PartialSignal::new(x.len(), omega, values)?;
        s.truth = Some(x.clone());
        Ok(s)
    }

    /// Zero-filled `P_Ω x`.
    pub fn zero_filled(&self) -> DVector<C64> {
        let mut out = DVector::zeros(self.n);
        for (k, v) in self.omega.iter().zip(&self.values) {
            out[*k] = *v;
        }
        out
    }

    /// `P_Ω(x − z)`, zero off `Ω`.
    pub fn residual(&self, z: &DVector<C64>) -> DVector<C64> {
        let mut out = DVector::zeros(self.n);
        for (k, v) in self.omega.iter().zip(&self.values) {
            out[*k] = *v - z[*k];
        }
        out
    }

    fn observed_norm(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn rel_error(&self, z: &DVector<C64>) -> Option<f64> {
        self.truth.as_ref().map(|x| {
            let nx = x.norm();
            if nx == 0.0 {
                z.norm()
            } else {
                (z - x).norm() / nx
            }
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HankelMode {
    /// `z_{k+1} = H† T_r H(z_k + g_k)` with a dense truncated SVD.
    Iht,
    /// `z_{k+1} = H† T_r P_{T_k} H(z_k + α_k g_k)` through the `2r × 2r` core.
    Fiht,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HankelOptions {
    pub mode: HankelMode,
    /// Lifted shape; the squarest one when absent.
    pub shape: Option<HankelShape>,
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for HankelOptions {
    fn default() -> Self {
        HankelOptions {
            mode: HankelMode::Fiht,
            shape: None,
            tol: 1e-8,
            max_iters: 1000,
        }
    }
}

/// One lifted update: `T_r H(w)` (IHT) or `T_r P_T H(w)` with `T` the tangent
/// space of `prev` (FIHT).
pub(crate) fn lifted_update(
    mode: HankelMode,
    prev: &SvdTriple<C64>,
    w: &DVector<C64>,
    shape: HankelShape,
    r: usize,
) -> Result<SvdTriple<C64>> {
    match mode {
        HankelMode::Iht => truncate_rank(&hankel_lift(w, shape)?, r),
        HankelMode::Fiht => {
            let space = prev.tangent_space();
            let tv = project_tangent(&space, &HankelOperand::new(w, shape)?)?;
            retract(&space, &tv, r)
        }
    }
}

/// Complete a spectrally sparse signal of rank `r` from `obs`.
///
/// Starts from `z₀ = H† T_r H((n/|Ω|) P_Ω x)`. With `g_k = P_Ω(x − z_k)`, IHT
/// takes the unit step (the observed entries are replaced by the data). FIHT
/// uses `α_k = Re⟨P_Ω d_k, g_k⟩ / ‖P_Ω d_k‖²` with `d_k = H† P_{T_k} H g_k`,
/// the exact minimizer of `‖g_k − α P_Ω d_k‖`, and `1` when `P_Ω d_k = 0`.
/// Stops when `‖P_Ω(z_k − x)‖ / ‖P_Ω x‖ ≤ tol`.
pub fn fiht_solve(
    obs: &PartialSignal,
    r: usize,
    opts: &HankelOptions,
    clock: &dyn Clock,
) -> Result<SolverReport<DVector<C64>>> {
    if !(opts.tol > 0.0) || opts.max_iters == 0 {
        return Err(invalid_options("tol must be positive and max_iters at least 1"));
    }
    let shape = match opts.shape {
        Some(s) => s,
        None => HankelShape::square(obs.n)?,
    };
    shape.check_len(obs.n)?;
    let max = shape.n1.min(shape.n2);
    if r == 0 || r >= max {
        return Err(Error::InvalidRank {
            rank: r,
            max: max.saturating_sub(1),
        });
    }

    let mut tracer = Tracer::new(clock);
    let x_norm = obs.observed_norm();
    if x_norm == 0.0 {
        let z = DVector::zeros(obs.n);
        tracer.record(0.0, obs.rel_error(&z), None);
        return Ok(tracer.finish(z, Status::Converged));
    }

    let scale = obs.n as f64 / obs.omega.len() as f64;
    let mut lifted = truncate_rank(&hankel_lift(&(obs.zero_filled() * C64::from(scale)), shape)?, r)?;
    let mut z = hankel_pinv_factored(&lifted, shape)?;
    let mut g = obs.residual(&z);
    let mut rel = g.norm() / x_norm;
    tracer.record(rel, obs.rel_error(&z), None);
    let mut status = if rel <= opts.tol { Status::Converged } else { Status::MaxIters };

    while status == Status::MaxIters && tracer.iterations() < opts.max_iters {
        let alpha = match opts.mode {
            HankelMode::Iht => 1.0,
            HankelMode::Fiht => {
                let space = lifted.tangent_space();
                let tg = project_tangent(&space, &HankelOperand::new(&g, shape)?)?;
                let d = hankel_pinv_tangent(&space, &tg, shape);
                let mut num = 0.0;
                let mut den = 0.0;
                for k in &obs.omega {
                    num += (d[*k].conj() * g[*k]).re;
                    den += d[*k].norm_sqr();
                }
                if den > 0.0 && den.is_finite() {
                    num / den
                } else {
                    if num != 0.0 {
                        tracer.event(SolverEvent::StepsizeDegenerate {
                            iter: tracer.iterations(),
                            fallback: 1.0,
                        });
                    }
                    1.0
                }
            }
        };
        let w = &z + &g * C64::from(alpha);
        lifted = lifted_update(opts.mode, &lifted, &w, shape, r)?;
        z = hankel_pinv_factored(&lifted, shape)?;
        g = obs.residual(&z);
        rel = g.norm() / x_norm;
        if tracer.record(rel, obs.rel_error(&z), None) {
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
    use crate::linalg::compact_svd;
    use crate::measurements::sample_without_replacement;
    use crate::report::NoClock;
    use crate::rng::{derive_seed, gaussian_vector};
    use alloc::vec;
    use proptest::prelude::*;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    fn random_complex(seed: u64, n: usize) -> DVector<C64> {
        let mut rng = stream(seed);
        let re = gaussian_vector(&mut rng, n);
        let im = gaussian_vector(&mut rng, n);
        DVector::from_fn(n, |k, _| C64::new(re[k], im[k]))
    }

    fn random_complex_matrix(seed: u64, rows: usize, cols: usize) -> DMatrix<C64> {
        let v = random_complex(seed, rows * cols);
        DMatrix::from_column_slice(rows, cols, v.as_slice())
    }

    #[test]
    fn lift_definition() {
        let z = DVector::from_vec(vec![c(1.0), c(2.0), c(3.0)]);
        let s = HankelShape::new(2, 2).unwrap();
        let h = hankel_lift(&z, s).unwrap();
        assert_eq!(h, DMatrix::from_row_slice(2, 2, &[c(1.0), c(2.0), c(2.0), c(3.0)]));
        assert_eq!(hankel_pinv(&h, s).unwrap(), z);
        let zero = hankel_lift(&DVector::zeros(3), s).unwrap();
        assert!(zero.iter().all(|v| *v == c(0.0)));
    }

    #[test]
    fn pinv_averages_anti_diagonals() {
        let s = HankelShape::new(2, 2).unwrap();
        let m = DMatrix::from_row_slice(2, 2, &[c(1.0), c(4.0), c(0.0), c(3.0)]);
        let z = hankel_pinv(&m, s).unwrap();
        assert_eq!(z.as_slice(), &[c(1.0), c(2.0), c(3.0)]);
        assert!(hankel_pinv(&DMatrix::zeros(2, 2), s).unwrap().iter().all(|v| *v == c(0.0)));
    }

    #[test]
    fn pinv_is_least_squares() {
        // Perturbing the averages in any direction can only increase ‖Hz − M‖.
        let s = HankelShape::new(4, 5).unwrap();
        let m = random_complex_matrix(3, 4, 5);
        let z = hankel_pinv(&m, s).unwrap();
        let base = (hankel_lift(&z, s).unwrap() - &m).norm();
        for t in 0..50 {
            let dz = random_complex(100 + t, 8) * C64::from(1e-3);
            let other = (hankel_lift(&(&z + dz), s).unwrap() - &m).norm();
            assert!(other >= base);
        }
    }

    #[test]
    fn shape_checks() {
        let s = HankelShape::square(5).unwrap();
        assert_eq!((s.n1, s.n2), (3, 3));
        let s = HankelShape::square(6).unwrap();
        assert_eq!((s.n1, s.n2), (4, 3));
        assert!(HankelShape::new(0, 2).is_err());
        assert!(hankel_lift(&DVector::zeros(4), HankelShape::new(2, 2).unwrap()).is_err());
        assert!(hankel_pinv(&DMatrix::zeros(3, 2), HankelShape::new(2, 2).unwrap()).is_err());
    }

    #[test]
    fn generator_lifts_to_rank_r() {
        for (n, r, seed) in [(16, 1, 1), (63, 3, 2), (127, 5, 3), (255, 8, 4), (20, 8, 5)] {
            let sig = SpectralSignal::random(n, r, seed).unwrap();
            let h = hankel_lift(&sig.samples, HankelShape::square(n).unwrap()).unwrap();
            let svd = compact_svd(&h).unwrap();
            assert!(svd.sigma[r - 1] / svd.sigma[0] > 1e-8, "n={n} r={r}");
            assert!(svd.sigma[r] / svd.sigma[0] <= 1e-10, "n={n} r={r}");
        }
    }

    #[test]
    fn signal_validation() {
        assert!(SpectralSignal::new(8, vec![0.1, 0.1], vec![0.0; 2], vec![c(1.0); 2]).is_err());
        assert!(SpectralSignal::new(8, vec![1.0], vec![0.0], vec![c(1.0)]).is_err());
        assert!(SpectralSignal::new(8, vec![0.1], vec![-1.0], vec![c(1.0)]).is_err());
        let s = SpectralSignal::new(4, vec![0.25], vec![0.0], vec![c(2.0)]).unwrap();
        let expect = [c(2.0), C64::new(0.0, 2.0), c(-2.0), C64::new(0.0, -2.0)];
        for (a, b) in s.samples.iter().zip(expect) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn operand_matches_dense() {
        let s = HankelShape::new(6, 4).unwrap();
        let z = random_complex(7, 9);
        let h = hankel_lift(&z, s).unwrap();
        let op = HankelOperand::new(&z, s).unwrap();
        let v = random_complex_matrix(8, 4, 2);
        let u = random_complex_matrix(9, 6, 2);
        assert!((op.mul_right(&v) - &h * &v).norm() < 1e-12);
        assert!((op.adjoint_mul(&u) - h.adjoint() * &u).norm() < 1e-12);
    }

    #[test]
    fn tangent_pinv_matches_dense() {
        let s = HankelShape::new(6, 5).unwrap();
        let prev = truncate_rank(&random_complex_matrix(12, 6, 5), 2).unwrap();
        let space = prev.tangent_space();
        let tv = project_tangent(&space, &random_complex_matrix(13, 6, 5)).unwrap();
        let a = hankel_pinv_tangent(&space, &tv, s);
        let b = hankel_pinv(&space.densify(&tv), s).unwrap();
        assert!((a - b).norm() < 1e-12);
    }

    #[test]
    fn factored_pinv_matches_dense() {
        let s = HankelShape::new(5, 4).unwrap();
        let t = truncate_rank(&random_complex_matrix(11, 5, 4), 2).unwrap();
        let a = hankel_pinv_factored(&t, s).unwrap();
        let b = hankel_pinv(&t.to_dense(), s).unwrap();
        assert!((a - b).norm() < 1e-12);
    }

    proptest! {
        #[test]
        fn adjoint_identity(seed in any::<u64>(), n1 in 1usize..8, n2 in 1usize..8) {
            let s = HankelShape::new(n1, n2).unwrap();
            let z = random_complex(seed, s.len());
            let m = random_complex_matrix(derive_seed(seed, 1), n1, n2);
            let lhs = hankel_lift(&z, s).unwrap().dotc(&m);
            let rhs = z.dotc(&hankel_adjoint(&m, s).unwrap());
            prop_assert!((lhs - rhs).norm() <= 1e-10 * (1.0 + lhs.norm()));
        }

        #[test]
        fn pinv_left_inverse_and_contraction(seed in any::<u64>(), n1 in 1usize..8, n2 in 1usize..8) {
            let s = HankelShape::new(n1, n2).unwrap();
            let z = random_complex(seed, s.len());
            let back = hankel_pinv(&hankel_lift(&z, s).unwrap(), s).unwrap();
            prop_assert!((back - &z).norm() <= 1e-12 * (1.0 + z.norm()));
            let m = random_complex_matrix(derive_seed(seed, 2), n1, n2);
            let proj = hankel_lift(&hankel_pinv(&m, s).unwrap(), s).unwrap();
            prop_assert!((proj - &m).norm() <= m.norm() + 1e-12);
        }
    }

    fn instance(n: usize, r: usize, frac: f64, seed: u64) -> PartialSignal {
        let sig = SpectralSignal::random(n, r, seed).unwrap();
        let count = ((frac * n as f64).round() as usize).max(1);
        let omega = sample_without_replacement(n, count, derive_seed(seed, 7));
        PartialSignal::observe(&sig.samples, omega).unwrap()
    }

    #[test]
    fn full_observation_recovers_in_one_step() {
        let sig = SpectralSignal::random(31, 3, 5).unwrap();
        let obs = PartialSignal::observe(&sig.samples, (0..31).collect()).unwrap();
        for mode in [HankelMode::Iht, HankelMode::Fiht] {
            let opts = HankelOptions {
                mode,
                ..Default::default()
            };
            let rep = fiht_solve(&obs, 3, &opts, &NoClock).unwrap();
            assert!(rep.converged());
            assert!(rep.iterations() <= 1);
            assert!(rep.final_rel_error().unwrap() < 1e-10);
        }
    }

    #[test]
    fn constant_signal_half_observed() {
        let sig = SpectralSignal::new(40, vec![0.0], vec![0.0], vec![c(1.0)]).unwrap();
        let omega = sample_without_replacement(40, 20, 3);
        let obs = PartialSignal::observe(&sig.samples, omega).unwrap();
        let opts = HankelOptions {
            tol: 1e-12,
            ..Default::default()
        };
        let rep = fiht_solve(&obs, 1, &opts, &NoClock).unwrap();
        assert!(rep.final_rel_error().unwrap() <= 1e-8);
    }

    #[test]
    fn fiht_recovers_partial_signals() {
        let mut ok = 0;
        for seed in 0..10 {
            let obs = instance(127, 3, 0.3, seed);
            let rep = fiht_solve(&obs, 3, &HankelOptions::default(), &NoClock).unwrap();
            if rep.final_rel_error().unwrap() <= 1e-4 {
                ok += 1;
            }
        }
        assert!(ok >= 8, "{ok}/10");
    }

    #[test]
    fn iht_recovers_easy_instance() {
        let obs = instance(63, 2, 0.6, 4);
        let opts = HankelOptions {
            mode: HankelMode::Iht,
            max_iters: 3000,
            ..Default::default()
        };
        let rep = fiht_solve(&obs, 2, &opts, &NoClock).unwrap();
        assert!(rep.final_rel_error().unwrap() <= 1e-4, "{:?}", rep.trace.last());
    }

    #[test]
    fn residual_roughly_monotone_early() {
        let obs = instance(127, 3, 0.4, 2);
        let opts = HankelOptions {
            max_iters: 20,
            tol: 1e-14,
            ..Default::default()
        };
        let rep = fiht_solve(&obs, 3, &opts, &NoClock).unwrap();
        for w in rep.trace.windows(2) {
            assert!(w[1].rel_residual <= 1.1 * w[0].rel_residual);
        }
    }

    #[test]
    fn modes_agree_when_projection_is_identity() {
        // H(x) lies in the tangent space at T_r H(x) itself.
        let sig = SpectralSignal::random(41, 3, 9).unwrap();
        let s = HankelShape::square(41).unwrap();
        let prev = truncate_rank(&hankel_lift(&sig.samples, s).unwrap(), 3).unwrap();
        let a = lifted_update(HankelMode::Iht, &prev, &sig.samples, s, 3).unwrap();
        let b = lifted_update(HankelMode::Fiht, &prev, &sig.samples, s, 3).unwrap();
        assert!((a.to_dense() - b.to_dense()).norm() <= 1e-10 * a.spectral_norm());
    }

    #[test]
    fn rank_and_input_errors() {
        let obs = instance(9, 1, 0.5, 1);
        let opts = HankelOptions::default();
        assert!(matches!(
            fiht_solve(&obs, 5, &opts, &NoClock),
            Err(Error::InvalidRank { .. })
        ));
        assert!(matches!(
            fiht_solve(&obs, 0, &opts, &NoClock),
            Err(Error::InvalidRank { .. })
        ));
        assert!(PartialSignal::new(5, vec![], vec![]).is_err());
        assert!(PartialSignal::new(5, vec![3, 1], vec![c(1.0), c(1.0)]).is_err());
        assert!(PartialSignal::new(5, vec![5], vec![c(1.0)]).is_err());
    }

    #[test]
    fn zero_observations_give_zero() {
        let obs = PartialSignal::new(9, vec![1, 4], vec![c(0.0), c(0.0)]).unwrap();
        let rep = fiht_solve(&obs, 2, &HankelOptions::default(), &NoClock).unwrap();
        assert!(rep.converged());
        assert_eq!(rep.estimate.norm(), 0.0);
    }
}
