use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector, SVD};
// Float methods under no_std; std shadows them when linked into the build.
#[allow(unused_imports)]
use num_traits::Float;

use super::{descending_order, ensure_finite, orthonormal_complement, Field, TangentSpace};
use crate::error::{invalid_input, Error, Result};

/// Compact SVD factors `U · diag(σ) · Vᴴ`.
///
/// `U` and `V` have orthonormal columns, `σ` is nonincreasing and
/// nonnegative. The sign (or, for complex scalars, the phase) of each
/// singular pair is fixed so that the largest-magnitude entry of every left
/// singular vector is real and positive.
#[derive(Debug, Clone, PartialEq)]
pub struct SvdTriple<T: Field = f64> {
    pub u: DMatrix<T>,
    pub sigma: DVector<f64>,
    pub v: DMatrix<T>,
}

impl<T: Field> SvdTriple<T> {
    /// Assemble factors, checking shapes and the ordering of `sigma`.
    pub fn new(u: DMatrix<T>, sigma: DVector<f64>, v: DMatrix<T>) -> Result<Self> {
        let k = sigma.len();
        if u.ncols() != k || v.ncols() != k {
            return Err(invalid_input("factor column counts must match the number of singular values"));
        }
        if sigma.iter().any(|s| !(*s >= 0.0) || !s.is_finite()) {
            return Err(invalid_input("singular values must be finite and nonnegative"));
        }
        if sigma.as_slice().windows(2).any(|w| w[0] < w[1]) {
            return Err(invalid_input("singular values must be nonincreasing"));
        }
        Ok(SvdTriple { u, sigma, v })
    }

    /// Number of singular triplets stored.
    pub fn rank(&self) -> usize {
        self.sigma.len()
    }

    pub fn nrows(&self) -> usize {
        self.u.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.v.nrows()
    }

    /// Largest singular value (zero for an empty triple).
    pub fn spectral_norm(&self) -> f64 {
        self.sigma.get(0).copied().unwrap_or(0.0)
    }

    /// `U Σ`.
    pub fn u_sigma(&self) -> DMatrix<T> {
        let mut us = self.u.clone();
        for (j, s) in self.sigma.iter().enumerate() {
            us.column_mut(j).scale_mut(*s);
        }
        us
    }

    /// Dense `U Σ Vᴴ`.
    pub fn to_dense(&self) -> DMatrix<T> {
        self.u_sigma() * self.v.adjoint()
    }

    /// Keep the leading `r` triplets.
    pub fn truncated(&self, r: usize) -> Self {
        let r = r.min(self.rank());
        SvdTriple {
            u: self.u.columns(0, r).into_owned(),
            sigma: self.sigma.rows(0, r).into_owned(),
            v: self.v.columns(0, r).into_owned(),
        }
    }

    /// Tangent space of the fixed-rank manifold at this point.
    pub fn tangent_space(&self) -> TangentSpace<T> {
        TangentSpace {
            u: self.u.clone(),
            v: self.v.clone(),
        }
    }

    /// `‖UᴴU − I‖_max` and `‖VᴴV − I‖_max`, the larger of the two.
    pub fn orthonormality_defect(&self) -> f64 {
        let k = self.rank();
        let eye = DMatrix::<T>::identity(k, k);
        let du = (self.u.ad_mul(&self.u) - &eye).iter().map(|x| x.modulus()).fold(0.0, f64::max);
        let dv = (self.v.ad_mul(&self.v) - &eye).iter().map(|x| x.modulus()).fold(0.0, f64::max);
        du.max(dv)
    }

    /// Fix the phase of each singular pair so that the largest-magnitude
    /// entry of each left singular vector is real and positive.
    pub(crate) fn canonicalize(&mut self) {
        for j in 0..self.rank() {
            let col = self.u.column(j);
            let mut best = 0usize;
            let mut best_mag = -1.0;
            for (i, x) in col.iter().enumerate() {
                let m = x.modulus();
                if m > best_mag {
                    best_mag = m;
                    best = i;
                }
            }
            if best_mag <= 0.0 {
                continue;
            }
            let pivot = self.u[(best, j)];
            // Unit phase to divide out; applied to both vectors keeps u vᴴ fixed.
            let phase = pivot.unscale(best_mag).conjugate();
            self.u.column_mut(j).scale_mut_by(phase);
            self.v.column_mut(j).scale_mut_by(phase);
        }
    }
}

trait ScaleBy<T> {
    fn scale_mut_by(&mut self, s: T);
}

impl<T: Field, S> ScaleBy<T> for nalgebra::Matrix<T, nalgebra::Dyn, nalgebra::U1, S>
where
    S: nalgebra::StorageMut<T, nalgebra::Dyn, nalgebra::U1>,
{
    fn scale_mut_by(&mut self, s: T) {
        for x in self.iter_mut() {
            *x *= s;
        }
    }
}

/// Full compact SVD of `Z` with `min(rows, cols)` triplets, sorted
/// nonincreasingly (ties keep the order of the underlying factorization).
///
/// The Golub–Kahan factorization loses accuracy on clustered singular values,
/// so its right factor only seeds one-sided Jacobi sweeps on `B = Z V`. The
/// rotations keep `B = Z V` exact, which restores `‖U Σ Vᴴ − Z‖ = O(ε‖Z‖)`.
pub fn compact_svd<T: Field>(z: &DMatrix<T>) -> Result<SvdTriple<T>> {
    ensure_finite(z, "matrix")?;
    if z.nrows() < z.ncols() {
        let t = compact_svd(&z.adjoint())?;
        let mut out = SvdTriple {
            u: t.v,
            sigma: t.sigma,
            v: t.u,
        };
        out.canonicalize();
        return Ok(out);
    }
    let svd = SVD::try_new_unordered(z.clone(), true, true, 5.0 * f64::EPSILON, 0)
        .ok_or_else(|| Error::Numerical("SVD did not converge".into()))?;
    let seed_sigma: Vec<f64> = svd.singular_values.iter().map(|s| s.abs()).collect();
    let u_seed = svd.u.ok_or_else(|| Error::Numerical("SVD returned no U".into()))?;
    let mut v = svd
        .v_t
        .ok_or_else(|| Error::Numerical("SVD returned no Vᵀ".into()))?
        .adjoint();
    let mut b = z * &v;
    let k = b.ncols();
    // Columns below this are rounding noise of a rank-deficient `Z`.
    let negligible = (k as f64) * f64::EPSILON * z.norm();
    jacobi_sweeps(&mut b, &mut v, negligible)?;

    let norms: Vec<f64> = b.column_iter().map(|c| c.norm()).collect();
    let order = descending_order(&norms);
    let mut u = DMatrix::<T>::zeros(z.nrows(), k);
    let mut sorted_v = DMatrix::<T>::zeros(z.ncols(), k);
    let mut sigma = DVector::<f64>::zeros(k);
    for (dst, &src) in order.iter().enumerate() {
        sigma[dst] = norms[src];
        sorted_v.column_mut(dst).copy_from(&v.column(src));
        if norms[src] > negligible {
            u.column_mut(dst).copy_from(&b.column(src).unscale(norms[src]));
        }
    }
    // Negligible columns carry no reliable direction; complete U from the
    // seed vectors of the smallest singular values.
    let kept = sigma.iter().take_while(|s| **s > negligible).count();
    if kept < k {
        let seed_order = descending_order(&seed_sigma);
        let mut filler = DMatrix::<T>::zeros(z.nrows(), k - kept);
        for (j, &src) in seed_order[kept..].iter().enumerate() {
            filler.column_mut(j).copy_from(&u_seed.column(src));
        }
        let basis = u.columns(0, kept).into_owned();
        u.columns_mut(kept, k - kept)
            .copy_from(&orthonormal_complement(&basis, &filler));
    }
    let mut out = SvdTriple {
        u,
        sigma,
        v: sorted_v,
    };
    out.canonicalize();
    Ok(out)
}

const JACOBI_MAX_SWEEPS: usize = 60;

/// One-sided Jacobi: rotate column pairs of `b` (and the same pairs of `v`)
/// until every pair of non-negligible columns is orthogonal to working
/// precision.
fn jacobi_sweeps<T: Field>(b: &mut DMatrix<T>, v: &mut DMatrix<T>, negligible: f64) -> Result<()> {
    let (m, k) = (b.nrows(), b.ncols());
    let n = v.nrows();
    let tol = m as f64 * f64::EPSILON;
    let floor = negligible * negligible;
    let mut norms: Vec<f64> = b.column_iter().map(|c| c.norm_squared()).collect();
    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..k {
            for q in p + 1..k {
                let (alpha, beta) = (norms[p], norms[q]);
                if alpha <= floor || beta <= floor {
                    continue;
                }
                let gamma = b.column(p).dotc(&b.column(q));
                let g = gamma.modulus();
                if g <= tol * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                // Rotate the phase of column q so that bₚᴴ b_q = g is real.
                let phase = gamma.unscale(g).conjugate();
                let zeta = (beta - alpha) / (2.0 * g);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate_pair(b.as_mut_slice(), m, p, q, phase, c, s);
                rotate_pair(v.as_mut_slice(), n, p, q, phase, c, s);
                norms[p] = b.column(p).norm_squared();
                norms[q] = b.column(q).norm_squared();
            }
        }
        if !rotated {
            return Ok(());
        }
    }
    Err(Error::Numerical("Jacobi SVD refinement did not converge".into()))
}

/// `(x_p, x_q) ← (c x_p − s e x_q, s x_p + c e x_q)` on columns of length `len`.
fn rotate_pair<T: Field>(data: &mut [T], len: usize, p: usize, q: usize, e: T, c: f64, s: f64) {
    let (lo, hi) = data.split_at_mut(q * len);
    let xp = &mut lo[p * len..(p + 1) * len];
    let xq = &mut hi[..len];
    for (a, b) in xp.iter_mut().zip(xq.iter_mut()) {
        let bq = *b * e;
        let ap = *a;
        *a = ap.scale(c) - bq.scale(s);
        *b = ap.scale(s) + bq.scale(c);
    }
}

/// Best rank-`r` approximation `T_r(Z)` by truncated SVD.
pub fn truncate_rank<T: Field>(z: &DMatrix<T>, r: usize) -> Result<SvdTriple<T>> {
    let max = z.nrows().min(z.ncols());
    if r == 0 || r > max {
        return Err(Error::InvalidRank { rank: r, max });
    }
    Ok(compact_svd(z)?.truncated(r))
}

/// Singular value thresholding `D_τ(Z) = Σ max(σ_i − τ, 0) u_i v_iᵀ`, the
/// proximity operator of `τ‖·‖_*`.
pub fn svt(z: &DMatrix<f64>, tau: f64) -> Result<DMatrix<f64>> {
    if !(tau >= 0.0) || !tau.is_finite() {
        return Err(invalid_input("threshold must be finite and nonnegative"));
    }
    ensure_finite(z, "matrix")?;
    if tau == 0.0 {
        return Ok(z.clone());
    }
    Ok(svt_triple(z, tau)?.to_dense())
}

/// `D_τ(Z)` in factored form, keeping only the surviving singular triplets.
pub fn svt_triple(z: &DMatrix<f64>, tau: f64) -> Result<SvdTriple<f64>> {
    let svd = compact_svd(z)?;
    let keep = svd.sigma.iter().take_while(|s| **s > tau).count();
    let mut out = svd.truncated(keep);
    out.sigma.apply(|s| *s -= tau);
    Ok(out)
}
