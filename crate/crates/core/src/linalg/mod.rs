//! Dense linear algebra shared by every solver: compact and truncated SVDs,
//! singular value thresholding, entrywise hard thresholding, and the
//! fixed-rank tangent-space projection and retraction.
//!
//! Matrices are `nalgebra::DMatrix`. Real routines work on `f64`; the SVD and
//! tangent machinery are generic over [`Field`] so the Hankel module can run
//! them on complex scalars.

mod svd;
mod tangent;

use alloc::vec::Vec;

use nalgebra::{ComplexField, DMatrix};
use num_complex::Complex64;

use crate::error::{invalid_input, Result};

pub use svd::{compact_svd, svt, svt_triple, truncate_rank, SvdTriple};
pub use tangent::{
    orthonormal_complement, project_tangent, retract, tangent_svd, TangentSpace, TangentVector,
};

/// Scalars the SVD and tangent routines accept: `f64` and `Complex64`.
pub trait Field: ComplexField<RealField = f64> + Copy {}

impl Field for f64 {}
impl Field for Complex64 {}

/// Tolerance for orthonormality and reconstruction checks.
pub const ORTHONORMALITY_TOL: f64 = 1e-10;

/// Something that can be multiplied against thin matrices, which is all the
/// tangent projection needs. Dense matrices implement it directly; sampling
/// operators and Hankel lifts implement it without materializing.
pub trait LinearOperand<T: Field> {
    fn nrows(&self) -> usize;
    fn ncols(&self) -> usize;
    /// `Z · V` for an `ncols × k` matrix `V`.
    fn mul_right(&self, v: &DMatrix<T>) -> DMatrix<T>;
    /// `Zᴴ · U` for an `nrows × k` matrix `U`.
    fn adjoint_mul(&self, u: &DMatrix<T>) -> DMatrix<T>;
}

impl<T: Field> LinearOperand<T> for DMatrix<T> {
    fn nrows(&self) -> usize {
        self.nrows()
    }

    fn ncols(&self) -> usize {
        self.ncols()
    }

    fn mul_right(&self, v: &DMatrix<T>) -> DMatrix<T> {
        self * v
    }

    fn adjoint_mul(&self, u: &DMatrix<T>) -> DMatrix<T> {
        self.ad_mul(u)
    }
}

pub(crate) fn ensure_finite<T: Field>(z: &DMatrix<T>, what: &str) -> Result<()> {
    if z.nrows() == 0 || z.ncols() == 0 {
        return Err(invalid_input(alloc::format!("{what} has an empty dimension")));
    }
    if z.iter().any(|x| !x.is_finite()) {
        return Err(invalid_input(alloc::format!("{what} has non-finite entries")));
    }
    Ok(())
}

/// Real part of the Frobenius inner product `⟨A, B⟩ = Re tr(Aᴴ B)`.
pub fn inner<T: Field>(a: &DMatrix<T>, b: &DMatrix<T>) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x.conjugate() * *y).real())
        .sum()
}

/// Sum of squared magnitudes, accumulated in storage order.
pub fn sum_sq<T: Field>(values: &[T]) -> f64 {
    values.iter().map(|x| x.modulus_squared()).sum()
}

/// Nuclear norm (sum of singular values).
pub fn nuclear_norm(z: &DMatrix<f64>) -> Result<f64> {
    Ok(compact_svd(z)?.sigma.iter().sum())
}

/// Entrywise hard thresholding: keep `Z_ij` when `|Z_ij| > ζ`, zero it otherwise.
///
/// The comparison is strict, so entries with magnitude exactly `ζ` are zeroed.
pub fn hard_threshold_entries(z: &DMatrix<f64>, zeta: f64) -> Result<DMatrix<f64>> {
    if !(zeta >= 0.0) || !zeta.is_finite() {
        return Err(invalid_input("threshold must be finite and nonnegative"));
    }
    ensure_finite(z, "matrix")?;
    Ok(z.map(|x| if x.abs() > zeta { x } else { 0.0 }))
}

/// Stable descending order of a slice of reals.
pub(crate) fn descending_order(values: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].partial_cmp(&values[a]).unwrap_or(core::cmp::Ordering::Equal));
    order
}

/// `[A B]`, horizontally concatenated.
pub(crate) fn hstack<T: Field>(a: &DMatrix<T>, b: &DMatrix<T>) -> DMatrix<T> {
    debug_assert_eq!(a.nrows(), b.nrows());
    let mut out = DMatrix::zeros(a.nrows(), a.ncols() + b.ncols());
    out.columns_mut(0, a.ncols()).copy_from(a);
    out.columns_mut(a.ncols(), b.ncols()).copy_from(b);
    out
}

/// Largest row norm squared, `‖M‖²_{2,∞}`.
pub fn max_row_norm_sq<T: Field>(m: &DMatrix<T>) -> f64 {
    (0..m.nrows())
        .map(|i| m.row(i).iter().map(|x| x.modulus_squared()).sum::<f64>())
        .fold(0.0, f64::max)
}
