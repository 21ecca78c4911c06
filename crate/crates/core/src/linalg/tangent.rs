use nalgebra::DMatrix;

use super::{compact_svd, hstack, inner, Field, LinearOperand, SvdTriple};
use crate::error::{invalid_input, Error, Result};

/// Tangent space `T = { U Bᴴ + C Vᴴ }` of the rank-`r` manifold at a point
/// with column space `U` and row space `V` (both orthonormal).
#[derive(Debug, Clone, PartialEq)]
pub struct TangentSpace<T: Field = f64> {
    pub u: DMatrix<T>,
    pub v: DMatrix<T>,
}

/// `W = U Bᴴ + C Vᴴ`, an element of a [`TangentSpace`].
///
/// Vectors produced by [`project_tangent`] satisfy `Uᴴ C = 0`, which makes the
/// two terms orthogonal; [`TangentVector::inner`] relies on it.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentVector<T: Field = f64> {
    pub b: DMatrix<T>,
    pub c: DMatrix<T>,
}

impl<T: Field> TangentSpace<T> {
    pub fn new(u: DMatrix<T>, v: DMatrix<T>) -> Result<Self> {
        if u.ncols() != v.ncols() {
            return Err(invalid_input("U and V must have the same number of columns"));
        }
        Ok(TangentSpace { u, v })
    }

    pub fn rank(&self) -> usize {
        self.u.ncols()
    }

    /// Dense `U Bᴴ + C Vᴴ`.
    pub fn densify(&self, w: &TangentVector<T>) -> DMatrix<T> {
        &self.u * w.b.adjoint() + &w.c * self.v.adjoint()
    }

    /// The point `U Σ Vᴴ` itself, written as a tangent vector (`B = VΣ`, `C = 0`).
    pub fn embed_point(&self, sigma: &nalgebra::DVector<f64>) -> TangentVector<T> {
        let mut b = self.v.clone();
        for (j, s) in sigma.iter().enumerate() {
            b.column_mut(j).scale_mut(*s);
        }
        TangentVector {
            b,
            c: DMatrix::zeros(self.u.nrows(), self.rank()),
        }
    }

    /// Re-express a tangent vector of another space in this one by projecting
    /// its dense value, without forming it (`O(n r²)`).
    pub fn transport(&self, from: &TangentSpace<T>, w: &TangentVector<T>) -> TangentVector<T> {
        // Wᴴ U = B (U_fᴴ U) + V_f (Cᴴ U)
        let b = &w.b * from.u.ad_mul(&self.u) + &from.v * w.c.ad_mul(&self.u);
        // W V = U_f (Bᴴ V) + C (V_fᴴ V)
        let wv = &from.u * w.b.ad_mul(&self.v) + &w.c * from.v.ad_mul(&self.v);
        let c = &wv - &self.u * self.u.ad_mul(&wv);
        TangentVector { b, c }
    }
}

impl<T: Field> TangentVector<T> {
    /// Frobenius inner product of two vectors of the same tangent space,
    /// `⟨B₁,B₂⟩ + ⟨C₁,C₂⟩` (valid because `Uᴴ C = 0`).
    pub fn inner(&self, other: &TangentVector<T>) -> f64 {
        inner(&self.b, &other.b) + inner(&self.c, &other.c)
    }

    pub fn norm_squared(&self) -> f64 {
        self.inner(self)
    }

    pub fn scaled(&self, alpha: f64) -> TangentVector<T> {
        TangentVector {
            b: self.b.map(|x| x.scale(alpha)),
            c: self.c.map(|x| x.scale(alpha)),
        }
    }

    /// `self + alpha · other`.
    pub fn axpy(&self, alpha: f64, other: &TangentVector<T>) -> TangentVector<T> {
        TangentVector {
            b: &self.b + other.b.map(|x| x.scale(alpha)),
            c: &self.c + other.c.map(|x| x.scale(alpha)),
        }
    }
}

/// Orthogonal projection onto the tangent space:
/// `P_T(Z) = U Uᴴ Z + Z V Vᴴ − U Uᴴ Z V Vᴴ`, returned as `B = Zᴴ U`,
/// `C = (I − U Uᴴ) Z V`.
pub fn project_tangent<T: Field, Z: LinearOperand<T> + ?Sized>(
    space: &TangentSpace<T>,
    z: &Z,
) -> Result<TangentVector<T>> {
    if z.nrows() != space.u.nrows() || z.ncols() != space.v.nrows() {
        return Err(invalid_input("matrix shape does not match the tangent space"));
    }
    let b = z.adjoint_mul(&space.u);
    let zv = z.mul_right(&space.v);
    // Uᴴ Z V = Bᴴ V
    let c = &zv - &space.u * b.ad_mul(&space.v);
    Ok(TangentVector { b, c })
}

/// Orthonormal basis `Q` (same column count as `x`) with `Q ⟂ basis` whose
/// span contains the component of `range(x)` orthogonal to `basis`.
///
/// Columns of `x` that are (numerically) inside `span(basis)` or dependent on
/// earlier columns are replaced by coordinate directions, so `[basis Q]`
/// always has orthonormal columns. Requires `basis.ncols() + x.ncols() ≤ rows`.
pub fn orthonormal_complement<T: Field>(basis: &DMatrix<T>, x: &DMatrix<T>) -> DMatrix<T> {
    let n = x.nrows();
    let k = x.ncols();
    assert!(basis.ncols() + k <= n, "complement does not fit");
    let mut q = DMatrix::<T>::zeros(n, k);
    let scale = x.norm().max(f64::MIN_POSITIVE);
    let mut next_unit = 0usize;
    for j in 0..k {
        let mut w = x.column(j).into_owned();
        let mut ok = false;
        // Two passes of Gram-Schmidt against basis and accepted columns.
        for _ in 0..2 {
            w -= basis * basis.ad_mul(&w);
            if j > 0 {
                let qj = q.columns(0, j);
                w -= &qj * qj.ad_mul(&w);
            }
        }
        let norm = w.norm();
        if norm > 1e-12 * scale {
            w.unscale_mut(norm);
            ok = true;
        }
        while !ok {
            let mut e = nalgebra::DVector::<T>::zeros(n);
            e[next_unit % n] = T::one();
            next_unit += 1;
            for _ in 0..2 {
                e -= basis * basis.ad_mul(&e);
                if j > 0 {
                    let qj = q.columns(0, j);
                    e -= &qj * qj.ad_mul(&e);
                }
            }
            let norm = e.norm();
            if norm > 0.5 {
                e.unscale_mut(norm);
                w = e;
                ok = true;
            }
        }
        q.column_mut(j).copy_from(&w);
    }
    q
}

/// SVD of a tangent vector computed from a `2r × 2r` core, keeping all `2r`
/// triplets. Costs `O(n r² + r³)`.
///
/// With `B = V Vᴴ B + Q₁ R₁` and `C = U Uᴴ C + Q₂ R₂` (`Q₁ ⟂ V`, `Q₂ ⟂ U`):
///
/// ```text
/// W = [U Q₂] · [ BᴴV + UᴴC   R₁ᴴ ] · [V Q₁]ᴴ
///              [ R₂           0  ]
/// ```
///
/// Falls back to a dense SVD when the ambient dimensions are smaller than `2r`.
pub fn tangent_svd<T: Field>(space: &TangentSpace<T>, w: &TangentVector<T>) -> Result<SvdTriple<T>> {
    let (n1, n2, r) = (space.u.nrows(), space.v.nrows(), space.rank());
    if w.b.shape() != (n2, r) || w.c.shape() != (n1, r) {
        return Err(invalid_input("tangent vector does not match its space"));
    }
    if n1 < 2 * r || n2 < 2 * r {
        return compact_svd(&space.densify(w));
    }
    let bv = w.b.ad_mul(&space.v);
    let cu = space.u.ad_mul(&w.c);
    let q1 = orthonormal_complement(&space.v, &w.b);
    let r1 = q1.ad_mul(&w.b);
    let q2 = orthonormal_complement(&space.u, &w.c);
    let r2 = q2.ad_mul(&w.c);

    let mut core = DMatrix::<T>::zeros(2 * r, 2 * r);
    core.view_mut((0, 0), (r, r)).copy_from(&(bv + cu));
    core.view_mut((0, r), (r, r)).copy_from(&r1.adjoint());
    core.view_mut((r, 0), (r, r)).copy_from(&r2);
    let small = compact_svd(&core)?;

    let left = hstack(&space.u, &q2) * &small.u;
    let right = hstack(&space.v, &q1) * &small.v;
    let mut out = SvdTriple {
        u: left,
        sigma: small.sigma,
        v: right,
    };
    out.canonicalize();
    Ok(out)
}

/// Retraction `T_r(U Bᴴ + C Vᴴ)` through the `2r × 2r` core SVD.
pub fn retract<T: Field>(space: &TangentSpace<T>, w: &TangentVector<T>, r: usize) -> Result<SvdTriple<T>> {
    let max = space.u.nrows().min(space.v.nrows());
    if r == 0 || r > max {
        return Err(Error::InvalidRank { rank: r, max });
    }
    Ok(tangent_svd(space, w)?.truncated(r))
}
