use lowrank_core::hankel::{hankel_adjoint, hankel_lift, hankel_pinv, HankelShape};
use lowrank_core::linalg::{compact_svd, nuclear_norm, project_tangent, retract, svt, truncate_rank};
use lowrank_core::measurements::generate_instance;
use lowrank_core::Scenario;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn gaussian(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

fn scenario() -> impl Strategy<Value = Scenario> {
    prop_oneof![
        Just(Scenario::Sensing),
        Just(Scenario::Completion),
        Just(Scenario::PhaseRetrieval)
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ensemble_adjoint_identity(s in scenario(), n in 1usize..9, m in 1usize..60, seed in any::<u64>()) {
        let p = generate_instance(s, n, 1, m, seed).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let z = gaussian(&mut rng, n, n);
        let v = DVector::from_fn(m, |_, _| rng.sample(StandardNormal));
        let az = p.ensemble.forward(&z).unwrap();
        let atv = p.ensemble.adjoint(&v).unwrap();
        let gap = (az.dot(&v) - z.dot(&atv)).abs();
        prop_assert!(gap <= 1e-10 * (az.norm() * v.norm()).max(1e-300));
    }

    #[test]
    fn hankel_adjoint_and_pseudo_inverse(len in 1usize..70, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let shape = HankelShape::square(len).unwrap();
        let mut c = |r, k| DMatrix::from_fn(r, k, |_, _| {
            Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
        });
        let z: DVector<Complex64> = c(len, 1).column(0).into_owned();
        let m = c(shape.n1, shape.n2);
        let hz = hankel_lift(&z, shape).unwrap();
        let lhs = hz.dotc(&m);
        let rhs = z.dotc(&hankel_adjoint(&m, shape).unwrap());
        prop_assert!((lhs - rhs).norm() <= 1e-10 * hz.norm() * m.norm());
        prop_assert!((hankel_pinv(&hz, shape).unwrap() - &z).norm() <= 1e-12 * z.norm());
    }

    #[test]
    fn svd_reconstructs_degenerate_matrices(
        rows in 1usize..7,
        cols in 1usize..7,
        entries in prop::collection::vec(-2i8..=2, 36),
    ) {
        // Small integer entries produce repeated and zero singular values.
        let z = DMatrix::from_fn(rows, cols, |i, j| f64::from(entries[i * 6 + j]));
        let s = compact_svd(&z).unwrap();
        prop_assert!((s.to_dense() - &z).norm() <= 1e-12 * z.norm().max(1.0));
        prop_assert!(s.orthonormality_defect() < 1e-10);
        prop_assert!(s.sigma.as_slice().windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn svt_shrinks_the_spectrum(seed in any::<u64>(), n in 1usize..7, tau in 0.0f64..3.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let z = gaussian(&mut rng, n, n + 1);
        let before = compact_svd(&z).unwrap().sigma;
        let after = compact_svd(&svt(&z, tau).unwrap()).unwrap().sigma;
        for (a, b) in before.iter().zip(after.iter()) {
            prop_assert!((b - (a - tau).max(0.0)).abs() <= 1e-10 * before[0].max(1.0));
        }
        prop_assert!(nuclear_norm(&svt(&z, tau).unwrap()).unwrap() <= nuclear_norm(&z).unwrap() + 1e-12);
    }

    #[test]
    fn retraction_matches_dense_truncation(seed in any::<u64>(), r in 1usize..4, extra in 0usize..12) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = 2 * r + extra;
        let point = truncate_rank(&(gaussian(&mut rng, n, r) * gaussian(&mut rng, r, n)), r).unwrap();
        let space = point.tangent_space();
        let w = project_tangent(&space, &gaussian(&mut rng, n, n)).unwrap();
        let fast = retract(&space, &w, r).unwrap();
        let dense = truncate_rank(&space.densify(&w), r).unwrap();
        let gap = (fast.to_dense() - dense.to_dense()).norm();
        prop_assert!(gap <= 1e-10 * space.densify(&w).norm().max(1.0));
    }
}
