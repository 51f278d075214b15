mod common;

use blast_core::linalg::{
    gram, hadamard, is_positive_definite, sigma_max, spd_solve, SpdSolveWorkspace, POWER_ITERS, POWER_TOL,
};
use blast_core::DenseMatrix;
use common::*;
use proptest::prelude::*;

fn eigenvalues(m: &DenseMatrix<f64>) -> Vec<f64> {
    to_nalgebra(m).symmetric_eigen().eigenvalues.iter().copied().collect()
}

fn random_gram(seed: u64, rows: usize, r: usize) -> DenseMatrix<f64> {
    gram(&random_dense(&mut rng(seed), rows, r))
}

#[test]
fn sigma_max_matches_eigensolver() {
    for seed in 0..20 {
        let g = random_gram(seed, 40, 16);
        let top = eigenvalues(&g).into_iter().fold(f64::MIN, f64::max);
        // Power iteration stops on the Rayleigh quotient, so allow the more
        // generous iteration budget the step-size code would fall back to.
        let est = match sigma_max(&g, 2000, 1e-14) {
            Ok(v) => v,
            Err(blast_core::Error::NoConvergence { estimate }) => estimate,
            Err(e) => panic!("{e}"),
        };
        assert!((est - top).abs() <= 1e-6 * top, "seed {seed}: {est} vs {top}");
    }
}

#[test]
fn sigma_max_trivial_cases() {
    assert!((sigma_max(&DenseMatrix::<f64>::identity(5), POWER_ITERS, POWER_TOL).unwrap() - 1.0).abs() < 1e-15);
    let d = DenseMatrix::from_diagonal(&[1.0f64, 2.0, 3.0]);
    assert!((sigma_max(&d, POWER_ITERS, POWER_TOL).unwrap() - 3.0).abs() <= 3.0 * POWER_TOL);
    assert_eq!(sigma_max(&DenseMatrix::<f64>::zeros(4, 4), POWER_ITERS, POWER_TOL).unwrap(), 0.0);
}

#[test]
fn sigma_max_escapes_a_start_vector_orthogonal_to_the_top_eigenvector() {
    // The all-ones vector is an eigenvector for 1; the top eigenvalue 3 lives on (1, -1).
    let m = DenseMatrix::new(2, 2, vec![2.0f64, -1.0, -1.0, 2.0]).unwrap();
    assert!((sigma_max(&m, POWER_ITERS, POWER_TOL).unwrap() - 3.0).abs() < 1e-6);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn sigma_max_is_scale_equivariant(seed in any::<u64>(), c in 0.01f64..100.0) {
        let g = random_gram(seed, 12, 6);
        let base = sigma_max(&g, POWER_ITERS, POWER_TOL);
        let scaled = sigma_max(&g.scale(c), POWER_ITERS, POWER_TOL);
        if let (Ok(a), Ok(b)) = (base, scaled) {
            prop_assert!((b - c * a).abs() <= 1e-8 * c * a);
        }
    }

    #[test]
    fn spd_solve_multiplies_back(seed in any::<u64>(), r in 1usize..12, k in 1usize..5) {
        let mut g = rng(seed);
        let gm = random_gram(seed, r + 3, r);
        let rhs = random_dense(&mut g, r, k);
        let x = spd_solve(&gm, 0.1, &rhs).unwrap();
        let shifted = gm.add(&DenseMatrix::identity(r).scale(0.1)).unwrap();
        let back = shifted.matmul(&x).unwrap();
        prop_assert!(back.sub(&rhs).unwrap().frobenius_norm() <= 1e-10 * rhs.frobenius_norm());
    }

    #[test]
    fn hadamard_of_psd_is_psd(seed in any::<u64>(), r in 1usize..10) {
        // Rank-deficient factors make the inputs only semidefinite.
        let a = random_gram(seed, r / 2 + 1, r);
        let b = random_gram(seed.wrapping_add(1), r / 2 + 1, r);
        let smallest = eigenvalues(&hadamard(&a, &b).unwrap()).into_iter().fold(f64::MAX, f64::min);
        prop_assert!(smallest >= -1e-12 * a.max_abs().max(1.0) * b.max_abs().max(1.0));
    }

    #[test]
    fn gram_is_bitwise_symmetric(seed in any::<u64>(), rows in 1usize..20, r in 1usize..10) {
        let g = random_gram(seed, rows, r);
        prop_assert_eq!(&g, &g.transpose());
    }
}

#[test]
fn gram_and_hadamard_identities() {
    let q = orthonormal(&mut rng(3), 9, 4);
    assert!(gram(&q).sub(&DenseMatrix::identity(4)).unwrap().max_abs() < 1e-14);
    let m = random_dense(&mut rng(4), 4, 4);
    let h = hadamard(&DenseMatrix::identity(4), &m).unwrap();
    assert_eq!(h, DenseMatrix::from_diagonal(&m.diagonal()));
    assert!(hadamard(&m, &DenseMatrix::zeros(3, 4)).is_err());
}

#[test]
fn workspace_retries_with_larger_shift() {
    // Indefinite by 1.5: the first shift fails, 11 times it succeeds.
    let g = DenseMatrix::from_diagonal(&[1.0f64, -1.5]);
    let ws = SpdSolveWorkspace::new(&g, 0.2).unwrap();
    assert!((ws.delta() - 2.2).abs() < 1e-15);
    assert!(SpdSolveWorkspace::new(&DenseMatrix::from_diagonal(&[1.0f64, -5.0]), 0.2).is_err());
    assert!(is_positive_definite(&DenseMatrix::<f64>::identity(3)));
    assert!(!is_positive_definite(&g));
}
