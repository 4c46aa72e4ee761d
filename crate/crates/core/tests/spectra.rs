use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};
use proptest::prelude::*;
use rand::Rng;
use subspec::io::{read_matrix_market, write_matrix_market};
use subspec::rng::stream_rng;
use subspec::spectra::{
    assemble_sub_laplacian, bidegree_dimension, counting_function, counting_samples, eigen_smallest,
    eigen_smallest_with, eigenvalue_from_counting, harmonic_dimension_brute_force, interval_neumann, log_grid,
    sphere_spectrum, weyl_fit, BoxGrid, CsrMatrix, DiscreteOperator, EigenOptions,
};

fn h1_box(n: usize) -> BoxGrid {
    BoxGrid::heisenberg(1, vec![1.0, 1.0, 1.0], vec![n, n, n]).unwrap()
}

fn dense_pencil_eigenvalues(op: &DiscreteOperator) -> Vec<f64> {
    let a = op.stiffness.to_dense();
    let s: Vec<f64> = op.mass.iter().map(|m| 1.0 / m.sqrt()).collect();
    let b = DMatrix::from_fn(op.n(), op.n(), |i, j| s[i] * a[(i, j)] * s[j]);
    let mut ev: Vec<f64> = SymmetricEigen::new(b).eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

// weighted graph Laplacian on a random connected graph
fn random_operator(n: usize, seed: u64) -> DiscreteOperator {
    let mut rng = stream_rng(seed, 0);
    let mut trip = Vec::new();
    let add = |i: usize, j: usize, w: f64, trip: &mut Vec<(usize, usize, f64)>| {
        trip.push((i, j, -w));
        trip.push((j, i, -w));
        trip.push((i, i, w));
        trip.push((j, j, w));
    };
    for i in 1..n {
        add(i - 1, i, rng.gen_range(0.5..2.0), &mut trip);
        if i >= 3 && rng.gen_bool(0.5) {
            add(i - 3, i, rng.gen_range(0.1..1.0), &mut trip);
        }
    }
    let mass = (0..n).map(|_| rng.gen_range(0.5..1.5)).collect();
    DiscreteOperator::new(CsrMatrix::from_triplets(n, &trip).unwrap(), mass).unwrap()
}

#[test]
fn assembled_operator_is_symmetric_with_constant_kernel() {
    for grid in [h1_box(10), h1_box(10).with_b(vec![1.0]).unwrap().riemannian(true)] {
        let op = assemble_sub_laplacian(&grid).unwrap();
        let a = &op.stiffness;
        for i in 0..a.n {
            let (cols, vals) = a.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                assert_eq!(v, a.get(j, i));
            }
        }
        let ones = a.mul(&vec![1.0; a.n]);
        let scale = a.norm_inf();
        assert!(ones.iter().all(|v| v.abs() <= 1e-13 * scale), "{:?}", ones.iter().fold(0.0f64, |m, v| m.max(v.abs())));
        let s = eigen_smallest(&op, 6).unwrap();
        assert!(s.eigenvalues.iter().all(|&l| l >= -1e-10 * scale));
        assert!(s.eigenvalues[0].abs() < 1e-8 * scale);
        assert!(s.eigenvalues.windows(2).all(|w| w[0] <= w[1]));
    }
}

#[test]
fn degenerate_grids_rejected() {
    assert!(BoxGrid::heisenberg(1, vec![1.0, 1.0, 1.0], vec![4, 8, 8]).is_err());
    assert!(BoxGrid::heisenberg(1, vec![1.0, 0.0, 1.0], vec![8, 8, 8]).is_err());
}

#[test]
fn diagonal_problem_is_exact() {
    let n = 40;
    let trip: Vec<(usize, usize, f64)> = (0..n).map(|i| (i, i, i as f64)).collect();
    let op = DiscreteOperator::new(CsrMatrix::from_triplets(n, &trip).unwrap(), vec![1.0; n]).unwrap();
    let s = eigen_smallest(&op, 5).unwrap();
    for (j, l) in s.eigenvalues.iter().enumerate() {
        assert!((l - j as f64).abs() < 1e-10, "{l}");
    }
}

#[test]
fn agrees_with_dense_solver() {
    for (n, seed) in [(60, 1), (150, 2), (200, 3)] {
        let op = random_operator(n, seed);
        let dense = dense_pencil_eigenvalues(&op);
        let k = 12;
        let s = eigen_smallest(&op, k).unwrap();
        assert_eq!(s.k_converged, k);
        assert!(s.eigenvalues[0].abs() < 1e-10);
        for j in 1..k {
            let rel = (s.eigenvalues[j] / dense[j] - 1.0).abs();
            assert!(rel < 1e-8, "n {n} j {j}: {} vs {}", s.eigenvalues[j], dense[j]);
        }
    }
    let op = interval_neumann(180, 1.0).unwrap();
    let dense = dense_pencil_eigenvalues(&op);
    let s = eigen_smallest(&op, 8).unwrap();
    for j in 1..8 {
        assert!((s.eigenvalues[j] / dense[j] - 1.0).abs() < 1e-8);
    }
}

#[test]
fn interval_approaches_cosine_modes() {
    let mut prev = f64::INFINITY;
    for n in [50, 200, 800] {
        let s = eigen_smallest(&interval_neumann(n, 1.0).unwrap(), 3).unwrap();
        assert!(s.eigenvalues[0].abs() < 1e-8);
        let err = (1..3).map(|j| (s.eigenvalues[j] / (PI * j as f64).powi(2) - 1.0).abs()).fold(0.0, f64::max);
        assert!(err < prev);
        prev = err;
    }
    assert!(prev < 1e-4);
}

#[test]
fn second_eigenvalue_converges_under_refinement() {
    let l16 = eigen_smallest(&assemble_sub_laplacian(&h1_box(16)).unwrap(), 2).unwrap().eigenvalues[1];
    let l32 = eigen_smallest(&assemble_sub_laplacian(&h1_box(32)).unwrap(), 2).unwrap().eigenvalues[1];
    assert!((l16 / l32 - 1.0).abs() < 0.05, "{l16} vs {l32}");
}

#[test]
fn rayleigh_quotient_dominates_second_eigenvalue() {
    let op = assemble_sub_laplacian(&h1_box(10)).unwrap();
    let l2 = eigen_smallest(&op, 2).unwrap().eigenvalues[1];
    let vol: f64 = op.mass.iter().sum();
    let mut rng = stream_rng(8, 0);
    for _ in 0..50 {
        let mut u: Vec<f64> = (0..op.n()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mean = u.iter().zip(&op.mass).map(|(a, m)| a * m).sum::<f64>() / vol;
        u.iter_mut().for_each(|v| *v -= mean);
        assert!(op.rayleigh_quotient(&u) >= l2 * (1.0 - 1e-9));
    }
}

#[test]
fn residuals_are_reported() {
    let op = assemble_sub_laplacian(&h1_box(12)).unwrap();
    let opts = EigenOptions { tol: 1e-9, ..Default::default() };
    let s = eigen_smallest_with(&op, 10, &opts).unwrap();
    assert_eq!(s.residuals.len(), 10);
    assert!(s.residuals.iter().all(|r| *r <= 1e-9));
    assert!(eigen_smallest(&op, op.n()).is_err());
}

#[test]
fn sphere_examples() {
    let sp = sphere_spectrum(1, 10.0).unwrap();
    let find = |p, q| sp.iter().find(|e| e.p == p && e.q == q).unwrap();
    assert_eq!((find(0, 0).eigenvalue, find(0, 0).multiplicity), (0, 1));
    assert_eq!((find(1, 0).eigenvalue, find(1, 0).multiplicity), (2, 2));
    assert_eq!((find(1, 1).eigenvalue, find(1, 1).multiplicity), (8, 3));
    assert_eq!(harmonic_dimension_brute_force(4, 2).unwrap(), 9);
    assert_eq!(counting_function(&sp, 2.5), 5);
    assert_eq!(counting_function(&sp, 0.0), 0);
    assert_eq!(counting_function(&sp, 2.0), 1);
}

#[test]
fn sphere_identities() {
    for ell in 1..=3usize {
        for e in sphere_spectrum(ell, 120.0).unwrap() {
            let (p, q, l) = (e.p as i64, e.q as i64, ell as i64);
            assert_eq!(e.eigenvalue as i64 + (p - q).pow(2), (p + q) * (2 * l + p + q));
        }
    }
    for ell in 1..=2usize {
        for k in 0..=8u32 {
            let total: u64 = (0..=k).map(|p| bidegree_dimension(ell, p, k - p).unwrap()).sum();
            assert_eq!(total, harmonic_dimension_brute_force(2 * ell + 2, k).unwrap(), "ell {ell} k {k}");
        }
        for p in 0..6u32 {
            let binom: u64 = (1..=ell as u64).fold(1, |acc, i| acc * (p as u64 + i) / i);
            assert_eq!(bidegree_dimension(ell, p, 0).unwrap(), binom);
        }
    }
    for k in 0..10u32 {
        let total: u64 = (0..=k).map(|p| bidegree_dimension(1, p, k - p).unwrap()).sum();
        assert_eq!(total, (k as u64 + 1).pow(2));
    }
}

proptest! {
    #[test]
    fn counting_inverts(mut vals in prop::collection::vec(0.0..100.0f64, 1..40)) {
        vals.sort_by(f64::total_cmp);
        for (k, v) in vals.iter().enumerate() {
            prop_assert_eq!(eigenvalue_from_counting(&vals, k as u64 + 1), Some(*v));
        }
        prop_assert_eq!(eigenvalue_from_counting(&vals, vals.len() as u64 + 1), None);
        prop_assert_eq!(counting_function(&vals, 0.0), 0);
    }
}

#[test]
fn weyl_fit_examples() {
    let grid = log_grid(1.0, 1e4, 40).unwrap();
    let synth: Vec<(f64, f64)> = grid.iter().map(|&l| (l, l * l)).collect();
    assert!((weyl_fit(&synth).unwrap().slope - 2.0).abs() < 1e-6);

    let sp = sphere_spectrum(1, 400.0).unwrap();
    let fit = weyl_fit(&counting_samples(&sp, &log_grid(4.0, 400.0, 40).unwrap())).unwrap();
    assert!((1.85..=2.15).contains(&fit.slope), "{}", fit.slope);

    let exact: Vec<f64> = (0..2000).map(|j| (PI * j as f64).powi(2)).collect();
    let fit = weyl_fit(&counting_samples(&exact, &log_grid(10.0, 1e6, 40).unwrap())).unwrap();
    assert!((0.45..=0.55).contains(&fit.slope), "{}", fit.slope);

    let zeros: Vec<(f64, f64)> = grid.iter().map(|&l| (l, 0.0)).collect();
    assert!(weyl_fit(&zeros).is_err());
}

#[test]
fn matrix_market_roundtrip() {
    let op = random_operator(30, 4);
    let mut buf = Vec::new();
    write_matrix_market(&mut buf, &op.stiffness).unwrap();
    let back = read_matrix_market(&buf[..]).unwrap();
    assert_eq!(back.to_dense(), op.stiffness.to_dense());
}
