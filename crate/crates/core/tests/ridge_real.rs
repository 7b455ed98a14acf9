mod common;

use common::{max_abs, random_poly};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use ridgekit::polycore::{dim_homogeneous, MultiIndex, Polynomial};
use ridgekit::quadrature::{sup_grid, Domain};
use ridgekit::ridge_real::*;

#[test]
fn direction_examples() {
    let one = sample_spanning_directions(1, 7, 1, 0).unwrap();
    assert_eq!(one.vectors[0][0].abs(), 1.0);
    let lin = sample_spanning_directions(2, 1, 2, 0).unwrap();
    assert_eq!(homogeneous_power_rank(&lin.vectors, 2, 1), 2);
    let quad = sample_spanning_directions(2, 2, 3, 0).unwrap();
    assert_eq!(homogeneous_power_rank(&quad.vectors, 2, 2), 3);
    assert!(sample_spanning_directions(2, 2, 2, 0).is_err());
}

#[test]
fn parallel_directions_do_not_span() {
    let v = vec![vec![1.0, 0.0], vec![-1.0, 0.0], vec![0.0, 1.0]];
    assert_eq!(homogeneous_power_rank(&v, 2, 2), 2);
    assert!(matches!(
        DirectionSet::from_vectors(2, 2, v),
        Err(ridgekit::Error::SpanningFailed { best_rank: 2, needed: 3, .. })
    ));
}

#[test]
fn block_examples() {
    let dirs = DirectionSet::from_vectors(2, 1, vec![vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
    let blocks = build_block_matrices(&dirs, 3, 2).unwrap();
    assert_eq!(blocks[0], vec![vec![1.0, 0.0, 0.0], vec![0.0, 0.0, 1.0]]);
    let b1 = build_block_matrices(&dirs, 2, 1).unwrap();
    assert_eq!(b1[1], vec![vec![0.0, 1.0]]);
}

#[test]
fn decomposition_examples() {
    let c = Polynomial::constant(3, 2.5);
    let dirs = sample_spanning_directions(2, 0, 1, 4).unwrap();
    let dec = decompose(&c, &dirs, 3, 2).unwrap();
    assert!(dec.diagnostics.residual < 1e-14);

    let x1x2 = Polynomial::monomial(MultiIndex(vec![1, 1]), 1.0);
    let dirs = sample_spanning_directions(2, 2, 3, 1).unwrap();
    let dec = decompose(&x1x2, &dirs, 2, 1).unwrap();
    assert!(dec.diagnostics.residual < 1e-10);
    assert_eq!(dec.blocks.len(), 3);
}

#[test]
fn ridge_input_is_reproduced() {
    // Q(A1 x) with A1 = [0.6, 0.8] and Q(t) = t^3 - t
    let q = Polynomial::from_terms(1, [(MultiIndex(vec![3]), 1.0), (MultiIndex(vec![1]), -1.0)]).unwrap();
    let p = q.compose_linear(&[vec![0.6, 0.8]], &[0.0]).unwrap();
    let dirs = DirectionSet::from_vectors(
        2,
        3,
        vec![vec![0.6, 0.8], vec![1.0, 0.0], vec![0.0, 1.0], vec![0.6, -0.8]],
    )
    .unwrap();
    let dec = decompose(&p, &dirs, 2, 1).unwrap();
    assert!(dec.diagnostics.residual < 1e-12);
}

#[test]
fn exactness_and_minimality_sample() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for d in 2..=4 {
        for ell in 1..d {
            for s in 1..=4 {
                let m = d - ell + 1;
                let n = dim_homogeneous(m, s);
                let dirs = sample_spanning_directions(m, s, n, 99).unwrap();
                for _ in 0..5 {
                    let p = random_poly(d, s, &mut rng);
                    let dec = decompose(&p, &dirs, d, ell).unwrap();
                    assert!(dec.diagnostics.residual < 1e-8, "d={d} ell={ell} s={s}");
                    let back = dec.to_polynomial().unwrap();
                    assert!(back.checked_sub(&p).unwrap().max_abs_coefficient() < 1e-9);
                }
                assert!(homogeneous_power_rank(&dirs.vectors[..n - 1], m, s) < n);
            }
        }
    }
}

#[test]
fn same_seed_same_everything() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let p = random_poly(3, 3, &mut rng);
    let a = sample_spanning_directions(2, 3, 4, 17).unwrap();
    let b = sample_spanning_directions(2, 3, 4, 17).unwrap();
    assert_eq!(a.vectors, b.vectors);
    let da = decompose(&p, &a, 3, 2).unwrap();
    let db = decompose(&p, &b, 3, 2).unwrap();
    assert_eq!(da.blocks, db.blocks);
}

#[test]
fn budget_to_degree() {
    assert_eq!(degree_for_budget(3, 2, 4).unwrap(), 3);
    assert_eq!(degree_for_budget(3, 1, 15).unwrap(), 4);
    assert_eq!(degree_for_budget(3, 1, 14).unwrap(), 3);
    assert!(degree_for_budget(3, 3, 10).is_err());
}

#[test]
fn orthonormalize_examples() {
    let p = Polynomial::from_terms(2, [(MultiIndex(vec![1, 1]), 1.0), (MultiIndex(vec![2, 0]), -0.5)]).unwrap();
    let a = vec![vec![2.0, 0.0, 0.0], vec![0.0, 2.0, 0.0]];
    let (a2, p2) = orthonormalize_rows(&a, &p).unwrap();
    for row in &a2 {
        assert!((row.iter().map(|v| v * v).sum::<f64>() - 1.0).abs() < 1e-12);
    }
    let zero = vec![vec![0.0; 3], vec![0.0; 3]];
    let (_, pz) = orthonormalize_rows(&zero, &p).unwrap();
    assert!(pz.degree().unwrap_or(0) == 0);
    for x in sup_grid(Domain::Ball(3), 1000) {
        let ax: Vec<f64> = a.iter().map(|r| r.iter().zip(&x).map(|(u, v)| u * v).sum()).collect();
        let a2x: Vec<f64> = a2.iter().map(|r| r.iter().zip(&x).map(|(u, v)| u * v).sum()).collect();
        assert!((p.evaluate(&ax) - p2.evaluate(&a2x)).abs() < 1e-10);
    }
}

#[test]
fn json_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let p = random_poly(3, 2, &mut rng);
    let dirs = sample_spanning_directions(2, 2, 3, 0).unwrap();
    let dec = decompose(&p, &dirs, 3, 2).unwrap();
    let back: RidgeDecomposition = serde_json::from_str(&serde_json::to_string(&dec).unwrap()).unwrap();
    assert_eq!(back.blocks, dec.blocks);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]
    #[test]
    fn row_orthonormalization_keeps_values(
        entries in proptest::collection::vec(-2.0f64..2.0, 6),
        seed in 0u64..500,
    ) {
        let a = vec![entries[..3].to_vec(), entries[3..].to_vec()];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = random_poly(2, 3, &mut rng);
        let (a2, p2) = orthonormalize_rows(&a, &p).unwrap();
        let grid = sup_grid(Domain::Ball(3), 1000);
        let dev = max_abs(grid.iter().map(|x| {
            let ax: Vec<f64> = a.iter().map(|r| r.iter().zip(x).map(|(u, v)| u * v).sum()).collect();
            let a2x: Vec<f64> = a2.iter().map(|r| r.iter().zip(x).map(|(u, v)| u * v).sum()).collect();
            p.evaluate(&ax) - p2.evaluate(&a2x)
        }));
        let scale = 1.0 + max_abs(grid.iter().map(|x| {
            let ax: Vec<f64> = a.iter().map(|r| r.iter().zip(x).map(|(u, v)| u * v).sum()).collect();
            p.evaluate(&ax)
        }));
        prop_assert!(dev < 1e-10 * scale);
    }

    #[test]
    fn normalized_blocks_have_unit_norm(seed in 0u64..500) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = random_poly(3, 3, &mut rng);
        let dirs = sample_spanning_directions(3, 3, 10, seed).unwrap();
        let dec = decompose(&p, &dirs, 3, 1).unwrap().normalized().unwrap();
        for b in &dec.blocks {
            prop_assert!(b.operator_norm() <= 1.0 + 1e-12);
        }
        let x = [0.1, -0.2, 0.3];
        prop_assert!((eval_ridge(&dec, &x).unwrap() - p.evaluate(&x)).abs() < 1e-9);
    }
}
