mod common;

use std::sync::Arc;

use common::random_poly;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use ridgekit::orthobasis::{build_basis, build_basis_with_order, OrthoBasis};
use ridgekit::polycore::{multi_indices_up_to, MultiIndex};
use ridgekit::quadrature::{build_ball_rule, default_exactness};
use ridgekit::quasiproj::*;

fn basis(d: usize, s: usize) -> Arc<OrthoBasis> {
    Arc::new(build_basis(d, s, &build_ball_rule(d, default_exactness(s)).unwrap()).unwrap())
}

#[test]
fn cutoff_properties() {
    let eta = Cutoff::default();
    for i in 0..=400 {
        let x = -2.5 + 5.0 * i as f64 / 400.0;
        let v = eta.eval(x);
        assert!((0.0..=1.0).contains(&v));
        if x.abs() <= 1.0 {
            assert_eq!(v, 1.0);
        }
        if x.abs() >= 2.0 {
            assert_eq!(v, 0.0);
        }
    }
    let mut last = 1.0;
    for i in 0..=100 {
        let v = smooth_step(1.0 + i as f64 / 100.0);
        assert!(v <= last);
        last = v;
    }
}

#[test]
fn multipliers_follow_the_cutoff() {
    let b = basis(2, 7);
    let proj = QuasiProjector::new(b.clone(), 4, Cutoff::default()).unwrap();
    for (i, &a) in proj.multipliers().iter().enumerate() {
        if b.degree(i) <= 4 {
            assert_eq!(a, 1.0);
        }
        if b.degree(i) >= 8 {
            assert_eq!(a, 0.0);
        }
    }
}

#[test]
fn apply_examples() {
    let b = basis(2, 7);
    let proj = QuasiProjector::new(b.clone(), 3, Cutoff::default()).unwrap();
    assert!(proj.apply(&|_: &[f64]| 0.0).unwrap().is_zero());
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let p = random_poly(2, 3, &mut rng);
    let image = proj.apply(&p).unwrap();
    assert!(image.checked_sub(&p).unwrap().max_abs_coefficient() < 1e-9);
    // a basis element of degree 2s lies beyond the cutoff
    let big = basis(2, 7);
    let top = big.indices_of_degree(6).start;
    let proj6 = QuasiProjector::new(big.clone(), 3, Cutoff::default()).unwrap();
    assert!(proj6.apply(big.poly(top)).unwrap().max_abs_coefficient() < 1e-9);
}

#[test]
fn image_degree_is_below_two_s() {
    let b = basis(2, 9);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let f = random_poly(2, 9, &mut rng);
    for s in 1..=5 {
        let proj = QuasiProjector::new(b.clone(), s, Cutoff::default()).unwrap();
        assert!(proj.apply(&f).unwrap().degree().unwrap_or(0) <= 2 * s - 1);
    }
}

#[test]
fn forward_difference_examples() {
    assert_eq!(forward_difference(&|_| 4.0, 3, 2.0), 0.0);
    assert_eq!(forward_difference(&|x| x, 1, 0.0), -1.0);
    assert_eq!(forward_difference(&|x| x * x, 2, 5.0), 2.0);
}

#[test]
fn cesaro_base_cases() {
    let b = basis(2, 6);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let f = random_poly(2, 6, &mut rng);
    let s0 = cesaro_mean(&b, &f, 0, 0).unwrap();
    assert!(s0.checked_sub(&degree_projection(&b, &f, 0).unwrap()).unwrap().max_abs_coefficient() < 1e-12);
    let mut sum = degree_projection(&b, &f, 0).unwrap();
    for j in 1..=3 {
        sum = sum.checked_add(&degree_projection(&b, &f, j).unwrap()).unwrap();
    }
    assert!(cesaro_mean(&b, &f, 3, 0).unwrap().checked_sub(&sum).unwrap().max_abs_coefficient() < 1e-10);
    let proj = QuasiProjector::new(basis(2, 1), 1, Cutoff::default()).unwrap();
    let p0 = proj.basis().poly(0).clone();
    assert_eq!(verify_cesaro_identity(&proj, &p0, 0).unwrap(), 0.0);
    assert_eq!(verify_cesaro_identity(&proj, &|_: &[f64]| 0.0, 2).unwrap(), 0.0);
}

#[test]
fn cesaro_identity_for_polynomials() {
    let b = basis(2, 7);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for s in 1..=4 {
        let proj = QuasiProjector::new(b.clone(), s, Cutoff::default()).unwrap();
        for sigma in 1..=2 {
            let f = random_poly(2, 2 * s - 1, &mut rng);
            assert!(verify_cesaro_identity(&proj, &f, sigma).unwrap() < 1e-8);
        }
    }
}

#[test]
fn norm_estimate_contract() {
    let b = basis(2, 7);
    let proj = QuasiProjector::new(b, 4, Cutoff::default()).unwrap();
    assert!(estimate_l1_operator_norm(&proj, 0, 1).is_err());
    let short = estimate_l1_operator_norm(&proj, 6, 9).unwrap();
    let long = estimate_l1_operator_norm(&proj, 12, 9).unwrap();
    assert_eq!(&long.ratios[..6], &short.ratios[..]);
    assert!(long.estimate >= short.estimate);
}

#[test]
fn fixed_polynomial_has_ratio_one() {
    let b = basis(2, 5);
    let proj = QuasiProjector::new(b, 3, Cutoff::default()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let p = random_poly(2, 3, &mut rng);
    assert!(proj.fixed_point_residual(&p).unwrap() < 1e-10);
}

#[test]
fn projector_does_not_depend_on_basis_order() {
    let d = 2;
    let rule = build_ball_rule(d, default_exactness(7)).unwrap();
    let mut order: Vec<MultiIndex> = multi_indices_up_to(d, 7);
    order.sort_by(|a, b| a.order().cmp(&b.order()).then(b.cmp(a)));
    let a = Arc::new(build_basis(d, 7, &rule).unwrap());
    let b = Arc::new(build_basis_with_order(d, 7, &rule, order).unwrap());
    let f = |x: &[f64]| (x[0] - 0.3 * x[1]).exp();
    for s in 1..=4 {
        let pa = QuasiProjector::new(a.clone(), s, Cutoff::default()).unwrap().apply(&f).unwrap();
        let pb = QuasiProjector::new(b.clone(), s, Cutoff::default()).unwrap().apply(&f).unwrap();
        assert!(pa.checked_sub(&pb).unwrap().max_abs_coefficient() < 1e-9, "s={s}");
    }
}

#[test]
fn custom_cutoff_changes_only_the_taper() {
    let b = basis(1, 5);
    let linear = Cutoff::custom("linear", |x: f64| (2.0 - x.abs()).clamp(0.0, 1.0));
    assert_eq!(linear.name(), "linear");
    let proj = QuasiProjector::new(b, 3, linear).unwrap();
    let p = ridgekit::polycore::Polynomial::monomial(MultiIndex(vec![3]), 1.0);
    assert!(proj.fixed_point_residual(&p).unwrap() < 1e-10);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]
    #[test]
    fn linearity(alpha in -3.0f64..3.0, beta in -3.0f64..3.0, seed in 0u64..1000) {
        let b = basis(2, 5);
        let proj = QuasiProjector::new(b, 3, Cutoff::default()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = random_poly(2, 5, &mut rng);
        let g = random_poly(2, 5, &mut rng);
        let combo = f.scale(&alpha).checked_add(&g.scale(&beta)).unwrap();
        let lhs = proj.apply(&combo).unwrap();
        let rhs = proj.apply(&f).unwrap().scale(&alpha).checked_add(&proj.apply(&g).unwrap().scale(&beta)).unwrap();
        prop_assert!(lhs.checked_sub(&rhs).unwrap().max_abs_coefficient() < 1e-10 * (1.0 + lhs.l1_coefficient_norm()));
    }
}
