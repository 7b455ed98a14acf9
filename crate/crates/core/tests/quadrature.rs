mod common;

use std::f64::consts::PI;

use common::random_poly;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use ridgekit::polycore::{multi_indices_up_to, MultiIndex};
use ridgekit::quadrature::*;
use statrs::function::gamma::gamma;

/// Closed-form moment of `x^k` over `B^d` (or `S^(d-1)` when `sphere`).
fn moment(k: &MultiIndex, sphere: bool) -> f64 {
    if k.entries().iter().any(|e| e % 2 == 1) {
        return 0.0;
    }
    let d = k.dim() as f64;
    let top: f64 = k.entries().iter().map(|&e| gamma((e as f64 + 1.0) / 2.0)).product();
    let half = (k.order() as f64 + d) / 2.0;
    if sphere {
        2.0 * top / gamma(half)
    } else {
        top / gamma(half + 1.0)
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1.0)
}

#[test]
fn named_values() {
    let line = build_ball_rule(1, 5).unwrap();
    assert!(line.nodes.iter().all(|x| x[0].abs() <= 1.0));
    assert!(rel(line.integrate(&|_: &[f64]| 1.0).unwrap(), 2.0) < 1e-14);
    let disk = build_ball_rule(2, 4).unwrap();
    assert!(rel(disk.integrate(&|_: &[f64]| 1.0).unwrap(), PI) < 1e-12);
    let ball = build_ball_rule(3, 4).unwrap();
    assert!(rel(ball.integrate(&|x: &[f64]| x[0] * x[0]).unwrap(), 4.0 * PI / 15.0) < 1e-12);
    let circle = build_sphere_rule(1, 4).unwrap();
    assert!(rel(circle.integrate(&|_: &[f64]| 1.0).unwrap(), 2.0 * PI) < 1e-12);
    assert!(rel(circle.integrate(&|x: &[f64]| x[0] * x[0]).unwrap(), PI) < 1e-12);
    let s2 = build_sphere_rule(2, 3).unwrap();
    assert!(s2.integrate(&|x: &[f64]| x[0]).unwrap().abs() < 1e-14);
}

#[test]
fn inner_products_and_norms() {
    let disk = build_ball_rule(2, 6).unwrap();
    let one = |_: &[f64]| 1.0;
    let x1 = |x: &[f64]| x[0];
    let x2 = |x: &[f64]| x[1];
    assert!(rel(inner_product(&one, &one, &disk).unwrap(), PI) < 1e-12);
    assert!(inner_product(&x1, &x2, &disk).unwrap().abs() < 1e-14);
    assert!(rel(inner_product(&x1, &x1, &disk).unwrap(), PI / 4.0) < 1e-12);
    assert!(rel(lq_norm(&one, 1.0, &disk).unwrap(), PI) < 1e-12);
    assert_eq!(lq_norm(&one, f64::INFINITY, &disk).unwrap(), 1.0);
    assert!(rel(lq_norm(&x1, 2.0, &disk).unwrap(), (PI / 4.0).sqrt()) < 1e-12);
    assert!(lq_norm(&one, 0.5, &disk).is_err());
}

#[test]
fn exactness_against_closed_form_moments() {
    for d in 1..=4 {
        for e in [2, 5, 8] {
            let rule = build_ball_rule(d, e).unwrap();
            assert!(rule.weights.iter().all(|&w| w > 0.0));
            assert!(rule.nodes.iter().all(|x| x.iter().map(|v| v * v).sum::<f64>() <= 1.0 + 1e-12));
            assert!(rel(rule.weights.iter().sum(), ball_volume(d)) < 1e-12);
            for k in multi_indices_up_to(d, e) {
                let got = rule.integrate(&|x: &[f64]| k.eval_monomial(x)).unwrap();
                let want = moment(&k, false);
                assert!((got - want).abs() <= 1e-10 * want.abs().max(1e-3), "ball d={d} e={e} k={k:?}");
            }
        }
    }
    for k_dim in 1..=3 {
        let rule = build_sphere_rule(k_dim, 7).unwrap();
        assert!(rule.nodes.iter().all(|x| (x.iter().map(|v| v * v).sum::<f64>() - 1.0).abs() <= 1e-12));
        assert!(rel(rule.weights.iter().sum(), sphere_area(k_dim + 1)) < 1e-12);
        for k in multi_indices_up_to(k_dim + 1, 7) {
            let want = moment(&k, true);
            let got = rule.integrate(&|x: &[f64]| k.eval_monomial(x)).unwrap();
            assert!((got - want).abs() <= 1e-10 * want.abs().max(1e-3), "sphere k={k_dim}");
        }
    }
}

#[test]
fn refinement_is_stable() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for d in 1..=3 {
        let p = random_poly(d, 3, &mut rng);
        let q = random_poly(d, 3, &mut rng);
        let a = inner_product(&p, &q, &build_ball_rule(d, 6).unwrap()).unwrap();
        let b = inner_product(&p, &q, &build_ball_rule(d, 12).unwrap()).unwrap();
        assert!((a - b).abs() < 1e-12 * a.abs().max(1.0), "d={d}");
    }
}

#[test]
fn node_cap_is_an_error() {
    assert!(build_ball_rule(12, 60).is_err());
}

#[test]
fn sup_grid_stays_in_the_ball() {
    for d in 1..=3 {
        let g = sup_grid(Domain::Ball(d), 5000);
        assert!(g.len() > 1000);
        assert!(g.iter().all(|x| x.iter().map(|v| v * v).sum::<f64>() <= 1.0 + 1e-12));
    }
}

proptest! {
    #[test]
    fn gauss_legendre_integrates_polynomials(n in 1usize..20, e in 0usize..40) {
        prop_assume!(e < 2 * n);
        let (x, w) = gauss_legendre(n);
        let got: f64 = x.iter().zip(&w).map(|(t, w)| w * t.powi(e as i32)).sum();
        let want = if e % 2 == 1 { 0.0 } else { 2.0 / (e as f64 + 1.0) };
        prop_assert!((got - want).abs() < 1e-13);
    }
}
