mod common;

use num_bigint::BigInt;
use num_complex::{Complex, Complex64};
use num_rational::BigRational;
use num_traits::{One, Zero};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ridgekit::polycore::*;
use ridgekit::ridge_complex::*;
use ridgekit::verify::random_bipolynomial;

type G = Complex<BigRational>;

fn g(re: i64, im: i64) -> G {
    Complex::new(BigRational::from_integer(re.into()), BigRational::from_integer(im.into()))
}

fn mi(v: &[u32]) -> MultiIndex {
    MultiIndex(v.to_vec())
}

#[test]
fn derivative_examples() {
    let z = GaussianBiPolynomial::monomial(mi(&[1]), mi(&[0]), G::one()).unwrap();
    assert_eq!(wirtinger_derivative(&z, Wirtinger::Holomorphic, 0), GaussianBiPolynomial::constant(1, G::one()));
    assert!(wirtinger_derivative(&z, Wirtinger::Antiholomorphic, 0).is_zero());
    let zzbar = GaussianBiPolynomial::monomial(mi(&[1]), mi(&[1]), G::one()).unwrap();
    assert_eq!(apply_wirtinger(&zzbar, &mi(&[1]), &mi(&[1])).unwrap(), GaussianBiPolynomial::constant(1, G::one()));
    let zbar3 = GaussianBiPolynomial::monomial(mi(&[0]), mi(&[3]), G::one()).unwrap();
    assert!(apply_wirtinger(&zbar3, &mi(&[2]), &mi(&[0])).unwrap().is_zero());
}

#[test]
fn monomial_identity_examples() {
    assert!(verify_wirtinger_monomial_identity(&mi(&[2, 1]), &mi(&[0, 2]), &mi(&[2, 1]), &mi(&[0, 2])).unwrap());
    assert!(verify_wirtinger_monomial_identity(&mi(&[1, 0]), &mi(&[0, 0]), &mi(&[0, 1]), &mi(&[0, 0])).unwrap());
    assert!(verify_wirtinger_monomial_identity(&mi(&[1, 0]), &mi(&[0, 0]), &mi(&[2, 0]), &mi(&[0, 0])).is_err());
}

#[test]
fn power_identity_examples() {
    assert!(verify_power_identity(&[g(1, 0)], &mi(&[1]), &mi(&[1])).unwrap());
    // s = 0 is the conjugate of the holomorphic case
    let a = [g(2, -1), g(0, 3)];
    for l in multi_indices_up_to(2, 3) {
        assert!(verify_power_identity(&a, &mi(&[0, 0]), &l).unwrap());
    }
}

#[test]
fn direction_examples() {
    assert_eq!(sample_complex_directions(1, 2, 2, 1, 0).unwrap().vectors.len(), 1);
    let four = sample_complex_directions(2, 1, 1, 4, 0).unwrap();
    for v in &four.vectors {
        assert!((v.iter().map(|c| c.norm_sqr()).sum::<f64>() - 1.0).abs() < 1e-12);
    }
    assert!(sample_complex_directions(2, 1, 1, 3, 0).is_err());
}

#[test]
fn decomposition_examples() {
    let grid = complex_grid(2, 2000);
    let check = |p: &ComplexBiPolynomial, s: usize| {
        let n = dim_complex_bihomogeneous(2, s, s);
        let dirs = sample_complex_directions(2, s, s, n, 5).unwrap();
        let dec = complex_decompose(p, &dirs).unwrap();
        let dev = grid
            .iter()
            .map(|z| (dec.eval(z).unwrap() - p.eval(z).unwrap()).norm())
            .fold(0.0, f64::max);
        assert!(dev < 1e-10, "dev={dev}");
        dec
    };
    check(&BiPolynomial::constant(2, Complex64::new(0.5, -1.0)), 1);
    check(&BiPolynomial::monomial(mi(&[1, 0]), mi(&[0, 1]), Complex64::new(1.0, 0.0)).unwrap(), 1);
    let alpha = [Complex64::new(0.6, 0.0), Complex64::new(0.0, 0.8)];
    check(&bipower(&alpha, 1, 1), 1);
}

#[test]
fn random_decompositions() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for d in 2..=3 {
        for s in 1..=2 {
            let n = dim_complex_bihomogeneous(d, s, s);
            let dirs = sample_complex_directions(d, s, s, n, 1).unwrap();
            for _ in 0..3 {
                let p = random_bipolynomial(d, s, &mut rng);
                assert!(complex_decompose(&p, &dirs).unwrap().residual < 1e-8);
            }
        }
    }
}

#[test]
fn realify_examples() {
    let half = BigRational::new(1.into(), 2.into());
    let x1: RationalPolynomial = Polynomial::variable(2, 0);
    let r = realify(&x1).unwrap();
    assert_eq!(r.coefficient(&mi(&[1]), &mi(&[0])), Complex::new(half.clone(), BigRational::zero()));
    assert_eq!(r.coefficient(&mi(&[0]), &mi(&[1])), Complex::new(half.clone(), BigRational::zero()));
    let x2: RationalPolynomial = Polynomial::variable(2, 1);
    let r = realify(&x2).unwrap();
    assert_eq!(r.coefficient(&mi(&[1]), &mi(&[0])), Complex::new(BigRational::zero(), -half.clone()));
    assert_eq!(r.coefficient(&mi(&[0]), &mi(&[1])), Complex::new(BigRational::zero(), half));
    let sq = x1.pow(2).checked_add(&x2.pow(2)).unwrap();
    assert_eq!(realify(&sq).unwrap(), GaussianBiPolynomial::monomial(mi(&[1]), mi(&[1]), G::one()).unwrap());
}

#[test]
fn realify_commutes_with_evaluation() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let f = common::random_poly(4, 3, &mut rng);
    let r = realify(&f).unwrap();
    for _ in 0..1000 {
        let x: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let z = [Complex64::new(x[0], x[2]), Complex64::new(x[1], x[3])];
        let v = r.eval(&z).unwrap();
        let want = f.evaluate(&x);
        assert!((v.re - want).abs() < 1e-10 * (1.0 + want.abs()) && v.im.abs() < 1e-10);
    }
}

fn arb_gauss_poly(d: usize) -> impl Strategy<Value = GaussianBiPolynomial> {
    proptest::collection::vec(
        (
            proptest::collection::vec(0u32..3, d),
            proptest::collection::vec(0u32..3, d),
            -6i64..=6,
            -6i64..=6,
            1i64..=4,
        ),
        0..5,
    )
    .prop_map(move |terms| {
        let mut p = BiPolynomial::zero(d);
        for (k, l, re, im, den) in terms {
            let c = Complex::new(
                BigRational::new(BigInt::from(re), BigInt::from(den)),
                BigRational::new(BigInt::from(im), BigInt::from(den)),
            );
            p.add_term(MultiIndex(k), MultiIndex(l), c).unwrap();
        }
        p
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]
    #[test]
    fn product_rule(p in arb_gauss_poly(2), q in arb_gauss_poly(2), j in 0usize..2) {
        for kind in [Wirtinger::Holomorphic, Wirtinger::Antiholomorphic] {
            let lhs = wirtinger_derivative(&p.checked_mul(&q).unwrap(), kind, j);
            let rhs = wirtinger_derivative(&p, kind, j)
                .checked_mul(&q)
                .unwrap()
                .checked_add(&p.checked_mul(&wirtinger_derivative(&q, kind, j)).unwrap())
                .unwrap();
            prop_assert_eq!(lhs, rhs);
        }
    }

    #[test]
    fn conjugation_rule(p in arb_gauss_poly(2), j in 0usize..2) {
        let lhs = wirtinger_derivative(&p, Wirtinger::Holomorphic, j).conjugate();
        let rhs = wirtinger_derivative(&p.conjugate(), Wirtinger::Antiholomorphic, j);
        prop_assert_eq!(lhs, rhs);
    }
}
