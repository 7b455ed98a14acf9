//! Wirtinger calculus on bi-polynomials and complex ridge decompositions
//! `P(z) = sum_j P_j(alpha_j^T z)` with profiles in `w` and `conj(w)`.

use std::ops::Div;

use nalgebra::{DMatrix, DVector, SVD};
use num_complex::{Complex, Complex64};
use num_rational::BigRational;
use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_dim, Error, Result};
use crate::polycore::{
    dim_complex_bihomogeneous, multi_indices_of_order, BiPolynomial, Coefficient, ComplexBiPolynomial,
    ComplexCoefficient, GaussianBiPolynomial, MultiIndex, Polynomial,
};
use crate::quadrature::{sup_grid, Domain};
use crate::ridge_real::{MAX_ATTEMPTS, RANK_TOLERANCE, RESIDUAL_GRID_POINTS, RESIDUAL_TOLERANCE};

/// Which Wirtinger derivative to take.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Wirtinger {
    /// `d/dz_j`
    Holomorphic,
    /// `d/dconj(z_j)`
    Antiholomorphic,
}

/// Termwise Wirtinger derivative in coordinate `j`.
pub fn wirtinger_derivative<C: Coefficient>(p: &BiPolynomial<C>, kind: Wirtinger, j: usize) -> BiPolynomial<C> {
    let mut out = BiPolynomial::zero(p.dim());
    for ((k, l), c) in p.terms() {
        let (mut k, mut l) = (k.clone(), l.clone());
        let e = match kind {
            Wirtinger::Holomorphic => &mut k.0[j],
            Wirtinger::Antiholomorphic => &mut l.0[j],
        };
        if *e == 0 {
            continue;
        }
        let factor = C::from_i64(*e as i64);
        *e -= 1;
        out.add_term(k, l, c.clone() * factor).expect("same dimension");
    }
    out
}

/// `d^k dbar^l P`.
pub fn apply_wirtinger<C: Coefficient>(p: &BiPolynomial<C>, k: &MultiIndex, l: &MultiIndex) -> Result<BiPolynomial<C>> {
    ensure_dim(p.dim(), k.dim())?;
    ensure_dim(p.dim(), l.dim())?;
    let mut q = p.clone();
    for j in 0..p.dim() {
        for _ in 0..k.0[j] {
            q = wirtinger_derivative(&q, Wirtinger::Holomorphic, j);
        }
        for _ in 0..l.0[j] {
            q = wirtinger_derivative(&q, Wirtinger::Antiholomorphic, j);
        }
    }
    Ok(q)
}

fn exact(n: &num_bigint::BigUint) -> Complex<BigRational> {
    Complex::<BigRational>::from_biguint(n)
}

/// Checks `d^k dbar^l (z^k' conj(z)^l') = [k = k', l = l'] k! l!` exactly.
/// The orders must agree: `|k| = |k'|` and `|l| = |l'|`.
pub fn verify_wirtinger_monomial_identity(
    k: &MultiIndex,
    l: &MultiIndex,
    k2: &MultiIndex,
    l2: &MultiIndex,
) -> Result<bool> {
    let d = k.dim();
    for x in [l, k2, l2] {
        ensure_dim(d, x.dim())?;
    }
    if k.order() != k2.order() || l.order() != l2.order() {
        return Err(Error::InvalidArgument("orders of the two index pairs differ".into()));
    }
    let mono = GaussianBiPolynomial::monomial(k2.clone(), l2.clone(), Complex::one())?;
    let got = apply_wirtinger(&mono, k, l)?;
    let expected = if k == k2 && l == l2 {
        GaussianBiPolynomial::constant(d, exact(&(k.factorial() * l.factorial())))
    } else {
        GaussianBiPolynomial::zero(d)
    };
    Ok(got == expected)
}

/// `a^k` over Gaussian rationals.
fn power_product(a: &[Complex<BigRational>], k: &MultiIndex) -> Complex<BigRational> {
    let mut acc = Complex::one();
    for (aj, &e) in a.iter().zip(k.entries()) {
        for _ in 0..e {
            acc = acc * aj.clone();
        }
    }
    acc
}

/// `(a^T z)^s conj(a^T z)^t` as a bi-polynomial.
pub fn bipower<C: ComplexCoefficient>(a: &[C], s: u32, t: u32) -> BiPolynomial<C> {
    let lin = BiPolynomial::linear_holomorphic(a);
    lin.pow(s).checked_mul(&lin.conjugate().pow(t)).expect("same dimension")
}

/// Checks `d^k dbar^l ((a^T z)^s conj(a^T z)^t) = s! t! a^k conj(a)^l`
/// exactly, with `s = |k|` and `t = |l|`.
pub fn verify_power_identity(a: &[Complex<BigRational>], k: &MultiIndex, l: &MultiIndex) -> Result<bool> {
    let d = a.len();
    ensure_dim(d, k.dim())?;
    ensure_dim(d, l.dim())?;
    let (s, t) = (k.order(), l.order());
    let p = bipower(a, s as u32, t as u32);
    let got = apply_wirtinger(&p, k, l)?;
    let abar: Vec<Complex<BigRational>> = a.iter().map(|v| v.conj()).collect();
    let scale = exact(&(crate::polycore::factorial(s) * crate::polycore::factorial(t)));
    let value = scale * power_product(a, k) * power_product(&abar, l);
    Ok(got == GaussianBiPolynomial::constant(d, value))
}

/// Rewrites `f(x)` on `R^(2d)` in the variables `z_j = x_j + i x_(d+j)`:
/// `x_j = (z_j + conj z_j) / 2`, `x_(d+j) = (z_j - conj z_j) / (2i)`.
pub fn realify<R>(f: &Polynomial<R>) -> Result<BiPolynomial<Complex<R>>>
where
    R: Coefficient + Div<Output = R>,
    Complex<R>: ComplexCoefficient<Real = R>,
{
    if f.dim() % 2 != 0 {
        return Err(Error::InvalidArgument(format!(
            "realify needs an even number of real variables, got {}",
            f.dim()
        )));
    }
    let d = f.dim() / 2;
    let half = R::one() / (R::one() + R::one());
    let mut coords: Vec<BiPolynomial<Complex<R>>> = Vec::with_capacity(2 * d);
    for j in 0..d {
        let mut x = BiPolynomial::zero(d);
        let c = Complex::new(half.clone(), R::zero());
        x.add_term(MultiIndex::unit(d, j), MultiIndex::zero(d), c.clone())?;
        x.add_term(MultiIndex::zero(d), MultiIndex::unit(d, j), c)?;
        coords.push(x);
    }
    for j in 0..d {
        let mut y = BiPolynomial::zero(d);
        y.add_term(MultiIndex::unit(d, j), MultiIndex::zero(d), Complex::new(R::zero(), -half.clone()))?;
        y.add_term(MultiIndex::zero(d), MultiIndex::unit(d, j), Complex::new(R::zero(), half.clone()))?;
        coords.push(y);
    }
    let mut out = BiPolynomial::zero(d);
    for (k, c) in f.terms() {
        let mut term = BiPolynomial::constant(d, Complex::new(c.clone(), R::zero()));
        for (x, &e) in coords.iter().zip(k.entries()) {
            if e > 0 {
                term = term.checked_mul(&x.pow(e))?;
            }
        }
        out = out.checked_add(&term)?;
    }
    Ok(out)
}

/// Unit vectors in `C^d` whose bi-powers of order `(s, t)` span.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ComplexDirectionSet {
    pub d: usize,
    pub s: usize,
    pub t: usize,
    #[serde(with = "crate::polycore::re_im_rows")]
    pub vectors: Vec<Vec<Complex64>>,
    pub condition: f64,
    pub attempts: usize,
}

/// Rows indexed by `(k, l)` with `|k| = s`, `|l| = t`; column `j` holds the
/// coefficients of `(alpha_j^T z)^s conj(alpha_j^T z)^t`.
pub fn bipower_matrix(vectors: &[Vec<Complex64>], d: usize, s: usize, t: usize) -> (Vec<(MultiIndex, MultiIndex)>, DMatrix<Complex64>) {
    let ks = multi_indices_of_order(d, s);
    let ls = multi_indices_of_order(d, t);
    let rows: Vec<(MultiIndex, MultiIndex)> = ks
        .iter()
        .flat_map(|k| ls.iter().map(move |l| (k.clone(), l.clone())))
        .collect();
    let mut m = DMatrix::zeros(rows.len(), vectors.len());
    for (c, a) in vectors.iter().enumerate() {
        let p = bipower(a, s as u32, t as u32);
        for (r, (k, l)) in rows.iter().enumerate() {
            m[(r, c)] = p.coefficient(k, l);
        }
    }
    (rows, m)
}

/// `[Re M, -Im M; Im M, Re M]`.
fn realified(m: &DMatrix<Complex64>) -> DMatrix<f64> {
    let (r, c) = m.shape();
    DMatrix::from_fn(2 * r, 2 * c, |i, j| {
        let v = m[(i % r, j % c)];
        match (i < r, j < c) {
            (true, true) | (false, false) => v.re,
            (true, false) => -v.im,
            (false, true) => v.im,
        }
    })
}

fn certify(vectors: &[Vec<Complex64>], d: usize, s: usize, t: usize) -> (usize, f64) {
    let need = 2 * dim_complex_bihomogeneous(d, s, t);
    let (_, m) = bipower_matrix(vectors, d, s, t);
    let mut sv: Vec<f64> = realified(&m).singular_values().iter().cloned().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    let top = sv.first().cloned().unwrap_or(0.0);
    let rank = sv.iter().filter(|&&v| v > RANK_TOLERANCE * top).count();
    let cond = if rank >= need && need > 0 { top / sv[need - 1] } else { f64::INFINITY };
    (rank / 2, cond)
}

fn random_complex_unit<R: Rng>(rng: &mut R, d: usize) -> Vec<Complex64> {
    loop {
        let v: Vec<Complex64> = (0..d)
            .map(|_| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
            .collect();
        let n = v.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if n > 1e-8 {
            return v.into_iter().map(|a| a / n).collect();
        }
    }
}

/// Draws `n` random unit vectors of `C^d` and certifies the `(s, t)` span.
pub fn sample_complex_directions(d: usize, s: usize, t: usize, n: usize, seed: u64) -> Result<ComplexDirectionSet> {
    if d == 0 {
        return Err(Error::InvalidArgument("d must be positive".into()));
    }
    let need = dim_complex_bihomogeneous(d, s, t);
    if n < need {
        return Err(Error::InvalidArgument(format!(
            "{n} directions cannot span a space of dimension {need}"
        )));
    }
    let mut best = 0;
    for attempt in 0..MAX_ATTEMPTS {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(attempt as u64);
        let vectors: Vec<Vec<Complex64>> = (0..n).map(|_| random_complex_unit(&mut rng, d)).collect();
        let (rank, condition) = certify(&vectors, d, s, t);
        if rank >= need {
            return Ok(ComplexDirectionSet {
                d,
                s,
                t,
                vectors,
                condition,
                attempts: attempt + 1,
            });
        }
        best = best.max(rank);
    }
    Err(Error::SpanningFailed {
        attempts: MAX_ATTEMPTS,
        best_rank: best,
        needed: need,
    })
}

/// `z -> sum_j P_j(alpha_j^T z)`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ComplexRidgeDecomposition {
    pub d: usize,
    #[serde(with = "crate::polycore::re_im_rows")]
    pub alphas: Vec<Vec<Complex64>>,
    /// One-variable bi-polynomials in `w` and `conj(w)`.
    pub profiles: Vec<ComplexBiPolynomial>,
    pub residual: f64,
    pub poly_sup: f64,
}

impl ComplexRidgeDecomposition {
    pub fn eval(&self, z: &[Complex64]) -> Result<Complex64> {
        ensure_dim(self.d, z.len())?;
        let mut acc = Complex64::zero();
        for (a, p) in self.alphas.iter().zip(&self.profiles) {
            let w: Complex64 = a.iter().zip(z).map(|(x, y)| x * y).sum();
            acc += p.eval(&[w])?;
        }
        Ok(acc)
    }
}

/// Points of the unit ball of `C^d`, identified with `B^(2d)`.
pub fn complex_grid(d: usize, target: usize) -> Vec<Vec<Complex64>> {
    sup_grid(Domain::Ball(2 * d), target)
        .into_iter()
        .map(|x| (0..d).map(|j| Complex64::new(x[j], x[d + j])).collect())
        .collect()
}

/// Decomposes `P` with `max(|k|, |l|) <= s` over directions certified at `(s, s)`.
pub fn complex_decompose(p: &ComplexBiPolynomial, dirs: &ComplexDirectionSet) -> Result<ComplexRidgeDecomposition> {
    ensure_dim(dirs.d, p.dim())?;
    let d = dirs.d;
    let s = dirs.s.max(dirs.t);
    if let Some(deg) = p.bidegree_max() {
        if deg > s {
            return Err(Error::InvalidArgument(format!(
                "bidegree {deg} exceeds the certified order {s}"
            )));
        }
    }
    let n = dirs.vectors.len();
    let mut profiles: Vec<ComplexBiPolynomial> = vec![BiPolynomial::zero(1); n];
    for s1 in 0..=s {
        for t1 in 0..=s {
            let part = p.bihomogeneous_part(s1, t1);
            if part.is_zero() {
                continue;
            }
            let (rows, m) = bipower_matrix(&dirs.vectors, d, s1, t1);
            let q: Vec<Complex64> = rows.iter().map(|(k, l)| part.coefficient(k, l)).collect();
            let r = rows.len();
            let rhs = DVector::from_fn(2 * r, |i, _| if i < r { q[i].re } else { q[i - r].im });
            let svd = SVD::new(realified(&m), true, true);
            let top = svd.singular_values.iter().cloned().fold(0.0, f64::max);
            let sol = svd.solve(&rhs, 1e-13 * top).expect("both factors requested");
            for (j, prof) in profiles.iter_mut().enumerate() {
                let c = Complex64::new(sol[j], sol[n + j]);
                prof.add_term(MultiIndex(vec![s1 as u32]), MultiIndex(vec![t1 as u32]), c)?;
            }
        }
    }
    let mut dec = ComplexRidgeDecomposition {
        d,
        alphas: dirs.vectors.clone(),
        profiles,
        residual: 0.0,
        poly_sup: 0.0,
    };
    for z in complex_grid(d, RESIDUAL_GRID_POINTS) {
        let pv = p.eval(&z)?;
        dec.residual = dec.residual.max((pv - dec.eval(&z)?).norm());
        dec.poly_sup = dec.poly_sup.max(pv.norm());
    }
    let tolerance = RESIDUAL_TOLERANCE * (1.0 + dec.poly_sup);
    if !(dec.residual < tolerance) {
        return Err(Error::ResidualTooLarge {
            residual: dec.residual,
            tolerance,
        });
    }
    Ok(dec)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    #[test]
    fn single_derivative() {
        // d/dz (z^2 conj z) = 2 z conj z
        let p = GaussianBiPolynomial::monomial(MultiIndex(vec![2]), MultiIndex(vec![1]), Complex::one()).unwrap();
        let dp = wirtinger_derivative(&p, Wirtinger::Holomorphic, 0);
        assert_eq!(
            dp.coefficient(&MultiIndex(vec![1]), &MultiIndex(vec![1])),
            Complex::new(q(2, 1), q(0, 1))
        );
        let dbar = wirtinger_derivative(&p, Wirtinger::Antiholomorphic, 0);
        assert_eq!(dbar.coefficient(&MultiIndex(vec![2]), &MultiIndex(vec![0])), Complex::one());
    }

    #[test]
    fn monomial_identity_small() {
        let k = MultiIndex(vec![1, 1]);
        let l = MultiIndex(vec![0, 2]);
        assert!(verify_wirtinger_monomial_identity(&k, &l, &k, &l).unwrap());
        let k2 = MultiIndex(vec![2, 0]);
        assert!(verify_wirtinger_monomial_identity(&k, &l, &k2, &l).unwrap());
        assert!(verify_wirtinger_monomial_identity(&k, &l, &MultiIndex(vec![3, 0]), &l).is_err());
    }

    #[test]
    fn power_identity_small() {
        let a = vec![Complex::new(q(1, 2), q(-1, 3)), Complex::new(q(2, 1), q(0, 1))];
        assert!(verify_power_identity(&a, &MultiIndex(vec![1, 1]), &MultiIndex(vec![0, 1])).unwrap());
    }

    #[test]
    fn realify_odd_dimension() {
        let p = Polynomial::<f64>::variable(3, 0);
        assert!(realify(&p).is_err());
    }

    #[test]
    fn realify_square() {
        // x^2 + y^2 = z conj z
        let p = Polynomial::<f64>::from_terms(
            2,
            [(MultiIndex(vec![2, 0]), 1.0), (MultiIndex(vec![0, 2]), 1.0)],
        )
        .unwrap();
        let r = realify(&p).unwrap();
        assert_eq!(r.num_terms(), 1);
        assert_eq!(r.coefficient(&MultiIndex(vec![1]), &MultiIndex(vec![1])), Complex64::new(1.0, 0.0));
    }
}
