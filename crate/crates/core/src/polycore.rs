//! Sparse multivariate polynomials keyed by multi-indices.
//!
//! Two families share one implementation: [`Polynomial`] over `x^k` and
//! [`BiPolynomial`] over `z^k conj(z)^l`. Coefficients are generic, so the
//! same code runs in `f64`, exact rationals, and their complex versions.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_bigint::BigUint;
use num_complex::{Complex, Complex64};
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{ensure_dim, Error, Result};

/// Float coefficients at or below this magnitude are dropped.
pub const FLOAT_PRUNE: f64 = 1e-300;

/// Ring of coefficients a polynomial can carry.
pub trait Coefficient:
    Clone
    + fmt::Debug
    + PartialEq
    + Send
    + Sync
    + Zero
    + One
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Neg<Output = Self>
    + 'static
{
    /// True when the coefficient should be pruned from a sparse map.
    fn is_negligible(&self) -> bool;
    fn from_i64(n: i64) -> Self;
    fn from_biguint(n: &BigUint) -> Self;
}

/// Coefficients with a complex conjugation.
pub trait ComplexCoefficient: Coefficient {
    type Real: Coefficient;
    fn conj(&self) -> Self;
    fn from_parts(re: Self::Real, im: Self::Real) -> Self;
    fn i() -> Self;
}

impl Coefficient for f64 {
    fn is_negligible(&self) -> bool {
        self.abs() <= FLOAT_PRUNE
    }
    fn from_i64(n: i64) -> Self {
        n as f64
    }
    fn from_biguint(n: &BigUint) -> Self {
        n.to_f64().unwrap_or(f64::INFINITY)
    }
}

impl Coefficient for BigRational {
    fn is_negligible(&self) -> bool {
        self.is_zero()
    }
    fn from_i64(n: i64) -> Self {
        BigRational::from_integer(n.into())
    }
    fn from_biguint(n: &BigUint) -> Self {
        BigRational::from_integer(n.clone().into())
    }
}

impl Coefficient for Complex64 {
    fn is_negligible(&self) -> bool {
        self.norm() <= FLOAT_PRUNE
    }
    fn from_i64(n: i64) -> Self {
        Complex64::new(n as f64, 0.0)
    }
    fn from_biguint(n: &BigUint) -> Self {
        Complex64::new(f64::from_biguint(n), 0.0)
    }
}

impl Coefficient for Complex<BigRational> {
    fn is_negligible(&self) -> bool {
        self.re.is_zero() && self.im.is_zero()
    }
    fn from_i64(n: i64) -> Self {
        Complex::new(BigRational::from_i64(n), BigRational::zero())
    }
    fn from_biguint(n: &BigUint) -> Self {
        Complex::new(BigRational::from_biguint(n), BigRational::zero())
    }
}

impl ComplexCoefficient for Complex64 {
    type Real = f64;
    fn conj(&self) -> Self {
        Complex::conj(self)
    }
    fn from_parts(re: f64, im: f64) -> Self {
        Complex64::new(re, im)
    }
    fn i() -> Self {
        Complex64::i()
    }
}

impl ComplexCoefficient for Complex<BigRational> {
    type Real = BigRational;
    fn conj(&self) -> Self {
        Complex::conj(self)
    }
    fn from_parts(re: BigRational, im: BigRational) -> Self {
        Complex::new(re, im)
    }
    fn i() -> Self {
        Complex::new(BigRational::zero(), BigRational::one())
    }
}

/// Exponent vector `k = (k_1, ..., k_d)`.
///
/// Ordering is graded: lower order first, then larger leading exponents
/// first, so in two variables the order runs `1, x1, x2, x1^2, x1 x2, x2^2`.
#[derive(Clone, PartialEq, Eq, Hash, Debug, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MultiIndex(pub Vec<u32>);

impl MultiIndex {
    pub fn new(entries: Vec<u32>) -> Self {
        MultiIndex(entries)
    }

    pub fn zero(dim: usize) -> Self {
        MultiIndex(vec![0; dim])
    }

    /// The unit index `e_j`.
    pub fn unit(dim: usize, j: usize) -> Self {
        let mut v = vec![0; dim];
        v[j] = 1;
        MultiIndex(v)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    /// `|k| = k_1 + ... + k_d`.
    pub fn order(&self) -> usize {
        self.0.iter().map(|&e| e as usize).sum()
    }

    /// `k! = k_1! ... k_d!`, exact.
    pub fn factorial(&self) -> BigUint {
        self.0
            .iter()
            .fold(BigUint::one(), |acc, &e| acc * factorial(e as usize))
    }

    pub fn entries(&self) -> &[u32] {
        &self.0
    }

    pub fn checked_add(&self, other: &MultiIndex) -> Result<MultiIndex> {
        ensure_dim(self.dim(), other.dim())?;
        Ok(MultiIndex(
            self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect(),
        ))
    }

    /// Concatenation `(k, k')`.
    pub fn concat(&self, other: &MultiIndex) -> MultiIndex {
        let mut v = self.0.clone();
        v.extend_from_slice(&other.0);
        MultiIndex(v)
    }

    /// `x^k` for a point `x`.
    pub fn eval_monomial(&self, x: &[f64]) -> f64 {
        self.0
            .iter()
            .zip(x)
            .map(|(&e, &xi)| xi.powi(e as i32))
            .product()
    }
}

impl PartialOrd for MultiIndex {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for MultiIndex {
    fn cmp(&self, other: &Self) -> Ordering {
        self.order()
            .cmp(&other.order())
            .then_with(|| other.0.cmp(&self.0))
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, e) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{e}")?;
        }
        write!(f, ")")
    }
}

pub fn factorial(n: usize) -> BigUint {
    (1..=n).fold(BigUint::one(), |acc, i| acc * BigUint::from(i))
}

/// Binomial coefficient as a machine integer. Panics on overflow.
pub fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    usize::try_from(acc).expect("binomial coefficient overflows usize")
}

/// Dimension of homogeneous polynomials of degree `s` in `m` variables.
pub fn dim_homogeneous(m: usize, s: usize) -> usize {
    assert!(m >= 1, "dim_homogeneous needs at least one variable");
    binomial(s + m - 1, m - 1)
}

/// Dimension of the span of `z^k conj(z)^l` with `|k| = s`, `|l| = t` over `C^d`.
pub fn dim_complex_bihomogeneous(d: usize, s: usize, t: usize) -> usize {
    dim_homogeneous(d, s) * dim_homogeneous(d, t)
}

/// Multi-indices of exactly the given order, in graded order.
pub fn multi_indices_of_order(dim: usize, order: usize) -> Vec<MultiIndex> {
    fn rec(dim: usize, remaining: usize, prefix: &mut Vec<u32>, out: &mut Vec<MultiIndex>) {
        if prefix.len() + 1 == dim {
            prefix.push(remaining as u32);
            out.push(MultiIndex(prefix.clone()));
            prefix.pop();
            return;
        }
        for e in (0..=remaining).rev() {
            prefix.push(e as u32);
            rec(dim, remaining - e, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    if dim == 0 {
        if order == 0 {
            out.push(MultiIndex(Vec::new()));
        }
        return out;
    }
    rec(dim, order, &mut Vec::with_capacity(dim), &mut out);
    out
}

/// Multi-indices of order at most `max_order`, in graded order.
pub fn multi_indices_up_to(dim: usize, max_order: usize) -> Vec<MultiIndex> {
    (0..=max_order)
        .flat_map(|s| multi_indices_of_order(dim, s))
        .collect()
}

fn insert_term<K: Ord, C: Coefficient>(terms: &mut BTreeMap<K, C>, key: K, c: C) {
    match terms.get_mut(&key) {
        Some(existing) => {
            let sum = existing.clone() + c;
            if sum.is_negligible() {
                terms.remove(&key);
            } else {
                *existing = sum;
            }
        }
        None => {
            if !c.is_negligible() {
                terms.insert(key, c);
            }
        }
    }
}

/// Powers `x_j^e` for `e <= max_exp`, one row per coordinate.
fn power_table<C: Coefficient>(x: &[C], max_exp: &[u32]) -> Vec<Vec<C>> {
    x.iter()
        .zip(max_exp)
        .map(|(xi, &m)| {
            let mut row = Vec::with_capacity(m as usize + 1);
            row.push(C::one());
            for e in 1..=m as usize {
                let next = row[e - 1].clone() * xi.clone();
                row.push(next);
            }
            row
        })
        .collect()
}

/// A polynomial `sum_k c_k x^k` in `dim` real variables.
#[derive(Clone, Debug, PartialEq)]
pub struct Polynomial<C> {
    dim: usize,
    terms: BTreeMap<MultiIndex, C>,
}

/// Float polynomial, the workhorse type.
pub type MultiIndexPolynomial = Polynomial<f64>;
/// Polynomial with exact rational coefficients.
pub type RationalPolynomial = Polynomial<BigRational>;

impl<C: Coefficient> Polynomial<C> {
    pub fn zero(dim: usize) -> Self {
        Polynomial {
            dim,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(dim: usize, c: C) -> Self {
        let mut p = Self::zero(dim);
        insert_term(&mut p.terms, MultiIndex::zero(dim), c);
        p
    }

    pub fn monomial(k: MultiIndex, c: C) -> Self {
        let mut p = Self::zero(k.dim());
        insert_term(&mut p.terms, k, c);
        p
    }

    /// The coordinate function `x_j`.
    pub fn variable(dim: usize, j: usize) -> Self {
        Self::monomial(MultiIndex::unit(dim, j), C::one())
    }

    /// `sum_j a_j x_j + b`.
    pub fn linear(a: &[C], b: C) -> Self {
        let dim = a.len();
        let mut p = Self::constant(dim, b);
        for (j, aj) in a.iter().enumerate() {
            insert_term(&mut p.terms, MultiIndex::unit(dim, j), aj.clone());
        }
        p
    }

    /// Builds from `(k, c)` pairs; repeated indices are summed.
    pub fn from_terms<I: IntoIterator<Item = (MultiIndex, C)>>(dim: usize, terms: I) -> Result<Self> {
        let mut p = Self::zero(dim);
        for (k, c) in terms {
            ensure_dim(dim, k.dim())?;
            insert_term(&mut p.terms, k, c);
        }
        Ok(p)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn terms(&self) -> impl Iterator<Item = (&MultiIndex, &C)> {
        self.terms.iter()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn coefficient(&self, k: &MultiIndex) -> C {
        self.terms.get(k).cloned().unwrap_or_else(C::zero)
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Total degree; `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.terms.keys().map(|k| k.order()).max()
    }

    pub fn add_term(&mut self, k: MultiIndex, c: C) -> Result<()> {
        ensure_dim(self.dim, k.dim())?;
        insert_term(&mut self.terms, k, c);
        Ok(())
    }

    pub fn scale(&self, c: &C) -> Self {
        let mut p = Self::zero(self.dim);
        for (k, v) in &self.terms {
            insert_term(&mut p.terms, k.clone(), v.clone() * c.clone());
        }
        p
    }

    pub fn checked_add(&self, other: &Self) -> Result<Self> {
        ensure_dim(self.dim, other.dim)?;
        let mut p = self.clone();
        for (k, v) in &other.terms {
            insert_term(&mut p.terms, k.clone(), v.clone());
        }
        Ok(p)
    }

    pub fn checked_sub(&self, other: &Self) -> Result<Self> {
        ensure_dim(self.dim, other.dim)?;
        let mut p = self.clone();
        for (k, v) in &other.terms {
            insert_term(&mut p.terms, k.clone(), -v.clone());
        }
        Ok(p)
    }

    pub fn checked_mul(&self, other: &Self) -> Result<Self> {
        ensure_dim(self.dim, other.dim)?;
        let mut p = Self::zero(self.dim);
        for (k1, v1) in &self.terms {
            for (k2, v2) in &other.terms {
                let k = MultiIndex(k1.0.iter().zip(&k2.0).map(|(a, b)| a + b).collect());
                insert_term(&mut p.terms, k, v1.clone() * v2.clone());
            }
        }
        Ok(p)
    }

    pub fn pow(&self, e: u32) -> Self {
        let mut acc = Self::constant(self.dim, C::one());
        for _ in 0..e {
            acc = &acc * self;
        }
        acc
    }

    /// Terms of exactly the given total degree.
    pub fn homogeneous_part(&self, degree: usize) -> Self {
        Polynomial {
            dim: self.dim,
            terms: self
                .terms
                .iter()
                .filter(|(k, _)| k.order() == degree)
                .map(|(k, v)| (k.clone(), v.clone()))
                .collect(),
        }
    }

    pub fn map_coefficients<D: Coefficient, F: Fn(&C) -> D>(&self, f: F) -> Polynomial<D> {
        let mut p = Polynomial::zero(self.dim);
        for (k, v) in &self.terms {
            insert_term(&mut p.terms, k.clone(), f(v));
        }
        p
    }

    /// Evaluation at a point with entries in the coefficient ring.
    pub fn eval(&self, x: &[C]) -> Result<C> {
        ensure_dim(self.dim, x.len())?;
        Ok(self.eval_unchecked(x))
    }

    fn eval_unchecked(&self, x: &[C]) -> C {
        let mut max_exp = vec![0u32; self.dim];
        for k in self.terms.keys() {
            for (m, &e) in max_exp.iter_mut().zip(&k.0) {
                *m = (*m).max(e);
            }
        }
        let table = power_table(x, &max_exp);
        let mut acc = C::zero();
        for (k, c) in &self.terms {
            let mut term = c.clone();
            for (j, &e) in k.0.iter().enumerate() {
                if e > 0 {
                    term = term * table[j][e as usize].clone();
                }
            }
            acc = acc + term;
        }
        acc
    }

    /// `x -> P(A x + b)` where `A` has `self.dim()` rows of length `d`.
    pub fn compose_linear(&self, a: &[Vec<C>], b: &[C]) -> Result<Self> {
        ensure_dim(self.dim, a.len())?;
        ensure_dim(self.dim, b.len())?;
        let d = a.first().map(|r| r.len()).unwrap_or(0);
        for row in a {
            ensure_dim(d, row.len())?;
        }
        let mut max_exp = vec![0u32; self.dim];
        for k in self.terms.keys() {
            for (m, &e) in max_exp.iter_mut().zip(&k.0) {
                *m = (*m).max(e);
            }
        }
        let forms: Vec<Polynomial<C>> = a
            .iter()
            .zip(b)
            .map(|(row, bi)| Polynomial::linear(row, bi.clone()))
            .collect();
        let powers: Vec<Vec<Polynomial<C>>> = forms
            .iter()
            .zip(&max_exp)
            .map(|(f, &m)| {
                let mut row = vec![Polynomial::constant(d, C::one())];
                for e in 1..=m as usize {
                    let next = &row[e - 1] * f;
                    row.push(next);
                }
                row
            })
            .collect();
        let mut out = Polynomial::zero(d);
        for (k, c) in &self.terms {
            let mut term = Polynomial::constant(d, c.clone());
            for (i, &e) in k.0.iter().enumerate() {
                if e > 0 {
                    term = &term * &powers[i][e as usize];
                }
            }
            for (kk, v) in term.terms {
                insert_term(&mut out.terms, kk, v);
            }
        }
        Ok(out)
    }

    /// `d/dx_j`.
    pub fn partial_derivative(&self, j: usize) -> Self {
        let mut p = Self::zero(self.dim);
        for (k, c) in &self.terms {
            let e = k.0[j];
            if e > 0 {
                let mut kk = k.clone();
                kk.0[j] -= 1;
                insert_term(&mut p.terms, kk, c.clone() * C::from_i64(e as i64));
            }
        }
        p
    }
}

impl Polynomial<f64> {
    /// Fast float evaluation; panics if `x` has the wrong length.
    pub fn evaluate(&self, x: &[f64]) -> f64 {
        assert_eq!(x.len(), self.dim, "point has wrong dimension");
        let mut acc = 0.0;
        for (k, c) in &self.terms {
            let mut term = *c;
            for (&e, &xi) in k.0.iter().zip(x) {
                if e > 0 {
                    term *= xi.powi(e as i32);
                }
            }
            acc += term;
        }
        acc
    }

    /// Largest coefficient magnitude.
    pub fn max_abs_coefficient(&self) -> f64 {
        self.terms.values().fold(0.0, |m, c| m.max(c.abs()))
    }

    /// Sum of coefficient magnitudes; bounds `|P|` on the unit ball.
    pub fn l1_coefficient_norm(&self) -> f64 {
        self.terms.values().map(|c| c.abs()).sum()
    }

    /// Exact rational copy of the float coefficients.
    pub fn to_rational(&self) -> RationalPolynomial {
        self.map_coefficients(|c| BigRational::from_float(*c).unwrap_or_else(BigRational::zero))
    }
}

impl Polynomial<BigRational> {
    pub fn to_f64(&self) -> MultiIndexPolynomial {
        self.map_coefficients(|c| c.to_f64().unwrap_or(f64::NAN))
    }
}

impl<'a, C: Coefficient> Add for &'a Polynomial<C> {
    type Output = Polynomial<C>;
    fn add(self, rhs: Self) -> Polynomial<C> {
        self.checked_add(rhs).expect("polynomial dimensions differ")
    }
}

impl<'a, C: Coefficient> Sub for &'a Polynomial<C> {
    type Output = Polynomial<C>;
    fn sub(self, rhs: Self) -> Polynomial<C> {
        self.checked_sub(rhs).expect("polynomial dimensions differ")
    }
}

impl<'a, C: Coefficient> Mul for &'a Polynomial<C> {
    type Output = Polynomial<C>;
    fn mul(self, rhs: Self) -> Polynomial<C> {
        self.checked_mul(rhs).expect("polynomial dimensions differ")
    }
}

/// Key of a term `z^k conj(z)^l`.
pub type BiIndex = (MultiIndex, MultiIndex);

/// A polynomial `sum c_{k,l} z^k conj(z)^l` in `dim` complex variables.
#[derive(Clone, Debug, PartialEq)]
pub struct BiPolynomial<C> {
    dim: usize,
    terms: BTreeMap<BiIndex, C>,
}

pub type ComplexBiPolynomial = BiPolynomial<Complex64>;
/// Bi-polynomial with Gaussian rational coefficients.
pub type GaussianBiPolynomial = BiPolynomial<Complex<BigRational>>;

impl<C: Coefficient> BiPolynomial<C> {
    pub fn zero(dim: usize) -> Self {
        BiPolynomial {
            dim,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(dim: usize, c: C) -> Self {
        let mut p = Self::zero(dim);
        insert_term(&mut p.terms, (MultiIndex::zero(dim), MultiIndex::zero(dim)), c);
        p
    }

    pub fn monomial(k: MultiIndex, l: MultiIndex, c: C) -> Result<Self> {
        ensure_dim(k.dim(), l.dim())?;
        let mut p = Self::zero(k.dim());
        insert_term(&mut p.terms, (k, l), c);
        Ok(p)
    }

    pub fn from_terms<I: IntoIterator<Item = (MultiIndex, MultiIndex, C)>>(
        dim: usize,
        terms: I,
    ) -> Result<Self> {
        let mut p = Self::zero(dim);
        for (k, l, c) in terms {
            ensure_dim(dim, k.dim())?;
            ensure_dim(dim, l.dim())?;
            insert_term(&mut p.terms, (k, l), c);
        }
        Ok(p)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn terms(&self) -> impl Iterator<Item = (&BiIndex, &C)> {
        self.terms.iter()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn coefficient(&self, k: &MultiIndex, l: &MultiIndex) -> C {
        self.terms
            .get(&(k.clone(), l.clone()))
            .cloned()
            .unwrap_or_else(C::zero)
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// `max(|k|, |l|)` over the terms; `None` for zero.
    pub fn bidegree_max(&self) -> Option<usize> {
        self.terms
            .keys()
            .map(|(k, l)| k.order().max(l.order()))
            .max()
    }

    pub fn add_term(&mut self, k: MultiIndex, l: MultiIndex, c: C) -> Result<()> {
        ensure_dim(self.dim, k.dim())?;
        ensure_dim(self.dim, l.dim())?;
        insert_term(&mut self.terms, (k, l), c);
        Ok(())
    }

    pub fn scale(&self, c: &C) -> Self {
        let mut p = Self::zero(self.dim);
        for (key, v) in &self.terms {
            insert_term(&mut p.terms, key.clone(), v.clone() * c.clone());
        }
        p
    }

    pub fn checked_add(&self, other: &Self) -> Result<Self> {
        ensure_dim(self.dim, other.dim)?;
        let mut p = self.clone();
        for (key, v) in &other.terms {
            insert_term(&mut p.terms, key.clone(), v.clone());
        }
        Ok(p)
    }

    pub fn checked_sub(&self, other: &Self) -> Result<Self> {
        ensure_dim(self.dim, other.dim)?;
        let mut p = self.clone();
        for (key, v) in &other.terms {
            insert_term(&mut p.terms, key.clone(), -v.clone());
        }
        Ok(p)
    }

    pub fn checked_mul(&self, other: &Self) -> Result<Self> {
        ensure_dim(self.dim, other.dim)?;
        let mut p = Self::zero(self.dim);
        for ((k1, l1), v1) in &self.terms {
            for ((k2, l2), v2) in &other.terms {
                let k = MultiIndex(k1.0.iter().zip(&k2.0).map(|(a, b)| a + b).collect());
                let l = MultiIndex(l1.0.iter().zip(&l2.0).map(|(a, b)| a + b).collect());
                insert_term(&mut p.terms, (k, l), v1.clone() * v2.clone());
            }
        }
        Ok(p)
    }

    pub fn pow(&self, e: u32) -> Self {
        let mut acc = Self::constant(self.dim, C::one());
        for _ in 0..e {
            acc = acc.checked_mul(self).expect("same dimension");
        }
        acc
    }

    /// Terms with `|k| = s` and `|l| = t`.
    pub fn bihomogeneous_part(&self, s: usize, t: usize) -> Self {
        BiPolynomial {
            dim: self.dim,
            terms: self
                .terms
                .iter()
                .filter(|((k, l), _)| k.order() == s && l.order() == t)
                .map(|(key, v)| (key.clone(), v.clone()))
                .collect(),
        }
    }

    pub fn map_coefficients<D: Coefficient, F: Fn(&C) -> D>(&self, f: F) -> BiPolynomial<D> {
        let mut p = BiPolynomial::zero(self.dim);
        for (key, v) in &self.terms {
            insert_term(&mut p.terms, key.clone(), f(v));
        }
        p
    }
}

impl<C: ComplexCoefficient> BiPolynomial<C> {
    /// `sum_j a_j z_j`, as a bi-polynomial.
    pub fn linear_holomorphic(a: &[C]) -> Self {
        let dim = a.len();
        let mut p = Self::zero(dim);
        for (j, aj) in a.iter().enumerate() {
            insert_term(
                &mut p.terms,
                (MultiIndex::unit(dim, j), MultiIndex::zero(dim)),
                aj.clone(),
            );
        }
        p
    }

    /// Complex conjugate polynomial: `conj(P)(z) = conj(P(z))`.
    pub fn conjugate(&self) -> Self {
        let mut p = Self::zero(self.dim);
        for ((k, l), v) in &self.terms {
            insert_term(&mut p.terms, (l.clone(), k.clone()), v.conj());
        }
        p
    }

    pub fn eval(&self, z: &[C]) -> Result<C> {
        ensure_dim(self.dim, z.len())?;
        let zbar: Vec<C> = z.iter().map(|v| v.conj()).collect();
        let mut max_k = vec![0u32; self.dim];
        let mut max_l = vec![0u32; self.dim];
        for (k, l) in self.terms.keys() {
            for j in 0..self.dim {
                max_k[j] = max_k[j].max(k.0[j]);
                max_l[j] = max_l[j].max(l.0[j]);
            }
        }
        let tk = power_table(z, &max_k);
        let tl = power_table(&zbar, &max_l);
        let mut acc = C::zero();
        for ((k, l), c) in &self.terms {
            let mut term = c.clone();
            for j in 0..self.dim {
                if k.0[j] > 0 {
                    term = term * tk[j][k.0[j] as usize].clone();
                }
                if l.0[j] > 0 {
                    term = term * tl[j][l.0[j] as usize].clone();
                }
            }
            acc = acc + term;
        }
        Ok(acc)
    }
}

impl BiPolynomial<Complex64> {
    pub fn max_abs_coefficient(&self) -> f64 {
        self.terms.values().fold(0.0, |m, c| m.max(c.norm()))
    }
}

#[derive(Serialize, Deserialize)]
struct RealTermJson {
    k: Vec<u32>,
    c: f64,
}

#[derive(Serialize, Deserialize)]
struct RealPolyJson {
    dim: usize,
    terms: Vec<RealTermJson>,
}

#[derive(Serialize, Deserialize)]
struct ComplexTermJson {
    k: Vec<u32>,
    l: Vec<u32>,
    re: f64,
    im: f64,
}

#[derive(Serialize, Deserialize)]
struct ComplexPolyJson {
    dim: usize,
    terms: Vec<ComplexTermJson>,
}

impl Serialize for Polynomial<f64> {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        RealPolyJson {
            dim: self.dim,
            terms: self
                .terms
                .iter()
                .map(|(k, c)| RealTermJson {
                    k: k.0.clone(),
                    c: *c,
                })
                .collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Polynomial<f64> {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = RealPolyJson::deserialize(d)?;
        Polynomial::from_terms(
            raw.dim,
            raw.terms.into_iter().map(|t| (MultiIndex(t.k), t.c)),
        )
        .map_err(serde::de::Error::custom)
    }
}

impl Serialize for BiPolynomial<Complex64> {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        ComplexPolyJson {
            dim: self.dim,
            terms: self
                .terms
                .iter()
                .map(|((k, l), c)| ComplexTermJson {
                    k: k.0.clone(),
                    l: l.0.clone(),
                    re: c.re,
                    im: c.im,
                })
                .collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for BiPolynomial<Complex64> {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = ComplexPolyJson::deserialize(d)?;
        BiPolynomial::from_terms(
            raw.dim,
            raw.terms
                .into_iter()
                .map(|t| (MultiIndex(t.k), MultiIndex(t.l), Complex64::new(t.re, t.im))),
        )
        .map_err(serde::de::Error::custom)
    }
}

/// Serde adapter writing complex matrices as nested `{"re", "im"}` objects.
pub mod re_im_rows {
    use num_complex::Complex64;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    struct ReIm {
        re: f64,
        im: f64,
    }

    pub fn serialize<S: Serializer>(rows: &[Vec<Complex64>], s: S) -> Result<S::Ok, S::Error> {
        let v: Vec<Vec<ReIm>> = rows
            .iter()
            .map(|r| r.iter().map(|c| ReIm { re: c.re, im: c.im }).collect())
            .collect();
        v.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Vec<Complex64>>, D::Error> {
        let v: Vec<Vec<ReIm>> = Vec::deserialize(d)?;
        Ok(v.into_iter()
            .map(|r| r.into_iter().map(|c| Complex64::new(c.re, c.im)).collect())
            .collect())
    }
}

/// Convenience: parse a real polynomial from its JSON text.
pub fn polynomial_from_json(text: &str) -> Result<MultiIndexPolynomial> {
    serde_json::from_str(text).map_err(Error::from)
}
