//! Dictionary activations and the shallow networks built from ridge
//! decompositions.
//!
//! Every rational-coefficient polynomial gets a positive index `m`; the
//! activation `tau` reproduces `u_m` on the cell `3 m e_1 + B^ell`. Indices
//! grow very fast with coefficient precision, so they are `BigUint` and
//! points that land in a cell are carried as `(cell, local offset)` pairs.

use std::collections::HashMap;
use std::sync::{Arc, RwLock};

use num_bigint::{BigInt, BigUint, Sign};
use num_complex::{Complex, Complex64};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{FromPrimitive, One, Signed, ToPrimitive, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_dim, Error, Result};
use crate::polycore::{
    multi_indices_up_to, BiPolynomial, ComplexBiPolynomial, GaussianBiPolynomial, MultiIndex,
    MultiIndexPolynomial, Polynomial, RationalPolynomial,
};
use crate::quadrature::{sup_grid, Domain};
use crate::quasiproj::smooth_step;
use crate::ridge_complex::{complex_grid, ComplexRidgeDecomposition};
use crate::ridge_real::RidgeDecomposition;

/// Largest degree a dictionary index is decoded to.
pub const MAX_DECODE_DEGREE: usize = 64;
/// Default finest denominator `2^j` tried by the searches.
pub const DEFAULT_MAX_EXPONENT: u32 = 64;
const VERIFY_GRID_POINTS: usize = 2000;

fn square_root(n: &BigUint) -> Option<BigUint> {
    let r = n.sqrt();
    (&r * &r == *n).then_some(r)
}

/// Product of the primes that divide `n` to an odd power.
///
/// Trial division stops once `d^3` exceeds the cofactor; what is left is then
/// `1`, `p`, `p^2` or `p q`, and a square test tells them apart.
fn squarefree_part(n: &BigUint) -> BigUint {
    let mut c = n.clone();
    let mut out = BigUint::one();
    let mut d = BigUint::from(2u32);
    let mut fresh = true;
    loop {
        if c.is_one() {
            return out;
        }
        if fresh {
            if square_root(&c).is_some() {
                return out;
            }
            fresh = false;
        }
        if &d * &d * &d > c {
            return out * c;
        }
        let mut e = 0u32;
        while (&c % &d).is_zero() {
            c /= &d;
            e += 1;
        }
        if e > 0 {
            fresh = true;
            if e % 2 == 1 {
                out *= &d;
            }
        }
        d += if d == BigUint::from(2u32) { 1u32 } else { 2u32 };
    }
}

/// Product of the distinct primes dividing `n`.
fn radical(n: &BigUint) -> BigUint {
    let mut c = n.clone();
    let mut out = BigUint::one();
    let mut d = BigUint::from(2u32);
    let mut fresh = true;
    loop {
        if c.is_one() {
            return out;
        }
        if fresh {
            if let Some(r) = square_root(&c) {
                // same prime support
                return out * radical(&r);
            }
            fresh = false;
        }
        if &d * &d * &d > c {
            return out * c;
        }
        if (&c % &d).is_zero() {
            out *= &d;
            while (&c % &d).is_zero() {
                c /= &d;
            }
            fresh = true;
        }
        d += if d == BigUint::from(2u32) { 1u32 } else { 2u32 };
    }
}

/// Bijection `Q -> N`: `0 -> 0`, `x > 0 -> 2k - 1`, `x < 0 -> 2k`, where
/// `k = a^2 b^2 / rad(b)` for `|x| = a / b` in lowest terms (prime exponents
/// `e > 0` become `2e`, `e < 0` become `-2e - 1`).
pub fn rational_to_natural(x: &BigRational) -> BigUint {
    if x.is_zero() {
        return BigUint::zero();
    }
    let a = x.numer().magnitude().clone();
    let b = x.denom().magnitude().clone();
    let k = (&a * &a) * (&b * &b) / radical(&b);
    if x.is_positive() {
        k * 2u32 - 1u32
    } else {
        k * 2u32
    }
}

/// Inverse of [`rational_to_natural`].
pub fn natural_to_rational(n: &BigUint) -> BigRational {
    if n.is_zero() {
        return BigRational::zero();
    }
    let negative = n.is_even();
    let k = if negative { n / 2u32 } else { (n + 1u32) / 2u32 };
    let s = squarefree_part(&k);
    let ab = square_root(&(&k * &s)).expect("k * sqf(k) is a square");
    let mut a = ab.clone();
    loop {
        let g = a.gcd(&s);
        if g.is_one() {
            break;
        }
        a /= g;
    }
    let b = &ab / &a;
    let sign = if negative { Sign::Minus } else { Sign::Plus };
    BigRational::new(BigInt::from_biguint(sign, a), BigInt::from(b))
}

/// Coefficient-vector shape for one degree: `n` slots, the last `top` of
/// which may not all vanish.
#[derive(Clone, Copy, Debug)]
struct Shape {
    n: usize,
    top: usize,
}

fn pow2(b: u64) -> BigUint {
    BigUint::one() << b
}

/// Vectors with entries in `[0, size)`, optionally with a nonzero top slot.
fn boxed(size: &BigUint, free: usize, top: usize, need_nz: bool) -> BigUint {
    let a = num_traits::pow(size.clone(), free);
    let b = num_traits::pow(size.clone(), top);
    if need_nz {
        a * (b - 1u32)
    } else {
        a * b
    }
}

/// Level `b` holds entries in `[0, 2^b)` with at least one `>= 2^(b-1)`.
fn level_count(b: u64, free: usize, top: usize, need_nz: bool, need_max: bool) -> BigUint {
    if b == 0 {
        return boxed(&BigUint::one(), free, top, need_nz);
    }
    let full = boxed(&pow2(b), free, top, need_nz);
    if need_max {
        full - boxed(&pow2(b - 1), free, top, need_nz)
    } else {
        full
    }
}

impl Shape {
    fn rest(&self, i: usize) -> (usize, usize) {
        let left = self.n - i - 1;
        let top = self.top.min(left);
        (left - top, top)
    }

    fn is_top(&self, i: usize) -> bool {
        i >= self.n - self.top
    }

    fn rank(&self, v: &[BigUint]) -> Result<BigUint> {
        if self.top > 0 && v[self.n - self.top..].iter().all(|x| x.is_zero()) {
            return Err(Error::Dictionary("top-degree part vanishes".into()));
        }
        let b = v.iter().map(|x| x.bits()).max().unwrap_or(0);
        if b == 0 {
            return Ok(BigUint::zero());
        }
        let nz_needed = self.top > 0;
        let mut r = boxed(&pow2(b - 1), self.n - self.top, self.top, nz_needed);
        let lo = pow2(b - 1);
        let (mut achieved, mut nz) = (false, false);
        for (i, vi) in v.iter().enumerate() {
            let (free, top) = self.rest(i);
            let t = self.is_top(i);
            let cnt = |ach: bool, z: bool| level_count(b, free, top, nz_needed && !z, !ach);
            if !vi.is_zero() {
                r += cnt(achieved, nz);
            }
            let small = vi.min(&lo);
            if *small > BigUint::one() {
                r += (small - 1u32) * cnt(achieved, nz || t);
            }
            if *vi > lo {
                r += (vi - &lo) * cnt(true, nz || t);
            }
            achieved |= *vi >= lo;
            nz |= t && !vi.is_zero();
        }
        Ok(r)
    }

    fn unrank(&self, mut r: BigUint) -> Vec<BigUint> {
        let nz_needed = self.top > 0;
        let total = |b: u64| level_count(b, self.n - self.top, self.top, nz_needed, false);
        let mut b = 0u64;
        while total(b) <= r {
            b += 1;
        }
        if b == 0 {
            return vec![BigUint::zero(); self.n];
        }
        r -= total(b - 1);
        let lo = pow2(b - 1);
        let (mut achieved, mut nz) = (false, false);
        let mut v = Vec::with_capacity(self.n);
        for i in 0..self.n {
            let (free, top) = self.rest(i);
            let t = self.is_top(i);
            let cnt = |ach: bool, z: bool| level_count(b, free, top, nz_needed && !z, !ach);
            let c0 = cnt(achieved, nz);
            let w = if r < c0 {
                BigUint::zero()
            } else {
                r -= &c0;
                let c1 = cnt(achieved, nz || t);
                let span1 = &c1 * (&lo - 1u32);
                if r < span1 {
                    let w = BigUint::one() + &r / &c1;
                    r %= &c1;
                    w
                } else {
                    r -= span1;
                    let c2 = cnt(true, nz || t);
                    let w = &lo + &r / &c2;
                    r %= &c2;
                    w
                }
            };
            achieved |= w >= lo;
            nz |= t && !w.is_zero();
            v.push(w);
        }
        v
    }
}

/// `(D, r) -> 2^D (2r + 1) - 1`, so the degree stays below `log2` of the index.
fn pair(d: usize, r: &BigUint) -> BigUint {
    ((r * 2u32 + 1u32) << d) - 1u32
}

fn unpair(z: &BigUint) -> (u64, BigUint) {
    let w = z + 1u32;
    let d = w.trailing_zeros().expect("positive");
    (d, (w >> d) / 2u32)
}

fn split_index(m: &BigUint) -> Result<(usize, BigUint)> {
    if m.is_zero() {
        return Err(Error::Dictionary("dictionary indices start at 1".into()));
    }
    let (d, r) = unpair(&(m - 1u32));
    match usize::try_from(d) {
        Ok(d) if d <= MAX_DECODE_DEGREE => Ok((d, r)),
        _ => Err(Error::Dictionary(format!(
            "index {m} encodes degree {d}, beyond the decode limit {MAX_DECODE_DEGREE}"
        ))),
    }
}

fn to_f64_rational(x: &BigRational) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

/// `c` rounded to the grid `2^(-j)`, and the rounding error.
fn round_dyadic(c: f64, j: u32) -> (BigRational, f64) {
    let scale = 2f64.powi(j as i32);
    let scaled = c * scale;
    let n = scaled.round();
    let num = BigInt::from_f64(n).unwrap_or_default();
    (BigRational::new(num, BigInt::one() << j), (scaled - n).abs() / scale)
}

/// A dictionary hit for a profile.
#[derive(Clone, Debug)]
pub struct DictionaryMatch<P> {
    pub index: BigUint,
    pub polynomial: P,
    /// Denominator exponent `j` of the rounding grid.
    pub grid_exponent: u32,
    /// Coefficient l1 distance; bounds the sup distance on the unit ball.
    pub coefficient_error: f64,
    /// Sup distance measured on a grid.
    pub grid_error: f64,
}

fn accept(err: f64, l1: f64, delta: f64) -> bool {
    if delta == 0.0 {
        err == 0.0
    } else {
        err + 1e-12 * (1.0 + l1) <= delta
    }
}

/// The enumeration `u_1, u_2, ...` of rational polynomials in `ell` variables.
pub struct PolynomialDictionary {
    ell: usize,
    cache: RwLock<HashMap<BigUint, Arc<MultiIndexPolynomial>>>,
}

impl std::fmt::Debug for PolynomialDictionary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PolynomialDictionary").field("ell", &self.ell).finish()
    }
}

impl PolynomialDictionary {
    pub fn new(ell: usize) -> Result<Self> {
        if ell == 0 {
            return Err(Error::InvalidArgument("ell must be positive".into()));
        }
        Ok(PolynomialDictionary {
            ell,
            cache: RwLock::new(HashMap::new()),
        })
    }

    pub fn ell(&self) -> usize {
        self.ell
    }

    fn layout(&self, degree: usize) -> (Vec<MultiIndex>, Shape) {
        let slots = multi_indices_up_to(self.ell, degree);
        let top = if degree == 0 {
            0
        } else {
            slots.iter().filter(|k| k.order() == degree).count()
        };
        let n = slots.len();
        (slots, Shape { n, top })
    }

    /// Index of `p`; the zero polynomial is `1`.
    pub fn index_of(&self, p: &RationalPolynomial) -> Result<BigUint> {
        ensure_dim(self.ell, p.dim())?;
        let degree = p.degree().unwrap_or(0);
        let (slots, shape) = self.layout(degree);
        let v: Vec<BigUint> = slots
            .iter()
            .map(|k| rational_to_natural(&p.coefficient(k)))
            .collect();
        Ok(pair(degree, &shape.rank(&v)?) + 1u32)
    }

    /// `u_m` with exact coefficients.
    pub fn polynomial(&self, m: &BigUint) -> Result<RationalPolynomial> {
        let (degree, r) = split_index(m)?;
        let (slots, shape) = self.layout(degree);
        let v = shape.unrank(r);
        Polynomial::from_terms(
            self.ell,
            slots
                .into_iter()
                .zip(v.iter().map(natural_to_rational))
                .filter(|(_, c)| !c.is_zero()),
        )
    }

    /// `u_m` with `f64` coefficients, cached.
    pub fn profile(&self, m: &BigUint) -> Result<Arc<MultiIndexPolynomial>> {
        if let Some(p) = self.cache.read().expect("cache lock").get(m) {
            return Ok(p.clone());
        }
        let p = Arc::new(self.polynomial(m)?.map_coefficients(to_f64_rational));
        self.cache
            .write()
            .expect("cache lock")
            .insert(m.clone(), p.clone());
        Ok(p)
    }

    /// Rounds the coefficients of `p` to the coarsest grid `2^(-j)`,
    /// `j <= max_exponent`, whose l1 error is at most `delta`.
    pub fn search(
        &self,
        p: &MultiIndexPolynomial,
        delta: f64,
        max_exponent: u32,
    ) -> Result<DictionaryMatch<RationalPolynomial>> {
        ensure_dim(self.ell, p.dim())?;
        let l1 = p.l1_coefficient_norm();
        for j in 0..=max_exponent {
            let mut err = 0.0;
            let mut terms = Vec::with_capacity(p.num_terms());
            for (k, &c) in p.terms() {
                let (q, e) = round_dyadic(c, j);
                err += e;
                if !q.is_zero() {
                    terms.push((k.clone(), q));
                }
            }
            if !accept(err, l1, delta) {
                continue;
            }
            let rounded = Polynomial::from_terms(self.ell, terms)?;
            let approx = rounded.map_coefficients(to_f64_rational);
            let grid_error = sup_grid(Domain::Ball(self.ell), VERIFY_GRID_POINTS)
                .iter()
                .map(|y| (p.evaluate(y) - approx.evaluate(y)).abs())
                .fold(0.0, f64::max);
            return Ok(DictionaryMatch {
                index: self.index_of(&rounded)?,
                polynomial: rounded,
                grid_exponent: j,
                coefficient_error: err,
                grid_error,
            });
        }
        Err(Error::Dictionary(format!(
            "tolerance {delta:e} not reached with denominators up to 2^{max_exponent}; allow a finer grid"
        )))
    }
}

/// The enumeration of polynomials in `w`, `conj(w)` with Gaussian-rational
/// coefficients. Degree is `max(a, b)` over the terms `w^a conj(w)^b`.
pub struct ComplexDictionary {
    cache: RwLock<HashMap<BigUint, Arc<ComplexBiPolynomial>>>,
}

impl std::fmt::Debug for ComplexDictionary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("ComplexDictionary")
    }
}

impl Default for ComplexDictionary {
    fn default() -> Self {
        Self::new()
    }
}

fn complex_slots(degree: usize) -> Vec<(u32, u32)> {
    let mut slots: Vec<(u32, u32)> = (0..=degree as u32)
        .flat_map(|a| (0..=degree as u32).map(move |b| (a, b)))
        .collect();
    slots.sort_by_key(|&(a, b)| (a.max(b), a, b));
    slots
}

impl ComplexDictionary {
    pub fn new() -> Self {
        ComplexDictionary {
            cache: RwLock::new(HashMap::new()),
        }
    }

    fn shape(degree: usize) -> Shape {
        let n = 2 * (degree + 1) * (degree + 1);
        let top = if degree == 0 { 0 } else { 2 * (2 * degree + 1) };
        Shape { n, top }
    }

    pub fn index_of(&self, p: &GaussianBiPolynomial) -> Result<BigUint> {
        ensure_dim(1, p.dim())?;
        let degree = p.bidegree_max().unwrap_or(0);
        let mut v = Vec::new();
        for (a, b) in complex_slots(degree) {
            let c = p.coefficient(&MultiIndex(vec![a]), &MultiIndex(vec![b]));
            v.push(rational_to_natural(&c.re));
            v.push(rational_to_natural(&c.im));
        }
        Ok(pair(degree, &Self::shape(degree).rank(&v)?) + 1u32)
    }

    pub fn polynomial(&self, m: &BigUint) -> Result<GaussianBiPolynomial> {
        let (degree, r) = split_index(m)?;
        let v = Self::shape(degree).unrank(r);
        let mut p = BiPolynomial::zero(1);
        for ((a, b), pair) in complex_slots(degree).into_iter().zip(v.chunks(2)) {
            let c = Complex::new(natural_to_rational(&pair[0]), natural_to_rational(&pair[1]));
            p.add_term(MultiIndex(vec![a]), MultiIndex(vec![b]), c)?;
        }
        Ok(p)
    }

    pub fn profile(&self, m: &BigUint) -> Result<Arc<ComplexBiPolynomial>> {
        if let Some(p) = self.cache.read().expect("cache lock").get(m) {
            return Ok(p.clone());
        }
        let p = Arc::new(
            self.polynomial(m)?
                .map_coefficients(|c| Complex64::new(to_f64_rational(&c.re), to_f64_rational(&c.im))),
        );
        self.cache
            .write()
            .expect("cache lock")
            .insert(m.clone(), p.clone());
        Ok(p)
    }

    /// Rounds real and imaginary parts to `2^(-j)`; the error is the sum of
    /// `|d re| + |d im|` over coefficients.
    pub fn search(
        &self,
        p: &ComplexBiPolynomial,
        delta: f64,
        max_exponent: u32,
    ) -> Result<DictionaryMatch<GaussianBiPolynomial>> {
        ensure_dim(1, p.dim())?;
        let l1: f64 = p.terms().map(|(_, c)| c.re.abs() + c.im.abs()).sum();
        for j in 0..=max_exponent {
            let mut err = 0.0;
            let mut rounded = BiPolynomial::zero(1);
            for ((k, l), c) in p.terms() {
                let (re, e1) = round_dyadic(c.re, j);
                let (im, e2) = round_dyadic(c.im, j);
                err += e1 + e2;
                rounded.add_term(k.clone(), l.clone(), Complex::new(re, im))?;
            }
            if !accept(err, l1, delta) {
                continue;
            }
            let approx = rounded
                .map_coefficients(|c| Complex64::new(to_f64_rational(&c.re), to_f64_rational(&c.im)));
            let mut grid_error: f64 = 0.0;
            for z in complex_grid(1, VERIFY_GRID_POINTS) {
                grid_error = grid_error.max((p.eval(&z)? - approx.eval(&z)?).norm());
            }
            return Ok(DictionaryMatch {
                index: self.index_of(&rounded)?,
                polynomial: rounded,
                grid_exponent: j,
                coefficient_error: err,
                grid_error,
            });
        }
        Err(Error::Dictionary(format!(
            "tolerance {delta:e} not reached with denominators up to 2^{max_exponent}; allow a finer grid"
        )))
    }
}

/// A point `3 cell e_1 + local` of `R^ell`, exact in the cell number.
#[derive(Clone, Debug, PartialEq)]
pub struct CellPoint {
    pub cell: BigInt,
    pub local: Vec<f64>,
}

impl CellPoint {
    pub fn new(cell: BigInt, local: Vec<f64>) -> Self {
        CellPoint { cell, local }
    }

    /// Nearest cell for an ordinary point.
    pub fn from_point(x: &[f64]) -> Self {
        let cell = BigInt::from_f64((x[0] / 3.0).round()).unwrap_or_default();
        let mut local = x.to_vec();
        local[0] = x[0] - 3.0 * cell.to_f64().unwrap_or(0.0);
        CellPoint { cell, local }
    }

    /// `local + shift` with an integer shift, re-centred on the nearest cell.
    fn shifted(local: Vec<f64>, shift: &[BigInt]) -> Self {
        let (q, r) = shift[0].div_mod_floor(&BigInt::from(3));
        let mut local = local;
        local[0] += r.to_f64().unwrap_or(0.0);
        for (l, s) in local.iter_mut().zip(shift).skip(1) {
            *l += s.to_f64().unwrap_or(f64::NAN);
        }
        let mut cell = q;
        while local[0] > 1.5 {
            local[0] -= 3.0;
            cell += 1;
        }
        while local[0] < -1.5 {
            local[0] += 3.0;
            cell -= 1;
        }
        CellPoint { cell, local }
    }
}

/// 1 on the unit ball, 0 from radius 3/2 on.
fn radial_cutoff(y: &[f64]) -> f64 {
    let r = y.iter().map(|v| v * v).sum::<f64>().sqrt();
    if r <= 1.0 {
        1.0
    } else {
        smooth_step(2.0 * r - 1.0)
    }
}

/// `tau` at a cell point: `u_m(local)` inside the unit ball around `3 m e_1`,
/// 0 on cells `m <= 0`, smoothly cut off between cells.
pub fn tau_cell(dict: &PolynomialDictionary, p: &CellPoint) -> Result<f64> {
    ensure_dim(dict.ell(), p.local.len())?;
    if !p.cell.is_positive() {
        return Ok(0.0);
    }
    let chi = radial_cutoff(&p.local);
    if chi == 0.0 {
        return Ok(0.0);
    }
    let u = dict.profile(p.cell.magnitude())?;
    Ok(chi * u.evaluate(&p.local))
}

pub fn tau_eval(dict: &PolynomialDictionary, x: &[f64]) -> Result<f64> {
    ensure_dim(dict.ell(), x.len())?;
    tau_cell(dict, &CellPoint::from_point(x))
}

/// A point `3 cell + local` of `C`.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexCellPoint {
    pub cell: BigInt,
    pub local: Complex64,
}

impl ComplexCellPoint {
    pub fn from_point(z: Complex64) -> Self {
        let p = CellPoint::from_point(&[z.re]);
        ComplexCellPoint {
            cell: p.cell,
            local: Complex64::new(p.local[0], z.im),
        }
    }
}

/// 1 on the square `[-1, 1] + i [-1, 1]`, 0 outside `[-3/2, 3/2]^2`.
fn square_cutoff(w: Complex64) -> f64 {
    let side = |t: f64| if t.abs() <= 1.0 { 1.0 } else { smooth_step(2.0 * t.abs() - 1.0) };
    side(w.re) * side(w.im)
}

pub fn phi_cell(dict: &ComplexDictionary, p: &ComplexCellPoint) -> Result<Complex64> {
    if !p.cell.is_positive() {
        return Ok(Complex64::zero());
    }
    let chi = square_cutoff(p.local);
    if chi == 0.0 {
        return Ok(Complex64::zero());
    }
    let u = dict.profile(p.cell.magnitude())?;
    Ok(u.eval(&[p.local])? * chi)
}

pub fn phi_eval(dict: &ComplexDictionary, z: Complex64) -> Result<Complex64> {
    phi_cell(dict, &ComplexCellPoint::from_point(z))
}

/// One unit `c tau(A x + b)`.
#[derive(Clone, Debug, PartialEq)]
pub struct GtnUnit {
    pub a: Vec<Vec<f64>>,
    pub b: Vec<BigInt>,
    pub c: f64,
    pub dict_index: BigUint,
    /// l1 coefficient distance between the block profile and `u_(dict_index)`.
    pub coefficient_error: f64,
}

/// `x -> sum_k c_k tau(A_k x + b_k)`.
#[derive(Clone, Debug)]
pub struct GTNetwork {
    pub ell: usize,
    pub d: usize,
    pub units: Vec<GtnUnit>,
    dict: Arc<PolynomialDictionary>,
}

impl GTNetwork {
    pub fn new(d: usize, units: Vec<GtnUnit>, dict: Arc<PolynomialDictionary>) -> Result<Self> {
        let ell = dict.ell();
        for u in &units {
            ensure_dim(ell, u.a.len())?;
            ensure_dim(ell, u.b.len())?;
            for row in &u.a {
                ensure_dim(d, row.len())?;
            }
        }
        Ok(GTNetwork { ell, d, units, dict })
    }

    pub fn dictionary(&self) -> &PolynomialDictionary {
        &self.dict
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        ensure_dim(self.d, x.len())?;
        let mut acc = 0.0;
        for u in &self.units {
            if u.c == 0.0 {
                continue;
            }
            let ax: Vec<f64> = u
                .a
                .iter()
                .map(|row| row.iter().zip(x).map(|(r, v)| r * v).sum())
                .collect();
            acc += u.c * tau_cell(&self.dict, &CellPoint::shifted(ax, &u.b))?;
        }
        Ok(acc)
    }
}

/// Builds a network whose units reproduce the blocks of `decomp` up to
/// `delta` each. Blocks are rescaled to `||A_k|| <= 1` first.
pub fn gtn_from_decomposition(
    decomp: &RidgeDecomposition,
    dict: Arc<PolynomialDictionary>,
    delta: f64,
    max_exponent: u32,
) -> Result<GTNetwork> {
    if dict.ell() != decomp.ell {
        return Err(Error::DimensionMismatch {
            expected: decomp.ell,
            found: dict.ell(),
        });
    }
    let needs_scaling = decomp.blocks.iter().any(|b| b.operator_norm() > 1.0 + 1e-12);
    let decomp = if needs_scaling {
        decomp.normalized()?
    } else {
        decomp.clone()
    };
    let units = decomp
        .blocks
        .par_iter()
        .map(|block| {
            let hit = dict.search(&block.p, delta, max_exponent)?;
            let mut b = vec![BigInt::zero(); decomp.ell];
            b[0] = BigInt::from(hit.index.clone()) * 3;
            Ok(GtnUnit {
                a: block.a.clone(),
                b,
                c: if block.p.is_zero() { 0.0 } else { 1.0 },
                dict_index: hit.index,
                coefficient_error: hit.coefficient_error,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    GTNetwork::new(decomp.d, units, dict)
}

/// One unit `gamma phi(alpha^T z + beta)`.
#[derive(Clone, Debug, PartialEq)]
pub struct CvnnUnit {
    pub alpha: Vec<Complex64>,
    /// Integer real shift.
    pub beta: BigInt,
    pub gamma: Complex64,
    pub dict_index: BigUint,
    pub coefficient_error: f64,
}

/// `z -> sum_k gamma_k phi(alpha_k^T z + beta_k)`.
#[derive(Clone, Debug)]
pub struct CVNNetwork {
    pub d: usize,
    pub units: Vec<CvnnUnit>,
    dict: Arc<ComplexDictionary>,
}

impl CVNNetwork {
    pub fn new(d: usize, units: Vec<CvnnUnit>, dict: Arc<ComplexDictionary>) -> Result<Self> {
        for u in &units {
            ensure_dim(d, u.alpha.len())?;
        }
        Ok(CVNNetwork { d, units, dict })
    }

    pub fn eval(&self, z: &[Complex64]) -> Result<Complex64> {
        ensure_dim(self.d, z.len())?;
        let mut acc = Complex64::zero();
        for u in &self.units {
            if u.gamma == Complex64::zero() {
                continue;
            }
            let w: Complex64 = u.alpha.iter().zip(z).map(|(a, b)| a * b).sum();
            let p = CellPoint::shifted(vec![w.re], &[u.beta.clone()]);
            let cp = ComplexCellPoint {
                cell: p.cell,
                local: Complex64::new(p.local[0], w.im),
            };
            acc += u.gamma * phi_cell(&self.dict, &cp)?;
        }
        Ok(acc)
    }
}

/// `P(rho w)` for a bi-polynomial in one variable and real `rho`.
fn dilate(p: &ComplexBiPolynomial, rho: f64) -> Result<ComplexBiPolynomial> {
    let mut out = BiPolynomial::zero(1);
    for ((k, l), c) in p.terms() {
        out.add_term(k.clone(), l.clone(), c * rho.powi((k.order() + l.order()) as i32))?;
    }
    Ok(out)
}

pub fn cvnn_from_decomposition(
    decomp: &ComplexRidgeDecomposition,
    dict: Arc<ComplexDictionary>,
    delta: f64,
    max_exponent: u32,
) -> Result<CVNNetwork> {
    let units = decomp
        .alphas
        .par_iter()
        .zip(decomp.profiles.par_iter())
        .map(|(alpha, profile)| {
            let rho = alpha.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
            let (alpha, profile) = if rho > 1.0 + 1e-12 {
                (alpha.iter().map(|a| a / rho).collect(), dilate(profile, rho)?)
            } else {
                (alpha.clone(), profile.clone())
            };
            let hit = dict.search(&profile, delta, max_exponent)?;
            Ok(CvnnUnit {
                alpha,
                beta: BigInt::from(hit.index.clone()) * 3,
                gamma: if profile.is_zero() {
                    Complex64::zero()
                } else {
                    Complex64::new(1.0, 0.0)
                },
                dict_index: hit.index,
                coefficient_error: hit.coefficient_error,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    CVNNetwork::new(decomp.d, units, dict)
}

/// `max_x |net(x) - sum_k P_k(A_k x)|` over `points`.
pub fn gtn_deviation(net: &GTNetwork, decomp: &RidgeDecomposition, points: &[Vec<f64>]) -> Result<f64> {
    points
        .par_iter()
        .map(|x| Ok((net.eval(x)? - crate::ridge_real::eval_ridge(decomp, x)?).abs()))
        .try_reduce(|| 0.0, |a, b| Ok(a.max(b)))
}

pub fn cvnn_deviation(
    net: &CVNNetwork,
    decomp: &ComplexRidgeDecomposition,
    points: &[Vec<Complex64>],
) -> Result<f64> {
    points
        .par_iter()
        .map(|z| Ok((net.eval(z)? - decomp.eval(z)?).norm()))
        .try_reduce(|| 0.0, |a, b| Ok(a.max(b)))
}

#[derive(Serialize, Deserialize)]
struct ComplexJson {
    re: f64,
    im: f64,
}

impl From<Complex64> for ComplexJson {
    fn from(c: Complex64) -> Self {
        ComplexJson { re: c.re, im: c.im }
    }
}

#[derive(Serialize, Deserialize)]
struct UnitJson {
    #[serde(rename = "A", skip_serializing_if = "Option::is_none", default)]
    a: Option<Vec<Vec<f64>>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    b: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    c: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    alpha: Option<Vec<ComplexJson>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    beta: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    gamma: Option<ComplexJson>,
    dict_index: String,
}

#[derive(Serialize, Deserialize)]
struct NetworkJson {
    #[serde(rename = "type")]
    kind: String,
    ell: usize,
    d: usize,
    units: Vec<UnitJson>,
}

fn parse_int(s: &str) -> Result<BigInt> {
    s.parse()
        .map_err(|_| Error::InvalidArgument(format!("not an integer: {s}")))
}

fn parse_index(s: &str) -> Result<BigUint> {
    s.parse()
        .map_err(|_| Error::InvalidArgument(format!("not a dictionary index: {s}")))
}

fn missing(field: &str) -> Error {
    Error::InvalidArgument(format!("unit is missing field {field}"))
}

impl GTNetwork {
    pub fn to_json(&self) -> Result<String> {
        let units = self
            .units
            .iter()
            .map(|u| UnitJson {
                a: Some(u.a.clone()),
                b: Some(u.b.iter().map(|v| v.to_string()).collect()),
                c: Some(u.c),
                alpha: None,
                beta: None,
                gamma: None,
                dict_index: u.dict_index.to_string(),
            })
            .collect();
        Ok(serde_json::to_string(&NetworkJson {
            kind: "gtn".into(),
            ell: self.ell,
            d: self.d,
            units,
        })?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: NetworkJson = serde_json::from_str(text)?;
        if raw.kind != "gtn" {
            return Err(Error::InvalidArgument(format!("expected a gtn, found {}", raw.kind)));
        }
        let dict = Arc::new(PolynomialDictionary::new(raw.ell)?);
        let units = raw
            .units
            .into_iter()
            .map(|u| {
                Ok(GtnUnit {
                    a: u.a.ok_or_else(|| missing("A"))?,
                    b: u
                        .b
                        .ok_or_else(|| missing("b"))?
                        .iter()
                        .map(|s| parse_int(s))
                        .collect::<Result<_>>()?,
                    c: u.c.ok_or_else(|| missing("c"))?,
                    dict_index: parse_index(&u.dict_index)?,
                    coefficient_error: 0.0,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        GTNetwork::new(raw.d, units, dict)
    }
}

impl CVNNetwork {
    pub fn to_json(&self) -> Result<String> {
        let units = self
            .units
            .iter()
            .map(|u| UnitJson {
                a: None,
                b: None,
                c: None,
                alpha: Some(u.alpha.iter().map(|&c| c.into()).collect()),
                beta: Some(u.beta.to_string()),
                gamma: Some(u.gamma.into()),
                dict_index: u.dict_index.to_string(),
            })
            .collect();
        Ok(serde_json::to_string(&NetworkJson {
            kind: "cvnn".into(),
            ell: 1,
            d: self.d,
            units,
        })?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: NetworkJson = serde_json::from_str(text)?;
        if raw.kind != "cvnn" {
            return Err(Error::InvalidArgument(format!("expected a cvnn, found {}", raw.kind)));
        }
        let units = raw
            .units
            .into_iter()
            .map(|u| {
                let gamma = u.gamma.ok_or_else(|| missing("gamma"))?;
                Ok(CvnnUnit {
                    alpha: u
                        .alpha
                        .ok_or_else(|| missing("alpha"))?
                        .into_iter()
                        .map(|c| Complex64::new(c.re, c.im))
                        .collect(),
                    beta: parse_int(&u.beta.ok_or_else(|| missing("beta"))?)?,
                    gamma: Complex64::new(gamma.re, gamma.im),
                    dict_index: parse_index(&u.dict_index)?,
                    coefficient_error: 0.0,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        CVNNetwork::new(raw.d, units, Arc::new(ComplexDictionary::new()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    #[test]
    fn small_rationals_round_trip() {
        for n in 0u32..500 {
            let x = natural_to_rational(&BigUint::from(n));
            assert_eq!(rational_to_natural(&x), BigUint::from(n), "{x}");
        }
        assert_eq!(rational_to_natural(&q(1, 1)), BigUint::from(1u32));
        assert_eq!(rational_to_natural(&q(-1, 1)), BigUint::from(2u32));
        assert_eq!(rational_to_natural(&q(1, 2)), BigUint::from(3u32));
    }

    #[test]
    fn zero_polynomial_is_first() {
        let dict = PolynomialDictionary::new(2).unwrap();
        let z = dict.index_of(&Polynomial::zero(2)).unwrap();
        assert_eq!(z, BigUint::one());
        assert!(dict.polynomial(&z).unwrap().is_zero());
    }

    #[test]
    fn small_indices_round_trip() {
        let dict = PolynomialDictionary::new(2).unwrap();
        for m in 1u32..400 {
            let m = BigUint::from(m);
            let p = dict.polynomial(&m).unwrap();
            assert_eq!(dict.index_of(&p).unwrap(), m);
        }
        let cdict = ComplexDictionary::new();
        for m in 1u32..400 {
            let m = BigUint::from(m);
            let p = cdict.polynomial(&m).unwrap();
            assert_eq!(cdict.index_of(&p).unwrap(), m);
        }
    }

    #[test]
    fn cutoffs() {
        assert_eq!(radial_cutoff(&[1.0, 0.0]), 1.0);
        assert_eq!(radial_cutoff(&[1.5, 0.0]), 0.0);
        assert_eq!(square_cutoff(Complex64::new(1.0, -1.0)), 1.0);
        assert_eq!(square_cutoff(Complex64::new(1.6, 0.0)), 0.0);
    }

    #[test]
    fn shifted_recentres() {
        let p = CellPoint::shifted(vec![0.9, 0.0], &[BigInt::from(5), BigInt::zero()]);
        assert_eq!(p.cell, BigInt::from(2));
        assert!((p.local[0] + 0.1).abs() < 1e-15);
    }
}
