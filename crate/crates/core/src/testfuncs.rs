//! Hard-to-approximate test functions and the pieces of the ridge
//! inner-product expansion.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_dim, Error, Result};
use crate::polycore::{multi_indices_up_to, MultiIndex, MultiIndexPolynomial, Polynomial};
use crate::quadrature::{
    ball_volume, build_ball_rule, build_sphere_rule, gauss_legendre, Evaluate,
};

/// Truncated Taylor series `sum_i c_i h^i`.
#[derive(Clone, Debug)]
struct Jet(Vec<f64>);

impl Jet {
    fn constant(v: f64, n: usize) -> Jet {
        let mut c = vec![0.0; n];
        c[0] = v;
        Jet(c)
    }

    fn add(&self, o: &Jet) -> Jet {
        Jet(self.0.iter().zip(&o.0).map(|(a, b)| a + b).collect())
    }

    fn mul(&self, o: &Jet) -> Jet {
        let n = self.0.len();
        let mut c = vec![0.0; n];
        for i in 0..n {
            for j in 0..n - i {
                c[i + j] += self.0[i] * o.0[j];
            }
        }
        Jet(c)
    }

    fn recip(&self) -> Jet {
        let n = self.0.len();
        let mut b = vec![0.0; n];
        b[0] = 1.0 / self.0[0];
        for k in 1..n {
            let s: f64 = (1..=k).map(|j| self.0[j] * b[k - j]).sum();
            b[k] = -s * b[0];
        }
        Jet(b)
    }

    fn exp(&self) -> Jet {
        let n = self.0.len();
        let mut e = vec![0.0; n];
        e[0] = self.0[0].exp();
        for k in 1..n {
            let s: f64 = (1..=k).map(|j| j as f64 * self.0[j] * e[k - j]).sum();
            e[k] = s / k as f64;
        }
        Jet(e)
    }

    fn neg(&self) -> Jet {
        Jet(self.0.iter().map(|v| -v).collect())
    }

    /// Derivatives `f^(i)` from Taylor coefficients.
    fn derivatives(&self) -> Vec<f64> {
        let mut fact = 1.0;
        self.0
            .iter()
            .enumerate()
            .map(|(i, c)| {
                if i > 0 {
                    fact *= i as f64;
                }
                c * fact
            })
            .collect()
    }
}

/// `exp(-1/u)` as a jet; zero jet when `u <= 0`.
fn flat_exp_jet(u: &Jet) -> Jet {
    if u.0[0] <= 0.0 {
        return Jet::constant(0.0, u.0.len());
    }
    u.recip().neg().exp()
}

/// Derivatives `0..=order` of the one-dimensional plateau of half-width `h`:
/// 1 on `|t| <= h/2`, 0 on `|t| >= h`, smooth in between.
pub fn plateau_derivatives(t: f64, h: f64, order: usize) -> Vec<f64> {
    let n = order + 1;
    let a = t.abs();
    if a <= h / 2.0 {
        return Jet::constant(1.0, n).derivatives();
    }
    if a >= h {
        return vec![0.0; n];
    }
    let sign = t.signum();
    let mut u = vec![0.0; n];
    u[0] = (h - a) / (h / 2.0);
    if n > 1 {
        u[1] = -sign / (h / 2.0);
    }
    let u = Jet(u);
    let mut v = u.neg();
    v.0[0] += 1.0;
    let p = flat_exp_jet(&u);
    let q = flat_exp_jet(&v);
    p.mul(&p.add(&q).recip()).derivatives()
}

/// Safety factor applied on top of the grid estimate of the derivative sup.
pub const BUMP_SAFETY: f64 = 1.01;
/// Samples per unit-plateau used to estimate derivative sups.
const PLATEAU_GRID: usize = 20_001;

/// The family `f_eps(x) = (2 theta)^(-r) sum_i eps_i omega(2 theta (x - xi_i))`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BumpFamily {
    pub d: usize,
    pub r: usize,
    pub m: usize,
    pub theta: usize,
    pub points: Vec<Vec<f64>>,
    /// `omega = scale * prod_j g(y_j)` with `g` the plateau of half-width `1/sqrt(d)`.
    pub scale: f64,
    /// Grid estimate of `max_{|k| <= r} sup |d^k prod_j g|`.
    pub derivative_sup: f64,
    pub safety: f64,
}

/// Smallest integer `theta >= m^(1/d) / 2` with `theta <= m^(1/d)`.
pub fn bump_theta(m: usize, d: usize) -> Result<usize> {
    if m == 0 || d == 0 {
        return Err(Error::InvalidArgument("m and d must be positive".into()));
    }
    let mut theta: usize = 1;
    while (2 * theta).checked_pow(d as u32).map_or(false, |v| v < m) {
        theta += 1;
    }
    if theta.checked_pow(d as u32).map_or(true, |v| v > m) {
        return Err(Error::InvalidArgument(format!("no admissible theta for m = {m}, d = {d}")));
    }
    Ok(theta)
}

/// Builds `m` disjoint bumps on the lattice `(i + 1/2) / (sqrt(d) theta)`,
/// `i in [-theta, theta - 1]^d`. Without a seed the first `m` lattice
/// points in scan order are used; a seed shuffles the lattice first.
pub fn make_bump_family(d: usize, r: usize, m: usize, seed: Option<u64>) -> Result<BumpFamily> {
    let theta = bump_theta(m, d)?;
    let sd = (d as f64).sqrt();
    let side = 2 * theta;
    let mut lattice: Vec<Vec<f64>> = Vec::with_capacity(side.pow(d as u32));
    let mut idx = vec![0usize; d];
    'outer: loop {
        lattice.push(
            idx.iter()
                .map(|&i| (i as f64 - theta as f64 + 0.5) / (sd * theta as f64))
                .collect(),
        );
        let mut j = d;
        loop {
            if j == 0 {
                break 'outer;
            }
            j -= 1;
            idx[j] += 1;
            if idx[j] < side {
                break;
            }
            idx[j] = 0;
        }
    }
    if let Some(seed) = seed {
        lattice.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    }
    lattice.truncate(m);

    let h = 1.0 / sd;
    let mut sups = vec![0.0f64; r + 1];
    for i in 0..PLATEAU_GRID {
        let t = -h + 2.0 * h * i as f64 / (PLATEAU_GRID - 1) as f64;
        for (s, v) in sups.iter_mut().zip(plateau_derivatives(t, h, r)) {
            *s = s.max(v.abs());
        }
    }
    let mut derivative_sup: f64 = 0.0;
    for k in multi_indices_up_to(d, r) {
        let prod: f64 = k.entries().iter().map(|&e| sups[e as usize]).product();
        derivative_sup = derivative_sup.max(prod);
    }
    Ok(BumpFamily {
        d,
        r,
        m,
        theta,
        points: lattice,
        scale: 1.0 / (derivative_sup * BUMP_SAFETY),
        derivative_sup,
        safety: BUMP_SAFETY,
    })
}

impl BumpFamily {
    fn half_width(&self) -> f64 {
        1.0 / (self.d as f64).sqrt()
    }

    /// `omega(y)`.
    pub fn omega(&self, y: &[f64]) -> f64 {
        let h = self.half_width();
        self.scale * y.iter().map(|&t| plateau_derivatives(t, h, 0)[0]).product::<f64>()
    }

    pub fn eval(&self, eps: &[f64], x: &[f64]) -> Result<f64> {
        ensure_dim(self.m, eps.len())?;
        ensure_dim(self.d, x.len())?;
        let c = 2.0 * self.theta as f64;
        let mut acc = 0.0;
        for (e, xi) in eps.iter().zip(&self.points) {
            let y: Vec<f64> = x.iter().zip(xi).map(|(a, b)| c * (a - b)).collect();
            acc += e * self.omega(&y);
        }
        Ok(acc * c.powi(-(self.r as i32)))
    }

    /// `d^k f_eps (x)` from exact jet derivatives of the plateau.
    pub fn eval_derivative(&self, eps: &[f64], k: &MultiIndex, x: &[f64]) -> Result<f64> {
        ensure_dim(self.m, eps.len())?;
        ensure_dim(self.d, x.len())?;
        ensure_dim(self.d, k.dim())?;
        let c = 2.0 * self.theta as f64;
        let h = self.half_width();
        let mut acc = 0.0;
        for (e, xi) in eps.iter().zip(&self.points) {
            let mut term = self.scale;
            for j in 0..self.d {
                let kj = k.entries()[j] as usize;
                term *= plateau_derivatives(c * (x[j] - xi[j]), h, kj)[kj];
            }
            acc += e * term;
        }
        Ok(acc * c.powi(k.order() as i32 - self.r as i32))
    }
}

/// `q_(k,d,ell) = (k_(ell+1) + ... + k_d + d - ell)^(-1) * int_{S^(d-ell-1)} xi^(k_tail)`.
pub fn q_coefficient(k: &MultiIndex, d: usize, ell: usize) -> Result<f64> {
    ensure_dim(d, k.dim())?;
    if ell == 0 || ell >= d {
        return Err(Error::InvalidArgument(format!("need 1 <= ell < d, got ell = {ell}, d = {d}")));
    }
    let tail = MultiIndex(k.entries()[ell..].to_vec());
    let rule = build_sphere_rule(d - ell - 1, tail.order())?;
    let integral = rule.integrate(&|xi: &[f64]| tail.eval_monomial(xi))?;
    Ok(integral / (tail.order() + d - ell) as f64)
}

/// `cos^a sin^b = sum_h alpha_h cos(h phi) + beta_h sin(h phi)`, `h = 0..=a+b`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrigExpansion {
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
}

impl TrigExpansion {
    pub fn eval(&self, phi: f64) -> f64 {
        self.alpha
            .iter()
            .zip(&self.beta)
            .enumerate()
            .map(|(h, (a, b))| a * (h as f64 * phi).cos() + b * (h as f64 * phi).sin())
            .sum()
    }
}

/// Product-to-sum reduction of `cos^a sin^b`.
pub fn trig_reduce(a: usize, b: usize) -> TrigExpansion {
    let n = a + b + 1;
    let mut c = vec![0.0; n + 1];
    let mut s = vec![0.0; n + 1];
    c[0] = 1.0;
    let mut top = 0;
    let step = |c: &mut Vec<f64>, s: &mut Vec<f64>, top: usize, by_cos: bool| {
        let mut nc = vec![0.0; c.len()];
        let mut ns = vec![0.0; s.len()];
        // cos(h+1) and sin(h+1) terms; h-1 folds back through cos(-x) = cos x, sin(-x) = -sin x
        let put = |nc: &mut Vec<f64>, ns: &mut Vec<f64>, h: i64, cv: f64, sv: f64| {
            let (idx, sgn) = if h < 0 { ((-h) as usize, -1.0) } else { (h as usize, 1.0) };
            nc[idx] += cv;
            ns[idx] += sgn * sv;
        };
        for h in 0..=top {
            let (ch, sh) = (c[h], s[h]);
            let hi = h as i64;
            if by_cos {
                put(&mut nc, &mut ns, hi + 1, 0.5 * ch, 0.5 * sh);
                put(&mut nc, &mut ns, hi - 1, 0.5 * ch, 0.5 * sh);
            } else {
                put(&mut nc, &mut ns, hi + 1, -0.5 * sh, 0.5 * ch);
                put(&mut nc, &mut ns, hi - 1, 0.5 * sh, -0.5 * ch);
            }
        }
        // sin(0 * phi) vanishes identically
        ns[0] = 0.0;
        *c = nc;
        *s = ns;
    };
    for _ in 0..a {
        step(&mut c, &mut s, top, true);
        top += 1;
    }
    for _ in 0..b {
        step(&mut c, &mut s, top, false);
        top += 1;
    }
    c.truncate(n);
    s.truncate(n);
    TrigExpansion { alpha: c, beta: s }
}

/// Quadrature resolution of the two sides of the expansion check.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ExpansionQuadrature {
    /// Exactness of the ball rule for `<rho_A, P>`.
    pub ball_exactness: usize,
    /// Points per angle for the coefficients `b_h`.
    pub angular_points: usize,
}

impl Default for ExpansionQuadrature {
    fn default() -> Self {
        ExpansionQuadrature {
            ball_exactness: 16,
            angular_points: 48,
        }
    }
}

/// Tables `q_k` and `zeta_(h,k)` for fixed `(d, ell, s)`.
#[derive(Clone, Debug)]
pub struct ExpansionCertificate {
    pub d: usize,
    pub ell: usize,
    pub s: usize,
    q: BTreeMap<MultiIndex, f64>,
    zeta: BTreeMap<MultiIndex, Vec<f64>>,
}

impl ExpansionCertificate {
    pub fn new(d: usize, ell: usize, s: usize) -> Result<Self> {
        if ell == 0 || ell >= d {
            return Err(Error::InvalidArgument(format!("need 1 <= ell < d, got ell = {ell}, d = {d}")));
        }
        let width = d + s + 1;
        let mut q = BTreeMap::new();
        let mut zeta = BTreeMap::new();
        for k in multi_indices_up_to(d, s) {
            let e = k.entries();
            let qk = q_coefficient(&k, d, ell)?;
            let mut table = vec![1.0];
            for axis in 1..=ell {
                let (a, b) = if axis < ell {
                    let head: u32 = e[..axis].iter().sum();
                    (e[axis] as usize, axis - 1 + head as usize)
                } else {
                    let head: u32 = e[..ell].iter().sum();
                    let tail: u32 = e[ell..].iter().sum();
                    (tail as usize + d - ell + 1, ell - 1 + head as usize)
                };
                let t = trig_reduce(a, b);
                let mut coded = vec![0.0; 2 * width];
                for h in 0..t.alpha.len() {
                    coded[h] = t.alpha[h];
                    coded[width + h] = t.beta[h];
                }
                let mut next = vec![0.0; table.len() * coded.len()];
                for (c, &cv) in coded.iter().enumerate() {
                    for (i, &tv) in table.iter().enumerate() {
                        next[c * table.len() + i] = tv * cv;
                    }
                }
                table = next;
            }
            zeta.insert(k.clone(), table.into_iter().map(|v| v * qk).collect());
            q.insert(k, qk);
        }
        Ok(ExpansionCertificate { d, ell, s, q, zeta })
    }

    /// `mu = 2^ell (d + s + 1)^ell`.
    pub fn mu(&self) -> usize {
        (2 * (self.d + self.s + 1)).pow(self.ell as u32)
    }

    pub fn q(&self, k: &MultiIndex) -> Option<f64> {
        self.q.get(k).copied()
    }

    pub fn zeta(&self, k: &MultiIndex) -> Option<&[f64]> {
        self.zeta.get(k).map(|v| v.as_slice())
    }

    fn axis_factors(&self, phi: f64) -> Vec<f64> {
        let width = self.d + self.s + 1;
        let mut out = vec![0.0; 2 * width];
        for h in 0..width {
            out[h] = (h as f64 * phi).cos();
            out[width + h] = (h as f64 * phi).sin();
        }
        out
    }

    /// `f_h(phi)`, a product of one `cos(tau phi_k)` or `sin(tau phi_k)` per axis.
    pub fn f_h(&self, h: usize, phi: &[f64]) -> f64 {
        let width = 2 * (self.d + self.s + 1);
        let mut rest = h;
        let mut acc = 1.0;
        for &p in phi.iter().take(self.ell) {
            acc *= self.axis_factors(p)[rest % width];
            rest /= width;
        }
        acc
    }

    /// Point of `B^ell` for the angles `phi`.
    pub fn angles_to_point(&self, phi: &[f64]) -> Vec<f64> {
        let ell = self.ell;
        (0..ell)
            .map(|j| {
                let lead = if j == 0 { 1.0 } else { phi[j - 1].cos() };
                lead * phi[j..ell].iter().map(|p| p.sin()).product::<f64>()
            })
            .collect()
    }

    /// `b_h(rho)` for every `h`, integrated with `points` nodes per angle.
    pub fn b_coefficients(&self, rho: &dyn Evaluate, points: usize) -> Result<Vec<f64>> {
        let ell = self.ell;
        let mut axes: Vec<(Vec<f64>, Vec<f64>)> = Vec::with_capacity(ell);
        for axis in 1..=ell {
            let (lo, hi, periodic) = if ell == 1 {
                (-PI / 2.0, PI / 2.0, false)
            } else if axis == 1 {
                (-PI, PI, true)
            } else if axis < ell {
                (0.0, PI, false)
            } else {
                (0.0, PI / 2.0, false)
            };
            if periodic {
                let w = (hi - lo) / points as f64;
                axes.push(((0..points).map(|i| lo + w * i as f64).collect(), vec![w; points]));
            } else {
                let (x, w) = gauss_legendre(points);
                let half = 0.5 * (hi - lo);
                axes.push((
                    x.iter().map(|t| lo + half * (t + 1.0)).collect(),
                    w.iter().map(|v| v * half).collect(),
                ));
            }
        }
        let mu = self.mu();
        let mut b = vec![0.0; mu];
        let mut idx = vec![0usize; ell];
        loop {
            let phi: Vec<f64> = idx.iter().enumerate().map(|(a, &i)| axes[a].0[i]).collect();
            let w: f64 = idx.iter().enumerate().map(|(a, &i)| axes[a].1[i]).product();
            let y = self.angles_to_point(&phi);
            let v = rho.evaluate_at(&y);
            if !v.is_finite() {
                return Err(Error::NonFinite { node: y, value: v });
            }
            let mut outer = vec![w * v];
            for &p in &phi {
                let f = self.axis_factors(p);
                let mut next = vec![0.0; outer.len() * f.len()];
                for (c, &fv) in f.iter().enumerate() {
                    for (i, &ov) in outer.iter().enumerate() {
                        next[c * outer.len() + i] = ov * fv;
                    }
                }
                outer = next;
            }
            for (bh, o) in b.iter_mut().zip(&outer) {
                *bh += o;
            }
            let mut a = 0;
            loop {
                if a == ell {
                    return Ok(b);
                }
                idx[a] += 1;
                if idx[a] < points {
                    break;
                }
                idx[a] = 0;
                a += 1;
            }
        }
    }

    /// `P_k(sigma; P)`, the coefficients of `y -> P(sigma y)`.
    pub fn rotated_coefficients(&self, p: &MultiIndexPolynomial, sigma: &[Vec<f64>]) -> Result<MultiIndexPolynomial> {
        ensure_dim(self.d, p.dim())?;
        p.compose_linear(sigma, &vec![0.0; self.d])
    }

    /// `Q_h(sigma; P)` for every `h`.
    pub fn q_h_values(&self, p: &MultiIndexPolynomial, sigma: &[Vec<f64>]) -> Result<Vec<f64>> {
        let rotated = self.rotated_coefficients(p, sigma)?;
        let mut out = vec![0.0; self.mu()];
        for (k, c) in rotated.terms() {
            let z = self.zeta.get(k).ok_or_else(|| {
                Error::InvalidArgument(format!("polynomial degree exceeds s = {}", self.s))
            })?;
            for (o, zv) in out.iter_mut().zip(z) {
                *o += zv * c;
            }
        }
        Ok(out)
    }

    /// `Q_h(.; P)` as polynomials in the `d^2` entries of `sigma`, row-major.
    pub fn q_h_polynomials(&self, p: &MultiIndexPolynomial) -> Result<Vec<MultiIndexPolynomial>> {
        ensure_dim(self.d, p.dim())?;
        let d = self.d;
        let nv = d * d + d;
        // (sigma y)_i = sum_j sigma_ij y_j, in the variables (sigma, y)
        let forms: Vec<MultiIndexPolynomial> = (0..d)
            .map(|i| {
                let mut f = Polynomial::zero(nv);
                for j in 0..d {
                    let mut e = vec![0u32; nv];
                    e[i * d + j] = 1;
                    e[d * d + j] = 1;
                    f.add_term(MultiIndex(e), 1.0).expect("sized");
                }
                f
            })
            .collect();
        let mut full = Polynomial::zero(nv);
        for (k, c) in p.terms() {
            let mut term = Polynomial::constant(nv, *c);
            for (f, &e) in forms.iter().zip(k.entries()) {
                if e > 0 {
                    term = &term * &f.pow(e);
                }
            }
            full = &full + &term;
        }
        let mut out = vec![Polynomial::zero(d * d); self.mu()];
        for (k, c) in full.terms() {
            let sigma_part = MultiIndex(k.entries()[..d * d].to_vec());
            let y_part = MultiIndex(k.entries()[d * d..].to_vec());
            let z = self.zeta.get(&y_part).ok_or_else(|| {
                Error::InvalidArgument(format!("polynomial degree exceeds s = {}", self.s))
            })?;
            for (o, zv) in out.iter_mut().zip(z) {
                if *zv != 0.0 {
                    o.add_term(sigma_part.clone(), zv * c)?;
                }
            }
        }
        Ok(out)
    }
}

/// Orthogonal `sigma` whose first `ell` columns are the rows of `A`, so
/// `A sigma = I_(ell x d)`. `A` must have orthonormal rows.
pub fn complete_orthogonal(a: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let ell = a.len();
    let d = a.first().map(|r| r.len()).unwrap_or(0);
    for i in 0..ell {
        ensure_dim(d, a[i].len())?;
        for j in 0..ell {
            let g: f64 = a[i].iter().zip(&a[j]).map(|(x, y)| x * y).sum();
            let target = if i == j { 1.0 } else { 0.0 };
            if (g - target).abs() > 1e-10 {
                return Err(Error::InvalidArgument("A must have orthonormal rows".into()));
            }
        }
    }
    let mut cols: Vec<Vec<f64>> = a.to_vec();
    let mut e = 0;
    while cols.len() < d {
        let mut v = vec![0.0; d];
        v[e] = 1.0;
        e += 1;
        for _ in 0..2 {
            for q in &cols {
                let h: f64 = q.iter().zip(&v).map(|(x, y)| x * y).sum();
                v.iter_mut().zip(q).for_each(|(x, y)| *x -= h * y);
            }
        }
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-6 {
            cols.push(v.into_iter().map(|x| x / n).collect());
        }
    }
    Ok((0..d).map(|i| (0..d).map(|j| cols[j][i]).collect()).collect())
}

/// Both sides of `<rho_A, P> = sum_h b_h(rho) Q_h(sigma; P)`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExpansionCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub deviation: f64,
}

/// Evaluates both sides for `rho` on `R^ell`, `A` with orthonormal rows,
/// orthogonal `sigma` with `A sigma = I_(ell x d)`, and `P`.
pub fn verify_inner_product_expansion(
    rho: &dyn Evaluate,
    a: &[Vec<f64>],
    sigma: &[Vec<f64>],
    p: &MultiIndexPolynomial,
    quad: ExpansionQuadrature,
) -> Result<ExpansionCheck> {
    let ell = a.len();
    let d = p.dim();
    ensure_dim(d, sigma.len())?;
    for (i, row) in a.iter().enumerate() {
        ensure_dim(d, row.len())?;
        for j in 0..d {
            ensure_dim(d, sigma[j].len())?;
            let v: f64 = (0..d).map(|t| row[t] * sigma[t][j]).sum();
            let target = if i == j { 1.0 } else { 0.0 };
            if (v - target).abs() > 1e-10 {
                return Err(Error::InvalidArgument(format!(
                    "A sigma differs from I at ({i}, {j}) by {:e}",
                    (v - target).abs()
                )));
            }
        }
    }
    let s = p.degree().unwrap_or(0);
    let cert = ExpansionCertificate::new(d, ell, s)?;
    let rule = build_ball_rule(d, quad.ball_exactness)?;
    let ridge = |x: &[f64]| {
        let ax: Vec<f64> = a
            .iter()
            .map(|row| row.iter().zip(x).map(|(r, v)| r * v).sum())
            .collect();
        rho.evaluate_at(&ax) * p.evaluate(x)
    };
    let lhs = rule.integrate(&ridge)?;
    let b = cert.b_coefficients(rho, quad.angular_points)?;
    let qh = cert.q_h_values(p, sigma)?;
    let rhs: f64 = b.iter().zip(&qh).map(|(x, y)| x * y).sum();
    Ok(ExpansionCheck {
        lhs,
        rhs,
        deviation: (lhs - rhs).abs(),
    })
}

/// Norms of `P_n(x) = x_1^(-1/3) psi_n(x_1)` on `B^d`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CounterexampleReport {
    pub n: usize,
    pub d: usize,
    pub l1: f64,
    pub l2_squared: f64,
    pub linf: f64,
    /// `2 ||P_n||_2^2 / (||P_n||_inf ||P_n||_1)`.
    pub ratio: f64,
}

/// Piecewise-linear ramp: 0 below `1/n`, 1 from `2/n` on.
pub fn ramp(n: usize, t: f64) -> f64 {
    let nf = n as f64;
    if t <= 1.0 / nf {
        0.0
    } else if t >= 2.0 / nf {
        1.0
    } else {
        nf * t - 1.0
    }
}

/// `t^(-1/3) psi_n(t)`, zero for `t <= 1/n`.
pub fn counterexample_profile(n: usize, t: f64) -> f64 {
    let r = ramp(n, t);
    if r == 0.0 {
        0.0
    } else {
        (1.0 / t).cbrt() * r
    }
}

/// Norm ratio of the counterexample; needs `n >= ceil(4 sqrt(d))`.
pub fn counterexample_ratio(n: usize, d: usize) -> Result<CounterexampleReport> {
    if d == 0 {
        return Err(Error::InvalidArgument("d must be positive".into()));
    }
    let min_n = (4.0 * (d as f64).sqrt()).ceil() as usize;
    if n < min_n {
        return Err(Error::InvalidArgument(format!("n = {n} is below ceil(4 sqrt(d)) = {min_n}")));
    }
    let nf = n as f64;
    let section = ball_volume(d - 1);
    let slice = |t: f64| (1.0 - t * t).max(0.0).powf((d as f64 - 1.0) / 2.0);
    let integrate = |f: &dyn Fn(f64) -> f64| {
        let a = ::quadrature::double_exponential::integrate(|t| f(t), 1.0 / nf, 2.0 / nf, 1e-14).integral;
        let b = ::quadrature::double_exponential::integrate(|t| f(t), 2.0 / nf, 1.0, 1e-14).integral;
        section * (a + b)
    };
    let l1 = integrate(&|t| counterexample_profile(n, t) * slice(t));
    let l2_squared = integrate(&|t| counterexample_profile(n, t).powi(2) * slice(t));
    let mut linf = counterexample_profile(n, 2.0 / nf);
    for i in 0..=20_000 {
        let t = 1.0 / nf + (1.0 - 1.0 / nf) * i as f64 / 20_000.0;
        linf = linf.max(counterexample_profile(n, t));
    }
    Ok(CounterexampleReport {
        n,
        d,
        l1,
        l2_squared,
        linf,
        ratio: 2.0 * l2_squared / (linf * l1),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn theta_and_lattice() {
        let fam = make_bump_family(1, 1, 2, None).unwrap();
        assert_eq!(fam.theta, 1);
        assert_eq!(fam.points, vec![vec![-0.5], vec![0.5]]);
        assert_eq!(bump_theta(5, 2).unwrap(), 2);
        assert_eq!(bump_theta(16, 2).unwrap(), 2);
    }

    #[test]
    fn trig_examples() {
        let t = trig_reduce(2, 0);
        assert_eq!(t.alpha, vec![0.5, 0.0, 0.5]);
        assert_eq!(t.beta, vec![0.0; 3]);
        let t = trig_reduce(0, 1);
        assert_eq!(t.beta, vec![0.0, 1.0]);
        let t = trig_reduce(1, 1);
        assert_eq!(t.beta[2], 0.5);
        assert_eq!(t.alpha, vec![0.0; 3]);
    }

    #[test]
    fn q_examples() {
        assert_relative_eq!(q_coefficient(&MultiIndex(vec![0, 0, 0]), 3, 1).unwrap(), PI, epsilon = 1e-14);
        assert_relative_eq!(q_coefficient(&MultiIndex(vec![0, 0, 0]), 3, 2).unwrap(), 2.0);
        assert_eq!(q_coefficient(&MultiIndex(vec![0, 0, 1]), 3, 2).unwrap(), 0.0);
    }

    #[test]
    fn plateau_values() {
        let h = 1.0;
        assert_eq!(plateau_derivatives(0.2, h, 2), vec![1.0, 0.0, 0.0]);
        assert_eq!(plateau_derivatives(1.2, h, 1), vec![0.0, 0.0]);
        let mid = plateau_derivatives(0.75, h, 1);
        assert_relative_eq!(mid[0], 0.5, epsilon = 1e-14);
        assert!(mid[1] < 0.0);
    }

    #[test]
    fn counterexample_precondition() {
        assert!(counterexample_ratio(7, 4).is_err());
        assert!(counterexample_ratio(8, 4).is_ok());
    }

    #[test]
    fn orthogonal_completion() {
        let a = vec![vec![0.6, 0.8, 0.0]];
        let s = complete_orthogonal(&a).unwrap();
        for i in 0..3 {
            assert_eq!(s[i][0], a[0][i]);
        }
    }
}
