//! Product quadrature on the unit ball and unit sphere.
//!
//! Ball rules combine a radial Gauss–Legendre rule (with `r^(d-1)` folded
//! into the weights) and a sphere rule. Sphere rules recurse on dimension:
//! the last coordinate `t` gets a Gauss–Gegenbauer rule for the weight
//! `(1 - t^2)^((k-2)/2)`, the circle gets equally spaced angles, and `S^0`
//! is the two-point counting measure.

use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::polycore::MultiIndexPolynomial;

/// Largest number of nodes a rule may have.
pub const NODE_CAP: u128 = 10_000_000;

/// Something that can be sampled at a point of `R^d`.
pub trait Evaluate: Sync {
    fn evaluate_at(&self, x: &[f64]) -> f64;
}

impl Evaluate for MultiIndexPolynomial {
    fn evaluate_at(&self, x: &[f64]) -> f64 {
        self.evaluate(x)
    }
}

impl<F: Fn(&[f64]) -> f64 + Sync> Evaluate for F {
    fn evaluate_at(&self, x: &[f64]) -> f64 {
        self(x)
    }
}

/// Integration domain. `Sphere(k)` is `S^k`, sitting in `R^(k+1)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Domain {
    Ball(usize),
    Sphere(usize),
}

impl Domain {
    pub fn ambient_dim(&self) -> usize {
        match *self {
            Domain::Ball(d) => d,
            Domain::Sphere(k) => k + 1,
        }
    }

    /// Lebesgue volume of the ball or Hausdorff measure of the sphere.
    pub fn measure(&self) -> f64 {
        match *self {
            Domain::Ball(d) => ball_volume(d),
            Domain::Sphere(k) => sphere_area(k + 1),
        }
    }
}

/// `|B^d|`; `|B^0| = 1`.
pub fn ball_volume(d: usize) -> f64 {
    PI.powf(d as f64 / 2.0) / gamma(d as f64 / 2.0 + 1.0)
}

/// Surface measure of `S^(n-1)` in `R^n`; equals 2 for `n = 1`.
pub fn sphere_area(n: usize) -> f64 {
    2.0 * PI.powf(n as f64 / 2.0) / gamma(n as f64 / 2.0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadratureRule {
    pub domain: Domain,
    pub nodes: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    pub exactness_degree: usize,
}

/// Exactness used when a caller only knows the largest polynomial degree.
pub fn default_exactness(s_max: usize) -> usize {
    2 * s_max + 2
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`, ascending.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d.is_finite() {
            dp = d;
        }
        nodes[n - 1 - i] = x;
        weights[n - 1 - i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// Gauss rule for the weight `(1 - t^2)^lambda` on `[-1, 1]`, `lambda > -1`.
pub fn gauss_gegenbauer(n: usize, lambda: f64) -> (Vec<f64>, Vec<f64>) {
    if lambda == 0.0 {
        return gauss_legendre(n);
    }
    let mut jac = DMatrix::<f64>::zeros(n, n);
    for k in 1..n {
        let kf = k as f64;
        let b = (kf * (kf + 2.0 * lambda) / (4.0 * (kf + lambda).powi(2) - 1.0)).sqrt();
        jac[(k - 1, k)] = b;
        jac[(k, k - 1)] = b;
    }
    let mu0 = PI.sqrt() * gamma(lambda + 1.0) / gamma(lambda + 1.5);
    let eig = SymmetricEigen::new(jac);
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|j| (eig.eigenvalues[j], mu0 * eig.eigenvectors[(0, j)].powi(2)))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs.into_iter().unzip()
}

fn check_cap(count: u128) -> Result<()> {
    if count > NODE_CAP {
        Err(Error::TooManyNodes {
            requested: count,
            cap: NODE_CAP,
        })
    } else {
        Ok(())
    }
}

fn gegenbauer_points(exactness: usize) -> usize {
    (exactness + 2) / 2
}

fn ball_node_count(d: usize, exactness: usize) -> u128 {
    if d == 1 {
        return gegenbauer_points(exactness) as u128;
    }
    let radial = (exactness + d).div_ceil(2) as u128;
    radial.saturating_mul(sphere_count_exact(d - 1, exactness))
}

fn sphere_count_exact(k: usize, exactness: usize) -> u128 {
    match k {
        0 => 2,
        1 => exactness as u128 + 1,
        _ => sphere_count_exact(k - 1, exactness).saturating_mul(gegenbauer_points(exactness) as u128),
    }
}

/// Rule on `S^k` exact for polynomials of degree `<= exactness`.
pub fn build_sphere_rule(k: usize, exactness: usize) -> Result<QuadratureRule> {
    check_cap(sphere_count_exact(k, exactness))?;
    let (nodes, weights) = sphere_nodes(k, exactness);
    Ok(QuadratureRule {
        domain: Domain::Sphere(k),
        nodes,
        weights,
        exactness_degree: exactness,
    })
}

fn sphere_nodes(k: usize, exactness: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
    match k {
        0 => (vec![vec![1.0], vec![-1.0]], vec![1.0, 1.0]),
        1 => {
            let n = exactness + 1;
            let w = 2.0 * PI / n as f64;
            let nodes = (0..n)
                .map(|j| {
                    let th = 2.0 * PI * j as f64 / n as f64;
                    vec![th.cos(), th.sin()]
                })
                .collect();
            (nodes, vec![w; n])
        }
        _ => {
            let (inner_nodes, inner_weights) = sphere_nodes(k - 1, exactness);
            let (ts, tw) = gauss_gegenbauer(gegenbauer_points(exactness), (k as f64 - 2.0) / 2.0);
            let mut nodes = Vec::with_capacity(ts.len() * inner_nodes.len());
            let mut weights = Vec::with_capacity(nodes.capacity());
            for (t, wt) in ts.iter().zip(&tw) {
                let rho = (1.0 - t * t).max(0.0).sqrt();
                for (eta, we) in inner_nodes.iter().zip(&inner_weights) {
                    let mut x: Vec<f64> = eta.iter().map(|e| rho * e).collect();
                    x.push(*t);
                    nodes.push(x);
                    weights.push(wt * we);
                }
            }
            (nodes, weights)
        }
    }
}

/// Rule on `B^d` exact for polynomials of degree `<= exactness`.
pub fn build_ball_rule(d: usize, exactness: usize) -> Result<QuadratureRule> {
    if d == 0 {
        return Err(Error::InvalidArgument("ball dimension must be positive".into()));
    }
    check_cap(ball_node_count(d, exactness))?;
    if d == 1 {
        let (x, w) = gauss_legendre(gegenbauer_points(exactness));
        return Ok(QuadratureRule {
            domain: Domain::Ball(1),
            nodes: x.into_iter().map(|v| vec![v]).collect(),
            weights: w,
            exactness_degree: exactness,
        });
    }
    let (sn, sw) = sphere_nodes(d - 1, exactness);
    let (rx, rw) = gauss_legendre((exactness + d).div_ceil(2));
    let mut nodes = Vec::with_capacity(rx.len() * sn.len());
    let mut weights = Vec::with_capacity(nodes.capacity());
    for (x, w) in rx.iter().zip(&rw) {
        let r = 0.5 * (x + 1.0);
        let wr = 0.5 * w * r.powi(d as i32 - 1);
        for (xi, ws) in sn.iter().zip(&sw) {
            nodes.push(xi.iter().map(|v| r * v).collect());
            weights.push(wr * ws);
        }
    }
    Ok(QuadratureRule {
        domain: Domain::Ball(d),
        nodes,
        weights,
        exactness_degree: exactness,
    })
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.domain.ambient_dim()
    }

    /// Hex SHA-256 of the node and weight bits; identifies a rule in metadata.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.exactness_degree.to_le_bytes());
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            for v in x {
                h.update(v.to_bits().to_le_bytes());
            }
            h.update(w.to_bits().to_le_bytes());
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Samples `f` at every node, failing on the first non-finite value.
    pub fn sample(&self, f: &dyn Evaluate) -> Result<Vec<f64>> {
        self.nodes
            .iter()
            .map(|x| {
                let v = f.evaluate_at(x);
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(Error::NonFinite {
                        node: x.clone(),
                        value: v,
                    })
                }
            })
            .collect()
    }

    /// `sum_i w_i v_i` with pairwise summation.
    pub fn weighted_sum(&self, values: &[f64]) -> f64 {
        let prod: Vec<f64> = values.iter().zip(&self.weights).map(|(v, w)| v * w).collect();
        pairwise_sum(&prod)
    }

    pub fn integrate(&self, f: &dyn Evaluate) -> Result<f64> {
        Ok(self.weighted_sum(&self.sample(f)?))
    }
}

/// Pairwise (cascade) summation.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    if values.len() <= 32 {
        return values.iter().sum();
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

/// `<f, g>` on the rule's domain.
pub fn inner_product(f: &dyn Evaluate, g: &dyn Evaluate, rule: &QuadratureRule) -> Result<f64> {
    let fv = rule.sample(f)?;
    let gv = rule.sample(g)?;
    let prod: Vec<f64> = fv.iter().zip(&gv).map(|(a, b)| a * b).collect();
    Ok(rule.weighted_sum(&prod))
}

/// Lattice points of `[-1, 1]^d` inside the closed unit ball.
pub fn ball_grid(d: usize, per_axis: usize) -> Vec<Vec<f64>> {
    // odd counts keep the axes and the poles on the grid
    let per_axis = per_axis.max(3) | 1;
    let axis: Vec<f64> = (0..per_axis)
        .map(|i| -1.0 + 2.0 * i as f64 / (per_axis - 1) as f64)
        .collect();
    let mut out = Vec::new();
    let mut idx = vec![0usize; d];
    loop {
        let x: Vec<f64> = idx.iter().map(|&i| axis[i]).collect();
        if x.iter().map(|v| v * v).sum::<f64>() <= 1.0 + 1e-12 {
            out.push(x);
        }
        let mut j = 0;
        loop {
            if j == d {
                return out;
            }
            idx[j] += 1;
            if idx[j] < per_axis {
                break;
            }
            idx[j] = 0;
            j += 1;
        }
    }
}

/// Points used for sup norms; roughly `target` of them.
pub fn sup_grid(domain: Domain, target: usize) -> Vec<Vec<f64>> {
    match domain {
        Domain::Ball(d) => {
            let per_axis = ((target as f64).powf(1.0 / d as f64).floor() as usize).clamp(3, 4001);
            ball_grid(d, per_axis)
        }
        Domain::Sphere(k) => {
            let mut e = 2;
            while sphere_count_exact(k, e + 2) <= target as u128 && e < 4000 {
                e += 2;
            }
            sphere_nodes(k, e).0
        }
    }
}

/// Default size of the sup-norm grid.
pub const SUP_GRID_POINTS: usize = 40_000;

/// `||f||_q` on the rule's domain; `q = inf` uses [`sup_grid`].
pub fn lq_norm(f: &dyn Evaluate, q: f64, rule: &QuadratureRule) -> Result<f64> {
    if !(q >= 1.0) {
        return Err(Error::InvalidArgument(format!("q must lie in [1, inf], got {q}")));
    }
    if q.is_infinite() {
        let mut m: f64 = 0.0;
        for x in sup_grid(rule.domain, SUP_GRID_POINTS) {
            let v = f.evaluate_at(&x);
            if !v.is_finite() {
                return Err(Error::NonFinite { node: x, value: v });
            }
            m = m.max(v.abs());
        }
        return Ok(m);
    }
    let vals: Vec<f64> = rule.sample(f)?.into_iter().map(|v| v.abs().powf(q)).collect();
    Ok(rule.weighted_sum(&vals).powf(1.0 / q))
}
