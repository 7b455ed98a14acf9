//! Smoothed spectral truncations `Pr_s` and their Cesàro decomposition.
//!
//! `Pr_s f = sum_{i in I_(2s-1)} eta(deg P_i / s) <f, P_i> P_i` where `eta`
//! is a smooth cutoff equal to one on `[-1, 1]` and vanishing for `|x| >= 2`.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::orthobasis::OrthoBasis;
use crate::polycore::{binomial, multi_indices_up_to, MultiIndexPolynomial, Polynomial};
use crate::quadrature::Evaluate;

/// `exp(-1/t)` for `t > 0`, zero otherwise.
fn flat_exp(t: f64) -> f64 {
    if t > 0.0 {
        (-1.0 / t).exp()
    } else {
        0.0
    }
}

/// Smooth monotone transition from 0 (at `u <= 0`) to 1 (at `u >= 1`).
pub fn smooth_transition(u: f64) -> f64 {
    let a = flat_exp(u);
    let b = flat_exp(1.0 - u);
    if a + b == 0.0 {
        0.0
    } else {
        a / (a + b)
    }
}

/// The default cutoff: 1 on `[-1, 1]`, 0 for `|x| >= 2`, smooth in between.
pub fn smooth_step(x: f64) -> f64 {
    smooth_transition(2.0 - x.abs())
}

/// A cutoff profile `eta`.
#[derive(Clone)]
pub struct Cutoff {
    name: String,
    f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl Cutoff {
    pub fn smooth_step() -> Self {
        Cutoff::custom("smooth_step", smooth_step)
    }

    pub fn custom<F: Fn(f64) -> f64 + Send + Sync + 'static>(name: &str, f: F) -> Self {
        Cutoff {
            name: name.to_string(),
            f: Arc::new(f),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn eval(&self, x: f64) -> f64 {
        (self.f)(x)
    }
}

impl Default for Cutoff {
    fn default() -> Self {
        Cutoff::smooth_step()
    }
}

impl fmt::Debug for Cutoff {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Cutoff").field("name", &self.name).finish()
    }
}

/// Default Cesàro order for dimension `d`.
pub fn default_sigma(d: usize) -> usize {
    d / 2 + 1
}

/// `Pr_s` over a fixed basis.
#[derive(Clone, Debug)]
pub struct QuasiProjector {
    basis: Arc<OrthoBasis>,
    s: usize,
    cutoff: Cutoff,
    multipliers: Vec<f64>,
}

impl QuasiProjector {
    /// Needs a basis of degree at least `2s - 1`.
    pub fn new(basis: Arc<OrthoBasis>, s: usize, cutoff: Cutoff) -> Result<Self> {
        if s == 0 {
            return Err(Error::InvalidArgument("s must be at least 1".into()));
        }
        if basis.max_degree() < 2 * s - 1 {
            return Err(Error::InvalidArgument(format!(
                "basis degree {} is below 2s - 1 = {}",
                basis.max_degree(),
                2 * s - 1
            )));
        }
        let multipliers = basis
            .indices_up_to(2 * s - 1)
            .map(|i| cutoff.eval(basis.degree(i) as f64 / s as f64))
            .collect();
        Ok(QuasiProjector {
            basis,
            s,
            cutoff,
            multipliers,
        })
    }

    pub fn s(&self) -> usize {
        self.s
    }

    pub fn basis(&self) -> &OrthoBasis {
        &self.basis
    }

    pub fn cutoff(&self) -> &Cutoff {
        &self.cutoff
    }

    /// `a_(i,s) = eta(deg P_i / s)` for `i` in `I_(2s-1)`.
    pub fn multipliers(&self) -> &[f64] {
        &self.multipliers
    }

    /// Basis coefficients `a_(i,s) <f, P_i>` of `Pr_s f`.
    pub fn coefficients(&self, f: &dyn Evaluate) -> Result<Vec<f64>> {
        let c = self.basis.project_coefficients(f, 2 * self.s - 1)?;
        Ok(self.apply_multipliers(&c))
    }

    fn apply_multipliers(&self, c: &[f64]) -> Vec<f64> {
        c.iter().zip(&self.multipliers).map(|(a, b)| a * b).collect()
    }

    pub fn apply(&self, f: &dyn Evaluate) -> Result<MultiIndexPolynomial> {
        Ok(self.basis.combine(&self.coefficients(f)?))
    }

    /// `||Pr_s P - P||_2 / ||P||_2`; zero for the zero polynomial.
    pub fn fixed_point_residual(&self, p: &MultiIndexPolynomial) -> Result<f64> {
        let rule = self.basis.rule();
        let samples = rule.sample(p)?;
        let c = self.basis.coefficients_from_samples(&samples, 2 * self.s - 1);
        let image = self.basis.combine_values(&self.apply_multipliers(&c));
        let diff: Vec<f64> = image.iter().zip(&samples).map(|(a, b)| (a - b).powi(2)).collect();
        let sq: Vec<f64> = samples.iter().map(|a| a * a).collect();
        let num = rule.weighted_sum(&diff).sqrt();
        let den = rule.weighted_sum(&sq).sqrt();
        Ok(if den == 0.0 { num } else { num / den })
    }
}

/// `(Delta^order g)(x)` with `Delta g(x) = g(x) - g(x + 1)`, computed recursively.
pub fn forward_difference(g: &dyn Fn(f64) -> f64, order: usize, x: f64) -> f64 {
    if order == 0 {
        g(x)
    } else {
        forward_difference(g, order - 1, x) - forward_difference(g, order - 1, x + 1.0)
    }
}

/// Basis coefficients of the Cesàro mean `S_k^sigma f`, given `<f, P_i>` for
/// `i` in `I_k` or more.
pub fn cesaro_mean_coefficients(basis: &OrthoBasis, inner: &[f64], k: usize, sigma: usize) -> Vec<f64> {
    let norm = binomial(k + sigma, sigma) as f64;
    let mut out = vec![0.0; basis.indices_up_to(k).end];
    for j in 0..=k {
        let w = binomial(k - j + sigma, sigma) as f64 / norm;
        for i in basis.indices_of_degree(j) {
            out[i] = w * inner[i];
        }
    }
    out
}

/// `S_k^sigma f = (1 / C(k+sigma, sigma)) sum_j C(k-j+sigma, sigma) proj_j f`.
pub fn cesaro_mean(basis: &OrthoBasis, f: &dyn Evaluate, k: usize, sigma: usize) -> Result<MultiIndexPolynomial> {
    if k > basis.max_degree() {
        return Err(Error::InvalidArgument(format!(
            "order {k} exceeds the basis degree {}",
            basis.max_degree()
        )));
    }
    let inner = basis.project_coefficients(f, k)?;
    Ok(basis.combine(&cesaro_mean_coefficients(basis, &inner, k, sigma)))
}

/// `proj_j f`, the component of degree exactly `j`.
pub fn degree_projection(basis: &OrthoBasis, f: &dyn Evaluate, j: usize) -> Result<MultiIndexPolynomial> {
    let inner = basis.project_coefficients(f, j)?;
    let mut c = vec![0.0; inner.len()];
    for i in basis.indices_of_degree(j) {
        c[i] = inner[i];
    }
    Ok(basis.combine(&c))
}

/// Largest monomial-coefficient gap between `Pr_s f` and its Cesàro expansion
/// `sum_{k < 2s} (Delta^(sigma+1) eta*)(k) C(k+sigma, sigma) S_k^sigma f`,
/// where `eta*(x) = eta(x / s)`.
pub fn verify_cesaro_identity(proj: &QuasiProjector, f: &dyn Evaluate, sigma: usize) -> Result<f64> {
    let basis = proj.basis();
    let s = proj.s();
    let top = 2 * s - 1;
    let inner = basis.project_coefficients(f, top)?;
    let lhs = proj.apply_multipliers(&inner);
    let cutoff = proj.cutoff().clone();
    let scaled = move |x: f64| cutoff.eval(x / s as f64);
    let mut rhs = vec![0.0; lhs.len()];
    for k in 0..=top {
        let weight = forward_difference(&scaled, sigma + 1, k as f64) * binomial(k + sigma, sigma) as f64;
        if weight == 0.0 {
            continue;
        }
        for (r, c) in rhs.iter_mut().zip(cesaro_mean_coefficients(basis, &inner, k, sigma)) {
            *r += weight * c;
        }
    }
    let diff = basis.combine(&lhs).checked_sub(&basis.combine(&rhs))?;
    Ok(diff.max_abs_coefficient())
}

/// Running maximum of `||Pr_s f||_1 / ||f||_1` over seeded trial functions.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NormEstimate {
    pub estimate: f64,
    pub ratios: Vec<f64>,
}

/// Lower estimate of the `L^1` operator norm of `Pr_s`.
///
/// Even trials are random polynomials of degree `<= 4s`, odd trials are
/// compactly supported bumps of width about `1/s`. Trial `t` depends only on
/// `(seed, t)`, so the estimate never drops as `trial_count` grows.
pub fn estimate_l1_operator_norm(proj: &QuasiProjector, trial_count: usize, seed: u64) -> Result<NormEstimate> {
    if trial_count == 0 {
        return Err(Error::InvalidArgument("trial_count must be at least 1".into()));
    }
    let basis = proj.basis();
    let rule = basis.rule();
    let d = basis.dim();
    let s = proj.s();
    let monomials = multi_indices_up_to(d, 4 * s);
    let mut ratios = Vec::with_capacity(trial_count);
    for t in 0..trial_count {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(t as u64);
        let samples: Vec<f64> = if t % 2 == 0 {
            let p: MultiIndexPolynomial = Polynomial::from_terms(
                d,
                monomials
                    .iter()
                    .map(|k| (k.clone(), rng.sample::<f64, _>(StandardNormal))),
            )?;
            rule.sample(&p)?
        } else {
            let center = random_point_in_ball(&mut rng, d, 0.9);
            let width = rng.gen_range(0.5..2.0) / (s as f64 + 1.0);
            let bump = move |x: &[f64]| {
                let r2: f64 = x.iter().zip(&center).map(|(a, b)| (a - b).powi(2)).sum::<f64>()
                    / (width * width);
                if r2 < 1.0 {
                    (-1.0 / (1.0 - r2)).exp()
                } else {
                    0.0
                }
            };
            rule.sample(&bump)?
        };
        let c = basis.coefficients_from_samples(&samples, 2 * s - 1);
        let image = basis.combine_values(&proj.apply_multipliers(&c));
        let abs_f: Vec<f64> = samples.iter().map(|v| v.abs()).collect();
        let abs_g: Vec<f64> = image.iter().map(|v| v.abs()).collect();
        let nf = rule.weighted_sum(&abs_f);
        let ng = rule.weighted_sum(&abs_g);
        ratios.push(if nf > 0.0 { ng / nf } else { 0.0 });
    }
    let estimate = ratios.iter().cloned().fold(0.0, f64::max);
    Ok(NormEstimate { estimate, ratios })
}

pub(crate) fn random_point_in_ball<R: Rng>(rng: &mut R, d: usize, radius: f64) -> Vec<f64> {
    let dir = random_unit_vector(rng, d);
    let r = radius * rng.gen::<f64>().powf(1.0 / d as f64);
    dir.into_iter().map(|v| v * r).collect()
}

pub(crate) fn random_unit_vector<R: Rng>(rng: &mut R, d: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let n = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if n > 1e-8 {
            return v.into_iter().map(|a| a / n).collect();
        }
    }
}

/// Summary emitted by the projector checks.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ProjectorReport {
    pub s: usize,
    pub sigma: usize,
    pub max_fixed_point_residual: f64,
    pub cesaro_deviation: f64,
    pub norm_estimate: f64,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cutoff_shape() {
        assert_eq!(smooth_step(0.0), 1.0);
        assert_eq!(smooth_step(1.0), 1.0);
        assert_eq!(smooth_step(-1.0), 1.0);
        assert_eq!(smooth_step(2.0), 0.0);
        assert_eq!(smooth_step(3.5), 0.0);
        let mid = smooth_step(1.5);
        assert!(mid > 0.0 && mid < 1.0);
        let mut prev = 1.0;
        for i in 0..=1000 {
            let v = smooth_step(1.0 + i as f64 / 1000.0);
            assert!(v <= prev);
            prev = v;
        }
    }

    #[test]
    fn second_difference_of_square() {
        let g = |x: f64| x * x;
        for x in [-3.0, 0.0, 2.5, 10.0] {
            assert_eq!(forward_difference(&g, 2, x), 2.0);
        }
        assert_eq!(forward_difference(&g, 1, 0.0), -1.0);
    }

    #[test]
    fn default_sigma_values() {
        assert_eq!(default_sigma(1), 1);
        assert_eq!(default_sigma(2), 2);
        assert_eq!(default_sigma(3), 2);
    }
}
