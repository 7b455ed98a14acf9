//! Orthonormal polynomial bases on the unit ball.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::polycore::{binomial, multi_indices_up_to, MultiIndex, MultiIndexPolynomial, Polynomial};
use crate::quadrature::{Domain, Evaluate, QuadratureRule};

/// Residual norms below this abort the orthogonalization.
pub const CONDITIONING_FLOOR: f64 = 1e-12;

/// Orthonormal basis `P_1, P_2, ...` of polynomials of degree `<= max_degree`
/// on `B^d`, ordered so every element of degree `j` precedes those of degree
/// `j + 1`.
#[derive(Clone, Debug)]
pub struct OrthoBasis {
    dim: usize,
    max_degree: usize,
    generators: Vec<MultiIndex>,
    polys: Vec<MultiIndexPolynomial>,
    degrees: Vec<usize>,
    rule: QuadratureRule,
    rule_digest: String,
    values: Vec<Vec<f64>>,
}

/// On-disk form of a basis.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SerializedBasis {
    pub dim: usize,
    pub max_degree: usize,
    pub rule_exactness: usize,
    pub rule_digest: String,
    pub generators: Vec<MultiIndex>,
    pub polys: Vec<MultiIndexPolynomial>,
}

/// Builds the basis from monomials in graded order.
pub fn build_basis(d: usize, s_max: usize, rule: &QuadratureRule) -> Result<OrthoBasis> {
    build_basis_with_order(d, s_max, rule, multi_indices_up_to(d, s_max))
}

/// Builds the basis from a caller-chosen monomial order. The order must be
/// graded (non-decreasing in `|k|`) and list every index of order `<= s_max`
/// exactly once.
pub fn build_basis_with_order(
    d: usize,
    s_max: usize,
    rule: &QuadratureRule,
    order: Vec<MultiIndex>,
) -> Result<OrthoBasis> {
    if rule.domain != Domain::Ball(d) {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: rule.dim(),
        });
    }
    if rule.exactness_degree < 2 * s_max {
        return Err(Error::InsufficientExactness {
            required: 2 * s_max,
            available: rule.exactness_degree,
        });
    }
    let canonical = multi_indices_up_to(d, s_max);
    {
        let mut sorted = order.clone();
        sorted.sort();
        if sorted != canonical {
            return Err(Error::InvalidArgument(
                "basis order must list every multi-index up to the degree exactly once".into(),
            ));
        }
        if order.windows(2).any(|w| w[0].order() > w[1].order()) {
            return Err(Error::InvalidArgument("basis order must be graded".into()));
        }
    }
    let position: BTreeMap<&MultiIndex, usize> =
        canonical.iter().enumerate().map(|(i, k)| (k, i)).collect();
    let n = canonical.len();

    let mut coeffs: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut values: Vec<Vec<f64>> = Vec::with_capacity(n);
    for k in &order {
        let mut v: Vec<f64> = rule.nodes.iter().map(|x| k.eval_monomial(x)).collect();
        let mut c = vec![0.0; n];
        c[position[k]] = 1.0;
        for _pass in 0..2 {
            for (cj, vj) in coeffs.iter().zip(&values) {
                let prod: Vec<f64> = v.iter().zip(vj).map(|(a, b)| a * b).collect();
                let h = rule.weighted_sum(&prod);
                for (a, b) in v.iter_mut().zip(vj) {
                    *a -= h * b;
                }
                for (a, b) in c.iter_mut().zip(cj) {
                    *a -= h * b;
                }
            }
        }
        let sq: Vec<f64> = v.iter().map(|a| a * a).collect();
        let norm = rule.weighted_sum(&sq).sqrt();
        if !(norm >= CONDITIONING_FLOOR) {
            return Err(Error::IllConditioned {
                index: k.clone(),
                norm,
            });
        }
        v.iter_mut().for_each(|a| *a /= norm);
        c.iter_mut().for_each(|a| *a /= norm);
        coeffs.push(c);
        values.push(v);
    }

    let polys: Vec<MultiIndexPolynomial> = coeffs
        .iter()
        .map(|c| {
            Polynomial::from_terms(
                d,
                canonical.iter().zip(c).map(|(k, &v)| (k.clone(), v)),
            )
            .expect("indices match the dimension")
        })
        .collect();
    Ok(OrthoBasis {
        dim: d,
        max_degree: s_max,
        degrees: order.iter().map(|k| k.order()).collect(),
        generators: order,
        polys,
        rule_digest: rule.digest(),
        rule: rule.clone(),
        values,
    })
}

impl OrthoBasis {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn max_degree(&self) -> usize {
        self.max_degree
    }

    pub fn len(&self) -> usize {
        self.polys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.polys.is_empty()
    }

    pub fn polys(&self) -> &[MultiIndexPolynomial] {
        &self.polys
    }

    pub fn poly(&self, i: usize) -> &MultiIndexPolynomial {
        &self.polys[i]
    }

    /// Degree of `P_i`.
    pub fn degree(&self, i: usize) -> usize {
        self.degrees[i]
    }

    /// Monomial that generated `P_i`.
    pub fn generator(&self, i: usize) -> &MultiIndex {
        &self.generators[i]
    }

    pub fn rule(&self) -> &QuadratureRule {
        &self.rule
    }

    pub fn rule_digest(&self) -> &str {
        &self.rule_digest
    }

    /// Values of `P_i` at the rule nodes.
    pub fn node_values(&self, i: usize) -> &[f64] {
        &self.values[i]
    }

    /// Positions of `I_s`, the elements of degree `<= s`.
    pub fn indices_up_to(&self, s: usize) -> std::ops::Range<usize> {
        0..binomial(s.min(self.max_degree) + self.dim, self.dim)
    }

    /// Positions of `J_j`, the elements of degree exactly `j`.
    pub fn indices_of_degree(&self, j: usize) -> std::ops::Range<usize> {
        if j > self.max_degree {
            return 0..0;
        }
        let start = if j == 0 { 0 } else { binomial(j - 1 + self.dim, self.dim) };
        start..binomial(j + self.dim, self.dim)
    }

    /// `<f, P_i>` for a function already sampled at the rule nodes.
    pub fn coefficients_from_samples(&self, samples: &[f64], s: usize) -> Vec<f64> {
        self.indices_up_to(s)
            .map(|i| {
                let prod: Vec<f64> = samples.iter().zip(&self.values[i]).map(|(a, b)| a * b).collect();
                self.rule.weighted_sum(&prod)
            })
            .collect()
    }

    /// `<f, P_i>` for every `i` in `I_s`.
    pub fn project_coefficients(&self, f: &dyn Evaluate, s: usize) -> Result<Vec<f64>> {
        if s > self.max_degree {
            return Err(Error::InvalidArgument(format!(
                "degree {s} exceeds the basis degree {}",
                self.max_degree
            )));
        }
        let samples = self.rule.sample(f)?;
        Ok(self.coefficients_from_samples(&samples, s))
    }

    /// `sum_i c_i P_i` over the first `coeffs.len()` elements.
    pub fn combine(&self, coeffs: &[f64]) -> MultiIndexPolynomial {
        let mut acc: BTreeMap<MultiIndex, f64> = BTreeMap::new();
        for (c, p) in coeffs.iter().zip(&self.polys) {
            if *c == 0.0 {
                continue;
            }
            for (k, v) in p.terms() {
                *acc.entry(k.clone()).or_insert(0.0) += c * v;
            }
        }
        Polynomial::from_terms(self.dim, acc).expect("indices match the dimension")
    }

    /// Node values of `sum_i c_i P_i`.
    pub fn combine_values(&self, coeffs: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.rule.len()];
        for (c, v) in coeffs.iter().zip(&self.values) {
            if *c == 0.0 {
                continue;
            }
            for (o, x) in out.iter_mut().zip(v) {
                *o += c * x;
            }
        }
        out
    }

    /// Largest `|<P_i, P_j> - delta_ij|`, evaluated from the coefficient form.
    pub fn orthonormality_defect(&self) -> f64 {
        let vals: Vec<Vec<f64>> = self
            .polys
            .iter()
            .map(|p| self.rule.nodes.iter().map(|x| p.evaluate(x)).collect())
            .collect();
        let mut worst: f64 = 0.0;
        for i in 0..vals.len() {
            for j in 0..=i {
                let prod: Vec<f64> = vals[i].iter().zip(&vals[j]).map(|(a, b)| a * b).collect();
                let g = self.rule.weighted_sum(&prod);
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((g - target).abs());
            }
        }
        worst
    }

    pub fn to_serialized(&self) -> SerializedBasis {
        SerializedBasis {
            dim: self.dim,
            max_degree: self.max_degree,
            rule_exactness: self.rule.exactness_degree,
            rule_digest: self.rule_digest.clone(),
            generators: self.generators.clone(),
            polys: self.polys.clone(),
        }
    }

    /// Restores a serialized basis; the rule must match the recorded digest.
    pub fn from_serialized(data: SerializedBasis, rule: &QuadratureRule) -> Result<Self> {
        if rule.digest() != data.rule_digest {
            return Err(Error::InvalidArgument(
                "quadrature rule does not match the basis metadata".into(),
            ));
        }
        let values = data
            .polys
            .iter()
            .map(|p| rule.nodes.iter().map(|x| p.evaluate(x)).collect())
            .collect();
        Ok(OrthoBasis {
            dim: data.dim,
            max_degree: data.max_degree,
            degrees: data.generators.iter().map(|k| k.order()).collect(),
            generators: data.generators,
            polys: data.polys,
            rule: rule.clone(),
            rule_digest: data.rule_digest,
            values,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::build_ball_rule;
    use approx::assert_relative_eq;

    #[test]
    fn legendre_in_one_dimension() {
        let rule = build_ball_rule(1, 4).unwrap();
        let b = build_basis(1, 1, &rule).unwrap();
        assert_relative_eq!(b.poly(0).coefficient(&MultiIndex(vec![0])), 0.5f64.sqrt(), epsilon = 1e-14);
        assert_relative_eq!(b.poly(1).coefficient(&MultiIndex(vec![1])), 1.5f64.sqrt(), epsilon = 1e-14);
    }

    #[test]
    fn constant_on_disk() {
        let rule = build_ball_rule(2, 2).unwrap();
        let b = build_basis(2, 1, &rule).unwrap();
        assert_relative_eq!(
            b.poly(0).coefficient(&MultiIndex(vec![0, 0])),
            1.0 / std::f64::consts::PI.sqrt(),
            epsilon = 1e-14
        );
    }

    #[test]
    fn needs_exactness() {
        let rule = build_ball_rule(2, 5).unwrap();
        assert!(matches!(
            build_basis(2, 3, &rule),
            Err(Error::InsufficientExactness { required: 6, available: 5 })
        ));
    }

    #[test]
    fn index_ranges() {
        let rule = build_ball_rule(2, 8).unwrap();
        let b = build_basis(2, 3, &rule).unwrap();
        assert_eq!(b.indices_up_to(2), 0..6);
        assert_eq!(b.indices_of_degree(2), 3..6);
        assert_eq!(b.indices_of_degree(0), 0..1);
        for i in b.indices_of_degree(3) {
            assert_eq!(b.degree(i), 3);
        }
    }

    #[test]
    fn serialized_round_trip() {
        let rule = build_ball_rule(2, 6).unwrap();
        let b = build_basis(2, 2, &rule).unwrap();
        let text = serde_json::to_string(&b.to_serialized()).unwrap();
        let back = OrthoBasis::from_serialized(serde_json::from_str(&text).unwrap(), &rule).unwrap();
        assert_eq!(back.polys(), b.polys());
        let other = build_ball_rule(2, 8).unwrap();
        assert!(OrthoBasis::from_serialized(b.to_serialized(), &other).is_err());
    }
}
