#![allow(dead_code)]

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use ridgekit::polycore::{multi_indices_up_to, MultiIndexPolynomial, Polynomial};

pub fn random_poly(d: usize, s: usize, rng: &mut ChaCha8Rng) -> MultiIndexPolynomial {
    let terms = multi_indices_up_to(d, s)
        .into_iter()
        .map(|k| (k, rng.sample::<f64, _>(StandardNormal)));
    Polynomial::from_terms(d, terms).unwrap()
}

/// Haar-ish orthogonal matrix from Gram-Schmidt on Gaussian columns.
pub fn random_orthogonal(d: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let mut cols: Vec<Vec<f64>> = Vec::new();
    while cols.len() < d {
        let mut v: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        for _ in 0..2 {
            for q in &cols {
                let h: f64 = q.iter().zip(&v).map(|(a, b)| a * b).sum();
                v.iter_mut().zip(q).for_each(|(x, y)| *x -= h * y);
            }
        }
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-3 {
            cols.push(v.into_iter().map(|x| x / n).collect());
        }
    }
    (0..d).map(|i| (0..d).map(|j| cols[j][i]).collect()).collect()
}

pub fn max_abs(v: impl IntoIterator<Item = f64>) -> f64 {
    v.into_iter().fold(0.0, |m, x| m.max(x.abs()))
}
