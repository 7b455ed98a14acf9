//! Exact decomposition of a polynomial on `R^d` into `n` ridge blocks
//! `x -> P_i(A_i x)` with `A_i` an `ell x d` matrix.
//!
//! Coordinates split as `x = (u, y)` with `u` in `R^m`, `m = d - ell + 1`,
//! and `y` in `R^(ell-1)`. Each block is `A_i = [a_i^T 0; 0 I]`, so
//! `A_i x = (a_i . u, y)`. Writing `P = sum_kappa y^kappa P_kappa(u)`, every
//! homogeneous part of `P_kappa` is solved in the span of the powers
//! `(a_i . u)^j`.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector, SVD};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_dim, Error, Result};
use crate::polycore::{
    dim_homogeneous, multi_indices_of_order, MultiIndex, MultiIndexPolynomial, Polynomial,
};
use crate::quadrature::{sup_grid, Domain};
use crate::quasiproj::random_unit_vector;

/// Relative singular value threshold for the spanning certificate.
pub const RANK_TOLERANCE: f64 = 1e-10;
/// Relative residual a decomposition must meet.
pub const RESIDUAL_TOLERANCE: f64 = 1e-8;
/// Draws allowed before giving up on a spanning set.
pub const MAX_ATTEMPTS: usize = 64;
/// Approximate size of the grid used for residual checks.
pub const RESIDUAL_GRID_POINTS: usize = 8000;

/// Unit directions in `R^m` whose `s`-th powers span the homogeneous polynomials of degree `s`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DirectionSet {
    pub m: usize,
    pub s: usize,
    pub vectors: Vec<Vec<f64>>,
    /// Ratio of the extreme retained singular values of the power matrix.
    pub condition: f64,
    pub attempts: usize,
}

fn multinomial(k: &MultiIndex) -> f64 {
    let mut acc = 1.0;
    let mut total = 0u32;
    for &e in k.entries() {
        for i in 1..=e {
            total += 1;
            acc = acc * total as f64 / i as f64;
        }
    }
    acc
}

/// Columns are the monomial coefficients of `(a_i . u)^s`.
pub fn power_coefficient_matrix(vectors: &[Vec<f64>], m: usize, s: usize) -> DMatrix<f64> {
    let rows = multi_indices_of_order(m, s);
    let weights: Vec<f64> = rows.iter().map(multinomial).collect();
    DMatrix::from_fn(rows.len(), vectors.len(), |r, c| {
        weights[r] * rows[r].eval_monomial(&vectors[c])
    })
}

fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    let mut sv: Vec<f64> = m.singular_values().iter().cloned().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    sv
}

/// Numerical rank of the power matrix under [`RANK_TOLERANCE`].
pub fn homogeneous_power_rank(vectors: &[Vec<f64>], m: usize, s: usize) -> usize {
    let sv = singular_values(&power_coefficient_matrix(vectors, m, s));
    let top = sv.first().cloned().unwrap_or(0.0);
    sv.iter().filter(|&&v| v > RANK_TOLERANCE * top).count()
}

fn certify(vectors: &[Vec<f64>], m: usize, s: usize) -> (usize, f64) {
    let need = dim_homogeneous(m, s);
    let sv = singular_values(&power_coefficient_matrix(vectors, m, s));
    let top = sv.first().cloned().unwrap_or(0.0);
    let rank = sv.iter().filter(|&&v| v > RANK_TOLERANCE * top).count();
    let cond = if rank >= need && need > 0 {
        top / sv[need - 1]
    } else {
        f64::INFINITY
    };
    (rank, cond)
}

/// Draws `n` random unit directions in `R^m` and certifies that their
/// `s`-th powers span the homogeneous polynomials of degree `s`.
pub fn sample_spanning_directions(m: usize, s: usize, n: usize, seed: u64) -> Result<DirectionSet> {
    if m == 0 {
        return Err(Error::InvalidArgument("directions need m >= 1".into()));
    }
    let need = dim_homogeneous(m, s);
    if n < need {
        return Err(Error::InvalidArgument(format!(
            "{n} directions cannot span a space of dimension {need}"
        )));
    }
    let mut best_rank = 0;
    for attempt in 0..MAX_ATTEMPTS {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(attempt as u64);
        let vectors: Vec<Vec<f64>> = (0..n).map(|_| random_unit_vector(&mut rng, m)).collect();
        let (rank, condition) = certify(&vectors, m, s);
        if rank >= need {
            return Ok(DirectionSet {
                m,
                s,
                vectors,
                condition,
                attempts: attempt + 1,
            });
        }
        best_rank = best_rank.max(rank);
    }
    Err(Error::SpanningFailed {
        attempts: MAX_ATTEMPTS,
        best_rank,
        needed: need,
    })
}

impl DirectionSet {
    /// Wraps caller-supplied directions after checking the spanning rank.
    pub fn from_vectors(m: usize, s: usize, vectors: Vec<Vec<f64>>) -> Result<Self> {
        for v in &vectors {
            ensure_dim(m, v.len())?;
        }
        let need = dim_homogeneous(m, s);
        let (rank, condition) = certify(&vectors, m, s);
        if rank < need {
            return Err(Error::SpanningFailed {
                attempts: 1,
                best_rank: rank,
                needed: need,
            });
        }
        Ok(DirectionSet {
            m,
            s,
            vectors,
            condition,
            attempts: 1,
        })
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }
}

/// `A_i = [a_i^T 0; 0 I_(ell-1)]`, each `ell x d`, with `d = m + ell - 1`.
pub fn build_block_matrices(dirs: &DirectionSet, d: usize, ell: usize) -> Result<Vec<Vec<Vec<f64>>>> {
    if ell == 0 || ell > d {
        return Err(Error::InvalidArgument(format!("need 1 <= ell <= d, got ell = {ell}, d = {d}")));
    }
    ensure_dim(d - ell + 1, dirs.m)?;
    let m = dirs.m;
    Ok(dirs
        .vectors
        .iter()
        .map(|a| {
            let mut rows = vec![vec![0.0; d]; ell];
            rows[0][..m].copy_from_slice(a);
            for r in 1..ell {
                rows[r][m + r - 1] = 1.0;
            }
            rows
        })
        .collect())
}

/// One term `x -> P(A x)`.
#[derive(Clone, Debug, PartialEq)]
pub struct RidgeBlock {
    pub a: Vec<Vec<f64>>,
    pub p: MultiIndexPolynomial,
}

impl RidgeBlock {
    pub fn eval(&self, x: &[f64]) -> f64 {
        let ax: Vec<f64> = self
            .a
            .iter()
            .map(|row| row.iter().zip(x).map(|(r, v)| r * v).sum())
            .collect();
        self.p.evaluate(&ax)
    }

    /// Largest singular value of `A`.
    pub fn operator_norm(&self) -> f64 {
        let m = DMatrix::from_fn(self.a.len(), self.a[0].len(), |i, j| self.a[i][j]);
        singular_values(&m).first().cloned().unwrap_or(0.0)
    }
}

/// Numbers reported alongside a decomposition.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct Diagnostics {
    /// Sup-grid residual `max |P - sum_i P_i(A_i x)|`.
    pub residual: f64,
    /// `max |P|` on the same grid.
    pub poly_sup: f64,
    /// Worst condition number among the per-degree power matrices.
    pub condition: f64,
}

/// `x -> sum_i P_i(A_i x)`.
#[derive(Clone, Debug)]
pub struct RidgeDecomposition {
    pub d: usize,
    pub ell: usize,
    pub blocks: Vec<RidgeBlock>,
    pub diagnostics: Diagnostics,
}

#[derive(Serialize, Deserialize)]
struct BlockJson {
    #[serde(rename = "A")]
    a: Vec<f64>,
    #[serde(rename = "P")]
    p: MultiIndexPolynomial,
}

#[derive(Serialize, Deserialize)]
struct DecompositionJson {
    d: usize,
    ell: usize,
    blocks: Vec<BlockJson>,
}

impl Serialize for RidgeDecomposition {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        DecompositionJson {
            d: self.d,
            ell: self.ell,
            blocks: self
                .blocks
                .iter()
                .map(|b| BlockJson {
                    a: b.a.iter().flatten().cloned().collect(),
                    p: b.p.clone(),
                })
                .collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for RidgeDecomposition {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let raw = DecompositionJson::deserialize(de)?;
        let mut blocks = Vec::with_capacity(raw.blocks.len());
        for b in raw.blocks {
            if b.a.len() != raw.d * raw.ell || b.p.dim() != raw.ell {
                return Err(D::Error::custom("block shape does not match d and ell"));
            }
            blocks.push(RidgeBlock {
                a: b.a.chunks(raw.d).map(|r| r.to_vec()).collect(),
                p: b.p,
            });
        }
        Ok(RidgeDecomposition {
            d: raw.d,
            ell: raw.ell,
            blocks,
            diagnostics: Diagnostics::default(),
        })
    }
}

/// `sum_i P_i(A_i x)`.
pub fn eval_ridge(decomp: &RidgeDecomposition, x: &[f64]) -> Result<f64> {
    ensure_dim(decomp.d, x.len())?;
    Ok(decomp.blocks.iter().map(|b| b.eval(x)).sum())
}

/// Pseudo-inverse applied through an SVD, dropping tiny singular values.
struct LeastNorm {
    svd: SVD<f64, nalgebra::Dyn, nalgebra::Dyn>,
    eps: f64,
    condition: f64,
}

impl LeastNorm {
    fn new(m: DMatrix<f64>) -> Self {
        let svd = SVD::new(m, true, true);
        let top = svd.singular_values.iter().cloned().fold(0.0, f64::max);
        let eps = 1e-13 * top;
        let low = svd
            .singular_values
            .iter()
            .cloned()
            .filter(|&v| v > eps)
            .fold(f64::INFINITY, f64::min);
        LeastNorm {
            svd,
            eps,
            condition: if top > 0.0 { top / low } else { 1.0 },
        }
    }

    fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        self.svd.solve(b, self.eps).expect("SVD carries both factors")
    }
}

/// Splits `P(u, y)` into `y^kappa P_kappa(u)` with `u` the first `m` coordinates.
pub fn split_by_trailing(p: &MultiIndexPolynomial, m: usize) -> BTreeMap<MultiIndex, MultiIndexPolynomial> {
    let mut out: BTreeMap<MultiIndex, MultiIndexPolynomial> = BTreeMap::new();
    for (k, c) in p.terms() {
        let head = MultiIndex(k.entries()[..m].to_vec());
        let tail = MultiIndex(k.entries()[m..].to_vec());
        out.entry(tail)
            .or_insert_with(|| Polynomial::zero(m))
            .add_term(head, *c)
            .expect("head has m entries");
    }
    out
}

/// Writes `P` as `sum_i P_i(A_i x)` over the given directions.
pub fn decompose(p: &MultiIndexPolynomial, dirs: &DirectionSet, d: usize, ell: usize) -> Result<RidgeDecomposition> {
    ensure_dim(d, p.dim())?;
    let mats = build_block_matrices(dirs, d, ell)?;
    let m = dirs.m;
    let s = p.degree().unwrap_or(0);
    if s > dirs.s && m > 1 {
        return Err(Error::InvalidArgument(format!(
            "polynomial degree {s} exceeds the certified direction degree {}",
            dirs.s
        )));
    }
    let n = dirs.len();
    let solvers: Vec<LeastNorm> = (0..=s)
        .map(|j| LeastNorm::new(power_coefficient_matrix(&dirs.vectors, m, j)))
        .collect();
    let mut profiles: Vec<MultiIndexPolynomial> = vec![Polynomial::zero(ell); n];
    for (kappa, pk) in split_by_trailing(p, m) {
        for j in 0..=pk.degree().unwrap_or(0) {
            let part = pk.homogeneous_part(j);
            if part.is_zero() {
                continue;
            }
            let rows = multi_indices_of_order(m, j);
            let b = DVector::from_iterator(rows.len(), rows.iter().map(|k| part.coefficient(k)));
            let alpha = solvers[j].solve(&b);
            let mut key = vec![j as u32];
            key.extend_from_slice(kappa.entries());
            let key = MultiIndex(key);
            for (prof, &a) in profiles.iter_mut().zip(alpha.iter()) {
                prof.add_term(key.clone(), a)?;
            }
        }
    }
    let condition = solvers.iter().map(|s| s.condition).fold(1.0, f64::max);
    let blocks: Vec<RidgeBlock> = mats
        .into_iter()
        .zip(profiles)
        .map(|(a, p)| RidgeBlock { a, p })
        .collect();
    let mut decomp = RidgeDecomposition {
        d,
        ell,
        blocks,
        diagnostics: Diagnostics {
            condition,
            ..Default::default()
        },
    };
    let (residual, poly_sup) = grid_residual(p, &decomp);
    decomp.diagnostics.residual = residual;
    decomp.diagnostics.poly_sup = poly_sup;
    let tolerance = RESIDUAL_TOLERANCE * (1.0 + poly_sup);
    if !(residual < tolerance) {
        return Err(Error::ResidualTooLarge { residual, tolerance });
    }
    Ok(decomp)
}

/// `(max |P - R|, max |P|)` over the residual grid.
pub fn grid_residual(p: &MultiIndexPolynomial, decomp: &RidgeDecomposition) -> (f64, f64) {
    let mut res: f64 = 0.0;
    let mut sup: f64 = 0.0;
    for x in sup_grid(Domain::Ball(decomp.d), RESIDUAL_GRID_POINTS) {
        let pv = p.evaluate(&x);
        let rv: f64 = decomp.blocks.iter().map(|b| b.eval(&x)).sum();
        res = res.max((pv - rv).abs());
        sup = sup.max(pv.abs());
    }
    (res, sup)
}

/// Largest `s` with `dim_homogeneous(d - ell + 1, s) <= n`.
pub fn degree_for_budget(d: usize, ell: usize, n: usize) -> Result<usize> {
    if ell == 0 || ell >= d {
        return Err(Error::InvalidArgument(format!("need 1 <= ell < d, got ell = {ell}, d = {d}")));
    }
    if n == 0 {
        return Err(Error::InvalidArgument("budget n must be positive".into()));
    }
    let m = d - ell + 1;
    let mut s = 0;
    while dim_homogeneous(m, s + 1) <= n {
        s += 1;
    }
    Ok(s)
}

/// Rewrites `P(A x)` with orthonormal rows: returns `(A', P')` where
/// `A' A'^T = I` and `P'(A' x) = P(A x)` for every `x`.
pub fn orthonormalize_rows(a: &[Vec<f64>], p: &MultiIndexPolynomial) -> Result<(Vec<Vec<f64>>, MultiIndexPolynomial)> {
    let ell = a.len();
    ensure_dim(ell, p.dim())?;
    let d = a.first().map(|r| r.len()).unwrap_or(0);
    if ell > d {
        return Err(Error::InvalidArgument("A must have at most as many rows as columns".into()));
    }
    let mat = DMatrix::from_fn(ell, d, |i, j| a[i][j]);
    let svd = SVD::new(mat, true, true);
    let u = svd.u.expect("requested");
    let vt = svd.v_t.expect("requested");
    let sigma = &svd.singular_values;
    // rows of V^T for zero singular values are replaced by an orthonormal completion
    let top = sigma.iter().cloned().fold(0.0, f64::max);
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(ell);
    let mut keep: Vec<bool> = Vec::with_capacity(ell);
    for r in 0..ell {
        keep.push(sigma[r] > 1e-14 * top.max(f64::MIN_POSITIVE));
    }
    for r in 0..ell {
        if keep[r] {
            rows.push(vt.row(r).iter().cloned().collect());
        }
    }
    let mut candidate = 0;
    for r in 0..ell {
        if keep[r] {
            continue;
        }
        loop {
            let mut v = vec![0.0; d];
            v[candidate % d] = 1.0;
            candidate += 1;
            for _ in 0..2 {
                for q in &rows {
                    let h: f64 = q.iter().zip(&v).map(|(a, b)| a * b).sum();
                    v.iter_mut().zip(q).for_each(|(a, b)| *a -= h * b);
                }
            }
            let nv = v.iter().map(|a| a * a).sum::<f64>().sqrt();
            if nv > 1e-6 {
                rows.push(v.into_iter().map(|a| a / nv).collect());
                break;
            }
        }
    }
    // keep the pairing between rows of A' and columns of U Sigma
    let mut order: Vec<usize> = (0..ell).filter(|&r| keep[r]).collect();
    order.extend((0..ell).filter(|&r| !keep[r]));
    let mut a_new = vec![Vec::new(); ell];
    let mut m = vec![vec![0.0; ell]; ell];
    for (slot, &r) in order.iter().enumerate() {
        a_new[r] = rows[slot].clone();
        let scale = if keep[r] { sigma[r] } else { 0.0 };
        for i in 0..ell {
            m[i][r] = u[(i, r)] * scale;
        }
    }
    let p_new = p.compose_linear(&m, &vec![0.0; ell])?;
    Ok((a_new, p_new))
}

impl RidgeDecomposition {
    /// Rescales every block so `||A_k|| = 1`: `A_k = B_k / ||B_k||`,
    /// `P_k(t) = Q_k(||B_k|| t)`.
    pub fn normalized(&self) -> Result<RidgeDecomposition> {
        let mut blocks = Vec::with_capacity(self.blocks.len());
        for b in &self.blocks {
            let norm = b.operator_norm();
            if norm == 0.0 || (norm - 1.0).abs() < 1e-15 {
                blocks.push(b.clone());
                continue;
            }
            let ell = b.a.len();
            let scale: Vec<Vec<f64>> = (0..ell)
                .map(|i| (0..ell).map(|j| if i == j { norm } else { 0.0 }).collect())
                .collect();
            blocks.push(RidgeBlock {
                a: b.a.iter().map(|r| r.iter().map(|v| v / norm).collect()).collect(),
                p: b.p.compose_linear(&scale, &vec![0.0; ell])?,
            });
        }
        Ok(RidgeDecomposition {
            d: self.d,
            ell: self.ell,
            blocks,
            diagnostics: self.diagnostics.clone(),
        })
    }

    /// The sum as one polynomial in `d` variables.
    pub fn to_polynomial(&self) -> Result<MultiIndexPolynomial> {
        let mut acc = Polynomial::zero(self.d);
        for b in &self.blocks {
            acc = acc.checked_add(&b.p.compose_linear(&b.a, &vec![0.0; self.ell])?)?;
        }
        Ok(acc)
    }
}
