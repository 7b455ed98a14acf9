//! Self-checks, grouped into named suites. The CLI `verify` command and the
//! acceptance tests both run these.

use std::sync::Arc;
use std::time::Instant;

use num_bigint::BigInt;
use num_complex::{Complex, Complex64};
use num_rational::BigRational;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::networks::{
    cvnn_deviation, cvnn_from_decomposition, gtn_deviation, gtn_from_decomposition, phi_cell, tau_cell, CellPoint,
    ComplexCellPoint, ComplexDictionary, PolynomialDictionary, DEFAULT_MAX_EXPONENT,
};
use crate::orthobasis::build_basis;
use crate::pipeline::{rate_sweep, ExperimentConfig, Target};
use crate::polycore::{
    dim_complex_bihomogeneous, dim_homogeneous, multi_indices_of_order, multi_indices_up_to, BiPolynomial,
    ComplexBiPolynomial, MultiIndexPolynomial, Polynomial,
};
use crate::quadrature::{build_ball_rule, default_exactness, sup_grid, Domain};
use crate::quasiproj::{estimate_l1_operator_norm, verify_cesaro_identity, Cutoff, QuasiProjector};
use crate::ridge_complex::{
    complex_decompose, complex_grid, sample_complex_directions, verify_power_identity,
    verify_wirtinger_monomial_identity,
};
use crate::ridge_real::{decompose, homogeneous_power_rank, sample_spanning_directions};
use crate::testfuncs::{
    complete_orthogonal, counterexample_ratio, make_bump_family, trig_reduce, verify_inner_product_expansion,
    ExpansionQuadrature,
};

/// One measured quantity against its threshold.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub value: f64,
    pub threshold: f64,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub detail: String,
    /// Pass/fail only; `value` and `threshold` carry no measurement.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub boolean: bool,
}

impl Check {
    /// Passes when `value < threshold`.
    pub fn below(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Check {
            name: name.into(),
            passed: value < threshold,
            value,
            threshold,
            detail: String::new(),
            boolean: false,
        }
    }

    /// Passes when `value <= threshold`.
    pub fn at_most(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Check {
            passed: value <= threshold,
            ..Check::below(name, value, threshold)
        }
    }

    pub fn flag(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Check {
            name: name.into(),
            passed,
            value: if passed { 1.0 } else { 0.0 },
            threshold: 1.0,
            detail: detail.into(),
            boolean: true,
        }
    }

    fn with_detail(mut self, detail: impl Into<String>) -> Self {
        self.detail = detail.into();
        self
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SuiteReport {
    pub suite: String,
    pub passed: bool,
    pub seconds: f64,
    pub checks: Vec<Check>,
}

impl SuiteReport {
    /// The first failing check, or the measurement closest to its threshold.
    pub fn headline(&self) -> String {
        if let Some(c) = self.checks.iter().find(|c| !c.passed) {
            return format!("{} = {:e} (threshold {:e}) {}", c.name, c.value, c.threshold, c.detail);
        }
        let worst = self
            .checks
            .iter()
            .filter(|c| !c.boolean && c.threshold != 0.0)
            .max_by(|a, b| (a.value / a.threshold).total_cmp(&(b.value / b.threshold)));
        match worst {
            Some(c) => format!(
                "{} checks, tightest: {} = {:.3e} vs {:.3e}",
                self.checks.len(),
                c.name,
                c.value,
                c.threshold
            ),
            None => match self.checks.last() {
                Some(c) => format!(
                    "{} checks, last: {} ({:.4} vs {:.4})",
                    self.checks.len(),
                    c.name,
                    c.value,
                    c.threshold
                ),
                None => "no checks".into(),
            },
        }
    }
}

/// Suite names in criterion order.
pub const SUITES: [&str; 12] = [
    "fixed-point",
    "cesaro",
    "norm",
    "ridge",
    "complex",
    "wirtinger",
    "trig",
    "expansion",
    "counterexample",
    "bumps",
    "networks",
    "rates",
];

/// Runs one suite by name; `"all"` is handled by [`run_all`].
pub fn run_suite(name: &str, seed: u64) -> Result<SuiteReport> {
    let start = Instant::now();
    let checks = match name {
        "fixed-point" => fixed_point(seed)?,
        "cesaro" => cesaro(seed)?,
        "norm" => norm(seed)?,
        "ridge" => ridge(seed)?,
        "complex" => complex(seed)?,
        "wirtinger" => wirtinger(seed)?,
        "trig" => trig(),
        "expansion" => expansion(seed)?,
        "counterexample" => counterexample()?,
        "bumps" => bumps(seed)?,
        "networks" => networks(seed)?,
        "rates" => rates(seed)?,
        other => {
            return Err(Error::InvalidArgument(format!(
                "unknown suite {other:?}; expected one of {} or all",
                SUITES.join(", ")
            )))
        }
    };
    Ok(SuiteReport {
        suite: name.to_string(),
        passed: checks.iter().all(|c| c.passed),
        seconds: start.elapsed().as_secs_f64(),
        checks,
    })
}

pub fn run_all(seed: u64) -> Result<Vec<SuiteReport>> {
    SUITES.iter().map(|s| run_suite(s, seed)).collect()
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Standard normal coefficients on every monomial of degree `<= s`.
pub fn random_polynomial<R: Rng>(d: usize, s: usize, rng: &mut R) -> MultiIndexPolynomial {
    Polynomial::from_terms(
        d,
        multi_indices_up_to(d, s)
            .into_iter()
            .map(|k| (k, rng.sample::<f64, _>(StandardNormal))),
    )
    .expect("indices have dimension d")
}

/// Complex standard normal coefficients on every `z^k conj(z)^l` with `|k|, |l| <= s`.
pub fn random_bipolynomial<R: Rng>(d: usize, s: usize, rng: &mut R) -> ComplexBiPolynomial {
    let idx = multi_indices_up_to(d, s);
    let mut p = BiPolynomial::zero(d);
    for k in &idx {
        for l in &idx {
            let c = Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal));
            p.add_term(k.clone(), l.clone(), c).expect("dimension d");
        }
    }
    p
}

/// Orthogonal `d x d` matrix from Gram-Schmidt on Gaussian columns.
pub fn random_orthogonal<R: Rng>(d: usize, rng: &mut R) -> Vec<Vec<f64>> {
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

fn max_of(values: impl IntoIterator<Item = f64>) -> f64 {
    values.into_iter().fold(0.0, f64::max)
}

fn fixed_point(seed: u64) -> Result<Vec<Check>> {
    let mut checks = Vec::new();
    for d in 1..=3 {
        let basis = Arc::new(build_basis(d, 11, &build_ball_rule(d, default_exactness(11))?)?);
        for s in 1..=6 {
            let proj = QuasiProjector::new(basis.clone(), s, Cutoff::default())?;
            let mut rng = rng_for(seed, (10 * d + s) as u64);
            let mut worst = 0.0f64;
            for _ in 0..20 {
                let p = random_polynomial(d, s, &mut rng);
                worst = worst.max(proj.fixed_point_residual(&p)?);
            }
            checks.push(Check::below(format!("d={d} s={s} relative residual"), worst, 1e-8));
        }
    }
    Ok(checks)
}

fn cesaro(seed: u64) -> Result<Vec<Check>> {
    let mut checks = Vec::new();
    for d in 1..=2 {
        let basis = Arc::new(build_basis(d, 7, &build_ball_rule(d, default_exactness(7))?)?);
        for s in 1..=4 {
            let proj = QuasiProjector::new(basis.clone(), s, Cutoff::default())?;
            for sigma in 0..=2 {
                let mut rng = rng_for(seed, (100 * d + 10 * s + sigma) as u64);
                let mut worst = 0.0f64;
                for _ in 0..20 {
                    // f(x) = exp(a.x) cos(b.x + c)
                    let a: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
                    let b: Vec<f64> = (0..d).map(|_| rng.gen_range(-3.0..3.0)).collect();
                    let c: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
                    let f = move |x: &[f64]| {
                        let ax: f64 = a.iter().zip(x).map(|(u, v)| u * v).sum();
                        let bx: f64 = b.iter().zip(x).map(|(u, v)| u * v).sum();
                        ax.exp() * (bx + c).cos()
                    };
                    worst = worst.max(verify_cesaro_identity(&proj, &f, sigma)?);
                }
                checks.push(Check::below(format!("d={d} s={s} sigma={sigma} deviation"), worst, 1e-8));
            }
        }
    }
    Ok(checks)
}

fn norm(seed: u64) -> Result<Vec<Check>> {
    let d = 2;
    let basis = Arc::new(build_basis(d, 15, &build_ball_rule(d, 4 * 8 + 8)?)?);
    let estimates = (1..=8)
        .into_par_iter()
        .map(|s| {
            let proj = QuasiProjector::new(basis.clone(), s, Cutoff::default())?;
            Ok(estimate_l1_operator_norm(&proj, 24, seed)?.estimate)
        })
        .collect::<Result<Vec<f64>>>()?;
    let lo = estimates.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = max_of(estimates.iter().cloned());
    let listing = estimates.iter().map(|e| format!("{e:.3}")).collect::<Vec<_>>().join(" ");
    Ok(vec![
        Check::flag("estimates positive", lo > 0.0, listing.clone()),
        Check::at_most("max / min estimate over s = 1..8", hi / lo, 10.0).with_detail(listing),
    ])
}

fn ridge(seed: u64) -> Result<Vec<Check>> {
    let mut cells = Vec::new();
    for d in 2..=4 {
        for ell in 1..d {
            for s in 1..=5 {
                cells.push((d, ell, s));
            }
        }
    }
    let checks = cells
        .par_iter()
        .map(|&(d, ell, s)| {
            let m = d - ell + 1;
            let n = dim_homogeneous(m, s);
            let dir_seed = seed ^ (1000 * d + 100 * ell + s) as u64;
            let dirs = sample_spanning_directions(m, s, n, dir_seed)?;
            let mut rng = rng_for(seed, (1000 * d + 100 * ell + s) as u64);
            let mut worst = 0.0f64;
            for _ in 0..50 {
                let p = random_polynomial(d, s, &mut rng);
                let dec = decompose(&p, &dirs, d, ell)?;
                worst = worst.max(dec.diagnostics.residual);
            }
            let short_rank = homogeneous_power_rank(&dirs.vectors[..n - 1], m, s);
            let short = sample_spanning_directions(m, s, n - 1, dir_seed);
            Ok(vec![
                Check::below(format!("d={d} ell={ell} s={s} n={n} sup residual"), worst, 1e-8),
                Check::flag(
                    format!("d={d} ell={ell} s={s} rank check fails with n-1"),
                    short_rank < n && short.is_err(),
                    format!("rank {short_rank} of {n}"),
                ),
            ])
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(checks.into_iter().flatten().collect())
}

fn complex(seed: u64) -> Result<Vec<Check>> {
    let mut checks = Vec::new();
    for d in 2..=3 {
        for s in 1..=3 {
            let n = dim_complex_bihomogeneous(d, s, s);
            let dirs = sample_complex_directions(d, s, s, n, seed ^ (10 * d + s) as u64)?;
            let mut rng = rng_for(seed, (10 * d + s) as u64);
            let mut worst = 0.0f64;
            for _ in 0..30 {
                let p = random_bipolynomial(d, s, &mut rng);
                worst = worst.max(complex_decompose(&p, &dirs)?.residual);
            }
            checks.push(Check::below(format!("d={d} s={s} n={n} sup residual"), worst, 1e-8));
        }
    }
    Ok(checks)
}

fn wirtinger(seed: u64) -> Result<Vec<Check>> {
    let mut checks = Vec::new();
    let start = Instant::now();
    for d in 1..=3 {
        let mut jobs = Vec::new();
        for a in 0..=4 {
            for b in 0..=4 {
                jobs.push((a, b));
            }
        }
        let (total, bad) = jobs
            .par_iter()
            .map(|&(a, b)| {
                let ka = multi_indices_of_order(d, a);
                let lb = multi_indices_of_order(d, b);
                let mut count = 0usize;
                let mut bad = 0usize;
                for k in &ka {
                    for l in &lb {
                        for k2 in &ka {
                            for l2 in &lb {
                                count += 1;
                                if !verify_wirtinger_monomial_identity(k, l, k2, l2)? {
                                    bad += 1;
                                }
                            }
                        }
                    }
                }
                Ok::<_, Error>((count, bad))
            })
            .try_reduce(|| (0, 0), |x, y| Ok((x.0 + y.0, x.1 + y.1)))?;
        checks.push(Check::flag(
            format!("d={d} monomial identity, orders <= 4"),
            bad == 0,
            format!("{total} cases, {bad} failures"),
        ));
    }
    let directions: Vec<(usize, Vec<Complex<BigRational>>)> = {
        let mut rng = rng_for(seed, 6);
        (0..100)
            .map(|i| {
                let d = 1 + i % 3;
                let mut q = || BigRational::new(rng.gen_range(-9i64..=9).into(), rng.gen_range(1i64..=7).into());
                (d, (0..d).map(|_| Complex::new(q(), q())).collect())
            })
            .collect()
    };
    let (total, bad) = directions
        .par_iter()
        .map(|(d, a)| {
            let mut count = 0usize;
            let mut bad = 0usize;
            for s in 0..=3 {
                for t in 0..=3 {
                    for k in multi_indices_of_order(*d, s) {
                        for l in multi_indices_of_order(*d, t) {
                            count += 1;
                            if !verify_power_identity(a, &k, &l)? {
                                bad += 1;
                            }
                        }
                    }
                }
            }
            Ok::<_, Error>((count, bad))
        })
        .try_reduce(|| (0, 0), |x, y| Ok((x.0 + y.0, x.1 + y.1)))?;
    checks.push(Check::flag(
        "power identity, 100 rational directions, s, t <= 3",
        bad == 0,
        format!("{total} cases, {bad} failures"),
    ));
    checks.push(Check::below("seconds", start.elapsed().as_secs_f64(), 60.0));
    Ok(checks)
}

fn trig() -> Vec<Check> {
    let grid: Vec<f64> = (0..10_000).map(|i| std::f64::consts::TAU * i as f64 / 10_000.0).collect();
    let mut worst = 0.0f64;
    let mut at = (0, 0);
    for a in 0..=10usize {
        for b in 0..=(10 - a) {
            let e = trig_reduce(a, b);
            for &phi in &grid {
                let exact = phi.cos().powi(a as i32) * phi.sin().powi(b as i32);
                let err = (e.eval(phi) - exact).abs();
                if err > worst {
                    worst = err;
                    at = (a, b);
                }
            }
        }
    }
    vec![Check::below("max error over a + b <= 10", worst, 1e-10).with_detail(format!("worst at (a, b) = {at:?}"))]
}

fn expansion(seed: u64) -> Result<Vec<Check>> {
    let d = 3;
    let coarse = ExpansionQuadrature {
        ball_exactness: 2,
        angular_points: 3,
    };
    let mut checks = Vec::new();
    for ell in 1..=2 {
        // a smooth polynomial profile on R^ell
        let rho = move |t: &[f64]| {
            let t2 = if ell > 1 { t[1] } else { 0.0 };
            1.0 + 0.5 * t[0] - 0.3 * t[0] * t[0] + 0.2 * t2 * t2 - 0.4 * t[0] * t2
        };
        for s in 1..=3 {
            let mut rng = rng_for(seed, (10 * ell + s) as u64);
            let mut fine_dev = 0.0f64;
            let mut coarse_dev = 0.0f64;
            for _ in 0..10 {
                let q = random_orthogonal(d, &mut rng);
                let a: Vec<Vec<f64>> = q[..ell].to_vec();
                let sigma = complete_orthogonal(&a)?;
                let p = random_polynomial(d, s, &mut rng);
                let fine = verify_inner_product_expansion(&rho, &a, &sigma, &p, ExpansionQuadrature::default())?;
                fine_dev += fine.deviation;
                coarse_dev += verify_inner_product_expansion(&rho, &a, &sigma, &p, coarse)?.deviation;
                checks.push(Check::below(format!("ell={ell} s={s} deviation"), fine.deviation, 1e-6));
            }
            checks.push(Check::flag(
                format!("ell={ell} s={s} deviation drops with finer quadrature"),
                fine_dev < coarse_dev,
                format!("coarse {coarse_dev:e}, fine {fine_dev:e}"),
            ));
        }
    }
    Ok(checks)
}

fn counterexample() -> Result<Vec<Check>> {
    let reports = [16, 64, 256, 1024]
        .iter()
        .map(|&n| counterexample_ratio(n, 2))
        .collect::<Result<Vec<_>>>()?;
    let mut checks = Vec::new();
    for w in reports.windows(2) {
        checks.push(Check::flag(
            format!("ratio decreases from n={} to n={}", w[0].n, w[1].n),
            w[1].ratio < w[0].ratio,
            format!("{:.6} -> {:.6}", w[0].ratio, w[1].ratio),
        ));
    }
    for r in &reports {
        let floor = (r.n as f64 / 2.0).cbrt();
        checks.push(Check {
            name: format!("n={} sup norm >= (n/2)^(1/3)", r.n),
            passed: r.linf >= floor,
            value: r.linf,
            threshold: floor,
            detail: "lower bound".into(),
            boolean: true,
        });
    }
    Ok(checks)
}

fn bumps(seed: u64) -> Result<Vec<Check>> {
    let mut cases = Vec::new();
    for d in 1..=2 {
        for r in 0..=3 {
            for m in [1, 2, 3, 5, 9, 16] {
                cases.push((d, r, m));
            }
        }
    }
    let checks = cases
        .par_iter()
        .map(|&(d, r, m)| {
            let fam = make_bump_family(d, r, m, Some(seed))?;
            let mut rng = rng_for(seed, (100 * d + 10 * r + m) as u64);
            let eps: Vec<f64> = (0..m).map(|_| if rng.gen::<bool>() { 1.0 } else { -1.0 }).collect();
            let mut pts = sup_grid(Domain::Ball(d), if d == 1 { 4001 } else { 6000 });
            pts.extend(fam.points.iter().cloned());
            let mut worst = 0.0f64;
            for k in multi_indices_up_to(d, r) {
                for x in &pts {
                    worst = worst.max(fam.eval_derivative(&eps, &k, x)?.abs());
                }
            }
            Ok(Check::at_most(format!("d={d} r={r} m={m} max |d^k f|"), worst, 1.0 + 1e-6))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(checks)
}

fn networks(seed: u64) -> Result<Vec<Check>> {
    let delta = 1e-6;
    let mut checks = Vec::new();
    let mut rng = rng_for(seed, 11);
    for (d, ell, s) in [(2, 1, 4), (3, 1, 3), (3, 2, 3), (4, 2, 2)] {
        let p = random_polynomial(d, s, &mut rng);
        let m = d - ell + 1;
        let dirs = sample_spanning_directions(m, s, dim_homogeneous(m, s), seed)?;
        let dec = decompose(&p, &dirs, d, ell)?.normalized()?;
        let dict = Arc::new(PolynomialDictionary::new(ell)?);
        let net = gtn_from_decomposition(&dec, dict.clone(), delta, DEFAULT_MAX_EXPONENT)?;
        let grid = sup_grid(Domain::Ball(d), 1000);
        let n = net.units.len();
        checks.push(Check::at_most(
            format!("GTN d={d} ell={ell} s={s} deviation vs n delta"),
            gtn_deviation(&net, &dec, &grid)?,
            n as f64 * delta,
        ));
        // tau is exact on the cell of every unit
        let mut exact = true;
        for u in &net.units {
            let profile = dict.profile(&u.dict_index)?;
            for x in grid.iter().step_by(17) {
                let local: Vec<f64> = u.a.iter().map(|row| row.iter().zip(x).map(|(r, v)| r * v).sum()).collect();
                let cp = CellPoint::new(BigInt::from(u.dict_index.clone()), local.clone());
                exact &= tau_cell(&dict, &cp)? == profile.evaluate(&local);
            }
        }
        checks.push(Check::flag(format!("tau cell-exact, d={d} ell={ell}"), exact, ""));
    }
    for (d, s) in [(2, 1), (2, 2)] {
        let p = random_bipolynomial(d, s, &mut rng);
        let dirs = sample_complex_directions(d, s, s, dim_complex_bihomogeneous(d, s, s), seed)?;
        let dec = complex_decompose(&p, &dirs)?;
        let dict = Arc::new(ComplexDictionary::new());
        let net = cvnn_from_decomposition(&dec, dict.clone(), delta, DEFAULT_MAX_EXPONENT)?;
        let grid = complex_grid(d, 1000);
        checks.push(Check::at_most(
            format!("CVNN d={d} s={s} deviation vs n delta"),
            cvnn_deviation(&net, &dec, &grid)?,
            net.units.len() as f64 * delta,
        ));
        let mut exact = true;
        for u in &net.units {
            let profile = dict.profile(&u.dict_index)?;
            for z in grid.iter().step_by(17) {
                let w: Complex64 = u.alpha.iter().zip(z).map(|(a, b)| a * b).sum();
                let cp = ComplexCellPoint {
                    cell: BigInt::from(u.dict_index.clone()),
                    local: w,
                };
                exact &= phi_cell(&dict, &cp)? == profile.eval(&[w])?;
            }
        }
        checks.push(Check::flag(format!("phi cell-exact, d={d} s={s}"), exact, ""));
    }
    Ok(checks)
}

/// The rate experiment: `d = 3`, Gaussian target, both `ell`.
pub fn rate_configs(seed: u64) -> Vec<ExperimentConfig> {
    (1..=2)
        .map(|ell| {
            let mut cfg = ExperimentConfig::new(
                3,
                ell,
                vec![4, 8, 16, 32, 64],
                Target::Gaussian {
                    center: vec![0.3, -0.2, 0.1],
                    width: 1.0,
                },
            );
            cfg.seed = seed;
            cfg
        })
        .collect()
}

fn rates(seed: u64) -> Result<Vec<Check>> {
    let mut checks = Vec::new();
    let mut slopes = Vec::new();
    for cfg in rate_configs(seed) {
        let report = rate_sweep(&cfg)?;
        let errors = report
            .rows
            .iter()
            .map(|r| format!("{:.3e}", r.error_lq))
            .collect::<Vec<_>>()
            .join(" ");
        checks.push(Check::flag(
            format!("ell={} errors non-increasing", cfg.ell),
            report.monotone(),
            errors,
        ));
        slopes.push(report.slope.unwrap_or(f64::NAN));
    }
    checks.push(Check {
        name: "ell=2 slope below ell=1 slope".into(),
        passed: slopes[1] < slopes[0],
        value: slopes[1],
        threshold: slopes[0],
        detail: "slope for ell=1".into(),
        boolean: true,
    });
    Ok(checks)
}
