//! Fit, decompose, build a network, measure the error.

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::networks::{gtn_from_decomposition, GTNetwork, PolynomialDictionary, DEFAULT_MAX_EXPONENT};
use crate::orthobasis::{build_basis, OrthoBasis};
use crate::polycore::{dim_homogeneous, MultiIndexPolynomial};
use crate::quadrature::{
    build_ball_rule, default_exactness, pairwise_sum, sup_grid, Domain, Evaluate, SUP_GRID_POINTS,
};
use crate::ridge_real::{decompose, degree_for_budget, eval_ridge, sample_spanning_directions, RidgeDecomposition};
use crate::testfuncs::{make_bump_family, BumpFamily};

/// Environment variable capping the worker count.
pub const THREADS_ENV: &str = "RIDGEKIT_THREADS";

/// Thread pool honouring `RIDGEKIT_THREADS`; rayon's default otherwise.
pub fn thread_pool() -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v
            .trim()
            .parse()
            .map_err(|_| Error::InvalidArgument(format!("{THREADS_ENV} must be a positive integer, got {v:?}")))?;
        if n == 0 {
            return Err(Error::InvalidArgument(format!("{THREADS_ENV} must be positive")));
        }
        builder = builder.num_threads(n);
    }
    builder
        .build()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))
}

/// The function being approximated.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Target {
    /// `exp(-|x - center|^2 / width^2)`.
    Gaussian { center: Vec<f64>, width: f64 },
    /// A member `f_eps` of the bump family; signs drawn from `signs_seed`.
    Bump {
        r: usize,
        m: usize,
        #[serde(default)]
        lattice_seed: Option<u64>,
        signs_seed: u64,
    },
    Polynomial { poly: MultiIndexPolynomial },
}

/// A target ready for evaluation.
pub enum TargetFn {
    Gaussian { center: Vec<f64>, width: f64 },
    Bump { family: BumpFamily, eps: Vec<f64> },
    Polynomial(MultiIndexPolynomial),
}

impl Evaluate for TargetFn {
    fn evaluate_at(&self, x: &[f64]) -> f64 {
        match self {
            TargetFn::Gaussian { center, width } => {
                let r2: f64 = x.iter().zip(center).map(|(a, b)| (a - b).powi(2)).sum();
                (-r2 / (width * width)).exp()
            }
            TargetFn::Bump { family, eps } => family.eval(eps, x).unwrap_or(f64::NAN),
            TargetFn::Polynomial(p) => p.evaluate(x),
        }
    }
}

impl Target {
    pub fn build(&self, d: usize) -> Result<TargetFn> {
        Ok(match self {
            Target::Gaussian { center, width } => {
                if center.len() != d {
                    return Err(Error::DimensionMismatch {
                        expected: d,
                        found: center.len(),
                    });
                }
                if !(*width > 0.0) {
                    return Err(Error::InvalidArgument("gaussian width must be positive".into()));
                }
                TargetFn::Gaussian {
                    center: center.clone(),
                    width: *width,
                }
            }
            Target::Bump {
                r,
                m,
                lattice_seed,
                signs_seed,
            } => {
                let family = make_bump_family(d, *r, *m, *lattice_seed)?;
                let mut rng = ChaCha8Rng::seed_from_u64(*signs_seed);
                let eps = (0..*m).map(|_| if rng.gen::<bool>() { 1.0 } else { -1.0 }).collect();
                TargetFn::Bump { family, eps }
            }
            Target::Polynomial { poly } => {
                if poly.dim() != d {
                    return Err(Error::DimensionMismatch {
                        expected: d,
                        found: poly.dim(),
                    });
                }
                TargetFn::Polynomial(poly.clone())
            }
        })
    }
}

mod norm_exponent {
    use super::*;

    pub fn serialize<S: Serializer>(q: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
        if q.is_infinite() {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(*q)
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Num(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
        use serde::de::Error as _;
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(v),
            Raw::Text(t) if matches!(t.as_str(), "inf" | "infinity" | "Inf") => Ok(f64::INFINITY),
            Raw::Text(t) => Err(D::Error::custom(format!("bad norm exponent {t:?}"))),
        }
    }
}

/// Quadrature settings; `None` picks a default from the largest degree.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct QuadratureSettings {
    /// Exactness of the rule behind the basis and the fit.
    pub fit_exactness: Option<usize>,
    /// Exactness of the rule used to measure `L^q` errors.
    pub error_exactness: Option<usize>,
    /// Points of the sup grid when `q = inf`.
    pub sup_points: Option<usize>,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct OutputPaths {
    pub csv: Option<PathBuf>,
    pub json: Option<PathBuf>,
}

fn default_max_degree() -> usize {
    12
}

fn default_delta() -> f64 {
    1e-6
}

fn default_exponent() -> u32 {
    DEFAULT_MAX_EXPONENT
}

fn default_true() -> bool {
    true
}

fn default_q() -> f64 {
    2.0
}

/// One sweep: dimensions, norms, budgets, target and seeds.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub d: usize,
    pub ell: usize,
    /// Regularity label of the target; only enters the reference slope.
    #[serde(default)]
    pub r: f64,
    /// Error norm exponent, `"inf"` allowed.
    #[serde(with = "norm_exponent", default = "default_q")]
    pub q: f64,
    pub n_list: Vec<usize>,
    pub target: Target,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub quadrature: QuadratureSettings,
    /// Fitted degree never exceeds this, whatever the budget allows.
    #[serde(default = "default_max_degree")]
    pub max_degree: usize,
    /// Per-unit dictionary tolerance.
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default = "default_exponent")]
    pub max_exponent: u32,
    #[serde(default = "default_true")]
    pub build_network: bool,
    /// Writes wall-clock seconds to the CSV; off keeps output byte-stable.
    #[serde(default)]
    pub record_timing: bool,
    #[serde(default)]
    pub output: OutputPaths,
}

impl ExperimentConfig {
    pub fn new(d: usize, ell: usize, n_list: Vec<usize>, target: Target) -> Self {
        ExperimentConfig {
            d,
            ell,
            r: 0.0,
            q: 2.0,
            n_list,
            target,
            seed: 0,
            quadrature: QuadratureSettings::default(),
            max_degree: default_max_degree(),
            delta: default_delta(),
            max_exponent: DEFAULT_MAX_EXPONENT,
            build_network: true,
            record_timing: false,
            output: OutputPaths::default(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.ell == 0 || self.ell >= self.d {
            return Err(Error::InvalidArgument(format!(
                "need 1 <= ell < d, got ell = {}, d = {}",
                self.ell, self.d
            )));
        }
        if !(self.q >= 1.0) {
            return Err(Error::InvalidArgument(format!("q must lie in [1, inf], got {}", self.q)));
        }
        if self.n_list.is_empty() {
            return Err(Error::InvalidArgument("n_list is empty".into()));
        }
        if self.n_list.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidArgument("n_list must be strictly increasing".into()));
        }
        let least = dim_homogeneous(self.d - self.ell + 1, 1);
        if self.n_list[0] < least {
            return Err(Error::InvalidArgument(format!(
                "n = {} is below the smallest budget {least}",
                self.n_list[0]
            )));
        }
        if !(self.delta >= 0.0) {
            return Err(Error::InvalidArgument("delta must be non-negative".into()));
        }
        self.target.build(self.d)?;
        Ok(())
    }

    /// Degree used for budget `n`: the largest `s` the budget pays for, capped.
    pub fn degree_for(&self, n: usize) -> Result<usize> {
        Ok(degree_for_budget(self.d, self.ell, n)?.min(self.max_degree))
    }

    /// `-r / (d - ell)`.
    pub fn theoretical_slope(&self) -> f64 {
        -self.r / (self.d - self.ell) as f64
    }
}

/// Discrete-`L^2` projection onto `P_s`: `sum_(i in I_s) <f, P_i> P_i`.
pub fn fit_polynomial(f: &dyn Evaluate, s: usize, basis: &OrthoBasis) -> Result<MultiIndexPolynomial> {
    Ok(basis.combine(&basis.project_coefficients(f, s)?))
}

/// Points and weights for the error norm. Weights are `None` for `q = inf`.
struct ErrorMeasure {
    q: f64,
    points: Vec<Vec<f64>>,
    weights: Option<Vec<f64>>,
}

impl ErrorMeasure {
    fn new(d: usize, q: f64, exactness: usize, sup_points: usize) -> Result<Self> {
        if q.is_infinite() {
            Ok(ErrorMeasure {
                q,
                points: sup_grid(Domain::Ball(d), sup_points),
                weights: None,
            })
        } else {
            let rule = build_ball_rule(d, exactness)?;
            Ok(ErrorMeasure {
                q,
                points: rule.nodes,
                weights: Some(rule.weights),
            })
        }
    }

    fn norm(&self, values: &[f64]) -> Result<f64> {
        if let Some((i, v)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite {
                node: self.points[i].clone(),
                value: *v,
            });
        }
        Ok(match &self.weights {
            None => values.iter().fold(0.0, |m, v| m.max(v.abs())),
            Some(w) => {
                let terms: Vec<f64> = values.iter().zip(w).map(|(v, w)| w * v.abs().powf(self.q)).collect();
                pairwise_sum(&terms).powf(1.0 / self.q)
            }
        })
    }

    /// `||1||_q`, the factor turning a sup bound into an `L^q` bound.
    fn unit_norm(&self) -> f64 {
        match &self.weights {
            None => 1.0,
            Some(w) => pairwise_sum(w).powf(1.0 / self.q),
        }
    }
}

/// Everything measured at one budget.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PointReport {
    pub n: usize,
    pub s: usize,
    /// Ridge terms actually used (at most `n`).
    pub units: usize,
    pub fit_error: f64,
    pub ridge_error: f64,
    /// Error of the network, or of the ridge sum when no network is built.
    pub total_error: f64,
    /// Sup-grid residual of the decomposition.
    pub residual: f64,
    /// `fit_error + ||1||_q (sup |P - ridge| + units delta)`.
    pub error_bound: f64,
    pub seconds: f64,
}

/// Outcome of one budget.
pub struct Approximation {
    pub polynomial: MultiIndexPolynomial,
    pub decomposition: RidgeDecomposition,
    pub network: Option<GTNetwork>,
    pub report: PointReport,
}

/// Shared state of a sweep: the basis, the error measure, the target.
pub struct Pipeline {
    cfg: ExperimentConfig,
    basis: Arc<OrthoBasis>,
    measure: ErrorMeasure,
    target: TargetFn,
    dict: Arc<PolynomialDictionary>,
}

fn direction_seed(seed: u64, s: usize) -> u64 {
    seed ^ (s as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

impl Pipeline {
    pub fn new(cfg: &ExperimentConfig) -> Result<Self> {
        cfg.validate()?;
        let target = cfg.target.build(cfg.d)?;
        Self::with_target(cfg, target)
    }

    pub fn with_target(cfg: &ExperimentConfig, target: TargetFn) -> Result<Self> {
        cfg.validate()?;
        let mut s_max = 0;
        for &n in &cfg.n_list {
            s_max = s_max.max(cfg.degree_for(n)?);
        }
        let fit_exactness = cfg.quadrature.fit_exactness.unwrap_or(default_exactness(s_max));
        if fit_exactness < 2 * s_max {
            return Err(Error::InsufficientExactness {
                required: 2 * s_max,
                available: fit_exactness,
            });
        }
        let rule = build_ball_rule(cfg.d, fit_exactness)?;
        let basis = Arc::new(build_basis(cfg.d, s_max, &rule)?);
        let measure = ErrorMeasure::new(
            cfg.d,
            cfg.q,
            cfg.quadrature.error_exactness.unwrap_or(2 * s_max + 8),
            cfg.quadrature.sup_points.unwrap_or(SUP_GRID_POINTS),
        )?;
        Ok(Pipeline {
            cfg: cfg.clone(),
            basis,
            measure,
            target,
            dict: Arc::new(PolynomialDictionary::new(cfg.ell)?),
        })
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.cfg
    }

    pub fn basis(&self) -> &OrthoBasis {
        &self.basis
    }

    /// Fit, decompose and (optionally) build the network for budget `n`.
    ///
    /// Only the `dim P^h_s` directions that degree `s` needs are used, seeded
    /// by `s`, so budgets that share a capped degree give identical results.
    pub fn approximate_by_ridge(&self, n: usize) -> Result<Approximation> {
        let start = Instant::now();
        let cfg = &self.cfg;
        let least = dim_homogeneous(cfg.d - cfg.ell + 1, 1);
        if n < least {
            return Err(Error::InvalidArgument(format!("n = {n} is below the smallest budget {least}")));
        }
        let s = cfg.degree_for(n)?;
        let m = cfg.d - cfg.ell + 1;
        let units = dim_homogeneous(m, s);
        let polynomial = fit_polynomial(&self.target, s, &self.basis)?;
        let dirs = sample_spanning_directions(m, s, units, direction_seed(cfg.seed, s))?;
        let decomposition = decompose(&polynomial, &dirs, cfg.d, cfg.ell)?.normalized()?;
        let network = if cfg.build_network {
            Some(gtn_from_decomposition(
                &decomposition,
                self.dict.clone(),
                cfg.delta,
                cfg.max_exponent,
            )?)
        } else {
            None
        };

        let pts = &self.measure.points;
        let rows: Vec<(f64, f64, f64, f64)> = pts
            .par_iter()
            .map(|x| {
                let f = self.target.evaluate_at(x);
                let p = polynomial.evaluate(x);
                let ridge = eval_ridge(&decomposition, x)?;
                let out = match &network {
                    Some(net) => net.eval(x)?,
                    None => ridge,
                };
                Ok((f - p, f - ridge, f - out, (p - ridge).abs()))
            })
            .collect::<Result<_>>()?;
        let fit_error = self.measure.norm(&rows.iter().map(|r| r.0).collect::<Vec<_>>())?;
        let ridge_error = self.measure.norm(&rows.iter().map(|r| r.1).collect::<Vec<_>>())?;
        let total_error = self.measure.norm(&rows.iter().map(|r| r.2).collect::<Vec<_>>())?;
        let node_gap = rows.iter().fold(0.0f64, |m, r| m.max(r.3));
        let net_slack = if network.is_some() { units as f64 * cfg.delta } else { 0.0 };
        let error_bound = fit_error + self.measure.unit_norm() * (node_gap + net_slack);
        if total_error > error_bound * (1.0 + 1e-12) + 1e-15 {
            return Err(Error::ResidualTooLarge {
                residual: total_error,
                tolerance: error_bound,
            });
        }
        let report = PointReport {
            n,
            s,
            units,
            fit_error,
            ridge_error,
            total_error,
            residual: decomposition.diagnostics.residual,
            error_bound,
            seconds: start.elapsed().as_secs_f64(),
        };
        Ok(Approximation {
            polynomial,
            decomposition,
            network,
            report,
        })
    }

    /// All budgets of the config, in parallel.
    pub fn rate_sweep(&self) -> Result<RateReport> {
        let points = self
            .cfg
            .n_list
            .par_iter()
            .map(|&n| self.approximate_by_ridge(n).map(|a| a.report))
            .collect::<Result<Vec<_>>>()?;
        let rows: Vec<RateRow> = points
            .iter()
            .map(|p| RateRow {
                n: p.n,
                s: p.s,
                error_lq: p.total_error,
                residual: p.residual,
                seconds: if self.cfg.record_timing { p.seconds } else { 0.0 },
            })
            .collect();
        Ok(RateReport {
            slope: fitted_slope(&rows),
            theoretical_slope: self.cfg.theoretical_slope(),
            rows,
            points,
        })
    }
}

/// Convenience wrapper building a one-off pipeline around `f`.
pub fn approximate_by_ridge(f: TargetFn, n: usize, cfg: &ExperimentConfig) -> Result<Approximation> {
    let mut cfg = cfg.clone();
    cfg.n_list = vec![n];
    Pipeline::with_target(&cfg, f)?.approximate_by_ridge(n)
}

pub fn rate_sweep(cfg: &ExperimentConfig) -> Result<RateReport> {
    Pipeline::new(cfg)?.rate_sweep()
}

/// One CSV line: `n,s,error_lq,residual,seconds`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateRow {
    pub n: usize,
    pub s: usize,
    pub error_lq: f64,
    pub residual: f64,
    pub seconds: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RateReport {
    pub rows: Vec<RateRow>,
    /// Least-squares slope of `log error` against `log n`; `None` below two usable rows.
    pub slope: Option<f64>,
    pub theoretical_slope: f64,
    pub points: Vec<PointReport>,
}

/// Least-squares slope over rows with positive error.
pub fn fitted_slope(rows: &[RateRow]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.error_lq > 0.0 && r.n > 0)
        .map(|r| ((r.n as f64).ln(), r.error_lq.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    Some(sxy / sxx)
}

fn io_error(path: &Path, e: std::io::Error) -> Error {
    Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
}

impl RateReport {
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for row in &self.rows {
            w.serialize(row)?;
        }
        let bytes = w
            .into_inner()
            .map_err(|e| Error::InvalidArgument(format!("csv buffer: {e}")))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Writes whichever outputs are configured.
    pub fn write(&self, paths: &OutputPaths) -> Result<()> {
        if let Some(p) = &paths.csv {
            std::fs::write(p, self.to_csv()?).map_err(|e| io_error(p, e))?;
        }
        if let Some(p) = &paths.json {
            std::fs::write(p, self.to_json()?).map_err(|e| io_error(p, e))?;
        }
        Ok(())
    }

    /// Errors never increase along the budget list.
    pub fn monotone(&self) -> bool {
        self.rows.windows(2).all(|w| w[1].error_lq <= w[0].error_lq)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gaussian(d: usize) -> Target {
        Target::Gaussian {
            center: vec![0.2; d],
            width: 1.0,
        }
    }

    #[test]
    fn config_validation() {
        let mut cfg = ExperimentConfig::new(3, 2, vec![4, 8], gaussian(3));
        assert!(cfg.validate().is_ok());
        cfg.ell = 3;
        assert!(cfg.validate().is_err());
        cfg.ell = 1;
        cfg.n_list = vec![8, 4];
        assert!(cfg.validate().is_err());
        cfg.n_list = vec![];
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn infinite_norm_round_trip() {
        let mut cfg = ExperimentConfig::new(2, 1, vec![4], gaussian(2));
        cfg.q = f64::INFINITY;
        let text = serde_json::to_string(&cfg).unwrap();
        assert!(text.contains("\"q\":\"inf\""));
        assert!(ExperimentConfig::from_json(&text).unwrap().q.is_infinite());
    }

    #[test]
    fn slope_needs_two_rows() {
        let row = RateRow {
            n: 4,
            s: 1,
            error_lq: 0.1,
            residual: 0.0,
            seconds: 0.0,
        };
        assert_eq!(fitted_slope(&[row.clone()]), None);
        let other = RateRow {
            n: 8,
            error_lq: 0.025,
            ..row.clone()
        };
        assert!((fitted_slope(&[row, other]).unwrap() + 2.0).abs() < 1e-12);
    }
}
