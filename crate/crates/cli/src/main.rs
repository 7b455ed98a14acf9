use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use ridgekit::networks::{gtn_deviation, gtn_from_decomposition, PolynomialDictionary, DEFAULT_MAX_EXPONENT};
use ridgekit::orthobasis::build_basis;
use ridgekit::pipeline::{thread_pool, ExperimentConfig, Pipeline};
use ridgekit::polycore::{dim_homogeneous, MultiIndexPolynomial};
use ridgekit::quadrature::{build_ball_rule, default_exactness, sup_grid, Domain};
use ridgekit::ridge_real::{decompose, sample_spanning_directions};
use ridgekit::testfuncs::counterexample_ratio;
use ridgekit::verify::{run_all, run_suite, Check, SuiteReport};
use ridgekit::{Error, Result};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::json;

/// Ridge decompositions, quasi-projections and approximation-rate experiments.
///
/// Every command takes `--config <file.json>`; flags override fields of the
/// file. Exit status is 0 when all checks pass, 1 when one fails and 2 on
/// errors. `RIDGEKIT_THREADS` caps the worker count.
#[derive(Parser)]
#[command(name = "ridgekit", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build an orthonormal basis of P_s on the unit ball.
    Basis(BasisArgs),
    /// Decompose a polynomial into ridge terms and build a network from them.
    Decompose(DecomposeArgs),
    /// Run self-check suites.
    Verify(VerifyArgs),
    /// Error against budget for a target function; CSV on stdout unless a path is set.
    RateSweep(RateArgs),
    /// Norm ratios of the counterexample family.
    Counterexample(CounterArgs),
}

#[derive(Args)]
struct BasisArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    s_max: Option<usize>,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct DecomposeArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Suite name, or `all`.
    #[arg(long)]
    suite: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct RateArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    csv: Option<PathBuf>,
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args)]
struct CounterArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct BasisConfig {
    d: usize,
    s_max: usize,
    #[serde(default)]
    exactness: Option<usize>,
    #[serde(default)]
    output: Option<PathBuf>,
}

fn default_true() -> bool {
    true
}

fn default_delta() -> f64 {
    1e-6
}

fn default_exponent() -> u32 {
    DEFAULT_MAX_EXPONENT
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct DecomposeConfig {
    polynomial: MultiIndexPolynomial,
    ell: usize,
    /// Number of ridge terms; defaults to the minimum for the degree.
    #[serde(default)]
    n: Option<usize>,
    #[serde(default)]
    seed: u64,
    #[serde(default = "default_true")]
    network: bool,
    #[serde(default = "default_delta")]
    delta: f64,
    #[serde(default = "default_exponent")]
    max_exponent: u32,
    #[serde(default)]
    output: Option<PathBuf>,
}

fn default_suite() -> String {
    "all".into()
}

fn default_seed() -> u64 {
    7
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct VerifyConfig {
    #[serde(default = "default_suite")]
    suite: String,
    #[serde(default = "default_seed")]
    seed: u64,
    #[serde(default)]
    output: Option<PathBuf>,
}

fn default_counter_d() -> usize {
    2
}

fn default_counter_n() -> Vec<usize> {
    vec![16, 64, 256, 1024]
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CounterConfig {
    #[serde(default = "default_counter_d")]
    d: usize,
    #[serde(default = "default_counter_n")]
    n_list: Vec<usize>,
    #[serde(default)]
    output: Option<PathBuf>,
}

fn read_config<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| io_at(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::InvalidArgument(format!("{}: {e}", path.display())))
}

fn io_at(path: &Path, e: std::io::Error) -> Error {
    Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| io_at(path, e))
}

/// Prints `value` or writes it to `output`.
fn emit<T: Serialize>(value: &T, output: Option<&Path>) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    match output {
        Some(p) => write_file(p, &text),
        None => stdout(&format!("{text}\n")),
    }
}

/// A closed pipe (`| head`) is not an error.
fn stdout(text: &str) -> Result<()> {
    match std::io::stdout().lock().write_all(text.as_bytes()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

fn basis(args: BasisArgs) -> Result<bool> {
    let mut cfg = match &args.config {
        Some(p) => read_config(p)?,
        None => BasisConfig {
            d: 0,
            s_max: 0,
            exactness: None,
            output: None,
        },
    };
    cfg.d = args.d.unwrap_or(cfg.d);
    cfg.s_max = args.s_max.unwrap_or(cfg.s_max);
    cfg.output = args.output.or(cfg.output);
    if cfg.d == 0 {
        return Err(Error::InvalidArgument("basis needs d >= 1 (--d or config)".into()));
    }
    let rule = build_ball_rule(cfg.d, cfg.exactness.unwrap_or(default_exactness(cfg.s_max)))?;
    let basis = build_basis(cfg.d, cfg.s_max, &rule)?;
    let defect = basis.orthonormality_defect();
    let check = Check::below("orthonormality defect", defect, 1e-10);
    if let Some(p) = &cfg.output {
        write_file(p, &serde_json::to_string(&basis.to_serialized())?)?;
    }
    emit(
        &json!({
            "d": cfg.d,
            "s_max": cfg.s_max,
            "size": basis.len(),
            "rule_nodes": rule.len(),
            "rule_digest": basis.rule_digest(),
            "checks": [check],
        }),
        None,
    )?;
    Ok(check.passed)
}

fn decompose_cmd(args: DecomposeArgs) -> Result<bool> {
    let mut cfg: DecomposeConfig = read_config(&args.config)?;
    cfg.seed = args.seed.unwrap_or(cfg.seed);
    cfg.output = args.output.or(cfg.output);
    let p = &cfg.polynomial;
    let d = p.dim();
    if cfg.ell == 0 || cfg.ell >= d {
        return Err(Error::InvalidArgument(format!("need 1 <= ell < d, got ell = {}, d = {d}", cfg.ell)));
    }
    let s = p.degree().unwrap_or(0);
    let m = d - cfg.ell + 1;
    let n = cfg.n.unwrap_or_else(|| dim_homogeneous(m, s));
    let dirs = sample_spanning_directions(m, s, n, cfg.seed)?;
    let decomposition = decompose(p, &dirs, d, cfg.ell)?.normalized()?;
    let diag = &decomposition.diagnostics;
    let mut checks = vec![Check::below(
        "sup residual relative to 1 + sup |P|",
        diag.residual / (1.0 + diag.poly_sup),
        1e-8,
    )];
    let network = if cfg.network {
        let dict = Arc::new(PolynomialDictionary::new(cfg.ell)?);
        let net = gtn_from_decomposition(&decomposition, dict, cfg.delta, cfg.max_exponent)?;
        let dev = gtn_deviation(&net, &decomposition, &sup_grid(Domain::Ball(d), 1000))?;
        checks.push(Check::at_most("network deviation", dev, net.units.len() as f64 * cfg.delta));
        Some(serde_json::from_str::<serde_json::Value>(&net.to_json()?)?)
    } else {
        None
    };
    let passed = checks.iter().all(|c| c.passed);
    emit(
        &json!({
            "n": n,
            "s": s,
            "direction_condition": dirs.condition,
            "residual": diag.residual,
            "decomposition": decomposition,
            "network": network,
            "checks": checks,
        }),
        cfg.output.as_deref(),
    )?;
    Ok(passed)
}

fn verify(args: VerifyArgs) -> Result<bool> {
    let mut cfg = match &args.config {
        Some(p) => read_config(p)?,
        None => VerifyConfig {
            suite: default_suite(),
            seed: default_seed(),
            output: None,
        },
    };
    cfg.suite = args.suite.unwrap_or(cfg.suite);
    cfg.seed = args.seed.unwrap_or(cfg.seed);
    cfg.output = args.output.or(cfg.output);
    let reports: Vec<SuiteReport> = if cfg.suite == "all" {
        run_all(cfg.seed)?
    } else {
        vec![run_suite(&cfg.suite, cfg.seed)?]
    };
    for r in &reports {
        eprintln!("{:<15} {}  {}", r.suite, if r.passed { "PASS" } else { "FAIL" }, r.headline());
    }
    let passed = reports.iter().all(|r| r.passed);
    emit(&json!({ "passed": passed, "suites": reports }), cfg.output.as_deref())?;
    Ok(passed)
}

fn rate_sweep(args: RateArgs) -> Result<bool> {
    let text = fs::read_to_string(&args.config).map_err(|e| io_at(&args.config, e))?;
    let mut cfg: ExperimentConfig = serde_json::from_str(&text)
        .map_err(|e| Error::InvalidArgument(format!("{}: {e}", args.config.display())))?;
    cfg.seed = args.seed.unwrap_or(cfg.seed);
    if args.csv.is_some() {
        cfg.output.csv = args.csv;
    }
    if args.json.is_some() {
        cfg.output.json = args.json;
    }
    let report = Pipeline::new(&cfg)?.rate_sweep()?;
    report.write(&cfg.output)?;
    if cfg.output.csv.is_none() {
        stdout(&report.to_csv()?)?;
    }
    let slope = report.slope.map_or("null".to_string(), |v| format!("{v:.4}"));
    eprintln!(
        "fitted slope {slope}, reference slope {:.4}, errors non-increasing: {}",
        report.theoretical_slope,
        report.monotone()
    );
    // the per-point error bound is asserted inside the sweep
    Ok(true)
}

fn counterexample(args: CounterArgs) -> Result<bool> {
    let mut cfg = match &args.config {
        Some(p) => read_config(p)?,
        None => CounterConfig {
            d: default_counter_d(),
            n_list: default_counter_n(),
            output: None,
        },
    };
    cfg.d = args.d.unwrap_or(cfg.d);
    cfg.output = args.output.or(cfg.output);
    let reports = cfg
        .n_list
        .iter()
        .map(|&n| counterexample_ratio(n, cfg.d))
        .collect::<Result<Vec<_>>>()?;
    let mut checks = Vec::new();
    for w in reports.windows(2) {
        checks.push(Check::flag(
            format!("ratio decreases from n={} to n={}", w[0].n, w[1].n),
            w[1].ratio < w[0].ratio,
            format!("{} -> {}", w[0].ratio, w[1].ratio),
        ));
    }
    for r in &reports {
        let floor = (r.n as f64 / 2.0).cbrt();
        checks.push(Check::flag(
            format!("n={} sup norm >= (n/2)^(1/3)", r.n),
            r.linf >= floor,
            format!("{} vs {floor}", r.linf),
        ));
    }
    let passed = checks.iter().all(|c| c.passed);
    emit(&json!({ "reports": reports, "checks": checks }), cfg.output.as_deref())?;
    Ok(passed)
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Basis(a) => basis(a),
        Command::Decompose(a) => decompose_cmd(a),
        Command::Verify(a) => verify(a),
        Command::RateSweep(a) => rate_sweep(a),
        Command::Counterexample(a) => counterexample(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = thread_pool().and_then(|pool| pool.install(|| run(cli)));
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
