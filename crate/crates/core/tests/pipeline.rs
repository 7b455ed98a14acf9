mod common;

use common::random_poly;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use ridgekit::orthobasis::build_basis;
use ridgekit::pipeline::*;
use ridgekit::quadrature::{build_ball_rule, default_exactness, lq_norm};

fn gaussian(center: Vec<f64>, width: f64) -> Target {
    Target::Gaussian { center, width }
}

#[test]
fn fit_examples() {
    let d = 2;
    let basis = build_basis(d, 8, &build_ball_rule(d, default_exactness(8)).unwrap()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let p = random_poly(d, 3, &mut rng);
    let fit = fit_polynomial(&p, 3, &basis).unwrap();
    assert!(fit.checked_sub(&p).unwrap().max_abs_coefficient() < 1e-8);
    // idempotent on its own output
    let again = fit_polynomial(&fit, 3, &basis).unwrap();
    assert!(again.checked_sub(&fit).unwrap().max_abs_coefficient() < 1e-10);
    let f = p.checked_add(basis.poly(basis.len() - 1)).unwrap();
    assert!(fit_polynomial(&f, 3, &basis).unwrap().checked_sub(&p).unwrap().max_abs_coefficient() < 1e-8);
}

#[test]
fn gaussian_fit_error_falls_with_degree() {
    let d = 2;
    let basis = build_basis(d, 6, &build_ball_rule(d, 24).unwrap()).unwrap();
    let rule = build_ball_rule(d, 30).unwrap();
    let f = |x: &[f64]| (-(x[0] * x[0] + x[1] * x[1])).exp();
    let mut last = f64::INFINITY;
    for s in 2..=6 {
        let p = fit_polynomial(&f, s, &basis).unwrap();
        let err = lq_norm(&|x: &[f64]| f(x) - p.evaluate(x), 2.0, &rule).unwrap();
        assert!(err <= last, "s={s}");
        last = err;
    }
}

#[test]
fn polynomial_target_is_recovered() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let p = random_poly(3, 3, &mut rng);
    let mut cfg = ExperimentConfig::new(3, 2, vec![4], Target::Polynomial { poly: p });
    cfg.build_network = false;
    let out = Pipeline::new(&cfg).unwrap().approximate_by_ridge(4).unwrap();
    assert_eq!(out.report.s, 3);
    assert!(out.report.total_error < 1e-7);
    // with the network, the only extra error is the dictionary tolerance
    cfg.build_network = true;
    let out = Pipeline::new(&cfg).unwrap().approximate_by_ridge(4).unwrap();
    assert!(out.report.total_error <= out.report.error_bound);
    assert!(out.network.is_some());
}

#[test]
fn bump_target_reports_positive_error() {
    let cfg = ExperimentConfig::new(
        2,
        1,
        vec![3, 6],
        Target::Bump {
            r: 2,
            m: 4,
            lattice_seed: None,
            signs_seed: 3,
        },
    );
    let report = rate_sweep(&cfg).unwrap();
    assert!(report.rows.iter().all(|r| r.error_lq > 0.0 && r.error_lq.is_finite()));
}

#[test]
fn doubling_the_budget_helps() {
    let cfg = ExperimentConfig::new(3, 2, vec![4, 8], gaussian(vec![0.3, -0.2, 0.1], 1.0));
    let r = rate_sweep(&cfg).unwrap();
    assert!(r.rows[1].error_lq < r.rows[0].error_lq);
}

#[test]
fn single_budget_has_no_slope() {
    let cfg = ExperimentConfig::new(2, 1, vec![4], gaussian(vec![0.0, 0.0], 1.0));
    let r = rate_sweep(&cfg).unwrap();
    assert_eq!(r.slope, None);
    assert!(r.to_json().unwrap().contains("\"slope\": null"));
}

#[test]
fn csv_is_deterministic_and_stable() {
    let mut cfg = ExperimentConfig::new(2, 1, vec![3, 5, 8], gaussian(vec![0.1, 0.4], 0.8));
    cfg.seed = 21;
    cfg.q = f64::INFINITY;
    let a = rate_sweep(&cfg).unwrap().to_csv().unwrap();
    let b = rate_sweep(&cfg).unwrap().to_csv().unwrap();
    assert_eq!(a, b);
    assert_eq!(a.lines().next().unwrap(), "n,s,error_lq,residual,seconds");
}

#[test]
fn error_bound_holds_for_every_norm() {
    for q in [1.0, 2.0, 3.5, f64::INFINITY] {
        let mut cfg = ExperimentConfig::new(3, 1, vec![6, 10], gaussian(vec![0.2, 0.0, -0.3], 0.9));
        cfg.q = q;
        cfg.quadrature.sup_points = Some(3000);
        for p in rate_sweep(&cfg).unwrap().points {
            assert!(p.total_error <= p.error_bound, "q={q}");
            assert!(p.error_bound >= p.fit_error);
        }
    }
}

#[test]
fn rate_ordering_between_activation_dimensions() {
    let cfgs = ridgekit::verify::rate_configs(7);
    let s1 = rate_sweep(&cfgs[0]).unwrap();
    let s2 = rate_sweep(&cfgs[1]).unwrap();
    assert!(s1.monotone() && s2.monotone());
    assert!(s2.slope.unwrap() < s1.slope.unwrap());
}

#[test]
fn outputs_are_written_and_io_errors_name_the_path() {
    let dir = std::env::temp_dir().join(format!("ridgekit-pipeline-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let cfg = ExperimentConfig::new(2, 1, vec![3, 4], gaussian(vec![0.0, 0.0], 1.0));
    let report = rate_sweep(&cfg).unwrap();
    let paths = OutputPaths {
        csv: Some(dir.join("r.csv")),
        json: Some(dir.join("r.json")),
    };
    report.write(&paths).unwrap();
    assert_eq!(std::fs::read_to_string(dir.join("r.csv")).unwrap(), report.to_csv().unwrap());
    let bad = OutputPaths {
        csv: Some(dir.join("missing").join("r.csv")),
        json: None,
    };
    let err = report.write(&bad).unwrap_err().to_string();
    assert!(err.contains("missing"));
    std::fs::remove_dir_all(dir).unwrap();
}

#[test]
fn config_json_accepts_inf_and_rejects_bad_lists() {
    let text = r#"{"d": 3, "ell": 1, "q": "inf", "n_list": [3, 6],
                   "target": {"kind": "gaussian", "center": [0, 0, 0], "width": 1}}"#;
    let cfg = ExperimentConfig::from_json(text).unwrap();
    assert!(cfg.q.is_infinite());
    assert_eq!(cfg.max_degree, 12);
    let bad = text.replace("[3, 6]", "[6, 3]");
    assert!(ExperimentConfig::from_json(&bad).is_err());
    let low = text.replace("[3, 6]", "[2, 6]");
    assert!(ExperimentConfig::from_json(&low).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]
    #[test]
    fn slope_of_a_power_law(exp in -4.0f64..-0.5, c in 0.1f64..10.0) {
        let rows: Vec<RateRow> = [4usize, 8, 16, 32]
            .iter()
            .map(|&n| RateRow { n, s: 1, error_lq: c * (n as f64).powf(exp), residual: 0.0, seconds: 0.0 })
            .collect();
        prop_assert!((fitted_slope(&rows).unwrap() - exp).abs() < 1e-10);
    }

    #[test]
    fn zero_errors_are_skipped(exp in -3.0f64..-1.0) {
        let mut rows: Vec<RateRow> = [4usize, 8, 16]
            .iter()
            .map(|&n| RateRow { n, s: 1, error_lq: (n as f64).powf(exp), residual: 0.0, seconds: 0.0 })
            .collect();
        rows.push(RateRow { n: 32, s: 1, error_lq: 0.0, residual: 0.0, seconds: 0.0 });
        prop_assert!((fitted_slope(&rows).unwrap() - exp).abs() < 1e-10);
    }
}
