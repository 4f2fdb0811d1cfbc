//! Acceptance gate. Each criterion prints one `PASS`/`FAIL` line; the test
//! fails if any criterion fails. Lines go straight to stderr so they show up
//! even when libtest captures output.
//!
//! Tolerances and replication counts are fixed here and must not be tuned to
//! make a criterion pass. Seeds are the CLI defaults.

use std::io::Write;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::Rng;
use rand_distr::StandardNormal;
use trialgen_core::numerics::{logistic_fit, ols_fit, partial_r2, Matrix, DEFAULT_MAX_ITER, SCORE_TOL};
use trialgen_core::rng::stream;
use trialgen_core::sensitivity::{r2_bias_bound, raw_bias_bound, robustness_value, strength_ratio};
use trialgen_core::simulate::{
    coverage_experiment, dgp1_population_check, estimator_calibration, CoverageCurve, CoverageSettings,
    Dgp1Config, Dgp2Config, ORACLE_KEY,
};
use trialgen_core::transport::DEFAULT_WEIGHT_CLIP;
use trialgen_core::{Estimator, OutcomeLearner, SensitivityParamsR2, SensitivityParamsRaw};

const SEED: u64 = 0;
const REPS: usize = 500;
const GRID: [f64; 5] = [0.0, 0.25, 0.5, 0.75, 1.0];

struct Gate {
    results: Vec<(&'static str, bool)>,
}

impl Gate {
    fn record(&mut self, name: &'static str, pass: bool, detail: String) {
        let line = format!("{} {name}: {detail}\n", if pass { "PASS" } else { "FAIL" });
        let _ = std::io::stderr().write_all(line.as_bytes());
        self.results.push((name, pass));
    }
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let t = Instant::now();
    let v = f();
    (v, t.elapsed())
}

fn oracle_identity(g: &mut Gate) {
    let cfg = Dgp1Config::default();
    let oracle = cfg.closed_form_oracle();
    let (pop, dt) = timed(|| dgp1_population_check(&cfg, 1_000_000, ORACLE_KEY).unwrap());
    let exact = oracle.bias == 0.125 && oracle.gamma_star * oracle.delta_u_star == 0.125;
    let close = (pop.moderation_imbalance - 0.125).abs() <= 0.01;
    g.record(
        "oracle identity",
        exact && close && dt < Duration::from_secs(30),
        format!(
            "closed form {} (= {} x {}), population {:.5} at n=1e6 (tol 0.01), {:.1}s",
            oracle.bias,
            oracle.gamma_star,
            oracle.delta_u_star,
            pop.moderation_imbalance,
            dt.as_secs_f64()
        ),
    );
}

fn calibration(g: &mut Gate) {
    let cfg = Dgp1Config::default();
    let (cal, dt) = timed(|| {
        estimator_calibration(
            &cfg,
            &[
                Estimator::GFormula(OutcomeLearner::Ols),
                Estimator::Ipw {
                    weight_clip: DEFAULT_WEIGHT_CLIP,
                },
            ],
            REPS,
            SEED,
        )
        .unwrap()
    });
    let (gf, ipw) = (cal[0].mean, cal[1].mean);
    let pass = (gf - 1.0).abs() <= 0.02 && (ipw - gf).abs() <= 0.03 && dt < Duration::from_secs(300);
    g.record(
        "baseline calibration",
        pass,
        format!(
            "g-formula mean {gf:.4} (1.0 ± 0.02), IPW mean {ipw:.4} (g-formula ± 0.03), \
             bias vs tau* {:.4}, {REPS} reps, {:.1}s",
            gf - cfg.closed_form_oracle().tau_star,
            dt.as_secs_f64()
        ),
    );
}

fn run_curve(dgp: &dyn trialgen_core::simulate::Dgp) -> (CoverageCurve, Duration) {
    timed(|| coverage_experiment(dgp, &GRID, REPS, SEED, &CoverageSettings::default()).unwrap())
}

fn fmt_curve(v: &[f64]) -> String {
    v.iter().map(|c| format!("{c:.3}")).collect::<Vec<_>>().join(", ")
}

fn coverage_curve(g: &mut Gate, c: &CoverageCurve, dt: Duration) {
    let env = &c.coverage_envelope;
    let monotone = env.windows(2).all(|w| w[1] >= w[0]);
    let pass = env[0] == 0.0 && monotone && env[env.len() - 1] >= 0.90 && dt < Duration::from_secs(900);
    g.record(
        "coverage curve",
        pass,
        format!(
            "DGP1 envelope coverage [{}] over gamma [0, .25, .5, .75, 1]; need 0 at 0, \
             non-decreasing, >= 0.90 at 1; {} failed reps; {:.1}s",
            fmt_curve(env),
            c.n_failed,
            dt.as_secs_f64()
        ),
    );
}

fn dominance(g: &mut Gate, curves: &[(&str, &CoverageCurve)]) {
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, c) in curves {
        let ok = c
            .coverage_full_ci
            .iter()
            .zip(&c.coverage_envelope)
            .all(|(f, e)| f >= e);
        pass &= ok;
        parts.push(format!("{name} full [{}]", fmt_curve(&c.coverage_full_ci)));
    }
    g.record("full-CI dominance", pass, parts.join("; "));
}

fn rv_round_trip(g: &mut Gate) {
    let mut rng = stream(SEED, 11);
    let (worst, dt) = timed(|| {
        let mut worst = 0.0f64;
        for _ in 0..1000 {
            let sigma = rng.random_range(0.05..5.0);
            let var_s = rng.random_range(0.01..0.25);
            let r2_s_x = rng.random_range(0.0..0.9);
            let rv_true: f64 = rng.random_range(1e-6..1.0);
            let b = sigma * (rv_true / (var_s * (1.0 - r2_s_x))).sqrt();
            let rv = robustness_value(b, sigma, var_s, r2_s_x).unwrap();
            worst = worst.max((rv - rv_true).abs() / rv_true);
            let u: f64 = rng.random_range(0.0..=1.0);
            let (r2t, r2s) = (rv.powf(u), rv.powf(1.0 - u));
            let params = SensitivityParamsR2::new(r2t.min(1.0), r2s.min(1.0), sigma, var_s, r2_s_x).unwrap();
            let back = r2_bias_bound(&params).unwrap();
            worst = worst.max((back - b).abs() / b);
        }
        worst
    });
    g.record(
        "RV round-trip",
        worst <= 1e-12 && dt < Duration::from_secs(1),
        format!(
            "max relative error {worst:.2e} over 1000 draws (tol 1e-12), {:.3}s",
            dt.as_secs_f64()
        ),
    );
}

fn hand_values(g: &mut Gate) {
    let r2 = r2_bias_bound(&SensitivityParamsR2::new(0.1, 0.1, 1.0, 0.25, 0.0).unwrap()).unwrap();
    let raw = raw_bias_bound(&SensitivityParamsRaw::new(0.5, 0.25).unwrap());
    let ratio = strength_ratio(0.04, 0.02);
    let pass = (r2 - 0.2).abs() <= 1e-12 && (raw - 0.125).abs() <= 1e-15 && (ratio - 2.0).abs() <= 1e-12;
    g.record(
        "hand values",
        pass,
        format!("partial-R2 bound {r2} (0.2), raw bound {raw} (0.125), RV 0.04 / product 0.02 = {ratio} (2)"),
    );
}

fn sigma_conservative(g: &mut Gate, c: &CoverageCurve) {
    let pop = dgp1_population_check(&Dgp1Config::default(), 1_000_000, ORACLE_KEY).unwrap();
    let truth_ok = (pop.sigma_tau - 0.5).abs() <= 0.05 && (pop.sigma_tau_upper - 1.5).abs() <= 0.05;
    let every_rep = c.min_sigma_tau_upper >= c.oracle.sigma_tau;
    g.record(
        "sigma upper bound conservative",
        truth_ok && every_rep,
        format!(
            "population true {:.4} (0.5 ± 0.05), upper {:.4} (1.5 ± 0.05); per-rep estimate min {:.4}, \
             mean {:.4} >= true {}",
            pop.sigma_tau,
            pop.sigma_tau_upper,
            c.min_sigma_tau_upper,
            c.mean_sigma_tau_upper,
            c.oracle.sigma_tau
        ),
    );
}

fn nonlinear(g: &mut Gate, c: &CoverageCurve, dt: Duration) {
    let at_one = c.coverage_envelope[GRID.len() - 1];
    g.record(
        "nonlinear misspecification",
        at_one < 0.95,
        format!(
            "DGP2 envelope coverage [{}]; {at_one:.3} at gamma 1 (need < 0.95); {:.1}s",
            fmt_curve(&c.coverage_envelope),
            dt.as_secs_f64()
        ),
    );
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_trialgen"))
}

fn run_ok(args: &[&str]) {
    let out = bin().args(args).output().unwrap();
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

/// Runs every command into `dir` with the given thread count.
fn cli_suite(dir: &Path, threads: &str) {
    let d = |s: &str| dir.join(s).to_str().unwrap().to_string();
    let t = ["--threads", threads];
    run_ok(
        &[
            &t[..],
            &[
                "generate",
                "--dgp",
                "1",
                "--seed",
                "3",
                "--n-trial",
                "600",
                "--n-target",
                "900",
                "--out-dir",
                &d("gen"),
            ],
        ]
        .concat(),
    );
    let data = [
        "--trial",
        &d("gen/trial.csv"),
        "--target",
        &d("gen/target.csv"),
        "--treatment",
        "treatment",
        "--outcome",
        "outcome",
        "--covariates",
        "x1,x2,x3,x4,x5",
    ]
    .map(String::from);
    let data: Vec<&str> = data.iter().map(String::as_str).collect();
    let analyze = [
        "analyze",
        "--gamma",
        "0.5,1",
        "--lambda",
        "0.25",
        "--r2-tau",
        "0.05,0.1",
        "--r2-s",
        "0.1",
        "--boot",
        "200",
        "--envelope",
        "--contour",
        "--resolution",
        "11",
        "--out-dir",
    ];
    run_ok(&[&t[..], &analyze, &[&d("analyze")], &data].concat());
    run_ok(
        &[
            &t[..],
            &["benchmark", "--hide", "x1", "--out-dir", &d("bench")],
            &data,
        ]
        .concat(),
    );
    run_ok(
        &[
            &t[..],
            &[
                "contour",
                "--sigma-tau",
                "1.2",
                "--var-s",
                "0.2",
                "--r2-s-x",
                "0.1",
                "--tau-x",
                "0.3",
                "--out-dir",
                &d("contour"),
            ],
        ]
        .concat(),
    );
    for dgp in ["1", "2", "3", "hide-one"] {
        let out = d(&format!("sim{dgp}"));
        run_ok(
            &[
                &t[..],
                &[
                    "simulate",
                    "--dgp",
                    dgp,
                    "--reps",
                    "6",
                    "--boot",
                    "100",
                    "--n-trial",
                    "400",
                    "--n-target",
                    "600",
                    "--out-dir",
                    &out,
                ],
            ]
            .concat(),
        );
    }
}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    for e in std::fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        if p.is_dir() {
            out.extend(files(&p));
        } else {
            out.push((p.to_string_lossy().into_owned(), std::fs::read(&p).unwrap()));
        }
    }
    out.sort();
    out
}

fn determinism(g: &mut Gate) {
    let tmp = tempfile::tempdir().unwrap();
    let runs = [("1", "a"), ("1", "b"), ("4", "c")];
    for (threads, name) in runs {
        cli_suite(&tmp.path().join(name), threads);
    }
    let strip = |name: &str| {
        let root = tmp.path().join(name);
        files(&root)
            .into_iter()
            .map(|(p, b)| (p.strip_prefix(root.to_str().unwrap()).unwrap().to_string(), b))
            .collect::<Vec<_>>()
    };
    let a = strip("a");
    let (b, c) = (strip("b"), strip("c"));
    // Outputs embed no paths, so byte equality is meaningful across dirs.
    let pass = !a.is_empty() && a == b && a == c;
    g.record(
        "determinism",
        pass,
        format!(
            "{} output files from generate/analyze/benchmark/contour/simulate(1,2,3,hide-one) \
             byte-identical across reruns and --threads 1 vs 4",
            a.len()
        ),
    );
}

fn numerics(g: &mut Gate) {
    let mut rng = stream(SEED, 12);
    let mut worst_ols = 0.0f64;
    for _ in 0..1000 {
        let n = rng.random_range(10..200);
        let p = rng.random_range(1..8usize).min(n - 2);
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                let mut r = vec![1.0];
                r.extend(
                    (0..p).map(|_| rng.random_range(-10.0..10.0) * rng.sample::<f64, _>(StandardNormal)),
                );
                r
            })
            .collect();
        let x = Matrix::from_rows(&rows).unwrap();
        let y: Vec<f64> = (0..n)
            .map(|_| 100.0 * rng.sample::<f64, _>(StandardNormal) + 5.0)
            .collect();
        let fit = ols_fit(&x, &y).unwrap();
        let ynorm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        let orth = x
            .t_mul_vec(&fit.residuals)
            .iter()
            .fold(0.0f64, |m, v| m.max(v.abs()));
        worst_ols = worst_ols.max(orth / ynorm);
    }

    let mut worst_score = 0.0f64;
    let mut converged = 0;
    for _ in 0..1000 {
        let n = rng.random_range(50..400);
        let p = rng.random_range(1..5usize);
        let beta: Vec<f64> = (0..=p).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut rows = Vec::with_capacity(n);
        let mut labels = Vec::with_capacity(n);
        for _ in 0..n {
            let mut r = vec![1.0];
            r.extend((0..p).map(|_| rng.sample::<f64, _>(StandardNormal)));
            let eta: f64 = r.iter().zip(&beta).map(|(a, b)| a * b).sum();
            labels.push(u8::from(rng.random::<f64>() < 1.0 / (1.0 + (-eta).exp())));
            rows.push(r);
        }
        let x = Matrix::from_rows(&rows).unwrap();
        if let Ok(fit) = logistic_fit(&x, &labels, DEFAULT_MAX_ITER) {
            if fit.converged {
                converged += 1;
                worst_score = worst_score.max(fit.max_score);
            }
        }
    }

    let mut pr_ok = true;
    for _ in 0..1000 {
        let mut v = [rng.random::<f64>(), rng.random::<f64>(), rng.random::<f64>()];
        v.sort_by(f64::total_cmp);
        let [red, f1, f2] = v;
        let (a, b) = (partial_r2(f1, red).unwrap(), partial_r2(f2, red).unwrap());
        let c = partial_r2(f2, f1).unwrap();
        pr_ok &= (0.0..=1.0).contains(&a) && (0.0..=1.0).contains(&b) && a <= b;
        // larger reduced-model R² leaves less to explain
        pr_ok &= c <= b + 1e-15;
    }

    g.record(
        "numerics suite",
        worst_ols <= 1e-8 && worst_score <= SCORE_TOL && converged >= 990 && pr_ok,
        format!(
            "OLS max |X'r|/|y| {worst_ols:.2e} (<= 1e-8, 1000 problems); logistic max score {worst_score:.2e} \
             (<= 1e-6, {converged}/1000 converged); partial R2 range/monotonicity on 1000 triples {}",
            if pr_ok { "ok" } else { "violated" }
        ),
    );
}

#[test]
fn acceptance() {
    let mut g = Gate { results: Vec::new() };
    oracle_identity(&mut g);
    calibration(&mut g);
    let (dgp1, dt1) = run_curve(&Dgp1Config::default());
    coverage_curve(&mut g, &dgp1, dt1);
    let (dgp2, dt2) = run_curve(&Dgp2Config::default());
    dominance(&mut g, &[("DGP1", &dgp1), ("DGP2", &dgp2)]);
    rv_round_trip(&mut g);
    hand_values(&mut g);
    sigma_conservative(&mut g, &dgp1);
    nonlinear(&mut g, &dgp2, dt2);
    determinism(&mut g);
    numerics(&mut g);

    let failed: Vec<_> = g.results.iter().filter(|(_, p)| !p).map(|(n, _)| *n).collect();
    let _ = writeln!(
        std::io::stderr(),
        "acceptance: {}/{} passed",
        g.results.len() - failed.len(),
        g.results.len()
    );
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
