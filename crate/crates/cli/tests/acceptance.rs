//! Acceptance gate: one check per criterion, one PASS/FAIL line each.
//! Runs as a plain binary (harness = false) so the lines print in order;
//! exits nonzero if any criterion fails.

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use mdimpute::{
    expected_coefficient_variances, fit_ols, fit_outcome, generate, impute, mean,
    sample_covariance, sample_variance, theory_quantities, ImputationMethod, Matrix, RngStream,
    ScenarioParams,
};
use mdimpute_cli::commands::{grid_rows, sampling_summary};
use mdimpute_cli::config::DEFAULT_P_GRID;
use serde_json::Value;

type Outcome = Result<String, String>;

fn check(ok: bool, msg: String) -> Outcome {
    if ok {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn within_rel(got: f64, want: f64, rel: f64) -> bool {
    (got - want).abs() <= rel * want.abs()
}

fn c1_theory_exact() -> Outcome {
    let params = ScenarioParams::default();
    let t0 = Instant::now();
    let reps = 1000;
    for _ in 0..reps {
        std::hint::black_box(theory_quantities(std::hint::black_box(&params)).unwrap());
    }
    let per_call = t0.elapsed() / reps;
    let t = theory_quantities(&params).unwrap();
    let want = [
        ("omega", t.omega, 0.7),
        ("Var(X_imp,det)", t.var_x_imp_det, 0.875),
        ("Cov(X_imp,det,Y)", t.cov_x_imp_det_y, 1.75),
        ("Var(X|R=0)", t.var_x_given_r0, 1.24),
        ("Var(Xhat|R=1)", t.var_xhat_given_r1, 2.0 / 9.0),
        ("E(X|R=0)", t.e_x_given_r0, 0.4),
        ("Var(X_imp,det|y)", t.var_x_imp_det_y, 1.175),
        ("Cov(X_imp,det|y,Y)", t.cov_x_imp_det_y_y, 2.5),
    ];
    let worst = want.iter().map(|(_, g, w)| (g - w).abs()).fold(0.0, f64::max);
    let bad: Vec<_> = want.iter().filter(|(_, g, w)| (g - w).abs() > 1e-9).map(|x| x.0).collect();
    check(
        bad.is_empty() && per_call < Duration::from_millis(1),
        format!("max abs error {worst:.2e}, {per_call:?} per call, off: {bad:?}"),
    )
}

fn c2_expected_variances() -> Outcome {
    let p = ScenarioParams::default();
    let mut worst: f64 = 0.0;
    for n in [20usize, 102, 1000, 10_000, 1_000_000] {
        let v = expected_coefficient_variances(&p, n).unwrap();
        let nf = n as f64;
        for (got, want) in [
            (v.full_cohort, 0.8 / (nf - 2.0)),
            (v.model_based_det, 2.857143 / (nf - 2.0)),
            (v.complete_case, 0.806452 / (nf * 0.625 - 2.0)),
        ] {
            worst = worst.max(((got - want) / want).abs());
        }
    }
    check(worst <= 1e-5, format!("max relative error {worst:.2e}"))
}

fn c3_bias_table() -> Outcome {
    let t0 = Instant::now();
    let d = generate(&ScenarioParams::default(), 1_000_000, &mut RngStream::new(2024, 0)).unwrap();
    let targets = [
        (ImputationMethod::DET, 2.0),
        (ImputationMethod::DET_Y, 2.128),
        (ImputationMethod::STOC, 1.4),
        (ImputationMethod::STOC_Y, 2.0),
    ];
    let mut ok = true;
    let mut parts = Vec::new();
    for (k, (method, want)) in targets.into_iter().enumerate() {
        let mut rng = RngStream::new(2024, k as u64 + 1);
        let fit = fit_outcome(&impute(&d, method, Some(&mut rng)).unwrap()).unwrap();
        ok &= (fit.beta1_hat - want).abs() <= 0.02;
        parts.push(format!("{method} {:.4}", fit.beta1_hat));
    }
    let took = t0.elapsed();
    check(ok && took < Duration::from_secs(30), format!("{} in {took:.1?}", parts.join(", ")))
}

fn c4_grid() -> Outcome {
    let t0 = Instant::now();
    let rows = grid_rows(&ScenarioParams::default(), &DEFAULT_P_GRID, 1_000_000, 7).unwrap();
    let took = t0.elapsed();
    let mut worst: f64 = 0.0;
    let mut pattern = true;
    for r in &rows {
        worst = worst
            .max(((r.var_ximp - r.theory.var_ximp) / r.theory.var_ximp).abs())
            .max(((r.cov_ximp_y - r.theory.cov_ximp_y) / r.theory.cov_ximp_y).abs());
        pattern &= match r.method {
            ImputationMethod::DET | ImputationMethod::STOC_Y => within_rel(r.beta1, 2.0, 0.02),
            ImputationMethod::DET_Y => r.beta1 > 2.0,
            _ => r.beta1 < 2.0,
        };
    }
    check(
        rows.len() == 36 && worst <= 0.02 && pattern && took < Duration::from_secs(600),
        format!(
            "{} rows, worst var/cov deviation {:.3}%, pattern {}, {took:.1?}",
            rows.len(),
            worst * 100.0,
            if pattern { "holds" } else { "broken" }
        ),
    )
}

fn c5_sampling() -> Outcome {
    let t0 = Instant::now();
    let s = sampling_summary(&ScenarioParams::default(), ImputationMethod::DET, 102, 100_000, 11).unwrap();
    let took = t0.elapsed();
    let full = s.full_cohort.empirical_var;
    let cc = s.complete_case.empirical_var;
    let det = s.imputed.empirical_var;
    let model = s.imputed.mean_model_var;
    let ok = within_rel(det, 0.0207, 0.05)
        && within_rel(full, 0.008, 0.10)
        && within_rel(cc, 0.013, 0.10)
        && within_rel(model, 0.029, 0.10)
        && full < cc
        && cc < det
        && det < model
        && took < Duration::from_secs(300);
    check(
        ok,
        format!("full {full:.5} < cc {cc:.5} < det {det:.5} < model {model:.5}, {took:.1?}"),
    )
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_mdimpute"))
}

fn run_json(args: &[&str]) -> Value {
    let out = bin().args(args).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

fn c6_applied_example(dir: &Path) -> Outcome {
    let data = dir.join("applied.csv");
    let st = bin()
        .args(["generate", "--n", "1000", "--seed", "1", "--out"])
        .arg(&data)
        .output()
        .unwrap();
    if !st.status.success() {
        return Err("generate failed".into());
    }
    let data = data.to_str().unwrap();
    let det = run_json(&["analyze", data, "--method", "det", "--bootstrap", "1000", "--seed", "1"]);
    let stoc = run_json(&["analyze", data, "--method", "stoc-y", "--m", "40", "--seed", "1"]);
    let f = |v: &Value, p: &str| v.pointer(p).and_then(Value::as_f64).unwrap_or(f64::NAN);
    let (b, se, bse) = (f(&det, "/fit/beta1"), f(&det, "/fit/se_model"), f(&det, "/bootstrap/se"));
    let (q, rse) = (f(&stoc, "/multiple_imputation/beta1"), f(&stoc, "/multiple_imputation/se"));
    let ok = (b - 2.0).abs() <= 0.1
        && (se - 0.051).abs() <= 0.01
        && (0.035..=0.055).contains(&bse)
        && (q - 2.0).abs() <= 0.1
        && (0.025..=0.05).contains(&rse);
    check(
        ok,
        format!("det {b:.3} (model SE {se:.4}, bootstrap SE {bse:.4}); stoc-y m=40 {q:.3} (Rubin SE {rse:.4})"),
    )
}

fn c7_covariance_equivalence() -> Outcome {
    let reps = 200u64;
    let diffs: Vec<f64> = (0..reps)
        .map(|r| {
            let d = generate(&ScenarioParams::default(), 10_000, &mut RngStream::new(77, r)).unwrap();
            let det = impute(&d, ImputationMethod::DET, None).unwrap();
            let mut rng = RngStream::new(78, r);
            let stoc = impute(&d, ImputationMethod::STOC, Some(&mut rng)).unwrap();
            sample_covariance(&stoc.x_imp, d.y()).unwrap() - sample_covariance(&det.x_imp, d.y()).unwrap()
        })
        .collect();
    let m = mean(&diffs);
    let se = (sample_variance(&diffs).unwrap() / reps as f64).sqrt();
    check(m.abs() <= 5.0 * se, format!("mean difference {m:.2e}, {:.2} SE", m.abs() / se))
}

fn c8_determinism(dir: &Path) -> Outcome {
    let data = dir.join("det.csv");
    let st = bin()
        .args(["generate", "--n", "400", "--seed", "5", "--oracle", "--out"])
        .arg(&data)
        .output()
        .unwrap();
    if !st.status.success() {
        return Err("generate failed".into());
    }
    let data = data.to_str().unwrap().to_string();
    let commands: Vec<Vec<&str>> = vec![
        vec!["generate", "--n", "500", "--seed", "3", "--oracle"],
        vec!["analyze", &data, "--method", "stoc", "--m", "10", "--bootstrap", "200", "--seed", "4"],
        vec!["analyze", &data, "--method", "det-y", "--bootstrap", "100"],
        vec!["grid", "--n", "20000", "--seed", "9"],
        vec!["sampling", "--replications", "300", "--method", "stoc-y", "--seed", "2"],
        vec!["theory"],
    ];
    let mut bad = Vec::new();
    for args in &commands {
        let mut outputs = Vec::new();
        for threads in ["1", "1", "4", "7"] {
            let out = bin().args(args).args(["--threads", threads]).output().unwrap();
            if !out.status.success() {
                bad.push(format!("{} failed", args[0]));
            }
            outputs.push(out.stdout);
        }
        if outputs.windows(2).any(|w| w[0] != w[1]) {
            bad.push(args.join(" "));
        }
    }
    check(
        bad.is_empty(),
        format!("{} commands x 4 runs (threads 1,1,4,7); differing: {bad:?}", commands.len()),
    )
}

/// Normal equations solved by Gaussian elimination with partial pivoting.
fn elimination(rows: &[Vec<f64>], y: &[f64]) -> Vec<f64> {
    let p = rows[0].len();
    let mut a = vec![vec![0.0; p + 1]; p];
    for (r, yi) in rows.iter().zip(y) {
        for i in 0..p {
            for j in 0..p {
                a[i][j] += r[i] * r[j];
            }
            a[i][p] += r[i] * yi;
        }
    }
    for c in 0..p {
        let piv = (c..p).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs())).unwrap();
        a.swap(c, piv);
        for i in (c + 1)..p {
            let f = a[i][c] / a[c][c];
            for j in c..=p {
                a[i][j] -= f * a[c][j];
            }
        }
    }
    let mut b = vec![0.0; p];
    for i in (0..p).rev() {
        let s: f64 = ((i + 1)..p).map(|j| a[i][j] * b[j]).sum();
        b[i] = (a[i][p] - s) / a[i][i];
    }
    b
}

fn c9_ols_oracle() -> Outcome {
    let mut rng = RngStream::new(9, 9);
    let mut worst: f64 = 0.0;
    for k in 0..1000usize {
        let p = 1 + k % 3;
        let n = p + 3 + (k * 7) % 40;
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                let mut r = vec![1.0];
                r.extend((1..p).map(|_| rng.draw_normal(0.0, 1.5).unwrap()));
                r
            })
            .collect();
        let y: Vec<f64> = rows
            .iter()
            .map(|r| r.iter().sum::<f64>() * 0.7 + rng.draw_normal(0.0, 1.0).unwrap())
            .collect();
        let fit = fit_ols(&Matrix::from_rows(&rows).unwrap(), &y).unwrap();
        for (a, b) in fit.coefficients.iter().zip(elimination(&rows, &y)) {
            worst = worst.max((a - b).abs());
        }
    }
    check(worst <= 1e-9, format!("1000 designs, max coefficient difference {worst:.2e}"))
}

fn main() {
    let dir = tempfile::tempdir().unwrap();
    let criteria: Vec<(&str, Box<dyn Fn() -> Outcome>)> = vec![
        ("theory oracle exactness", Box::new(c1_theory_exact)),
        ("expected-variance constants", Box::new(c2_expected_variances)),
        ("four-method bias table", Box::new(c3_bias_table)),
        ("missingness grid", Box::new(c4_grid)),
        ("sampling-distribution benchmark", Box::new(c5_sampling)),
        ("applied-example bands", Box::new(|| c6_applied_example(dir.path()))),
        ("covariance equivalence", Box::new(c7_covariance_equivalence)),
        ("determinism", Box::new(|| c8_determinism(dir.path()))),
        ("OLS oracle equivalence", Box::new(c9_ols_oracle)),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let outcome = std::panic::catch_unwind(std::panic::AssertUnwindSafe(f))
            .unwrap_or_else(|_| Err("panicked".into()));
        match outcome {
            Ok(msg) => println!("criterion {}: PASS  {name}: {msg}", i + 1),
            Err(msg) => {
                failed += 1;
                println!("criterion {}: FAIL  {name}: {msg}", i + 1);
            }
        }
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
