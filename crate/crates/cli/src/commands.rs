use std::io::Write;
use std::path::Path;

use mdimpute::io::{format_real, read_dataset_csv, write_dataset_csv, CsvOptions};
use mdimpute::theory::ImputedMoments;
use mdimpute::{
    bootstrap_se, expected_coefficient_variances, fit_complete_case, fit_full_cohort, fit_outcome,
    generate, impute, impute_multiple, mean, pool_rubin, sample_covariance, sample_variance,
    stream_id, theory_quantities, ExpectedCoefficientVariances, ImputationMethod, OutcomeFit,
    RngStream, ScenarioParams, TheoreticalQuantities,
};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{validate_grid, RunConfig, DEFAULT_P_GRID};
use crate::{Cli, CliError, CliResult, Command, SCHEMA_VERSION};

const DEFAULT_SEED: u64 = 1;

/// Flags resolved against the config file.
struct Ctx {
    cfg: RunConfig,
    scenario: ScenarioParams,
    seed: u64,
    n: Option<usize>,
}

impl Ctx {
    fn n_or(&self, default: usize) -> CliResult<usize> {
        match self.n.unwrap_or(default) {
            0 => Err(CliError::config("n must be at least 1")),
            n => Ok(n),
        }
    }

    fn stream(&self, command: &str, cell: u64, rep: u64) -> RngStream {
        RngStream::new(self.seed, stream_id(command, cell, rep))
    }

    fn method(&self, flag: Option<&str>, default: ImputationMethod) -> CliResult<ImputationMethod> {
        Ok(match flag {
            Some(s) => s.parse()?,
            None => self.cfg.method()?.unwrap_or(default),
        })
    }
}

pub(crate) fn dispatch(cli: &Cli) -> CliResult<()> {
    let cfg = match &cli.global.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
            RunConfig::parse(&text)?
        }
        None => RunConfig::default(),
    };
    let ctx = Ctx {
        scenario: cfg.scenario()?,
        seed: cli.global.seed.or(cfg.seed).unwrap_or(DEFAULT_SEED),
        n: cli.global.n.or(cfg.n),
        cfg,
    };
    let out = cli.global.out.as_deref();
    let bytes = match &cli.command {
        Command::Generate { oracle } => cmd_generate(&ctx, *oracle)?,
        Command::Analyze {
            input,
            method,
            m,
            bootstrap,
            na_token,
        } => {
            let opts = na_token.clone().map(CsvOptions::with_na_token).unwrap_or_default();
            let file = std::fs::File::open(input)
                .map_err(|e| CliError::config(format!("{}: {e}", input.display())))?;
            let dataset = read_dataset_csv(std::io::BufReader::new(file), &opts)?;
            let method = ctx.method(method.as_deref(), ImputationMethod::DET)?;
            let m = m.or(ctx.cfg.m);
            let b = bootstrap.or(ctx.cfg.bootstrap);
            cmd_analyze(&ctx, &dataset, method, m, b)?
        }
        Command::Grid => cmd_grid(&ctx)?,
        Command::Sampling {
            method,
            replications,
        } => {
            let method = ctx.method(method.as_deref(), ImputationMethod::DET)?;
            let r = replications.or(ctx.cfg.replications).unwrap_or(1000);
            cmd_sampling(&ctx, method, r)?
        }
        Command::Theory => cmd_theory(&ctx)?,
    };
    emit(out, &bytes)
}

fn emit(out: Option<&Path>, bytes: &[u8]) -> CliResult<()> {
    let res = match out {
        Some(p) => std::fs::write(p, bytes),
        None => std::io::stdout().lock().write_all(bytes),
    };
    res.map_err(|e| CliError::config(format!("writing output: {e}")))
}

fn to_json<T: Serialize>(value: &T) -> CliResult<Vec<u8>> {
    // serde_json writes non-finite floats as null
    let mut v = serde_json::to_vec_pretty(value)
        .map_err(|e| CliError::invariant(format!("serializing report: {e}")))?;
    v.push(b'\n');
    Ok(v)
}

fn cmd_generate(ctx: &Ctx, oracle: bool) -> CliResult<Vec<u8>> {
    let n = ctx.n_or(1000)?;
    let d = generate(&ctx.scenario, n, &mut ctx.stream("generate", 0, 0))?;
    let mut buf = Vec::new();
    write_dataset_csv(&d, &mut buf, oracle)?;
    eprintln!("generated {n} rows ({} missing x)", d.n_missing());
    Ok(buf)
}

#[derive(Serialize)]
struct FitSummary {
    beta0: f64,
    beta1: f64,
    se_model: f64,
    n_used: usize,
}

impl From<&OutcomeFit> for FitSummary {
    fn from(f: &OutcomeFit) -> Self {
        Self {
            beta0: f.beta0_hat,
            beta1: f.beta1_hat,
            se_model: f.se_beta1_model,
            n_used: f.n_used,
        }
    }
}

#[derive(Serialize)]
struct ImputationModelSummary {
    coefficients: Vec<f64>,
    sigma2_hat: f64,
    r_squared: f64,
    df_residual: usize,
}

#[derive(Serialize)]
struct PooledSummary {
    m: usize,
    beta1: f64,
    beta0: f64,
    within: f64,
    between: f64,
    total: f64,
    se: f64,
    /// null when the between-imputation variance is zero
    df: f64,
}

#[derive(Serialize)]
struct BootstrapSummary {
    requested: usize,
    successful: usize,
    skipped: usize,
    se: f64,
}

#[derive(Serialize)]
struct AnalyzeReport {
    schema_version: u32,
    command: &'static str,
    seed: u64,
    method: &'static str,
    n: usize,
    n_missing: usize,
    n_observed: usize,
    imputation_model: ImputationModelSummary,
    fit: FitSummary,
    complete_case: FitSummary,
    multiple_imputation: Option<PooledSummary>,
    bootstrap: Option<BootstrapSummary>,
}

fn cmd_analyze(
    ctx: &Ctx,
    dataset: &mdimpute::Dataset,
    method: ImputationMethod,
    m: Option<usize>,
    b: Option<usize>,
) -> CliResult<Vec<u8>> {
    let mut rng = ctx.stream("analyze", 0, 0);
    let imp = impute(dataset, method, Some(&mut rng))?;
    let fit = fit_outcome(&imp)?;
    let cc = fit_complete_case(dataset)?;
    let model = &imp.imputation_fit;

    let pooled = match m {
        None => None,
        Some(m) => {
            let draws = impute_multiple(dataset, method, m, &ctx.stream("analyze", 1, 0))?;
            let fits = draws.iter().map(fit_outcome).collect::<mdimpute::Result<Vec<_>>>()?;
            let p = pool_rubin(&fits)?;
            Some(PooledSummary {
                m: p.m,
                beta1: p.q_bar,
                beta0: p.beta0_bar,
                within: p.w_bar,
                between: p.b,
                total: p.t,
                se: p.se(),
                df: p.df,
            })
        }
    };
    let boot = match b {
        None => None,
        Some(b) => {
            let r = bootstrap_se(dataset, method, b, &ctx.stream("analyze", 2, 0))?;
            Some(BootstrapSummary {
                requested: r.requested,
                successful: r.b_count,
                skipped: r.skipped,
                se: r.se,
            })
        }
    };

    eprintln!("method {method}: n = {}, missing = {}", dataset.n(), dataset.n_missing());
    eprintln!("  slope {:.4}  model SE {:.4}", fit.beta1_hat, fit.se_beta1_model);
    eprintln!("  complete case {:.4}  SE {:.4}", cc.beta1_hat, cc.se_beta1_model);
    if let Some(p) = &pooled {
        eprintln!("  pooled (m = {}) {:.4}  Rubin SE {:.4}", p.m, p.beta1, p.se);
    }
    if let Some(bs) = &boot {
        eprintln!("  bootstrap SE {:.4} ({} of {} replicates)", bs.se, bs.successful, bs.requested);
    }

    to_json(&AnalyzeReport {
        schema_version: SCHEMA_VERSION,
        command: "analyze",
        seed: ctx.seed,
        method: method.name(),
        n: dataset.n(),
        n_missing: dataset.n_missing(),
        n_observed: dataset.n_observed(),
        imputation_model: ImputationModelSummary {
            coefficients: model.coefficients.clone(),
            sigma2_hat: model.sigma2_hat,
            r_squared: model.r_squared,
            df_residual: model.df_residual,
        },
        fit: (&fit).into(),
        complete_case: (&cc).into(),
        multiple_imputation: pooled,
        bootstrap: boot,
    })
}

/// One row of the grid output.
#[derive(Debug, Clone, PartialEq)]
pub struct GridRow {
    pub p_miss_1: f64,
    pub method: ImputationMethod,
    pub var_ximp: f64,
    pub cov_ximp_y: f64,
    pub beta1: f64,
    pub theory: ImputedMoments,
}

pub const GRID_HEADER: &str =
    "p_miss_1,method,n,seed,var_ximp,cov_ximp_y,beta1,theory_var_ximp,theory_cov_ximp_y,theory_beta1";

fn theory_for(t: &TheoreticalQuantities, method: ImputationMethod) -> ImputedMoments {
    match method {
        ImputationMethod::DET => t.moments.det,
        ImputationMethod::DET_Y => t.moments.det_y,
        ImputationMethod::STOC => t.moments.stoc,
        _ => t.moments.stoc_y,
    }
}

/// Cell `c` generates its dataset from stream (grid, c, 0) and imputes
/// method `k` from stream (grid, c, k + 1).
pub fn grid_rows(scenario: &ScenarioParams, grid: &[f64], n: usize, seed: u64) -> mdimpute::Result<Vec<GridRow>> {
    let cells: Vec<mdimpute::Result<Vec<GridRow>>> = grid
        .par_iter()
        .enumerate()
        .map(|(c, &p)| {
            let params = ScenarioParams {
                p_miss_1: p,
                ..*scenario
            };
            let theory = theory_quantities(&params)?;
            let d = generate(&params, n, &mut RngStream::new(seed, stream_id("grid", c as u64, 0)))?;
            ImputationMethod::ALL
                .iter()
                .enumerate()
                .map(|(k, &method)| {
                    let mut rng = RngStream::new(seed, stream_id("grid", c as u64, k as u64 + 1));
                    let imp = impute(&d, method, Some(&mut rng))?;
                    let var = sample_variance(&imp.x_imp)?;
                    let cov = sample_covariance(&imp.x_imp, d.y())?;
                    Ok(GridRow {
                        p_miss_1: p,
                        method,
                        var_ximp: var,
                        cov_ximp_y: cov,
                        beta1: cov / var,
                        theory: theory_for(&theory, method),
                    })
                })
                .collect()
        })
        .collect();
    Ok(cells.into_iter().collect::<mdimpute::Result<Vec<_>>>()?.concat())
}

fn cmd_grid(ctx: &Ctx) -> CliResult<Vec<u8>> {
    let n = ctx.n_or(1_000_000)?;
    let grid = ctx.cfg.p_grid.clone().unwrap_or_else(|| DEFAULT_P_GRID.to_vec());
    validate_grid(&grid)?;
    let rows = grid_rows(&ctx.scenario, &grid, n, ctx.seed)?;
    let mut out = String::from(GRID_HEADER);
    out.push('\n');
    for r in &rows {
        out.push_str(&format!(
            "{},{},{n},{},{},{},{},{},{},{}\n",
            format_real(r.p_miss_1),
            r.method,
            ctx.seed,
            format_real(r.var_ximp),
            format_real(r.cov_ximp_y),
            format_real(r.beta1),
            format_real(r.theory.var_ximp),
            format_real(r.theory.cov_ximp_y),
            format_real(r.theory.beta1()),
        ));
        eprintln!(
            "p={:.2} {:<6} var {:.4} ({:.4})  cov {:.4} ({:.4})  beta {:.4} ({:.4})",
            r.p_miss_1,
            r.method.name(),
            r.var_ximp,
            r.theory.var_ximp,
            r.cov_ximp_y,
            r.theory.cov_ximp_y,
            r.beta1,
            r.theory.beta1()
        );
    }
    Ok(out.into_bytes())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SlopeSummary {
    pub mean_beta1: f64,
    /// Variance of the slope across replications.
    pub empirical_var: f64,
    /// Average model-based variance.
    pub mean_model_var: f64,
}

impl SlopeSummary {
    fn from_pairs(pairs: impl Iterator<Item = (f64, f64)>) -> mdimpute::Result<Self> {
        let (b, v): (Vec<f64>, Vec<f64>) = pairs.unzip();
        Ok(Self {
            mean_beta1: mean(&b),
            empirical_var: sample_variance(&b)?,
            mean_model_var: mean(&v),
        })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SamplingSummary {
    pub n: usize,
    pub replications: usize,
    pub method: &'static str,
    pub full_cohort: SlopeSummary,
    pub complete_case: SlopeSummary,
    pub imputed: SlopeSummary,
    pub theory_expected_beta1: f64,
    pub theory_variances: ExpectedCoefficientVariances,
}

/// Replicate `r` generates from stream (sampling, 0, r) and imputes from
/// (sampling, 1, r). Reductions run in replicate order.
pub fn sampling_summary(
    scenario: &ScenarioParams,
    method: ImputationMethod,
    n: usize,
    replications: usize,
    seed: u64,
) -> mdimpute::Result<SamplingSummary> {
    let fits: Vec<mdimpute::Result<[OutcomeFit; 3]>> = (0..replications as u64)
        .into_par_iter()
        .map(|r| {
            let d = generate(scenario, n, &mut RngStream::new(seed, stream_id("sampling", 0, r)))?;
            let mut rng = RngStream::new(seed, stream_id("sampling", 1, r));
            let imp = impute(&d, method, Some(&mut rng))?;
            Ok([fit_full_cohort(&d)?, fit_complete_case(&d)?, fit_outcome(&imp)?])
        })
        .collect();
    let fits = fits.into_iter().collect::<mdimpute::Result<Vec<_>>>()?;
    let col = |i: usize| SlopeSummary::from_pairs(fits.iter().map(|f| (f[i].beta1_hat, f[i].var_beta1_model())));
    let t = theory_quantities(scenario)?;
    Ok(SamplingSummary {
        n,
        replications,
        method: method.name(),
        full_cohort: col(0)?,
        complete_case: col(1)?,
        imputed: col(2)?,
        theory_expected_beta1: theory_for(&t, method).beta1(),
        theory_variances: expected_coefficient_variances(scenario, n)?,
    })
}

#[derive(Serialize)]
struct Envelope<'a, T> {
    schema_version: u32,
    command: &'static str,
    seed: u64,
    scenario: &'a ScenarioParams,
    #[serde(flatten)]
    body: T,
}

fn cmd_sampling(ctx: &Ctx, method: ImputationMethod, replications: usize) -> CliResult<Vec<u8>> {
    if replications < 100 {
        return Err(CliError::config(format!(
            "sampling needs at least 100 replications, got {replications}"
        )));
    }
    let n = ctx.n_or(102)?;
    let s = sampling_summary(&ctx.scenario, method, n, replications, ctx.seed)?;
    eprintln!("{replications} replications at n = {n}, method {method}");
    for (name, x) in [("full", s.full_cohort), ("complete", s.complete_case), ("imputed", s.imputed)] {
        eprintln!(
            "  {name:<9} slope {:.4}  sampling var {:.5}  mean model var {:.5}",
            x.mean_beta1, x.empirical_var, x.mean_model_var
        );
    }
    to_json(&Envelope {
        schema_version: SCHEMA_VERSION,
        command: "sampling",
        seed: ctx.seed,
        scenario: &ctx.scenario,
        body: s,
    })
}

#[derive(Serialize)]
struct TheoryBody {
    n: usize,
    quantities: TheoreticalQuantities,
    expected_variances: ExpectedCoefficientVariances,
}

fn cmd_theory(ctx: &Ctx) -> CliResult<Vec<u8>> {
    let t = theory_quantities(&ctx.scenario)?;
    t.check_consistency()
        .map_err(|e| CliError::invariant(format!("theory consistency check failed: {e}")))?;
    let n = ctx.n_or(102)?;
    let v = expected_coefficient_variances(&ctx.scenario, n)?;
    eprintln!("omega            {:.6}", t.omega);
    eprintln!("Pr(R=1)          {:.6}", t.pr_r1);
    eprintln!("E(X|R=0)         {:.6}", t.e_x_given_r0);
    eprintln!("Var(X|R=0)       {:.6}", t.var_x_given_r0);
    eprintln!("Var(X_imp,det)   {:.6}", t.var_x_imp_det);
    eprintln!("Cov(X_imp,det,Y) {:.6}", t.cov_x_imp_det_y);
    let b = t.expected_beta;
    eprintln!(
        "expected slope   det {:.4}  det-y {:.4}  stoc {:.4}  stoc-y {:.4}",
        b.det, b.det_y, b.stoc, b.stoc_y
    );
    eprintln!(
        "slope variance at n = {n}: full {:.5}  model det {:.5}  complete case {:.5}",
        v.full_cohort, v.model_based_det, v.complete_case
    );
    to_json(&Envelope {
        schema_version: SCHEMA_VERSION,
        command: "theory",
        seed: ctx.seed,
        scenario: &ctx.scenario,
        body: TheoryBody {
            n,
            quantities: t,
            expected_variances: v,
        },
    })
}
