use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fracwave::stepper::KernelMode;
use fracwave::{KeepPolicy, SchemeKind};
use fracwave_harness::config::parse_list;
use fracwave_harness::soe_cert::reports_to_csv;
use fracwave_harness::{
    certify_soe, output, run_adaptive_experiment, run_convergence_study, run_property_suite,
    ExperimentConfig, GammaSpec, HarnessError, MeshFamily, PropertyConfig, StudyConfig,
};
use serde_json::json;

#[derive(Parser)]
#[command(
    name = "fracwave",
    version,
    about = "Time-fractional diffusion-wave experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Temporal convergence table on a manufactured solution.
    Converge(ConvergeArgs),
    /// Adaptive run of the two-bump damped wave problem.
    Adaptive(AdaptiveArgs),
    /// Kernel property suite; exits with status 1 on any failure.
    Properties(PropertyArgs),
    /// Sum-of-exponentials certification.
    SoeCert(SoeArgs),
}

#[derive(Args)]
struct ConvergeArgs {
    /// JSON study configuration; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    problem: Option<String>,
    /// Comma separated orders in (1, 2).
    #[arg(long)]
    alpha: Option<String>,
    /// Comma separated gradings: numbers, `opt`, `9/8*opt`.
    #[arg(long)]
    gamma: Option<String>,
    #[arg(long)]
    scheme: Option<SchemeKind>,
    #[arg(long)]
    kernels: Option<KernelMode>,
    /// Comma separated step counts, each double the previous.
    #[arg(long = "N")]
    n: Option<String>,
    /// Spatial cells per direction.
    #[arg(long = "M")]
    m: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// `two-part` (graded start, random tail) or `graded`.
    #[arg(long)]
    mesh: Option<MeshFamily>,
    #[arg(long)]
    horizon: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct AdaptiveArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    alpha: Option<f64>,
    /// Final time.
    #[arg(long = "T")]
    horizon: Option<f64>,
    #[arg(long = "M")]
    m: Option<usize>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    kernels: Option<KernelMode>,
    /// `u2`, `u1` or `independent`.
    #[arg(long)]
    keep: Option<KeepPolicy>,
    /// Start-up grading; defaults to 4/alpha.
    #[arg(long)]
    gamma: Option<f64>,
    /// Comma separated snapshot times.
    #[arg(long)]
    snapshots: Option<String>,
    /// Also search for the coarsest matching uniform tail.
    #[arg(long)]
    compare_uniform: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PropertyArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Skip the consistency scans.
    #[arg(long)]
    no_scans: bool,
    /// Negate kernel coefficient `n,j` of the first L1 table.
    #[arg(long)]
    inject_sign_flip: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SoeArgs {
    /// Comma separated exponents in (0, 1).
    #[arg(long, default_value = "0.55,0.75,0.95")]
    beta: String,
    #[arg(long, default_value_t = 1e-3)]
    dt: f64,
    #[arg(long = "T", default_value_t = 10.0)]
    horizon: f64,
    #[arg(long, default_value_t = 1e-12)]
    tol: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn read_json<T: serde::de::DeserializeOwned + Default>(
    path: &Option<PathBuf>,
) -> Result<T, HarnessError> {
    match path {
        Some(p) => Ok(serde_json::from_str(&std::fs::read_to_string(p)?)?),
        None => Ok(T::default()),
    }
}

fn converge(a: ConvergeArgs) -> Result<bool, HarnessError> {
    let mut cfg = match &a.config {
        Some(p) => StudyConfig::from_json_file(p)?,
        None => StudyConfig::new("example1-grid", vec![1.5], SchemeKind::L1),
    };
    if let Some(v) = a.problem {
        cfg.problem = v;
    }
    if let Some(v) = a.alpha {
        cfg.alphas = parse_list(&v)?;
    }
    if let Some(v) = a.gamma {
        cfg.gammas = parse_list::<GammaSpec>(&v)?;
    }
    if let Some(v) = a.scheme {
        cfg.scheme = v;
    }
    if let Some(v) = a.kernels {
        cfg.kernels = v;
    }
    if let Some(v) = a.n {
        cfg.ns = parse_list(&v)?;
    }
    if let Some(v) = a.m {
        cfg.m = v;
    }
    if let Some(v) = a.seed {
        cfg.seed = v;
    }
    if let Some(v) = a.mesh {
        cfg.mesh = v;
    }
    if a.horizon.is_some() {
        cfg.horizon = a.horizon;
    }
    if a.out.is_some() {
        cfg.out = a.out;
    }
    let report = run_convergence_study(&cfg)?;
    print!("{}", report.table());
    println!("runtime {:.1} s", report.runtime_s);
    if let Some(dir) = &cfg.out {
        report.write(dir, "convergence")?;
        println!("wrote {}", dir.display());
    }
    Ok(report.failures.is_empty())
}

fn adaptive(a: AdaptiveArgs) -> Result<bool, HarnessError> {
    let mut cfg: ExperimentConfig = read_json(&a.config)?;
    if let Some(v) = a.alpha {
        cfg.alpha = v;
    }
    if let Some(v) = a.horizon {
        cfg.horizon = v;
    }
    if let Some(v) = a.m {
        cfg.m = v;
    }
    if let Some(v) = a.tol {
        cfg.tol = v;
    }
    if let Some(v) = a.kernels {
        cfg.kernels = v;
    }
    if let Some(v) = a.keep {
        cfg.keep = v;
    }
    if a.gamma.is_some() {
        cfg.warmup_gamma = a.gamma;
    }
    if let Some(v) = a.snapshots {
        cfg.snapshots = parse_list(&v)?;
    }
    cfg.compare_uniform |= a.compare_uniform;
    let exp = run_adaptive_experiment(&cfg)?;
    println!(
        "alpha = {}, T = {}: {} accepted adaptive steps after the start-up, {} rejections, {:.1} s",
        cfg.alpha,
        cfg.horizon,
        exp.adaptive_steps(),
        exp.run.record.rejections,
        exp.runtime_s
    );
    if let Some(cmp) = &exp.comparison {
        for att in &cmp.attempts {
            println!(
                "uniform tail {:>6} steps: relative max-norm deviation {:.3e} ({})",
                att.steps,
                att.deviation,
                if att.agrees { "agrees" } else { "differs" }
            );
        }
    }
    if let Some(dir) = &a.out {
        exp.write(dir)?;
        println!("wrote {}", dir.display());
    }
    Ok(true)
}

fn properties(a: PropertyArgs) -> Result<bool, HarnessError> {
    let mut cfg: PropertyConfig = read_json(&a.config)?;
    if let Some(v) = a.seed {
        cfg.seed = v;
    }
    if a.no_scans {
        cfg.scans = false;
    }
    if let Some(v) = a.inject_sign_flip {
        let idx: Vec<usize> = parse_list(&v)?;
        match idx[..] {
            [n, j] => cfg.inject_sign_flip = Some((n, j)),
            _ => return Err(HarnessError::Config("--inject-sign-flip takes n,j".into())),
        }
    }
    let report = run_property_suite(&cfg)?;
    for (name, ok, total) in report.summary() {
        println!("{name}: {ok}/{total}");
    }
    for r in &report.soe {
        println!(
            "soe beta={}: {} modes, error {:?} ({})",
            r.beta,
            r.modes.unwrap_or(0),
            r.dense_error,
            if r.passed { "ok" } else { "failed" }
        );
    }
    for s in &report.scans {
        println!(
            "scan {:<13} {:<9} beta={:<4} sigma={:<4} gamma={:<6.3} rate {:.3} predicted {:.3}",
            s.kind.name(),
            s.scheme.name(),
            s.beta,
            s.sigma,
            s.gamma,
            s.rate,
            s.predicted
        );
    }
    let failures = report.failures();
    for f in &failures {
        println!("FAILED {f}");
    }
    if let Some(dir) = &a.out {
        report.write(dir)?;
        println!("wrote {}", dir.display());
    }
    Ok(failures.is_empty())
}

fn soe_cert(a: SoeArgs) -> Result<bool, HarnessError> {
    let betas: Vec<f64> = parse_list(&a.beta)?;
    let reports: Vec<_> = betas
        .iter()
        .map(|&b| certify_soe(b, a.dt, a.horizon, a.tol))
        .collect();
    for r in &reports {
        println!(
            "beta={}: modes {:?}, certified {:?}, dense sweep {:?}: {}",
            r.beta,
            r.modes,
            r.certified_error,
            r.dense_error,
            r.message.clone().unwrap_or_else(|| if r.passed {
                "ok".into()
            } else {
                "failed".into()
            })
        );
    }
    if let Some(dir) = &a.out {
        output::write_csv_with_manifest(
            dir,
            "soe_certification",
            &reports_to_csv(&reports)?,
            "soe-certification",
            json!({ "beta": betas, "dt": a.dt, "horizon": a.horizon, "tol": a.tol }),
            json!({}),
        )?;
    }
    Ok(reports.iter().all(|r| r.passed))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Converge(a) => converge(a),
        Command::Adaptive(a) => adaptive(a),
        Command::Properties(a) => properties(a),
        Command::SoeCert(a) => soe_cert(a),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
