use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use calrisk::io::{load_dataset, write_probs_csv, InputFormat};
use calrisk::pipeline::FamilyKind;
use calrisk::report::{run_evaluate, RunConfig, Target};
use calrisk::sim::{curve_summary, simulate, SimConfig, SimDataset, DEFAULT_THETAS};
use calrisk::{Dataset, Error, RiskKind};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "calrisk", version, about = "Estimate squared calibration errors and rank the estimators by risk")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Risk curves of the h_sim family over repeated simulations.
    Simulate(SimulateArgs),
    /// Split, cross-validate and estimate the calibration error of a dataset.
    Evaluate(EvaluateArgs),
    /// Cross-validated held-out risk of one family across a grid.
    RiskCurve(RiskCurveArgs),
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long, default_value_t = 500)]
    n: usize,
    #[arg(long, default_value_t = 5)]
    d: usize,
    #[arg(long, default_value_t = 0.04)]
    alpha: f64,
    #[arg(long, default_value_t = 0.3)]
    model_temp: f64,
    /// Number of repetitions; seeds run from --seed upwards.
    #[arg(long, default_value_t = 100)]
    seeds: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_delimiter = ',')]
    theta_grid: Option<Vec<f64>>,
    /// Curve CSV; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write the first simulated dataset as a probabilities CSV.
    #[arg(long)]
    emit_data: Option<PathBuf>,
}

#[derive(Args)]
struct DataArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value = "logits-csv")]
    format: String,
    #[arg(long, default_value = "tce")]
    mode: String,
    #[arg(long, default_value_t = 0.2)]
    test_fraction: f64,
    #[arg(long, default_value_t = 5)]
    k: usize,
    #[arg(long, default_value_t = 0.5)]
    gamma: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Temperature assumed by the sim family.
    #[arg(long, default_value_t = 0.3)]
    model_temp: f64,
    /// Use the linear-complexity held-out risk.
    #[arg(long)]
    linear_risk: bool,
}

#[derive(Args)]
struct EvaluateArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, value_delimiter = ',', default_value = "bin15")]
    families: Vec<String>,
    /// Grid override as `family=v1,v2,...`; repeatable.
    #[arg(long = "grid")]
    grids: Vec<String>,
    /// JSON report; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Per (family, hyperparameter, fold) held-out risks.
    #[arg(long)]
    emit_csv: Option<PathBuf>,
}

#[derive(Args)]
struct RiskCurveArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    family: String,
    #[arg(long, value_delimiter = ',')]
    grid: Option<Vec<f64>>,
    /// Curve CSV; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(a) => run_simulate(a),
        Command::Evaluate(a) => run_evaluate_cmd(a),
        Command::RiskCurve(a) => run_risk_curve(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("calrisk: {e}");
            ExitCode::from(if e.is_input() { 2 } else { 3 })
        }
    }
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>, Error> {
    Ok(match path {
        Some(p) => Box::new(File::create(p)?),
        None => Box::new(io::stdout().lock()),
    })
}

fn run_simulate(a: SimulateArgs) -> Result<(), Error> {
    let cfg = SimConfig { n: a.n, d: a.d, alpha: a.alpha, model_temp: a.model_temp, seed: a.seed };
    let thetas = a.theta_grid.unwrap_or_else(|| DEFAULT_THETAS.to_vec());
    if let Some(path) = &a.emit_data {
        let sim: SimDataset = simulate(&cfg)?;
        write_probs_csv(&sim.dataset, File::create(path)?)?;
    }
    let summary = curve_summary(&cfg, a.seeds, &thetas)?;
    let mut w = output(a.out.as_deref())?;
    writeln!(w, "theta,mean_risk,sd,se,argmin_count")?;
    for k in 0..thetas.len() {
        writeln!(
            w,
            "{},{},{},{},{}",
            summary.thetas[k], summary.mean[k], summary.sd[k], summary.se[k], summary.argmin_counts[k]
        )?;
    }
    w.flush()?;
    Ok(())
}

fn load(a: &DataArgs) -> Result<Dataset, Error> {
    load_dataset(&a.data, InputFormat::parse(&a.format)?)
}

fn run_config(a: &DataArgs, families: Vec<FamilyKind>) -> Result<RunConfig, Error> {
    Ok(RunConfig {
        mode: Target::parse(&a.mode)?,
        families,
        test_fraction: a.test_fraction,
        k_folds: a.k,
        gamma: a.gamma,
        seed: a.seed,
        risk: if a.linear_risk { RiskKind::Linear { seed: a.seed } } else { RiskKind::Quadratic },
        model_temp: a.model_temp,
        grids: BTreeMap::new(),
    })
}

fn parse_values(list: &str) -> Result<Vec<f64>, Error> {
    list.split(',')
        .map(|v| v.trim().parse::<f64>().map_err(|_| Error::Input(format!("grid value `{v}` is not a number"))))
        .collect()
}

fn run_evaluate_cmd(a: EvaluateArgs) -> Result<(), Error> {
    let families = a.families.iter().map(|f| FamilyKind::parse(f)).collect::<Result<Vec<_>, _>>()?;
    let mut cfg = run_config(&a.data, families)?;
    for spec in &a.grids {
        let (name, values) =
            spec.split_once('=').ok_or_else(|| Error::Input(format!("grid `{spec}` is not family=v1,v2,...")))?;
        cfg.grids.insert(FamilyKind::parse(name)?, parse_values(values)?);
    }
    cfg.validate()?;
    let ds = load(&a.data)?;
    let report = run_evaluate(&cfg, &ds)?;
    let mut w = output(a.out.as_deref())?;
    writeln!(w, "{}", report.to_json())?;
    w.flush()?;
    if let Some(path) = &a.emit_csv {
        report.write_csv(File::create(path)?)?;
    }
    Ok(())
}

fn run_risk_curve(a: RiskCurveArgs) -> Result<(), Error> {
    let family = FamilyKind::parse(&a.family)?;
    let mut cfg = run_config(&a.data, vec![family])?;
    if let Some(grid) = a.grid {
        cfg.grids.insert(family, grid);
    }
    cfg.validate()?;
    let ds = load(&a.data)?;
    let report = run_evaluate(&cfg, &ds)?;
    let fam = &report.families[0];
    let mut w = output(a.out.as_deref())?;
    writeln!(w, "hyper,mean_risk,risk_se,sqrt_risk_x100,sqrt_risk_x100_se")?;
    for g in &fam.grid {
        let v = &g.validation;
        writeln!(w, "{},{},{},{},{}", g.hyper, v.risk, v.risk_se, v.sqrt_risk_x100, v.sqrt_risk_x100_se)?;
    }
    w.flush()?;
    for s in &fam.skipped {
        eprintln!("calrisk: skipped {} = {}: {}", fam.family.name(), s.hyper, s.reason);
    }
    Ok(())
}
