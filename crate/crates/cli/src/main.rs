use clap::{Args, Parser, Subcommand};
use megae::experiment::{
    certify, load_manifest, run_experiment, sweep, synthesize, write_dataset, Certificates, DataError, Dataset,
    ExperimentConfig, ExperimentError, RunReport, SyntheticSpec, METHOD_MEGAE,
};
use megae::frame::{build_frame, FilterBank, FilterConfig, FrameSpec};
use megae::graph::Mechanism;
use megae::model::{save_checkpoint, Checkpoint, TrainConfig};
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "megae", version, about = "Graph feature imputation with spectral wavelet autoencoders")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a seeded synthetic multi-graph dataset and its manifest.
    Synthesize(SynthArgs),
    /// Train and evaluate on a dataset over several trials, with baselines.
    Impute(ImputeArgs),
    /// One experiment per (channels, gamma) grid point.
    Sweep(SweepArgs),
    /// Oracle checks of the frame and fitted filters.
    Certify(CertifyArgs),
    /// Summarize a finished run directory.
    Report(ReportArgs),
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 200)]
    graphs: usize,
    #[arg(long, default_value_t = 10)]
    min_nodes: usize,
    #[arg(long, default_value_t = 60)]
    max_nodes: usize,
    #[arg(long, default_value_t = 8)]
    features: usize,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long, default_value = "mcar")]
    mechanism: Mechanism,
    #[arg(long, default_value_t = 0.1)]
    rate: f64,
    #[arg(long, default_value_t = 5)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Polynomial order K of every filter.
    #[arg(long, default_value_t = 24)]
    order: usize,
    #[arg(long, default_value_t = 500)]
    epochs: usize,
    #[arg(long, default_value_t = 1e-3)]
    lr: f64,
    #[arg(long)]
    out: PathBuf,
    /// Also train every trial with the entropy term switched off.
    #[arg(long)]
    ablation_no_entropy: bool,
}

#[derive(Args)]
struct ImputeArgs {
    #[command(flatten)]
    run: RunArgs,
    #[arg(long, default_value_t = 9)]
    channels: usize,
    #[arg(long, default_value_t = 1.0)]
    gamma: f64,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Comma-separated channel counts.
    #[arg(long, value_delimiter = ',', default_value = "3,6,9,14,20")]
    channels: Vec<usize>,
    /// Comma-separated entropy weights.
    #[arg(long, value_delimiter = ',', default_value = "1")]
    gamma: Vec<f64>,
}

#[derive(Args)]
struct CertifyArgs {
    /// Certify on these graphs instead of a synthetic sample.
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long, default_value_t = 9)]
    channels: usize,
    #[arg(long, default_value_t = 24)]
    order: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    /// Run directory holding report.json.
    #[arg(long)]
    out: PathBuf,
}

fn io_error(path: &Path, source: std::io::Error) -> ExperimentError {
    ExperimentError::Data(DataError::Io { path: path.to_path_buf(), source })
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), ExperimentError> {
    fs::write(path, contents).map_err(|e| io_error(path, e))
}

fn create_dir(dir: &Path) -> Result<(), ExperimentError> {
    fs::create_dir_all(dir).map_err(|e| io_error(dir, e))
}

fn to_json<T: serde::Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("serializable")
}

fn experiment_config(run: &RunArgs, channels: usize, gamma: f64) -> ExperimentConfig {
    ExperimentConfig {
        frame: FrameSpec::with_channels(channels),
        filters: FilterConfig { order: run.order, ..FilterConfig::default() },
        train: TrainConfig {
            gamma,
            epochs: run.epochs,
            learning_rate: run.lr,
            seed: run.seed,
            mask_mechanism: run.mechanism,
            mask_rate: run.rate,
            ..TrainConfig::default()
        },
        mechanism: run.mechanism,
        rate: run.rate,
        trials: run.trials,
        seed: run.seed,
        ablation: run.ablation_no_entropy,
        ..ExperimentConfig::default()
    }
}

fn load(manifest: &Path) -> Result<Dataset, ExperimentError> {
    let data = load_manifest(manifest)?;
    log::info!("loaded {} graphs with {} features", data.len(), data.d_features());
    Ok(data)
}

fn cmd_synthesize(a: &SynthArgs) -> Result<(), ExperimentError> {
    let spec = SyntheticSpec {
        graphs: a.graphs,
        min_nodes: a.min_nodes,
        max_nodes: a.max_nodes,
        d_features: a.features,
        seed: a.seed,
        ..SyntheticSpec::default()
    };
    let data = synthesize(&spec).map_err(ExperimentError::Config)?;
    create_dir(&a.out)?;
    let manifest = write_dataset(&a.out, &data)?;
    write(&a.out.join("synthetic.json"), to_json(&spec))?;
    println!("{}", manifest.display());
    Ok(())
}

fn write_run(dir: &Path, out: &megae::experiment::RunOutput) -> Result<(), ExperimentError> {
    create_dir(dir)?;
    write(&dir.join("report.json"), out.report.to_json())?;
    write(&dir.join("timings.json"), to_json(&out.timings))?;
    write(&dir.join("rmse.csv"), out.report.rmse_csv())?;
    write(&dir.join("traces.csv"), out.report.traces_csv())?;
    write(&dir.join("filters.json"), to_json(&out.filters))?;
    if let Some(params) = &out.params {
        let ckpt = Checkpoint {
            frame: out.report.config.frame.clone(),
            filters: out.report.config.filters.clone(),
            train: out.report.config.train.clone(),
            params: params.clone(),
        };
        let path = dir.join("model.ckpt");
        save_checkpoint(&path, &ckpt).map_err(ExperimentError::Model)?;
    }
    Ok(())
}

fn print_summary(report: &RunReport) {
    println!("{:<18} {:>10} {:>10} {:>7} {:>12}", "method", "rmse", "std", "trials", "entropy_chg");
    for (m, s) in &report.summary {
        let chg = s.mean_entropy_change.map(|c| format!("{c:+.4}")).unwrap_or_else(|| "-".into());
        println!("{m:<18} {:>10.5} {:>10.5} {:>7} {chg:>12}", s.mean_rmse, s.std_rmse, s.completed_trials);
    }
    let c = &report.certificates;
    println!(
        "certificates: {} ({} graphs, entropy violations {}, fitted energy gap {:.3e})",
        if c.passed { "pass" } else { "FAIL" },
        c.graphs,
        c.entropy_violations,
        c.parseval_fitted
    );
}

/// Every trial's model failed numerically.
fn all_diverged(report: &RunReport) -> bool {
    report.failed_trials(METHOD_MEGAE) == report.trials.len()
}

fn cmd_impute(a: &ImputeArgs) -> Result<ExitCode, ExperimentError> {
    let cfg = experiment_config(&a.run, a.channels, a.gamma);
    cfg.validate()?;
    let data = load(&a.run.manifest)?;
    let out = run_experiment(&data, &cfg)?;
    write_run(&a.run.out, &out)?;
    print_summary(&out.report);
    if all_diverged(&out.report) {
        log::error!("training diverged in every trial");
        return Ok(ExitCode::from(4));
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_sweep(a: &SweepArgs) -> Result<ExitCode, ExperimentError> {
    let base = experiment_config(&a.run, a.channels.first().copied().unwrap_or(9), 1.0);
    base.validate()?;
    let data = load(&a.run.manifest)?;
    let result = sweep(&data, &base, &a.channels, &a.gamma)?;
    create_dir(&a.run.out)?;
    for (p, report) in result.points.iter().zip(&result.reports) {
        if let Some(r) = report {
            write(&a.run.out.join(format!("report_m{}_g{}.json", p.channels, p.gamma)), r.to_json())?;
        }
    }
    write(&a.run.out.join("sweep.csv"), result.summary_csv())?;
    print!("{}", result.summary_csv());
    if result.points.iter().all(|p| p.mean_rmse.is_none()) {
        return Ok(ExitCode::from(4));
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_certify(a: &CertifyArgs) -> Result<ExitCode, ExperimentError> {
    let spec = FrameSpec::with_channels(a.channels);
    let filters = FilterBank::fit(&build_frame(&spec)?, &FilterConfig { order: a.order, ..FilterConfig::default() })?;
    let data = match &a.manifest {
        Some(m) => load(m)?,
        None => synthesize(&SyntheticSpec {
            graphs: 20,
            max_nodes: 64,
            d_features: 1,
            seed: a.seed,
            ..SyntheticSpec::default()
        })
        .map_err(ExperimentError::Config)?,
    };
    let c: Certificates = certify(&data, &spec, &filters, 20)?;
    let json = to_json(&c);
    if let Some(dir) = &a.out {
        create_dir(dir)?;
        write(&dir.join("certificates.json"), &json)?;
    }
    println!("{json}");
    Ok(if c.passed { ExitCode::SUCCESS } else { ExitCode::from(4) })
}

fn cmd_report(a: &ReportArgs) -> Result<ExitCode, ExperimentError> {
    let path = a.out.join("report.json");
    let text = fs::read_to_string(&path).map_err(|e| io_error(&path, e))?;
    let report: RunReport = serde_json::from_str(&text).map_err(|e| {
        ExperimentError::Data(DataError::Parse { path: path.clone(), line: e.line(), message: e.to_string() })
    })?;
    println!(
        "{} graphs ({} setting), {} trials, M = {}, gamma = {}",
        report.dataset.graphs,
        report.setting,
        report.trials.len(),
        report.config.frame.channels,
        report.config.train.gamma
    );
    print_summary(&report);
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Synthesize(a) => cmd_synthesize(a).map(|_| ExitCode::SUCCESS),
        Command::Impute(a) => cmd_impute(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Certify(a) => cmd_certify(a),
        Command::Report(a) => cmd_report(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
