use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use adasel::dataio::{
    load_profile, read_catalog, read_feature_stream, read_ground_truth, read_json,
    read_performance_table, read_trace, save_profile, trace_csv, write_catalog,
    write_feature_stream, write_ground_truth, write_performance_table, write_text, write_trace,
    PlatformCatalog,
};
use adasel::harness::{
    emit_report, evaluate_regret, generate_synthetic, ReportFormat, SyntheticConfig,
};
use adasel::profile::{
    scenarios_from_training, Constraints, DesignProfile, ProfileConfig, DEFAULT_SCENARIOS,
    DEFAULT_SUBSPACE_DIM,
};
use adasel::runtime::{run_selection, DEFAULT_WINDOW_LENGTH};
use adasel::Error;
use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

const EXIT_ERROR: u8 = 1;
const EXIT_INFEASIBLE: u8 = 2;

/// Adaptive selection of algorithm/parameter combinations for video analytics.
#[derive(Parser)]
#[command(name = "adasel", version)]
struct Cli {
    /// Seed for clustering and synthetic data.
    #[arg(long, global = true, default_value_t = 42)]
    seed: u64,
    /// Print extra progress information to stderr.
    #[arg(long, short, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a design profile from training features and measured errors.
    Profile(ProfileArgs),
    /// Run window-by-window selection over a feature stream.
    Select(SelectArgs),
    /// Score a selection trace against ground-truth errors.
    Eval(EvalArgs),
    /// Generate a synthetic dataset with known ground truth.
    Synth(SynthArgs),
}

#[derive(Args)]
struct ProfileArgs {
    /// Training feature stream manifest.
    #[arg(long)]
    train: PathBuf,
    /// Performance table (CSV).
    #[arg(long)]
    perf: PathBuf,
    /// Combo and platform catalog (JSON).
    #[arg(long)]
    platforms: PathBuf,
    #[arg(long, default_value_t = DEFAULT_SCENARIOS)]
    scenarios: usize,
    #[arg(long, default_value_t = DEFAULT_SUBSPACE_DIM)]
    subspace_dim: usize,
    #[arg(long)]
    max_error: f64,
    #[arg(long)]
    required_fps: f64,
    #[arg(long)]
    max_cost: f64,
    #[arg(long, default_value_t = DEFAULT_WINDOW_LENGTH)]
    window_length: usize,
    /// Output profile path (JSON plus sibling matrix files).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SelectArgs {
    #[arg(long)]
    profile: PathBuf,
    /// Feature stream manifest to select over.
    #[arg(long)]
    stream: PathBuf,
    /// Platform to select for; defaults to the profile's chosen platform.
    #[arg(long)]
    platform: Option<String>,
    /// Window length; defaults to the profile's.
    #[arg(long)]
    window_length: Option<usize>,
    /// Output trace (JSON lines); a CSV projection is written alongside.
    #[arg(long, default_value = "trace.jsonl")]
    out: PathBuf,
    /// Record zero elapsed times so the trace is byte-stable across runs.
    #[arg(long)]
    no_timing: bool,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    trace: PathBuf,
    /// Ground-truth CSV with per-window, per-combo errors.
    #[arg(long)]
    truth: PathBuf,
    /// Report path; a `.json` extension selects JSON, anything else CSV.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SynthArgs {
    /// Generator configuration (JSON); defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out_dir: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = configure_threads() {
        eprintln!("error: {e:#}");
        return ExitCode::from(EXIT_ERROR);
    }
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            if let Some(Error::NoFeasiblePlatform { diagnostics }) = e.downcast_ref::<Error>() {
                eprintln!("error: no platform satisfies the constraints");
                eprintln!(
                    "{:<20} {:>10} {:>8} {:>16}",
                    "platform", "cost", "in-cost", "best-mean-error"
                );
                for d in diagnostics {
                    let best = d
                        .best_mean_error
                        .map_or("-".to_string(), |v| format!("{v:.4}"));
                    eprintln!(
                        "{:<20} {:>10.3} {:>8} {:>16}",
                        d.platform_id, d.cost, d.within_cost, best
                    );
                }
                return ExitCode::from(EXIT_INFEASIBLE);
            }
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_ERROR)
        }
    }
}

fn configure_threads() -> Result<()> {
    let Ok(value) = std::env::var("ADASEL_THREADS") else {
        return Ok(());
    };
    let threads = value
        .parse::<usize>()
        .ok()
        .filter(|&n| n > 0)
        .with_context(|| format!("ADASEL_THREADS must be a positive integer, got {value:?}"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .context("configuring the thread pool")?;
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Profile(args) => profile(args, cli.seed, cli.verbose),
        Command::Select(args) => select(args, cli.verbose),
        Command::Eval(args) => eval(args),
        Command::Synth(args) => synth(args, cli.seed),
    }
}

fn profile(args: &ProfileArgs, seed: u64, verbose: bool) -> Result<()> {
    let train = read_feature_stream(&args.train)
        .with_context(|| format!("reading training stream {}", args.train.display()))?;
    let performance = read_performance_table(&args.perf)?;
    let catalog = read_catalog(&args.platforms)?;
    if verbose {
        eprintln!(
            "clustering {} frames of dimension {} into {} scenarios",
            train.frames.len(),
            train.manifest.feature_dim,
            args.scenarios
        );
    }
    let scenarios = scenarios_from_training(
        &train.frames,
        train.manifest.labels.as_deref(),
        args.scenarios,
        args.subspace_dim,
        seed,
    )?;
    let config = ProfileConfig {
        feature_dim: train.manifest.feature_dim,
        subspace_dim: args.subspace_dim,
        scenario_count: args.scenarios,
        window_length: args.window_length,
        clustering_seed: seed,
        constraints: Constraints {
            max_mean_error: args.max_error,
            required_fps: args.required_fps,
            max_cost: args.max_cost,
        },
    };
    let profile = DesignProfile::build(
        config,
        catalog.combos,
        catalog.platforms,
        performance,
        scenarios,
    )?;
    save_profile(&args.out, &profile)?;
    println!("selected platform: {}", profile.selected_platform);
    for s in &profile.scenarios {
        let label = s
            .labels
            .get(&profile.selected_platform)
            .map_or("-", String::as_str);
        println!("{}: {} ({} frames)", s.scenario_id, label, s.member_count);
    }
    Ok(())
}

fn select(args: &SelectArgs, verbose: bool) -> Result<()> {
    let profile = load_profile(&args.profile)
        .with_context(|| format!("loading profile {}", args.profile.display()))?;
    let stream = read_feature_stream(&args.stream)
        .with_context(|| format!("reading stream {}", args.stream.display()))?;
    let platform = args
        .platform
        .clone()
        .unwrap_or_else(|| profile.selected_platform.clone());
    let window_length = args.window_length.unwrap_or(profile.config.window_length);
    let mut trace = run_selection(&stream.frames, &profile, &platform, window_length)?;
    if args.no_timing {
        trace.elapsed_ms.iter_mut().for_each(|t| *t = 0.0);
    }
    write_trace(&args.out, &trace)?;
    write_text(&args.out.with_extension("csv"), &trace_csv(&trace))?;
    if verbose {
        let total: f64 = trace.elapsed_ms.iter().sum();
        eprintln!("{} windows in {total:.1} ms", trace.decisions.len());
    }
    println!("windows: {}", trace.decisions.len());
    println!("switches: {}", trace.switch_count());
    println!("mean similarity: {:.6e}", trace.mean_similarity());
    Ok(())
}

fn eval(args: &EvalArgs) -> Result<()> {
    let trace = read_trace(&args.trace)?;
    let truth = read_ground_truth(&args.truth)?;
    let report = evaluate_regret(&trace, &truth)?;
    let format = match args.out.extension().and_then(|e| e.to_str()) {
        Some("json") => ReportFormat::Json,
        _ => ReportFormat::Csv,
    };
    write_text(&args.out, &emit_report(&report, format)?)?;
    println!("selected error: {}", report.totals.selected_sum);
    println!("oracle error: {}", report.totals.oracle_sum);
    if let (Some(combo), Some(sum)) = (&report.totals.best_static_combo, report.best_static_sum()) {
        println!("best static ({combo}): {sum}");
    }
    println!("regret: {}", report.regret());
    println!("switches: {}", report.switch_count);
    if let Some(acc) = report.scenario_match_accuracy {
        println!("scenario match accuracy: {acc:.4}");
    }
    Ok(())
}

fn synth(args: &SynthArgs, seed: u64) -> Result<()> {
    let mut config = match &args.config {
        Some(path) => read_json::<SyntheticConfig>(path)
            .with_context(|| format!("reading synthetic config {}", path.display()))?,
        None => SyntheticConfig::default(),
    };
    config.seed.get_or_insert(seed);
    let data = generate_synthetic(&config)?;
    fs::create_dir_all(&args.out_dir)
        .with_context(|| format!("creating {}", args.out_dir.display()))?;
    let dir: &Path = &args.out_dir;
    let mut metadata = BTreeMap::new();
    metadata.insert("seed".to_string(), config.seed.unwrap_or(seed).to_string());
    write_feature_stream(
        dir.join("train.json"),
        &data.training_frames,
        Some(data.training_labels.clone()),
        "synthetic",
        metadata.clone(),
    )?;
    write_feature_stream(
        dir.join("test.json"),
        &data.test_frames,
        Some(data.test_labels.clone()),
        "synthetic",
        metadata,
    )?;
    write_ground_truth(dir.join("truth.csv"), &data.truth)?;
    write_performance_table(dir.join("performance.csv"), &data.performance)?;
    write_catalog(
        dir.join("platforms.json"),
        &PlatformCatalog {
            combos: data.combos,
            platforms: data.platforms,
        },
    )?;
    println!(
        "wrote {} training and {} test frames to {}",
        data.training_frames.len(),
        data.test_frames.len(),
        dir.display()
    );
    Ok(())
}
