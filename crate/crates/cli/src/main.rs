use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use immunoscan::baseline::{correlation_baseline, BaselineBasis};
use immunoscan::detector::GrowthBasis;
use immunoscan::panel::sha256_hex;
use immunoscan::report::{detector_snapshot, run_pipeline, InputEcho};
use immunoscan::synth::{synth_panel, SynthSpec};
use immunoscan::trials::PreparedInput;
use immunoscan::{
    parse_panel_csv, prepare, MaskMode, NormalizationScope, SimilarityMeasure, TrialConfig, UMode, UScope,
};

#[derive(Parser, Debug)]
#[command(name = "immunoscan", version, about = "Negative-selection outlier screening for entity panels")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the trials and write a JSON report plus one rank CSV per measure.
    Run(RunArgs),
    /// Print the detector ranges and mask at zero uncertainty.
    Detect(DetectArgs),
    /// Generate a synthetic panel with one planted outlier.
    Synth(SynthArgs),
    /// Correlate each nonself entity with the self.
    Baseline(BaselineArgs),
}

#[derive(Args, Debug)]
struct InputArgs {
    /// Long-format panel CSV (entity,year,feature,value).
    #[arg(long)]
    panel: PathBuf,
    /// Entity used as the self.
    #[arg(long = "self")]
    self_entity: String,
    #[arg(long, value_enum, default_value_t = NormScope::PerEntity)]
    norm_scope: NormScope,
}

#[derive(Args, Debug)]
struct DetectorArgs {
    /// Span multiplier on the self's standard deviation.
    #[arg(long, default_value_t = 0.45, allow_negative_numbers = true, value_parser = parse_span)]
    n: f64,
    #[arg(long, value_enum, default_value_t = Basis::Normalized)]
    growth_basis: Basis,
}

#[derive(Args, Debug)]
struct RunArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    detector: DetectorArgs,
    #[arg(long, default_value_t = 1000, value_parser = clap::value_parser!(u64).range(1..))]
    trials: u64,
    #[arg(long, env = "IMMUNOSCAN_SEED", default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = UModeArg::Uniform)]
    u_mode: UModeArg,
    #[arg(long, value_enum, default_value_t = UScopeArg::PerFeature)]
    u_scope: UScopeArg,
    #[arg(long, value_enum, default_value_t = MeasureArg::Both)]
    measure: MeasureArg,
    #[arg(long, value_enum, default_value_t = MaskModeArg::ZeroInclude)]
    mask_mode: MaskModeArg,
    #[arg(long, value_enum, default_value_t = Basis::Normalized)]
    baseline_basis: Basis,
    /// Worker threads; defaults to all cores.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    workers: Option<u64>,
    /// Report path; rank CSVs go to the same directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct DetectArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    detector: DetectorArgs,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SynthArgs {
    #[arg(long, default_value_t = 8, value_parser = clap::value_parser!(u64).range(2..))]
    entities: u64,
    #[arg(long, default_value_t = 18, value_parser = clap::value_parser!(u64).range(1..))]
    features: u64,
    #[arg(long, default_value_t = 4, value_parser = clap::value_parser!(u64).range(2..))]
    years: u64,
    #[arg(long, default_value_t = 2005)]
    first_year: i32,
    #[arg(long, default_value = "SELF")]
    self_name: String,
    #[arg(long, default_value = "TGT")]
    outlier: String,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct BaselineArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long, value_enum, default_value_t = Basis::Normalized)]
    basis: Basis,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum NormScope {
    PerEntity,
    Global,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum Basis {
    Normalized,
    Raw,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum UModeArg {
    Uniform,
    Ternary,
    Zero,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum UScopeArg {
    PerFeature,
    Global,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum MeasureArg {
    Euclidean,
    Cosine,
    Both,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum MaskModeArg {
    ZeroInclude,
    Exclude,
}

fn parse_span(s: &str) -> std::result::Result<f64, String> {
    let n: f64 = s.parse().map_err(|_| format!("`{s}` is not a number"))?;
    if !n.is_finite() || n < 0.0 {
        return Err(format!("must be a finite number >= 0, got {s}"));
    }
    Ok(n)
}

impl From<NormScope> for NormalizationScope {
    fn from(s: NormScope) -> Self {
        match s {
            NormScope::PerEntity => NormalizationScope::PerEntity,
            NormScope::Global => NormalizationScope::Global,
        }
    }
}

impl From<Basis> for GrowthBasis {
    fn from(b: Basis) -> Self {
        match b {
            Basis::Normalized => GrowthBasis::Normalized,
            Basis::Raw => GrowthBasis::Raw,
        }
    }
}

impl From<Basis> for BaselineBasis {
    fn from(b: Basis) -> Self {
        match b {
            Basis::Normalized => BaselineBasis::Normalized,
            Basis::Raw => BaselineBasis::Raw,
        }
    }
}

impl MeasureArg {
    fn measures(self) -> Vec<SimilarityMeasure> {
        match self {
            MeasureArg::Euclidean => vec![SimilarityMeasure::EuclideanDistance],
            MeasureArg::Cosine => vec![SimilarityMeasure::CosineAngle],
            MeasureArg::Both => vec![SimilarityMeasure::EuclideanDistance, SimilarityMeasure::CosineAngle],
        }
    }
}

struct Loaded {
    echo: InputEcho,
    input: PreparedInput,
}

fn load(args: &InputArgs) -> Result<Loaded> {
    let bytes = fs::read(&args.panel).with_context(|| format!("reading {}", args.panel.display()))?;
    let panel = parse_panel_csv(bytes.as_slice()).with_context(|| format!("parsing {}", args.panel.display()))?;
    let input = prepare(&panel, &args.self_entity, args.norm_scope.into())?;
    Ok(Loaded {
        echo: InputEcho {
            path: args.panel.display().to_string(),
            sha256: sha256_hex(&bytes),
            self_entity: args.self_entity.clone(),
        },
        input,
    })
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            Ok(stdout.flush()?)
        }
    }
}

fn to_json<T: serde::Serialize>(value: &T) -> Result<String> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    Ok(text)
}

fn cmd_run(args: RunArgs) -> Result<()> {
    let loaded = load(&args.input)?;
    let config = TrialConfig {
        n: args.detector.n,
        trials: args.trials,
        seed: args.seed,
        u_mode: match args.u_mode {
            UModeArg::Uniform => UMode::Uniform,
            UModeArg::Ternary => UMode::Ternary,
            UModeArg::Zero => UMode::Zero,
        },
        u_scope: match args.u_scope {
            UScopeArg::PerFeature => UScope::PerFeature,
            UScopeArg::Global => UScope::Global,
        },
        growth_basis: args.detector.growth_basis.into(),
        scope: args.input.norm_scope.into(),
        measures: args.measure.measures(),
        mask_mode: match args.mask_mode {
            MaskModeArg::ZeroInclude => MaskMode::ZeroInclude,
            MaskModeArg::Exclude => MaskMode::Exclude,
        },
    };
    let workers = args.workers.map(|w| w as usize);
    let report = run_pipeline(loaded.echo, &config, &loaded.input, args.baseline_basis.into(), workers)?;

    let dir = match args.out.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    for table in &report.tables {
        let path = dir.join(format!("ranks_{}.csv", table.measure.short_name()));
        fs::write(&path, table.to_csv()).with_context(|| format!("writing {}", path.display()))?;
    }
    emit(Some(&args.out), &to_json(&report)?)?;

    if !report.warnings.is_empty() {
        eprintln!("{} warning(s) recorded in {}", report.warnings.len(), args.out.display());
    }
    for check in &report.cross_check {
        eprintln!(
            "{}: {} ranked first in {:.1}% of trials",
            check.measure.short_name(),
            check.top_rank1_entity,
            check.top_rank1_share * 100.0
        );
    }
    Ok(())
}

fn cmd_detect(args: DetectArgs) -> Result<()> {
    let loaded = load(&args.input)?;
    let config = TrialConfig {
        n: args.detector.n,
        growth_basis: args.detector.growth_basis.into(),
        scope: args.input.norm_scope.into(),
        ..Default::default()
    };
    let snapshot = detector_snapshot(&config, &loaded.input)?;
    emit(args.out.as_deref(), &to_json(&snapshot)?)
}

fn cmd_synth(args: SynthArgs) -> Result<()> {
    let spec = SynthSpec {
        entities: args.entities as usize,
        features: args.features as usize,
        years: args.years as usize,
        first_year: args.first_year,
        self_name: args.self_name,
        outlier: args.outlier,
        seed: args.seed,
    };
    let panel = synth_panel(&spec)?;
    emit(args.out.as_deref(), &panel.to_csv_string())
}

fn cmd_baseline(args: BaselineArgs) -> Result<()> {
    let loaded = load(&args.input)?;
    let report = correlation_baseline(&loaded.input, args.basis.into())?;
    emit(args.out.as_deref(), &report.to_csv())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Detect(a) => cmd_detect(a),
        Command::Synth(a) => cmd_synth(a),
        Command::Baseline(a) => cmd_baseline(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
