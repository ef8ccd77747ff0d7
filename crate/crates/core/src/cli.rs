//! The `plcroute` command line.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::channel::{ChannelSpec, MatrixFormat, PerMatrix};
use crate::dlc;
use crate::error::Error;
use crate::report::{AnalysisDoc, CompareSettings, ComparisonDoc, SimulationDoc};
use crate::sfn;
use crate::sim::{Protocol, SimConfig, DEFAULT_MAX_RETRIES};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_INTERNAL: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "plcroute",
    version,
    about = "Analyse and simulate PLC polling protocols"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a generated PER matrix.
    Generate {
        #[command(subcommand)]
        model: GenerateModel,
    },
    /// Expected polling-cycle durations from the analytic models.
    Analyze(AnalyzeArgs),
    /// Monte-Carlo simulation checked against the analytic prediction.
    Simulate(SimulateArgs),
    /// Both protocols on several channel models, as four tables.
    Compare(CompareArgs),
}

#[derive(Debug, Subcommand)]
pub enum GenerateModel {
    /// Nodes on a ring; neighbours and next-neighbours hear each other.
    Ring {
        #[arg(long)]
        nodes: usize,
        #[arg(long, default_value_t = crate::channel::DEFAULT_RING_PER_ADJACENT)]
        per_adj: f64,
        #[arg(long = "per-2", default_value_t = crate::channel::DEFAULT_RING_PER_TWO_HOP)]
        per_two_hop: f64,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Nodes scattered over the unit square, PER rising with distance.
    RandArea {
        #[arg(long)]
        nodes: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = crate::channel::DEFAULT_AREA_D50)]
        d50: f64,
        #[arg(long, default_value_t = crate::channel::DEFAULT_AREA_WIDTH)]
        width: f64,
        #[arg(short, long)]
        output: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ProtocolArg {
    Dlc1000,
    Sfn,
    Both,
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    #[arg(long, default_value_t = 1.0)]
    pub slot_time: f64,
    /// DLC1000 repeater cap; for SFN, the level horizon.
    #[arg(long)]
    pub max_level: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_MAX_RETRIES)]
    pub max_retries: u32,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    pub format: Format,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    pub matrix: PathBuf,
    #[arg(long, value_enum, default_value_t = ProtocolArg::Both)]
    pub protocol: ProtocolArg,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    pub matrix: PathBuf,
    #[arg(long, value_enum)]
    pub protocol: ProtocolArg,
    #[arg(long, default_value_t = 1000)]
    pub cycles: u64,
    /// Run every cycle on the calling thread.
    #[arg(long)]
    pub serial: bool,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    pub matrices: Vec<PathBuf>,
    /// Add the five stock channel models.
    #[arg(long)]
    pub defaults: bool,
    #[arg(long, default_value_t = 1000)]
    pub cycles: u64,
    #[arg(long, default_value_t = crate::metrics::DEFAULT_PACKET_BYTES)]
    pub packet_bytes: u32,
    #[arg(long, default_value_t = crate::metrics::DEFAULT_QUALITY_BITS)]
    pub quality_bits: u32,
    #[command(flatten)]
    pub common: CommonArgs,
}

/// Everything needed to reproduce a run's output files.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub channels: Vec<ChannelSpec>,
    pub max_level: Option<usize>,
    pub horizon: Option<usize>,
    pub slot_time: Option<f64>,
    pub sim: Option<SimConfig>,
    pub outputs: Vec<PathBuf>,
}

impl RunManifest {
    fn new(command: &str) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            channels: Vec::new(),
            max_level: None,
            horizon: None,
            slot_time: None,
            sim: None,
            outputs: Vec::new(),
        }
    }
}

pub fn manifest_path(output: &Path) -> PathBuf {
    let mut s = output.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}

#[derive(Debug)]
pub enum CliError {
    Validation(String),
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => EXIT_VALIDATION,
            CliError::Internal(_) => EXIT_INTERNAL,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Validation(m) | CliError::Internal(m) => m,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Json(_) => CliError::Internal(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

fn validation(msg: impl Into<String>) -> CliError {
    CliError::Validation(msg.into())
}

fn load_matrix(path: &Path) -> Result<(PerMatrix, ChannelSpec), CliError> {
    let format = MatrixFormat::from_path(path);
    let per = PerMatrix::load(path, format)?;
    let spec = ChannelSpec::File {
        path: path.display().to_string(),
        format,
    };
    Ok((per, spec))
}

fn check_common(c: &CommonArgs) -> Result<(), CliError> {
    if !(c.slot_time > 0.0 && c.slot_time.is_finite()) {
        return Err(validation(format!(
            "--slot-time must be positive, got {}",
            c.slot_time
        )));
    }
    Ok(())
}

fn render<T: Serialize>(
    format: Format,
    doc: &T,
    text: impl FnOnce() -> String,
    csv: impl FnOnce() -> String,
) -> Result<String, CliError> {
    Ok(match format {
        Format::Text => text(),
        Format::Csv => csv(),
        Format::Json => {
            let mut s =
                serde_json::to_string_pretty(doc).map_err(|e| CliError::Internal(e.to_string()))?;
            s.push('\n');
            s
        }
    })
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents)
        .map_err(|e| CliError::Internal(format!("{}: {e}", path.display())))
}

fn emit(
    output: Option<&Path>,
    body: &str,
    mut manifest: RunManifest,
    stdout: &mut dyn Write,
) -> Result<(), CliError> {
    match output {
        Some(path) => {
            write_file(path, body)?;
            manifest.outputs.push(path.to_path_buf());
            let m = serde_json::to_string_pretty(&manifest)
                .map_err(|e| CliError::Internal(e.to_string()))?;
            write_file(&manifest_path(path), &(m + "\n"))
        }
        None => stdout
            .write_all(body.as_bytes())
            .map_err(|e| CliError::Internal(format!("stdout: {e}"))),
    }
}

fn generate(model: GenerateModel, stdout: &mut dyn Write) -> Result<(), CliError> {
    let (spec, output) = match model {
        GenerateModel::Ring {
            nodes,
            per_adj,
            per_two_hop,
            output,
        } => (
            ChannelSpec::Ring {
                node_count: nodes,
                per_adjacent: per_adj,
                per_two_hop,
            },
            output,
        ),
        GenerateModel::RandArea {
            nodes,
            seed,
            d50,
            width,
            output,
        } => (
            ChannelSpec::RandArea {
                node_count: nodes,
                d50,
                width,
                seed,
            },
            output,
        ),
    };
    let per = spec.build()?;
    let body = match MatrixFormat::from_path(&output) {
        MatrixFormat::Text => per.to_text(),
        MatrixFormat::Json => per.to_json()? + "\n",
    };
    let mut manifest = RunManifest::new("generate");
    manifest.channels.push(spec);
    emit(Some(&output), &body, manifest, stdout)
}

fn analyze(args: AnalyzeArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    check_common(&args.common)?;
    let (per, spec) = load_matrix(&args.matrix)?;
    let protocols = match args.protocol {
        ProtocolArg::Dlc1000 => vec![Protocol::Dlc1000],
        ProtocolArg::Sfn => vec![Protocol::Sfn],
        ProtocolArg::Both => vec![Protocol::Dlc1000, Protocol::Sfn],
    };
    let max_level = args.common.max_level.unwrap_or(dlc::DEFAULT_MAX_LEVEL);
    let horizon = args
        .common
        .max_level
        .unwrap_or_else(|| sfn::default_horizon(&per));
    let doc = AnalysisDoc::compute(&per, &protocols, max_level, horizon, args.common.slot_time)?;
    let body = render(args.common.format, &doc, || doc.to_text(), || doc.to_csv())?;
    let mut manifest = RunManifest::new("analyze");
    manifest.channels.push(spec);
    manifest.max_level = Some(max_level);
    manifest.horizon = Some(horizon);
    manifest.slot_time = Some(args.common.slot_time);
    emit(args.common.output.as_deref(), &body, manifest, stdout)
}

fn simulate(args: SimulateArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    check_common(&args.common)?;
    let protocol = match args.protocol {
        ProtocolArg::Dlc1000 => Protocol::Dlc1000,
        ProtocolArg::Sfn => Protocol::Sfn,
        ProtocolArg::Both => return Err(validation("simulate takes a single protocol")),
    };
    if args.cycles == 0 {
        return Err(validation("--cycles must be at least 1"));
    }
    let (per, spec) = load_matrix(&args.matrix)?;
    let mut cfg = SimConfig::new(protocol, args.cycles, args.common.seed);
    cfg.max_retries = args.common.max_retries;
    cfg.max_level = args.common.max_level;
    cfg.slot_time = args.common.slot_time;
    cfg.parallel = !args.serial;
    let doc = SimulationDoc::run(&per, &cfg)?;
    let body = render(args.common.format, &doc, || doc.to_text(), || doc.to_csv())?;
    let mut manifest = RunManifest::new("simulate");
    manifest.channels.push(spec);
    manifest.slot_time = Some(cfg.slot_time);
    manifest.sim = Some(cfg);
    emit(args.common.output.as_deref(), &body, manifest, stdout)
}

/// Returns how many models failed.
fn compare(args: CompareArgs, stdout: &mut dyn Write) -> Result<usize, CliError> {
    check_common(&args.common)?;
    if args.matrices.is_empty() && !args.defaults {
        return Err(validation(
            "compare needs at least one matrix file or --defaults",
        ));
    }
    if args.cycles == 0 {
        return Err(validation("--cycles must be at least 1"));
    }
    let mut specs = Vec::new();
    let mut models = Vec::new();
    for path in &args.matrices {
        let format = MatrixFormat::from_path(path);
        specs.push(ChannelSpec::File {
            path: path.display().to_string(),
            format,
        });
        let name = path.file_stem().map_or_else(
            || path.display().to_string(),
            |s| s.to_string_lossy().into_owned(),
        );
        models.push((name, PerMatrix::load(path, format)));
    }
    if args.defaults {
        for (name, spec) in ChannelSpec::defaults() {
            models.push((name, spec.build()));
            specs.push(spec);
        }
    }
    let settings = CompareSettings {
        max_level: args.common.max_level.unwrap_or(dlc::DEFAULT_MAX_LEVEL),
        horizon: None,
        slot_time: args.common.slot_time,
        cycles: args.cycles,
        max_retries: args.common.max_retries,
        seed: args.common.seed,
        packet_bytes: args.packet_bytes,
        quality_bits: args.quality_bits,
        ..CompareSettings::default()
    };
    let doc = ComparisonDoc::compute(models, settings)?;
    let body = render(args.common.format, &doc, || doc.to_text(), || doc.to_csv())?;
    let mut manifest = RunManifest::new("compare");
    manifest.channels = specs;
    manifest.max_level = Some(doc.settings.max_level);
    manifest.slot_time = Some(doc.settings.slot_time);
    let mut cfg = SimConfig::new(Protocol::Sfn, args.cycles, args.common.seed);
    cfg.max_retries = args.common.max_retries;
    cfg.slot_time = args.common.slot_time;
    manifest.sim = Some(cfg);
    emit(args.common.output.as_deref(), &body, manifest, stdout)?;
    Ok(doc.failures())
}

pub fn execute(cli: Cli, stdout: &mut dyn Write) -> Result<(), CliError> {
    match cli.command {
        Command::Generate { model } => generate(model, stdout),
        Command::Analyze(a) => analyze(a, stdout),
        Command::Simulate(a) => simulate(a, stdout),
        Command::Compare(a) => match compare(a, stdout)? {
            0 => Ok(()),
            n => Err(validation(format!("{n} channel model(s) failed"))),
        },
    }
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() {
                EXIT_VALIDATION
            } else {
                EXIT_OK
            };
            let _ = if e.use_stderr() {
                write!(stderr, "{}", e.render())
            } else {
                write!(stdout, "{}", e.render())
            };
            return code;
        }
    };
    match execute(cli, stdout) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(stderr, "error: {}", e.message());
            e.exit_code()
        }
    }
}
