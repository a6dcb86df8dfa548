//! Command-line front end. `main` only forwards to [`run`].

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::arch::{ArchChoice, DepthConfig, WidthFactor};
use crate::data::DatasetKind;
use crate::error::Error;
use crate::experiments::hist::{bin_loss_accuracy, BinSpec, LossMetric};
use crate::experiments::plan::{parse_pair, Algorithm, GncSection, SgdSection, Study, SweepConfig, SweepPlan, SweepSection};
use crate::experiments::records::{read_records, summarize, write_csv, write_csv_file};
use crate::experiments::{load_pool, run_sweep, RunManifest};
use crate::prior::{sample_weights, Prior, SeedPlan};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_BUDGET: i32 = 3;

pub const RECORDS_FILE: &str = "records.csv";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const HIST_FILE: &str = "hist.csv";

#[derive(Debug, Parser)]
#[command(name = "gnclab", version, about = "Guess-and-check versus SGD on small binary tasks")]
pub struct Cli {
    /// Only warnings and errors on stderr.
    #[arg(long, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build an architecture and print its parameter count or layout.
    Arch(ArchCmd),
    /// Draw one parameter set from a prior.
    Sample(SampleCmd),
    /// Train networks with SGD on one class pair.
    Sgd(SgdCmd),
    /// Rejection-sample interpolating networks on one class pair.
    Gnc(GncCmd),
    /// Recompute summary.csv from a records.csv.
    Metrics(MetricsCmd),
    /// Run a sweep described by a TOML config.
    Sweep(SweepCmd),
    /// Bin records by normalized loss and test accuracy.
    Bins(BinsCmd),
}

#[derive(Debug, Args)]
pub struct ArchOpts {
    /// Full descriptor such as `lenet:2/6:2c-3f`, `mlp:1:0` or `dense:8-8`;
    /// overrides --family/--width/--depth.
    #[arg(long)]
    pub arch: Option<String>,
    #[arg(long, default_value = "lenet")]
    pub family: String,
    #[arg(long, default_value = "2/6")]
    pub width: String,
    /// LeNet depth (`2c-3f`), MLP dropped layers, or dense hidden sizes.
    #[arg(long)]
    pub depth: Option<String>,
}

impl ArchOpts {
    fn resolve(&self) -> Result<ArchChoice, Error> {
        if let Some(a) = &self.arch {
            return a.parse();
        }
        match self.family.as_str() {
            "lenet" => Ok(ArchChoice::Lenet {
                width: self.width.parse()?,
                depth: self.depth.as_deref().map(str::parse).transpose()?.unwrap_or(DepthConfig::STANDARD),
            }),
            "mlp" => Ok(ArchChoice::Mlp {
                width: self.width.parse::<WidthFactor>()?,
                drop: self
                    .depth
                    .as_deref()
                    .map(|d| d.parse().map_err(|_| Error::Architecture(format!("bad MLP depth '{d}'"))))
                    .transpose()?
                    .unwrap_or(0),
            }),
            "dense" => format!("dense:{}", self.depth.as_deref().unwrap_or("")).parse(),
            other => Err(Error::Architecture(format!("unknown family '{other}'"))),
        }
    }
}

#[derive(Debug, Args)]
pub struct DataOpts {
    #[arg(long, default_value = "mnist")]
    pub dataset: String,
    /// Defaults to `$GNCLAB_DATA_DIR/<dataset>` or `data/<dataset>`.
    #[arg(long)]
    pub data_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ArchCmd {
    #[command(flatten)]
    pub arch: ArchOpts,
    #[arg(long, default_value = "mnist")]
    pub dataset: String,
    /// Print only the parameter count.
    #[arg(long)]
    pub count_params: bool,
}

#[derive(Debug, Args)]
pub struct SampleCmd {
    #[command(flatten)]
    pub arch: ArchOpts,
    #[arg(long, default_value = "mnist")]
    pub dataset: String,
    #[arg(long, default_value = "kaiming_uniform")]
    pub prior: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Draw index within the seed's stream family.
    #[arg(long, default_value_t = 0)]
    pub index: u64,
    /// Write the flat parameter vector, one value per line.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CellOpts {
    #[command(flatten)]
    pub arch: ArchOpts,
    #[command(flatten)]
    pub data: DataOpts,
    #[arg(long, default_value = "0,7")]
    pub pair: String,
    #[arg(long, default_value_t = 16)]
    pub n: usize,
    #[arg(long, default_value = "kaiming_uniform")]
    pub prior: String,
    /// Networks to produce.
    #[arg(long, default_value_t = 100)]
    pub count: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Which training subset (replicate) of the pair to use.
    #[arg(long, default_value_t = 0)]
    pub replicate: usize,
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
    /// Output directory; defaults to `runs/<command>`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SgdCmd {
    #[command(flatten)]
    pub cell: CellOpts,
    /// Defaults to 0.1 for Kaiming priors and 0.01 for uniform ones.
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long, default_value_t = 60)]
    pub epochs: usize,
    #[arg(long, default_value_t = 2)]
    pub batch_size: usize,
    #[arg(long)]
    pub max_attempts: Option<usize>,
}

#[derive(Debug, Args)]
pub struct GncCmd {
    #[command(flatten)]
    pub cell: CellOpts,
    /// Draw budget, e.g. `1e8`; defaults to `2^(n+6)`.
    #[arg(long, value_parser = parse_budget)]
    pub budget: Option<u64>,
}

#[derive(Debug, Args)]
pub struct MetricsCmd {
    #[arg(long)]
    pub records: PathBuf,
    /// Defaults to stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepCmd {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long, default_value = "runs/sweep")]
    pub out: PathBuf,
    /// Overrides `gnc.workers` from the config.
    #[arg(long)]
    pub workers: Option<usize>,
}

#[derive(Debug, Args)]
pub struct BinsCmd {
    #[arg(long)]
    pub records: PathBuf,
    #[arg(long, default_value = "lipschitz")]
    pub loss: String,
    #[arg(long, default_value_t = 30)]
    pub loss_bins: usize,
    #[arg(long, default_value_t = 20)]
    pub acc_bins: usize,
    /// Defaults to stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn parse_budget(s: &str) -> Result<u64, String> {
    if let Ok(v) = s.parse::<u64>() {
        return Ok(v);
    }
    match s.parse::<f64>() {
        Ok(v) if v >= 1.0 && v.fract() == 0.0 && v < 1.8e19 => Ok(v as u64),
        _ => Err(format!("'{s}' is not a positive whole number")),
    }
}

/// A failure with the exit code it maps to.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    fn usage(e: impl std::fmt::Display) -> Self {
        Failure { code: EXIT_USAGE, message: e.to_string() }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Dataset(_) | Error::Parse { .. } | Error::Io { .. } | Error::Csv(_) => EXIT_DATA,
            Error::BudgetExhausted { .. } => EXIT_BUDGET,
            _ => EXIT_USAGE,
        };
        Failure { code, message: e.to_string() }
    }
}

/// Parses `argv` (including the program name) and runs the command.
/// Returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let argv: Vec<std::ffi::OsString> = argv.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let level = if cli.quiet { "warn" } else { "info" };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .try_init();
    let command: Vec<String> = argv.iter().map(|a| a.to_string_lossy().into_owned()).collect();
    match dispatch(cli.command, command) {
        Ok(code) => code,
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    }
}

fn dispatch(command: Command, argv: Vec<String>) -> Result<i32, Failure> {
    match command {
        Command::Arch(c) => arch(c),
        Command::Sample(c) => sample(c),
        Command::Sgd(c) => {
            let out = c.cell.out.clone().unwrap_or_else(|| PathBuf::from("runs/sgd"));
            let cfg = adhoc_config(&c.cell, Algorithm::Sgd, |cfg| {
                cfg.sgd = SgdSection {
                    epochs: c.epochs,
                    batch_size: c.batch_size,
                    learning_rate: c.lr,
                    max_attempts: c.max_attempts,
                    checkpoints: Vec::new(),
                };
            })?;
            execute(cfg, &out, argv, false)
        }
        Command::Gnc(c) => {
            let out = c.cell.out.clone().unwrap_or_else(|| PathBuf::from("runs/gnc"));
            let cfg = adhoc_config(&c.cell, Algorithm::Gnc, |cfg| {
                cfg.gnc = GncSection { budget: c.budget, workers: c.cell.workers };
            })?;
            execute(cfg, &out, argv, false)
        }
        Command::Metrics(c) => {
            let records = read_records(&c.records)?;
            write_table(&summarize(&records), c.out.as_deref())?;
            Ok(EXIT_OK)
        }
        Command::Sweep(c) => {
            let mut cfg = SweepConfig::load(&c.config).map_err(Failure::usage)?;
            if let Some(w) = c.workers {
                cfg.gnc.workers = w;
            }
            execute(cfg, &c.out, argv, true)
        }
        Command::Bins(c) => {
            let records = read_records(&c.records)?;
            let spec = BinSpec {
                loss: c.loss.parse::<LossMetric>()?,
                loss_bins: c.loss_bins,
                acc_bins: c.acc_bins,
                range: None,
            };
            write_table(&bin_loss_accuracy(&records, &spec)?, c.out.as_deref())?;
            Ok(EXIT_OK)
        }
    }
}

fn arch(c: ArchCmd) -> Result<i32, Failure> {
    let dataset = DatasetKind::parse(&c.dataset)?;
    let spec = c.arch.resolve()?.build(&dataset.input_shape())?;
    if c.count_params {
        println!("{}", spec.count_params());
    } else {
        print!("{}", spec.describe());
    }
    Ok(EXIT_OK)
}

fn sample(c: SampleCmd) -> Result<i32, Failure> {
    let dataset = DatasetKind::parse(&c.dataset)?;
    let spec = c.arch.resolve()?.build(&dataset.input_shape())?;
    let prior: Prior = c.prior.parse()?;
    let params = sample_weights(&spec, &prior, &SeedPlan::new(c.seed), c.index);
    println!("arch = {}", spec.name());
    println!("prior = {prior}");
    println!("params = {}", params.len());
    println!("norm = {}", params.norm2().sqrt());
    for (i, l) in params.layers().iter().enumerate() {
        println!("layer {i}: weight_norm = {} bias_norm = {}", l.weight.norm2().sqrt(), l.bias.norm2().sqrt());
    }
    if let Some(path) = c.out {
        let text: String = params.values().map(|v| format!("{v}\n")).collect();
        fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    }
    Ok(EXIT_OK)
}

fn adhoc_config(c: &CellOpts, algorithm: Algorithm, tweak: impl FnOnce(&mut SweepConfig)) -> Result<SweepConfig, Failure> {
    parse_pair(&c.pair).map_err(Failure::usage)?;
    let arch = c.arch.resolve()?;
    let mut cfg = SweepConfig {
        sweep: SweepSection {
            study: Study::Adhoc,
            dataset: c.data.dataset.clone(),
            data_dir: c.data.data_dir.clone(),
            mnist_dir: None,
            cifar_dir: None,
            pairs: vec![c.pair.clone()],
            n: vec![c.n],
            family: arch.family().into(),
            widths: Vec::new(),
            depths: Vec::new(),
            archs: vec![arch.to_string()],
            priors: vec![c.prior.clone()],
            algorithms: vec![algorithm],
            networks_per_cell: c.count,
            replicates: c.replicate + 1,
            seed: c.seed,
            sgd_only_n: Vec::new(),
        },
        sgd: Default::default(),
        gnc: GncSection { budget: None, workers: c.workers },
        bins: Default::default(),
        synthetic: Default::default(),
    };
    tweak(&mut cfg);
    cfg.gnc.workers = c.workers;
    Ok(cfg)
}

/// Resolves the plan, loads data, runs every cell and writes records,
/// summary, optional histogram and the manifest into `out`.
fn execute(cfg: SweepConfig, out: &Path, argv: Vec<String>, with_hist: bool) -> Result<i32, Failure> {
    let replicate_only = match cfg.sweep.study {
        Study::Adhoc => Some(cfg.sweep.replicates - 1),
        _ => None,
    };
    let mut plan = SweepPlan::from_config(cfg).map_err(Failure::usage)?;
    if let Some(r) = replicate_only {
        plan.cells.retain(|c| c.key.replicate == r);
        for (i, c) in plan.cells.iter_mut().enumerate() {
            c.index = i;
        }
    }
    let mut manifest = RunManifest::new(argv);
    manifest.record_plan(&plan);
    let pool = load_pool(&plan)?;
    manifest.record_checksums(&pool.checksums);
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;

    let result = run_sweep(&plan, &pool)?;
    write_csv_file(&result.records, &out.join(RECORDS_FILE))?;
    write_csv_file(&summarize(&result.records), &out.join(SUMMARY_FILE))?;
    if with_hist {
        let b = &plan.config.bins;
        let spec = BinSpec { loss: b.loss, loss_bins: b.loss_bins, acc_bins: b.acc_bins, range: None };
        write_csv_file(&bin_loss_accuracy(&result.records, &spec)?, &out.join(HIST_FILE))?;
    }
    let code = if result.any_censored() {
        eprintln!(
            "budget exhausted in {} cell(s): {:?}; partial results kept in {}",
            result.censored_cells.len(),
            result.censored_cells,
            out.display()
        );
        EXIT_BUDGET
    } else {
        EXIT_OK
    };
    manifest.finish(if code == EXIT_OK { "ok" } else { "budget_exhausted" });
    manifest.write(out)?;
    Ok(code)
}

fn write_table<T: serde::Serialize>(rows: &[T], out: Option<&Path>) -> Result<(), Failure> {
    match out {
        Some(p) => write_csv_file(rows, p)?,
        None => write_csv(rows, std::io::stdout().lock())?,
    }
    Ok(())
}
