use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Mutex;

use clap::{Parser, Subcommand};

use muse::config::Config;
use muse::eval::{evaluate, Pose};
use muse::fusion::run_threaded;
use muse::log::{write_csv, LogHeader, LogReader, Record, StreamLog};
use muse::sim::generate;
use muse::{Error, Result};

#[derive(Parser)]
#[command(name = "muse", version, about = "Quadruped state estimation: simulate, estimate, evaluate")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic sensor log with ground truth.
    Simulate {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Overrides `scenario.seed`.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run the estimator over a sensor log.
    Estimate {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Ignore every exteroceptive channel.
        #[arg(long)]
        proprioceptive_only: bool,
        #[arg(long)]
        no_slip_detection: bool,
    },
    /// Score estimates against ground truth. Prints a JSON report on stdout
    /// and a table on stderr.
    Eval {
        #[arg(long)]
        est: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        /// Path length of the relative pose error window (m).
        #[arg(long, default_value_t = 1.0)]
        rpe_window: f64,
        #[arg(long)]
        no_align: bool,
    },
    /// Print selected channels as CSV, e.g. `--channels estimate.position,ground_truth.position`.
    PlotData {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        channels: Vec<String>,
    },
}

/// Names the file in I/O errors.
fn at(path: &Path) -> impl Fn(Error) -> Error + '_ {
    move |e| match e {
        Error::Io(io) => Error::Io(std::io::Error::new(io.kind(), format!("{}: {io}", path.display()))),
        other => other,
    }
}

fn load_config(path: Option<&Path>) -> Result<Config> {
    path.map_or_else(|| Ok(Config::default()), |p| Config::load(p).map_err(at(p)))
}

fn simulate(config: Option<&Path>, out: &Path, seed: Option<u64>) -> Result<()> {
    let mut cfg = load_config(config)?;
    if let Some(seed) = seed {
        cfg.scenario.seed = seed;
    }
    let log = generate(&cfg.scenario, &cfg.platform()?)?;
    log.write(out).map_err(at(out))?;
    eprintln!("wrote {} records to {}", log.records.len(), out.display());
    Ok(())
}

fn estimate(config: Option<&Path>, input: &Path, out: &Path, proprio: bool, no_sd: bool) -> Result<()> {
    let mut cfg = load_config(config)?.pipeline()?;
    cfg.proprioceptive_only |= proprio;
    cfg.slip.enabled &= !no_sd;
    let reader = LogReader::open(input).map_err(at(input))?;
    let mut header = LogHeader::new("estimate", &cfg.model.name, cfg.extero_sensor);
    header.seed = reader.header.seed;

    // The reader runs on its own thread; the first parse error stops it.
    let failure = Mutex::new(None);
    let events = reader
        .map_while(|r| match r {
            Ok(rec) => Some(rec),
            Err(e) => {
                *failure.lock().unwrap() = Some(e);
                None
            }
        })
        .filter_map(|rec| rec.to_event());
    let (estimates, diagnostics) = run_threaded(cfg, events, 4096);
    if let Some(e) = failure.into_inner().unwrap() {
        return Err(e);
    }

    let mut log = StreamLog::new(header);
    log.records = estimates.into_iter().map(Record::Estimate).collect();
    log.write(out).map_err(at(out))?;
    eprintln!("wrote {} estimates to {}", log.records.len(), out.display());
    eprintln!("{}", serde_json::to_string(&diagnostics).unwrap_or_default());
    Ok(())
}

fn eval(est_path: &Path, gt_path: &Path, window: f64, align: bool) -> Result<()> {
    if !(window > 0.0) {
        return Err(Error::Config(format!("--rpe-window must be positive, got {window}")));
    }
    let est: Vec<Pose> = StreamLog::read(est_path).map_err(at(est_path))?.estimates().iter().map(Pose::from).collect();
    let gt: Vec<Pose> = StreamLog::read(gt_path).map_err(at(gt_path))?.ground_truth().iter().map(Pose::from).collect();
    for (poses, path, channel) in [(&est, est_path, "estimate"), (&gt, gt_path, "ground_truth")] {
        if poses.is_empty() {
            return Err(Error::Config(format!("{} has no {channel} records", path.display())));
        }
    }
    let report = evaluate(&est, &gt, window, align)?;
    println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
    eprint!("{}", report.table());
    Ok(())
}

fn plot_data(input: &Path, channels: &[String]) -> Result<()> {
    let reader = LogReader::open(input).map_err(at(input))?;
    let stdout = std::io::stdout();
    let mut out = BufWriter::new(stdout.lock());
    let written = write_csv(reader, channels, &mut out).and_then(|_| Ok(out.flush()?));
    match written {
        Err(Error::Io(e)) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
        other => other,
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate { config, out, seed } => simulate(config.as_deref(), &out, seed),
        Command::Estimate {
            config,
            input,
            out,
            proprioceptive_only,
            no_slip_detection,
        } => estimate(config.as_deref(), &input, &out, proprioceptive_only, no_slip_detection),
        Command::Eval {
            est,
            gt,
            rpe_window,
            no_align,
        } => eval(&est, &gt, rpe_window, !no_align),
        Command::PlotData { input, channels } => plot_data(&input, &channels),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_bad_input() { 1 } else { 2 })
        }
    }
}
