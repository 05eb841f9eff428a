//! `nvswap` command-line front end.
//!
//! Exit status: 0 on success, 1 for usage or scenario errors, 2 when a model
//! or the simulator fails at run time.

use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use nvswap::config::Scenario;
use nvswap::em::{mergesort_plan, weighted_cost, EmModel, SwapMode};
use nvswap::feasibility::{operating_points, sweep, PowerStatus, Verdict};
use nvswap::flash::IoOp;
use nvswap::sim::{simulate_detailed, SimScenario};

#[derive(Debug, Parser)]
#[command(
    name = "nvswap",
    version,
    about = "Flash swapping feasibility for neural recording accelerators"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Classify every channel count of the scenario's sweep grid (CSV).
    Sweep(SweepArgs),
    /// Simulate swap traffic at one channel count (JSON report).
    Simulate(SimulateArgs),
    /// Block I/O counts and weighted costs of external mergesort (CSV).
    AnalyzeEm(AnalyzeArgs),
    /// Sustained read and program bandwidth per parallel unit count (CSV).
    FlashInfo(FlashArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModeArg {
    Naive,
    Em,
}

impl From<ModeArg> for SwapMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Naive => SwapMode::Naive,
            ModeArg::Em => SwapMode::Em,
        }
    }
}

#[derive(Debug, Args)]
struct ScenarioArgs {
    /// Scenario file (TOML).
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Output file; standard output when absent.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Override the scenario's swap mode.
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    /// Also write `<out>.grid.dat` with numeric verdict codes for heat maps.
    #[arg(long, requires = "out")]
    gnuplot: bool,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    /// Channel count to simulate.
    #[arg(long)]
    channels: u64,
    /// Seconds of window arrivals; defaults to ten of the longest window.
    #[arg(long = "horizon-s")]
    horizon_s: Option<f64>,
    /// Also write a per-window trace to `<out>.trace.csv`.
    #[arg(long, requires = "out")]
    trace: bool,
}

#[derive(Debug, Args)]
struct AnalyzeArgs {
    /// Words to sort; comma-separated for a sweep.
    #[arg(long, value_delimiter = ',', required = true)]
    n: Vec<u64>,
    /// Words of fast memory; comma-separated for a sweep.
    #[arg(long, value_delimiter = ',', required = true)]
    m: Vec<u64>,
    /// Words per block; comma-separated for a sweep.
    #[arg(long, value_delimiter = ',', required = true)]
    b: Vec<u64>,
    /// Cost per block read (defaults to 1, or the page read time with --config).
    #[arg(long)]
    r: Option<f64>,
    /// Cost per block write (defaults to 1, or the page program time with --config).
    #[arg(long)]
    w: Option<f64>,
    /// Joules per block read.
    #[arg(long, requires = "ew")]
    er: Option<f64>,
    /// Joules per block write.
    #[arg(long, requires = "er")]
    ew: Option<f64>,
    /// Bytes per word.
    #[arg(long, default_value_t = 4)]
    word_bytes: u64,
    /// Take default weights from this scenario's flash parameters.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct FlashArgs {
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

enum Failure {
    Config(String),
    Runtime(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 1,
            Failure::Runtime(_) => 2,
        }
    }
}

type Outcome<T> = Result<T, Failure>;

fn runtime(e: impl std::fmt::Display) -> Failure {
    Failure::Runtime(e.to_string())
}

fn io_failure(path: &Path) -> impl Fn(io::Error) -> Failure + '_ {
    move |e| Failure::Runtime(format!("{}: {e}", path.display()))
}

fn load(args: &ScenarioArgs) -> Outcome<Scenario> {
    let mut sc = Scenario::load(&args.config).map_err(|e| Failure::Config(e.to_string()))?;
    if let Some(mode) = args.mode {
        sc.system.mode = mode.into();
    }
    Ok(sc)
}

fn output(path: Option<&Path>) -> Outcome<Box<dyn Write>> {
    match path {
        Some(p) => Ok(Box::new(io::BufWriter::new(
            File::create(p).map_err(io_failure(p))?,
        ))),
        None => Ok(Box::new(io::stdout().lock())),
    }
}

/// `<out>` with `suffix` appended to the full file name.
fn sibling(out: &Path, suffix: &str) -> PathBuf {
    let mut name = out.as_os_str().to_owned();
    name.push(suffix);
    PathBuf::from(name)
}

fn run_sweep(args: &SweepArgs) -> Outcome<()> {
    let sc = load(&args.scenario)?;
    let (points, degenerate) = operating_points(&sc.system.budget, &sc.grid.channels());
    if let (Some(first), Some(last)) = (degenerate.first(), degenerate.last()) {
        eprintln!(
            "warning: skipped {} channel counts ({} to {}): sampling rate below 1 Hz",
            degenerate.len(),
            first.channels,
            last.channels
        );
    }
    let map = sweep(&points, &sc.system).map_err(runtime)?;

    let out = args.scenario.out.as_deref();
    let mut csv = csv::Writer::from_writer(output(out)?);
    csv.write_record([
        "channels",
        "sampling_rate_hz",
        "verdict",
        "timing",
        "power_ok",
        "swap_bytes",
        "window_s",
        "io_s",
        "watts",
    ])
    .map_err(runtime)?;
    for (p, r) in &map.entries {
        let row = match r {
            Ok(r) => [
                p.channels.to_string(),
                p.sampling_rate.to_string(),
                r.verdict().as_str().to_string(),
                r.timing.as_str().to_string(),
                (r.power == PowerStatus::Ok).to_string(),
                r.detail.swap_bytes().to_string(),
                r.detail.window.to_string(),
                r.detail.io_time.to_string(),
                r.detail.watts.to_string(),
            ],
            Err(e) => {
                eprintln!("warning: {} channels: {e}", p.channels);
                let mut row: [String; 9] = Default::default();
                row[0] = p.channels.to_string();
                row[1] = p.sampling_rate.to_string();
                row[2] = "error".into();
                row
            }
        };
        csv.write_record(&row).map_err(runtime)?;
    }
    csv.flush().map_err(runtime)?;

    if args.gnuplot {
        let out = out.expect("clap requires --out with --gnuplot");
        let path = sibling(out, ".grid.dat");
        let mut f = io::BufWriter::new(File::create(&path).map_err(io_failure(&path))?);
        let legend: Vec<String> = Verdict::ALL
            .iter()
            .map(|v| format!("{}={}", v.code(), v.as_str()))
            .collect();
        let w =
            |f: &mut io::BufWriter<File>, s: String| writeln!(f, "{s}").map_err(io_failure(&path));
        w(&mut f, format!("# verdict codes: {}", legend.join(" ")))?;
        w(&mut f, "# channels sampling_rate_hz verdict_code".into())?;
        for (p, r) in &map.entries {
            // errors get -1
            let code = r.as_ref().map(|r| r.verdict().code() as i32).unwrap_or(-1);
            w(
                &mut f,
                format!("{} {} {}", p.channels, p.sampling_rate, code),
            )?;
        }
        f.flush().map_err(io_failure(&path))?;
    }
    Ok(())
}

fn run_simulate(args: &SimulateArgs) -> Outcome<()> {
    let sc = load(&args.scenario)?;
    let (points, degenerate) = operating_points(&sc.system.budget, &[args.channels]);
    let Some(point) = points.first() else {
        let rate = degenerate
            .first()
            .map(|d| d.sampling_rate)
            .unwrap_or(f64::NAN);
        return Err(Failure::Runtime(format!(
            "{} channels gives a sampling rate of {rate} Hz, below 1 Hz",
            args.channels
        )));
    };
    let scenario = SimScenario::from_system(&sc.system, point).map_err(runtime)?;
    let horizon = args
        .horizon_s
        .unwrap_or(10.0 * scenario.longest_window_ns() as f64 / 1e9);
    let outcome = simulate_detailed(&scenario, horizon).map_err(runtime)?;

    let out = args.scenario.out.as_deref();
    let mut w = output(out)?;
    let json = serde_json::to_string_pretty(&outcome.report).map_err(runtime)?;
    writeln!(w, "{json}")
        .and_then(|_| w.flush())
        .map_err(runtime)?;

    if args.trace {
        let path = sibling(out.expect("clap requires --out with --trace"), ".trace.csv");
        let mut csv = csv::Writer::from_path(&path).map_err(runtime)?;
        csv.write_record([
            "kernel",
            "window",
            "start_s",
            "io_start_s",
            "io_end_s",
            "latency_s",
            "missed",
            "energy_j",
        ])
        .map_err(runtime)?;
        for rec in &outcome.windows {
            csv.write_record([
                scenario.streams[rec.stream].name.clone(),
                rec.window.to_string(),
                rec.start_s.to_string(),
                rec.io_start_s.to_string(),
                rec.io_end_s.to_string(),
                rec.latency_s.to_string(),
                rec.missed.to_string(),
                rec.energy_j.to_string(),
            ])
            .map_err(runtime)?;
        }
        csv.flush().map_err(runtime)?;
    }
    Ok(())
}

fn run_analyze(args: &AnalyzeArgs) -> Outcome<()> {
    let flash = match &args.config {
        Some(path) => Some(
            Scenario::load(path)
                .map_err(|e| Failure::Config(e.to_string()))?
                .system
                .flash,
        ),
        None => None,
    };
    // one block per flash page: array time plus its bus transfer
    let (r, w) = match flash {
        Some(f) => (
            args.r.unwrap_or(f.timing.t_read + f.page_transfer_time()),
            args.w
                .unwrap_or(f.timing.t_program + f.page_transfer_time()),
        ),
        None => (args.r.unwrap_or(1.0), args.w.unwrap_or(1.0)),
    };
    let energy = match (args.er, args.ew, flash) {
        (Some(er), Some(ew), _) => Some((er, ew)),
        (_, _, Some(f)) => {
            let bus = f.page_size() as f64 * f.power.e_bus_per_byte;
            Some((f.power.e_read_page + bus, f.power.e_program_page + bus))
        }
        _ => None,
    };
    for (name, v) in [("r", r), ("w", w)] {
        if v.is_nan() || v < 0.0 {
            return Err(Failure::Config(format!("--{name} must be >= 0, got {v}")));
        }
    }

    let mut csv = csv::Writer::from_writer(output(args.out.as_deref())?);
    csv.write_record([
        "n",
        "m",
        "b",
        "passes",
        "reads",
        "writes",
        "weighted_cost",
        "energy_j",
    ])
    .map_err(runtime)?;
    for &m in &args.m {
        for &b in &args.b {
            let model = EmModel::new(m, b, args.word_bytes).map_err(runtime)?;
            for &n in &args.n {
                let plan = mergesort_plan(n, &model).map_err(runtime)?;
                let energy = energy
                    .map(|(er, ew)| weighted_cost(plan.io, er, ew).to_string())
                    .unwrap_or_default();
                csv.write_record([
                    n.to_string(),
                    m.to_string(),
                    b.to_string(),
                    plan.passes.to_string(),
                    plan.io.reads.to_string(),
                    plan.io.writes.to_string(),
                    weighted_cost(plan.io, r, w).to_string(),
                    energy,
                ])
                .map_err(runtime)?;
            }
        }
    }
    csv.flush().map_err(runtime)
}

fn run_flash_info(args: &FlashArgs) -> Outcome<()> {
    let sc = Scenario::load(&args.config).map_err(|e| Failure::Config(e.to_string()))?;
    let f = sc.system.flash;
    let mut csv = csv::Writer::from_writer(output(args.out.as_deref())?);
    csv.write_record(["k", "read_mb_per_s", "program_mb_per_s"])
        .map_err(runtime)?;
    for k in 1..=f.geometry.total_units() {
        let read = f.sustained_bandwidth(IoOp::Read, k).map_err(runtime)?;
        let program = f.sustained_bandwidth(IoOp::Program, k).map_err(runtime)?;
        csv.write_record([
            k.to_string(),
            (read / 1e6).to_string(),
            (program / 1e6).to_string(),
        ])
        .map_err(runtime)?;
    }
    csv.flush().map_err(runtime)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match &cli.command {
        Command::Sweep(a) => run_sweep(a),
        Command::Simulate(a) => run_simulate(a),
        Command::AnalyzeEm(a) => run_analyze(a),
        Command::FlashInfo(a) => run_flash_info(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let (Failure::Config(msg) | Failure::Runtime(msg)) = &f;
            eprintln!("error: {msg}");
            ExitCode::from(f.code())
        }
    }
}
