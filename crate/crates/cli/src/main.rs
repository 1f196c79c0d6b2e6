use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use meshcast::graph::GeneratorSpec;
use meshcast::harness::{
    export_schedule, run_experiment, sweep, write_sweep, ExperimentConfig, GraphSource, HarnessError, SweepGrid,
};
use meshcast::protocols::Registry;
use meshcast::sim::{FaultMode, TraceLevel};

/// Broadcast experiments on radio mesh graphs.
#[derive(Parser, Debug)]
#[command(name = "meshcast", version, args_conflicts_with_subcommands = true)]
struct Cli {
    #[command(subcommand)]
    command: Option<Command>,

    #[command(flatten)]
    run: RunArgs,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run every combination of graphs, protocols, fault rates and message counts.
    Sweep(Box<SweepArgs>),
    /// Print the registered protocol names.
    Protocols,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// Source node.
    #[arg(long, default_value_t = 0)]
    source: usize,
    #[arg(long, default_value_t = 0.1)]
    delta: f64,
    /// Rank threshold for slow and super-slow classes; defaults to ceil(log2 n).
    #[arg(long)]
    x: Option<u32>,
    #[arg(long, default_value_t = 1)]
    trials: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long = "max-rounds")]
    max_rounds: Option<u64>,
    /// Fast rounds per robust superround, as a multiple of the block size.
    #[arg(long = "c-mult", default_value_t = 6)]
    c_mult: u32,
    #[arg(long = "block-size")]
    block_size: Option<u32>,
    #[arg(long = "fault-mode", value_enum, default_value_t = Faults::Both)]
    fault_mode: Faults,
    /// Abort when a scheduled slot meets a collision at its intended receiver.
    #[arg(long = "strict-slots")]
    strict_slots: bool,
    /// Append wall_time_ms to each summary row.
    #[arg(long)]
    timing: bool,
}

#[derive(Args, Debug)]
struct RunArgs {
    /// Graph file: "n m" then one "u v" line per edge.
    #[arg(long, conflicts_with = "gen")]
    graph: Option<PathBuf>,
    /// Generated graph, e.g. "path(64)", "rand(256,0.05)", "expander(128,8)".
    #[arg(long)]
    gen: Option<GeneratorSpec>,
    #[arg(long, default_value = "decay")]
    protocol: String,
    #[arg(long, default_value_t = 0.0)]
    p: f64,
    /// Number of messages (multi only).
    #[arg(long)]
    k: Option<usize>,
    /// Summary CSV path; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Trace::Summary)]
    trace: Trace,
    /// Write the slot table (faultless) or parameter block (robust) as JSON.
    #[arg(long = "export-schedule")]
    export_schedule: Option<PathBuf>,
    /// Only write the schedule; run no trials.
    #[arg(long = "export-only", requires = "export_schedule")]
    export_only: bool,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[arg(long = "graph")]
    graphs: Vec<PathBuf>,
    #[arg(long = "gen")]
    gens: Vec<GeneratorSpec>,
    #[arg(long = "protocol", required = true)]
    protocols: Vec<String>,
    #[arg(long = "p", default_values_t = [0.0])]
    ps: Vec<f64>,
    /// Message counts, used for the multi protocol.
    #[arg(long = "k")]
    ks: Vec<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    common: Common,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum Trace {
    Summary,
    Events,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum Faults {
    Both,
    Sender,
    Receiver,
}

impl Common {
    fn apply(&self, cfg: &mut ExperimentConfig) {
        cfg.source = self.source;
        cfg.delta = self.delta;
        cfg.x = self.x;
        cfg.trials = self.trials;
        cfg.seed = self.seed;
        cfg.max_rounds = self.max_rounds;
        cfg.c_mult = self.c_mult;
        cfg.block_size = self.block_size;
        cfg.strict_slots = self.strict_slots;
        cfg.timing = self.timing;
        cfg.fault_mode = match self.fault_mode {
            Faults::Both => FaultMode::Both,
            Faults::Sender => FaultMode::SenderOnly,
            Faults::Receiver => FaultMode::ReceiverOnly,
        };
    }
}

fn run(args: RunArgs, registry: &Registry) -> Result<(), HarnessError> {
    let graph = match (args.graph, args.gen) {
        (Some(path), None) => GraphSource::File(path),
        (None, Some(spec)) => GraphSource::Generated(spec),
        _ => return Err(HarnessError::Config("exactly one of --graph or --gen is required".into())),
    };
    let mut cfg = ExperimentConfig::new(graph, &args.protocol);
    args.common.apply(&mut cfg);
    cfg.p = args.p;
    cfg.k = args.k;
    cfg.out = args.out;
    cfg.export_schedule = args.export_schedule;
    cfg.trace = match args.trace {
        Trace::Summary => TraceLevel::Summary,
        Trace::Events => TraceLevel::Events,
    };
    if args.export_only {
        let path = cfg.export_schedule.clone().expect("enforced by clap");
        return export_schedule(&cfg, registry, &path);
    }
    let output = run_experiment(&cfg, registry)?;
    let ok = output.rows.iter().filter(|r| r.success).count();
    eprintln!("{ok}/{} trials completed", output.rows.len());
    Ok(())
}

fn run_sweep(args: SweepArgs, registry: &Registry) -> Result<(), HarnessError> {
    let mut graphs: Vec<GraphSource> = args.graphs.into_iter().map(GraphSource::File).collect();
    graphs.extend(args.gens.into_iter().map(GraphSource::Generated));
    let first = graphs.first().cloned().ok_or_else(|| HarnessError::Config("no graphs given".into()))?;
    let mut base = ExperimentConfig::new(first, &args.protocols[0]);
    args.common.apply(&mut base);
    let grid = SweepGrid {
        base,
        graphs,
        protocols: args.protocols,
        ps: args.ps,
        ks: args.ks,
    };
    let cells = sweep(&grid, registry)?;
    match &args.out {
        Some(path) => {
            let file = std::fs::File::create(path).map_err(|e| io_err(path, e))?;
            write_sweep(std::io::BufWriter::new(file), &cells).map_err(|e| io_err(path, e.into()))
        }
        None => write_sweep(std::io::stdout().lock(), &cells).map_err(|e| io_err(&PathBuf::from("<stdout>"), e.into())),
    }
}

fn io_err(path: &std::path::Path, source: std::io::Error) -> HarnessError {
    HarnessError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let registry = Registry::default();
    let result = match cli.command {
        Some(Command::Sweep(args)) => run_sweep(*args, &registry),
        Some(Command::Protocols) => {
            for name in registry.names() {
                println!("{name}");
            }
            Ok(())
        }
        None => run(cli.run, &registry),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
