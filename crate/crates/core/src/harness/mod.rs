//! Experiment runner: graph acquisition, SGST construction, Monte Carlo
//! trials and CSV/JSON output.

mod sweep;

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use thiserror::Error;

use crate::graph::{diameter, generate_graph, parse_graph, GeneratorSpec, GraphError, MeshGraph, NodeId};
use crate::protocols::{Env, ProtocolError, ProtocolParams, Registry, Schedule};
use crate::sgst::{build_sgst, Sgst, SgstError};
use crate::sim::{default_max_rounds, run_protocol, FaultMode, SimConfig, SimError, Trace, TraceLevel, EVENTS_HEADER};

pub use self::sweep::{sweep, write_sweep, CellSummary, SweepGrid, SWEEP_HEADER};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("construction failed: {0}")]
    Construction(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("simulation aborted: {0}")]
    Sim(#[from] SimError),
}

impl HarnessError {
    /// Process exit status for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => 2,
            HarnessError::Construction(_) | HarnessError::Sim(_) => 3,
            HarnessError::Io { .. } => 4,
        }
    }

    fn io(path: &Path, source: io::Error) -> Self {
        HarnessError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

impl From<ProtocolError> for HarnessError {
    fn from(e: ProtocolError) -> Self {
        HarnessError::Config(e.to_string())
    }
}

impl From<SgstError> for HarnessError {
    fn from(e: SgstError) -> Self {
        HarnessError::Construction(e.to_string())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum GraphSource {
    File(PathBuf),
    Generated(GeneratorSpec),
}

impl GraphSource {
    /// Loads or generates the graph; generators are seeded with `seed`.
    pub fn load(&self, seed: u64) -> Result<MeshGraph, HarnessError> {
        match self {
            GraphSource::File(path) => {
                let text = fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
                parse_graph(&text).map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))
            }
            GraphSource::Generated(spec) => generate_graph(spec, seed).map_err(|e| match e {
                GraphError::Infeasible { .. } => HarnessError::Construction(e.to_string()),
                other => HarnessError::Config(other.to_string()),
            }),
        }
    }

    pub fn label(&self) -> String {
        match self {
            GraphSource::File(p) => p.display().to_string(),
            GraphSource::Generated(s) => s.to_string(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub graph: GraphSource,
    pub source: NodeId,
    pub protocol: String,
    pub p: f64,
    pub delta: f64,
    pub x: Option<u32>,
    pub k: Option<usize>,
    pub trials: u64,
    pub seed: u64,
    pub max_rounds: Option<u64>,
    pub c_mult: u32,
    pub block_size: Option<u32>,
    pub fault_mode: FaultMode,
    pub strict_slots: bool,
    pub trace: TraceLevel,
    pub out: Option<PathBuf>,
    pub export_schedule: Option<PathBuf>,
    /// Adds a `wall_time_ms` column; off by default so output is
    /// reproducible byte for byte.
    pub timing: bool,
}

impl ExperimentConfig {
    pub fn new(graph: GraphSource, protocol: &str) -> Self {
        let sim = SimConfig::default();
        Self {
            graph,
            source: 0,
            protocol: protocol.to_string(),
            p: sim.p,
            delta: sim.delta,
            x: None,
            k: None,
            trials: 1,
            seed: 0,
            max_rounds: None,
            c_mult: sim.c_mult,
            block_size: None,
            fault_mode: sim.fault_mode,
            strict_slots: false,
            trace: TraceLevel::Summary,
            out: None,
            export_schedule: None,
            timing: false,
        }
    }

    pub fn validate(&self, registry: &Registry) -> Result<(), HarnessError> {
        registry.get(&self.protocol)?;
        if self.trials < 1 {
            return Err(HarnessError::Config("trials must be at least 1".into()));
        }
        match (self.protocol.as_str(), self.k) {
            ("multi", Some(0)) => return Err(HarnessError::Config("k must be at least 1".into())),
            ("multi", _) | (_, None) | (_, Some(1)) => {}
            (other, Some(k)) => {
                return Err(HarnessError::Config(format!(
                    "k = {k} is only meaningful with protocol multi, not {other}"
                )))
            }
        }
        if self.trace == TraceLevel::Events && self.out.is_none() {
            return Err(HarnessError::Config("--trace events needs --out".into()));
        }
        if self.max_rounds == Some(0) {
            return Err(HarnessError::Config("max rounds must be at least 1".into()));
        }
        self.sim_template(1).validate().map_err(|e| HarnessError::Config(e.to_string()))
    }

    pub fn k(&self) -> usize {
        self.k.unwrap_or(1)
    }

    /// Simulation settings with the given round budget, before trial ids.
    pub fn sim_template(&self, max_rounds: u64) -> SimConfig {
        SimConfig {
            p: self.p,
            delta: self.delta,
            x: self.x,
            c_mult: self.c_mult,
            block_size: self.block_size,
            seed: self.seed,
            max_rounds,
            trial_id: 0,
            fault_mode: self.fault_mode,
            strict_slots: self.strict_slots,
        }
    }
}

/// A graph with everything protocols need, built once and shared by all
/// trials.
#[derive(Clone, Debug)]
pub struct Workload {
    pub graph: MeshGraph,
    pub source: NodeId,
    pub diameter: usize,
    pub sgst: Option<Sgst>,
    pub params: ProtocolParams,
}

impl Workload {
    /// Computes the diameter and, if asked, the SGST.
    pub fn prepare(
        graph: MeshGraph,
        source: NodeId,
        needs_sgst: bool,
        sim: &SimConfig,
        k: usize,
    ) -> Result<Self, HarnessError> {
        let n = graph.node_count();
        if source >= n {
            return Err(HarnessError::Config(format!("source {source} is not a node of an {n}-node graph")));
        }
        let params = ProtocolParams::resolve(n, sim, k);
        let sgst = if needs_sgst {
            Some(build_sgst(&graph, source, params.x)?)
        } else {
            None
        };
        Ok(Self {
            diameter: diameter(&graph),
            graph,
            source,
            sgst,
            params,
        })
    }

    pub fn env(&self) -> Env<'_> {
        Env {
            graph: &self.graph,
            source: self.source,
            sgst: self.sgst.as_ref(),
            params: self.params,
        }
    }

    pub fn default_max_rounds(&self, multi: bool) -> u64 {
        default_max_rounds(self.graph.node_count(), self.diameter, multi.then_some(self.params.k))
    }
}

/// Runs `trials` independent trials, in parallel, returned in trial order
/// with their wall time in milliseconds.
pub fn run_trials(
    schedule: &dyn Schedule,
    graph: &MeshGraph,
    base: &SimConfig,
    trials: u64,
    level: TraceLevel,
) -> Result<Vec<(Trace, f64)>, SimError> {
    (0..trials)
        .into_par_iter()
        .map(|trial| {
            let cfg = base.with_trial(trial);
            let started = Instant::now();
            let mut proto = schedule.start(&cfg);
            let trace = run_protocol(graph, proto.as_mut(), &cfg, level)?;
            Ok((trace, started.elapsed().as_secs_f64() * 1000.0))
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct SummaryRow {
    pub trial: u64,
    pub protocol: String,
    pub n: usize,
    pub diameter: usize,
    pub p: f64,
    pub x: u32,
    pub k: usize,
    /// `-1` on failure.
    pub completion_round: i64,
    pub success: bool,
    pub wall_time_ms: Option<f64>,
}

pub const SUMMARY_HEADER: [&str; 9] = ["trial", "protocol", "n", "D", "p", "x", "k", "completion_round", "success"];

pub fn write_summary<W: Write>(w: W, rows: &[SummaryRow], timing: bool) -> csv::Result<()> {
    let mut out = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w);
    let mut header: Vec<&str> = SUMMARY_HEADER.to_vec();
    if timing {
        header.push("wall_time_ms");
    }
    out.write_record(&header)?;
    for r in rows {
        let mut rec = vec![
            r.trial.to_string(),
            r.protocol.clone(),
            r.n.to_string(),
            r.diameter.to_string(),
            r.p.to_string(),
            r.x.to_string(),
            r.k.to_string(),
            r.completion_round.to_string(),
            r.success.to_string(),
        ];
        if timing {
            rec.push(format!("{:.3}", r.wall_time_ms.unwrap_or(0.0)));
        }
        out.write_record(&rec)?;
    }
    out.flush()?;
    Ok(())
}

/// `<dir>/<stem>.events.csv` next to the summary file.
pub fn events_path(out: &Path) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "trace".into());
    out.with_file_name(format!("{stem}.events.csv"))
}

#[derive(Debug)]
pub struct ExperimentOutput {
    pub rows: Vec<SummaryRow>,
    pub traces: Vec<Trace>,
    pub workload: Workload,
}

/// Loads the graph, builds the SGST once, runs every trial and writes the
/// requested files.
pub fn run_experiment(cfg: &ExperimentConfig, registry: &Registry) -> Result<ExperimentOutput, HarnessError> {
    cfg.validate(registry)?;
    let strategy = registry.get(&cfg.protocol)?;
    let graph = cfg.graph.load(cfg.seed)?;
    let workload = Workload::prepare(graph, cfg.source, strategy.uses_sgst(), &cfg.sim_template(1), cfg.k())?;
    let schedule = strategy.prepare(&workload.env())?;
    if let Some(path) = &cfg.export_schedule {
        write_schedule(schedule.as_ref(), path)?;
    }
    let max_rounds = cfg.max_rounds.unwrap_or_else(|| workload.default_max_rounds(cfg.protocol == "multi"));
    let base = cfg.sim_template(max_rounds);
    let results = run_trials(schedule.as_ref(), &workload.graph, &base, cfg.trials, cfg.trace)?;
    drop(schedule);

    let n = workload.graph.node_count();
    let rows: Vec<SummaryRow> = results
        .iter()
        .map(|(t, ms)| SummaryRow {
            trial: t.trial,
            protocol: cfg.protocol.clone(),
            n,
            diameter: workload.diameter,
            p: cfg.p,
            x: workload.params.x,
            k: cfg.k(),
            completion_round: t.completion_round.map_or(-1, |c| c as i64),
            success: t.success,
            wall_time_ms: cfg.timing.then_some(*ms),
        })
        .collect();
    let traces: Vec<Trace> = results.into_iter().map(|(t, _)| t).collect();

    match &cfg.out {
        Some(path) => {
            let file = fs::File::create(path).map_err(|e| HarnessError::io(path, e))?;
            write_summary(io::BufWriter::new(file), &rows, cfg.timing).map_err(|e| HarnessError::io(path, e.into()))?;
            if cfg.trace == TraceLevel::Events {
                let ev = events_path(path);
                write_events(&ev, &traces).map_err(|e| HarnessError::io(&ev, e))?;
            }
        }
        None => {
            let stdout = io::stdout();
            write_summary(stdout.lock(), &rows, cfg.timing).map_err(|e| HarnessError::io(Path::new("<stdout>"), e.into()))?;
        }
    }
    Ok(ExperimentOutput { rows, traces, workload })
}

fn write_events(path: &Path, traces: &[Trace]) -> io::Result<()> {
    let mut w = io::BufWriter::new(fs::File::create(path)?);
    writeln!(w, "{EVENTS_HEADER}")?;
    for t in traces {
        t.write_events_csv(&mut w)?;
    }
    w.flush()
}

/// Writes the slot table or parameter block of `schedule` as JSON.
pub fn write_schedule(schedule: &dyn Schedule, path: &Path) -> Result<(), HarnessError> {
    let value = schedule.export().ok_or_else(|| {
        HarnessError::Config(format!("protocol {} has no schedule to export", schedule.name()))
    })?;
    let mut text = serde_json::to_string_pretty(&value).expect("JSON values serialize");
    text.push('\n');
    fs::write(path, text).map_err(|e| HarnessError::io(path, e))
}

/// Builds the schedule for `cfg` and writes it to `path` without running
/// any trials.
pub fn export_schedule(cfg: &ExperimentConfig, registry: &Registry, path: &Path) -> Result<(), HarnessError> {
    let strategy = registry.get(&cfg.protocol)?;
    if !matches!(cfg.protocol.as_str(), "faultless" | "robust") {
        return Err(HarnessError::Config(format!(
            "protocol {} has no schedule to export",
            cfg.protocol
        )));
    }
    let graph = cfg.graph.load(cfg.seed)?;
    let workload = Workload::prepare(graph, cfg.source, strategy.uses_sgst(), &cfg.sim_template(1), cfg.k())?;
    let schedule = strategy.prepare(&workload.env())?;
    write_schedule(schedule.as_ref(), path)
}
