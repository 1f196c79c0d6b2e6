use std::io::Write;

use super::{run_trials, ExperimentConfig, GraphSource, HarnessError, Workload};
use crate::protocols::{Env, ProtocolParams, Registry};
use crate::sim::TraceLevel;
use crate::stats::{mean, median, quantile};

/// Cartesian grid of experiment cells. `k` only varies for the multi
/// protocol; other protocols run once per `(graph, p)` with `k = 1`.
#[derive(Clone, Debug)]
pub struct SweepGrid {
    pub base: ExperimentConfig,
    pub graphs: Vec<GraphSource>,
    pub protocols: Vec<String>,
    pub ps: Vec<f64>,
    pub ks: Vec<usize>,
}

impl SweepGrid {
    fn ks_for(&self, protocol: &str) -> Vec<usize> {
        if protocol == "multi" && !self.ks.is_empty() {
            self.ks.clone()
        } else {
            vec![1]
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CellSummary {
    pub graph: String,
    pub protocol: String,
    pub n: usize,
    pub diameter: usize,
    pub p: f64,
    pub x: u32,
    pub k: usize,
    pub trials: u64,
    pub successes: u64,
    pub failure_rate: f64,
    /// Statistics over successful trials only.
    pub mean: Option<f64>,
    pub median: Option<f64>,
    pub p10: Option<u64>,
    pub p90: Option<u64>,
    pub max: Option<u64>,
    pub error: Option<String>,
}

impl CellSummary {
    fn failed(graph: String, protocol: &str, p: f64, k: usize, error: String) -> Self {
        Self {
            graph,
            protocol: protocol.to_string(),
            n: 0,
            diameter: 0,
            p,
            x: 0,
            k,
            trials: 0,
            successes: 0,
            failure_rate: 1.0,
            mean: None,
            median: None,
            p10: None,
            p90: None,
            max: None,
            error: Some(error),
        }
    }
}

pub const SWEEP_HEADER: [&str; 16] = [
    "graph", "protocol", "n", "D", "p", "x", "k", "trials", "successes", "failure_rate", "mean", "median",
    "p10", "p90", "max", "error",
];

/// Runs every cell of `grid`. A failing cell is recorded with its error and
/// the sweep moves on.
pub fn sweep(grid: &SweepGrid, registry: &Registry) -> Result<Vec<CellSummary>, HarnessError> {
    if grid.graphs.is_empty() || grid.protocols.is_empty() || grid.ps.is_empty() {
        return Err(HarnessError::Config("sweep grid is empty".into()));
    }
    for name in &grid.protocols {
        registry.get(name)?;
    }
    let needs_sgst = grid
        .protocols
        .iter()
        .any(|name| registry.get(name).map(|s| s.uses_sgst()).unwrap_or(false));
    let mut cells = Vec::new();
    for source in &grid.graphs {
        let label = source.label();
        let workload = source
            .load(grid.base.seed)
            .and_then(|g| Workload::prepare(g, grid.base.source, needs_sgst, &grid.base.sim_template(1), 1));
        for protocol in &grid.protocols {
            for &p in &grid.ps {
                for k in grid.ks_for(protocol) {
                    let cell = match &workload {
                        Ok(w) => run_cell(grid, registry, w, &label, protocol, p, k),
                        Err(e) => CellSummary::failed(label.clone(), protocol, p, k, e.to_string()),
                    };
                    cells.push(cell);
                }
            }
        }
    }
    Ok(cells)
}

fn run_cell(
    grid: &SweepGrid,
    registry: &Registry,
    w: &Workload,
    label: &str,
    protocol: &str,
    p: f64,
    k: usize,
) -> CellSummary {
    let mut cfg = grid.base.clone();
    cfg.protocol = protocol.to_string();
    cfg.p = p;
    cfg.k = Some(k);
    let fail = |e: String| CellSummary::failed(label.to_string(), protocol, p, k, e);
    if let Err(e) = cfg.validate(registry) {
        return fail(e.to_string());
    }
    let strategy = match registry.get(protocol) {
        Ok(s) => s,
        Err(e) => return fail(e.to_string()),
    };
    let env = Env {
        params: ProtocolParams { k, ..w.params },
        ..w.env()
    };
    let schedule = match strategy.prepare(&env) {
        Ok(s) => s,
        Err(e) => return fail(e.to_string()),
    };
    let multi = protocol == "multi";
    let max_rounds = cfg.max_rounds.unwrap_or_else(|| {
        crate::sim::default_max_rounds(w.graph.node_count(), w.diameter, multi.then_some(k))
    });
    let results = match run_trials(schedule.as_ref(), &w.graph, &cfg.sim_template(max_rounds), cfg.trials, TraceLevel::Summary) {
        Ok(r) => r,
        Err(e) => return fail(e.to_string()),
    };
    let done: Vec<u64> = results.iter().filter_map(|(t, _)| t.completion_round).collect();
    let successes = done.len() as u64;
    CellSummary {
        graph: label.to_string(),
        protocol: protocol.to_string(),
        n: w.graph.node_count(),
        diameter: w.diameter,
        p,
        x: w.params.x,
        k,
        trials: cfg.trials,
        successes,
        failure_rate: 1.0 - successes as f64 / cfg.trials as f64,
        mean: mean(&done),
        median: median(&done),
        p10: quantile(&done, 0.1),
        p90: quantile(&done, 0.9),
        max: done.iter().copied().max(),
        error: None,
    }
}

pub fn write_sweep<W: Write>(w: W, cells: &[CellSummary]) -> csv::Result<()> {
    fn opt<T: ToString>(v: Option<T>) -> String {
        v.map(|x| x.to_string()).unwrap_or_default()
    }
    let mut out = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w);
    out.write_record(SWEEP_HEADER)?;
    for c in cells {
        out.write_record([
            c.graph.clone(),
            c.protocol.clone(),
            c.n.to_string(),
            c.diameter.to_string(),
            c.p.to_string(),
            c.x.to_string(),
            c.k.to_string(),
            c.trials.to_string(),
            c.successes.to_string(),
            format!("{:.4}", c.failure_rate),
            opt(c.mean.map(|m| format!("{m:.2}"))),
            opt(c.median),
            opt(c.p10),
            opt(c.p90),
            opt(c.max),
            c.error.clone().unwrap_or_default(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(specs: &[&str], protocols: &[&str], ps: &[f64]) -> SweepGrid {
        let mut base = ExperimentConfig::new(GraphSource::Generated("path(2)".parse().unwrap()), "decay");
        base.trials = 5;
        SweepGrid {
            base,
            graphs: specs.iter().map(|s| GraphSource::Generated(s.parse().unwrap())).collect(),
            protocols: protocols.iter().map(|s| s.to_string()).collect(),
            ps: ps.to_vec(),
            ks: vec![],
        }
    }

    #[test]
    fn empty_grid_is_an_error() {
        assert!(matches!(
            sweep(&grid(&[], &["decay"], &[0.0]), &Registry::default()),
            Err(HarnessError::Config(_))
        ));
    }

    #[test]
    fn one_cell_per_combination() {
        let g = grid(&["path(16)", "path(32)"], &["faultless", "decay"], &[0.0, 0.1]);
        let cells = sweep(&g, &Registry::default()).unwrap();
        assert_eq!(cells.len(), 8);
        assert!(cells.iter().all(|c| c.error.is_none()));
        let mut out = Vec::new();
        write_sweep(&mut out, &cells).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(text.lines().count(), 9);
        assert!(text.contains("path(16),faultless,16,15,0,"));
    }

    #[test]
    fn failing_cell_does_not_stop_the_sweep() {
        let mut g = grid(&["rand(30,0.0001)", "path(8)"], &["decay"], &[0.0]);
        g.base.trials = 2;
        let cells = sweep(&g, &Registry::default()).unwrap();
        assert_eq!(cells.len(), 2);
        assert!(cells[0].error.is_some());
        assert!(cells[1].error.is_none());
    }
}
