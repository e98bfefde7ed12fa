//! Experiment harness: speed sweeps across protocols and seeds, the
//! message-count overhead experiment, aggregation into comparison
//! tables, and CSV emission.
//!
//! Cells are independent runs and execute in parallel; results are
//! collected in declaration order, so repeated sweeps emit byte-identical
//! files.

use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::ann::Mlp;
use crate::engine::{self, RunOutput};
use crate::metrics::{ComparisonTable, MetricsError, MetricsReport, TableRow};
use crate::scenario::{Protocol, Scenario, ScenarioError};
use crate::training;

#[derive(Clone, Debug)]
pub struct SweepSpec {
    pub base: Scenario,
    pub protocols: Vec<Protocol>,
    pub speeds: Vec<f64>,
    pub seeds: Vec<u64>,
    /// Message-count batches for the overhead experiment; empty skips it.
    pub overhead_batches: Vec<u64>,
    /// Pretrained classifier; hybrid cells train one on demand if absent.
    pub classifier: Option<Mlp>,
    pub out_dir: Option<PathBuf>,
}

impl Default for SweepSpec {
    fn default() -> Self {
        SweepSpec {
            base: Scenario::default(),
            protocols: Protocol::ALL.to_vec(),
            speeds: vec![5.0, 10.0, 15.0, 20.0, 25.0, 30.0, 35.0, 40.0],
            seeds: (1..=10).collect(),
            overhead_batches: vec![10, 20, 30, 40, 50, 60],
            classifier: None,
            out_dir: None,
        }
    }
}

impl SweepSpec {
    /// The alternative speed set from the reference parameter table.
    pub fn reference_speeds() -> Vec<f64> {
        vec![7.0, 12.0, 18.0, 22.0, 28.0, 32.0, 37.0]
    }
}

#[derive(Clone, Debug)]
pub struct CellResult {
    pub protocol: Protocol,
    pub speed: f64,
    pub seed: u64,
    pub report: MetricsReport,
    pub trace_hash: u64,
}

#[derive(Clone, Debug)]
pub struct OverheadCell {
    pub protocol: Protocol,
    pub seed: u64,
    /// (batch size, windowed control cost) pairs; `None` when the run
    /// resolved too few messages for that batch.
    pub per_batch: Vec<(u64, Option<f64>)>,
    pub control_to_data_ratio: f64,
}

#[derive(Clone, Debug)]
pub struct SweepResult {
    pub cells: Vec<CellResult>,
    pub overhead_cells: Vec<OverheadCell>,
    pub pdr: ComparisonTable,
    pub delay_ms: ComparisonTable,
    pub throughput: ComparisonTable,
    pub overhead: Option<ComparisonTable>,
    pub classifier_accuracy: Option<f64>,
}

#[derive(Debug, thiserror::Error)]
pub enum SweepError {
    #[error("sweep spec invalid: {0}")]
    Spec(String),
    #[error("run failed for {protocol} speed {speed} seed {seed}: {source}")]
    Run {
        protocol: &'static str,
        speed: f64,
        seed: u64,
        #[source]
        source: ScenarioError,
    },
    #[error(transparent)]
    Emit(#[from] MetricsError),
}

/// Scenario for one sweep cell.
pub fn cell_scenario(base: &Scenario, protocol: Protocol, speed: f64, seed: u64) -> Scenario {
    Scenario {
        protocol,
        speed,
        seed,
        ..base.clone()
    }
}

/// Scenario for the overhead experiment: a steady message stream over a
/// small flow set at a repair-heavy speed. One run yields every batch
/// size: the counters window control cost around consecutive groups of
/// resolved messages after a fixed warmup.
pub fn overhead_scenario(base: &Scenario, protocol: Protocol, seed: u64) -> Scenario {
    let flows = 10usize;
    let per_flow_rate = 1.0;
    let aggregate = flows as f64 * per_flow_rate;
    let needed = (crate::metrics::OVERHEAD_WARMUP as f64
        + *crate::metrics::OVERHEAD_BATCHES.last().unwrap() as f64)
        / aggregate;
    Scenario {
        protocol,
        seed,
        speed: 35.0,
        cbr_connections: Some(flows),
        cbr_rate: per_flow_rate,
        sim_time: base.traffic_start + needed + 25.0,
        ..base.clone()
    }
}

pub fn run_sweep(spec: &SweepSpec) -> Result<SweepResult, SweepError> {
    if spec.protocols.is_empty() {
        return Err(SweepError::Spec("no protocols selected".into()));
    }
    if spec.speeds.is_empty() {
        return Err(SweepError::Spec("no speeds selected".into()));
    }
    if spec.seeds.is_empty() {
        return Err(SweepError::Spec("no seeds selected".into()));
    }

    // A classifier is needed as soon as hybrid cells are in the plan.
    let mut classifier_accuracy = None;
    let classifier = match (&spec.classifier, spec.protocols.contains(&Protocol::Hirol)) {
        (Some(net), _) => Some(net.clone()),
        (None, true) => {
            let trained = training::train_default();
            classifier_accuracy = Some(trained.holdout_accuracy);
            Some(trained.net)
        }
        (None, false) => None,
    };

    let mut plan: Vec<(Protocol, f64, u64)> = Vec::new();
    for &protocol in &spec.protocols {
        for &speed in &spec.speeds {
            for &seed in &spec.seeds {
                plan.push((protocol, speed, seed));
            }
        }
    }
    let cells: Vec<CellResult> = plan
        .par_iter()
        .map(|&(protocol, speed, seed)| {
            let sc = cell_scenario(&spec.base, protocol, speed, seed);
            let out = run_cell(&sc, classifier.as_ref(), protocol, speed, seed)?;
            Ok(CellResult {
                protocol,
                speed,
                seed,
                report: out.metrics,
                trace_hash: out.trace_hash,
            })
        })
        .collect::<Result<_, SweepError>>()?;

    let mut overhead_plan: Vec<(Protocol, u64)> = Vec::new();
    if !spec.overhead_batches.is_empty() {
        for &protocol in &spec.protocols {
            for &seed in &spec.seeds {
                overhead_plan.push((protocol, seed));
            }
        }
    }
    let overhead_cells: Vec<OverheadCell> = overhead_plan
        .par_iter()
        .map(|&(protocol, seed)| {
            let sc = overhead_scenario(&spec.base, protocol, seed);
            let out = run_cell(&sc, classifier.as_ref(), protocol, sc.speed, seed)?;
            let mut per_batch = Vec::new();
            for (&batch, cost) in crate::metrics::OVERHEAD_BATCHES
                .iter()
                .zip(&out.metrics.batch_overheads)
            {
                if spec.overhead_batches.contains(&batch) {
                    per_batch.push((batch, *cost));
                }
            }
            Ok(OverheadCell {
                protocol,
                seed,
                per_batch,
                control_to_data_ratio: out.metrics.overhead_byte_ratio(),
            })
        })
        .collect::<Result<_, SweepError>>()?;

    let pdr = build_table(spec, &cells, "Speed", "Average PDR", |r| r.pdr);
    let delay_ms = build_delay_table(spec, &cells);
    let throughput = build_table(spec, &cells, "Speed", "Average Throughput", |r| {
        r.throughput_bps / 1e3
    });
    let overhead = (!spec.overhead_batches.is_empty())
        .then(|| build_overhead_table(spec, &overhead_cells));

    let result = SweepResult {
        cells,
        overhead_cells,
        pdr,
        delay_ms,
        throughput,
        overhead,
        classifier_accuracy,
    };
    if let Some(dir) = &spec.out_dir {
        emit_all(&result, dir)?;
    }
    Ok(result)
}

fn run_cell(
    sc: &Scenario,
    classifier: Option<&Mlp>,
    protocol: Protocol,
    speed: f64,
    seed: u64,
) -> Result<RunOutput, SweepError> {
    engine::run_with_classifier(sc, classifier).map_err(|source| SweepError::Run {
        protocol: protocol.name(),
        speed,
        seed,
        source,
    })
}

fn build_table(
    spec: &SweepSpec,
    cells: &[CellResult],
    key_header: &str,
    average_label: &str,
    metric: impl Fn(&MetricsReport) -> f64,
) -> ComparisonTable {
    let rows = spec
        .speeds
        .iter()
        .map(|&speed| {
            let values = spec
                .protocols
                .iter()
                .map(|&p| {
                    let matching: Vec<f64> = cells
                        .iter()
                        .filter(|c| c.protocol == p && c.speed == speed)
                        .map(|c| metric(&c.report))
                        .collect();
                    mean(&matching)
                })
                .collect();
            TableRow { key: speed, values }
        })
        .collect();
    ComparisonTable {
        key_header: key_header.to_string(),
        columns: spec.protocols.iter().map(|p| p.column().to_string()).collect(),
        rows,
        average_label: average_label.to_string(),
    }
}

/// Delay aggregates weighted by deliveries so empty runs cannot drag the
/// mean toward zero. Reported in milliseconds.
fn build_delay_table(spec: &SweepSpec, cells: &[CellResult]) -> ComparisonTable {
    let rows = spec
        .speeds
        .iter()
        .map(|&speed| {
            let values = spec
                .protocols
                .iter()
                .map(|&p| {
                    let (mut delay_sum, mut delivered) = (0.0, 0u64);
                    for c in cells.iter().filter(|c| c.protocol == p && c.speed == speed) {
                        delay_sum += c.report.mean_delay * c.report.delivered as f64;
                        delivered += c.report.delivered;
                    }
                    if delivered == 0 {
                        0.0
                    } else {
                        delay_sum / delivered as f64 * 1e3
                    }
                })
                .collect();
            TableRow { key: speed, values }
        })
        .collect();
    ComparisonTable {
        key_header: "Speed".into(),
        columns: spec.protocols.iter().map(|p| p.column().to_string()).collect(),
        rows,
        average_label: "Average Delay".into(),
    }
}

fn build_overhead_table(spec: &SweepSpec, cells: &[OverheadCell]) -> ComparisonTable {
    let rows = spec
        .overhead_batches
        .iter()
        .map(|&batch| {
            let values = spec
                .protocols
                .iter()
                .map(|&p| {
                    let matching: Vec<f64> = cells
                        .iter()
                        .filter(|c| c.protocol == p)
                        .flat_map(|c| {
                            c.per_batch
                                .iter()
                                .filter(|(b, _)| *b == batch)
                                .filter_map(|(_, v)| *v)
                        })
                        .collect();
                    mean(&matching)
                })
                .collect();
            TableRow { key: batch as f64, values }
        })
        .collect();
    ComparisonTable {
        key_header: "Messages".into(),
        columns: spec.protocols.iter().map(|p| p.column().to_string()).collect(),
        rows,
        average_label: "Average Overhead".into(),
    }
}

fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        0.0
    } else {
        values.iter().sum::<f64>() / values.len() as f64
    }
}

/// Write the four comparison CSVs plus the seed-level raw table.
pub fn emit_all(result: &SweepResult, dir: &Path) -> Result<(), MetricsError> {
    let io_err = |path: &Path, e: std::io::Error| MetricsError::Io {
        path: path.display().to_string(),
        source: std::sync::Arc::new(e),
    };
    std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    result.pdr.write_to(&dir.join("pdr.csv"))?;
    result.delay_ms.write_to(&dir.join("delay.csv"))?;
    result.throughput.write_to(&dir.join("throughput.csv"))?;
    if let Some(overhead) = &result.overhead {
        overhead.write_to(&dir.join("overhead.csv"))?;
    }

    let mut raw = String::from(
        "protocol,speed,seed,sent,delivered,dropped,in_flight,pdr,mean_delay_ms,throughput_bps,overhead_ms,control_messages,control_bytes,trace_hash\n",
    );
    for c in &result.cells {
        let control_messages: u64 = c.report.control_messages.values().sum();
        let control_bytes: u64 = c.report.control_bytes.values().sum();
        raw.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{:016x}\n",
            c.protocol.name(),
            c.speed,
            c.seed,
            c.report.sent,
            c.report.delivered,
            c.report.dropped,
            c.report.in_flight_at_end,
            c.report.pdr,
            c.report.mean_delay * 1e3,
            c.report.throughput_bps,
            c.report.overhead_ms,
            control_messages,
            control_bytes,
            c.trace_hash,
        ));
    }
    let path = dir.join("runs.csv");
    std::fs::write(&path, raw).map_err(|e| io_err(&path, e))?;
    Ok(())
}

/// Console summary in the familiar table shape.
pub fn render_summary(result: &SweepResult) -> String {
    let mut out = String::new();
    out.push_str("Packet delivery ratio by speed\n");
    out.push_str(&result.pdr.render());
    out.push_str("\nEnd-to-end delay (ms) by speed\n");
    out.push_str(&result.delay_ms.render());
    out.push_str("\nThroughput (kbit/s) by speed\n");
    out.push_str(&result.throughput.render());
    if let Some(overhead) = &result.overhead {
        out.push_str("\nControl overhead (ms) by messages sent\n");
        out.push_str(&overhead.render());
    }
    if let Some(acc) = result.classifier_accuracy {
        out.push_str(&format!("\nlink classifier holdout accuracy: {acc:.3}\n"));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_dimensions_are_rejected() {
        let spec = SweepSpec {
            protocols: vec![],
            ..SweepSpec::default()
        };
        assert!(matches!(run_sweep(&spec), Err(SweepError::Spec(_))));
    }

    #[test]
    fn tiny_sweep_produces_tables() {
        let mut base = Scenario::default();
        base.sim_time = 30.0;
        base.node_count = 8;
        base.cbr_connections = Some(4);
        base.traffic_start = 10.0;
        let spec = SweepSpec {
            base,
            protocols: vec![Protocol::Olsr, Protocol::Dsr],
            speeds: vec![10.0],
            seeds: vec![1],
            overhead_batches: vec![],
            classifier: None,
            out_dir: None,
        };
        let result = run_sweep(&spec).unwrap();
        assert_eq!(result.cells.len(), 2);
        assert_eq!(result.pdr.rows.len(), 1);
        assert_eq!(result.pdr.columns, vec!["OLSR", "DSR"]);
        assert!(result.overhead.is_none());
    }

    #[test]
    fn sweep_is_reproducible() {
        let mut base = Scenario::default();
        base.sim_time = 25.0;
        base.node_count = 8;
        base.cbr_connections = Some(3);
        base.traffic_start = 8.0;
        let spec = SweepSpec {
            base,
            protocols: vec![Protocol::Olsr],
            speeds: vec![10.0, 20.0],
            seeds: vec![1, 2],
            overhead_batches: vec![],
            classifier: None,
            out_dir: None,
        };
        let a = run_sweep(&spec).unwrap();
        let b = run_sweep(&spec).unwrap();
        assert_eq!(a.pdr.to_csv(), b.pdr.to_csv());
        assert_eq!(a.delay_ms.to_csv(), b.delay_ms.to_csv());
        let hashes_a: Vec<u64> = a.cells.iter().map(|c| c.trace_hash).collect();
        let hashes_b: Vec<u64> = b.cells.iter().map(|c| c.trace_hash).collect();
        assert_eq!(hashes_a, hashes_b);
    }
}
