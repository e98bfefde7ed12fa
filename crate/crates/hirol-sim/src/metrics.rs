//! Run accounting and report emission.
//!
//! Every data packet ends in exactly one of three states — delivered,
//! dropped, or still in flight when the clock stops — and the books must
//! balance. Delay decomposition per hop is integer-exact against the
//! clock difference.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use crate::link::{Packet, PacketKind};
use crate::time::SimTime;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum DropCause {
    /// No route and the protocol does not buffer.
    NoRoute,
    /// Per-hop retries exhausted.
    LinkFailed,
    /// Transmit queue residence cap exceeded.
    QueueOverflow,
    /// Discovery buffer overflowed.
    BufferOverflow,
    /// Discovery retries exhausted.
    DiscoveryFailed,
    /// Sat in a discovery buffer past the timeout.
    BufferTimeout,
    /// Hop-count guard tripped.
    RoutingLoop,
}

impl DropCause {
    pub const ALL: [DropCause; 7] = [
        DropCause::NoRoute,
        DropCause::LinkFailed,
        DropCause::QueueOverflow,
        DropCause::BufferOverflow,
        DropCause::DiscoveryFailed,
        DropCause::BufferTimeout,
        DropCause::RoutingLoop,
    ];

    pub fn label(self) -> &'static str {
        match self {
            DropCause::NoRoute => "no_route",
            DropCause::LinkFailed => "link_failed",
            DropCause::QueueOverflow => "queue_overflow",
            DropCause::BufferOverflow => "buffer_overflow",
            DropCause::DiscoveryFailed => "discovery_failed",
            DropCause::BufferTimeout => "buffer_timeout",
            DropCause::RoutingLoop => "routing_loop",
        }
    }
}

/// Message-count batches evaluated for the overhead comparison, and the
/// steady-state warmup (in resolved messages) that precedes them.
pub const OVERHEAD_BATCHES: [u64; 6] = [10, 20, 30, 40, 50, 60];
pub const OVERHEAD_WARMUP: usize = 20;

/// Mutable counters owned by a run.
#[derive(Clone, Debug)]
pub struct Metrics {
    pub sent: u64,
    pub delivered: u64,
    pub drops: BTreeMap<DropCause, u64>,
    /// Data packets created but not yet terminal.
    pub live: u64,
    delay_sum: SimTime,
    /// Σ of per-hop processing charged to control packets, with the
    /// reception timestamps (overhead windows are computed post-run).
    control_processing: Vec<SimTime>,
    pub control_sent: BTreeMap<PacketKind, u64>,
    pub control_bytes: BTreeMap<PacketKind, u64>,
    pub data_bytes_sent: u64,
    pub per_flow: Vec<FlowStats>,
    pub last_data_terminal: SimTime,
    /// When each data packet reached a terminal state, in order.
    data_terminals: Vec<SimTime>,
    /// Aggregate per-hop components over delivered packets.
    pub delay_parts: DelayParts,
    processing_delay: SimTime,
}

/// Sum of per-hop components across all delivered data packets.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct DelayParts {
    pub buffer: f64,
    pub retrans: f64,
    pub transmit: f64,
    pub processing: f64,
    pub hops: u64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct FlowStats {
    pub src: usize,
    pub dst: usize,
    pub sent: u64,
    pub delivered: u64,
    pub delay_sum_micros: u64,
}

impl Metrics {
    pub fn new(flows: usize, processing_delay: SimTime) -> Self {
        Metrics {
            sent: 0,
            delivered: 0,
            drops: BTreeMap::new(),
            live: 0,
            delay_sum: SimTime::ZERO,
            control_processing: Vec::new(),
            control_sent: BTreeMap::new(),
            control_bytes: BTreeMap::new(),
            data_bytes_sent: 0,
            per_flow: vec![FlowStats::default(); flows],
            last_data_terminal: SimTime::ZERO,
            data_terminals: Vec::new(),
            delay_parts: DelayParts::default(),
            processing_delay,
        }
    }

    pub fn on_data_created(&mut self, flow: usize) {
        self.sent += 1;
        self.live += 1;
        self.per_flow[flow].sent += 1;
    }

    /// Record a delivery; `flow` indexes the per-flow table. The per-hop
    /// component sum must reproduce the clock difference exactly.
    pub fn on_data_delivered(&mut self, pkt: &Packet, flow: usize, now: SimTime) {
        let decomposed = pkt.delay();
        let wall = now - pkt.created_at;
        assert!(
            decomposed == wall,
            "delay components {:?} disagree with clock span {:?} for packet {}",
            decomposed,
            wall,
            pkt.id
        );
        self.delivered += 1;
        self.live -= 1;
        self.delay_sum += decomposed;
        for hop in &pkt.hops {
            self.delay_parts.buffer += hop.buffer.as_secs();
            self.delay_parts.retrans += hop.retrans.as_secs();
            self.delay_parts.transmit += hop.transmit.as_secs();
            self.delay_parts.processing += hop.processing.as_secs();
            self.delay_parts.hops += 1;
        }
        self.per_flow[flow].delivered += 1;
        self.per_flow[flow].delay_sum_micros += decomposed.as_micros();
        self.last_data_terminal = self.last_data_terminal.max(now);
        self.data_terminals.push(now);
    }

    pub fn on_data_dropped(&mut self, cause: DropCause, now: SimTime) {
        *self.drops.entry(cause).or_insert(0) += 1;
        self.live -= 1;
        self.last_data_terminal = self.last_data_terminal.max(now);
        self.data_terminals.push(now);
    }

    pub fn on_transmit(&mut self, kind: PacketKind, bytes: usize) {
        if kind == PacketKind::Data {
            self.data_bytes_sent += bytes as u64;
        } else {
            *self.control_sent.entry(kind).or_insert(0) += 1;
            *self.control_bytes.entry(kind).or_insert(0) += bytes as u64;
        }
    }

    pub fn on_control_processed(&mut self, now: SimTime) {
        self.control_processing.push(now);
    }

    pub fn dropped_total(&self) -> u64 {
        self.drops.values().sum()
    }

    /// Control processing time, in milliseconds, spent inside `[from, to]`.
    pub fn control_processing_ms(&self, from: SimTime, to: SimTime) -> f64 {
        let count = self
            .control_processing
            .iter()
            .filter(|&&t| t >= from && t <= to)
            .count();
        count as f64 * self.processing_delay.as_secs() * 1e3
    }

    /// Steady-state batch overhead: control processing time charged while
    /// the run resolved data messages `warmup+1 ..= warmup+batch`. The
    /// warmup excludes cold-start discovery transients so batches measure
    /// marginal, not startup, cost. Returns `None` when the run resolved
    /// too few messages.
    pub fn batch_overhead_ms(&self, warmup: usize, batch: usize) -> Option<f64> {
        let mut terminals = self.data_terminals.clone();
        terminals.sort_unstable();
        if terminals.len() < warmup + batch || warmup == 0 {
            return None;
        }
        let from = terminals[warmup - 1];
        let to = terminals[warmup + batch - 1];
        Some(self.control_processing_ms(from, to))
    }

    /// Freeze the counters into an immutable report. Asserts packet
    /// conservation: sent = delivered + dropped + in flight.
    pub fn finalize(self, sim_time: f64, packet_size: usize, traffic_start: f64) -> MetricsReport {
        let dropped = self.dropped_total();
        assert_eq!(
            self.sent,
            self.delivered + dropped + self.live,
            "packet conservation violated: sent {} != delivered {} + dropped {} + live {}",
            self.sent,
            self.delivered,
            dropped,
            self.live
        );
        let (pdr_value, pdr_vacuous) = pdr(self.delivered, self.sent);
        // Control processing charged to the data window: from first send
        // until the last data packet resolved.
        let overhead_ms = if self.sent == 0 {
            0.0
        } else {
            self.control_processing_ms(SimTime::from_secs(traffic_start), self.last_data_terminal)
        };
        let batch_overheads = OVERHEAD_BATCHES
            .iter()
            .map(|&b| self.batch_overhead_ms(OVERHEAD_WARMUP, b as usize))
            .collect();
        MetricsReport {
            sent: self.sent,
            delivered: self.delivered,
            dropped,
            in_flight_at_end: self.live,
            drops_by_cause: self.drops,
            pdr: pdr_value,
            pdr_vacuous,
            mean_delay: if self.delivered == 0 {
                0.0
            } else {
                self.delay_sum.as_secs() / self.delivered as f64
            },
            throughput_bps: throughput(self.delivered, packet_size, sim_time, 1.0).unwrap(),
            overhead_ms,
            batch_overheads,
            delay_parts: self.delay_parts,
            control_messages: self.control_sent,
            control_bytes: self.control_bytes,
            data_bytes_sent: self.data_bytes_sent,
            per_flow: self.per_flow,
        }
    }
}

/// Final, immutable per-run results.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricsReport {
    pub sent: u64,
    pub delivered: u64,
    pub dropped: u64,
    pub in_flight_at_end: u64,
    pub drops_by_cause: BTreeMap<DropCause, u64>,
    pub pdr: f64,
    /// True when no traffic was sent and the ratio defaulted to 1.
    pub pdr_vacuous: bool,
    /// Seconds, over delivered data packets.
    pub mean_delay: f64,
    pub throughput_bps: f64,
    /// Total control processing time over the run, ms.
    pub overhead_ms: f64,
    /// Steady-state control cost per message batch (see
    /// `OVERHEAD_BATCHES`); `None` when the run was too short.
    pub batch_overheads: Vec<Option<f64>>,
    pub delay_parts: DelayParts,
    pub control_messages: BTreeMap<PacketKind, u64>,
    pub control_bytes: BTreeMap<PacketKind, u64>,
    pub data_bytes_sent: u64,
    pub per_flow: Vec<FlowStats>,
}

impl MetricsReport {
    /// Control share of all bytes on the air.
    pub fn overhead_byte_ratio(&self) -> f64 {
        let control: u64 = self.control_bytes.values().sum();
        let total = control + self.data_bytes_sent;
        if total == 0 {
            0.0
        } else {
            control as f64 / total as f64
        }
    }
}

/// Delivery ratio with the no-traffic convention: 0 sent is vacuous
/// success, flagged. More delivered than sent is a conservation bug.
pub fn pdr(delivered: u64, sent: u64) -> (f64, bool) {
    assert!(
        delivered <= sent,
        "delivered {delivered} exceeds sent {sent}"
    );
    if sent == 0 {
        (1.0, true)
    } else {
        (delivered as f64 / sent as f64, false)
    }
}

/// Mean data rate: `n * size * 8 * scale / elapsed` bits per second.
/// `scale` defaults to 1; pass the network bandwidth to get the raw
/// bandwidth-weighted product instead.
pub fn throughput(
    n_delivered: u64,
    packet_size: usize,
    elapsed_secs: f64,
    scale: f64,
) -> Result<f64, MetricsError> {
    if elapsed_secs <= 0.0 {
        return Err(MetricsError::NonPositiveElapsed(elapsed_secs));
    }
    if scale <= 0.0 {
        return Err(MetricsError::NonPositiveScale(scale));
    }
    Ok(n_delivered as f64 * packet_size as f64 * 8.0 * scale / elapsed_secs)
}

/// Sum of per-hop components for a delivered packet, in seconds.
pub fn end_to_end_delay(pkt: &Packet) -> f64 {
    pkt.delay().as_secs()
}

#[derive(Debug, Clone, thiserror::Error)]
pub enum MetricsError {
    #[error("elapsed time must be positive, got {0}")]
    NonPositiveElapsed(f64),
    #[error("bandwidth scale must be positive, got {0}")]
    NonPositiveScale(f64),
    #[error("failed to write {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::sync::Arc<std::io::Error>,
    },
}

/// One row of a comparison table: the leading key (speed or batch size)
/// and one value per protocol column.
#[derive(Clone, Debug, PartialEq)]
pub struct TableRow {
    pub key: f64,
    pub values: Vec<f64>,
}

/// Comparison table in the standard layout: `key_header` plus one column
/// per protocol, closed by an average row.
#[derive(Clone, Debug, PartialEq)]
pub struct ComparisonTable {
    pub key_header: String,
    pub columns: Vec<String>,
    pub rows: Vec<TableRow>,
    pub average_label: String,
}

impl ComparisonTable {
    pub fn averages(&self) -> Vec<f64> {
        if self.rows.is_empty() {
            return vec![0.0; self.columns.len()];
        }
        let mut sums = vec![0.0; self.columns.len()];
        for row in &self.rows {
            for (s, v) in sums.iter_mut().zip(&row.values) {
                *s += v;
            }
        }
        sums.iter().map(|s| s / self.rows.len() as f64).collect()
    }

    /// Comma-separated form: header, data rows, average row. Floats use
    /// the shortest round-trip representation, so parsing the file
    /// reproduces the values bit-for-bit.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str(&self.key_header);
        for c in &self.columns {
            out.push(',');
            out.push_str(c);
        }
        out.push('\n');
        for row in &self.rows {
            out.push_str(&format!("{}", row.key));
            for v in &row.values {
                out.push_str(&format!(",{v}"));
            }
            out.push('\n');
        }
        out.push_str(&self.average_label);
        for v in self.averages() {
            out.push_str(&format!(",{v}"));
        }
        out.push('\n');
        out
    }

    /// Parse a table previously written by `to_csv`.
    pub fn from_csv(text: &str) -> Option<ComparisonTable> {
        let mut lines = text.lines();
        let header: Vec<&str> = lines.next()?.split(',').collect();
        let mut rows = Vec::new();
        let mut average_label = String::new();
        for line in lines {
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != header.len() {
                return None;
            }
            match fields[0].parse::<f64>() {
                Ok(key) => rows.push(TableRow {
                    key,
                    values: fields[1..].iter().map(|f| f.parse().ok()).collect::<Option<_>>()?,
                }),
                Err(_) => {
                    average_label = fields[0].to_string();
                }
            }
        }
        Some(ComparisonTable {
            key_header: header[0].to_string(),
            columns: header[1..].iter().map(|s| s.to_string()).collect(),
            rows,
            average_label,
        })
    }

    pub fn write_to(&self, path: &Path) -> Result<(), MetricsError> {
        let io_err = |e: std::io::Error| MetricsError::Io {
            path: path.display().to_string(),
            source: std::sync::Arc::new(e),
        };
        let mut file = std::fs::File::create(path).map_err(io_err)?;
        file.write_all(self.to_csv().as_bytes()).map_err(io_err)
    }

    /// Plain console rendering mirroring the CSV layout.
    pub fn render(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("{:<14}", self.key_header));
        for c in &self.columns {
            out.push_str(&format!("{c:>12}"));
        }
        out.push('\n');
        for row in &self.rows {
            out.push_str(&format!("{:<14}", row.key));
            for v in &row.values {
                out.push_str(&format!("{v:>12.4}"));
            }
            out.push('\n');
        }
        out.push_str(&format!("{:<14}", self.average_label));
        for v in self.averages() {
            out.push_str(&format!("{v:>12.4}"));
        }
        out.push('\n');
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::link::{HopTiming, PacketBody};

    #[test]
    fn throughput_zero_packets_is_zero() {
        assert_eq!(throughput(0, 256, 10.0, 1.0).unwrap(), 0.0);
    }

    // 1000 packets of 256 bytes over 10 s: 1000 * 256 * 8 / 10.
    #[test]
    fn throughput_hand_case() {
        assert_eq!(throughput(1000, 256, 10.0, 1.0).unwrap(), 204_800.0);
    }

    #[test]
    fn throughput_halves_when_time_doubles() {
        let a = throughput(500, 128, 5.0, 1.0).unwrap();
        let b = throughput(500, 128, 10.0, 1.0).unwrap();
        assert_eq!(a, 2.0 * b);
    }

    #[test]
    fn throughput_rejects_bad_elapsed() {
        assert!(throughput(10, 256, 0.0, 1.0).is_err());
        assert!(throughput(10, 256, -1.0, 1.0).is_err());
    }

    #[test]
    fn pdr_ratio_and_conventions() {
        assert_eq!(pdr(98, 100), (0.98, false));
        assert_eq!(pdr(0, 0), (1.0, true));
        assert_eq!(pdr(0, 100), (0.0, false));
    }

    #[test]
    #[should_panic(expected = "exceeds sent")]
    fn pdr_rejects_conservation_bug() {
        pdr(5, 3);
    }

    fn delivered_packet(hops: Vec<HopTiming>) -> Packet {
        Packet {
            id: 1,
            src: 0,
            dst: 1,
            body: PacketBody::Data { flow: 0 },
            route: vec![],
            salvage_count: 0,
            prev_hop: 0,
            payload_size: 256,
            created_at: SimTime::ZERO,
            hops,
        }
    }

    // 1 hop: T=2 ms, R=0, B=1 ms, P=0.5 ms -> 3.5 ms.
    #[test]
    fn delay_sums_one_hop() {
        let pkt = delivered_packet(vec![HopTiming {
            buffer: SimTime::from_micros(1000),
            retrans: SimTime::ZERO,
            transmit: SimTime::from_micros(2000),
            processing: SimTime::from_micros(500),
        }]);
        assert!((end_to_end_delay(&pkt) - 0.0035).abs() < 1e-12);
    }

    #[test]
    fn delay_is_additive_over_hops() {
        let hop = HopTiming {
            buffer: SimTime::from_micros(1000),
            retrans: SimTime::ZERO,
            transmit: SimTime::from_micros(2000),
            processing: SimTime::from_micros(500),
        };
        let pkt = delivered_packet(vec![hop, hop]);
        assert!((end_to_end_delay(&pkt) - 0.007).abs() < 1e-12);
    }

    #[test]
    fn delivery_requires_exact_decomposition() {
        let mut m = Metrics::new(1, SimTime::from_micros(1000));
        m.on_data_created(0);
        let pkt = delivered_packet(vec![HopTiming {
            buffer: SimTime::ZERO,
            retrans: SimTime::ZERO,
            transmit: SimTime::from_micros(2048),
            processing: SimTime::from_micros(1000),
        }]);
        m.on_data_delivered(&pkt, 0, SimTime::from_micros(3048));
        assert_eq!(m.delivered, 1);
    }

    #[test]
    #[should_panic(expected = "disagree with clock span")]
    fn leaky_decomposition_is_rejected() {
        let mut m = Metrics::new(1, SimTime::from_micros(1000));
        m.on_data_created(0);
        let pkt = delivered_packet(vec![]);
        m.on_data_delivered(&pkt, 0, SimTime::from_micros(500));
    }

    #[test]
    fn conservation_holds_in_report() {
        let mut m = Metrics::new(1, SimTime::from_micros(1000));
        for _ in 0..5 {
            m.on_data_created(0);
        }
        m.on_data_dropped(DropCause::NoRoute, SimTime::from_secs(1.0));
        m.on_data_dropped(DropCause::LinkFailed, SimTime::from_secs(2.0));
        let report = m.finalize(10.0, 256, 0.0);
        assert_eq!(report.sent, 5);
        assert_eq!(report.dropped, 2);
        assert_eq!(report.in_flight_at_end, 3);
        assert_eq!(
            report.sent,
            report.delivered + report.dropped + report.in_flight_at_end
        );
    }

    #[test]
    fn zero_control_packets_means_zero_overhead() {
        let m = Metrics::new(0, SimTime::from_micros(1000));
        assert_eq!(m.control_processing_ms(SimTime::ZERO, SimTime::MAX), 0.0);
    }

    #[test]
    fn overhead_counts_only_the_window() {
        let mut m = Metrics::new(0, SimTime::from_micros(1000));
        m.on_control_processed(SimTime::from_secs(1.0));
        m.on_control_processed(SimTime::from_secs(2.0));
        m.on_control_processed(SimTime::from_secs(9.0));
        let ms = m.control_processing_ms(SimTime::from_secs(1.5), SimTime::from_secs(8.0));
        assert_eq!(ms, 1.0);
    }

    fn sample_table() -> ComparisonTable {
        ComparisonTable {
            key_header: "Speed".into(),
            columns: vec!["Proposed".into(), "OLSR".into(), "DSR".into()],
            rows: vec![
                TableRow { key: 5.0, values: vec![0.98, 0.975, 0.975] },
                TableRow { key: 10.0, values: vec![0.975, 0.965, 0.96] },
            ],
            average_label: "Average PDR".into(),
        }
    }

    #[test]
    fn csv_round_trip_is_bit_exact() {
        let table = sample_table();
        let text = table.to_csv();
        let back = ComparisonTable::from_csv(&text).unwrap();
        assert_eq!(table, back);
        assert_eq!(text, back.to_csv());
    }

    #[test]
    fn csv_layout_matches_expected_shape() {
        let text = sample_table().to_csv();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "Speed,Proposed,OLSR,DSR");
        assert_eq!(lines[1], "5,0.98,0.975,0.975");
        assert!(lines[3].starts_with("Average PDR,"));
    }

    #[test]
    fn single_row_average_equals_the_row() {
        let table = ComparisonTable {
            key_header: "Speed".into(),
            columns: vec!["Proposed".into()],
            rows: vec![TableRow { key: 20.0, values: vec![0.9] }],
            average_label: "Average PDR".into(),
        };
        assert_eq!(table.averages(), vec![0.9]);
    }

    #[test]
    fn unwritable_path_names_the_file() {
        let table = sample_table();
        let err = table
            .write_to(Path::new("/nonexistent-dir/pdr.csv"))
            .unwrap_err();
        assert!(err.to_string().contains("/nonexistent-dir/pdr.csv"));
    }
}
