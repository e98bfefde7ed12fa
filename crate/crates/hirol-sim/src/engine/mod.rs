//! The discrete-event run loop.
//!
//! One `Engine` owns everything a run touches: the clock and event
//! queue, node trajectories and radios, per-node protocol state, link
//! history, and the metric counters. A run is strictly single-threaded;
//! distinct runs are independent and may execute on separate threads.

mod hybrid;
mod proactive;
mod reactive;

use crate::ann::{LinkContext, Mlp};
use crate::event::{EventKind, EventQueue, Timer};
use crate::hirol::{HirolState, ZoneGrid};
use crate::link::{
    in_range, HopTiming, LinkHistory, NodeId, Packet, PacketBody, PacketKind, RadioState,
    Transmission,
};
use crate::metrics::{DropCause, Metrics, MetricsReport};
use crate::mobility::{uniform_point, NodeTrajectory, TrajectoryLog, Vec3};
use crate::olsr::OlsrState;
use crate::rng::Streams;
use crate::scenario::{MobilityModel, Protocol, Scenario, ScenarioError};
use crate::time::SimTime;

/// A captured link-feature sample, labeled after the run from the
/// recorded trajectories.
#[derive(Clone, Debug)]
pub struct ProbeSample {
    pub time: SimTime,
    pub from: NodeId,
    pub to: NodeId,
    pub features: crate::ann::LinkFeatures,
}

/// Everything a finished run reports.
#[derive(Clone, Debug)]
pub struct RunOutput {
    pub metrics: MetricsReport,
    /// Order-sensitive digest of the dispatched event sequence.
    pub trace_hash: u64,
    /// Ids of delivered data packets, in delivery order.
    pub delivered_ids: Vec<u64>,
    pub trajectories: TrajectoryLog,
    pub probes: Vec<ProbeSample>,
    pub hybrid: HybridStats,
}

/// Decision counters from the hybrid controller, for diagnostics.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct HybridStats {
    pub resolves: u64,
    pub proactive_routes: u64,
    pub cache_routes: u64,
    pub discoveries: u64,
    pub greedy_walks: u64,
    pub walk_sidesteps: u64,
    pub widen_stuck: u64,
    pub widen_origin: u64,
    pub widen_linkfail: u64,
    pub scoped_floods: u64,
    pub unscoped_floods: u64,
    pub filter_rejected_all: u64,
    pub salvages: u64,
    pub optimizer_runs: u64,
    pub maintenance_swaps: u64,
    pub maintenance_dead_first_hop: u64,
}

/// Run a scenario with no pretrained classifier. Hybrid runs then treat
/// every link as stable (no filtering).
pub fn run(scenario: &Scenario) -> Result<RunOutput, ScenarioError> {
    run_with_classifier(scenario, None)
}

/// Run a scenario, optionally giving hybrid nodes a shared pretrained
/// link classifier.
pub fn run_with_classifier(
    scenario: &Scenario,
    classifier: Option<&Mlp>,
) -> Result<RunOutput, ScenarioError> {
    scenario.validate()?;
    let mut engine = Engine::new(scenario.clone(), classifier.cloned());
    engine.init();
    engine.run_loop();
    Ok(engine.finish())
}

/// FNV-1a, fixed here so trace hashes are stable across platforms and
/// toolchain versions.
#[derive(Clone, Debug)]
pub(crate) struct TraceHash(u64);

impl TraceHash {
    fn new() -> Self {
        TraceHash(0xcbf2_9ce4_8422_2325)
    }

    fn absorb(&mut self, value: u64) {
        for byte in value.to_le_bytes() {
            self.0 ^= u64::from(byte);
            self.0 = self.0.wrapping_mul(0x0000_0100_0000_01B3);
        }
    }

    fn digest(&self) -> u64 {
        self.0
    }
}

pub(crate) enum ProtocolState {
    Olsr(OlsrState),
    Dsr(crate::dsr::DsrState),
    Hirol(HirolState),
}

pub(crate) struct Node {
    pub traj: NodeTrajectory,
    pub radio: RadioState,
    pub proto: ProtocolState,
}

#[derive(Clone, Debug)]
pub(crate) struct Flow {
    pub src: NodeId,
    pub dst: NodeId,
    pub sent: u64,
}

pub(crate) struct Engine {
    pub sc: Scenario,
    pub queue: EventQueue,
    pub nodes: Vec<Node>,
    pub flows: Vec<Flow>,
    pub streams: Streams,
    pub history: LinkHistory,
    pub metrics: Metrics,
    pub classifier: Option<Mlp>,
    pub grid: ZoneGrid,
    hasher: TraceHash,
    pub(crate) hybrid_stats: HybridStats,
    next_packet_id: u64,
    delivered_ids: Vec<u64>,
    trajectories: TrajectoryLog,
    probes: Vec<ProbeSample>,
    // Precomputed tick counts.
    proc_delay: SimTime,
    retry_backoff: SimTime,
    max_queue_delay: SimTime,
    sim_end: SimTime,
}

impl Engine {
    pub(crate) fn new(sc: Scenario, classifier: Option<Mlp>) -> Self {
        let streams = Streams::new(sc.seed);
        let grid = ZoneGrid::new(sc.zone_cell, sc.arena);
        let flow_count = sc.flow_count();
        let proc_delay = SimTime::from_secs(sc.processing_delay);
        Engine {
            queue: EventQueue::new(),
            nodes: Vec::new(),
            flows: Vec::with_capacity(flow_count),
            streams,
            history: LinkHistory::new(10.0),
            metrics: Metrics::new(flow_count, proc_delay),
            classifier,
            grid,
            hasher: TraceHash::new(),
            hybrid_stats: HybridStats::default(),
            next_packet_id: 0,
            delivered_ids: Vec::new(),
            trajectories: TrajectoryLog::new(sc.node_count),
            probes: Vec::new(),
            proc_delay,
            retry_backoff: SimTime::from_secs(sc.retry_backoff),
            max_queue_delay: SimTime::from_secs(sc.max_queue_delay),
            sim_end: SimTime::from_secs(sc.sim_time),
            sc,
        }
    }

    pub(crate) fn init(&mut self) {
        // Nodes and trajectories.
        for n in 0..self.sc.node_count {
            let pos = match &self.sc.positions {
                Some(list) => list[n],
                None => uniform_point(&mut self.streams.mobility, self.sc.arena),
            };
            let traj = match self.sc.mobility {
                MobilityModel::Static => NodeTrajectory::stationary(pos, SimTime::ZERO),
                MobilityModel::RandomWaypoint => {
                    let t = NodeTrajectory::begin(
                        pos,
                        self.sc.speed,
                        SimTime::ZERO,
                        &mut self.streams.mobility,
                        self.sc.arena,
                    );
                    self.queue
                        .schedule(t.leg_end_time(), EventKind::WaypointReached { node: n });
                    t
                }
            };
            self.trajectories.record(n, &traj);
            let proto = match self.sc.protocol {
                Protocol::Olsr => ProtocolState::Olsr(OlsrState::default()),
                Protocol::Dsr => ProtocolState::Dsr(crate::dsr::DsrState::new(
                    self.sc.cache_ttl,
                    self.sc.routes_per_destination,
                )),
                Protocol::Hirol => ProtocolState::Hirol(HirolState::new(
                    self.sc.cache_ttl,
                    self.sc.routes_per_destination,
                )),
            };
            self.nodes.push(Node {
                traj,
                radio: RadioState::default(),
                proto,
            });
        }

        // CBR flows: random ordered pairs, staggered starts.
        let n_flows = self.sc.flow_count();
        let period = 1.0 / self.sc.cbr_rate;
        for i in 0..n_flows {
            let src = self.streams.traffic.below(self.sc.node_count);
            let mut dst = self.streams.traffic.below(self.sc.node_count);
            while dst == src {
                dst = self.streams.traffic.below(self.sc.node_count);
            }
            self.flows.push(Flow { src, dst, sent: 0 });
            let start = self.sc.traffic_start + (i as f64 + 0.5) * period / n_flows as f64;
            if start < self.sc.sim_time {
                self.queue
                    .schedule(SimTime::from_secs(start), EventKind::AppSend { flow: i });
            }
        }

        // Protocol timers.
        match self.sc.protocol {
            Protocol::Olsr => self.proactive_init(),
            Protocol::Dsr => {}
            Protocol::Hirol => self.hybrid_init(),
        }

        if let Some(interval) = self.sc.probe_interval {
            self.queue
                .schedule(SimTime::from_secs(interval), EventKind::Probe);
        }

        self.queue.schedule(self.sim_end, EventKind::SimEnd);
    }

    pub(crate) fn run_loop(&mut self) {
        while let Some(ev) = self.queue.pop() {
            self.hasher.absorb(ev.time.as_micros());
            self.hasher.absorb(ev.seq);
            self.hasher.absorb(u64::from(ev.kind.discriminant()));
            let now = ev.time;
            match ev.kind {
                EventKind::SimEnd => break,
                EventKind::WaypointReached { node } => self.on_waypoint(node, now),
                EventKind::AppSend { flow } => self.on_app_send(flow, now),
                EventKind::TxFinish(tx) => self.on_tx_finish(*tx, now),
                EventKind::PacketArrival { node, packet } => {
                    self.hasher.absorb(packet.id);
                    self.on_arrival(node, *packet, now);
                }
                EventKind::HelloDue { node } => match self.sc.protocol {
                    Protocol::Olsr => self.on_hello_due_olsr(node, now),
                    Protocol::Hirol => self.on_hello_due_hirol(node, now),
                    Protocol::Dsr => {}
                },
                EventKind::TcDue { node } => match self.sc.protocol {
                    Protocol::Olsr => self.on_tc_due_olsr(node, now),
                    Protocol::Hirol => self.on_tc_due_hirol(node, now),
                    Protocol::Dsr => {}
                },
                EventKind::TimerFire { node, timer } => self.on_timer(node, timer, now),
                EventKind::Probe => self.on_probe(now),
            }
        }
    }

    pub(crate) fn finish(self) -> RunOutput {
        let report = self.metrics.finalize(
            self.sc.sim_time,
            self.sc.packet_size,
            self.sc.traffic_start,
        );
        RunOutput {
            metrics: report,
            trace_hash: self.hasher.digest(),
            delivered_ids: self.delivered_ids,
            trajectories: self.trajectories,
            probes: self.probes,
            hybrid: self.hybrid_stats,
        }
    }

    // ---- positions -----------------------------------------------------

    pub(crate) fn position(&self, n: NodeId, now: SimTime) -> Vec3 {
        self.nodes[n].traj.position_at(now)
    }

    pub(crate) fn velocity(&self, n: NodeId, now: SimTime) -> Vec3 {
        self.nodes[n].traj.velocity_at(now)
    }

    /// Feature inputs for the directed link `a -> b`, from current state.
    pub(crate) fn link_context(&self, a: NodeId, b: NodeId, now: SimTime) -> LinkContext {
        LinkContext {
            pos_a: self.position(a, now),
            pos_b: self.position(b, now),
            vel_a: self.velocity(a, now),
            vel_b: self.velocity(b, now),
            radio_range: self.sc.radio_range,
            max_speed: self.sc.speed,
            quality: self.history.quality(a, b, now),
            load: (self.nodes[b].radio.backlog(now).as_secs() / self.sc.max_queue_delay)
                .clamp(0.0, 1.0),
        }
    }

    fn on_waypoint(&mut self, node: NodeId, _now: SimTime) {
        let mut next = self.nodes[node]
            .traj
            .next_waypoint(&mut self.streams.mobility, self.sc.arena);
        if self.sc.pause_secs > 0.0 {
            next.pause_until =
                Some(next.arrival_time() + SimTime::from_secs(self.sc.pause_secs));
        }
        self.queue
            .schedule(next.leg_end_time(), EventKind::WaypointReached { node });
        self.trajectories.record(node, &next);
        self.nodes[node].traj = next;
    }

    // ---- traffic --------------------------------------------------------

    fn on_app_send(&mut self, flow: usize, now: SimTime) {
        let f = self.flows[flow].clone();
        if self
            .sc
            .messages_per_flow
            .is_some_and(|cap| f.sent >= cap)
        {
            return;
        }
        self.flows[flow].sent += 1;

        let pkt = Packet {
            id: self.fresh_packet_id(),
            src: f.src,
            dst: f.dst,
            body: PacketBody::Data { flow },
            route: Vec::new(),
            salvage_count: 0,
            prev_hop: f.src,
            payload_size: self.sc.packet_size,
            created_at: now,
            hops: Vec::new(),
        };
        self.metrics.on_data_created(flow);

        match self.sc.protocol {
            Protocol::Olsr => self.olsr_route_data(f.src, pkt, now),
            Protocol::Dsr => self.dsr_app_send(f.src, pkt, now),
            Protocol::Hirol => self.hirol_app_send(f.src, pkt, now),
        }

        // Next CBR tick.
        let next = now + SimTime::from_secs(1.0 / self.sc.cbr_rate);
        let under_cap = self
            .sc
            .messages_per_flow
            .is_none_or(|cap| self.flows[flow].sent < cap);
        if next < self.sim_end && under_cap {
            self.queue.schedule(next, EventKind::AppSend { flow });
        }
    }

    pub(crate) fn fresh_packet_id(&mut self) -> u64 {
        let id = self.next_packet_id;
        self.next_packet_id += 1;
        id
    }

    pub(crate) fn control_packet(&mut self, src: NodeId, body: PacketBody) -> Packet {
        Packet {
            id: self.fresh_packet_id(),
            src,
            dst: src,
            body,
            route: Vec::new(),
            salvage_count: 0,
            prev_hop: src,
            payload_size: 0,
            created_at: self.queue.now(),
            hops: Vec::new(),
        }
    }

    // ---- link layer ------------------------------------------------------

    /// Queue a frame on `from`'s radio. `to = None` broadcasts to every
    /// in-range neighbor when the airtime completes.
    pub(crate) fn enqueue_tx(
        &mut self,
        from: NodeId,
        to: Option<NodeId>,
        pkt: Packet,
        now: SimTime,
    ) {
        let bytes = pkt.wire_bytes();
        let airtime = SimTime::from_secs(bytes as f64 * 8.0 / self.sc.bitrate_bps);
        if self.nodes[from].radio.backlog(now) > self.max_queue_delay {
            if pkt.kind() == PacketKind::Data {
                self.metrics.on_data_dropped(DropCause::QueueOverflow, now);
            }
            return;
        }
        self.metrics.on_transmit(pkt.kind(), bytes);
        let charge_from = pkt.created_at + pkt.delay();
        debug_assert!(charge_from <= now);
        let start = self.nodes[from].radio.reserve(now, airtime);
        self.queue.schedule(
            start + airtime,
            EventKind::TxFinish(Box::new(Transmission {
                from,
                to,
                packet: pkt,
                attempt: 0,
                charge_from,
                first_start: start,
                start,
                airtime,
            })),
        );
    }

    fn retry_tx(&mut self, mut tx: Transmission, now: SimTime) {
        tx.attempt += 1;
        let earliest = now + self.retry_backoff;
        let start = self.nodes[tx.from].radio.reserve(earliest, tx.airtime);
        tx.start = start;
        let finish = start + tx.airtime;
        self.queue.schedule(finish, EventKind::TxFinish(Box::new(tx)));
    }

    fn on_tx_finish(&mut self, tx: Transmission, now: SimTime) {
        let from_pos = self.position(tx.from, now);
        match tx.to {
            Some(to) => {
                let reachable = in_range(from_pos, self.position(to, now), self.sc.radio_range);
                let delivered = reachable && !self.streams.loss.chance(self.sc.p_loss);
                self.history.record(tx.from, to, now, delivered);
                self.adapt_classifier_online(tx.from, to, delivered, now);
                if delivered {
                    let mut pkt = tx.packet;
                    pkt.prev_hop = tx.from;
                    pkt.hops.push(HopTiming {
                        buffer: tx.first_start - tx.charge_from,
                        retrans: tx.start - tx.first_start,
                        transmit: tx.airtime,
                        processing: self.proc_delay,
                    });
                    self.queue.schedule(
                        now + self.proc_delay,
                        EventKind::PacketArrival {
                            node: to,
                            packet: Box::new(pkt),
                        },
                    );
                } else if tx.attempt < self.sc.data_retry_limit {
                    // MAC-level ARQ covers every unicast frame; only
                    // broadcasts go out unacknowledged.
                    self.retry_tx(tx, now);
                } else {
                    self.on_hop_failure(tx, now);
                }
            }
            None => {
                for m in 0..self.sc.node_count {
                    if m == tx.from {
                        continue;
                    }
                    if !in_range(from_pos, self.position(m, now), self.sc.radio_range) {
                        continue;
                    }
                    let delivered = !self.streams.loss.chance(self.sc.p_loss);
                    self.history.record(tx.from, m, now, delivered);
                    if delivered {
                        let mut pkt = tx.packet.clone();
                        pkt.prev_hop = tx.from;
                        pkt.hops.push(HopTiming {
                            buffer: tx.first_start - tx.charge_from,
                            retrans: SimTime::ZERO,
                            transmit: tx.airtime,
                            processing: self.proc_delay,
                        });
                        self.queue.schedule(
                            now + self.proc_delay,
                            EventKind::PacketArrival {
                                node: m,
                                packet: Box::new(pkt),
                            },
                        );
                    }
                }
            }
        }
    }

    /// Live outcomes nudge the hybrid classifier's output layer.
    fn adapt_classifier_online(&mut self, from: NodeId, to: NodeId, delivered: bool, now: SimTime) {
        if self.sc.protocol != Protocol::Hirol || self.sc.ann.beta <= 0.0 {
            return;
        }
        let Some(net) = self.classifier.as_mut() else {
            return;
        };
        let ctx = LinkContext {
            pos_a: self.nodes[from].traj.position_at(now),
            pos_b: self.nodes[to].traj.position_at(now),
            vel_a: self.nodes[from].traj.velocity_at(now),
            vel_b: self.nodes[to].traj.velocity_at(now),
            radio_range: self.sc.radio_range,
            max_speed: self.sc.speed,
            quality: self.history.quality(from, to, now),
            load: (self.nodes[to].radio.backlog(now).as_secs() / self.sc.max_queue_delay)
                .clamp(0.0, 1.0),
        };
        let features = crate::ann::extract_features(&ctx);
        let target = if delivered { 1.0 } else { 0.0 };
        net.adapt_output(&features.as_vec(), target, self.sc.ann.beta);
    }

    fn on_hop_failure(&mut self, tx: Transmission, now: SimTime) {
        match self.sc.protocol {
            Protocol::Olsr => self.olsr_hop_failure(tx, now),
            Protocol::Dsr | Protocol::Hirol => self.reactive_hop_failure(tx, now),
        }
    }

    // ---- arrivals ---------------------------------------------------------

    fn on_arrival(&mut self, node: NodeId, pkt: Packet, now: SimTime) {
        if pkt.kind() != PacketKind::Data {
            self.metrics.on_control_processed(now);
        }
        if pkt.kind() == PacketKind::Data && node == pkt.dst {
            let PacketBody::Data { flow } = pkt.body else {
                unreachable!()
            };
            self.metrics.on_data_delivered(&pkt, flow, now);
            self.delivered_ids.push(pkt.id);
            return;
        }
        match self.sc.protocol {
            Protocol::Olsr => self.olsr_on_arrival(node, pkt, now),
            Protocol::Dsr => self.dsr_on_arrival(node, pkt, now),
            Protocol::Hirol => self.hirol_on_arrival(node, pkt, now),
        }
    }

    fn on_timer(&mut self, node: NodeId, timer: Timer, now: SimTime) {
        match timer {
            Timer::DiscoveryTimeout { dst, request_id } => {
                self.on_discovery_timeout(node, dst, request_id, now)
            }
            Timer::ReResolve { dst } => self.hirol_on_reresolve(node, dst, now),
            Timer::RouteMaintenance => self.hirol_on_maintenance(node, now),
        }
    }

    // ---- shared data forwarding helpers -----------------------------------

    /// Forward a source-routed packet from `n` to its successor on the
    /// embedded route. The packet's route must contain `n`.
    pub(crate) fn forward_source_routed(&mut self, n: NodeId, pkt: Packet, now: SimTime) {
        let pos = pkt
            .route
            .iter()
            .position(|&x| x == n)
            .expect("forwarder not on the source route");
        debug_assert!(pos + 1 < pkt.route.len(), "already at route end");
        let next = pkt.route[pos + 1];
        self.enqueue_tx(n, Some(next), pkt, now);
    }

    pub(crate) fn drop_data(&mut self, cause: DropCause, now: SimTime) {
        self.metrics.on_data_dropped(cause, now);
    }

    // ---- probes ------------------------------------------------------------

    fn on_probe(&mut self, now: SimTime) {
        for a in 0..self.sc.node_count {
            for b in 0..self.sc.node_count {
                if a == b {
                    continue;
                }
                let pa = self.position(a, now);
                let pb = self.position(b, now);
                if !in_range(pa, pb, self.sc.radio_range) {
                    continue;
                }
                let features = crate::ann::extract_features(&self.link_context(a, b, now));
                self.probes.push(ProbeSample {
                    time: now,
                    from: a,
                    to: b,
                    features,
                });
            }
        }
        if let Some(interval) = self.sc.probe_interval {
            let next = now + SimTime::from_secs(interval);
            if next < self.sim_end {
                self.queue.schedule(next, EventKind::Probe);
            }
        }
    }

    // ---- protocol state accessors ------------------------------------------

    pub(crate) fn olsr_state(&mut self, n: NodeId) -> &mut OlsrState {
        match &mut self.nodes[n].proto {
            ProtocolState::Olsr(s) => s,
            ProtocolState::Hirol(h) => &mut h.olsr,
            ProtocolState::Dsr(_) => unreachable!("no proactive state on a reactive node"),
        }
    }

    pub(crate) fn reactive_state(&mut self, n: NodeId) -> &mut crate::dsr::DsrState {
        match &mut self.nodes[n].proto {
            ProtocolState::Dsr(s) => s,
            ProtocolState::Hirol(h) => &mut h.dsr,
            ProtocolState::Olsr(_) => unreachable!("no reactive state on a proactive node"),
        }
    }

    pub(crate) fn hirol_state(&mut self, n: NodeId) -> &mut HirolState {
        match &mut self.nodes[n].proto {
            ProtocolState::Hirol(h) => h,
            _ => unreachable!("not a hybrid node"),
        }
    }

    /// Jittered interval draw from the traffic stream.
    pub(crate) fn jittered(&mut self, base_secs: f64) -> SimTime {
        let j = self.streams.traffic.jitter(self.sc.timer_jitter);
        SimTime::from_secs(base_secs * j)
    }
}
