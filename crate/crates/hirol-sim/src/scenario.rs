//! Run configuration.
//!
//! Defaults describe the reference setup: 20 nodes in an 800 x 800 x 200 m
//! box, 256-byte CBR packets, random-waypoint mobility, 210 s of virtual
//! time. Everything is overridable from a config file or CLI flags.

use crate::mobility::Vec3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Protocol {
    Olsr,
    Dsr,
    Hirol,
}

impl Protocol {
    pub const ALL: [Protocol; 3] = [Protocol::Hirol, Protocol::Olsr, Protocol::Dsr];

    pub fn name(self) -> &'static str {
        match self {
            Protocol::Olsr => "olsr",
            Protocol::Dsr => "dsr",
            Protocol::Hirol => "hirol",
        }
    }

    /// Column header used in the comparison tables.
    pub fn column(self) -> &'static str {
        match self {
            Protocol::Hirol => "Proposed",
            Protocol::Olsr => "OLSR",
            Protocol::Dsr => "DSR",
        }
    }
}

impl std::str::FromStr for Protocol {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "olsr" => Ok(Protocol::Olsr),
            "dsr" => Ok(Protocol::Dsr),
            "hirol" | "proposed" => Ok(Protocol::Hirol),
            other => Err(format!("unknown protocol '{other}'")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MobilityModel {
    RandomWaypoint,
    /// Nodes hold their initial positions; used by topology-pinned tests.
    Static,
}

/// Bee-colony optimizer knobs.
#[derive(Clone, Debug, PartialEq)]
pub struct AbcParams {
    pub colony_size: usize,
    pub max_iter: usize,
    /// Convergence threshold on the best-fitness delta.
    pub epsilon: f64,
    /// Consecutive below-epsilon iterations required to stop.
    pub patience: usize,
    pub step_size: f64,
    /// Trial count after which a stagnant source is abandoned.
    pub limit: u32,
    pub weight_energy: f64,
    pub weight_latency: f64,
    pub weight_delivery: f64,
    /// Scale of the migration-probability exponent.
    pub migration_w: f64,
    /// Onlookers refine the global best instead of a sampled source.
    pub onlooker_exploits_best: bool,
}

impl Default for AbcParams {
    fn default() -> Self {
        AbcParams {
            colony_size: 20,
            max_iter: 40,
            epsilon: 1e-4,
            patience: 3,
            step_size: 1.0,
            limit: 10,
            weight_energy: 1.0 / 3.0,
            weight_latency: 1.0 / 3.0,
            weight_delivery: 1.0 / 3.0,
            migration_w: 1.0,
            onlooker_exploits_best: false,
        }
    }
}

/// Link-classifier knobs.
#[derive(Clone, Debug, PartialEq)]
pub struct AnnParams {
    pub hidden: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    /// Online normalized-LMS adaptation gain; 0 disables adaptation.
    pub beta: f64,
    /// A training sample is labeled stable iff the link survives this
    /// many seconds of future motion.
    pub lookahead_secs: f64,
    pub threshold: f64,
    /// Half-width of the symmetric uniform weight initialization.
    pub init_span: f64,
}

impl Default for AnnParams {
    fn default() -> Self {
        AnnParams {
            hidden: 8,
            learning_rate: 0.5,
            epochs: 400,
            beta: 0.5,
            lookahead_secs: 2.0,
            threshold: 0.5,
            init_span: 0.5,
        }
    }
}

/// Degenerate-configuration switches used by equivalence tests.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum LinkFilterMode {
    /// Use the trained classifier when one is supplied; otherwise treat
    /// every link as stable.
    #[default]
    Classifier,
    /// Ignore the classifier entirely.
    AlwaysStable,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum RouteSelectMode {
    #[default]
    Optimize,
    /// Skip the optimizer and take the first surviving candidate.
    FirstCandidate,
}

#[derive(Clone, Debug)]
pub struct Scenario {
    pub protocol: Protocol,
    pub seed: u64,
    pub node_count: usize,
    /// Arena extents in meters.
    pub arena: Vec3,
    pub mobility: MobilityModel,
    /// Explicit initial positions (tests); sampled uniformly when absent.
    pub positions: Option<Vec<Vec3>>,
    /// Node speed in m/s shared by all nodes this run.
    pub speed: f64,
    pub pause_secs: f64,
    pub sim_time: f64,

    // Traffic.
    pub packet_size: usize,
    pub max_cbr_connections: usize,
    /// Actual flow count: `min(max_cbr_connections, 2 * node_count)`
    /// unless pinned here.
    pub cbr_connections: Option<usize>,
    pub cbr_rate: f64,
    pub traffic_start: f64,
    /// Cap on packets per flow (batch experiments); unlimited if `None`.
    pub messages_per_flow: Option<u64>,

    // Radio.
    pub radio_range: f64,
    pub p_loss: f64,
    pub bitrate_bps: f64,
    pub processing_delay: f64,
    pub data_retry_limit: u32,
    pub retry_backoff: f64,
    pub max_queue_delay: f64,

    // Protocol timers.
    pub hello_interval: f64,
    pub tc_interval: f64,
    pub timer_jitter: f64,
    pub neighbor_hold_factor: f64,

    // Reactive routing.
    pub cache_ttl: f64,
    pub routes_per_destination: usize,
    pub discovery_timeout: f64,
    pub discovery_retries: u32,
    pub send_buffer_capacity: usize,
    /// Hybrid runs drop packets that sat in a discovery buffer longer
    /// than this (seconds).
    pub buffer_timeout: f64,
    /// How many times a hybrid relay may re-route one packet around a
    /// break before giving up.
    pub salvage_limit: u8,
    /// Destination answers every arriving request copy, not just the
    /// first per request id.
    pub reply_to_all_requests: bool,

    // Hybrid controller.
    pub zone_cell: Vec3,
    /// Zone summaries flood at this multiple of the TC interval.
    pub beacon_factor: f64,
    /// Hybrid nodes stretch the hello interval by this factor; the
    /// classifier and link-layer feedback compensate for the slower
    /// neighbor sensing.
    pub hybrid_hello_factor: f64,
    pub maintenance_interval: f64,
    pub reresolve_backoff: f64,
    /// Extra distance allowed when scoping discovery toward a known
    /// destination position.
    pub corridor_slack: f64,
    pub link_filter: LinkFilterMode,
    pub route_select: RouteSelectMode,

    pub abc: AbcParams,
    pub ann: AnnParams,

    /// Schedule a link-feature probe every this many seconds (training
    /// data capture); off by default.
    pub probe_interval: Option<f64>,
}

impl Default for Scenario {
    fn default() -> Self {
        Scenario {
            protocol: Protocol::Hirol,
            seed: 42,
            node_count: 20,
            arena: Vec3::new(800.0, 800.0, 200.0),
            mobility: MobilityModel::RandomWaypoint,
            positions: None,
            speed: 20.0,
            pause_secs: 0.0,
            sim_time: 210.0,
            packet_size: 256,
            max_cbr_connections: 200,
            cbr_connections: None,
            cbr_rate: 1.0,
            traffic_start: 15.0,
            messages_per_flow: None,
            radio_range: 350.0,
            p_loss: 0.02,
            bitrate_bps: 1_000_000.0,
            processing_delay: 0.001,
            data_retry_limit: 2,
            retry_backoff: 0.005,
            max_queue_delay: 0.5,
            hello_interval: 2.0,
            tc_interval: 5.0,
            timer_jitter: 0.1,
            neighbor_hold_factor: 3.0,
            cache_ttl: 30.0,
            routes_per_destination: 3,
            discovery_timeout: 1.0,
            discovery_retries: 3,
            send_buffer_capacity: 64,
            buffer_timeout: 0.4,
            salvage_limit: 1,
            reply_to_all_requests: false,
            zone_cell: Vec3::new(200.0, 200.0, 200.0),
            beacon_factor: 2.0,
            hybrid_hello_factor: 1.25,
            maintenance_interval: 2.0,
            reresolve_backoff: 0.1,
            corridor_slack: 150.0,
            link_filter: LinkFilterMode::Classifier,
            route_select: RouteSelectMode::Optimize,
            abc: AbcParams::default(),
            ann: AnnParams::default(),
            probe_interval: None,
        }
    }
}

impl Scenario {
    /// Number of CBR flows the traffic generator creates.
    pub fn flow_count(&self) -> usize {
        self.cbr_connections
            .unwrap_or(2 * self.node_count)
            .min(self.max_cbr_connections)
    }

    /// Validate every invariant, reporting all violations at once.
    pub fn validate(&self) -> Result<(), ScenarioError> {
        let mut faults = Vec::new();
        let mut check = |ok: bool, msg: &str| {
            if !ok {
                faults.push(msg.to_string());
            }
        };
        check(self.node_count >= 2, "node_count: must be at least 2");
        check(self.sim_time > 0.0, "sim_time: must be positive");
        check(self.packet_size > 0, "packet_size: must be positive");
        check(
            self.arena.x > 0.0 && self.arena.y > 0.0 && self.arena.z > 0.0,
            "arena: all extents must be positive",
        );
        check(self.speed > 0.0, "speed: must be strictly positive");
        check(self.radio_range > 0.0, "radio_range: must be positive");
        check(
            (0.0..=1.0).contains(&self.p_loss),
            "p_loss: must be within [0, 1]",
        );
        check(self.bitrate_bps > 0.0, "bitrate_bps: must be positive");
        check(self.cbr_rate > 0.0, "cbr_rate: must be positive");
        check(self.hello_interval > 0.0, "hello_interval: must be positive");
        check(self.tc_interval > 0.0, "tc_interval: must be positive");
        check(
            self.zone_cell.x > 0.0 && self.zone_cell.y > 0.0 && self.zone_cell.z > 0.0,
            "zone_cell: all extents must be positive",
        );
        check(self.abc.colony_size >= 2, "abc.colony_size: must be at least 2");
        check(self.abc.step_size > 0.0, "abc.step_size: must be positive");
        check(self.abc.epsilon > 0.0, "abc.epsilon: must be positive");
        check(self.abc.limit >= 1, "abc.limit: must be at least 1");
        check(
            (0.0..1.0).contains(&self.ann.threshold) && self.ann.threshold > 0.0,
            "ann.threshold: must lie in (0, 1)",
        );
        if let Some(pos) = &self.positions {
            check(
                pos.len() == self.node_count,
                "positions: length must equal node_count",
            );
            check(
                pos.iter().all(|p| p.inside(self.arena)),
                "positions: every point must lie inside the arena",
            );
        }
        if faults.is_empty() {
            Ok(())
        } else {
            Err(ScenarioError { faults })
        }
    }
}

/// Aggregated validation report: one line per offending field.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid scenario: {}", faults.join("; "))]
pub struct ScenarioError {
    pub faults: Vec<String>,
}
