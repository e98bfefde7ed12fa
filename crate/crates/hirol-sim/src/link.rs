//! Radio links and packets.
//!
//! Connectivity is a unit disk: two nodes can exchange frames iff their
//! Euclidean distance is at most the radio range. Each node owns one
//! half-duplex transmitter with a FIFO queue at a fixed bitrate; every
//! hop charges buffer, (re)transmission, and processing time so that
//! per-hop components sum exactly to the end-to-end clock difference.

use std::collections::{BTreeMap, VecDeque};

use crate::mobility::Vec3;
use crate::time::SimTime;

pub type NodeId = usize;

/// Spatial zone index: `(floor(x/cx), floor(y/cy), floor(z/cz))`.
pub type ZoneId = (u32, u32, u32);

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum PacketKind {
    Data,
    Hello,
    Tc,
    Rreq,
    Rrep,
    Rerr,
}

impl PacketKind {
    pub const ALL: [PacketKind; 6] = [
        PacketKind::Data,
        PacketKind::Hello,
        PacketKind::Tc,
        PacketKind::Rreq,
        PacketKind::Rrep,
        PacketKind::Rerr,
    ];

    pub fn label(self) -> &'static str {
        match self {
            PacketKind::Data => "data",
            PacketKind::Hello => "hello",
            PacketKind::Tc => "tc",
            PacketKind::Rreq => "rreq",
            PacketKind::Rrep => "rrep",
            PacketKind::Rerr => "rerr",
        }
    }
}

/// Per-hop time components, in integer microseconds so sums are exact.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct HopTiming {
    /// Queue residence before the first transmission attempt started.
    pub buffer: SimTime,
    /// Time consumed by failed attempts and their backoffs.
    pub retrans: SimTime,
    /// Airtime of the successful attempt.
    pub transmit: SimTime,
    /// Fixed per-hop processing at the receiver.
    pub processing: SimTime,
}

impl HopTiming {
    pub fn total(&self) -> SimTime {
        self.buffer + self.retrans + self.transmit + self.processing
    }
}

/// How a route request propagates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DiscoveryMode {
    /// Classic broadcast flood. `scoped` floods prune forwarders that
    /// move the request away from the believed destination position;
    /// `record_limit` caps propagation for localized repair floods.
    Flood {
        scoped: bool,
        record_limit: Option<usize>,
    },
    /// Position-directed unicast walk: each hop forwards to its
    /// neighbor closest to the destination estimate, requiring strict
    /// progress. Cheap when position knowledge is current; a failed walk
    /// widens into a flood where it stands.
    Greedy {
        target_hint: Vec3,
        /// When the hint was observed; hops only re-aim from records
        /// fresher than this.
        hint_time: SimTime,
    },
}

/// Protocol-specific packet payloads.
#[derive(Clone, Debug)]
pub enum PacketBody {
    Data {
        /// Index into the run's flow table.
        flow: usize,
    },
    Hello {
        /// Sender's current 1-hop neighbor set.
        neighbors: Vec<NodeId>,
        /// Subset of those neighbors the sender picked as relays.
        mprs: Vec<NodeId>,
        /// Present in hybrid runs: sender position and zone.
        position: Option<(Vec3, ZoneId)>,
    },
    Tc {
        originator: NodeId,
        seq: u32,
        /// Nodes that selected the originator as a relay.
        selectors: Vec<NodeId>,
        /// Hybrid zone summary: known same-zone members with positions.
        members: Vec<(NodeId, Vec3)>,
    },
    Rreq {
        origin: NodeId,
        target: NodeId,
        request_id: u32,
        /// Nodes traversed so far, origin first.
        record: Vec<NodeId>,
        /// Neighbors a directed walk already failed toward; never
        /// retried within the same walk.
        avoid: Vec<NodeId>,
        mode: DiscoveryMode,
    },
    Rrep {
        request_id: u32,
        /// Full forward route origin..=target.
        route: Vec<NodeId>,
        /// The target's position at reply time (hybrid runs), refreshing
        /// registries along the return path.
        target_pos: Option<Vec3>,
    },
    Rerr {
        broken: (NodeId, NodeId),
        /// Hop-by-hop path this error travels, detector first.
        path: Vec<NodeId>,
    },
}

impl PacketBody {
    pub fn kind(&self) -> PacketKind {
        match self {
            PacketBody::Data { .. } => PacketKind::Data,
            PacketBody::Hello { .. } => PacketKind::Hello,
            PacketBody::Tc { .. } => PacketKind::Tc,
            PacketBody::Rreq { .. } => PacketKind::Rreq,
            PacketBody::Rrep { .. } => PacketKind::Rrep,
            PacketBody::Rerr { .. } => PacketKind::Rerr,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Packet {
    pub id: u64,
    pub src: NodeId,
    pub dst: NodeId,
    pub body: PacketBody,
    /// Source route for data in source-routed protocols; otherwise empty.
    pub route: Vec<NodeId>,
    /// Times this packet was re-routed mid-journey after a link break.
    pub salvage_count: u8,
    /// The node that transmitted the copy being processed.
    pub prev_hop: NodeId,
    pub payload_size: usize,
    pub created_at: SimTime,
    pub hops: Vec<HopTiming>,
}

impl Packet {
    pub fn kind(&self) -> PacketKind {
        self.body.kind()
    }

    /// Bytes on the wire: payload plus the source-route header, 4 bytes
    /// per recorded node id. Control packets price their body fields the
    /// same way.
    pub fn wire_bytes(&self) -> usize {
        const HEADER: usize = 20;
        let body = match &self.body {
            PacketBody::Data { .. } => self.payload_size + 2 * self.route.len(),
            PacketBody::Hello {
                neighbors,
                mprs,
                position,
            } => 2 * (neighbors.len() + mprs.len()) + if position.is_some() { 12 } else { 0 },
            PacketBody::Tc {
                selectors, members, ..
            } => 6 + 2 * selectors.len() + 14 * members.len(),
            PacketBody::Rreq { record, .. } => 8 + 2 * record.len(),
            PacketBody::Rrep { route, target_pos, .. } => {
                6 + 2 * route.len() + if target_pos.is_some() { 12 } else { 0 }
            }
            PacketBody::Rerr { path, .. } => 6 + 2 * path.len(),
        };
        HEADER + body
    }

    pub fn delay(&self) -> SimTime {
        self.hops
            .iter()
            .fold(SimTime::ZERO, |acc, h| acc + h.total())
    }
}

/// Unit-disk connectivity test. Symmetric by construction.
pub fn in_range(p: Vec3, q: Vec3, range: f64) -> bool {
    p.distance(q) <= range
}

/// An in-flight transmission: one airtime occupancy of `from`'s radio.
/// Broadcasts fan out to every in-range neighbor with independent loss
/// draws when the airtime completes.
#[derive(Clone, Debug)]
pub struct Transmission {
    pub from: NodeId,
    /// Unicast target, or `None` for a local broadcast.
    pub to: Option<NodeId>,
    pub packet: Packet,
    /// 0-based attempt counter; only data frames are retried.
    pub attempt: u32,
    /// Where this hop's buffer charge starts: the packet's creation time
    /// plus everything already accounted to earlier hops. Any dead time
    /// (send-buffer waits included) lands in this hop's buffer component,
    /// keeping the per-hop decomposition exact against the clock.
    pub charge_from: SimTime,
    /// When the first attempt's airtime started.
    pub first_start: SimTime,
    /// When this attempt's airtime started.
    pub start: SimTime,
    pub airtime: SimTime,
}

/// Transmit-side state of one node's radio.
#[derive(Clone, Debug, Default)]
pub struct RadioState {
    pub busy_until: SimTime,
}

impl RadioState {
    /// Reserve the next airtime slot; returns its start.
    pub fn reserve(&mut self, now: SimTime, airtime: SimTime) -> SimTime {
        let start = self.busy_until.max(now);
        self.busy_until = start + airtime;
        start
    }

    /// Current queue residence a new frame would see.
    pub fn backlog(&self, now: SimTime) -> SimTime {
        self.busy_until.saturating_sub(now)
    }
}

/// Sliding-window delivery history per directed link, feeding the
/// link-quality feature.
#[derive(Clone, Debug, Default)]
pub struct LinkHistory {
    samples: BTreeMap<(NodeId, NodeId), VecDeque<(SimTime, bool)>>,
    pub window: SimTime,
}

impl LinkHistory {
    pub fn new(window_secs: f64) -> Self {
        LinkHistory {
            samples: BTreeMap::new(),
            window: SimTime::from_secs(window_secs),
        }
    }

    pub fn record(&mut self, a: NodeId, b: NodeId, time: SimTime, delivered: bool) {
        let q = self.samples.entry((a, b)).or_default();
        q.push_back((time, delivered));
        let cutoff = time.saturating_sub(self.window);
        while q.front().is_some_and(|&(t, _)| t < cutoff) {
            q.pop_front();
        }
    }

    /// Most recent successful delivery on the directed link, if any.
    pub fn last_success(&self, a: NodeId, b: NodeId) -> Option<SimTime> {
        let q = self.samples.get(&(a, b))?;
        q.iter().rev().find(|&&(_, ok)| ok).map(|&(t, _)| t)
    }

    /// Delivery fraction over the trailing window; 1.0 with no samples
    /// (optimistic prior for links never exercised).
    pub fn quality(&self, a: NodeId, b: NodeId, now: SimTime) -> f64 {
        let Some(q) = self.samples.get(&(a, b)) else {
            return 1.0;
        };
        let cutoff = now.saturating_sub(self.window);
        let mut total = 0u32;
        let mut ok = 0u32;
        for &(t, delivered) in q.iter().rev() {
            if t < cutoff {
                break;
            }
            total += 1;
            ok += delivered as u32;
        }
        if total == 0 {
            1.0
        } else {
            f64::from(ok) / f64::from(total)
        }
    }
}
