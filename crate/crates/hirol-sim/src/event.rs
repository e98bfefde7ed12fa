//! The event queue at the heart of the engine.
//!
//! Dispatch order is a total order on `(time, sequence)`: nondecreasing
//! time, ties broken by schedule order. Scheduling into the past is a
//! logic bug and aborts the run.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::link::{NodeId, Packet};
use crate::time::SimTime;

/// Node-local timers beyond the periodic control ticks.
#[derive(Clone, Debug)]
pub enum Timer {
    /// A route discovery round timed out without a reply.
    DiscoveryTimeout { dst: NodeId, request_id: u32 },
    /// Backoff expired after a link break; try to resolve again.
    ReResolve { dst: NodeId },
    /// Periodic re-validation of installed routes.
    RouteMaintenance,
}

#[derive(Clone, Debug)]
pub enum EventKind {
    /// A packet finished its per-hop processing at `node`.
    PacketArrival { node: NodeId, packet: Box<Packet> },
    /// A queued transmission finished its airtime at the sender.
    TxFinish(Box<crate::link::Transmission>),
    TimerFire { node: NodeId, timer: Timer },
    WaypointReached { node: NodeId },
    HelloDue { node: NodeId },
    TcDue { node: NodeId },
    AppSend { flow: usize },
    /// Periodic link-feature probe used when capturing training data.
    Probe,
    SimEnd,
}

impl EventKind {
    /// Small stable discriminant folded into the trace hash.
    pub fn discriminant(&self) -> u8 {
        match self {
            EventKind::PacketArrival { .. } => 0,
            EventKind::TxFinish(_) => 1,
            EventKind::TimerFire { .. } => 2,
            EventKind::WaypointReached { .. } => 3,
            EventKind::HelloDue { .. } => 4,
            EventKind::TcDue { .. } => 5,
            EventKind::AppSend { .. } => 6,
            EventKind::Probe => 7,
            EventKind::SimEnd => 8,
        }
    }
}

#[derive(Debug)]
pub struct Event {
    pub time: SimTime,
    pub seq: u64,
    pub kind: EventKind,
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        self.time == other.time && self.seq == other.seq
    }
}
impl Eq for Event {}

impl Ord for Event {
    // Reversed so the max-heap pops the earliest (time, seq).
    fn cmp(&self, other: &Self) -> Ordering {
        (other.time, other.seq).cmp(&(self.time, self.seq))
    }
}
impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Clock plus pending events. Popping advances the clock; the clock never
/// moves backwards.
#[derive(Debug, Default)]
pub struct EventQueue {
    heap: BinaryHeap<Event>,
    clock: SimTime,
    next_seq: u64,
}

impl EventQueue {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn now(&self) -> SimTime {
        self.clock
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }

    /// Panics if `time` is before the current clock: that indicates a
    /// logic bug, and the run must not silently continue.
    pub fn schedule(&mut self, time: SimTime, kind: EventKind) {
        assert!(
            time >= self.clock,
            "scheduled event at {:?} behind clock {:?}",
            time,
            self.clock
        );
        let seq = self.next_seq;
        self.next_seq += 1;
        self.heap.push(Event { time, seq, kind });
    }

    pub fn pop(&mut self) -> Option<Event> {
        let ev = self.heap.pop()?;
        debug_assert!(ev.time >= self.clock, "clock would move backwards");
        self.clock = ev.time;
        Some(ev)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn probe_at(q: &mut EventQueue, secs: f64) {
        q.schedule(SimTime::from_secs(secs), EventKind::Probe);
    }

    #[test]
    fn dispatch_in_time_order() {
        let mut q = EventQueue::new();
        probe_at(&mut q, 5.0);
        probe_at(&mut q, 3.0);
        let first = q.pop().unwrap();
        let second = q.pop().unwrap();
        assert_eq!(first.time, SimTime::from_secs(3.0));
        assert_eq!(second.time, SimTime::from_secs(5.0));
    }

    #[test]
    fn equal_times_dispatch_in_schedule_order() {
        let mut q = EventQueue::new();
        probe_at(&mut q, 3.0);
        probe_at(&mut q, 3.0);
        let first = q.pop().unwrap();
        let second = q.pop().unwrap();
        assert!(first.seq < second.seq);
    }

    #[test]
    #[should_panic(expected = "behind clock")]
    fn scheduling_in_the_past_panics() {
        let mut q = EventQueue::new();
        probe_at(&mut q, 2.0);
        q.pop();
        probe_at(&mut q, 1.0);
    }

    #[test]
    fn clock_tracks_dispatch() {
        let mut q = EventQueue::new();
        probe_at(&mut q, 1.5);
        probe_at(&mut q, 2.5);
        assert_eq!(q.now(), SimTime::ZERO);
        q.pop();
        assert_eq!(q.now(), SimTime::from_secs(1.5));
        q.pop();
        assert_eq!(q.now(), SimTime::from_secs(2.5));
    }
}
