//! Proactive (OLSR) protocol driver: periodic Hello and TC traffic,
//! relay-based flooding, and hop-by-hop table forwarding.

use super::Engine;
use crate::event::EventKind;
use crate::link::{NodeId, Packet, PacketBody, PacketKind, Transmission};
use crate::metrics::DropCause;
use crate::time::SimTime;

impl Engine {
    pub(crate) fn proactive_init(&mut self) {
        let n = self.sc.node_count as f64;
        for node in 0..self.sc.node_count {
            let hello0 = (node as f64 + 0.5) * self.sc.hello_interval / n;
            self.queue
                .schedule(SimTime::from_secs(hello0), EventKind::HelloDue { node });
            // First TC goes out after a Hello round has seeded selectors.
            let tc0 = self.sc.hello_interval + (node as f64 + 0.5) * self.sc.tc_interval / n;
            self.queue
                .schedule(SimTime::from_secs(tc0), EventKind::TcDue { node });
        }
    }

    pub(crate) fn on_hello_due_olsr(&mut self, node: NodeId, now: SimTime) {
        let hold = SimTime::from_secs(self.sc.hello_interval * self.sc.neighbor_hold_factor);
        let st = self.olsr_state(node);
        st.neighbors.expire(now, hold);
        st.neighbors.recompute_mprs(node);
        st.routes_dirty = true;
        let body = PacketBody::Hello {
            neighbors: st.neighbors.one_hop.keys().copied().collect(),
            mprs: st.neighbors.mpr_set.iter().copied().collect(),
            position: None,
        };
        let pkt = self.control_packet(node, body);
        self.enqueue_tx(node, None, pkt, now);
        let next = now + self.jittered(self.sc.hello_interval);
        self.queue.schedule(next, EventKind::HelloDue { node });
    }

    pub(crate) fn on_tc_due_olsr(&mut self, node: NodeId, now: SimTime) {
        let st = self.olsr_state(node);
        if !st.neighbors.mpr_selectors.is_empty() {
            st.tc_seq += 1;
            let seq = st.tc_seq;
            let selectors: Vec<NodeId> = st.neighbors.mpr_selectors.keys().copied().collect();
            st.seen_tc.insert((node, seq));
            let body = PacketBody::Tc {
                originator: node,
                seq,
                selectors,
                members: Vec::new(),
            };
            let pkt = self.control_packet(node, body);
            self.enqueue_tx(node, None, pkt, now);
        }
        let next = now + self.jittered(self.sc.tc_interval);
        self.queue.schedule(next, EventKind::TcDue { node });
    }

    pub(crate) fn on_arrival_hello_olsr(
        &mut self,
        node: NodeId,
        from: NodeId,
        neighbors: &[NodeId],
        mprs: &[NodeId],
        now: SimTime,
    ) {
        let st = self.olsr_state(node);
        st.neighbors.process_hello(node, from, neighbors, mprs, now);
        st.neighbors.recompute_mprs(node);
        st.routes_dirty = true;
    }

    /// Process a TC copy and re-flood it if we are a relay of the hop it
    /// came from. Duplicates are suppressed entirely.
    pub(crate) fn on_arrival_tc(
        &mut self,
        node: NodeId,
        prev_hop: NodeId,
        pkt: &Packet,
        now: SimTime,
    ) {
        let PacketBody::Tc {
            originator,
            seq,
            ref selectors,
            ref members,
        } = pkt.body
        else {
            unreachable!()
        };
        if originator == node {
            return;
        }
        let expiry = now + SimTime::from_secs(3.0 * self.sc.tc_interval);
        let st = self.olsr_state(node);
        if !st.seen_tc.insert((originator, seq)) {
            return;
        }
        st.topology.install(originator, seq, selectors, expiry);
        st.routes_dirty = true;
        let forward = st.neighbors.mpr_selectors.contains_key(&prev_hop);

        // Hybrid zone summaries also refresh the position registry.
        if !members.is_empty() {
            let records: Vec<(NodeId, crate::mobility::Vec3)> = members.clone();
            let grid = self.grid;
            let hst = self.hirol_state(node);
            for (member, pos) in records {
                hst.record_position(member, pos, grid.zone_of(pos), now);
            }
        }

        if forward {
            let mut copy = pkt.clone();
            copy.hops.clear();
            self.enqueue_tx(node, None, copy, now);
        }
    }

    /// Route a data packet from `node` using its routing table.
    pub(crate) fn olsr_route_data(&mut self, node: NodeId, pkt: Packet, now: SimTime) {
        if pkt.hops.len() >= self.sc.node_count {
            self.drop_data(DropCause::RoutingLoop, now);
            return;
        }
        let dst = pkt.dst;
        let st = self.olsr_state(node);
        st.refresh_routes(node, now);
        match st.routes.get(&dst) {
            Some(entry) => {
                let next = entry.next_hop;
                self.enqueue_tx(node, Some(next), pkt, now);
            }
            None => self.drop_data(DropCause::NoRoute, now),
        }
    }

    pub(crate) fn olsr_on_arrival(&mut self, node: NodeId, pkt: Packet, now: SimTime) {
        match &pkt.body {
            PacketBody::Hello {
                neighbors, mprs, ..
            } => {
                let (neighbors, mprs) = (neighbors.clone(), mprs.clone());
                self.on_arrival_hello_olsr(node, pkt.prev_hop, &neighbors, &mprs, now);
            }
            PacketBody::Tc { .. } => self.on_arrival_tc(node, pkt.prev_hop, &pkt, now),
            PacketBody::Data { .. } => self.olsr_route_data(node, pkt, now),
            // Pure proactive runs carry no reactive control traffic.
            _ => {}
        }
    }

    /// Link-layer feedback: a data frame that exhausted its retries
    /// evicts the dead neighbor and the packet re-routes through the
    /// updated table at this hop.
    pub(crate) fn olsr_hop_failure(&mut self, tx: Transmission, now: SimTime) {
        if tx.packet.kind() != PacketKind::Data {
            return;
        }
        let Some(to) = tx.to else { return };
        let st = self.olsr_state(tx.from);
        st.neighbors.one_hop.remove(&to);
        st.neighbors.mpr_selectors.remove(&to);
        st.neighbors.recompute_mprs(tx.from);
        st.routes_dirty = true;
        self.olsr_route_data(tx.from, tx.packet, now);
    }
}
