//! Reactive (DSR-style) driver: request flooding, reply handling, error
//! propagation, and the send buffer that holds traffic during discovery.
//! Hybrid nodes reuse all of it; their hooks are dispatched on the
//! scenario protocol where behavior differs.

use super::Engine;
use crate::event::{EventKind, Timer};
use crate::link::{DiscoveryMode, NodeId, Packet, PacketBody, PacketKind, Transmission};
use crate::metrics::DropCause;
use crate::scenario::Protocol;
use crate::time::SimTime;

impl Engine {
    // ---- sending ---------------------------------------------------------

    pub(crate) fn dsr_app_send(&mut self, n: NodeId, mut pkt: Packet, now: SimTime) {
        let dst = pkt.dst;
        let cached = self
            .reactive_state(n)
            .cache
            .lookup(dst, now)
            .map(<[NodeId]>::to_vec);
        match cached {
            Some(route) => {
                pkt.route = route;
                self.forward_source_routed(n, pkt, now);
            }
            None => self.buffer_and_discover(n, dst, Some(pkt), now),
        }
    }

    /// Queue `pkt` (if any) behind a discovery for `dst`, starting one if
    /// none is pending.
    pub(crate) fn buffer_and_discover(
        &mut self,
        n: NodeId,
        dst: NodeId,
        pkt: Option<Packet>,
        now: SimTime,
    ) {
        let capacity = self.sc.send_buffer_capacity;
        let mut overflow = 0u32;
        let st = self.reactive_state(n);
        if let Some(pending) = st.pending.get_mut(&dst) {
            if let Some(pkt) = pkt {
                pending.buffered.push_back(pkt);
                while pending.buffered.len() > capacity {
                    pending.buffered.pop_front();
                    overflow += 1;
                }
            }
            for _ in 0..overflow {
                self.drop_data(DropCause::BufferOverflow, now);
            }
            return;
        }

        let request_id = st.fresh_request_id();
        st.seen_requests.insert((n, request_id));
        let mut buffered = std::collections::VecDeque::new();
        if let Some(pkt) = pkt {
            buffered.push_back(pkt);
        }
        st.pending.insert(
            dst,
            crate::dsr::PendingDiscovery {
                request_id,
                issued_at: now,
                retries: 0,
                buffered,
            },
        );
        let greedy = self.send_rreq(n, dst, request_id, true, now);
        // Directed walks either answer within a round trip or not at
        // all, so their timer is much tighter than a flood's.
        let timeout = if greedy {
            (self.sc.discovery_timeout / 4.0).max(0.2)
        } else {
            self.sc.discovery_timeout
        };
        self.queue.schedule(
            now + SimTime::from_secs(timeout),
            EventKind::TimerFire {
                node: n,
                timer: Timer::DiscoveryTimeout { dst, request_id },
            },
        );
    }

    fn send_rreq(
        &mut self,
        n: NodeId,
        dst: NodeId,
        request_id: u32,
        first_attempt: bool,
        now: SimTime,
    ) -> bool {
        // Hybrid nodes with a current position estimate first try a
        // cheap directed walk; retries and position-blind discoveries
        // fall back to flooding, scoped when an estimate exists at all.
        let mode = if self.sc.protocol == Protocol::Hirol {
            match self.greedy_target_hint(n, dst, now) {
                Some((hint, hint_time)) if first_attempt => {
                    self.hybrid_stats.greedy_walks += 1;
                    DiscoveryMode::Greedy {
                        target_hint: hint,
                        hint_time,
                    }
                }
                Some(_) => {
                    self.hybrid_stats.scoped_floods += 1;
                    DiscoveryMode::Flood {
                        scoped: true,
                        record_limit: None,
                    }
                }
                None => {
                    self.hybrid_stats.unscoped_floods += 1;
                    DiscoveryMode::Flood {
                        scoped: false,
                        record_limit: None,
                    }
                }
            }
        } else {
            DiscoveryMode::Flood {
                scoped: false,
                record_limit: None,
            }
        };
        let body = PacketBody::Rreq {
            origin: n,
            target: dst,
            request_id,
            record: vec![n],
            avoid: Vec::new(),
            mode,
        };
        let pkt = self.control_packet(n, body);
        let greedy = matches!(mode, DiscoveryMode::Greedy { .. });
        match mode {
            DiscoveryMode::Greedy {
                target_hint,
                hint_time,
            } => {
                // The walk starts here: pick our own best next hop.
                if let Some(next) =
                    self.greedy_next_hop(n, dst, (target_hint, hint_time), &[n], now)
                {
                    self.enqueue_tx(n, Some(next), pkt, now);
                } else {
                    let mut pkt = pkt;
                    let PacketBody::Rreq {
                        ref mut mode,
                        ref record,
                        ..
                    } = pkt.body
                    else {
                        unreachable!()
                    };
                    *mode = DiscoveryMode::Flood {
                        scoped: true,
                        record_limit: Some(record.len() + 3),
                    };
                    self.hybrid_stats.widen_origin += 1;
                    self.enqueue_tx(n, None, pkt, now);
                }
            }
            DiscoveryMode::Flood { .. } => self.enqueue_tx(n, None, pkt, now),
        }
        greedy
    }

    /// Position estimate good enough to aim a directed walk. The walk
    /// re-aims at every hop from fresher local registries, so this
    /// tolerates more staleness than corridor pruning.
    fn greedy_target_hint(
        &mut self,
        n: NodeId,
        dst: NodeId,
        now: SimTime,
    ) -> Option<(crate::mobility::Vec3, SimTime)> {
        let hold = SimTime::from_secs(1.5 * self.sc.beacon_factor * self.sc.tc_interval);
        let st = self.hirol_state(n);
        let rec = st.registry.get(&dst)?;
        (now.saturating_sub(rec.heard_at) <= hold).then_some((rec.position, rec.heard_at))
    }

    /// The strictly-closer neighbor nearest to the destination estimate,
    /// never revisiting nodes the walk already traversed.
    fn greedy_next_hop(
        &mut self,
        n: NodeId,
        dst: NodeId,
        hint: (crate::mobility::Vec3, SimTime),
        visited: &[NodeId],
        now: SimTime,
    ) -> Option<NodeId> {
        // Re-aim only from records fresher than the carried hint.
        let aim = {
            let st = self.hirol_state(n);
            match st.registry.get(&dst) {
                Some(r) if r.heard_at > hint.1 => r.position,
                _ => hint.0,
            }
        };
        let here = self.position(n, now).distance(aim);
        let st = self.hirol_state(n);
        let neighbors: Vec<NodeId> = st.olsr.neighbors.one_hop.keys().copied().collect();
        let mut best: Option<(f64, NodeId)> = None;
        let threshold = self.sc.ann.threshold;
        let mut fallback: Option<(f64, NodeId)> = None;
        let classify = |eng: &Self, nb: NodeId| -> bool {
            match &eng.classifier {
                Some(net) => {
                    let ctx = eng.link_context(n, nb, now);
                    let features = crate::ann::extract_features(&ctx);
                    crate::ann::classify_link(net, &features, threshold).label
                        == crate::ann::LinkLabel::Stable
                }
                None => true,
            }
        };
        // Preference order: stable progress, then a stable detour (any
        // unvisited stable neighbor nearest the aim), then unstable
        // progress. The visited list keeps detours finite.
        let mut detour: Option<(f64, NodeId)> = None;
        for nb in neighbors {
            if visited.contains(&nb) {
                continue;
            }
            // Gate every step through the link classifier when present:
            // a fast-looking hop onto a dying link wastes the walk.
            let stable = classify(self, nb);
            if nb == dst && stable {
                return Some(nb);
            }
            let Some(rec) = self.hirol_state(n).registry.get(&nb).copied() else {
                continue;
            };
            let d = rec.position.distance(aim);
            if stable {
                if d < here && best.map_or(true, |(bd, _)| d < bd) {
                    best = Some((d, nb));
                }
                if detour.map_or(true, |(dd, _)| d < dd) {
                    detour = Some((d, nb));
                }
            } else if d < here && fallback.map_or(true, |(fd, _)| d < fd) {
                fallback = Some((d, nb));
            }
        }
        best.or(detour).or(fallback).map(|(_, nb)| nb)
    }

    /// Where `n` believes `dst` currently is, for flood scoping. Only
    /// records fresh enough that the drift since fits inside the
    /// corridor slack are trusted; anything older floods unscoped.
    pub(crate) fn believed_position(
        &mut self,
        n: NodeId,
        dst: NodeId,
        now: SimTime,
    ) -> Option<crate::mobility::Vec3> {
        if self.sc.protocol != Protocol::Hirol {
            return None;
        }
        let hold = SimTime::from_secs(self.sc.corridor_slack / (2.0 * self.sc.speed));
        let st = self.hirol_state(n);
        let rec = st.registry.get(&dst)?;
        (now.saturating_sub(rec.heard_at) <= hold).then_some(rec.position)
    }

    // ---- request handling --------------------------------------------------

    pub(crate) fn on_arrival_rreq(&mut self, node: NodeId, pkt: &Packet, now: SimTime) {
        let PacketBody::Rreq {
            origin,
            target,
            request_id,
            ref record,
            mode,
            ..
        } = pkt.body
        else {
            unreachable!()
        };

        // The target answers the first copy; hybrid targets answer up to
        // one extra copy per cacheable route so the origin has genuine
        // alternatives to filter and optimize over. The legacy
        // answer-every-copy behavior stays available as a toggle.
        let reply_budget = if self.sc.reply_to_all_requests {
            u32::MAX
        } else if self.sc.protocol == Protocol::Hirol {
            self.sc.routes_per_destination as u32
        } else {
            1
        };
        let st = self.reactive_state(node);
        let first_copy = st.seen_requests.insert((origin, request_id));

        if node == target {
            let sent = st.replies_sent.entry((origin, request_id)).or_insert(0);
            if *sent < reply_budget {
                *sent += 1;
                let mut route = record.clone();
                route.push(node);
                // Cache the reverse path toward the origin.
                let mut reversed = route.clone();
                reversed.reverse();
                self.reactive_state(node).cache.insert(reversed.clone(), now);
                let target_pos = (self.sc.protocol == Protocol::Hirol)
                    .then(|| self.position(node, now));
                let body = PacketBody::Rrep {
                    request_id,
                    route: route.clone(),
                    target_pos,
                };
                let mut reply = self.control_packet(node, body);
                reply.dst = origin;
                reply.route = reversed;
                self.forward_source_routed(node, reply, now);
            }
            return;
        }
        if !first_copy {
            return;
        }
        if record.contains(&node) {
            return;
        }
        // Record-length guard against runaway requests.
        if record.len() + 1 > self.sc.node_count {
            return;
        }
        let mut fwd = pkt.clone();
        let PacketBody::Rreq { ref mut record, .. } = fwd.body else {
            unreachable!()
        };
        record.push(node);
        fwd.hops.clear();
        match mode {
            DiscoveryMode::Greedy {
                target_hint,
                hint_time,
            } => {
                let visited = {
                    let PacketBody::Rreq {
                        ref record,
                        ref avoid,
                        ..
                    } = fwd.body
                    else {
                        unreachable!()
                    };
                    let mut v = record.clone();
                    v.extend(avoid);
                    v
                };
                if let Some(next) =
                    self.greedy_next_hop(node, target, (target_hint, hint_time), &visited, now)
                {
                    self.enqueue_tx(node, Some(next), fwd, now);
                } else {
                    // Stuck at a local minimum: the walk got near the
                    // estimate, so a short-radius flood from here should
                    // reach the destination without waking the network.
                    let PacketBody::Rreq {
                        ref mut mode,
                        ref record,
                        ..
                    } = fwd.body
                    else {
                        unreachable!()
                    };
                    *mode = DiscoveryMode::Flood {
                        scoped: true,
                        record_limit: Some(record.len() + 2),
                    };
                    self.hybrid_stats.widen_stuck += 1;
                    self.enqueue_tx(node, None, fwd, now);
                }
            }
            DiscoveryMode::Flood {
                scoped,
                record_limit,
            } => {
                if record_limit.is_some_and(|cap| {
                    let PacketBody::Rreq { ref record, .. } = fwd.body else {
                        unreachable!()
                    };
                    record.len() > cap
                }) {
                    return;
                }
                if scoped && !self.corridor_allows(node, pkt.prev_hop, target, now) {
                    return;
                }
                self.enqueue_tx(node, None, fwd, now);
            }
        }
    }

    /// Scoped-flood predicate: forward only if it does not move the
    /// request away from the believed destination position by more than
    /// the corridor slack.
    fn corridor_allows(&mut self, node: NodeId, prev: NodeId, target: NodeId, now: SimTime) -> bool {
        let Some(dst_pos) = self.believed_position(node, target, now) else {
            // Without an opinion of our own, stay permissive.
            return true;
        };
        let here = self.position(node, now).distance(dst_pos);
        let before = self.position(prev, now).distance(dst_pos);
        here <= before + self.sc.corridor_slack
    }

    // ---- reply handling ------------------------------------------------------

    pub(crate) fn on_arrival_rrep(&mut self, node: NodeId, pkt: Packet, now: SimTime) {
        let PacketBody::Rrep {
            ref route,
            target_pos,
            ..
        } = pkt.body
        else {
            unreachable!()
        };
        let route = route.clone();
        if let Some(pos) = target_pos {
            let target = *route.last().unwrap();
            let zone = self.grid.zone_of(pos);
            self.hirol_state(node).record_position(target, pos, zone, now);
        }
        let pos = route
            .iter()
            .position(|&x| x == node)
            .expect("reply strayed off its return path");
        // Learn the suffix from here to the destination.
        if route.len() - pos >= 2 {
            self.reactive_state(node)
                .cache
                .insert(route[pos..].to_vec(), now);
        }
        if pos == 0 {
            self.on_discovery_complete(node, *route.last().unwrap(), now);
        } else {
            self.forward_source_routed(node, pkt, now);
        }
    }

    /// The origin learned at least one route to `dst`: install, drain the
    /// buffer, cancel the pending discovery.
    fn on_discovery_complete(&mut self, n: NodeId, dst: NodeId, now: SimTime) {
        match self.sc.protocol {
            Protocol::Dsr => {
                let route = self
                    .reactive_state(n)
                    .cache
                    .lookup(dst, now)
                    .map(<[NodeId]>::to_vec);
                let Some(route) = route else { return };
                let Some(pending) = self.reactive_state(n).pending.remove(&dst) else {
                    return;
                };
                for mut pkt in pending.buffered {
                    pkt.route = route.clone();
                    self.forward_source_routed(n, pkt, now);
                }
            }
            Protocol::Hirol => {
                // Selection installs the route; the hybrid drain applies
                // the buffer timeout.
                let _ = self.hirol_pick_reactive_route(n, dst, now);
            }
            Protocol::Olsr => unreachable!(),
        }
    }

    // ---- timers -----------------------------------------------------------------

    pub(crate) fn on_discovery_timeout(
        &mut self,
        n: NodeId,
        dst: NodeId,
        request_id: u32,
        now: SimTime,
    ) {
        if self.sc.protocol == Protocol::Olsr {
            return;
        }
        let retries_allowed = self.sc.discovery_retries;
        let st = self.reactive_state(n);
        let Some(pending) = st.pending.get_mut(&dst) else {
            return;
        };
        if pending.request_id != request_id {
            return; // a newer round owns the timer now
        }
        if pending.retries >= retries_allowed {
            let pending = st.pending.remove(&dst).unwrap();
            for _ in pending.buffered {
                self.drop_data(DropCause::DiscoveryFailed, now);
            }
            return;
        }
        pending.retries += 1;
        let retries = pending.retries;
        let new_id = st.fresh_request_id();
        st.pending.get_mut(&dst).unwrap().request_id = new_id;
        st.seen_requests.insert((n, new_id));
        self.send_rreq(n, dst, new_id, false, now);
        let backoff = self.sc.discovery_timeout * f64::powi(2.0, retries as i32);
        self.queue.schedule(
            now + SimTime::from_secs(backoff),
            EventKind::TimerFire {
                node: n,
                timer: Timer::DiscoveryTimeout { dst, request_id: new_id },
            },
        );
    }

    // ---- failures and errors ------------------------------------------------------

    pub(crate) fn reactive_hop_failure(&mut self, tx: Transmission, now: SimTime) {
        let Some(to) = tx.to else { return };
        match tx.packet.kind() {
            PacketKind::Data => {
                let broken = (tx.from, to);
                let route = tx.packet.route.clone();
                if self.sc.protocol == Protocol::Hirol
                    && tx.packet.salvage_count < self.sc.salvage_limit
                    && tx.from != *route.last().unwrap_or(&tx.from)
                {
                    // Re-queue the stranded packet onto whatever fresh
                    // route this relay can resolve, instead of losing it.
                    let mut pkt = tx.packet;
                    pkt.salvage_count += 1;
                    pkt.route = Vec::new();
                    self.hybrid_stats.salvages += 1;
                    self.handle_broken_link(tx.from, broken, &route, now);
                    self.hirol_app_send(tx.from, pkt, now);
                } else {
                    self.drop_data(DropCause::LinkFailed, now);
                    self.handle_broken_link(tx.from, broken, &route, now);
                }
            }
            PacketKind::Rreq => {
                // A directed walk stepped onto a dead link: remember the
                // neighbor, try the next-best step, and only widen into
                // a short-radius flood when no step is left.
                let mut pkt = tx.packet;
                let PacketBody::Rreq {
                    target,
                    ref mut record,
                    ref mut avoid,
                    ref mut mode,
                    ..
                } = pkt.body
                else {
                    return;
                };
                let DiscoveryMode::Greedy {
                    target_hint,
                    hint_time,
                } = *mode
                else {
                    return;
                };
                avoid.push(to);
                let mut visited = record.clone();
                visited.extend(avoid.iter());
                let record_len = record.len();
                let next = self.greedy_next_hop(
                    tx.from,
                    target,
                    (target_hint, hint_time),
                    &visited,
                    now,
                );
                pkt.hops.clear();
                match next {
                    Some(next) => {
                        self.hybrid_stats.walk_sidesteps += 1;
                        self.enqueue_tx(tx.from, Some(next), pkt, now);
                    }
                    None => {
                        let PacketBody::Rreq { ref mut mode, .. } = pkt.body else {
                            unreachable!()
                        };
                        *mode = DiscoveryMode::Flood {
                            scoped: true,
                            record_limit: Some(record_len + 2),
                        };
                        self.hybrid_stats.widen_linkfail += 1;
                        self.enqueue_tx(tx.from, None, pkt, now);
                    }
                }
            }
            // Lost replies are recovered by the discovery timer; lost
            // errors simply delay cache invalidation.
            _ => {}
        }
    }

    /// A data transmission on `route` failed at `broken`. Purge locally
    /// and tell the source (and, in hybrid runs, anyone else reachable).
    fn handle_broken_link(
        &mut self,
        detector: NodeId,
        broken: (NodeId, NodeId),
        route: &[NodeId],
        now: SimTime,
    ) {
        self.purge_broken(detector, broken, now);
        let pos = route.iter().position(|&x| x == detector);
        match pos {
            Some(0) | None => {
                // The detector is the source itself.
                self.on_source_learned_break(detector, broken, now);
            }
            Some(p) => {
                let mut path: Vec<NodeId> = route[..=p].to_vec();
                path.reverse();
                let body = PacketBody::Rerr { broken, path: path.clone() };
                let mut rerr = self.control_packet(detector, body);
                rerr.dst = *path.last().unwrap();
                rerr.route = path;
                self.forward_source_routed(detector, rerr, now);
            }
        }
        // Best effort toward the destination so it can purge too.
        if self.sc.protocol == Protocol::Hirol {
            let dst = *route.last().unwrap();
            if dst != detector {
                let onward = self
                    .reactive_state(detector)
                    .cache
                    .lookup(dst, now)
                    .map(<[NodeId]>::to_vec);
                if let Some(onward) = onward {
                    let body = PacketBody::Rerr {
                        broken,
                        path: onward.clone(),
                    };
                    let mut rerr = self.control_packet(detector, body);
                    rerr.dst = dst;
                    rerr.route = onward;
                    self.forward_source_routed(detector, rerr, now);
                }
            }
        }
    }

    pub(crate) fn on_arrival_rerr(&mut self, node: NodeId, pkt: &Packet, now: SimTime) {
        let PacketBody::Rerr { broken, ref path } = pkt.body else {
            unreachable!()
        };
        self.purge_broken(node, broken, now);
        let pos = path.iter().position(|&x| x == node).unwrap_or(usize::MAX);
        if pos != usize::MAX && pos + 1 < path.len() {
            self.forward_source_routed(node, pkt.clone(), now);
        } else {
            self.on_source_learned_break(node, broken, now);
        }
    }

    fn purge_broken(&mut self, node: NodeId, broken: (NodeId, NodeId), now: SimTime) {
        match self.sc.protocol {
            Protocol::Dsr => {
                self.reactive_state(node).cache.purge_edge(broken.0, broken.1);
            }
            Protocol::Hirol => self.hirol_purge_broken(node, broken, now),
            Protocol::Olsr => {}
        }
    }

    /// End of an error path: the source reacts per protocol. Plain
    /// reactive sources rediscover lazily on the next send; the hybrid
    /// controller schedules an immediate re-resolution.
    fn on_source_learned_break(&mut self, node: NodeId, broken: (NodeId, NodeId), now: SimTime) {
        if self.sc.protocol == Protocol::Hirol {
            self.hirol_schedule_reresolve_after_break(node, broken, now);
        }
    }

    // ---- arrival dispatch -----------------------------------------------------------

    pub(crate) fn dsr_on_arrival(&mut self, node: NodeId, pkt: Packet, now: SimTime) {
        match &pkt.body {
            PacketBody::Rreq { .. } => self.on_arrival_rreq(node, &pkt, now),
            PacketBody::Rrep { .. } => self.on_arrival_rrep(node, pkt, now),
            PacketBody::Rerr { .. } => self.on_arrival_rerr(node, &pkt, now),
            PacketBody::Data { .. } => {
                // Mid-route forwarding; destination handled upstream.
                self.forward_source_routed(node, pkt, now);
            }
            // Reactive runs carry no proactive control traffic.
            _ => {}
        }
    }

}
