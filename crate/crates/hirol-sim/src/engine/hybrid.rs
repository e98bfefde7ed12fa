//! Hybrid (HIROL) driver. Flows inside a zone route proactively off the
//! Hello-derived neighborhood; cross-zone flows route reactively through
//! the discovery machinery. Candidate routes pass through the link
//! classifier, ties go to the bee-colony optimizer, and installed routes
//! are re-validated periodically so weakening links are replaced before
//! they break.

use std::collections::BTreeSet;

use super::{Engine, ProtocolState};
use crate::abc::{self, RouteSnapshot, SnapshotEdge};
use crate::event::{EventKind, Timer};
use crate::hirol::{select_strategy, Strategy};
use crate::link::{NodeId, Packet, PacketBody};
use crate::olsr::shortest_path;
use crate::scenario::{LinkFilterMode, Protocol, RouteSelectMode};
use crate::time::SimTime;

impl Engine {
    pub(crate) fn hybrid_init(&mut self) {
        let n = self.sc.node_count as f64;
        let beacon = self.sc.beacon_factor * self.sc.tc_interval;
        for node in 0..self.sc.node_count {
            let hello0 = (node as f64 + 0.5) * self.sc.hello_interval / n;
            self.queue
                .schedule(SimTime::from_secs(hello0), EventKind::HelloDue { node });
            let tc0 = self.sc.hello_interval + (node as f64 + 0.5) * beacon / n;
            self.queue
                .schedule(SimTime::from_secs(tc0), EventKind::TcDue { node });
            let maint0 = self.sc.maintenance_interval * (1.0 + (node as f64 + 0.5) / n);
            self.queue.schedule(
                SimTime::from_secs(maint0),
                EventKind::TimerFire {
                    node,
                    timer: Timer::RouteMaintenance,
                },
            );
        }
    }

    pub(crate) fn on_hello_due_hirol(&mut self, node: NodeId, now: SimTime) {
        let pos = self.position(node, now);
        let zone = self.grid.zone_of(pos);
        let hello = self.sc.hello_interval * self.sc.hybrid_hello_factor;
        let hold = SimTime::from_secs(hello * self.sc.neighbor_hold_factor);
        let st = self.hirol_state(node);
        st.olsr.neighbors.expire(now, hold);
        st.olsr.neighbors.recompute_mprs(node);
        st.olsr.routes_dirty = true;
        let body = PacketBody::Hello {
            neighbors: st.olsr.neighbors.one_hop.keys().copied().collect(),
            mprs: st.olsr.neighbors.mpr_set.iter().copied().collect(),
            position: Some((pos, zone)),
        };
        let pkt = self.control_packet(node, body);
        self.enqueue_tx(node, None, pkt, now);
        let next = now + self.jittered(hello);
        self.queue.schedule(next, EventKind::HelloDue { node });
    }

    /// Zone summaries flood at beacon cadence, but only from the zone
    /// leader: the lowest id among the members it can currently see.
    /// That keeps the periodic flood count proportional to occupied
    /// zones rather than nodes.
    pub(crate) fn on_tc_due_hirol(&mut self, node: NodeId, now: SimTime) {
        let pos = self.position(node, now);
        let my_zone = self.grid.zone_of(pos);
        let st = self.hirol_state(node);
        let mut members: Vec<(NodeId, crate::mobility::Vec3)> = vec![(node, pos)];
        let neighbor_ids: Vec<NodeId> = st.olsr.neighbors.one_hop.keys().copied().collect();
        for nb in neighbor_ids {
            if let Some(rec) = st.registry.get(&nb) {
                if rec.zone == my_zone {
                    members.push((nb, rec.position));
                }
            }
        }
        let leader = members.iter().map(|&(id, _)| id).min().unwrap();
        if leader == node {
            st.olsr.tc_seq += 1;
            let seq = st.olsr.tc_seq;
            let selectors: Vec<NodeId> = st.olsr.neighbors.mpr_selectors.keys().copied().collect();
            st.olsr.seen_tc.insert((node, seq));
            let body = PacketBody::Tc {
                originator: node,
                seq,
                selectors,
                members,
            };
            let pkt = self.control_packet(node, body);
            self.enqueue_tx(node, None, pkt, now);
        }
        let beacon = self.sc.beacon_factor * self.sc.tc_interval;
        let next = now + self.jittered(beacon);
        self.queue.schedule(next, EventKind::TcDue { node });
    }

    pub(crate) fn hirol_on_arrival(&mut self, node: NodeId, pkt: Packet, now: SimTime) {
        match &pkt.body {
            PacketBody::Hello {
                neighbors,
                mprs,
                position,
            } => {
                let (neighbors, mprs, position) = (neighbors.clone(), mprs.clone(), *position);
                let from = pkt.prev_hop;
                let st = self.hirol_state(node);
                st.olsr
                    .neighbors
                    .process_hello(node, from, &neighbors, &mprs, now);
                st.olsr.neighbors.recompute_mprs(node);
                st.olsr.routes_dirty = true;
                if let Some((pos, zone)) = position {
                    st.record_position(from, pos, zone, now);
                }
            }
            PacketBody::Tc { .. } => self.on_arrival_tc(node, pkt.prev_hop, &pkt, now),
            PacketBody::Rreq { .. } => self.on_arrival_rreq(node, &pkt, now),
            PacketBody::Rrep { .. } => self.on_arrival_rrep(node, pkt, now),
            PacketBody::Rerr { .. } => self.on_arrival_rerr(node, &pkt, now),
            PacketBody::Data { .. } => self.forward_source_routed(node, pkt, now),
        }
    }

    // ---- the resolution pipeline -------------------------------------------

    /// A first hop counts as alive when hello traffic knows it or the
    /// link moved a frame successfully just now (fresh discovery routes
    /// traverse links the hello exchange has not confirmed yet).
    pub(crate) fn link_recently_alive(&self, a: NodeId, b: NodeId, now: SimTime) -> bool {
        if let ProtocolState::Hirol(st) = &self.nodes[a].proto {
            if st.olsr.neighbors.one_hop.contains_key(&b) {
                return true;
            }
        }
        let recent = SimTime::from_secs(3.0);
        let fresh = |t: Option<SimTime>| t.is_some_and(|t| now.saturating_sub(t) <= recent);
        fresh(self.history.last_success(a, b)) || fresh(self.history.last_success(b, a))
    }

    pub(crate) fn hirol_app_send(&mut self, n: NodeId, mut pkt: Packet, now: SimTime) {
        let dst = pkt.dst;
        let filtering =
            self.sc.link_filter == LinkFilterMode::Classifier && self.classifier.is_some();
        let installed = {
            match self.hirol_state(n).table.get(&dst) {
                Some(entry) => {
                    let route = entry.route.clone();
                    if route.len() >= 2 && self.link_recently_alive(n, route[1], now) {
                        Some(route)
                    } else {
                        self.hirol_state(n).table.remove(&dst);
                        None
                    }
                }
                None => None,
            }
        };
        match installed {
            // Send-time gate: a route the classifier still trusts is
            // used as is; a suspect one is re-resolved first.
            Some(route) if !filtering || self.route_stable(&route, now) => {
                pkt.route = route;
                self.forward_source_routed(n, pkt, now);
            }
            Some(_) => {
                self.hirol_state(n).table.remove(&dst);
                self.hirol_resolve(n, dst, Some(pkt), now);
            }
            None => self.hirol_resolve(n, dst, Some(pkt), now),
        }
    }

    /// Gather candidates per the zone strategy, filter, optimize, install,
    /// and send whatever was waiting. Falls back to reactive discovery
    /// when no candidate exists.
    pub(crate) fn hirol_resolve(
        &mut self,
        n: NodeId,
        dst: NodeId,
        pkt: Option<Packet>,
        now: SimTime,
    ) {
        self.hybrid_stats.resolves += 1;
        let my_zone = self.grid.zone_of(self.position(n, now));
        let zone_hold = SimTime::from_secs(3.0 * self.sc.beacon_factor * self.sc.tc_interval);
        let dst_zone = self.hirol_state(n).believed_zone(dst, now, zone_hold);
        // Unknown destination zone defaults to reactive discovery.
        let strategy = dst_zone.map_or(Strategy::Reactive, |z| select_strategy(my_zone, z));

        let mut candidates = if strategy == Strategy::Proactive {
            self.hirol_proactive_candidates(n, dst, now)
        } else {
            Vec::new()
        };
        if !candidates.is_empty() {
            self.hybrid_stats.proactive_routes += 1;
        }
        if candidates.is_empty() {
            candidates = self.fresh_cached_routes(n, dst, now);
            if !candidates.is_empty() {
                self.hybrid_stats.cache_routes += 1;
            }
        }
        if candidates.is_empty() {
            self.hybrid_stats.discoveries += 1;
            self.buffer_and_discover(n, dst, pkt, now);
            return;
        }

        let (route, all_rejected) = self.hirol_select_route(n, &candidates, now);
        if all_rejected && pkt.is_none() {
            // Nothing is waiting, so nothing forces a suspect route into
            // the table; fetch a fresh one instead.
            self.buffer_and_discover(n, dst, None, now);
            return;
        }
        self.install_route(n, dst, route.clone(), strategy, now);
        if let Some(mut pkt) = pkt {
            pkt.route = route.clone();
            self.forward_source_routed(n, pkt, now);
        }
        self.drain_pending(n, dst, &route, now);
        if all_rejected {
            // Availability beat prediction: traffic rides the suspect
            // route, but a replacement discovery starts right away.
            self.buffer_and_discover(n, dst, None, now);
        }
    }

    /// Discovery completed at the origin: choose among everything the
    /// cache now holds and install it.
    pub(crate) fn hirol_pick_reactive_route(
        &mut self,
        n: NodeId,
        dst: NodeId,
        now: SimTime,
    ) -> Option<Vec<NodeId>> {
        let candidates = self.fresh_cached_routes(n, dst, now);
        if candidates.is_empty() {
            return None;
        }
        let (route, _) = self.hirol_select_route(n, &candidates, now);
        self.install_route(n, dst, route.clone(), Strategy::Reactive, now);
        self.drain_pending(n, dst, &route.clone(), now);
        Some(route)
    }

    /// Cached candidates young enough that their links can still exist:
    /// beyond roughly a range-crossing time at the current speed a cached
    /// route is kinematically stale regardless of its TTL.
    fn fresh_cached_routes(&mut self, n: NodeId, dst: NodeId, now: SimTime) -> Vec<Vec<NodeId>> {
        let kinematic_ttl = SimTime::from_secs(self.sc.radio_range / self.sc.speed);
        let st = self.hirol_state(n);
        let mut routes = st.dsr.cache.routes_newer_than(
            dst,
            now,
            now.saturating_sub(kinematic_ttl),
        );
        routes.retain(|r| r.len() >= 2 && self.link_recently_alive(n, r[1], now));
        routes
    }

    fn install_route(
        &mut self,
        n: NodeId,
        dst: NodeId,
        route: Vec<NodeId>,
        strategy: Strategy,
        now: SimTime,
    ) {
        let route = self.shortcut_route(n, route, now);
        debug_assert!(crate::dsr::is_simple(&route));
        debug_assert_eq!(route.first(), Some(&n));
        debug_assert_eq!(route.last(), Some(&dst));
        self.hirol_state(n).table.insert(
            dst,
            crate::hirol::HybridRoute {
                route,
                strategy,
                installed_at: now,
                last_validated: now,
            },
        );
    }

    /// Directed-walk routes carry detours; splice out interior nodes
    /// whose endpoints sit comfortably within range of each other per
    /// the position registry. Conservative margin so a pruned hop is a
    /// real link.
    fn shortcut_route(&mut self, n: NodeId, route: Vec<NodeId>, now: SimTime) -> Vec<NodeId> {
        if route.len() <= 2 {
            return route;
        }
        let est = |eng: &mut Self, id: NodeId| -> Option<crate::mobility::Vec3> {
            if id == n {
                return Some(eng.position(n, now));
            }
            eng.hirol_state(n).registry.get(&id).map(|r| r.position)
        };
        let margin = 0.85 * self.sc.radio_range;
        let mut pruned = vec![route[0]];
        let mut i = 0;
        while i + 1 < route.len() {
            let mut next = i + 1;
            if let Some(pi) = est(self, route[i]) {
                for j in ((i + 2)..route.len()).rev() {
                    if let Some(pj) = est(self, route[j]) {
                        if pi.distance(pj) <= margin {
                            next = j;
                            break;
                        }
                    }
                }
            }
            pruned.push(route[next]);
            i = next;
        }
        pruned
    }

    fn drain_pending(&mut self, n: NodeId, dst: NodeId, route: &[NodeId], now: SimTime) {
        let Some(pending) = self.reactive_state(n).pending.remove(&dst) else {
            return;
        };
        let timeout = SimTime::from_secs(self.sc.buffer_timeout);
        for mut pkt in pending.buffered {
            if now.saturating_sub(pkt.created_at) > timeout {
                self.drop_data(crate::metrics::DropCause::BufferTimeout, now);
                continue;
            }
            pkt.route = route.to_vec();
            self.forward_source_routed(n, pkt, now);
        }
    }

    /// Best local-graph path plus up to two edge-disjoint-ish alternates.
    /// The local graph is what Hello traffic plus zone summaries taught
    /// this node: its own links, its neighbors' links, and advertised
    /// relay links.
    fn hirol_proactive_candidates(
        &mut self,
        n: NodeId,
        dst: NodeId,
        now: SimTime,
    ) -> Vec<Vec<NodeId>> {
        let norm = |a: NodeId, b: NodeId| (a.min(b), a.max(b));
        let st = self.hirol_state(n);
        st.olsr.topology.expire(now);
        let mut edges: BTreeSet<(NodeId, NodeId)> = BTreeSet::new();
        for (&nb, info) in &st.olsr.neighbors.one_hop {
            edges.insert(norm(n, nb));
            for &nn in &info.neighbors {
                edges.insert(norm(nb, nn));
            }
        }
        for (a, b) in st.olsr.topology.edges() {
            edges.insert(norm(a, b));
        }
        let one_hop: BTreeSet<NodeId> = st.olsr.neighbors.one_hop.keys().copied().collect();

        let Some(best) = shortest_path(n, dst, &edges) else {
            return Vec::new();
        };
        let mut candidates = vec![best.clone()];
        for pair in best.windows(2) {
            if candidates.len() >= 3 {
                break;
            }
            let mut pruned = edges.clone();
            pruned.remove(&norm(pair[0], pair[1]));
            if let Some(alt) = shortest_path(n, dst, &pruned) {
                if !candidates.contains(&alt) {
                    candidates.push(alt);
                }
            }
        }
        candidates.retain(|r| r.len() >= 2 && one_hop.contains(&r[1]));
        candidates
    }

    /// Classifier filter, then the optimizer over the survivors' edge
    /// union. A filter that rejects everything falls back to the best
    /// pre-filter candidate — availability beats prediction — and the
    /// second element of the return reports that so callers can line up
    /// a replacement.
    fn hirol_select_route(
        &mut self,
        n: NodeId,
        candidates: &[Vec<NodeId>],
        now: SimTime,
    ) -> (Vec<NodeId>, bool) {
        debug_assert!(!candidates.is_empty());
        let filtering =
            self.sc.link_filter == LinkFilterMode::Classifier && self.classifier.is_some();
        let survivors: Vec<Vec<NodeId>> = if filtering {
            candidates
                .iter()
                .filter(|r| self.route_stable(r, now))
                .cloned()
                .collect()
        } else {
            candidates.to_vec()
        };
        let all_rejected = filtering && survivors.is_empty();
        if all_rejected {
            self.hybrid_stats.filter_rejected_all += 1;
        }
        let pool = if survivors.is_empty() {
            vec![candidates[0].clone()]
        } else {
            survivors
        };
        if pool.len() == 1 || self.sc.route_select == RouteSelectMode::FirstCandidate {
            return (pool[0].clone(), all_rejected);
        }
        self.hybrid_stats.optimizer_runs += 1;
        let snapshot = self.build_snapshot(n, &pool);
        let route = match abc::optimize(&snapshot, &self.sc.abc, &mut self.streams.abc) {
            Ok(outcome) => outcome.best.route.unwrap_or_else(|| pool[0].clone()),
            Err(_) => pool[0].clone(),
        };
        (route, all_rejected)
    }

    /// Every link of the route classifies stable under current features.
    pub(crate) fn route_stable(&self, route: &[NodeId], now: SimTime) -> bool {
        let Some(net) = &self.classifier else {
            return true;
        };
        route.windows(2).all(|pair| {
            let ctx = self.link_context(pair[0], pair[1], now);
            let features = crate::ann::extract_features(&ctx);
            crate::ann::classify_link(net, &features, self.sc.ann.threshold).label
                == crate::ann::LinkLabel::Stable
        })
    }

    /// Edge union of the candidate pool with current quality and delay
    /// estimates; the optimizer works on this frozen view.
    fn build_snapshot(&self, n: NodeId, pool: &[Vec<NodeId>]) -> RouteSnapshot {
        let now = self.queue.now();
        let dst = *pool[0].last().unwrap();
        let base_delay = (self.sc.packet_size as f64 + 40.0) * 8.0 / self.sc.bitrate_bps
            + self.sc.processing_delay;
        let mut seen = BTreeSet::new();
        let mut edges = Vec::new();
        for route in pool {
            for pair in route.windows(2) {
                let key = (pair[0].min(pair[1]), pair[0].max(pair[1]));
                if !seen.insert(key) {
                    continue;
                }
                let quality = self
                    .history
                    .quality(key.0, key.1, now)
                    .min(self.history.quality(key.1, key.0, now));
                let backlog = self.nodes[pair[0]].radio.backlog(now).as_secs();
                edges.push(SnapshotEdge {
                    a: key.0,
                    b: key.1,
                    quality,
                    hop_delay: base_delay + backlog,
                });
            }
        }
        RouteSnapshot {
            edges,
            src: n,
            dst,
            network_size: self.sc.node_count,
            delay_cap: base_delay * self.sc.node_count as f64,
        }
    }

    // ---- break handling and maintenance --------------------------------------

    pub(crate) fn hirol_purge_broken(
        &mut self,
        node: NodeId,
        broken: (NodeId, NodeId),
        now: SimTime,
    ) {
        let st = self.hirol_state(node);
        // The detector has link-layer proof the neighbor is gone.
        if node == broken.0 {
            st.olsr.neighbors.one_hop.remove(&broken.1);
            st.olsr.neighbors.mpr_selectors.remove(&broken.1);
            st.olsr.neighbors.recompute_mprs(node);
            st.olsr.routes_dirty = true;
        }
        let affected = st.purge_broken_edge(broken.0, broken.1);
        for dst in affected {
            self.hirol_schedule_reresolve(node, dst, now);
        }
    }

    pub(crate) fn hirol_schedule_reresolve_after_break(
        &mut self,
        node: NodeId,
        _broken: (NodeId, NodeId),
        _now: SimTime,
    ) {
        // Purging already scheduled re-resolution for every affected
        // destination; nothing further to do at the source.
        let _ = node;
    }

    fn hirol_schedule_reresolve(&mut self, node: NodeId, dst: NodeId, now: SimTime) {
        let until = now + SimTime::from_secs(self.sc.reresolve_backoff);
        let st = self.hirol_state(node);
        if st.backoff_until.get(&dst).is_some_and(|&t| t > now) {
            return;
        }
        st.backoff_until.insert(dst, until);
        self.queue.schedule(
            until,
            EventKind::TimerFire {
                node,
                timer: Timer::ReResolve { dst },
            },
        );
    }

    pub(crate) fn hirol_on_reresolve(&mut self, node: NodeId, dst: NodeId, now: SimTime) {
        if self.sc.protocol != Protocol::Hirol {
            return;
        }
        self.hirol_state(node).backoff_until.remove(&dst);
        if self.hirol_state(node).table.contains_key(&dst) {
            return;
        }
        self.hirol_resolve(node, dst, None, now);
    }

    /// Periodic route upkeep: drop entries whose first hop vanished, and
    /// when a classifier is live, replace routes whose weakest link now
    /// classifies unstable before they actually break.
    pub(crate) fn hirol_on_maintenance(&mut self, node: NodeId, now: SimTime) {
        if self.sc.protocol != Protocol::Hirol {
            return;
        }
        let filtering =
            self.sc.link_filter == LinkFilterMode::Classifier && self.classifier.is_some();
        let entries: Vec<(NodeId, Vec<NodeId>, SimTime)> = self
            .hirol_state(node)
            .table
            .iter()
            .map(|(&dst, e)| (dst, e.route.clone(), e.installed_at))
            .collect();
        let grace = SimTime::from_secs(self.sc.maintenance_interval / 2.0);
        for (dst, route, installed_at) in entries {
            if now.saturating_sub(installed_at) < grace {
                continue;
            }
            let first_hop_alive =
                route.len() >= 2 && self.link_recently_alive(node, route[1], now);
            if !first_hop_alive {
                // Unusable; the next send for this flow rediscovers.
                self.hybrid_stats.maintenance_dead_first_hop += 1;
                self.hirol_state(node).table.remove(&dst);
                continue;
            }
            if filtering && !self.route_stable(&route, now) {
                // Swap to an already-known alternative if one exists;
                // never flood from maintenance. A weakening route with
                // no substitute keeps carrying traffic until it breaks.
                let mut candidates = self.hirol_proactive_candidates(node, dst, now);
                if candidates.is_empty() {
                    candidates = self.fresh_cached_routes(node, dst, now);
                }
                candidates.retain(|r| *r != route && self.route_stable(r, now));
                if !candidates.is_empty() {
                    self.hybrid_stats.maintenance_swaps += 1;
                    let (replacement, _) = self.hirol_select_route(node, &candidates, now);
                    let strategy = self.hirol_state(node).table[&dst].strategy;
                    self.install_route(node, dst, replacement, strategy, now);
                }
            } else if let Some(entry) = self.hirol_state(node).table.get_mut(&dst) {
                entry.last_validated = now;
            }
        }
        let next = now + self.jittered(self.sc.maintenance_interval);
        self.queue.schedule(
            next,
            EventKind::TimerFire {
                node,
                timer: Timer::RouteMaintenance,
            },
        );
    }
}
