//! Reactive source routing: on-demand discovery by request flooding,
//! replies carrying the full route, a bounded per-destination route
//! cache, and error-driven cache invalidation.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use crate::link::{NodeId, Packet};
use crate::time::SimTime;

#[derive(Clone, Debug, PartialEq)]
pub struct CachedRoute {
    /// Full path from the owning node to the destination.
    pub route: Vec<NodeId>,
    pub learned_at: SimTime,
}

/// Bounded per-destination cache of discovered routes.
#[derive(Clone, Debug)]
pub struct RouteCache {
    entries: BTreeMap<NodeId, Vec<CachedRoute>>,
    pub ttl: SimTime,
    pub per_destination: usize,
}

impl RouteCache {
    pub fn new(ttl_secs: f64, per_destination: usize) -> Self {
        RouteCache {
            entries: BTreeMap::new(),
            ttl: SimTime::from_secs(ttl_secs),
            per_destination,
        }
    }

    /// Insert a route (owner first, destination last). Duplicates refresh
    /// their timestamp; overflow evicts the oldest entry.
    pub fn insert(&mut self, route: Vec<NodeId>, now: SimTime) {
        debug_assert!(route.len() >= 2);
        debug_assert!(is_simple(&route));
        let dst = *route.last().unwrap();
        let list = self.entries.entry(dst).or_default();
        if let Some(existing) = list.iter_mut().find(|c| c.route == route) {
            existing.learned_at = now;
            return;
        }
        list.push(CachedRoute { route, learned_at: now });
        if list.len() > self.per_destination {
            let oldest = list
                .iter()
                .enumerate()
                .min_by_key(|(_, c)| c.learned_at)
                .map(|(i, _)| i)
                .unwrap();
            list.remove(oldest);
        }
    }

    /// Best non-expired route: freshest age class first (thirds of the
    /// TTL), shortest within a class, then lexicographic for full
    /// determinism.
    pub fn lookup(&self, dst: NodeId, now: SimTime) -> Option<&[NodeId]> {
        let list = self.entries.get(&dst)?;
        let class_width = SimTime::from_micros((self.ttl.as_micros() / 3).max(1));
        list.iter()
            .filter(|c| now.saturating_sub(c.learned_at) <= self.ttl)
            .min_by_key(|c| {
                let age = now.saturating_sub(c.learned_at).as_micros();
                (
                    age / class_width.as_micros(),
                    c.route.len(),
                    c.route.clone(),
                )
            })
            .map(|c| c.route.as_slice())
    }

    /// Non-expired routes to `dst` learned at or after `cutoff`, best
    /// first.
    pub fn routes_newer_than(
        &self,
        dst: NodeId,
        now: SimTime,
        cutoff: SimTime,
    ) -> Vec<Vec<NodeId>> {
        self.routes(dst, now)
            .into_iter()
            .filter(|r| {
                self.entries
                    .get(&dst)
                    .is_some_and(|list| list.iter().any(|c| c.route == *r && c.learned_at >= cutoff))
            })
            .collect()
    }

    /// All non-expired routes to `dst`, best first (same ordering as
    /// `lookup`).
    pub fn routes(&self, dst: NodeId, now: SimTime) -> Vec<Vec<NodeId>> {
        let Some(list) = self.entries.get(&dst) else {
            return Vec::new();
        };
        let class_width = SimTime::from_micros((self.ttl.as_micros() / 3).max(1));
        let mut fresh: Vec<&CachedRoute> = list
            .iter()
            .filter(|c| now.saturating_sub(c.learned_at) <= self.ttl)
            .collect();
        fresh.sort_by_key(|c| {
            let age = now.saturating_sub(c.learned_at).as_micros();
            (age / class_width.as_micros(), c.route.len(), c.route.clone())
        });
        fresh.into_iter().map(|c| c.route.clone()).collect()
    }

    /// Remove every cached route that uses the link `(u, v)` in either
    /// direction. Returns how many routes were dropped.
    pub fn purge_edge(&mut self, u: NodeId, v: NodeId) -> usize {
        let mut removed = 0;
        self.entries.retain(|_, list| {
            list.retain(|c| {
                let broken = c
                    .route
                    .windows(2)
                    .any(|w| (w[0] == u && w[1] == v) || (w[0] == v && w[1] == u));
                removed += broken as usize;
                !broken
            });
            !list.is_empty()
        });
        removed
    }

    pub fn contains_edge(&self, u: NodeId, v: NodeId) -> bool {
        self.entries.values().flatten().any(|c| {
            c.route
                .windows(2)
                .any(|w| (w[0] == u && w[1] == v) || (w[0] == v && w[1] == u))
        })
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

pub fn is_simple(route: &[NodeId]) -> bool {
    let set: BTreeSet<NodeId> = route.iter().copied().collect();
    set.len() == route.len()
}

/// An outstanding discovery with the traffic it is holding back.
#[derive(Clone, Debug)]
pub struct PendingDiscovery {
    pub request_id: u32,
    pub issued_at: SimTime,
    pub retries: u32,
    pub buffered: VecDeque<Packet>,
}

/// Per-node reactive routing state.
#[derive(Clone, Debug)]
pub struct DsrState {
    pub cache: RouteCache,
    pub pending: BTreeMap<NodeId, PendingDiscovery>,
    /// (origin, request id) pairs already forwarded or answered.
    pub seen_requests: BTreeSet<(NodeId, u32)>,
    /// Reply count per request when a target answers multiple copies.
    pub replies_sent: BTreeMap<(NodeId, u32), u32>,
    pub next_request_id: u32,
}

impl DsrState {
    pub fn new(ttl_secs: f64, per_destination: usize) -> Self {
        DsrState {
            cache: RouteCache::new(ttl_secs, per_destination),
            pending: BTreeMap::new(),
            seen_requests: BTreeSet::new(),
            replies_sent: BTreeMap::new(),
            next_request_id: 0,
        }
    }

    pub fn fresh_request_id(&mut self) -> u32 {
        let id = self.next_request_id;
        self.next_request_id += 1;
        id
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(secs: f64) -> SimTime {
        SimTime::from_secs(secs)
    }

    #[test]
    fn empty_cache_has_no_route() {
        let cache = RouteCache::new(30.0, 3);
        assert_eq!(cache.lookup(5, t(0.0)), None);
    }

    #[test]
    fn expired_routes_are_never_returned() {
        let mut cache = RouteCache::new(30.0, 3);
        cache.insert(vec![0, 1, 5], t(0.0));
        assert!(cache.lookup(5, t(29.0)).is_some());
        assert_eq!(cache.lookup(5, t(31.0)), None);
    }

    #[test]
    fn fresh_tie_prefers_shorter_route() {
        let mut cache = RouteCache::new(30.0, 3);
        cache.insert(vec![0, 1, 2, 5], t(1.0));
        cache.insert(vec![0, 3, 5], t(1.0));
        assert_eq!(cache.lookup(5, t(2.0)), Some(&[0, 3, 5][..]));
    }

    #[test]
    fn fresher_age_class_wins_over_length() {
        let mut cache = RouteCache::new(30.0, 3);
        cache.insert(vec![0, 3, 5], t(0.0));
        cache.insert(vec![0, 1, 2, 5], t(25.0));
        // At t=29 the short route is in the oldest age class.
        assert_eq!(cache.lookup(5, t(29.0)), Some(&[0, 1, 2, 5][..]));
    }

    #[test]
    fn capacity_evicts_oldest() {
        let mut cache = RouteCache::new(30.0, 2);
        cache.insert(vec![0, 1, 5], t(0.0));
        cache.insert(vec![0, 2, 5], t(1.0));
        cache.insert(vec![0, 3, 5], t(2.0));
        let routes = cache.routes(5, t(2.0));
        assert_eq!(routes.len(), 2);
        assert!(!routes.contains(&vec![0, 1, 5]));
    }

    #[test]
    fn purge_removes_exactly_broken_routes() {
        let mut cache = RouteCache::new(30.0, 3);
        cache.insert(vec![0, 1, 2, 5], t(0.0));
        cache.insert(vec![0, 3, 4, 5], t(0.0));
        let removed = cache.purge_edge(1, 2);
        assert_eq!(removed, 1);
        assert_eq!(cache.routes(5, t(0.0)), vec![vec![0, 3, 4, 5]]);
    }

    #[test]
    fn purge_handles_both_edge_orientations() {
        let mut cache = RouteCache::new(30.0, 3);
        cache.insert(vec![0, 1, 2], t(0.0));
        assert_eq!(cache.purge_edge(2, 1), 1);
        assert!(cache.is_empty());
    }

    #[test]
    fn purge_leaves_unrelated_routes() {
        let mut cache = RouteCache::new(30.0, 3);
        cache.insert(vec![0, 3, 5], t(0.0));
        assert_eq!(cache.purge_edge(1, 2), 0);
        assert!(cache.lookup(5, t(0.0)).is_some());
    }

    // Set-difference oracle: removing routes through (u, v) must equal
    // filtering the original set by edge membership.
    #[test]
    fn purge_matches_set_difference_oracle() {
        let all: Vec<Vec<NodeId>> = vec![
            vec![0, 1, 2, 7],
            vec![0, 2, 1, 7],
            vec![0, 3, 7],
            vec![0, 1, 4, 7],
            vec![0, 4, 2, 7],
        ];
        let (u, v) = (1, 2);
        let mut cache = RouteCache::new(30.0, 10);
        for r in &all {
            cache.insert(r.clone(), t(0.0));
        }
        cache.purge_edge(u, v);
        let survivors: Vec<Vec<NodeId>> = all
            .iter()
            .filter(|r| {
                !r.windows(2)
                    .any(|w| (w[0] == u && w[1] == v) || (w[0] == v && w[1] == u))
            })
            .cloned()
            .collect();
        let mut got = cache.routes(7, t(0.0));
        got.sort();
        let mut want = survivors;
        want.sort();
        assert_eq!(got, want);
    }

    #[test]
    fn duplicate_insert_refreshes_timestamp() {
        let mut cache = RouteCache::new(30.0, 3);
        cache.insert(vec![0, 1, 5], t(0.0));
        cache.insert(vec![0, 1, 5], t(20.0));
        assert!(cache.lookup(5, t(45.0)).is_some());
        assert_eq!(cache.routes(5, t(45.0)).len(), 1);
    }

    #[test]
    fn request_ids_are_unique() {
        let mut st = DsrState::new(30.0, 3);
        let a = st.fresh_request_id();
        let b = st.fresh_request_id();
        assert_ne!(a, b);
    }
}
