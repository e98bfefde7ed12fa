//! The hybrid controller: spatial zones decide per-flow strategy
//! (proactive inside a zone, reactive across zones), a trained link
//! classifier filters candidate routes, and the bee-colony optimizer
//! refines the survivors before a route is installed.

use std::collections::BTreeMap;

use crate::ann::{classify_link, extract_features, LinkContext, LinkFeatures, LinkLabel, Mlp};
use crate::dsr::DsrState;
use crate::link::{NodeId, ZoneId};
use crate::mobility::Vec3;
use crate::olsr::OlsrState;
use crate::time::SimTime;

/// Static spatial grid over the arena. Every in-arena point maps to
/// exactly one cell; out-of-arena points clamp to the boundary cell.
#[derive(Clone, Copy, Debug)]
pub struct ZoneGrid {
    pub cell: Vec3,
    pub arena: Vec3,
}

impl ZoneGrid {
    pub fn new(cell: Vec3, arena: Vec3) -> Self {
        ZoneGrid { cell, arena }
    }

    pub fn zone_of(&self, p: Vec3) -> ZoneId {
        let idx = |v: f64, cell: f64, extent: f64| -> u32 {
            let max_cell = ((extent / cell).ceil() as i64 - 1).max(0);
            let i = (v / cell).floor() as i64;
            i.clamp(0, max_cell) as u32
        };
        (
            idx(p.x, self.cell.x, self.arena.x),
            idx(p.y, self.cell.y, self.arena.y),
            idx(p.z, self.cell.z, self.arena.z),
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Strategy {
    Proactive,
    Reactive,
}

/// Same zone routes proactively, different zones reactively.
pub fn select_strategy(src_zone: ZoneId, dst_zone: ZoneId) -> Strategy {
    if src_zone == dst_zone {
        Strategy::Proactive
    } else {
        Strategy::Reactive
    }
}

#[derive(Clone, Debug)]
pub struct HybridRoute {
    pub route: Vec<NodeId>,
    pub strategy: Strategy,
    pub installed_at: SimTime,
    pub last_validated: SimTime,
}

/// What a node believes about another node's whereabouts.
#[derive(Clone, Copy, Debug)]
pub struct PositionRecord {
    pub position: Vec3,
    pub zone: ZoneId,
    pub heard_at: SimTime,
}

/// Per-node hybrid state: the proactive and reactive substrates plus the
/// hybrid routing table and the position registry.
#[derive(Clone, Debug)]
pub struct HirolState {
    pub olsr: OlsrState,
    pub dsr: DsrState,
    pub table: BTreeMap<NodeId, HybridRoute>,
    pub registry: BTreeMap<NodeId, PositionRecord>,
    /// Per-destination re-resolution backoff after a break.
    pub backoff_until: BTreeMap<NodeId, SimTime>,
}

impl HirolState {
    pub fn new(cache_ttl: f64, routes_per_destination: usize) -> Self {
        HirolState {
            olsr: OlsrState::default(),
            dsr: DsrState::new(cache_ttl, routes_per_destination),
            table: BTreeMap::new(),
            registry: BTreeMap::new(),
            backoff_until: BTreeMap::new(),
        }
    }

    pub fn record_position(&mut self, node: NodeId, position: Vec3, zone: ZoneId, heard_at: SimTime) {
        let stale = self
            .registry
            .get(&node)
            .is_some_and(|r| r.heard_at > heard_at);
        if !stale {
            self.registry.insert(node, PositionRecord { position, zone, heard_at });
        }
    }

    pub fn believed_zone(&self, node: NodeId, now: SimTime, hold: SimTime) -> Option<ZoneId> {
        let rec = self.registry.get(&node)?;
        (now.saturating_sub(rec.heard_at) <= hold).then_some(rec.zone)
    }

    /// Drop every installed route using link `(u, v)`; returns affected
    /// destinations.
    pub fn purge_broken_edge(&mut self, u: NodeId, v: NodeId) -> Vec<NodeId> {
        let mut affected = Vec::new();
        self.table.retain(|&dst, entry| {
            let broken = entry
                .route
                .windows(2)
                .any(|w| (w[0] == u && w[1] == v) || (w[0] == v && w[1] == u));
            if broken {
                affected.push(dst);
            }
            !broken
        });
        self.dsr.cache.purge_edge(u, v);
        affected
    }
}

/// Per-link inputs the filter needs, precomputed by the engine.
#[derive(Clone, Copy, Debug)]
pub struct LinkAssessment {
    pub features: LinkFeatures,
}

/// Verdict of the classifier over one candidate route: the score of its
/// weakest link.
pub fn weakest_link_score(
    route: &[NodeId],
    classifier: Option<&Mlp>,
    threshold: f64,
    mut assess: impl FnMut(NodeId, NodeId) -> Option<LinkContext>,
) -> (f64, bool) {
    let Some(net) = classifier else {
        // No classifier: everything counts as stable.
        return (1.0, true);
    };
    let mut min_score = 1.0f64;
    let mut stable = true;
    for pair in route.windows(2) {
        let Some(ctx) = assess(pair[0], pair[1]) else {
            return (0.0, false);
        };
        let status = classify_link(net, &extract_features(&ctx), threshold);
        min_score = min_score.min(status.score);
        stable &= status.label == LinkLabel::Stable;
    }
    (min_score, stable)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> ZoneGrid {
        ZoneGrid::new(Vec3::new(200.0, 200.0, 200.0), Vec3::new(800.0, 800.0, 200.0))
    }

    #[test]
    fn origin_is_zone_zero() {
        assert_eq!(grid().zone_of(Vec3::new(0.0, 0.0, 0.0)), (0, 0, 0));
    }

    #[test]
    fn boundaries_floor_into_the_next_cell() {
        assert_eq!(grid().zone_of(Vec3::new(199.9, 200.0, 50.0)), (0, 1, 0));
    }

    #[test]
    fn far_corner_maps_to_last_cell() {
        assert_eq!(grid().zone_of(Vec3::new(799.0, 799.0, 199.0)), (3, 3, 0));
    }

    #[test]
    fn out_of_arena_points_clamp() {
        assert_eq!(grid().zone_of(Vec3::new(805.0, -3.0, 100.0)), (3, 0, 0));
        // The arena edge itself belongs to the boundary cell.
        assert_eq!(grid().zone_of(Vec3::new(800.0, 800.0, 200.0)), (3, 3, 0));
    }

    #[test]
    fn every_arena_point_maps_to_one_zone() {
        let g = grid();
        let mut state = 3u64;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1);
            (state >> 33) as f64 / (1u64 << 31) as f64
        };
        for _ in 0..2000 {
            let p = Vec3::new(next() * 800.0, next() * 800.0, next() * 200.0);
            let z = g.zone_of(p);
            assert!(z.0 < 4 && z.1 < 4 && z.2 < 1, "{z:?}");
        }
    }

    #[test]
    fn strategy_follows_zone_equality() {
        assert_eq!(select_strategy((1, 1, 0), (1, 1, 0)), Strategy::Proactive);
        assert_eq!(select_strategy((1, 1, 0), (2, 1, 0)), Strategy::Reactive);
        // Degenerate: identical points are trivially the same zone.
        let z = grid().zone_of(Vec3::new(40.0, 40.0, 40.0));
        assert_eq!(select_strategy(z, z), Strategy::Proactive);
    }

    #[test]
    fn purge_drops_only_routes_using_the_edge() {
        let mut st = HirolState::new(30.0, 3);
        let now = SimTime::from_secs(1.0);
        st.table.insert(
            5,
            HybridRoute {
                route: vec![0, 1, 2, 5],
                strategy: Strategy::Reactive,
                installed_at: now,
                last_validated: now,
            },
        );
        st.table.insert(
            6,
            HybridRoute {
                route: vec![0, 3, 6],
                strategy: Strategy::Reactive,
                installed_at: now,
                last_validated: now,
            },
        );
        let affected = st.purge_broken_edge(2, 1);
        assert_eq!(affected, vec![5]);
        assert!(st.table.contains_key(&6));
    }

    #[test]
    fn registry_keeps_newest_record() {
        let mut st = HirolState::new(30.0, 3);
        st.record_position(4, Vec3::new(1.0, 1.0, 1.0), (0, 0, 0), SimTime::from_secs(5.0));
        st.record_position(4, Vec3::new(2.0, 2.0, 2.0), (1, 0, 0), SimTime::from_secs(3.0));
        assert_eq!(st.registry[&4].zone, (0, 0, 0));
        assert_eq!(
            st.believed_zone(4, SimTime::from_secs(6.0), SimTime::from_secs(10.0)),
            Some((0, 0, 0))
        );
        assert_eq!(
            st.believed_zone(4, SimTime::from_secs(20.0), SimTime::from_secs(10.0)),
            None
        );
    }

    #[test]
    fn missing_classifier_treats_links_as_stable() {
        let (score, stable) = weakest_link_score(&[0, 1, 2], None, 0.5, |_, _| None);
        assert_eq!(score, 1.0);
        assert!(stable);
    }
}
