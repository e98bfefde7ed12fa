//! Proactive link-state routing: periodic Hello neighbor sensing,
//! relay (MPR) selection, topology flooding via relays, and hop-count
//! shortest paths over the advertised graph.

use std::collections::{BTreeMap, BTreeSet};

use crate::link::NodeId;
use crate::time::SimTime;

/// What a node knows about one 1-hop neighbor.
#[derive(Clone, Debug)]
pub struct NeighborInfo {
    pub last_heard: SimTime,
    /// The neighbor's own advertised neighbor set.
    pub neighbors: BTreeSet<NodeId>,
}

/// 1-hop/2-hop neighborhood plus relay bookkeeping.
#[derive(Clone, Debug, Default)]
pub struct NeighborTable {
    pub one_hop: BTreeMap<NodeId, NeighborInfo>,
    pub mpr_set: BTreeSet<NodeId>,
    /// Neighbors that picked us as their relay, with freshness.
    pub mpr_selectors: BTreeMap<NodeId, SimTime>,
}

impl NeighborTable {
    /// Record a Hello from `from` advertising `their_neighbors`; learn
    /// whether we are in their relay set.
    pub fn process_hello(
        &mut self,
        own_id: NodeId,
        from: NodeId,
        their_neighbors: &[NodeId],
        their_mprs: &[NodeId],
        now: SimTime,
    ) {
        let info = self.one_hop.entry(from).or_insert_with(|| NeighborInfo {
            last_heard: now,
            neighbors: BTreeSet::new(),
        });
        info.last_heard = now;
        info.neighbors = their_neighbors.iter().copied().collect();
        info.neighbors.remove(&own_id);
        if their_mprs.contains(&own_id) {
            self.mpr_selectors.insert(from, now);
        } else {
            self.mpr_selectors.remove(&from);
        }
    }

    /// Drop neighbors and selectors silent for the full hold time.
    pub fn expire(&mut self, now: SimTime, hold: SimTime) {
        let cutoff = now.saturating_sub(hold);
        self.one_hop.retain(|_, info| info.last_heard > cutoff);
        self.mpr_selectors.retain(|_, &mut heard| heard > cutoff);
        let alive: BTreeSet<NodeId> = self.one_hop.keys().copied().collect();
        self.mpr_set.retain(|n| alive.contains(n));
    }

    /// Strict 2-hop map: neighbor -> the 2-hop nodes it covers
    /// (excluding ourselves and our 1-hop neighbors).
    pub fn two_hop(&self, own_id: NodeId) -> BTreeMap<NodeId, BTreeSet<NodeId>> {
        self.one_hop
            .iter()
            .map(|(&n, info)| {
                let cover: BTreeSet<NodeId> = info
                    .neighbors
                    .iter()
                    .copied()
                    .filter(|m| *m != own_id && !self.one_hop.contains_key(m))
                    .collect();
                (n, cover)
            })
            .collect()
    }

    pub fn recompute_mprs(&mut self, own_id: NodeId) {
        let two_hop = self.two_hop(own_id);
        self.mpr_set = select_mprs(&two_hop);
    }
}

/// Greedy minimum-ish cover of the 2-hop neighborhood: first take
/// neighbors that are the sole cover of some 2-hop node, then repeatedly
/// take the neighbor covering the most still-uncovered nodes, breaking
/// ties toward the lowest id.
pub fn select_mprs(two_hop: &BTreeMap<NodeId, BTreeSet<NodeId>>) -> BTreeSet<NodeId> {
    let mut uncovered: BTreeSet<NodeId> = two_hop.values().flatten().copied().collect();
    let mut mprs = BTreeSet::new();
    if uncovered.is_empty() {
        return mprs;
    }

    // Sole-cover pass.
    for target in uncovered.clone() {
        let coverers: Vec<NodeId> = two_hop
            .iter()
            .filter(|(_, cover)| cover.contains(&target))
            .map(|(&n, _)| n)
            .collect();
        if let [only] = coverers[..] {
            mprs.insert(only);
        }
    }
    for m in &mprs {
        for covered in &two_hop[m] {
            uncovered.remove(covered);
        }
    }

    // Max-cover passes.
    while !uncovered.is_empty() {
        let best = two_hop
            .iter()
            .filter(|(n, _)| !mprs.contains(n))
            .map(|(&n, cover)| (cover.intersection(&uncovered).count(), n))
            .max_by(|a, b| a.0.cmp(&b.0).then(b.1.cmp(&a.1)))
            .map(|(gain, n)| (gain, n));
        match best {
            Some((gain, n)) if gain > 0 => {
                mprs.insert(n);
                for covered in &two_hop[&n] {
                    uncovered.remove(covered);
                }
            }
            // Remaining 2-hop nodes are uncoverable (stale info).
            _ => break,
        }
    }
    mprs
}

/// Advertised (originator -> selector) links learned from TC floods.
#[derive(Clone, Debug, Default)]
pub struct TopologyTable {
    /// (advertiser, advertised neighbor) -> (sequence, expiry).
    pub entries: BTreeMap<(NodeId, NodeId), (u32, SimTime)>,
    /// Latest sequence seen per originator, for stale-TC rejection.
    newest_seq: BTreeMap<NodeId, u32>,
}

impl TopologyTable {
    /// Install a TC's advertised links; older-than-known sequences are
    /// ignored, newer ones replace the originator's previous entries.
    pub fn install(&mut self, originator: NodeId, seq: u32, selectors: &[NodeId], expiry: SimTime) {
        if let Some(&newest) = self.newest_seq.get(&originator) {
            if seq < newest {
                return;
            }
            if seq > newest {
                self.entries.retain(|&(adv, _), _| adv != originator);
            }
        }
        self.newest_seq.insert(originator, seq);
        for &sel in selectors {
            self.entries.insert((originator, sel), (seq, expiry));
        }
    }

    pub fn expire(&mut self, now: SimTime) {
        self.entries.retain(|_, &mut (_, expiry)| expiry > now);
    }

    pub fn edges(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        self.entries.keys().copied()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RouteEntry {
    pub next_hop: NodeId,
    pub hops: u32,
}

pub type RoutingTable = BTreeMap<NodeId, RouteEntry>;

/// Hop-count shortest paths from `own_id` over the node's 1-hop links
/// plus advertised topology edges (treated bidirectionally). Ties pick
/// the lexicographically smallest next hop. Unreachable destinations are
/// absent.
pub fn compute_routes(
    own_id: NodeId,
    one_hop: impl IntoIterator<Item = NodeId>,
    topology: impl IntoIterator<Item = (NodeId, NodeId)>,
) -> RoutingTable {
    let mut adj: BTreeMap<NodeId, BTreeSet<NodeId>> = BTreeMap::new();
    let direct: BTreeSet<NodeId> = one_hop.into_iter().collect();
    for &n in &direct {
        adj.entry(own_id).or_default().insert(n);
        adj.entry(n).or_default().insert(own_id);
    }
    for (a, b) in topology {
        adj.entry(a).or_default().insert(b);
        adj.entry(b).or_default().insert(a);
    }

    // Uniform edge weights: breadth-first order with deterministic
    // next-hop tie-breaking.
    let mut table = RoutingTable::new();
    let mut dist: BTreeMap<NodeId, u32> = BTreeMap::new();
    dist.insert(own_id, 0);
    let mut frontier = vec![own_id];
    while !frontier.is_empty() {
        frontier.sort_unstable();
        let mut next_frontier = Vec::new();
        for &u in &frontier {
            let du = dist[&u];
            let Some(neighbors) = adj.get(&u) else { continue };
            for &v in neighbors {
                if v == own_id {
                    continue;
                }
                let candidate_next = if u == own_id {
                    v
                } else {
                    table[&u].next_hop
                };
                match dist.get(&v) {
                    None => {
                        dist.insert(v, du + 1);
                        table.insert(
                            v,
                            RouteEntry {
                                next_hop: candidate_next,
                                hops: du + 1,
                            },
                        );
                        next_frontier.push(v);
                    }
                    Some(&dv) if dv == du + 1 => {
                        let entry = table.get_mut(&v).unwrap();
                        if candidate_next < entry.next_hop {
                            entry.next_hop = candidate_next;
                        }
                    }
                    _ => {}
                }
            }
        }
        frontier = next_frontier;
    }

    // Only keep destinations whose first hop is a live direct neighbor.
    table.retain(|_, entry| direct.contains(&entry.next_hop));
    table
}

/// Breadth-first shortest path over an undirected edge set, or `None`
/// when disconnected. Deterministic: neighbors are explored in id order.
pub fn shortest_path(
    start: NodeId,
    dst: NodeId,
    edges: &BTreeSet<(NodeId, NodeId)>,
) -> Option<Vec<NodeId>> {
    if start == dst {
        return Some(vec![start]);
    }
    let mut adj: BTreeMap<NodeId, BTreeSet<NodeId>> = BTreeMap::new();
    for &(a, b) in edges {
        adj.entry(a).or_default().insert(b);
        adj.entry(b).or_default().insert(a);
    }
    let mut prev: BTreeMap<NodeId, NodeId> = BTreeMap::new();
    let mut queue = std::collections::VecDeque::from([start]);
    while let Some(u) = queue.pop_front() {
        if u == dst {
            break;
        }
        let Some(neighbors) = adj.get(&u) else { continue };
        for &v in neighbors {
            if v != start && !prev.contains_key(&v) {
                prev.insert(v, u);
                queue.push_back(v);
            }
        }
    }
    if !prev.contains_key(&dst) {
        return None;
    }
    let mut path = vec![dst];
    while *path.last().unwrap() != start {
        path.push(prev[path.last().unwrap()]);
    }
    path.reverse();
    Some(path)
}

/// Per-node protocol state for a proactive run.
#[derive(Clone, Debug, Default)]
pub struct OlsrState {
    pub neighbors: NeighborTable,
    pub topology: TopologyTable,
    pub routes: RoutingTable,
    pub routes_dirty: bool,
    pub tc_seq: u32,
    /// (originator, seq) pairs already processed, for flood suppression.
    pub seen_tc: BTreeSet<(NodeId, u32)>,
}

impl OlsrState {
    pub fn refresh_routes(&mut self, own_id: NodeId, now: SimTime) {
        if !self.routes_dirty {
            return;
        }
        self.topology.expire(now);
        self.routes = compute_routes(
            own_id,
            self.neighbors.one_hop.keys().copied(),
            self.topology.edges(),
        );
        self.routes_dirty = false;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(ids: &[NodeId]) -> BTreeSet<NodeId> {
        ids.iter().copied().collect()
    }

    #[test]
    fn empty_two_hop_needs_no_relays() {
        let two_hop = BTreeMap::new();
        assert!(select_mprs(&two_hop).is_empty());
    }

    // Line A - B - C seen from A: B is the only candidate.
    #[test]
    fn sole_candidate_is_selected() {
        let mut two_hop = BTreeMap::new();
        two_hop.insert(1, set(&[2]));
        assert_eq!(select_mprs(&two_hop), set(&[1]));
    }

    // B covers {D, E}, C covers {E}: B alone suffices.
    #[test]
    fn max_cover_beats_partial_cover() {
        let mut two_hop = BTreeMap::new();
        two_hop.insert(1, set(&[3, 4]));
        two_hop.insert(2, set(&[4]));
        assert_eq!(select_mprs(&two_hop), set(&[1]));
    }

    #[test]
    fn ties_pick_lowest_id() {
        let mut two_hop = BTreeMap::new();
        two_hop.insert(5, set(&[10, 11]));
        two_hop.insert(3, set(&[10, 11]));
        assert_eq!(select_mprs(&two_hop), set(&[3]));
    }

    /// Brute-force minimum-cover oracle over all candidate subsets.
    pub(crate) fn minimum_cover_size(two_hop: &BTreeMap<NodeId, BTreeSet<NodeId>>) -> usize {
        let candidates: Vec<NodeId> = two_hop.keys().copied().collect();
        let targets: BTreeSet<NodeId> = two_hop.values().flatten().copied().collect();
        if targets.is_empty() {
            return 0;
        }
        let mut best = candidates.len();
        for mask in 0u32..(1 << candidates.len()) {
            let chosen: Vec<NodeId> = candidates
                .iter()
                .enumerate()
                .filter(|(i, _)| mask & (1 << i) != 0)
                .map(|(_, &n)| n)
                .collect();
            let covered: BTreeSet<NodeId> =
                chosen.iter().flat_map(|n| two_hop[n].iter().copied()).collect();
            if targets.is_subset(&covered) {
                best = best.min(chosen.len());
            }
        }
        best
    }

    #[test]
    fn greedy_matches_optimum_on_worked_examples() {
        let mut a = BTreeMap::new();
        a.insert(1, set(&[3, 4]));
        a.insert(2, set(&[4]));
        assert_eq!(select_mprs(&a).len(), minimum_cover_size(&a));

        let mut b = BTreeMap::new();
        b.insert(1, set(&[2]));
        assert_eq!(select_mprs(&b).len(), minimum_cover_size(&b));
    }

    #[test]
    fn selection_always_covers_all_two_hop_nodes() {
        // Deterministic pseudo-random neighborhoods.
        let mut state = 9u64;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1);
            (state >> 33) as usize
        };
        for _ in 0..500 {
            let n_neighbors = 1 + next() % 6;
            let mut two_hop: BTreeMap<NodeId, BTreeSet<NodeId>> = BTreeMap::new();
            for n in 0..n_neighbors {
                let mut cover = BTreeSet::new();
                for t in 0..(next() % 5) {
                    cover.insert(100 + (next() % 8) + t);
                }
                two_hop.insert(n, cover);
            }
            let mprs = select_mprs(&two_hop);
            let targets: BTreeSet<NodeId> = two_hop.values().flatten().copied().collect();
            let covered: BTreeSet<NodeId> =
                mprs.iter().flat_map(|m| two_hop[m].iter().copied()).collect();
            assert_eq!(covered, targets);
        }
    }

    #[test]
    fn hello_processing_builds_tables() {
        let mut tbl = NeighborTable::default();
        let now = SimTime::from_secs(1.0);
        tbl.process_hello(0, 1, &[0, 2], &[0], now);
        assert!(tbl.one_hop.contains_key(&1));
        assert_eq!(tbl.one_hop[&1].neighbors, set(&[2]));
        assert!(tbl.mpr_selectors.contains_key(&1));
        // A later hello that drops us from the relay set clears it.
        tbl.process_hello(0, 1, &[0, 2], &[], SimTime::from_secs(2.0));
        assert!(!tbl.mpr_selectors.contains_key(&1));
    }

    #[test]
    fn silent_neighbors_expire() {
        let mut tbl = NeighborTable::default();
        tbl.process_hello(0, 1, &[0], &[], SimTime::from_secs(1.0));
        tbl.process_hello(0, 2, &[0], &[], SimTime::from_secs(6.5));
        tbl.expire(SimTime::from_secs(7.0), SimTime::from_secs(6.0));
        assert!(!tbl.one_hop.contains_key(&1));
        assert!(tbl.one_hop.contains_key(&2));
    }

    #[test]
    fn topology_install_and_sequence_rules() {
        let mut topo = TopologyTable::default();
        let exp = SimTime::from_secs(15.0);
        topo.install(1, 5, &[2, 3], exp);
        assert_eq!(topo.entries.len(), 2);
        // Stale sequence ignored.
        topo.install(1, 4, &[9], exp);
        assert!(!topo.entries.contains_key(&(1, 9)));
        // Newer sequence replaces the originator's set.
        topo.install(1, 6, &[4], exp);
        assert_eq!(topo.edges().collect::<Vec<_>>(), vec![(1, 4)]);
    }

    #[test]
    fn expired_topology_entries_are_purged() {
        let mut topo = TopologyTable::default();
        topo.install(1, 1, &[2], SimTime::from_secs(10.0));
        topo.expire(SimTime::from_secs(11.0));
        assert_eq!(topo.entries.len(), 0);
    }

    #[test]
    fn one_hop_destination_routes_directly() {
        let table = compute_routes(0, [1, 2], []);
        assert_eq!(table[&1], RouteEntry { next_hop: 1, hops: 1 });
        assert_eq!(table[&2], RouteEntry { next_hop: 2, hops: 1 });
    }

    #[test]
    fn no_topology_means_no_remote_routes() {
        let table = compute_routes(0, [1], []);
        assert!(!table.contains_key(&7));
    }

    #[test]
    fn multi_hop_route_follows_advertised_edges() {
        // 0 - 1 - 2 - 3 advertised through topology entries.
        let table = compute_routes(0, [1], [(1, 2), (2, 3)]);
        assert_eq!(table[&3], RouteEntry { next_hop: 1, hops: 3 });
    }

    #[test]
    fn equal_cost_ties_choose_smallest_next_hop() {
        // 0 adjacent to 1 and 2, both reach 3.
        let table = compute_routes(0, [1, 2], [(1, 3), (2, 3)]);
        assert_eq!(table[&3].next_hop, 1);
    }

    /// BFS oracle for hop counts.
    pub(crate) fn bfs_distances(
        start: NodeId,
        edges: &[(NodeId, NodeId)],
    ) -> BTreeMap<NodeId, u32> {
        let mut adj: BTreeMap<NodeId, BTreeSet<NodeId>> = BTreeMap::new();
        for &(a, b) in edges {
            adj.entry(a).or_default().insert(b);
            adj.entry(b).or_default().insert(a);
        }
        let mut dist = BTreeMap::new();
        dist.insert(start, 0);
        let mut queue = std::collections::VecDeque::from([start]);
        while let Some(u) = queue.pop_front() {
            let du = dist[&u];
            if let Some(ns) = adj.get(&u) {
                for &v in ns {
                    dist.entry(v).or_insert_with(|| {
                        queue.push_back(v);
                        du + 1
                    });
                }
            }
        }
        dist
    }

    #[test]
    fn route_distances_match_bfs_oracle() {
        let mut state = 77u64;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 33) as usize
        };
        for _ in 0..300 {
            let n = 3 + next() % 8;
            let mut edges = Vec::new();
            for a in 0..n {
                for b in (a + 1)..n {
                    if next() % 3 == 0 {
                        edges.push((a, b));
                    }
                }
            }
            let one_hop: Vec<NodeId> = edges
                .iter()
                .filter(|&&(a, b)| a == 0 || b == 0)
                .map(|&(a, b)| if a == 0 { b } else { a })
                .collect();
            let table = compute_routes(0, one_hop.iter().copied(), edges.iter().copied());
            let oracle = bfs_distances(0, &edges);
            for (dst, entry) in &table {
                assert_eq!(oracle[dst], entry.hops, "dst {dst}");
                assert!(one_hop.contains(&entry.next_hop));
            }
            for (dst, d) in &oracle {
                if *dst != 0 {
                    assert_eq!(table[dst].hops, *d);
                }
            }
        }
    }
}
