//! 3D random-waypoint mobility.
//!
//! Each node repeatedly picks a uniform point inside the arena box and
//! flies to it in a straight line at the scenario speed. Positions at
//! arbitrary virtual times come from linear interpolation along the
//! current leg.

use crate::rng::RandomStream;
use crate::time::SimTime;

#[derive(Clone, Copy, PartialEq, Default)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Vec3 { x, y, z }
    }

    pub fn distance(self, other: Vec3) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        let dz = self.z - other.z;
        (dx * dx + dy * dy + dz * dz).sqrt()
    }

    fn lerp(self, other: Vec3, t: f64) -> Vec3 {
        Vec3 {
            x: self.x + (other.x - self.x) * t,
            y: self.y + (other.y - self.y) * t,
            z: self.z + (other.z - self.z) * t,
        }
    }

    pub fn inside(self, extent: Vec3) -> bool {
        (0.0..=extent.x).contains(&self.x)
            && (0.0..=extent.y).contains(&self.y)
            && (0.0..=extent.z).contains(&self.z)
    }
}

impl std::fmt::Debug for Vec3 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({:.1}, {:.1}, {:.1})", self.x, self.y, self.z)
    }
}

pub fn uniform_point(rng: &mut RandomStream, extent: Vec3) -> Vec3 {
    Vec3 {
        x: rng.range_f64(0.0, extent.x),
        y: rng.range_f64(0.0, extent.y),
        z: rng.range_f64(0.0, extent.z),
    }
}

/// One straight-line leg of a node's motion, plus an optional pause at
/// the end of it. A parked node is a zero-length leg paused forever.
#[derive(Clone, Debug)]
pub struct NodeTrajectory {
    pub leg_start: Vec3,
    pub leg_end: Vec3,
    pub leg_start_time: SimTime,
    /// Meters per second; must be positive for a moving leg.
    pub speed: f64,
    pub pause_until: Option<SimTime>,
}

impl NodeTrajectory {
    /// A node that never moves.
    pub fn stationary(pos: Vec3, at: SimTime) -> Self {
        NodeTrajectory {
            leg_start: pos,
            leg_end: pos,
            leg_start_time: at,
            speed: 1.0,
            pause_until: Some(SimTime::MAX),
        }
    }

    /// Start a fresh leg toward a uniform waypoint in the arena.
    pub fn begin(pos: Vec3, speed: f64, at: SimTime, rng: &mut RandomStream, arena: Vec3) -> Self {
        debug_assert!(speed > 0.0);
        NodeTrajectory {
            leg_start: pos,
            leg_end: uniform_point(rng, arena),
            leg_start_time: at,
            speed,
            pause_until: None,
        }
    }

    /// When the node reaches `leg_end`.
    pub fn arrival_time(&self) -> SimTime {
        let dist = self.leg_start.distance(self.leg_end);
        self.leg_start_time + SimTime::from_secs(dist / self.speed)
    }

    /// End of the leg including any pause; the node stays put until then.
    pub fn leg_end_time(&self) -> SimTime {
        match self.pause_until {
            Some(p) => p.max(self.arrival_time()),
            None => self.arrival_time(),
        }
    }

    /// Position at virtual time `t`. Panics outside the leg window: the
    /// caller asked about a leg that is no longer (or not yet) current.
    pub fn position_at(&self, t: SimTime) -> Vec3 {
        assert!(
            t >= self.leg_start_time && t <= self.leg_end_time(),
            "time {:?} outside leg [{:?}, {:?}]",
            t,
            self.leg_start_time,
            self.leg_end_time()
        );
        let arrival = self.arrival_time();
        if t >= arrival {
            return self.leg_end;
        }
        let span = (arrival - self.leg_start_time).as_secs();
        if span == 0.0 {
            return self.leg_end;
        }
        let frac = (t - self.leg_start_time).as_secs() / span;
        self.leg_start.lerp(self.leg_end, frac)
    }

    /// Instantaneous velocity at time `t`: along the leg while moving,
    /// zero at the turn point or while paused.
    pub fn velocity_at(&self, t: SimTime) -> Vec3 {
        if t >= self.arrival_time() {
            return Vec3::default();
        }
        let dist = self.leg_start.distance(self.leg_end);
        if dist == 0.0 {
            return Vec3::default();
        }
        Vec3 {
            x: (self.leg_end.x - self.leg_start.x) / dist * self.speed,
            y: (self.leg_end.y - self.leg_start.y) / dist * self.speed,
            z: (self.leg_end.z - self.leg_start.z) / dist * self.speed,
        }
    }

    /// The next leg after this one completes. The new leg starts where
    /// the old one ended, at the arrival (plus pause) time.
    pub fn next_waypoint(&self, rng: &mut RandomStream, arena: Vec3) -> NodeTrajectory {
        NodeTrajectory {
            leg_start: self.leg_end,
            leg_end: uniform_point(rng, arena),
            leg_start_time: self.leg_end_time(),
            speed: self.speed,
            pause_until: None,
        }
    }
}

/// A completed leg kept for post-run trajectory replay (training labels
/// need future positions relative to a sample time).
#[derive(Clone, Debug)]
pub struct Leg {
    pub start: Vec3,
    pub end: Vec3,
    pub start_time: SimTime,
    pub speed: f64,
}

/// Replays recorded legs to answer position queries for a whole run.
#[derive(Clone, Debug, Default)]
pub struct TrajectoryLog {
    pub legs: Vec<Vec<Leg>>,
}

impl TrajectoryLog {
    pub fn new(nodes: usize) -> Self {
        TrajectoryLog {
            legs: vec![Vec::new(); nodes],
        }
    }

    pub fn record(&mut self, node: usize, traj: &NodeTrajectory) {
        self.legs[node].push(Leg {
            start: traj.leg_start,
            end: traj.leg_end,
            start_time: traj.leg_start_time,
            speed: traj.speed,
        });
    }

    /// Position of `node` at time `t`, or `None` past the recorded horizon.
    pub fn position(&self, node: usize, t: SimTime) -> Option<Vec3> {
        let legs = &self.legs[node];
        let idx = legs.partition_point(|l| l.start_time <= t);
        if idx == 0 {
            return None;
        }
        let leg = &legs[idx - 1];
        let dist = leg.start.distance(leg.end);
        let travel = (t - leg.start_time).as_secs() * leg.speed;
        if dist == 0.0 || travel >= dist {
            // Past the arrival point: parked there (pause, run end, or a
            // stationary node).
            Some(leg.end)
        } else {
            Some(leg.start.lerp(leg.end, travel / dist))
        }
    }
}
