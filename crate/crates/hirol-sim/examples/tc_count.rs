use hirol_sim::mobility::{uniform_point, Vec3};
use hirol_sim::rng::{RandomStream, StreamId};
use hirol_sim::scenario::{MobilityModel, Protocol, Scenario};

fn main() {
    let mut rng = RandomStream::new(4, StreamId::Mobility);
    let arena = Vec3::new(800.0, 800.0, 200.0);
    let pos: Vec<Vec3> = (0..20).map(|_| uniform_point(&mut rng, arena)).collect();
    for (label, speed, mobility, positions) in [
        ("static", 20.0, MobilityModel::Static, Some(pos)),
        ("mobile35", 35.0, MobilityModel::RandomWaypoint, None),
    ] {
        let sc = Scenario {
            protocol: Protocol::Olsr,
            mobility,
            positions,
            speed,
            sim_time: 60.0,
            cbr_connections: Some(2),
            ..Scenario::default()
        };
        let out = hirol_sim::run(&sc).unwrap();
        println!(
            "{label}: control tx {:?}, pdr {:.3}",
            out.metrics.control_messages, out.metrics.pdr
        );
    }
}
