use hirol_sim::link::in_range;
use hirol_sim::mobility::{uniform_point, Vec3};
use hirol_sim::rng::{RandomStream, StreamId};
use hirol_sim::scenario::{MobilityModel, Protocol, Scenario};

fn connected(pos: &[Vec3], range: f64) -> bool {
    let n = pos.len();
    let mut seen = vec![false; n];
    let mut stack = vec![0];
    seen[0] = true;
    while let Some(u) = stack.pop() {
        for v in 0..n {
            if !seen[v] && in_range(pos[u], pos[v], range) {
                seen[v] = true;
                stack.push(v);
            }
        }
    }
    seen.iter().all(|&s| s)
}

fn main() {
    let mut rng = RandomStream::new(9, StreamId::Mobility);
    let arena = Vec3::new(800.0, 800.0, 200.0);
    let pos: Vec<Vec3> = loop {
        let cand: Vec<Vec3> = (0..20).map(|_| uniform_point(&mut rng, arena)).collect();
        if connected(&cand, 250.0) {
            break cand;
        }
    };
    for protocol in [Protocol::Olsr, Protocol::Dsr] {
        let sc = Scenario {
            protocol,
            mobility: MobilityModel::Static,
            positions: Some(pos.clone()),
            sim_time: 100.0,
            p_loss: 0.0,
            ..Scenario::default()
        };
        let out = hirol_sim::run(&sc).unwrap();
        println!(
            "{}: sent {} delivered {} pdr {:.4} drops {:?}",
            protocol.name(),
            out.metrics.sent,
            out.metrics.delivered,
            out.metrics.pdr,
            out.metrics.drops_by_cause
        );
    }
}
