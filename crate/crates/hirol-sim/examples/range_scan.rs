use hirol_sim::link::in_range;
use hirol_sim::mobility::{uniform_point, Vec3};
use hirol_sim::rng::{RandomStream, StreamId};

fn main() {
    let arena = Vec3::new(800.0, 800.0, 200.0);
    let n = 20;
    for range in [250.0, 300.0, 325.0, 350.0, 375.0, 400.0] {
        let mut rng = RandomStream::new(1, StreamId::Mobility);
        let trials = 400;
        let mut deg_sum = 0.0;
        let mut full = 0;
        let mut pairs_ok = 0u64;
        let mut pairs = 0u64;
        for _ in 0..trials {
            let pos: Vec<Vec3> = (0..n).map(|_| uniform_point(&mut rng, arena)).collect();
            let mut adj = vec![vec![]; n];
            let mut edges = 0;
            for a in 0..n {
                for b in (a + 1)..n {
                    if in_range(pos[a], pos[b], range) {
                        adj[a].push(b);
                        adj[b].push(a);
                        edges += 1;
                    }
                }
            }
            deg_sum += 2.0 * edges as f64 / n as f64;
            let mut all_seen = true;
            for s in 0..n {
                let mut seen = vec![false; n];
                let mut stack = vec![s];
                seen[s] = true;
                while let Some(u) = stack.pop() {
                    for &v in &adj[u] {
                        if !seen[v] {
                            seen[v] = true;
                            stack.push(v);
                        }
                    }
                }
                for d in 0..n {
                    if d != s {
                        pairs += 1;
                        pairs_ok += seen[d] as u64;
                    }
                }
                all_seen &= seen.iter().all(|&x| x);
            }
            full += all_seen as usize;
        }
        println!(
            "range {range}: avg degree {:.2}, fully connected {:.1}%, pair connectivity {:.2}%",
            deg_sum / trials as f64,
            100.0 * full as f64 / trials as f64,
            100.0 * pairs_ok as f64 / pairs as f64
        );
    }
}
