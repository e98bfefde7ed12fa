use hirol_sim::link::in_range;
use hirol_sim::mobility::{uniform_point, Vec3};
use hirol_sim::rng::{RandomStream, StreamId};

fn main() {
    let arena = Vec3::new(800.0, 800.0, 200.0);
    let range = 250.0;
    let n = 20;
    let mut rng = RandomStream::new(1, StreamId::Mobility);
    let mut deg_sum = 0.0;
    let mut connected = 0;
    let trials = 500;
    let mut pairs_connected = 0u64;
    let mut pairs_total = 0u64;
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
        // component of node 0
        let mut seen = vec![false; n];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(u) = stack.pop() {
            for &v in &adj[u] {
                if !seen[v] {
                    seen[v] = true;
                    stack.push(v);
                }
            }
        }
        if seen.iter().all(|&s| s) {
            connected += 1;
        }
        // pair connectivity
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
                    pairs_total += 1;
                    pairs_connected += seen[d] as u64;
                }
            }
        }
    }
    println!("avg degree: {:.2}", deg_sum / trials as f64);
    println!("fully connected: {:.1}%", 100.0 * connected as f64 / trials as f64);
    println!(
        "pair connectivity: {:.2}%",
        100.0 * pairs_connected as f64 / pairs_total as f64
    );
}
