use hirol_sim::scenario::Protocol;
use hirol_sim::sweep::overhead_scenario;
use hirol_sim::training;

fn main() {
    let base = hirol_sim::Scenario::default();
    let trained = training::train_default();
    println!("classifier holdout accuracy: {:.3}", trained.holdout_accuracy);
    for protocol in [Protocol::Hirol, Protocol::Olsr, Protocol::Dsr] {
        let mut totals = vec![0.0f64; 6];
        let mut counts = vec![0usize; 6];
        let seeds: Vec<u64> = (1..=5).collect();
        for &seed in &seeds {
            let sc = overhead_scenario(&base, protocol, seed);
            let out = hirol_sim::run_with_classifier(&sc, Some(&trained.net)).unwrap();
            for (i, v) in out.metrics.batch_overheads.iter().enumerate() {
                if let Some(v) = v {
                    totals[i] += v;
                    counts[i] += 1;
                }
            }
        }
        let means: Vec<String> = totals
            .iter()
            .zip(&counts)
            .map(|(t, &c)| if c > 0 { format!("{:.0}", t / c as f64) } else { "-".into() })
            .collect();
        println!("{:<6} batches 10..60: {}", protocol.name(), means.join(" "));
    }
}
