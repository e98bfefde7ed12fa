use hirol_sim::scenario::Protocol;
use hirol_sim::sweep::overhead_scenario;
use hirol_sim::training;

fn main() {
    let base = hirol_sim::Scenario::default();
    let trained = training::train_default();
    for protocol in [Protocol::Hirol, Protocol::Olsr, Protocol::Dsr] {
        let sc = overhead_scenario(&base, protocol, 3);
        let out = hirol_sim::run_with_classifier(&sc, Some(&trained.net)).unwrap();
        println!(
            "{:<6} tx by kind {:?} batch10 {:?} pdr {:.3}",
            protocol.name(),
            out.metrics.control_messages,
            out.metrics.batch_overheads[0],
            out.metrics.pdr,
        );
        if protocol == Protocol::Hirol {
            println!("   hybrid {:?}", out.hybrid);
        }
    }
}
