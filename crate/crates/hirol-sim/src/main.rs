//! Experiment harness CLI.
//!
//! Single runs, protocol/speed/seed sweeps with CSV emission, and
//! classifier pretraining. Exit codes: 0 success, 1 invalid
//! configuration, 2 runtime failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use hirol_sim::ann::Mlp;
use hirol_sim::scenario::Protocol;
use hirol_sim::{config, engine, sweep, training};

#[derive(Parser, Debug)]
#[command(
    name = "hirol-sim",
    about = "Deterministic FANET routing simulator: OLSR, DSR, and the HIROL hybrid",
    long_about = None
)]
struct Args {
    /// Protocol(s) to run: olsr, dsr, hirol, or a comma list / "all".
    #[arg(long, default_value = "all")]
    protocol: String,

    /// Node speed in m/s for a single run.
    #[arg(long)]
    speed: Option<f64>,

    /// Comma list of speeds; selecting this switches to sweep mode.
    #[arg(long)]
    speeds: Option<String>,

    /// Comma list of seeds; selecting this switches to sweep mode.
    #[arg(long)]
    seeds: Option<String>,

    /// Node count.
    #[arg(long)]
    nodes: Option<usize>,

    /// Arena extents in meters, e.g. 800,800,200.
    #[arg(long)]
    area: Option<String>,

    /// Virtual seconds to simulate.
    #[arg(long)]
    sim_time: Option<f64>,

    /// Data payload bytes per packet.
    #[arg(long)]
    packet_size: Option<usize>,

    /// Radio range in meters.
    #[arg(long)]
    range: Option<f64>,

    /// Flat key = value scenario file.
    #[arg(long)]
    config: Option<PathBuf>,

    /// Pretrained classifier weights (see --train-ann).
    #[arg(long)]
    ann_weights: Option<PathBuf>,

    /// Train the link classifier and write it to --ann-weights
    /// (default ann-weights.txt under --out).
    #[arg(long)]
    train_ann: bool,

    /// Output directory for CSV results.
    #[arg(long, default_value = "results")]
    out: PathBuf,

    /// Skip the message-count overhead experiment during sweeps.
    #[arg(long)]
    no_overhead: bool,
}

fn main() -> ExitCode {
    let args = Args::parse();
    match execute(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("configuration error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("runtime error: {msg}");
            ExitCode::from(2)
        }
    }
}

enum Failure {
    Config(String),
    Runtime(String),
}

fn execute(args: &Args) -> Result<(), Failure> {
    let scenario = build_scenario(args)?;

    if args.train_ann {
        return train_ann(args);
    }

    let protocols = parse_protocols(&args.protocol)?;
    let sweep_mode = args.speeds.is_some() || args.seeds.is_some() || protocols.len() > 1;

    if sweep_mode {
        let speeds = match &args.speeds {
            Some(list) => parse_list::<f64>(list).map_err(Failure::Config)?,
            None => args
                .speed
                .map(|s| vec![s])
                .unwrap_or_else(|| sweep::SweepSpec::default().speeds),
        };
        let seeds = match &args.seeds {
            Some(list) => parse_list::<u64>(list).map_err(Failure::Config)?,
            None => vec![scenario.seed],
        };
        let classifier = load_classifier(args)?;
        let spec = sweep::SweepSpec {
            base: scenario,
            protocols,
            speeds,
            seeds,
            overhead_batches: if args.no_overhead {
                vec![]
            } else {
                vec![10, 20, 30, 40, 50, 60]
            },
            classifier,
            out_dir: Some(args.out.clone()),
        };
        let result = sweep::run_sweep(&spec).map_err(|e| match e {
            sweep::SweepError::Spec(msg) => Failure::Config(msg),
            other => Failure::Runtime(other.to_string()),
        })?;
        print!("{}", sweep::render_summary(&result));
        println!("CSV results written to {}", args.out.display());
        return Ok(());
    }

    // Single run.
    let mut sc = scenario;
    sc.protocol = protocols[0];
    if let Some(speed) = args.speed {
        sc.speed = speed;
    }
    let classifier = load_classifier(args)?;
    let classifier = match (classifier, sc.protocol) {
        (None, Protocol::Hirol) => {
            eprintln!("no --ann-weights given; training the link classifier first");
            let trained = training::train_default();
            eprintln!(
                "trained on {} samples, holdout accuracy {:.3}",
                trained.sample_count, trained.holdout_accuracy
            );
            Some(trained.net)
        }
        (c, _) => c,
    };
    let out = engine::run_with_classifier(&sc, classifier.as_ref())
        .map_err(|e| Failure::Config(e.to_string()))?;
    let m = &out.metrics;
    println!("protocol        {}", sc.protocol.name());
    println!("speed           {} m/s", sc.speed);
    println!("seed            {}", sc.seed);
    println!("sent            {}", m.sent);
    println!("delivered       {}", m.delivered);
    println!("dropped         {}", m.dropped);
    for (cause, count) in &m.drops_by_cause {
        println!("  {:<14}{}", cause.label(), count);
    }
    println!("in flight       {}", m.in_flight_at_end);
    println!("pdr             {:.4}", m.pdr);
    println!("mean delay      {:.3} ms", m.mean_delay * 1e3);
    if m.delivered > 0 {
        let d = &m.delay_parts;
        let per = 1e3 / m.delivered as f64;
        println!(
            "  components    B {:.3} R {:.3} T {:.3} P {:.3} ms/pkt, {:.2} hops/pkt",
            d.buffer * per,
            d.retrans * per,
            d.transmit * per,
            d.processing * per,
            d.hops as f64 / m.delivered as f64
        );
    }
    println!("throughput      {:.1} bit/s", m.throughput_bps);
    println!("control msgs    {}", m.control_messages.values().sum::<u64>());
    for (kind, count) in &m.control_messages {
        println!("  {:<14}{}", kind.label(), count);
    }
    println!("overhead        {:.1} ms", m.overhead_ms);
    println!("overhead ratio  {:.4}", m.overhead_byte_ratio());
    println!("trace hash      {:016x}", out.trace_hash);
    if sc.protocol == Protocol::Hirol {
        println!("hybrid          {:?}", out.hybrid);
    }
    Ok(())
}

fn build_scenario(args: &Args) -> Result<hirol_sim::Scenario, Failure> {
    let file_body = match &args.config {
        Some(path) => Some(
            std::fs::read_to_string(path)
                .map_err(|e| Failure::Config(format!("cannot read {}: {e}", path.display())))?,
        ),
        None => None,
    };
    let mut overrides: Vec<(String, String)> = Vec::new();
    // Last-resort seed default from the environment.
    if let Ok(seed) = std::env::var("HIROL_SEED") {
        overrides.push(("seed".into(), seed));
    }
    let mut flag = |key: &str, value: Option<String>| {
        if let Some(v) = value {
            overrides.push((key.into(), v));
        }
    };
    flag("speed", args.speed.map(|v| v.to_string()));
    flag("node_count", args.nodes.map(|v| v.to_string()));
    flag("arena", args.area.clone());
    flag("sim_time", args.sim_time.map(|v| v.to_string()));
    flag("packet_size", args.packet_size.map(|v| v.to_string()));
    flag("radio_range", args.range.map(|v| v.to_string()));
    config::build_scenario(file_body.as_deref(), &overrides)
        .map_err(|e| Failure::Config(e.to_string()))
}

fn parse_protocols(spec: &str) -> Result<Vec<Protocol>, Failure> {
    if spec.eq_ignore_ascii_case("all") {
        return Ok(Protocol::ALL.to_vec());
    }
    spec.split(',')
        .map(|p| p.trim().parse::<Protocol>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(Failure::Config)
}

fn parse_list<T: std::str::FromStr>(list: &str) -> Result<Vec<T>, String> {
    list.split(',')
        .map(|v| {
            v.trim()
                .parse::<T>()
                .map_err(|_| format!("bad list element '{v}'"))
        })
        .collect()
}

fn load_classifier(args: &Args) -> Result<Option<Mlp>, Failure> {
    let Some(path) = &args.ann_weights else {
        return Ok(None);
    };
    if args.train_ann {
        return Ok(None); // about to be produced, not consumed
    }
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::Config(format!("cannot read {}: {e}", path.display())))?;
    Mlp::from_text(&text)
        .map(Some)
        .map_err(|e| Failure::Config(format!("{}: {e}", path.display())))
}

fn train_ann(args: &Args) -> Result<(), Failure> {
    let trained = training::train_default();
    let path = match &args.ann_weights {
        Some(p) => p.clone(),
        None => {
            std::fs::create_dir_all(&args.out)
                .map_err(|e| Failure::Runtime(format!("cannot create {}: {e}", args.out.display())))?;
            args.out.join("ann-weights.txt")
        }
    };
    std::fs::write(&path, trained.net.to_text())
        .map_err(|e| Failure::Runtime(format!("cannot write {}: {e}", path.display())))?;
    println!(
        "trained link classifier on {} samples ({:.1}% stable), holdout accuracy {:.3}",
        trained.sample_count,
        trained.stable_fraction * 100.0,
        trained.holdout_accuracy
    );
    println!("weights written to {}", path.display());
    Ok(())
}
