//! Scenario assembly from layered sources: built-in defaults, then a
//! flat `key = value` config file, then explicit overrides (CLI flags).
//! Later layers win. Every bad key or value is reported, not just the
//! first.

use crate::mobility::Vec3;
use crate::scenario::{MobilityModel, Scenario};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{}", faults.join("; "))]
pub struct ConfigError {
    pub faults: Vec<String>,
}

/// Parse `key = value` lines. Blank lines and `#` comments are skipped.
pub fn parse_file(text: &str) -> Result<Vec<(String, String)>, ConfigError> {
    let mut pairs = Vec::new();
    let mut faults = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        match line.split_once('=') {
            Some((key, value)) => {
                pairs.push((key.trim().to_string(), value.trim().to_string()));
            }
            None => faults.push(format!("line {}: expected 'key = value'", lineno + 1)),
        }
    }
    if faults.is_empty() {
        Ok(pairs)
    } else {
        Err(ConfigError { faults })
    }
}

fn parse_extent(value: &str) -> Result<Vec3, String> {
    let parts: Vec<&str> = value
        .split(|c| c == ',' || c == 'x')
        .map(str::trim)
        .collect();
    if parts.len() != 3 {
        return Err("expected three comma-separated extents".into());
    }
    let mut dims = [0.0; 3];
    for (d, p) in dims.iter_mut().zip(&parts) {
        *d = p.parse::<f64>().map_err(|_| format!("bad extent '{p}'"))?;
    }
    Ok(Vec3::new(dims[0], dims[1], dims[2]))
}

/// Apply one `key = value` assignment to a scenario.
pub fn apply(sc: &mut Scenario, key: &str, value: &str) -> Result<(), String> {
    fn num<T: std::str::FromStr>(value: &str) -> Result<T, String> {
        value
            .parse::<T>()
            .map_err(|_| format!("bad value '{value}'"))
    }
    match key {
        "protocol" => sc.protocol = value.parse()?,
        "seed" => sc.seed = num(value)?,
        "node_count" => sc.node_count = num(value)?,
        "arena" => sc.arena = parse_extent(value)?,
        "mobility" => {
            sc.mobility = match value {
                "random-waypoint" | "random_waypoint" => MobilityModel::RandomWaypoint,
                "static" => MobilityModel::Static,
                other => return Err(format!("unknown mobility model '{other}'")),
            }
        }
        "speed" => sc.speed = num(value)?,
        "pause_secs" => sc.pause_secs = num(value)?,
        "sim_time" => sc.sim_time = num(value)?,
        "packet_size" => sc.packet_size = num(value)?,
        "max_cbr_connections" => sc.max_cbr_connections = num(value)?,
        "cbr_connections" => sc.cbr_connections = Some(num(value)?),
        "cbr_rate" => sc.cbr_rate = num(value)?,
        "traffic_start" => sc.traffic_start = num(value)?,
        "messages_per_flow" => sc.messages_per_flow = Some(num(value)?),
        "radio_range" => sc.radio_range = num(value)?,
        "p_loss" => sc.p_loss = num(value)?,
        "bitrate" => sc.bitrate_bps = num(value)?,
        "processing_delay" => sc.processing_delay = num(value)?,
        "data_retry_limit" => sc.data_retry_limit = num(value)?,
        "retry_backoff" => sc.retry_backoff = num(value)?,
        "max_queue_delay" => sc.max_queue_delay = num(value)?,
        "hello_interval" => sc.hello_interval = num(value)?,
        "tc_interval" => sc.tc_interval = num(value)?,
        "timer_jitter" => sc.timer_jitter = num(value)?,
        "neighbor_hold_factor" => sc.neighbor_hold_factor = num(value)?,
        "cache_ttl" => sc.cache_ttl = num(value)?,
        "routes_per_destination" => sc.routes_per_destination = num(value)?,
        "discovery_timeout" => sc.discovery_timeout = num(value)?,
        "discovery_retries" => sc.discovery_retries = num(value)?,
        "send_buffer_capacity" => sc.send_buffer_capacity = num(value)?,
        "buffer_timeout" => sc.buffer_timeout = num(value)?,
        "salvage_limit" => sc.salvage_limit = num(value)?,
        "reply_to_all_requests" => sc.reply_to_all_requests = num(value)?,
        "zone_cell" => sc.zone_cell = parse_extent(value)?,
        "beacon_factor" => sc.beacon_factor = num(value)?,
        "hybrid_hello_factor" => sc.hybrid_hello_factor = num(value)?,
        "maintenance_interval" => sc.maintenance_interval = num(value)?,
        "reresolve_backoff" => sc.reresolve_backoff = num(value)?,
        "corridor_slack" => sc.corridor_slack = num(value)?,
        "abc.colony_size" => sc.abc.colony_size = num(value)?,
        "abc.max_iter" => sc.abc.max_iter = num(value)?,
        "abc.epsilon" => sc.abc.epsilon = num(value)?,
        "abc.patience" => sc.abc.patience = num(value)?,
        "abc.step_size" => sc.abc.step_size = num(value)?,
        "abc.limit" => sc.abc.limit = num(value)?,
        "abc.weight_energy" => sc.abc.weight_energy = num(value)?,
        "abc.weight_latency" => sc.abc.weight_latency = num(value)?,
        "abc.weight_delivery" => sc.abc.weight_delivery = num(value)?,
        "abc.migration_w" => sc.abc.migration_w = num(value)?,
        "abc.onlooker_exploits_best" => sc.abc.onlooker_exploits_best = num(value)?,
        "ann.hidden" => sc.ann.hidden = num(value)?,
        "ann.learning_rate" => sc.ann.learning_rate = num(value)?,
        "ann.epochs" => sc.ann.epochs = num(value)?,
        "ann.beta" => sc.ann.beta = num(value)?,
        "ann.lookahead_secs" => sc.ann.lookahead_secs = num(value)?,
        "ann.threshold" => sc.ann.threshold = num(value)?,
        "ann.init_span" => sc.ann.init_span = num(value)?,
        other => return Err(format!("unknown key '{other}'")),
    }
    Ok(())
}

/// Build a scenario from defaults, an optional config file body, and
/// flag-level overrides, in that precedence order. The result is
/// validated; all faults are aggregated.
pub fn build_scenario(
    file_body: Option<&str>,
    overrides: &[(String, String)],
) -> Result<Scenario, ConfigError> {
    let mut sc = Scenario::default();
    let mut faults = Vec::new();
    if let Some(body) = file_body {
        match parse_file(body) {
            Ok(pairs) => {
                for (key, value) in pairs {
                    if let Err(e) = apply(&mut sc, &key, &value) {
                        faults.push(format!("{key}: {e}"));
                    }
                }
            }
            Err(e) => faults.extend(e.faults),
        }
    }
    for (key, value) in overrides {
        if let Err(e) = apply(&mut sc, key, value) {
            faults.push(format!("{key}: {e}"));
        }
    }
    if let Err(e) = sc.validate() {
        faults.extend(e.faults);
    }
    if faults.is_empty() {
        Ok(sc)
    } else {
        Err(ConfigError { faults })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::Protocol;

    #[test]
    fn no_inputs_yields_defaults() {
        let sc = build_scenario(None, &[]).unwrap();
        assert_eq!(sc.node_count, 20);
        assert_eq!(sc.packet_size, 256);
        assert_eq!(sc.max_cbr_connections, 200);
        assert_eq!(sc.arena, Vec3::new(800.0, 800.0, 200.0));
        assert_eq!(sc.sim_time, 210.0);
    }

    #[test]
    fn file_overrides_defaults() {
        let body = "speed = 15\nprotocol = dsr\n# comment\n\nnode_count = 12\n";
        let sc = build_scenario(Some(body), &[]).unwrap();
        assert_eq!(sc.speed, 15.0);
        assert_eq!(sc.protocol, Protocol::Dsr);
        assert_eq!(sc.node_count, 12);
    }

    #[test]
    fn flags_beat_the_file() {
        let body = "speed = 15\n";
        let flags = vec![("speed".to_string(), "25".to_string())];
        let sc = build_scenario(Some(body), &flags).unwrap();
        assert_eq!(sc.speed, 25.0);
    }

    #[test]
    fn violations_are_aggregated_and_named() {
        let flags = vec![
            ("node_count".to_string(), "0".to_string()),
            ("packet_size".to_string(), "0".to_string()),
        ];
        let err = build_scenario(None, &flags).unwrap_err();
        assert!(err.faults.iter().any(|f| f.contains("node_count")));
        assert!(err.faults.iter().any(|f| f.contains("packet_size")));
    }

    #[test]
    fn unknown_keys_and_bad_values_are_reported() {
        let body = "not_a_key = 3\nspeed = fast\n";
        let err = build_scenario(Some(body), &[]).unwrap_err();
        assert_eq!(err.faults.len(), 2);
        assert!(err.faults[0].contains("not_a_key"));
        assert!(err.faults[1].contains("fast"));
    }

    #[test]
    fn extent_accepts_commas_and_x() {
        assert_eq!(
            parse_extent("800,800,200").unwrap(),
            Vec3::new(800.0, 800.0, 200.0)
        );
        assert_eq!(
            parse_extent("400 x 400 x 100").unwrap(),
            Vec3::new(400.0, 400.0, 100.0)
        );
        assert!(parse_extent("800,800").is_err());
    }

    // Precedence is a total order: flags > file > defaults, for any key
    // subset.
    #[test]
    fn precedence_over_random_key_subsets() {
        let keys = ["speed", "cbr_rate", "radio_range", "cache_ttl"];
        let file_vals = ["11", "2.5", "180", "12"];
        let flag_vals = ["33", "4.5", "300", "44"];
        for mask in 0u32..16 {
            for flag_mask in 0u32..16 {
                let body: String = keys
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| mask & (1 << i) != 0)
                    .map(|(i, k)| format!("{k} = {}\n", file_vals[i]))
                    .collect();
                let flags: Vec<(String, String)> = keys
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| flag_mask & (1 << i) != 0)
                    .map(|(i, k)| (k.to_string(), flag_vals[i].to_string()))
                    .collect();
                let sc = build_scenario(Some(&body), &flags).unwrap();
                let defaults = Scenario::default();
                let expect = |i: usize| -> f64 {
                    if flag_mask & (1 << i) != 0 {
                        flag_vals[i].parse().unwrap()
                    } else if mask & (1 << i) != 0 {
                        file_vals[i].parse().unwrap()
                    } else {
                        match i {
                            0 => defaults.speed,
                            1 => defaults.cbr_rate,
                            2 => defaults.radio_range,
                            _ => defaults.cache_ttl,
                        }
                    }
                };
                assert_eq!(sc.speed, expect(0));
                assert_eq!(sc.cbr_rate, expect(1));
                assert_eq!(sc.radio_range, expect(2));
                assert_eq!(sc.cache_ttl, expect(3));
            }
        }
    }
}
