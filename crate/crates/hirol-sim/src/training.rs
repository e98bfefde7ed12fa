//! Link-classifier training from simulated traces.
//!
//! A short proactive run captures per-link feature snapshots; each
//! snapshot is labeled afterwards from the recorded trajectories: stable
//! iff the pair stays within radio range over the lookahead horizon.
//! The labels come from ground-truth motion, not from the classifier, so
//! the holdout accuracy is a real generalization measure.

use crate::ann::{train_classifier, Mlp, TrainingSample};
use crate::engine;
use crate::link::in_range;
use crate::rng::{RandomStream, StreamId};
use crate::scenario::{Protocol, Scenario, ScenarioError};
use crate::time::SimTime;

/// Fixed seed for the canonical training trace, so every sweep trains
/// the same classifier unless told otherwise.
pub const TRAINING_SEED: u64 = 17;

/// Label check granularity along the lookahead horizon.
const LABEL_STEP_SECS: f64 = 0.25;

#[derive(Clone, Debug)]
pub struct TrainedClassifier {
    pub net: Mlp,
    pub holdout_accuracy: f64,
    pub sample_count: usize,
    pub stable_fraction: f64,
}

/// The canonical capture scenario: the default setup at a mid-sweep
/// speed, 60 s horizon, probing twice a second.
pub fn training_scenario(seed: u64) -> Scenario {
    Scenario {
        protocol: Protocol::Olsr,
        seed,
        speed: 20.0,
        sim_time: 60.0,
        probe_interval: Some(0.5),
        ..Scenario::default()
    }
}

/// Run the capture scenario and label its probes.
pub fn collect_samples(sc: &Scenario) -> Result<Vec<TrainingSample>, ScenarioError> {
    let out = engine::run(sc)?;
    let horizon = sc.ann.lookahead_secs;
    let steps = (horizon / LABEL_STEP_SECS).ceil() as u64;
    let mut samples = Vec::with_capacity(out.probes.len());
    for probe in &out.probes {
        if probe.time.as_secs() + horizon > sc.sim_time {
            continue; // horizon would run past the recorded motion
        }
        let mut stable = true;
        for k in 0..=steps {
            let t = probe.time + SimTime::from_secs(k as f64 * LABEL_STEP_SECS);
            let (Some(pa), Some(pb)) = (
                out.trajectories.position(probe.from, t),
                out.trajectories.position(probe.to, t),
            ) else {
                stable = false;
                break;
            };
            if !in_range(pa, pb, sc.radio_range) {
                stable = false;
                break;
            }
        }
        samples.push(TrainingSample {
            features: probe.features,
            target: if stable { 1.0 } else { 0.0 },
        });
    }
    Ok(samples)
}

/// Full pipeline: capture, label, train, evaluate on the holdout.
pub fn train_from_scenario(sc: &Scenario) -> Result<TrainedClassifier, ScenarioError> {
    let samples = collect_samples(sc)?;
    let stable = samples.iter().filter(|s| s.target >= 0.5).count();
    let mut rng = RandomStream::new(sc.seed, StreamId::Ann);
    let (net, holdout_accuracy) = train_classifier(&samples, &sc.ann, &mut rng);
    Ok(TrainedClassifier {
        net,
        holdout_accuracy,
        sample_count: samples.len(),
        stable_fraction: stable as f64 / samples.len().max(1) as f64,
    })
}

/// Train on the canonical scenario with the fixed training seed.
pub fn train_default() -> TrainedClassifier {
    train_from_scenario(&training_scenario(TRAINING_SEED))
        .expect("default training scenario is valid")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn capture_produces_labeled_samples() {
        let mut sc = training_scenario(3);
        sc.sim_time = 20.0;
        sc.node_count = 10;
        let samples = collect_samples(&sc).unwrap();
        assert!(samples.len() > 100, "only {} samples", samples.len());
        assert!(samples.iter().any(|s| s.target == 1.0));
        assert!(samples.iter().any(|s| s.target == 0.0));
    }

    #[test]
    fn labels_follow_ground_truth_motion() {
        // At high speed with a short horizon, links near the range edge
        // must sometimes be labeled unstable.
        let mut sc = training_scenario(5);
        sc.sim_time = 30.0;
        sc.speed = 40.0;
        let samples = collect_samples(&sc).unwrap();
        let unstable = samples.iter().filter(|s| s.target == 0.0).count();
        assert!(unstable > 0);
        // And every unstable sample sits closer to the range edge on
        // average than the stable population.
        let mean = |pred: fn(&TrainingSample) -> bool| {
            let (mut sum, mut n) = (0.0, 0);
            for s in samples.iter().filter(|s| pred(s)) {
                sum += s.features.distance_norm;
                n += 1;
            }
            sum / n.max(1) as f64
        };
        let unstable_dist = mean(|s| s.target == 0.0);
        let stable_dist = mean(|s| s.target == 1.0);
        assert!(
            unstable_dist > stable_dist,
            "unstable {unstable_dist} vs stable {stable_dist}"
        );
    }

    #[test]
    fn trained_classifier_generalizes() {
        let trained = train_from_scenario(&training_scenario(TRAINING_SEED)).unwrap();
        assert!(
            trained.holdout_accuracy >= 0.85,
            "holdout accuracy {}",
            trained.holdout_accuracy
        );
    }
}
