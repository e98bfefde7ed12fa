//! Three-layer feedforward link classifier.
//!
//! Inputs are four normalized link features; the single sigmoid output is
//! a stability score, thresholded into stable/unstable. Training is plain
//! full-batch gradient descent on squared error; during live runs the
//! output layer can adapt online with a normalized-LMS update.

use crate::mobility::Vec3;
use crate::rng::RandomStream;

pub const INPUTS: usize = 4;

pub fn sigmoid(t: f64) -> f64 {
    1.0 / (1.0 + (-t).exp())
}

/// Weights of a dense sigmoid network with one hidden layer.
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    /// hidden x input
    pub w_input_hidden: Vec<Vec<f64>>,
    pub bias_hidden: Vec<f64>,
    /// output x hidden
    pub w_hidden_output: Vec<Vec<f64>>,
    pub bias_output: Vec<f64>,
}

impl Mlp {
    pub fn zeroed(input: usize, hidden: usize, output: usize) -> Self {
        Mlp {
            w_input_hidden: vec![vec![0.0; input]; hidden],
            bias_hidden: vec![0.0; hidden],
            w_hidden_output: vec![vec![0.0; hidden]; output],
            bias_output: vec![0.0; output],
        }
    }

    /// Symmetric uniform initialization in `[-span, span]`.
    pub fn random(input: usize, hidden: usize, output: usize, span: f64, rng: &mut RandomStream) -> Self {
        let mut draw = |n: usize| -> Vec<f64> {
            (0..n).map(|_| rng.range_f64(-span, span)).collect()
        };
        Mlp {
            w_input_hidden: (0..hidden).map(|_| draw(input)).collect(),
            bias_hidden: draw(hidden),
            w_hidden_output: (0..output).map(|_| draw(hidden)).collect(),
            bias_output: draw(output),
        }
    }

    pub fn input_size(&self) -> usize {
        self.w_input_hidden.first().map_or(0, Vec::len)
    }

    pub fn hidden_size(&self) -> usize {
        self.w_input_hidden.len()
    }

    pub fn output_size(&self) -> usize {
        self.w_hidden_output.len()
    }

    /// Forward pass; returns hidden and output activations. Panics on a
    /// dimension mismatch, which is a caller bug.
    pub fn forward(&self, x: &[f64]) -> (Vec<f64>, Vec<f64>) {
        assert_eq!(x.len(), self.input_size(), "input dimension mismatch");
        let hidden: Vec<f64> = self
            .w_input_hidden
            .iter()
            .zip(&self.bias_hidden)
            .map(|(row, b)| sigmoid(dot(row, x) + b))
            .collect();
        let output: Vec<f64> = self
            .w_hidden_output
            .iter()
            .zip(&self.bias_output)
            .map(|(row, b)| sigmoid(dot(row, &hidden) + b))
            .collect();
        (hidden, output)
    }

    pub fn score(&self, x: &[f64]) -> f64 {
        self.forward(x).1[0]
    }

    /// One full-batch gradient step on `L = mean over samples of
    /// (1/2) * sum_o (target_o - out_o)^2`. Returns the pre-step loss.
    pub fn backprop_step(&mut self, batch: &[(Vec<f64>, Vec<f64>)], lr: f64) -> f64 {
        assert!(!batch.is_empty(), "empty training batch");
        assert!(lr > 0.0);
        let (hid, out) = (self.hidden_size(), self.output_size());
        let mut g_wih = vec![vec![0.0; self.input_size()]; hid];
        let mut g_bh = vec![0.0; hid];
        let mut g_who = vec![vec![0.0; hid]; out];
        let mut g_bo = vec![0.0; out];
        let mut loss = 0.0;

        for (x, target) in batch {
            let (hidden, output) = self.forward(x);
            // Output deltas: dL/d(pre-activation).
            let mut delta_out = vec![0.0; out];
            for o in 0..out {
                let err = output[o] - target[o];
                loss += 0.5 * err * err;
                delta_out[o] = err * output[o] * (1.0 - output[o]);
            }
            let mut delta_hid = vec![0.0; hid];
            for h in 0..hid {
                let back: f64 = (0..out).map(|o| delta_out[o] * self.w_hidden_output[o][h]).sum();
                delta_hid[h] = back * hidden[h] * (1.0 - hidden[h]);
            }
            for o in 0..out {
                for h in 0..hid {
                    g_who[o][h] += delta_out[o] * hidden[h];
                }
                g_bo[o] += delta_out[o];
            }
            for h in 0..hid {
                for i in 0..x.len() {
                    g_wih[h][i] += delta_hid[h] * x[i];
                }
                g_bh[h] += delta_hid[h];
            }
        }

        let scale = lr / batch.len() as f64;
        for h in 0..hid {
            for i in 0..self.w_input_hidden[h].len() {
                self.w_input_hidden[h][i] -= scale * g_wih[h][i];
            }
            self.bias_hidden[h] -= scale * g_bh[h];
        }
        for o in 0..out {
            for h in 0..hid {
                self.w_hidden_output[o][h] -= scale * g_who[o][h];
            }
            self.bias_output[o] -= scale * g_bo[o];
        }
        loss / batch.len() as f64
    }

    /// Batch loss without touching the weights (finite-difference oracle
    /// support and convergence tracking).
    pub fn loss(&self, batch: &[(Vec<f64>, Vec<f64>)]) -> f64 {
        let mut loss = 0.0;
        for (x, target) in batch {
            let (_, output) = self.forward(x);
            for (o, t) in output.iter().zip(target) {
                loss += 0.5 * (o - t) * (o - t);
            }
        }
        loss / batch.len() as f64
    }

    /// Online adaptation of the first output row from an observed
    /// stability outcome, using the hidden activations as the regressor.
    pub fn adapt_output(&mut self, features: &[f64], target: f64, beta: f64) {
        let (hidden, output) = self.forward(features);
        let err = target - output[0];
        nlms_update(&mut self.w_hidden_output[0], &hidden, err, beta);
    }

    /// Row-major text form with a dimension header.
    pub fn to_text(&self) -> String {
        use std::fmt::Write;
        let mut s = String::new();
        writeln!(
            s,
            "ann {} {} {}",
            self.input_size(),
            self.hidden_size(),
            self.output_size()
        )
        .unwrap();
        let row = |vals: &[f64], s: &mut String| {
            let parts: Vec<String> = vals.iter().map(|v| format!("{v:?}")).collect();
            writeln!(s, "{}", parts.join(" ")).unwrap();
        };
        for r in &self.w_input_hidden {
            row(r, &mut s);
        }
        row(&self.bias_hidden, &mut s);
        for r in &self.w_hidden_output {
            row(r, &mut s);
        }
        row(&self.bias_output, &mut s);
        s
    }

    pub fn from_text(text: &str) -> Result<Self, WeightsParseError> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or(WeightsParseError::Empty)?;
        let mut parts = header.split_whitespace();
        if parts.next() != Some("ann") {
            return Err(WeightsParseError::BadHeader);
        }
        let dims: Vec<usize> = parts
            .map(|p| p.parse().map_err(|_| WeightsParseError::BadHeader))
            .collect::<Result<_, _>>()?;
        let [input, hidden, output] = dims[..] else {
            return Err(WeightsParseError::BadHeader);
        };
        let mut rows = Vec::new();
        for line in lines {
            let row: Vec<f64> = line
                .split_whitespace()
                .map(|p| p.parse().map_err(|_| WeightsParseError::BadValue))
                .collect::<Result<_, _>>()?;
            rows.push(row);
        }
        let expected = hidden + 1 + output + 1;
        if rows.len() != expected {
            return Err(WeightsParseError::BadShape);
        }
        let net = Mlp {
            w_input_hidden: rows[..hidden].to_vec(),
            bias_hidden: rows[hidden].clone(),
            w_hidden_output: rows[hidden + 1..hidden + 1 + output].to_vec(),
            bias_output: rows[hidden + 1 + output].clone(),
        };
        let shape_ok = net.w_input_hidden.iter().all(|r| r.len() == input)
            && net.bias_hidden.len() == hidden
            && net.w_hidden_output.iter().all(|r| r.len() == hidden)
            && net.bias_output.len() == output;
        if !shape_ok {
            return Err(WeightsParseError::BadShape);
        }
        Ok(net)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum WeightsParseError {
    #[error("empty weights file")]
    Empty,
    #[error("malformed dimension header")]
    BadHeader,
    #[error("malformed weight value")]
    BadValue,
    #[error("row shape does not match header")]
    BadShape,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Normalized least-mean-squares step: `w += beta * e * y / |y|^2`.
/// A zero regressor leaves the weights untouched.
pub fn nlms_update(w: &mut [f64], y: &[f64], e: f64, beta: f64) {
    debug_assert_eq!(w.len(), y.len());
    let norm: f64 = y.iter().map(|v| v * v).sum();
    if norm == 0.0 {
        return;
    }
    let gain = beta * e / norm;
    for (wi, yi) in w.iter_mut().zip(y) {
        *wi += gain * yi;
    }
}

/// Normalized inputs to the classifier, each in `[0, 1]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinkFeatures {
    /// Distance over radio range, clamped.
    pub distance_norm: f64,
    /// Trailing-window delivery fraction.
    pub quality: f64,
    /// Receiver transmit-queue occupancy fraction.
    pub load: f64,
    /// 0 = fastest mutual approach, 0.5 = zero radial velocity,
    /// 1 = fastest separation.
    pub relative_speed_norm: f64,
}

impl LinkFeatures {
    pub fn as_vec(&self) -> Vec<f64> {
        vec![
            self.distance_norm,
            self.quality,
            self.load,
            self.relative_speed_norm,
        ]
    }
}

/// Everything needed to compute features for one directed link.
#[derive(Clone, Copy, Debug)]
pub struct LinkContext {
    pub pos_a: Vec3,
    pub pos_b: Vec3,
    /// Instantaneous velocities in m/s.
    pub vel_a: Vec3,
    pub vel_b: Vec3,
    pub radio_range: f64,
    /// Shared per-node speed cap for normalization.
    pub max_speed: f64,
    pub quality: f64,
    /// Receiver queue backlog as a fraction of the queue-delay cap.
    pub load: f64,
}

pub fn extract_features(ctx: &LinkContext) -> LinkFeatures {
    let clamp = |v: f64| v.clamp(0.0, 1.0);
    let dist = ctx.pos_a.distance(ctx.pos_b);
    // Radial velocity: rate of change of the separation distance.
    let radial = if dist > 0.0 {
        let rx = ctx.pos_b.x - ctx.pos_a.x;
        let ry = ctx.pos_b.y - ctx.pos_a.y;
        let rz = ctx.pos_b.z - ctx.pos_a.z;
        let dvx = ctx.vel_b.x - ctx.vel_a.x;
        let dvy = ctx.vel_b.y - ctx.vel_a.y;
        let dvz = ctx.vel_b.z - ctx.vel_a.z;
        (rx * dvx + ry * dvy + rz * dvz) / dist
    } else {
        0.0
    };
    let cap = 2.0 * ctx.max_speed;
    let rel = if cap > 0.0 { radial / cap } else { 0.0 };
    LinkFeatures {
        distance_norm: clamp(dist / ctx.radio_range),
        quality: clamp(ctx.quality),
        load: clamp(ctx.load),
        relative_speed_norm: clamp((rel + 1.0) / 2.0),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LinkLabel {
    Stable,
    Unstable,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinkStatus {
    pub score: f64,
    pub label: LinkLabel,
}

/// Score the link and threshold it; scores exactly at the threshold are
/// stable.
pub fn classify_link(net: &Mlp, features: &LinkFeatures, threshold: f64) -> LinkStatus {
    debug_assert!(threshold > 0.0 && threshold < 1.0);
    let score = net.score(&features.as_vec());
    let label = if score >= threshold {
        LinkLabel::Stable
    } else {
        LinkLabel::Unstable
    };
    LinkStatus { score, label }
}

/// One labeled training observation.
#[derive(Clone, Debug)]
pub struct TrainingSample {
    pub features: LinkFeatures,
    /// 1.0 = the link survived the lookahead horizon.
    pub target: f64,
}

/// Train from labeled samples with an 80/20 split; returns the network
/// and its holdout accuracy. Sample order is shuffled from `rng`.
pub fn train_classifier(
    samples: &[TrainingSample],
    params: &crate::scenario::AnnParams,
    rng: &mut RandomStream,
) -> (Mlp, f64) {
    assert!(samples.len() >= 10, "not enough training samples");
    let mut order: Vec<usize> = (0..samples.len()).collect();
    for i in (1..order.len()).rev() {
        order.swap(i, rng.below(i + 1));
    }
    let holdout_len = samples.len() / 5;
    let (holdout_idx, train_idx) = order.split_at(holdout_len);

    // Rebalance: stability labels dominate in gentle scenarios, so cap
    // the majority class at twice the minority.
    let stable: Vec<usize> = train_idx
        .iter()
        .copied()
        .filter(|&i| samples[i].target >= 0.5)
        .collect();
    let unstable: Vec<usize> = train_idx
        .iter()
        .copied()
        .filter(|&i| samples[i].target < 0.5)
        .collect();
    let (major, minor) = if stable.len() >= unstable.len() {
        (stable, unstable)
    } else {
        (unstable, stable)
    };
    let keep = if minor.is_empty() {
        major.len()
    } else {
        major.len().min(2 * minor.len())
    };
    let mut train: Vec<usize> = major[..keep].to_vec();
    train.extend(&minor);

    let batch: Vec<(Vec<f64>, Vec<f64>)> = train
        .iter()
        .map(|&i| (samples[i].features.as_vec(), vec![samples[i].target]))
        .collect();

    let mut net = Mlp::random(INPUTS, params.hidden, 1, params.init_span, rng);
    for _ in 0..params.epochs {
        net.backprop_step(&batch, params.learning_rate);
    }

    let eval = if holdout_idx.is_empty() { train_idx } else { holdout_idx };
    let correct = eval
        .iter()
        .filter(|&&i| {
            let s = net.score(&samples[i].features.as_vec());
            (s >= params.threshold) == (samples[i].target >= 0.5)
        })
        .count();
    let accuracy = correct as f64 / eval.len() as f64;
    (net, accuracy)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::StreamId;

    #[test]
    fn zero_network_outputs_half_everywhere() {
        let net = Mlp::zeroed(INPUTS, 8, 1);
        let (hidden, output) = net.forward(&[0.3, 0.9, 0.1, 0.5]);
        assert!(hidden.iter().all(|&h| h == 0.5));
        assert_eq!(output[0], 0.5);
    }

    // 1-1-1 net, unit weights, zero biases, zero input:
    // hidden = sigmoid(0) = 0.5, output = sigmoid(0.5).
    #[test]
    fn tiny_network_hand_evaluation() {
        let net = Mlp {
            w_input_hidden: vec![vec![1.0]],
            bias_hidden: vec![0.0],
            w_hidden_output: vec![vec![1.0]],
            bias_output: vec![0.0],
        };
        let (hidden, output) = net.forward(&[0.0]);
        assert_eq!(hidden[0], 0.5);
        assert!((output[0] - sigmoid(0.5)).abs() < 1e-12);
        assert!((output[0] - 0.6224593312018546).abs() < 1e-12);
    }

    #[test]
    fn outputs_strictly_inside_unit_interval() {
        let mut rng = RandomStream::new(4, StreamId::Ann);
        let net = Mlp::random(INPUTS, 8, 1, 2.0, &mut rng);
        for _ in 0..100 {
            let x: Vec<f64> = (0..INPUTS).map(|_| rng.next_f64()).collect();
            let (hidden, output) = net.forward(&x);
            assert!(hidden.iter().all(|&h| h > 0.0 && h < 1.0));
            assert!(output.iter().all(|&o| o > 0.0 && o < 1.0));
        }
    }

    #[test]
    #[should_panic(expected = "dimension mismatch")]
    fn forward_rejects_wrong_dimension() {
        let net = Mlp::zeroed(4, 2, 1);
        net.forward(&[1.0, 2.0]);
    }

    #[test]
    fn nlms_zero_error_is_identity() {
        let mut w = vec![0.4, -0.2];
        nlms_update(&mut w, &[1.0, 2.0], 0.0, 0.5);
        assert_eq!(w, vec![0.4, -0.2]);
    }

    #[test]
    fn nlms_hand_case() {
        let mut w = vec![0.0, 0.0];
        nlms_update(&mut w, &[1.0, 1.0], 1.0, 0.5);
        assert_eq!(w, vec![0.25, 0.25]);
    }

    #[test]
    fn nlms_zero_regressor_is_noop() {
        let mut w = vec![0.7, 0.1];
        nlms_update(&mut w, &[0.0, 0.0], 5.0, 1.0);
        assert_eq!(w, vec![0.7, 0.1]);
    }

    // For a linear unit the a-posteriori error is exactly (1 - beta)
    // times the a-priori error; beta = 1 zeroes it.
    #[test]
    fn nlms_contracts_linear_error_exactly() {
        let y = [0.3, -1.2, 0.8];
        let target = 2.0;
        for beta in [0.25, 0.5, 1.0, 1.5] {
            let mut w = vec![0.1, 0.2, -0.4];
            let pred: f64 = w.iter().zip(&y).map(|(a, b)| a * b).sum();
            let e = target - pred;
            nlms_update(&mut w, &y, e, beta);
            let post: f64 = w.iter().zip(&y).map(|(a, b)| a * b).sum();
            let e_post = target - post;
            assert!(
                (e_post - (1.0 - beta) * e).abs() < 1e-12,
                "beta {beta}: {e_post} vs {}",
                (1.0 - beta) * e
            );
        }
    }

    #[test]
    fn gradients_vanish_at_exact_fit() {
        let mut net = Mlp {
            w_input_hidden: vec![vec![0.3, -0.2], vec![0.5, 0.1]],
            bias_hidden: vec![0.1, -0.1],
            w_hidden_output: vec![vec![0.7, -0.3]],
            bias_output: vec![0.2],
        };
        let x = vec![0.4, 0.9];
        let (_, out) = net.forward(&x);
        let before = net.clone();
        net.backprop_step(&[(x, out)], 0.5);
        assert_eq!(net, before);
    }

    // Central finite differences as the independent gradient oracle.
    fn numeric_gradient(net: &Mlp, batch: &[(Vec<f64>, Vec<f64>)], tweak: impl Fn(&mut Mlp, f64)) -> f64 {
        let eps = 1e-5;
        let mut plus = net.clone();
        tweak(&mut plus, eps);
        let mut minus = net.clone();
        tweak(&mut minus, -eps);
        (plus.loss(batch) - minus.loss(batch)) / (2.0 * eps)
    }

    fn analytic_gradients(net: &Mlp, batch: &[(Vec<f64>, Vec<f64>)]) -> Mlp {
        // Recover gradients from a unit-step update: g = (w - w') / lr.
        let lr = 1.0;
        let mut stepped = net.clone();
        stepped.backprop_step(batch, lr);
        let diff = |a: &[f64], b: &[f64]| -> Vec<f64> {
            a.iter().zip(b).map(|(x, y)| (x - y) / lr).collect()
        };
        Mlp {
            w_input_hidden: net
                .w_input_hidden
                .iter()
                .zip(&stepped.w_input_hidden)
                .map(|(a, b)| diff(a, b))
                .collect(),
            bias_hidden: diff(&net.bias_hidden, &stepped.bias_hidden),
            w_hidden_output: net
                .w_hidden_output
                .iter()
                .zip(&stepped.w_hidden_output)
                .map(|(a, b)| diff(a, b))
                .collect(),
            bias_output: diff(&net.bias_output, &stepped.bias_output),
        }
    }

    fn relative_error(a: f64, b: f64) -> f64 {
        (a - b).abs() / (a.abs() + b.abs()).max(1e-8)
    }

    #[test]
    fn backprop_matches_finite_differences() {
        let mut rng = RandomStream::new(7, StreamId::Ann);
        for _ in 0..20 {
            let input = 2 + rng.below(3);
            let hidden = 2 + rng.below(4);
            let output = 1 + rng.below(2);
            let net = Mlp::random(input, hidden, output, 0.8, &mut rng);
            let batch: Vec<(Vec<f64>, Vec<f64>)> = (0..4)
                .map(|_| {
                    (
                        (0..input).map(|_| rng.range_f64(-1.0, 1.0)).collect(),
                        (0..output).map(|_| rng.range_f64(0.1, 0.9)).collect(),
                    )
                })
                .collect();
            let grads = analytic_gradients(&net, &batch);
            for h in 0..hidden {
                for i in 0..input {
                    let num = numeric_gradient(&net, &batch, |m, d| m.w_input_hidden[h][i] += d);
                    assert!(
                        relative_error(num, grads.w_input_hidden[h][i]) < 1e-4,
                        "w_ih[{h}][{i}]: {num} vs {}",
                        grads.w_input_hidden[h][i]
                    );
                }
                let num = numeric_gradient(&net, &batch, |m, d| m.bias_hidden[h] += d);
                assert!(relative_error(num, grads.bias_hidden[h]) < 1e-4);
            }
            for o in 0..output {
                for h in 0..hidden {
                    let num = numeric_gradient(&net, &batch, |m, d| m.w_hidden_output[o][h] += d);
                    assert!(relative_error(num, grads.w_hidden_output[o][h]) < 1e-4);
                }
                let num = numeric_gradient(&net, &batch, |m, d| m.bias_output[o] += d);
                assert!(relative_error(num, grads.bias_output[o]) < 1e-4);
            }
        }
    }

    // XOR-style task: threshold chosen from an offline run of this exact
    // configuration, which lands well under it.
    #[test]
    fn training_drives_down_xor_loss() {
        let mut rng = RandomStream::new(17, StreamId::Ann);
        let mut net = Mlp::random(2, 4, 1, 0.5, &mut rng);
        let batch = vec![
            (vec![0.0, 0.0], vec![0.0]),
            (vec![0.0, 1.0], vec![1.0]),
            (vec![1.0, 0.0], vec![1.0]),
            (vec![1.0, 1.0], vec![0.0]),
        ];
        let mut loss = f64::MAX;
        for _ in 0..5000 {
            loss = net.backprop_step(&batch, 0.5);
        }
        assert!(loss < 0.05, "final loss {loss}");
    }

    #[test]
    fn features_for_coincident_stationary_nodes() {
        let ctx = LinkContext {
            pos_a: Vec3::new(10.0, 10.0, 10.0),
            pos_b: Vec3::new(10.0, 10.0, 10.0),
            vel_a: Vec3::default(),
            vel_b: Vec3::default(),
            radio_range: 250.0,
            max_speed: 20.0,
            quality: 1.0,
            load: 0.0,
        };
        let f = extract_features(&ctx);
        assert_eq!(
            f,
            LinkFeatures {
                distance_norm: 0.0,
                quality: 1.0,
                load: 0.0,
                relative_speed_norm: 0.5
            }
        );
    }

    #[test]
    fn feature_distance_saturates_at_range() {
        let ctx = LinkContext {
            pos_a: Vec3::new(0.0, 0.0, 0.0),
            pos_b: Vec3::new(250.0, 0.0, 0.0),
            vel_a: Vec3::default(),
            vel_b: Vec3::default(),
            radio_range: 250.0,
            max_speed: 20.0,
            quality: 1.0,
            load: 0.0,
        };
        assert_eq!(extract_features(&ctx).distance_norm, 1.0);
    }

    #[test]
    fn head_on_approach_maps_to_zero() {
        let ctx = LinkContext {
            pos_a: Vec3::new(0.0, 0.0, 0.0),
            pos_b: Vec3::new(100.0, 0.0, 0.0),
            vel_a: Vec3::new(20.0, 0.0, 0.0),
            vel_b: Vec3::new(-20.0, 0.0, 0.0),
            radio_range: 250.0,
            max_speed: 20.0,
            quality: 1.0,
            load: 0.0,
        };
        assert_eq!(extract_features(&ctx).relative_speed_norm, 0.0);
    }

    #[test]
    fn classification_thresholding() {
        // Bias the zero network so the score is a known constant.
        let mut net = Mlp::zeroed(INPUTS, 2, 1);
        net.bias_output[0] = 2.2; // sigmoid(2.2) ~ 0.9
        let f = LinkFeatures {
            distance_norm: 0.0,
            quality: 1.0,
            load: 0.0,
            relative_speed_norm: 0.5,
        };
        let status = classify_link(&net, &f, 0.5);
        assert!(status.score > 0.9);
        assert_eq!(status.label, LinkLabel::Stable);
    }

    #[test]
    fn score_exactly_at_threshold_is_stable() {
        let net = Mlp::zeroed(INPUTS, 2, 1); // score is exactly 0.5
        let f = LinkFeatures {
            distance_norm: 0.3,
            quality: 0.8,
            load: 0.2,
            relative_speed_norm: 0.5,
        };
        let status = classify_link(&net, &f, 0.5);
        assert_eq!(status.score, 0.5);
        assert_eq!(status.label, LinkLabel::Stable);
    }

    #[test]
    fn raising_score_never_flips_stable_to_unstable() {
        let mut rng = RandomStream::new(21, StreamId::Ann);
        let net = Mlp::random(INPUTS, 6, 1, 0.8, &mut rng);
        let threshold = 0.5;
        let mut scored: Vec<(f64, LinkLabel)> = (0..200)
            .map(|_| {
                let f = LinkFeatures {
                    distance_norm: rng.next_f64(),
                    quality: rng.next_f64(),
                    load: rng.next_f64(),
                    relative_speed_norm: rng.next_f64(),
                };
                let s = classify_link(&net, &f, threshold);
                (s.score, s.label)
            })
            .collect();
        scored.sort_by(|a, b| a.0.total_cmp(&b.0));
        let first_stable = scored.iter().position(|(_, l)| *l == LinkLabel::Stable);
        if let Some(idx) = first_stable {
            assert!(scored[idx..].iter().all(|(_, l)| *l == LinkLabel::Stable));
        }
    }

    #[test]
    fn weights_text_round_trip() {
        let mut rng = RandomStream::new(31, StreamId::Ann);
        let net = Mlp::random(INPUTS, 8, 1, 0.5, &mut rng);
        let text = net.to_text();
        let back = Mlp::from_text(&text).unwrap();
        assert_eq!(net, back);
    }

    #[test]
    fn weights_parse_rejects_garbage() {
        assert!(Mlp::from_text("").is_err());
        assert!(Mlp::from_text("mlp 4 8 1\n").is_err());
        assert!(Mlp::from_text("ann 4 8 1\n1 2 3\n").is_err());
    }
}

