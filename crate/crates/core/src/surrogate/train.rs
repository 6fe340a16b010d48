//! In-repo training loop: minibatch SGD with momentum 0.9 and cosine
//! learning-rate decay, mean-squared error over flattened outputs.
//! Deterministic given the seed (seeded init, seeded shuffles, one thread).

use rand::seq::SliceRandom;
use rand::Rng;

use super::{
    measure_epsilon, Activation, DenseLayer, OperatorDataset, SurrogateError, SurrogateModel,
    TrainingMeta,
};

/// First-order optimizer choice. Momentum SGD is the default; Adam handles
/// the badly conditioned curvature of long correlated history inputs, where
/// plain momentum provably stalls on the worst training entries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptimizerKind {
    MomentumSgd,
    Adam,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    /// Hidden-layer widths; the output layer is appended automatically.
    pub hidden: Vec<usize>,
    pub epochs: u32,
    pub learning_rate: f64,
    pub batch: usize,
    pub seed: u64,
    /// Momentum coefficient for SGD; first-moment decay for Adam.
    pub momentum: f64,
    pub optimizer: OptimizerKind,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            hidden: vec![128, 128],
            epochs: 300,
            learning_rate: 0.05,
            batch: 32,
            seed: 0,
            momentum: 0.9,
            optimizer: OptimizerKind::MomentumSgd,
        }
    }
}

fn xavier_layer(
    rows: usize,
    cols: usize,
    activation: Activation,
    rng: &mut impl Rng,
) -> DenseLayer {
    let scale = (6.0 / (rows + cols) as f64).sqrt();
    DenseLayer {
        weights: (0..rows * cols)
            .map(|_| rng.gen_range(-scale..scale))
            .collect(),
        bias: vec![0.0; rows],
        activation,
        rows,
        cols,
    }
}

pub(crate) struct Gradients {
    dw: Vec<Vec<f64>>,
    db: Vec<Vec<f64>>,
}

impl Gradients {
    fn zeros(layers: &[DenseLayer]) -> Self {
        Self {
            dw: layers.iter().map(|l| vec![0.0; l.weights.len()]).collect(),
            db: layers.iter().map(|l| vec![0.0; l.bias.len()]).collect(),
        }
    }

    fn reset(&mut self) {
        for g in self.dw.iter_mut().chain(self.db.iter_mut()) {
            g.iter_mut().for_each(|v| *v = 0.0);
        }
    }
}

struct OptimizerState {
    kind: OptimizerKind,
    momentum: f64,
    first: Gradients,
    second: Gradients,
    step: u64,
}

impl OptimizerState {
    fn new(cfg: &TrainConfig, layers: &[DenseLayer]) -> Self {
        Self {
            kind: cfg.optimizer,
            momentum: cfg.momentum,
            first: Gradients::zeros(layers),
            second: Gradients::zeros(layers),
            step: 0,
        }
    }

    fn apply(&mut self, layers: &mut [DenseLayer], grads: &Gradients, batch: usize, lr: f64) {
        self.step += 1;
        let inv_batch = 1.0 / batch as f64;
        match self.kind {
            OptimizerKind::MomentumSgd => {
                let mu = self.momentum;
                for l in 0..layers.len() {
                    momentum_step(&mut layers[l].weights, &grads.dw[l], &mut self.first.dw[l], mu, lr * inv_batch);
                    momentum_step(&mut layers[l].bias, &grads.db[l], &mut self.first.db[l], mu, lr * inv_batch);
                }
            }
            OptimizerKind::Adam => {
                let b1 = self.momentum;
                let b2: f64 = 0.999;
                let bc1 = 1.0 - b1.powi(self.step as i32);
                let bc2 = 1.0 - b2.powi(self.step as i32);
                for l in 0..layers.len() {
                    adam_step(
                        &mut layers[l].weights,
                        &grads.dw[l],
                        &mut self.first.dw[l],
                        &mut self.second.dw[l],
                        (b1, b2, bc1, bc2),
                        lr,
                        inv_batch,
                    );
                    adam_step(
                        &mut layers[l].bias,
                        &grads.db[l],
                        &mut self.first.db[l],
                        &mut self.second.db[l],
                        (b1, b2, bc1, bc2),
                        lr,
                        inv_batch,
                    );
                }
            }
        }
    }
}

fn momentum_step(params: &mut [f64], grads: &[f64], velocity: &mut [f64], mu: f64, scale: f64) {
    for (w, (v, g)) in params.iter_mut().zip(velocity.iter_mut().zip(grads)) {
        *v = mu * *v - scale * g;
        *w += *v;
    }
}

fn adam_step(
    params: &mut [f64],
    grads: &[f64],
    m: &mut [f64],
    v: &mut [f64],
    (b1, b2, bc1, bc2): (f64, f64, f64, f64),
    lr: f64,
    inv_batch: f64,
) {
    const EPS: f64 = 1e-8;
    for i in 0..params.len() {
        let g = grads[i] * inv_batch;
        m[i] = b1 * m[i] + (1.0 - b1) * g;
        v[i] = b2 * v[i] + (1.0 - b2) * g * g;
        let m_hat = m[i] / bc1;
        let v_hat = v[i] / bc2;
        params[i] -= lr * m_hat / (v_hat.sqrt() + EPS);
    }
}

/// Forward pass storing post-activation values per layer; returns activations
/// `a[0] = input, a[L] = output`.
fn forward_cached(layers: &[DenseLayer], input: &[f64]) -> Vec<Vec<f64>> {
    let mut acts = Vec::with_capacity(layers.len() + 1);
    acts.push(input.to_vec());
    let mut buf = Vec::new();
    for layer in layers {
        layer.forward(acts.last().expect("non-empty"), &mut buf);
        acts.push(buf.clone());
    }
    acts
}

/// Backpropagate `dL/d(output)` through the cached activations, accumulating
/// parameter gradients and returning nothing (input gradient not needed).
fn backward(
    layers: &[DenseLayer],
    acts: &[Vec<f64>],
    mut delta: Vec<f64>,
    grads: &mut Gradients,
) {
    for (l, layer) in layers.iter().enumerate().rev() {
        // delta currently holds dL/d(post-activation of layer l).
        if layer.activation == Activation::Tanh {
            for (d, a) in delta.iter_mut().zip(&acts[l + 1]) {
                *d *= 1.0 - a * a;
            }
        }
        // Now delta = dL/d(pre-activation).
        let input = &acts[l];
        let dw = &mut grads.dw[l];
        for r in 0..layer.rows {
            let row = &mut dw[r * layer.cols..(r + 1) * layer.cols];
            let dr = delta[r];
            for (g, v) in row.iter_mut().zip(input) {
                *g += dr * v;
            }
            grads.db[l][r] += dr;
        }
        if l > 0 {
            let mut next = vec![0.0; layer.cols];
            for r in 0..layer.rows {
                let row = &layer.weights[r * layer.cols..(r + 1) * layer.cols];
                let dr = delta[r];
                for (n, w) in next.iter_mut().zip(row) {
                    *n += dr * w;
                }
            }
            delta = next;
        }
    }
}

/// Gradient of the MSE loss for one sample, plus its loss contribution.
/// Exposed to the gradient-check test.
pub(crate) fn sample_loss_and_grads(
    layers: &[DenseLayer],
    input: &[f64],
    target: &[f64],
    grads: &mut Gradients,
) -> f64 {
    let acts = forward_cached(layers, input);
    let out = acts.last().expect("non-empty");
    let k = out.len() as f64;
    let mut loss = 0.0;
    let delta: Vec<f64> = out
        .iter()
        .zip(target)
        .map(|(o, t)| {
            let e = o - t;
            loss += e * e;
            2.0 * e / k
        })
        .collect();
    backward(layers, &acts, delta, grads);
    loss / k
}

/// Central-difference check of the analytic gradients on a given network.
/// Returns the worst relative error over `probes` random parameters.
pub fn gradient_check(
    layers: &[DenseLayer],
    input: &[f64],
    target: &[f64],
    probes: usize,
    seed: u64,
) -> f64 {
    let mut grads = Gradients::zeros(layers);
    sample_loss_and_grads(layers, input, target, &mut grads);

    let loss_of = |layers: &[DenseLayer]| -> f64 {
        let acts = forward_cached(layers, input);
        let out = acts.last().expect("non-empty");
        out.iter()
            .zip(target)
            .map(|(o, t)| (o - t) * (o - t))
            .sum::<f64>()
            / out.len() as f64
    };

    let mut rng = crate::util::stream_rng(seed, 0x67c4);
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    for _ in 0..probes {
        let l = rng.gen_range(0..layers.len());
        let nw = layers[l].weights.len();
        let idx = rng.gen_range(0..nw + layers[l].bias.len());
        let mut plus = layers.to_vec();
        let mut minus = layers.to_vec();
        let analytic = if idx < nw {
            plus[l].weights[idx] += h;
            minus[l].weights[idx] -= h;
            grads.dw[l][idx]
        } else {
            plus[l].bias[idx - nw] += h;
            minus[l].bias[idx - nw] -= h;
            grads.db[l][idx - nw]
        };
        let numeric = (loss_of(&plus) - loss_of(&minus)) / (2.0 * h);
        let denom = analytic.abs().max(numeric.abs()).max(1e-8);
        worst = worst.max((analytic - numeric).abs() / denom);
    }
    worst
}

pub(crate) fn make_layers(
    flat_in: usize,
    flat_out: usize,
    hidden: &[usize],
    rng: &mut impl Rng,
) -> Result<Vec<DenseLayer>, SurrogateError> {
    if hidden.iter().any(|&w| w == 0) {
        return Err(SurrogateError::BadArchitecture(
            "zero-width hidden layer".into(),
        ));
    }
    let mut dims = vec![flat_in];
    dims.extend_from_slice(hidden);
    dims.push(flat_out);
    let last = dims.len() - 2;
    Ok(dims
        .windows(2)
        .enumerate()
        .map(|(i, w)| {
            let act = if i == last {
                Activation::Linear
            } else {
                Activation::Tanh
            };
            xavier_layer(w[1], w[0], act, rng)
        })
        .collect())
}

/// Train a surrogate on the dataset's training split.
///
/// Normalization statistics come from the training split only. With
/// `epochs = 0` the returned model is exactly the seeded initialization and
/// the recorded validation error is the initialization error.
pub fn train(dataset: &OperatorDataset, cfg: &TrainConfig) -> Result<SurrogateModel, SurrogateError> {
    if dataset.entries.is_empty() {
        return Err(SurrogateError::EmptyDataset);
    }
    if dataset.validation_entries().is_empty() {
        return Err(SurrogateError::EmptyValidation);
    }
    if cfg.batch == 0 {
        return Err(SurrogateError::BadArchitecture("batch size 0".into()));
    }
    let proto = &dataset.entries[0];
    let state_dim = proto.x.len();
    let history_points = proto.history.grid_points();
    let input_dim = proto.history.input_dim();
    let out_points = proto.target.points.len();
    let flat_in = state_dim + history_points * input_dim;
    let flat_out = out_points * state_dim;

    let mut model = SurrogateModel {
        kind: dataset.kind,
        state_dim,
        history_points,
        input_dim,
        out_points,
        out_t0: proto.target.t0,
        out_dt: proto.target.dt,
        delay: dataset.delay,
        horizon: dataset.horizon,
        norm_mean: vec![0.0; flat_in],
        norm_std: vec![1.0; flat_in],
        layers: Vec::new(),
        meta: TrainingMeta {
            dataset_id: dataset.id(),
            epochs: cfg.epochs,
            seed: cfg.seed,
            mean_sup_error: 0.0,
            max_sup_error: 0.0,
        },
    };

    // Flattened training split.
    let train_entries = dataset.train_entries();
    let inputs: Vec<Vec<f64>> = train_entries
        .iter()
        .map(|e| model.flatten_input(&e.x, &e.history))
        .collect();
    let targets: Vec<Vec<f64>> = train_entries
        .iter()
        .map(|e| e.target.points.concat())
        .collect();

    // Per-feature normalization from the training split.
    for f in 0..flat_in {
        let mean = inputs.iter().map(|v| v[f]).sum::<f64>() / inputs.len() as f64;
        let var =
            inputs.iter().map(|v| (v[f] - mean) * (v[f] - mean)).sum::<f64>() / inputs.len() as f64;
        model.norm_mean[f] = mean;
        model.norm_std[f] = if var.sqrt() > 1e-10 { var.sqrt() } else { 1.0 };
    }
    let normed: Vec<Vec<f64>> = inputs
        .iter()
        .map(|v| {
            v.iter()
                .enumerate()
                .map(|(i, x)| (x - model.norm_mean[i]) / model.norm_std[i])
                .collect()
        })
        .collect();

    let mut rng = crate::util::stream_rng(cfg.seed, 0x7261_696e);
    model.layers = make_layers(flat_in, flat_out, &cfg.hidden, &mut rng)?;

    let mut grads = Gradients::zeros(&model.layers);
    let mut state = OptimizerState::new(cfg, &model.layers);
    let mut order: Vec<usize> = (0..normed.len()).collect();

    for epoch in 0..cfg.epochs {
        // Cosine decay from the base rate to (almost) zero.
        let progress = epoch as f64 / cfg.epochs.max(1) as f64;
        let lr = cfg.learning_rate * 0.5 * (1.0 + (std::f64::consts::PI * progress).cos());
        order.shuffle(&mut rng);
        for chunk in order.chunks(cfg.batch) {
            grads.reset();
            let mut batch_loss = 0.0;
            for &i in chunk {
                batch_loss += sample_loss_and_grads(&model.layers, &normed[i], &targets[i], &mut grads);
            }
            batch_loss /= chunk.len() as f64;
            if !batch_loss.is_finite() {
                return Err(SurrogateError::NanLoss { epoch });
            }
            state.apply(&mut model.layers, &grads, chunk.len(), lr);
        }
    }

    let (mean_sup, max_sup) = measure_epsilon(&model, dataset)?;
    model.meta.mean_sup_error = mean_sup;
    model.meta.max_sup_error = max_sup;
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::delayline::InputHistory;
    use crate::predictor::Trajectory;
    use crate::surrogate::{DatasetEntry, OperatorKind};

    fn single_entry_dataset(copies: usize) -> OperatorDataset {
        let entry = DatasetEntry {
            x: vec![0.4],
            history: InputHistory::constant(1.0, 5, &[0.2]),
            target: Trajectory::new(-1.0, 0.25, vec![vec![0.1], vec![0.3], vec![0.2], vec![0.5], vec![0.4]]),
        };
        OperatorDataset {
            kind: OperatorKind::Predictor,
            plant_name: "scalar_linear".into(),
            delay: 1.0,
            horizon: 0.05,
            validation_split: 0.2,
            entries: vec![entry; copies],
        }
    }

    #[test]
    fn memorizes_a_single_repeated_entry() {
        let ds = single_entry_dataset(16);
        let cfg = TrainConfig {
            hidden: vec![16],
            epochs: 400,
            learning_rate: 0.05,
            batch: 4,
            seed: 3,
            momentum: 0.9,
            optimizer: OptimizerKind::MomentumSgd,
        };
        let model = train(&ds, &cfg).unwrap();
        assert!(
            model.meta.max_sup_error < 1e-3,
            "sup error {}",
            model.meta.max_sup_error
        );
    }

    #[test]
    fn zero_epochs_is_a_no_op_with_measured_init_error() {
        let ds = single_entry_dataset(8);
        let cfg = TrainConfig {
            epochs: 0,
            seed: 9,
            ..Default::default()
        };
        let a = train(&ds, &cfg).unwrap();
        let b = train(&ds, &cfg).unwrap();
        assert_eq!(a.layers, b.layers, "init must be seed-deterministic");
        assert!(a.meta.max_sup_error > 0.0, "init error should be nonzero");
        let (_, max_sup) = measure_epsilon(&a, &ds).unwrap();
        assert_eq!(a.meta.max_sup_error, max_sup);
    }

    #[test]
    fn same_seed_reproduces_identical_models() {
        let ds = single_entry_dataset(12);
        let cfg = TrainConfig {
            hidden: vec![8],
            epochs: 50,
            seed: 42,
            ..Default::default()
        };
        let a = train(&ds, &cfg).unwrap();
        let b = train(&ds, &cfg).unwrap();
        assert_eq!(a.layers, b.layers);
        assert_eq!(a.meta.max_sup_error, b.meta.max_sup_error);
    }

    #[test]
    fn absurd_learning_rate_reports_nan_loss_with_epoch() {
        let ds = single_entry_dataset(8);
        let cfg = TrainConfig {
            hidden: vec![8],
            epochs: 50,
            learning_rate: 1e12,
            batch: 4,
            seed: 1,
            momentum: 0.9,
            optimizer: OptimizerKind::MomentumSgd,
        };
        match train(&ds, &cfg) {
            Err(SurrogateError::NanLoss { .. }) => {}
            other => panic!("expected NanLoss, got {other:?}"),
        }
    }

    #[test]
    fn backprop_matches_central_differences_on_tiny_net() {
        let mut rng = crate::util::stream_rng(11, 0);
        let layers = make_layers(2, 2, &[2], &mut rng).unwrap();
        let worst = gradient_check(&layers, &[0.3, -0.7], &[0.5, 0.1], 20, 13);
        assert!(worst <= 1e-4, "relative gradient error {worst}");
    }
}
