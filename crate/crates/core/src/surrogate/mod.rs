//! Trainable operator surrogates.
//!
//! A [`SurrogateModel`] is a dense network over the flattened
//! `(state, gridded input history)` pair, producing a state trajectory on a
//! fixed output grid. It stands in for either prediction operator:
//! [`OperatorKind::MultiStep`] targets the sampling-horizon prediction
//! (output on `[0, h)`), [`OperatorKind::Predictor`] targets the delay-window
//! predictor (output on `[-D, 0]`). Inputs are normalized per feature with
//! statistics frozen from the training split. The recorded validation error
//! `eps_hat` (max over the validation split of the sup-over-grid gap) is the
//! artifact's operational estimate of the operator approximation error.

mod dataset;
mod io;
mod train;

pub use dataset::{generate_dataset, DatasetEntry, GenOptions, OperatorDataset};
pub use io::{load_dataset, load_model, save_dataset, save_model};
pub use train::{gradient_check, train, OptimizerKind, TrainConfig};

use std::fmt;

use crate::delayline::InputHistory;
use crate::predictor::Trajectory;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OperatorKind {
    /// Maps `(X(T_i), U_i)` to the predicted closed-loop trajectory over the
    /// next sampling interval `[0, h)`.
    MultiStep,
    /// Maps `(X(T_i), U_i)` to the predictor trajectory over `[-D, 0]`.
    Predictor,
}

impl fmt::Display for OperatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::MultiStep => write!(f, "multi_step"),
            Self::Predictor => write!(f, "predictor"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Tanh,
    Linear,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    /// Row-major `rows x cols`.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    pub activation: Activation,
    pub rows: usize,
    pub cols: usize,
}

impl DenseLayer {
    pub fn forward(&self, input: &[f64], out: &mut Vec<f64>) {
        debug_assert_eq!(input.len(), self.cols);
        out.clear();
        for r in 0..self.rows {
            let row = &self.weights[r * self.cols..(r + 1) * self.cols];
            let mut acc = self.bias[r];
            for (w, v) in row.iter().zip(input) {
                acc += w * v;
            }
            out.push(match self.activation {
                Activation::Tanh => acc.tanh(),
                Activation::Linear => acc,
            });
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.weights.iter().map(|w| w * w).sum::<f64>().sqrt()
    }
}

/// Training provenance and the measured validation error.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingMeta {
    pub dataset_id: String,
    pub epochs: u32,
    pub seed: u64,
    /// Mean over the validation split of the sup-over-grid error.
    pub mean_sup_error: f64,
    /// Max over the validation split of the sup-over-grid error; the
    /// operational `eps_hat` consumed by the bound calculus.
    pub max_sup_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SurrogateModel {
    pub kind: OperatorKind,
    pub state_dim: usize,
    pub history_points: usize,
    pub input_dim: usize,
    /// Output grid: `out_points` states at `out_t0 + k * out_dt`.
    pub out_points: usize,
    pub out_t0: f64,
    pub out_dt: f64,
    /// Delay window the history grid spans.
    pub delay: f64,
    /// Sampling horizon the operator was generated for.
    pub horizon: f64,
    /// Per-feature affine input normalization (frozen from the train split).
    pub norm_mean: Vec<f64>,
    pub norm_std: Vec<f64>,
    pub layers: Vec<DenseLayer>,
    pub meta: TrainingMeta,
}

#[derive(Debug)]
pub enum SurrogateError {
    LayoutMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    EmptyDataset,
    EmptyValidation,
    BadArchitecture(String),
    InvalidRequest(String),
    NanLoss {
        epoch: u32,
    },
    TooManySkipped {
        skipped: usize,
        attempted: usize,
    },
    KindMismatch {
        expected: OperatorKind,
        got: OperatorKind,
    },
    Io(std::io::Error),
    BadFile(String),
    Solver(crate::predictor::PredictorError),
}

impl fmt::Display for SurrogateError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::LayoutMismatch {
                what,
                expected,
                got,
            } => write!(f, "layout mismatch in {what}: expected {expected}, got {got}"),
            Self::EmptyDataset => write!(f, "dataset has no entries"),
            Self::EmptyValidation => write!(f, "dataset has no validation split"),
            Self::BadArchitecture(msg) => write!(f, "bad architecture: {msg}"),
            Self::InvalidRequest(msg) => write!(f, "invalid request: {msg}"),
            Self::NanLoss { epoch } => write!(f, "training loss became NaN at epoch {epoch}"),
            Self::TooManySkipped { skipped, attempted } => write!(
                f,
                "dataset generation skipped {skipped} of {attempted} rollouts (>50%)"
            ),
            Self::KindMismatch { expected, got } => {
                write!(f, "operator kind mismatch: expected {expected}, got {got}")
            }
            Self::Io(e) => write!(f, "io error: {e}"),
            Self::BadFile(msg) => write!(f, "bad file: {msg}"),
            Self::Solver(e) => write!(f, "exact solver failed: {e}"),
        }
    }
}

impl std::error::Error for SurrogateError {}

impl From<std::io::Error> for SurrogateError {
    fn from(e: std::io::Error) -> Self {
        Self::Io(e)
    }
}

impl SurrogateModel {
    pub fn flat_input_dim(&self) -> usize {
        self.state_dim + self.history_points * self.input_dim
    }

    pub fn flat_output_dim(&self) -> usize {
        self.out_points * self.state_dim
    }

    /// Flatten `(x, history)` in the model's feature order: state first, then
    /// history samples oldest to newest, channels contiguous per sample.
    pub fn flatten_input(&self, x: &[f64], history: &InputHistory) -> Vec<f64> {
        let mut flat = Vec::with_capacity(self.flat_input_dim());
        flat.extend_from_slice(x);
        for s in history.samples() {
            flat.extend_from_slice(s);
        }
        flat
    }

    fn check_layout(&self, x: &[f64], history: &InputHistory) -> Result<(), SurrogateError> {
        if x.len() != self.state_dim {
            return Err(SurrogateError::LayoutMismatch {
                what: "state",
                expected: self.state_dim,
                got: x.len(),
            });
        }
        if history.grid_points() != self.history_points {
            return Err(SurrogateError::LayoutMismatch {
                what: "history grid",
                expected: self.history_points,
                got: history.grid_points(),
            });
        }
        if history.input_dim() != self.input_dim {
            return Err(SurrogateError::LayoutMismatch {
                what: "input channels",
                expected: self.input_dim,
                got: history.input_dim(),
            });
        }
        Ok(())
    }

    /// Forward pass on a pre-flattened, unnormalized feature vector.
    pub(crate) fn forward_flat(&self, flat: &[f64]) -> Vec<f64> {
        let mut a: Vec<f64> = flat
            .iter()
            .enumerate()
            .map(|(i, v)| (v - self.norm_mean[i]) / self.norm_std[i])
            .collect();
        let mut b = Vec::new();
        for layer in &self.layers {
            layer.forward(&a, &mut b);
            std::mem::swap(&mut a, &mut b);
        }
        a
    }

    /// Single forward pass: predicted trajectory on the model's output grid.
    pub fn predict(&self, x: &[f64], history: &InputHistory) -> Result<Trajectory, SurrogateError> {
        self.check_layout(x, history)?;
        let flat_out = self.forward_flat(&self.flatten_input(x, history));
        let points: Vec<Vec<f64>> = flat_out
            .chunks_exact(self.state_dim)
            .map(|c| c.to_vec())
            .collect();
        Ok(Trajectory::new(self.out_t0, self.out_dt, points))
    }

    /// Upper bound on the Lipschitz constant of `predict` with respect to the
    /// flattened raw input: product of layer Frobenius norms times the
    /// largest normalization gain (tanh is 1-Lipschitz).
    pub fn lipschitz_bound(&self) -> f64 {
        let norm_gain = self
            .norm_std
            .iter()
            .map(|s| 1.0 / s)
            .fold(0.0f64, f64::max);
        self.layers
            .iter()
            .map(DenseLayer::frobenius_norm)
            .product::<f64>()
            * norm_gain
    }
}

/// Validation error of a model against a dataset's held-out split.
///
/// Per entry the error is the sup over output grid points of the Euclidean
/// gap to the stored target; returns `(mean, max)` across the split. The max
/// is the artifact's operational `eps` estimate.
pub fn measure_epsilon(
    model: &SurrogateModel,
    dataset: &OperatorDataset,
) -> Result<(f64, f64), SurrogateError> {
    let entries = dataset.validation_entries();
    if entries.is_empty() {
        return Err(SurrogateError::EmptyValidation);
    }
    let mut mean = 0.0;
    let mut max: f64 = 0.0;
    for entry in entries {
        let pred = model.predict(&entry.x, &entry.history)?;
        if pred.points.len() != entry.target.points.len() {
            return Err(SurrogateError::LayoutMismatch {
                what: "target grid",
                expected: entry.target.points.len(),
                got: pred.points.len(),
            });
        }
        let sup = pred
            .points
            .iter()
            .zip(&entry.target.points)
            .map(|(p, t)| crate::util::dist(p, t))
            .fold(0.0, f64::max);
        mean += sup;
        max = max.max(sup);
    }
    Ok((mean / entries.len() as f64, max))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Minimal handcrafted model for layout tests: identity-ish single linear
    /// layer mapping a (1 + 3*1)-dim input to a 2-point scalar trajectory.
    fn tiny_model(weights: Vec<f64>, bias: Vec<f64>) -> SurrogateModel {
        SurrogateModel {
            kind: OperatorKind::Predictor,
            state_dim: 1,
            history_points: 3,
            input_dim: 1,
            out_points: 2,
            out_t0: -1.0,
            out_dt: 1.0,
            delay: 1.0,
            horizon: 0.05,
            norm_mean: vec![0.0; 4],
            norm_std: vec![1.0; 4],
            layers: vec![DenseLayer {
                rows: 2,
                cols: 4,
                weights,
                bias,
                activation: Activation::Linear,
            }],
            meta: TrainingMeta {
                dataset_id: "test".into(),
                epochs: 0,
                seed: 0,
                mean_sup_error: 0.0,
                max_sup_error: 0.0,
            },
        }
    }

    #[test]
    fn zero_final_layer_outputs_its_bias() {
        let model = tiny_model(vec![0.0; 8], vec![0.25, -0.5]);
        let h = InputHistory::constant(1.0, 3, &[2.0]);
        let out = model.predict(&[1.0], &h).unwrap();
        assert_eq!(out.points, vec![vec![0.25], vec![-0.5]]);
    }

    #[test]
    fn predict_is_bitwise_deterministic() {
        let model = tiny_model(
            vec![0.1, -0.2, 0.3, 0.4, -0.5, 0.6, 0.7, 0.8],
            vec![0.01, 0.02],
        );
        let h = InputHistory::constant(1.0, 3, &[0.7]);
        let a = model.predict(&[0.3], &h).unwrap();
        let b = model.predict(&[0.3], &h).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn layout_mismatch_is_an_error() {
        let model = tiny_model(vec![0.0; 8], vec![0.0; 2]);
        let wrong_grid = InputHistory::constant(1.0, 5, &[0.0]);
        assert!(matches!(
            model.predict(&[0.0], &wrong_grid),
            Err(SurrogateError::LayoutMismatch { .. })
        ));
        let wrong_state = InputHistory::constant(1.0, 3, &[0.0]);
        assert!(matches!(
            model.predict(&[0.0, 0.0], &wrong_state),
            Err(SurrogateError::LayoutMismatch { .. })
        ));
    }

    #[test]
    fn lipschitz_bound_holds_on_random_pairs() {
        use rand::Rng;
        let mut rng = crate::util::stream_rng(5, 77);
        let weights: Vec<f64> = (0..8).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let bias: Vec<f64> = (0..2).map(|_| rng.gen_range(-0.5..0.5)).collect();
        let mut model = tiny_model(weights, bias);
        model.layers[0].activation = Activation::Tanh;
        model.norm_std = vec![0.5, 2.0, 1.0, 0.25];
        let bound = model.lipschitz_bound();
        for _ in 0..200 {
            let fa: Vec<f64> = (0..4).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let fb: Vec<f64> = (0..4).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let oa = model.forward_flat(&fa);
            let ob = model.forward_flat(&fb);
            let gap_out = crate::util::dist(&oa, &ob);
            let gap_in = crate::util::dist(&fa, &fb);
            assert!(gap_out <= bound * gap_in + 1e-12);
        }
    }
}
