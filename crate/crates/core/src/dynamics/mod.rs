//! Plant interface: vector field `f`, nominal feedback `kappa`, dimensions,
//! and empirical Lipschitz data.
//!
//! A plant is the delayed-input system `dX/dt = f(X(t), U(t-D))` together
//! with a feedback `kappa` that stabilizes the delay-free loop
//! `dX/dt = f(X, kappa(X))` at the origin. Plants are immutable after
//! construction and safe to share across threads.

mod plants;

pub use plants::{PlantConfig, Integrator, Pendulum, ScalarLinear, TwoLink};

use std::fmt;
use std::sync::Arc;

use rand::Rng;

use crate::util::{all_finite, dist};

/// Shared, immutable plant handle.
pub type PlantHandle = Arc<dyn Plant>;

/// Static plant metadata: dimensions and the input delay `D`.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantSpec {
    pub state_dim: usize,
    pub input_dim: usize,
    /// Input delay `D` in seconds.
    pub delay: f64,
    pub name: String,
}

impl PlantSpec {
    pub fn new(state_dim: usize, input_dim: usize, delay: f64, name: &str) -> Self {
        assert!(state_dim >= 1, "state_dim must be >= 1");
        assert!(input_dim >= 1, "input_dim must be >= 1");
        assert!(delay > 0.0 && delay.is_finite(), "delay must be positive");
        Self {
            state_dim,
            input_dim,
            delay,
            name: name.to_owned(),
        }
    }
}

/// Sup-norm radii of the compact evaluation domains for states and inputs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DomainBox {
    pub state_bound: f64,
    pub input_bound: f64,
}

impl DomainBox {
    pub fn new(state_bound: f64, input_bound: f64) -> Self {
        assert!(state_bound > 0.0, "state_bound must be positive");
        assert!(input_bound > 0.0, "input_bound must be positive");
        Self {
            state_bound,
            input_bound,
        }
    }

    /// Same box with both radii scaled by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self::new(self.state_bound * factor, self.input_bound * factor)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DynamicsError {
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    NonFiniteInput {
        what: &'static str,
    },
    /// The field evaluated to NaN/inf at a point inside the sampling box.
    NonFiniteEval {
        op: &'static str,
        point: Vec<f64>,
    },
    NotEnoughSamples {
        got: usize,
        min: usize,
    },
}

impl fmt::Display for DynamicsError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::DimensionMismatch {
                what,
                expected,
                got,
            } => write!(f, "{what}: expected length {expected}, got {got}"),
            Self::NonFiniteInput { what } => write!(f, "{what} contains NaN or inf"),
            Self::NonFiniteEval { op, point } => {
                write!(f, "{op} returned NaN or inf at point {point:?}")
            }
            Self::NotEnoughSamples { got, min } => {
                write!(f, "need at least {min} samples, got {got}")
            }
        }
    }
}

impl std::error::Error for DynamicsError {}

/// A delayed-input plant.
///
/// `f` and `kappa` are called on pre-validated slices in hot loops; they may
/// assume matching dimensions. Use [`eval_f`] / [`eval_kappa`] at API
/// boundaries where inputs are untrusted.
pub trait Plant: Send + Sync {
    fn spec(&self) -> &PlantSpec;

    /// Default compact evaluation domain for this plant.
    fn domain(&self) -> DomainBox;

    /// Vector field `f(x, u)`.
    fn f(&self, x: &[f64], u: &[f64]) -> Vec<f64>;

    /// Nominal stabilizing feedback `kappa(x)`, with `kappa(0) = 0`.
    fn kappa(&self, x: &[f64]) -> Vec<f64>;

    /// Number of leading state components that measure the regulation error.
    /// Plants that carry reference-generator states at the tail of the state
    /// vector override this so diagnostics report tracking error only.
    fn error_dim(&self) -> usize {
        self.spec().state_dim
    }
}

/// Validated evaluation of the vector field.
pub fn eval_f(plant: &dyn Plant, x: &[f64], u: &[f64]) -> Result<Vec<f64>, DynamicsError> {
    let spec = plant.spec();
    if x.len() != spec.state_dim {
        return Err(DynamicsError::DimensionMismatch {
            what: "state",
            expected: spec.state_dim,
            got: x.len(),
        });
    }
    if u.len() != spec.input_dim {
        return Err(DynamicsError::DimensionMismatch {
            what: "input",
            expected: spec.input_dim,
            got: u.len(),
        });
    }
    if !all_finite(x) {
        return Err(DynamicsError::NonFiniteInput { what: "state" });
    }
    if !all_finite(u) {
        return Err(DynamicsError::NonFiniteInput { what: "input" });
    }
    Ok(plant.f(x, u))
}

/// Validated evaluation of the nominal feedback.
pub fn eval_kappa(plant: &dyn Plant, x: &[f64]) -> Result<Vec<f64>, DynamicsError> {
    let spec = plant.spec();
    if x.len() != spec.state_dim {
        return Err(DynamicsError::DimensionMismatch {
            what: "state",
            expected: spec.state_dim,
            got: x.len(),
        });
    }
    if !all_finite(x) {
        return Err(DynamicsError::NonFiniteInput { what: "state" });
    }
    Ok(plant.kappa(x))
}

/// Multiplicative headroom applied to sampled Lipschitz estimates.
pub const LIPSCHITZ_SAFETY_FACTOR: f64 = 1.5;

/// Empirical Lipschitz constants `(C_f, C_kappa)` of `f` on the box and
/// `kappa` on its state slice.
///
/// Maximizes finite-difference quotients over `samples` pairs drawn uniformly
/// in the box, plus the same number of short-separation pairs (offset
/// `1e-4 * radius`) that capture the local gradient norm, then applies
/// [`LIPSCHITZ_SAFETY_FACTOR`]. Deterministic given `seed`. The quotient
/// metric is `|f1 - f2| / (|x1 - x2| + |u1 - u2|)` in Euclidean norms.
pub fn estimate_lipschitz(
    plant: &dyn Plant,
    bbox: &DomainBox,
    samples: usize,
    seed: u64,
) -> Result<(f64, f64), DynamicsError> {
    const MIN_SAMPLES: usize = 100;
    if samples < MIN_SAMPLES {
        return Err(DynamicsError::NotEnoughSamples {
            got: samples,
            min: MIN_SAMPLES,
        });
    }
    let spec = plant.spec();
    let n = spec.state_dim;
    let m = spec.input_dim;
    let mut rng = crate::util::stream_rng(seed, 0x4c69_7073);

    let draw_point = |rng: &mut rand_chacha::ChaCha8Rng| -> (Vec<f64>, Vec<f64>) {
        let x: Vec<f64> = (0..n)
            .map(|_| rng.gen_range(-bbox.state_bound..=bbox.state_bound))
            .collect();
        let u: Vec<f64> = (0..m)
            .map(|_| rng.gen_range(-bbox.input_bound..=bbox.input_bound))
            .collect();
        (x, u)
    };

    let checked_f = |x: &[f64], u: &[f64]| -> Result<Vec<f64>, DynamicsError> {
        let out = plant.f(x, u);
        if !all_finite(&out) {
            let mut point = x.to_vec();
            point.extend_from_slice(u);
            return Err(DynamicsError::NonFiniteEval { op: "f", point });
        }
        Ok(out)
    };
    let checked_kappa = |x: &[f64]| -> Result<Vec<f64>, DynamicsError> {
        let out = plant.kappa(x);
        if !all_finite(&out) {
            return Err(DynamicsError::NonFiniteEval {
                op: "kappa",
                point: x.to_vec(),
            });
        }
        Ok(out)
    };

    let mut c_f: f64 = 0.0;
    let mut c_kappa: f64 = 0.0;
    let short = 1e-4;

    for i in 0..2 * samples {
        let (x1, u1) = draw_point(&mut rng);
        let (x2, u2) = if i < samples {
            draw_point(&mut rng)
        } else {
            // Short-separation pair: perturb along a random direction scaled
            // to 1e-4 of each box radius.
            let x2: Vec<f64> = x1
                .iter()
                .map(|v| v + rng.gen_range(-1.0..=1.0) * short * bbox.state_bound)
                .collect();
            let u2: Vec<f64> = u1
                .iter()
                .map(|v| v + rng.gen_range(-1.0..=1.0) * short * bbox.input_bound)
                .collect();
            (x2, u2)
        };

        let denom_f = dist(&x1, &x2) + dist(&u1, &u2);
        if denom_f > 0.0 {
            let f1 = checked_f(&x1, &u1)?;
            let f2 = checked_f(&x2, &u2)?;
            c_f = c_f.max(dist(&f1, &f2) / denom_f);
        }
        let denom_k = dist(&x1, &x2);
        if denom_k > 0.0 {
            let k1 = checked_kappa(&x1)?;
            let k2 = checked_kappa(&x2)?;
            c_kappa = c_kappa.max(dist(&k1, &k2) / denom_k);
        }
    }

    Ok((
        c_f * LIPSCHITZ_SAFETY_FACTOR,
        c_kappa * LIPSCHITZ_SAFETY_FACTOR,
    ))
}

/// Draw a state uniformly from `fraction` of the box (componentwise).
pub fn random_state(
    plant: &dyn Plant,
    bbox: &DomainBox,
    fraction: f64,
    rng: &mut impl Rng,
) -> Vec<f64> {
    let r = bbox.state_bound * fraction;
    (0..plant.spec().state_dim)
        .map(|_| rng.gen_range(-r..=r))
        .collect()
}

/// Fourth-order Runge-Kutta step of an autonomous field.
pub(crate) fn rk4_step(field: &dyn Fn(&[f64]) -> Vec<f64>, x: &[f64], dt: f64) -> Vec<f64> {
    let k1 = field(x);
    let mid1: Vec<f64> = x.iter().zip(&k1).map(|(a, k)| a + 0.5 * dt * k).collect();
    let k2 = field(&mid1);
    let mid2: Vec<f64> = x.iter().zip(&k2).map(|(a, k)| a + 0.5 * dt * k).collect();
    let k3 = field(&mid2);
    let end: Vec<f64> = x.iter().zip(&k3).map(|(a, k)| a + dt * k).collect();
    let k4 = field(&end);
    x.iter()
        .enumerate()
        .map(|(i, a)| a + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect()
}

/// Integrate the delay-free closed loop `dx/dt = f(x, kappa(x))` for
/// `t_final` seconds with a fixed RK4 step. Used by stability checks.
pub fn simulate_delay_free(plant: &dyn Plant, x0: &[f64], t_final: f64, dt: f64) -> Vec<f64> {
    let field = |x: &[f64]| -> Vec<f64> {
        let u = plant.kappa(x);
        plant.f(x, &u)
    };
    let steps = (t_final / dt).round() as usize;
    let mut x = x0.to_vec();
    for _ in 0..steps {
        x = rk4_step(&field, &x, dt);
    }
    x
}
