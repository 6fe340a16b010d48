//! Gridded input history over the delay window.
//!
//! [`InputHistory`] stores the applied inputs on a uniform grid of offsets
//! `theta_k = -D + k * D/(N_g - 1)`, `k = 0..N_g`. Sample 0 is the oldest
//! input (offset `-D`), the last sample is the most recent (offset `0-`).
//! This buffer is the discrete stand-in for the transport representation of
//! the delay: the simulator pushes one sample per step and the predictor
//! reads the window back through [`InputHistory::sample_at`].

use std::fmt;

use crate::util::all_finite;

#[derive(Debug, Clone, PartialEq)]
pub enum DelayLineError {
    /// `dt` must equal the grid step or divide it an integral number of times.
    MisalignedStep { dt: f64, grid_step: f64 },
    ThetaOutOfRange { theta: f64, delay: f64 },
    NonFiniteSample,
    BadGrid { grid_points: usize },
}

impl fmt::Display for DelayLineError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::MisalignedStep { dt, grid_step } => write!(
                f,
                "push step {dt} is not aligned to the history grid step {grid_step}"
            ),
            Self::ThetaOutOfRange { theta, delay } => {
                write!(f, "offset {theta} outside [-{delay}, 0]")
            }
            Self::NonFiniteSample => write!(f, "input sample contains NaN or inf"),
            Self::BadGrid { grid_points } => {
                write!(f, "history grid needs at least 2 points, got {grid_points}")
            }
        }
    }
}

impl std::error::Error for DelayLineError {}

/// Uniformly gridded input history over `[-D, 0]`.
#[derive(Debug, Clone, PartialEq)]
pub struct InputHistory {
    delay: f64,
    samples: Vec<Vec<f64>>,
}

impl InputHistory {
    /// History with every sample equal to `value`.
    pub fn constant(delay: f64, grid_points: usize, value: &[f64]) -> Self {
        assert!(grid_points >= 2, "history grid needs at least 2 points");
        assert!(delay > 0.0 && delay.is_finite());
        Self {
            delay,
            samples: vec![value.to_vec(); grid_points],
        }
    }

    /// All-zero history for an input of dimension `input_dim`.
    pub fn zero(delay: f64, grid_points: usize, input_dim: usize) -> Self {
        Self::constant(delay, grid_points, &vec![0.0; input_dim])
    }

    /// History from explicit samples (oldest first).
    pub fn from_samples(delay: f64, samples: Vec<Vec<f64>>) -> Result<Self, DelayLineError> {
        if samples.len() < 2 {
            return Err(DelayLineError::BadGrid {
                grid_points: samples.len(),
            });
        }
        if samples.iter().any(|s| !all_finite(s)) {
            return Err(DelayLineError::NonFiniteSample);
        }
        Ok(Self { delay, samples })
    }

    pub fn delay(&self) -> f64 {
        self.delay
    }

    pub fn grid_points(&self) -> usize {
        self.samples.len()
    }

    pub fn grid_step(&self) -> f64 {
        self.delay / (self.samples.len() - 1) as f64
    }

    pub fn input_dim(&self) -> usize {
        self.samples[0].len()
    }

    pub fn samples(&self) -> &[Vec<f64>] {
        &self.samples
    }

    pub fn newest(&self) -> &[f64] {
        self.samples.last().expect("history is never empty")
    }

    pub fn oldest(&self) -> &[f64] {
        &self.samples[0]
    }

    /// Advance the window by `dt`, discarding what falls out of `[-D, 0]` and
    /// appending `u` at offset `0-`.
    ///
    /// When `dt` equals the grid step this is a pure shift (no arithmetic on
    /// stored values). When `dt` divides the grid step, interior samples are
    /// re-read by linear interpolation at the shifted offsets.
    pub fn push(&mut self, u: &[f64], dt: f64) -> Result<(), DelayLineError> {
        if !all_finite(u) {
            return Err(DelayLineError::NonFiniteSample);
        }
        let step = self.grid_step();
        let ratio = step / dt;
        if !(dt > 0.0) || (ratio - ratio.round()).abs() > 1e-9 * ratio.abs().max(1.0) {
            return Err(DelayLineError::MisalignedStep {
                dt,
                grid_step: step,
            });
        }
        let n = self.samples.len();
        if ratio.round() as usize == 1 {
            self.samples.rotate_left(1);
            self.samples[n - 1] = u.to_vec();
        } else {
            let mut shifted = Vec::with_capacity(n);
            for k in 0..n - 1 {
                let theta = -self.delay + k as f64 * step + dt;
                shifted.push(self.sample_at(theta.min(0.0))?);
            }
            shifted.push(u.to_vec());
            self.samples = shifted;
        }
        Ok(())
    }

    /// Linear interpolation of the stored window at offset `theta` in
    /// `[-D, 0]`. At grid offsets this returns the stored sample exactly.
    pub fn sample_at(&self, theta: f64) -> Result<Vec<f64>, DelayLineError> {
        if !(-self.delay..=0.0).contains(&theta) {
            // Tolerate round-off just past the ends.
            let slack = 1e-12 * self.delay.max(1.0);
            if theta > 0.0 && theta < slack {
                return Ok(self.newest().to_vec());
            }
            if theta < -self.delay && theta > -self.delay - slack {
                return Ok(self.oldest().to_vec());
            }
            return Err(DelayLineError::ThetaOutOfRange {
                theta,
                delay: self.delay,
            });
        }
        let step = self.grid_step();
        let mut pos = (theta + self.delay) / step;
        // Snap to the node when round-off lands a grid query just off it, so
        // grid-offset reads return stored samples bitwise.
        let nearest = pos.round();
        if (pos - nearest).abs() < 1e-9 {
            pos = nearest;
        }
        let k = (pos.floor().max(0.0) as usize).min(self.samples.len() - 2);
        let w = pos - k as f64;
        let lo = &self.samples[k];
        if w == 0.0 {
            return Ok(lo.clone());
        }
        let hi = &self.samples[k + 1];
        Ok(lo
            .iter()
            .zip(hi)
            .map(|(a, b)| a + (b - a) * w)
            .collect())
    }

    /// Random smooth history: per-channel sum of three sinusoids with random
    /// amplitudes, frequencies, and phases, scaled so the sup-norm stays
    /// within `bound`. Smoothness matters: the operator suites assume
    /// continuously differentiable input signals, and the quadrature error of
    /// rough per-node noise would swamp the tolerances under test.
    pub fn random_smooth(
        delay: f64,
        grid_points: usize,
        input_dim: usize,
        bound: f64,
        rng: &mut impl rand::Rng,
    ) -> Self {
        assert!(grid_points >= 2);
        let step = delay / (grid_points - 1) as f64;
        let mut channels: Vec<Vec<f64>> = Vec::with_capacity(input_dim);
        for _ in 0..input_dim {
            let modes: Vec<(f64, f64, f64)> = (0..3)
                .map(|_| {
                    (
                        rng.gen_range(0.0..1.0),
                        rng.gen_range(0.5..5.0),
                        rng.gen_range(0.0..std::f64::consts::TAU),
                    )
                })
                .collect();
            let raw: Vec<f64> = (0..grid_points)
                .map(|k| {
                    let theta = -delay + k as f64 * step;
                    modes
                        .iter()
                        .map(|(a, w, ph)| a * (w * theta + ph).sin())
                        .sum()
                })
                .collect();
            let sup = raw.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-12);
            let scale = bound * rng.gen_range(0.1..1.0) / sup;
            channels.push(raw.into_iter().map(|v| v * scale).collect());
        }
        let samples: Vec<Vec<f64>> = (0..grid_points)
            .map(|k| channels.iter().map(|ch| ch[k]).collect())
            .collect();
        Self { delay, samples }
    }

    /// Copy of the window advanced by one grid step with the newest sample
    /// held. Used at sampling instants, where the input about to be applied
    /// is not known yet.
    pub fn advanced_hold(&self) -> Self {
        let mut out = self.clone();
        let n = out.samples.len();
        out.samples.rotate_left(1);
        out.samples[n - 1] = self.newest().to_vec();
        out
    }

    /// Copy with the newest sample replaced. Exact controller paths use this
    /// to close the algebraic loop between the window's endpoint and the
    /// input actually applied at the sampling instant.
    pub fn with_newest(&self, u: &[f64]) -> Self {
        let mut out = self.clone();
        let n = out.samples.len();
        out.samples[n - 1] = u.to_vec();
        out
    }

    /// Sup over the grid of the Euclidean distance to another history.
    pub fn sup_distance(&self, other: &Self) -> f64 {
        assert_eq!(self.samples.len(), other.samples.len());
        self.samples
            .iter()
            .zip(&other.samples)
            .map(|(a, b)| crate::util::dist(a, b))
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn push_shifts_and_appends() {
        let mut h = InputHistory::zero(1.0, 4, 1);
        let step = h.grid_step();
        h.push(&[1.0], step).unwrap();
        assert_eq!(h.newest(), &[1.0]);
        assert_eq!(h.oldest(), &[0.0]);
        assert_eq!(
            h.samples(),
            &[vec![0.0], vec![0.0], vec![0.0], vec![1.0]]
        );
    }

    #[test]
    fn pushing_a_constant_saturates_the_window() {
        let mut h = InputHistory::zero(1.0, 5, 1);
        let step = h.grid_step();
        for _ in 0..5 {
            h.push(&[2.5], step).unwrap();
        }
        assert!(h.samples().iter().all(|s| s == &[2.5]));
    }

    #[test]
    fn push_has_queue_semantics_at_grid_rate() {
        let samples: Vec<Vec<f64>> = (0..4).map(|k| vec![k as f64]).collect();
        let mut h = InputHistory::from_samples(0.9, samples).unwrap();
        let step = h.grid_step();
        h.push(&[9.0], step).unwrap();
        assert_eq!(h.samples(), &[vec![1.0], vec![2.0], vec![3.0], vec![9.0]]);
    }

    #[test]
    fn misaligned_push_is_rejected() {
        let mut h = InputHistory::zero(1.0, 5, 1);
        assert!(matches!(
            h.push(&[0.0], 0.3),
            Err(DelayLineError::MisalignedStep { .. })
        ));
        // A divisor of the grid step is accepted.
        assert!(h.push(&[0.0], h.grid_step() / 2.0).is_ok());
    }

    #[test]
    fn sample_at_constant_history() {
        let h = InputHistory::constant(2.0, 7, &[3.25]);
        for theta in [-2.0, -1.3, -0.5, 0.0] {
            assert_eq!(h.sample_at(theta).unwrap(), vec![3.25]);
        }
    }

    #[test]
    fn sample_at_is_exact_on_linear_data() {
        let delay = 1.5;
        let n = 11;
        let samples: Vec<Vec<f64>> = (0..n)
            .map(|k| vec![-delay + k as f64 * delay / (n - 1) as f64])
            .collect();
        let h = InputHistory::from_samples(delay, samples).unwrap();
        let v = h.sample_at(-delay / 2.0).unwrap();
        assert!((v[0] + delay / 2.0).abs() < 1e-12);
    }

    #[test]
    fn two_point_interpolation_hand_value() {
        let h = InputHistory::from_samples(1.0, vec![vec![0.0], vec![1.0]]).unwrap();
        let v = h.sample_at(-0.25).unwrap();
        assert!((v[0] - 0.75).abs() < 1e-12);
    }

    #[test]
    fn theta_out_of_range_is_rejected() {
        let h = InputHistory::zero(1.0, 3, 1);
        assert!(h.sample_at(-1.5).is_err());
        assert!(h.sample_at(0.5).is_err());
    }

    #[test]
    fn grid_rate_round_trip_reproduces_pushed_values() {
        let mut h = InputHistory::zero(1.0, 6, 1);
        let step = h.grid_step();
        let signal: Vec<f64> = (0..6).map(|k| (k as f64).sin()).collect();
        for v in &signal {
            h.push(&[*v], step).unwrap();
        }
        for (k, v) in signal.iter().enumerate() {
            let theta = -1.0 + k as f64 * step;
            assert_eq!(h.sample_at(theta).unwrap()[0], *v, "offset {theta}");
        }
    }

    proptest! {
        /// Interpolated values never exceed the slope of the bracketing pair:
        /// |h(a) - h(b)| <= max adjacent slope * |a - b|.
        #[test]
        fn interpolation_respects_adjacent_slope_bound(
            values in proptest::collection::vec(-10.0f64..10.0, 3..20),
            a in 0.0f64..1.0,
            b in 0.0f64..1.0,
        ) {
            let delay = 1.0;
            let samples: Vec<Vec<f64>> = values.iter().map(|v| vec![*v]).collect();
            let h = InputHistory::from_samples(delay, samples).unwrap();
            let step = h.grid_step();
            let max_slope = values
                .windows(2)
                .map(|w| (w[1] - w[0]).abs() / step)
                .fold(0.0, f64::max);
            let ta = -delay * a;
            let tb = -delay * b;
            let va = h.sample_at(ta).unwrap()[0];
            let vb = h.sample_at(tb).unwrap()[0];
            prop_assert!((va - vb).abs() <= max_slope * (ta - tb).abs() + 1e-9);
        }

        /// Pushing at the grid rate keeps older samples bitwise intact.
        #[test]
        fn push_preserves_remaining_samples(
            init in proptest::collection::vec(-5.0f64..5.0, 4),
            incoming in -5.0f64..5.0,
        ) {
            let samples: Vec<Vec<f64>> = init.iter().map(|v| vec![*v]).collect();
            let mut h = InputHistory::from_samples(2.0, samples).unwrap();
            let step = h.grid_step();
            h.push(&[incoming], step).unwrap();
            for (k, v) in init.iter().skip(1).enumerate() {
                prop_assert_eq!(h.samples()[k][0], *v);
            }
            prop_assert_eq!(h.newest()[0], incoming);
        }
    }
}
