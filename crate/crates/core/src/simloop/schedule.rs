//! Sampling schedules: when the controller receives a fresh measurement.

use serde::{Deserialize, Serialize};

use super::SimError;

/// Measurement instants `T_0 = 0 < T_1 < ...`, quantized to the simulation
/// grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum SamplingSchedule {
    /// `T_{i+1} - T_i = h` exactly.
    Uniform { h: f64 },
    /// `min_gap <= T_{i+1} - T_i <= max_gap`, gaps drawn uniformly;
    /// deterministic given the schedule seed.
    RandomBounded { min_gap: f64, max_gap: f64, seed: u64 },
}

impl SamplingSchedule {
    /// Upper bound `h` on the inter-sample interval (the horizon entering the
    /// bound calculus).
    pub fn max_gap(&self) -> f64 {
        match self {
            Self::Uniform { h } => *h,
            Self::RandomBounded { max_gap, .. } => *max_gap,
        }
    }

    /// Grid-step indices of the sampling instants within `0..n_steps`.
    pub(crate) fn sample_steps(&self, dt: f64, n_steps: usize) -> Result<Vec<usize>, SimError> {
        match self {
            Self::Uniform { h } => {
                let k = (h / dt).round() as usize;
                if k == 0 {
                    return Err(SimError::Config(format!("h = {h} below the grid step")));
                }
                Ok((0..n_steps).step_by(k).collect())
            }
            Self::RandomBounded {
                min_gap,
                max_gap,
                seed,
            } => {
                use rand::Rng;
                let k_min = ((min_gap / dt).ceil() as usize).max(1);
                let k_max = (max_gap / dt).floor() as usize;
                if k_min > k_max {
                    return Err(SimError::Config(format!(
                        "no grid point in the gap range [{min_gap}, {max_gap}] at dt = {dt}"
                    )));
                }
                let mut rng = crate::util::stream_rng(*seed, 0x7363_6865);
                let mut steps = vec![0usize];
                loop {
                    let gap = rng.gen_range(*min_gap..=*max_gap);
                    let k = ((gap / dt).round() as usize).clamp(k_min, k_max);
                    let next = steps.last().expect("non-empty") + k;
                    if next >= n_steps {
                        break;
                    }
                    steps.push(next);
                }
                Ok(steps)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_steps_are_exactly_spaced() {
        let s = SamplingSchedule::Uniform { h: 0.05 };
        let steps = s.sample_steps(1e-3, 200).unwrap();
        assert_eq!(steps, vec![0, 50, 100, 150]);
    }

    #[test]
    fn random_bounded_respects_bounds_and_seed() {
        let s = SamplingSchedule::RandomBounded {
            min_gap: 0.02,
            max_gap: 0.1,
            seed: 11,
        };
        let a = s.sample_steps(1e-3, 10_000).unwrap();
        let b = s.sample_steps(1e-3, 10_000).unwrap();
        assert_eq!(a, b);
        assert_eq!(a[0], 0);
        for w in a.windows(2) {
            let gap = w[1] - w[0];
            assert!((20..=100).contains(&gap), "gap {gap} steps");
        }
    }

    #[test]
    fn impossible_gap_range_is_an_error() {
        let s = SamplingSchedule::RandomBounded {
            min_gap: 1e-4,
            max_gap: 5e-4,
            seed: 0,
        };
        assert!(s.sample_steps(1e-3, 100).is_err());
    }
}
