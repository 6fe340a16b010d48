//! Post-hoc diagnostics over simulation logs.
//!
//! Under exact predictor feedback the predicted trajectory satisfies
//! `Zhat(t) = X(t + D)`, so the aligned gap `|Zhat(t) - X(t+D)|` measures how
//! far an implementation deviates from the exact hybrid law, and its image
//! under `kappa` is the boundary value of the backstepped input driving the
//! stability estimates. Both are computed by shifting the realized state
//! series against the prediction series on the shared grid.

use crate::dynamics::Plant;
use crate::util::{dist, norm};

use super::{SimError, SimLog};

/// A time-indexed diagnostic series.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    /// Set when the log was too short to evaluate any point.
    pub truncated: bool,
}

impl Series {
    pub fn sup(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// `|Zhat(t) - X(t+D)|` for `t in [0, t_final - D]`.
pub fn prediction_error_series(log: &SimLog, delay: f64) -> Series {
    let n_delay = (delay / log.dt).round() as usize;
    if log.len() <= n_delay {
        return Series {
            times: Vec::new(),
            values: Vec::new(),
            truncated: true,
        };
    }
    let n = log.len() - n_delay;
    Series {
        times: log.times[..n].to_vec(),
        values: (0..n)
            .map(|j| dist(&log.zhat[j], &log.states[j + n_delay]))
            .collect(),
        truncated: false,
    }
}

/// Boundary value of the backstepped input,
/// `|w(D, t)| = |kappa(Zhat(t)) - kappa(X(t+D))|`.
pub fn transport_residual(plant: &dyn Plant, log: &SimLog) -> Series {
    let delay = plant.spec().delay;
    let n_delay = (delay / log.dt).round() as usize;
    if log.len() <= n_delay {
        return Series {
            times: Vec::new(),
            values: Vec::new(),
            truncated: true,
        };
    }
    let n = log.len() - n_delay;
    Series {
        times: log.times[..n].to_vec(),
        values: (0..n)
            .map(|j| {
                dist(
                    &plant.kappa(&log.zhat[j]),
                    &plant.kappa(&log.states[j + n_delay]),
                )
            })
            .collect(),
        truncated: false,
    }
}

/// Reset jumps `|Zhat(T_i+) - Zhat(T_i-)|` at each sampling instant after
/// the first.
pub fn reset_jumps(log: &SimLog) -> Vec<(f64, f64)> {
    log.samples
        .iter()
        .skip(1)
        .map(|r| (r.t, dist(&r.zhat_post, &r.zhat_pre)))
        .collect()
}

/// Trailing moving-average (RMS) tracking error with the given window.
///
/// `reference` must be sampled on the log grid; `None` compares the leading
/// `error_dim` components against zero, which is the tracking error for
/// plants formulated in error coordinates.
pub fn tracking_error_series(
    log: &SimLog,
    reference: Option<&[Vec<f64>]>,
    window_secs: f64,
) -> Result<Series, SimError> {
    let w = (window_secs / log.dt).round() as usize;
    if w == 0 {
        return Err(SimError::Config(format!(
            "window {window_secs}s is below the grid step"
        )));
    }
    if w > log.len() {
        return Err(SimError::Config(format!(
            "window {window_secs}s is longer than the log ({} rows)",
            log.len()
        )));
    }
    let sq_err: Vec<f64> = match reference {
        Some(r) => {
            if r.len() != log.len() {
                return Err(SimError::Config(format!(
                    "reference has {} rows, log has {}",
                    r.len(),
                    log.len()
                )));
            }
            log.states
                .iter()
                .zip(r)
                .map(|(x, xd)| {
                    let d = dist(x, xd);
                    d * d
                })
                .collect()
        }
        None => log
            .states
            .iter()
            .map(|x| {
                let d = norm(&x[..log.error_dim]);
                d * d
            })
            .collect(),
    };
    let mut running = 0.0;
    let mut values = Vec::with_capacity(log.len());
    for j in 0..sq_err.len() {
        running += sq_err[j];
        if j >= w {
            running -= sq_err[j - w];
        }
        let count = (j + 1).min(w);
        values.push((running.max(0.0) / count as f64).sqrt());
    }
    Ok(Series {
        times: log.times.clone(),
        values,
        truncated: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::ScalarLinear;
    use crate::simloop::SimLog;

    fn log_with(states: Vec<Vec<f64>>, zhat: Vec<Vec<f64>>) -> SimLog {
        let plant = ScalarLinear::new(1.0, 2.0, 0.5);
        let mut log = SimLog::new(&plant, 0.25, states.len());
        for (j, (x, z)) in states.iter().zip(&zhat).enumerate() {
            log.record(j as f64 * 0.25, x, &[0.0], z, false, 0);
        }
        log
    }

    #[test]
    fn perfect_prediction_gives_zero_series() {
        // zhat[j] == x[j + 2] with delay 0.5 = 2 steps.
        let states = vec![vec![0.0], vec![1.0], vec![2.0], vec![3.0], vec![4.0]];
        let zhat = vec![vec![2.0], vec![3.0], vec![4.0], vec![9.0], vec![9.0]];
        let log = log_with(states, zhat);
        let s = prediction_error_series(&log, 0.5);
        assert_eq!(s.values, vec![0.0, 0.0, 0.0]);
        assert!(!s.truncated);
    }

    #[test]
    fn short_log_is_flagged_truncated() {
        let log = log_with(vec![vec![0.0]], vec![vec![0.0]]);
        let s = prediction_error_series(&log, 0.5);
        assert!(s.truncated && s.is_empty());
    }

    #[test]
    fn transport_residual_is_kappa_of_the_gap_for_linear_kappa() {
        let states = vec![vec![0.0], vec![0.0], vec![1.0], vec![2.0]];
        let zhat = vec![vec![1.5], vec![2.5], vec![0.0], vec![0.0]];
        let log = log_with(states, zhat);
        let plant = ScalarLinear::new(1.0, 2.0, 0.5);
        let s = transport_residual(&plant, &log);
        // kappa = -2x, so residual = 2 * |zhat - x_shift|.
        let pe = prediction_error_series(&log, 0.5);
        for (a, b) in s.values.iter().zip(&pe.values) {
            assert!((a - 2.0 * b).abs() < 1e-12);
        }
    }

    #[test]
    fn tracking_error_of_matched_reference_is_zero() {
        let states = vec![vec![1.0], vec![2.0], vec![3.0], vec![4.0]];
        let log = log_with(states.clone(), states.clone());
        let s = tracking_error_series(&log, Some(&states), 0.5).unwrap();
        assert!(s.values.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn constant_offset_gives_constant_rms() {
        let states = vec![vec![1.5]; 8];
        let zhat = vec![vec![0.0]; 8];
        let log = log_with(states, zhat);
        let s = tracking_error_series(&log, None, 0.5).unwrap();
        assert!(s.values.iter().all(|v| (v - 1.5).abs() < 1e-12));
    }

    #[test]
    fn window_longer_than_log_is_an_error() {
        let log = log_with(vec![vec![0.0]; 3], vec![vec![0.0]; 3]);
        assert!(tracking_error_series(&log, None, 10.0).is_err());
    }
}
