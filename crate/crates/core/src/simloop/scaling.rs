//! Controlled-error residual scaling: how the steady-state residual grows
//! with the operator approximation error.
//!
//! The exact operator output is corrupted by a perturbation of known
//! sup-norm (a surrogate proxy of exactly that error) and the closed loop is
//! run to steady state for an ensemble of initial conditions. Matched seeds
//! across the two controller cases make the rows directly comparable.

use crate::dynamics::{random_state, PlantHandle};
use crate::predictor::SolverConfig;
use crate::util::{mean, median, std_dev};

use super::{
    run, ControllerMode, CorruptionPolicy, InitialHistory, SamplingSchedule, SimConfig, SimError,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScalingCase {
    Case1,
    Case2,
}

impl ScalingCase {
    fn mode(&self, eps: f64, policy: CorruptionPolicy) -> ControllerMode {
        match self {
            Self::Case1 => ControllerMode::Case1Controlled { eps, policy },
            Self::Case2 => ControllerMode::Case2Controlled { eps, policy },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalingOptions {
    /// Uniform sampling interval (shared by both cases for comparability).
    pub h: f64,
    pub dt: f64,
    pub t_final: f64,
    pub policy: CorruptionPolicy,
    /// Initial conditions are drawn from this fraction of the domain box.
    pub init_fraction: f64,
    /// Steady state is the median over this trailing fraction of the run.
    pub tail_fraction: f64,
    pub threads: usize,
}

impl Default for ScalingOptions {
    fn default() -> Self {
        Self {
            h: 0.05,
            dt: 1e-3,
            t_final: 12.0,
            policy: CorruptionPolicy::FlowAligned,
            init_fraction: 0.5,
            tail_fraction: 0.2,
            threads: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct ScalingRow {
    pub eps: f64,
    pub mean: f64,
    pub std: f64,
    pub median: f64,
    pub trials: usize,
    pub diverged: usize,
}

/// Run `trials` closed loops per entry of `eps_list` and tabulate the
/// steady-state residual `|X| + sup |U|` over the trailing window.
///
/// `eps_list` must be sorted ascending and include 0 (the exact-operator
/// floor). Trial seeds derive from `(seed, eps index, trial index)` only, so
/// Case 1 and Case 2 see identical initial conditions and noise-free
/// corruption draws.
pub fn residual_scaling_experiment(
    plant: &PlantHandle,
    case: ScalingCase,
    eps_list: &[f64],
    trials: usize,
    seed: u64,
    opts: &ScalingOptions,
) -> Result<Vec<ScalingRow>, SimError> {
    if eps_list.is_empty() || eps_list[0] != 0.0 {
        return Err(SimError::Config(
            "eps_list must start at 0 (the exact-operator floor)".into(),
        ));
    }
    if eps_list.windows(2).any(|w| w[1] <= w[0]) {
        return Err(SimError::Config("eps_list must be strictly ascending".into()));
    }
    if trials == 0 {
        return Err(SimError::Config("need at least one trial".into()));
    }

    let bbox = plant.domain();
    let run_one = |eps: f64, eps_idx: usize, trial: usize| -> Result<Option<f64>, SimError> {
        let stream = (eps_idx as u64) << 32 | trial as u64;
        let mut rng = crate::util::stream_rng(seed, 0x7363_616c ^ stream);
        let x0 = random_state(plant.as_ref(), &bbox, opts.init_fraction, &mut rng);
        let config = SimConfig {
            plant: plant.clone(),
            mode: case.mode(eps, opts.policy),
            schedule: SamplingSchedule::Uniform { h: opts.h },
            noise_std: 0.0,
            dt: opts.dt,
            t_final: opts.t_final,
            initial_state: x0,
            initial_history: InitialHistory::Zero,
            seed: seed ^ stream.wrapping_mul(0x9e37_79b9),
            solver: SolverConfig::default(),
        };
        match run(&config) {
            Ok(log) => Ok(Some(log.steady_state_residual(opts.tail_fraction))),
            Err(SimError::Divergence { .. }) => Ok(None),
            Err(e) => Err(e),
        }
    };

    let mut rows = Vec::with_capacity(eps_list.len());
    for (eps_idx, &eps) in eps_list.iter().enumerate() {
        let outcomes = run_trials(trials, opts.threads, |trial| run_one(eps, eps_idx, trial))?;
        let finished: Vec<f64> = outcomes.iter().filter_map(|o| *o).collect();
        let diverged = trials - finished.len();
        rows.push(if finished.is_empty() {
            ScalingRow {
                eps,
                mean: f64::INFINITY,
                std: f64::INFINITY,
                median: f64::INFINITY,
                trials,
                diverged,
            }
        } else {
            ScalingRow {
                eps,
                mean: mean(&finished),
                std: std_dev(&finished),
                median: median(&finished),
                trials,
                diverged,
            }
        });
    }
    Ok(rows)
}

/// Fan trials across up to `threads` workers; results come back in trial
/// order, so the output is independent of scheduling.
fn run_trials<F>(trials: usize, threads: usize, job: F) -> Result<Vec<Option<f64>>, SimError>
where
    F: Fn(usize) -> Result<Option<f64>, SimError> + Sync,
{
    let workers = threads.max(1).min(trials);
    if workers == 1 {
        return (0..trials).map(&job).collect();
    }
    let mut results: Vec<Result<Option<f64>, SimError>> = Vec::with_capacity(trials);
    results.resize_with(trials, || Ok(None));
    let chunk = trials.div_ceil(workers);
    std::thread::scope(|scope| {
        let mut handles = Vec::new();
        for (w, slot) in results.chunks_mut(chunk).enumerate() {
            let job = &job;
            handles.push(scope.spawn(move || {
                for (i, out) in slot.iter_mut().enumerate() {
                    *out = job(w * chunk + i);
                }
            }));
        }
        for h in handles {
            h.join().expect("scaling worker panicked");
        }
    });
    results.into_iter().collect()
}
