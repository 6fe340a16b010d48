//! Wall-clock comparison of surrogate evaluation against the numerical
//! predictor at matched accuracy.
//!
//! Both methods evaluate the same random `(state, history)` inputs; the
//! numerical predictor is additionally swept over a tolerance list. Accuracy
//! is reported against a tight reference solve (tol `1e-9`). Timings are
//! per-evaluation with a warmup prefix excluded, all on one thread.

use std::fmt;
use std::time::Instant;

use serde::Serialize;

use crate::delayline::InputHistory;
use crate::dynamics::{random_state, PlantHandle};
use crate::predictor::{solve_predictor, PredictorError, SolverConfig, Trajectory};
use crate::simloop::{
    run, ControllerMode, InitialHistory, SamplingSchedule, SimConfig, SimError,
};
use crate::surrogate::{OperatorKind, SurrogateModel};

#[derive(Debug)]
pub enum BenchError {
    TooFewEvals { got: usize, min: usize },
    WrongKind(OperatorKind),
    Layout(String),
    Solver(PredictorError),
    Surrogate(String),
}

impl fmt::Display for BenchError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::TooFewEvals { got, min } => {
                write!(f, "need at least {min} evaluations, got {got}")
            }
            Self::WrongKind(kind) => write!(
                f,
                "benchmark compares against the predictor operator; model kind is {kind}"
            ),
            Self::Layout(msg) => write!(f, "model/plant layout mismatch: {msg}"),
            Self::Solver(e) => write!(f, "reference solver failed: {e}"),
            Self::Surrogate(msg) => write!(f, "surrogate failed: {msg}"),
        }
    }
}

impl std::error::Error for BenchError {}

#[derive(Debug, Clone, Serialize)]
pub struct MethodStats {
    pub name: String,
    pub n_evals: usize,
    pub mean_ns: f64,
    pub p50_ns: u64,
    pub p95_ns: u64,
    /// Mean over inputs of the sup-over-grid gap to the tight reference.
    pub accuracy_achieved: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchReport {
    pub plant_name: String,
    pub methods: Vec<MethodStats>,
    /// Mean solver time at the tolerance nearest 1e-6 over mean surrogate
    /// time.
    pub speedup_ratio: f64,
    pub cpu: String,
    pub build_profile: String,
    /// Cleared when the timer resolution exceeds 1% of the fastest mean.
    pub timer_reliable: bool,
}

impl BenchReport {
    pub fn table_string(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "{:<24} {:>8} {:>12} {:>12} {:>12} {:>14}\n",
            "method", "n", "mean_ns", "p50_ns", "p95_ns", "accuracy"
        ));
        for m in &self.methods {
            out.push_str(&format!(
                "{:<24} {:>8} {:>12.0} {:>12} {:>12} {:>14.3e}\n",
                m.name, m.n_evals, m.mean_ns, m.p50_ns, m.p95_ns, m.accuracy_achieved
            ));
        }
        out.push_str(&format!("speedup_ratio: {:.2}\n", self.speedup_ratio));
        if !self.timer_reliable {
            out.push_str("WARNING: timer resolution above 1% of the fastest mean; treat timings as unreliable\n");
        }
        out
    }
}

fn percentile(sorted: &[u64], p: f64) -> u64 {
    let idx = ((sorted.len() as f64 - 1.0) * p).round() as usize;
    sorted[idx]
}

fn stats_from(name: &str, times: &[u64], accuracy: f64) -> MethodStats {
    let mut sorted = times.to_vec();
    sorted.sort_unstable();
    MethodStats {
        name: name.to_owned(),
        n_evals: times.len(),
        mean_ns: times.iter().map(|t| *t as f64).sum::<f64>() / times.len() as f64,
        p50_ns: percentile(&sorted, 0.5),
        p95_ns: percentile(&sorted, 0.95),
        accuracy_achieved: accuracy,
    }
}

fn sup_gap(a: &Trajectory, b: &Trajectory) -> f64 {
    a.points
        .iter()
        .zip(&b.points)
        .map(|(x, y)| crate::util::dist(x, y))
        .fold(0.0, f64::max)
}

fn timer_resolution_ns() -> u64 {
    let mut best = u64::MAX;
    for _ in 0..64 {
        let a = Instant::now();
        let mut b = Instant::now();
        while b == a {
            b = Instant::now();
        }
        best = best.min(b.duration_since(a).as_nanos() as u64);
    }
    best.max(1)
}

fn cpu_id() -> String {
    if let Ok(info) = std::fs::read_to_string("/proc/cpuinfo") {
        for line in info.lines() {
            if let Some(rest) = line.strip_prefix("model name") {
                return rest.trim_start_matches([' ', '\t', ':']).to_owned();
            }
        }
    }
    "unknown".to_owned()
}

/// Evaluation inputs `(measured state, input window)` harvested from
/// exact-baseline closed-loop rollouts with light measurement noise — the
/// distribution the operator is deployed on. Random open-loop input
/// histories would push the plant far outside the training domain and make
/// the reported surrogate accuracy meaningless.
fn closed_loop_inputs(
    plant: &PlantHandle,
    model: &SurrogateModel,
    n_evals: usize,
    seed: u64,
) -> Result<Vec<(Vec<f64>, InputHistory)>, BenchError> {
    let spec = plant.spec();
    let bbox = plant.domain();
    let dt = spec.delay / (model.history_points - 1) as f64;
    let mut inputs = Vec::with_capacity(n_evals);
    let mut rollout = 0u64;
    let mut skipped = 0usize;
    while inputs.len() < n_evals {
        let mut rng = crate::util::stream_rng(seed, 0x6265_6e63 ^ rollout);
        let x0 = random_state(plant.as_ref(), &bbox, 0.4, &mut rng);
        let config = SimConfig {
            plant: plant.clone(),
            mode: ControllerMode::Baseline,
            schedule: SamplingSchedule::Uniform { h: 50.0 * dt },
            noise_std: 0.02 * bbox.state_bound,
            dt,
            t_final: 4000.0 * dt,
            initial_state: x0,
            initial_history: InitialHistory::Zero,
            seed: seed.wrapping_add(rollout),
            solver: SolverConfig::default(),
        };
        match run(&config) {
            Ok(log) => {
                for rec in log.samples {
                    if inputs.len() >= n_evals {
                        break;
                    }
                    inputs.push((rec.x_meas, rec.window));
                }
            }
            Err(SimError::Divergence { .. }) => {
                skipped += 1;
                if skipped > 8 {
                    return Err(BenchError::Layout(
                        "closed-loop input harvesting keeps diverging".into(),
                    ));
                }
            }
            Err(e) => return Err(BenchError::Surrogate(e.to_string())),
        }
        rollout += 1;
    }
    Ok(inputs)
}

/// Time the numerical predictor (per tolerance) and the surrogate over the
/// same input set. The first 10% of evaluations per method are warmup and
/// excluded from the statistics.
pub fn run_bench(
    plant: &PlantHandle,
    model: &SurrogateModel,
    n_evals: usize,
    tol_list: &[f64],
    seed: u64,
) -> Result<BenchReport, BenchError> {
    const MIN_EVALS: usize = 100;
    if n_evals < MIN_EVALS {
        return Err(BenchError::TooFewEvals {
            got: n_evals,
            min: MIN_EVALS,
        });
    }
    if model.kind != OperatorKind::Predictor {
        return Err(BenchError::WrongKind(model.kind));
    }
    let spec = plant.spec();
    if model.state_dim != spec.state_dim || model.input_dim != spec.input_dim {
        return Err(BenchError::Layout(format!(
            "model dims ({}, {}) vs plant dims ({}, {})",
            model.state_dim, model.input_dim, spec.state_dim, spec.input_dim
        )));
    }
    if (model.delay - spec.delay).abs() > 1e-9 {
        return Err(BenchError::Layout(format!(
            "model delay {} vs plant delay {}",
            model.delay, spec.delay
        )));
    }

    let inputs = closed_loop_inputs(plant, model, n_evals, seed)?;
    let warmup = (n_evals / 10).max(1);

    // Tight reference for accuracy.
    let reference: Vec<Trajectory> = inputs
        .iter()
        .map(|(x, h)| {
            solve_predictor(plant.as_ref(), x, h, &SolverConfig::with_tol(1e-9))
                .map_err(BenchError::Solver)
        })
        .collect::<Result<_, _>>()?;

    let mut methods = Vec::new();
    let mut solver_mean_near_1e6 = f64::NAN;
    let mut best_tol_distance = f64::INFINITY;
    for &tol in tol_list {
        let cfg = SolverConfig::with_tol(tol);
        let mut times = Vec::with_capacity(n_evals - warmup);
        let mut acc = 0.0;
        for (i, (x, h)) in inputs.iter().enumerate() {
            let started = Instant::now();
            let out = solve_predictor(plant.as_ref(), x, h, &cfg).map_err(BenchError::Solver)?;
            let elapsed = started.elapsed().as_nanos() as u64;
            if i >= warmup {
                times.push(elapsed);
                acc += sup_gap(&out, &reference[i]);
            }
        }
        let stats = stats_from(
            &format!("numerical_predictor@{tol:.0e}"),
            &times,
            acc / times.len() as f64,
        );
        let distance = (tol.ln() - 1e-6f64.ln()).abs();
        if distance < best_tol_distance {
            best_tol_distance = distance;
            solver_mean_near_1e6 = stats.mean_ns;
        }
        methods.push(stats);
    }

    let mut times = Vec::with_capacity(n_evals - warmup);
    let mut acc = 0.0;
    for (i, (x, h)) in inputs.iter().enumerate() {
        let started = Instant::now();
        let out = model
            .predict(x, h)
            .map_err(|e| BenchError::Surrogate(e.to_string()))?;
        let elapsed = started.elapsed().as_nanos() as u64;
        if i >= warmup {
            times.push(elapsed);
            acc += sup_gap(&out, &reference[i]);
        }
    }
    methods.push(stats_from("surrogate", &times, acc / times.len() as f64));

    let surrogate_mean = methods.last().expect("just pushed").mean_ns;
    let fastest_mean = methods
        .iter()
        .map(|m| m.mean_ns)
        .fold(f64::INFINITY, f64::min);
    Ok(BenchReport {
        plant_name: spec.name.clone(),
        methods,
        speedup_ratio: solver_mean_near_1e6 / surrogate_mean,
        cpu: cpu_id(),
        build_profile: if cfg!(debug_assertions) {
            "debug".into()
        } else {
            "release".into()
        },
        timer_reliable: (timer_resolution_ns() as f64) <= 0.01 * fastest_mean,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::ScalarLinear;
    use crate::surrogate::{generate_dataset, train, GenOptions, TrainConfig};
    use std::sync::Arc;

    fn quick_model(plant: &PlantHandle) -> SurrogateModel {
        let opts = GenOptions {
            t_final: 2.0,
            dt: 1e-2,
            horizon: 0.1,
            ..Default::default()
        };
        let ds = generate_dataset(plant, OperatorKind::Predictor, 40, 0.02, 3, &opts).unwrap();
        train(
            &ds,
            &TrainConfig {
                hidden: vec![16],
                epochs: 30,
                ..Default::default()
            },
        )
        .unwrap()
    }

    #[test]
    fn report_contains_all_methods_and_a_ratio() {
        let plant: PlantHandle = Arc::new(ScalarLinear::new(1.0, 2.0, 0.2));
        let model = quick_model(&plant);
        let report = run_bench(&plant, &model, 120, &[1e-3, 1e-6], 5).unwrap();
        assert_eq!(report.methods.len(), 3);
        assert!(report.speedup_ratio.is_finite() && report.speedup_ratio > 0.0);
        assert!(report.methods.iter().all(|m| m.n_evals == 108));
        // Tighter tolerance cannot be cheaper to reach.
        assert!(report.methods[1].mean_ns >= report.methods[0].mean_ns * 0.8);
        // The solver meets its certificates against the tight reference.
        assert!(report.methods[1].accuracy_achieved <= 1e-4);
        let table = report.table_string();
        assert!(table.contains("surrogate") && table.contains("speedup_ratio"));
    }

    #[test]
    fn small_eval_counts_are_rejected() {
        let plant: PlantHandle = Arc::new(ScalarLinear::new(1.0, 2.0, 0.2));
        let model = quick_model(&plant);
        assert!(matches!(
            run_bench(&plant, &model, 10, &[1e-6], 0),
            Err(BenchError::TooFewEvals { .. })
        ));
    }

    #[test]
    fn multistep_models_are_rejected() {
        let plant: PlantHandle = Arc::new(ScalarLinear::new(1.0, 2.0, 0.2));
        let opts = GenOptions {
            t_final: 2.0,
            dt: 1e-2,
            horizon: 0.1,
            ..Default::default()
        };
        let ds = generate_dataset(&plant, OperatorKind::MultiStep, 20, 0.0, 1, &opts).unwrap();
        let model = train(
            &ds,
            &TrainConfig {
                hidden: vec![8],
                epochs: 5,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(matches!(
            run_bench(&plant, &model, 120, &[1e-6], 0),
            Err(BenchError::WrongKind(_))
        ));
    }
}
