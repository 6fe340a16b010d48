//! Simulation log: the full grid record plus per-sample events, with CSV
//! export.

use std::collections::VecDeque;
use std::io::{self, Write};

use crate::delayline::InputHistory;
use crate::dynamics::Plant;
use crate::util::{median, norm};

/// One sampling-instant event.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleRecord {
    pub step: usize,
    pub t: f64,
    /// Noisy measurement handed to the operator.
    pub x_meas: Vec<f64>,
    /// Input window over `[T_i - D, T_i]` handed to the operator.
    pub window: InputHistory,
    /// Prediction at `T_i` just before the refresh.
    pub zhat_pre: Vec<f64>,
    /// Prediction at `T_i` just after the refresh.
    pub zhat_post: Vec<f64>,
    /// Wall-clock time of the controller evaluation.
    pub eval_ns: u64,
}

/// Full closed-loop record on the simulation grid.
#[derive(Debug, Clone)]
pub struct SimLog {
    pub plant_name: String,
    pub delay: f64,
    pub dt: f64,
    pub state_dim: usize,
    pub input_dim: usize,
    /// Leading state components that measure tracking error.
    pub error_dim: usize,
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub inputs: Vec<Vec<f64>>,
    pub zhat: Vec<Vec<f64>>,
    pub sample_flag: Vec<bool>,
    pub eval_ns: Vec<u64>,
    pub samples: Vec<SampleRecord>,
}

impl SimLog {
    pub(crate) fn new(plant: &dyn Plant, dt: f64, capacity: usize) -> Self {
        let spec = plant.spec();
        Self {
            plant_name: spec.name.clone(),
            delay: spec.delay,
            dt,
            state_dim: spec.state_dim,
            input_dim: spec.input_dim,
            error_dim: plant.error_dim(),
            times: Vec::with_capacity(capacity),
            states: Vec::with_capacity(capacity),
            inputs: Vec::with_capacity(capacity),
            zhat: Vec::with_capacity(capacity),
            sample_flag: Vec::with_capacity(capacity),
            eval_ns: Vec::with_capacity(capacity),
            samples: Vec::new(),
        }
    }

    pub(crate) fn record(
        &mut self,
        t: f64,
        x: &[f64],
        u: &[f64],
        zhat: &[f64],
        flag: bool,
        eval_ns: u64,
    ) {
        self.times.push(t);
        self.states.push(x.to_vec());
        self.inputs.push(u.to_vec());
        self.zhat.push(zhat.to_vec());
        self.sample_flag.push(flag);
        self.eval_ns.push(eval_ns);
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn t_final(&self) -> f64 {
        *self.times.last().unwrap_or(&0.0)
    }

    /// Equality of everything except wall-clock fields, which are the only
    /// non-reproducible content of a log.
    pub fn content_eq(&self, other: &Self) -> bool {
        self.plant_name == other.plant_name
            && self.delay == other.delay
            && self.dt == other.dt
            && self.times == other.times
            && self.states == other.states
            && self.inputs == other.inputs
            && self.zhat == other.zhat
            && self.sample_flag == other.sample_flag
            && self.samples.len() == other.samples.len()
            && self
                .samples
                .iter()
                .zip(&other.samples)
                .all(|(a, b)| {
                    a.step == b.step
                        && a.x_meas == b.x_meas
                        && a.window == b.window
                        && a.zhat_pre == b.zhat_pre
                        && a.zhat_post == b.zhat_post
                })
    }

    /// Residual `|X(t)| + sup over the trailing delay window of |U|`,
    /// defined once the window is full (`t >= D`).
    pub fn residual_series(&self) -> Vec<f64> {
        let n_delay = (self.delay / self.dt).round() as usize;
        if self.len() <= n_delay {
            return Vec::new();
        }
        let u_norms: Vec<f64> = self.inputs.iter().map(|u| norm(u)).collect();
        let mut out = Vec::with_capacity(self.len() - n_delay);
        let mut window: VecDeque<usize> = VecDeque::new();
        for j in 0..self.len() {
            while let Some(&back) = window.back() {
                if u_norms[back] <= u_norms[j] {
                    window.pop_back();
                } else {
                    break;
                }
            }
            window.push_back(j);
            if let Some(&front) = window.front() {
                if front + n_delay < j {
                    window.pop_front();
                }
            }
            if j >= n_delay {
                let sup_u = u_norms[*window.front().expect("non-empty")];
                out.push(norm(&self.states[j]) + sup_u);
            }
        }
        out
    }

    /// Median of the residual over the trailing `tail_fraction` of the run.
    pub fn steady_state_residual(&self, tail_fraction: f64) -> f64 {
        let series = self.residual_series();
        if series.is_empty() {
            return f64::INFINITY;
        }
        let keep = ((series.len() as f64 * tail_fraction).round() as usize)
            .clamp(1, series.len());
        median(&series[series.len() - keep..])
    }

    /// Median of the tracking-error norm (leading `error_dim` components)
    /// over the trailing `tail_fraction` of the run.
    pub fn steady_state_tracking_error(&self, tail_fraction: f64) -> f64 {
        if self.is_empty() {
            return f64::INFINITY;
        }
        let errs: Vec<f64> = self
            .states
            .iter()
            .map(|x| norm(&x[..self.error_dim]))
            .collect();
        let keep = ((errs.len() as f64 * tail_fraction).round() as usize).clamp(1, errs.len());
        median(&errs[errs.len() - keep..])
    }

    pub fn sup_state_norm(&self) -> f64 {
        self.states.iter().map(|x| norm(x)).fold(0.0, f64::max)
    }

    /// CSV export: `t, x_0.., u_0.., zhat_0.., sample_flag, eval_wallclock_ns`.
    /// Wall-clock values are timing data; pass `include_wallclock = false`
    /// for byte-reproducible output.
    pub fn write_csv(&self, w: &mut impl Write, include_wallclock: bool) -> io::Result<()> {
        let mut header = vec!["t".to_owned()];
        header.extend((0..self.state_dim).map(|i| format!("x_{i}")));
        header.extend((0..self.input_dim).map(|i| format!("u_{i}")));
        header.extend((0..self.state_dim).map(|i| format!("zhat_{i}")));
        header.push("sample_flag".into());
        if include_wallclock {
            header.push("eval_wallclock_ns".into());
        }
        writeln!(w, "{}", header.join(","))?;
        for j in 0..self.len() {
            let mut row = Vec::with_capacity(header.len());
            row.push(format_float(self.times[j]));
            row.extend(self.states[j].iter().map(|v| format_float(*v)));
            row.extend(self.inputs[j].iter().map(|v| format_float(*v)));
            row.extend(self.zhat[j].iter().map(|v| format_float(*v)));
            row.push(if self.sample_flag[j] { "1" } else { "0" }.into());
            if include_wallclock {
                row.push(self.eval_ns[j].to_string());
            }
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }

    pub fn csv_string(&self, include_wallclock: bool) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf, include_wallclock)
            .expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("CSV is ASCII")
    }
}

/// Shortest round-trip decimal form; deterministic for a given bit pattern.
fn format_float(v: f64) -> String {
    let mut s = format!("{v}");
    if !s.contains('.') && !s.contains('e') && !s.contains("inf") && !s.contains("NaN") {
        s.push_str(".0");
    }
    s
}
