//! Shipped test plants.
//!
//! Four plants cover the shapes the rest of the crate is exercised on:
//! a pure integrator and an unstable scalar linear system (closed-form
//! oracles), a damped pendulum with feedback-linearizing control, and a
//! two-link planar manipulator under computed torque tracking a sinusoidal
//! joint reference.
//!
//! The manipulator is formulated in error coordinates. Its state is
//! `[e1, e2, ed1, ed2, s, c]` where `e = q - q_des` is the joint tracking
//! error and `(s, c)` is a lightly damped oscillator that carries the
//! reference phase, so the plant stays autonomous and the origin is a genuine
//! asymptotically stable equilibrium (the nominal-feedback assumptions need
//! global asymptotic stability of the delay-free loop, which an undamped
//! phase oscillator would break).

use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{DomainBox, Plant, PlantHandle, PlantSpec};

/// `dx/dt = u` with `kappa(x) = -x`.
#[derive(Debug, Clone)]
pub struct Integrator {
    spec: PlantSpec,
}

impl Integrator {
    pub fn new(delay: f64) -> Self {
        Self {
            spec: PlantSpec::new(1, 1, delay, "integrator"),
        }
    }
}

impl Default for Integrator {
    fn default() -> Self {
        Self::new(1.0)
    }
}

impl Plant for Integrator {
    fn spec(&self) -> &PlantSpec {
        &self.spec
    }

    fn domain(&self) -> DomainBox {
        DomainBox::new(1.0, 2.0)
    }

    fn f(&self, _x: &[f64], u: &[f64]) -> Vec<f64> {
        vec![u[0]]
    }

    fn kappa(&self, x: &[f64]) -> Vec<f64> {
        vec![-x[0]]
    }
}

/// Unstable scalar plant `dx/dt = a*x + u` with `kappa(x) = -gain*x`.
///
/// With the defaults `a = 1`, `gain = 2` the delay-free closed loop is
/// `dx/dt = -x`. The predictor has the variation-of-constants closed form
/// used as an oracle throughout the test suites.
#[derive(Debug, Clone)]
pub struct ScalarLinear {
    spec: PlantSpec,
    pub a: f64,
    pub gain: f64,
}

impl ScalarLinear {
    pub fn new(a: f64, gain: f64, delay: f64) -> Self {
        Self {
            spec: PlantSpec::new(1, 1, delay, "scalar_linear"),
            a,
            gain,
        }
    }
}

impl Default for ScalarLinear {
    fn default() -> Self {
        Self::new(1.0, 2.0, 1.0)
    }
}

impl Plant for ScalarLinear {
    fn spec(&self) -> &PlantSpec {
        &self.spec
    }

    fn domain(&self) -> DomainBox {
        DomainBox::new(1.0, 3.0)
    }

    fn f(&self, x: &[f64], u: &[f64]) -> Vec<f64> {
        vec![self.a * x[0] + u[0]]
    }

    fn kappa(&self, x: &[f64]) -> Vec<f64> {
        vec![-self.gain * x[0]]
    }
}

/// Damped pendulum `thdd = -omega2*sin(th) - damping*thd + u` with a
/// feedback-linearizing `kappa` that yields the linear loop
/// `thdd = -kp*th - kd*thd`.
#[derive(Debug, Clone)]
pub struct Pendulum {
    spec: PlantSpec,
    pub omega2: f64,
    pub damping: f64,
    pub kp: f64,
    pub kd: f64,
}

impl Pendulum {
    pub fn new(omega2: f64, damping: f64, kp: f64, kd: f64, delay: f64) -> Self {
        Self {
            spec: PlantSpec::new(2, 1, delay, "pendulum"),
            omega2,
            damping,
            kp,
            kd,
        }
    }
}

impl Default for Pendulum {
    fn default() -> Self {
        Self::new(1.0, 0.1, 1.0, 2.0, 0.5)
    }
}

impl Plant for Pendulum {
    fn spec(&self) -> &PlantSpec {
        &self.spec
    }

    fn domain(&self) -> DomainBox {
        DomainBox::new(2.0, 8.0)
    }

    fn f(&self, x: &[f64], u: &[f64]) -> Vec<f64> {
        vec![
            x[1],
            -self.omega2 * x[0].sin() - self.damping * x[1] + u[0],
        ]
    }

    fn kappa(&self, x: &[f64]) -> Vec<f64> {
        vec![self.omega2 * x[0].sin() + self.damping * x[1] - self.kp * x[0] - self.kd * x[1]]
    }
}

/// Two-link planar manipulator (point masses at the link ends, angles from
/// the downward vertical) under delayed torque control,
/// `M(q) qdd + C(q, qd) + G(q) = tau(t - D)`, with a computed-torque `kappa`
/// tracking a sinusoidal joint reference.
///
/// State: `[e1, e2, ed1, ed2, s, c]` with `e = q - q_des(s, c)`. The
/// reference is `q_des_j = q0_j + amp_j * (s cos(phase_j) + c sin(phase_j))`
/// driven by `sd = omega*c - decay*s`, `cd = -omega*s - decay*c`.
#[derive(Debug, Clone)]
pub struct TwoLink {
    spec: PlantSpec,
    pub m1: f64,
    pub m2: f64,
    pub l1: f64,
    pub l2: f64,
    pub gravity: f64,
    pub kp: f64,
    pub kd: f64,
    pub q0: [f64; 2],
    pub amp: [f64; 2],
    pub phase: [f64; 2],
    pub omega: f64,
    /// Exponential decay rate of the reference oscillator. Strictly positive
    /// by default so the delay-free closed loop is asymptotically stable at
    /// the origin of the full (error + oscillator) state.
    pub decay: f64,
}

pub struct TwoLinkBuilder {
    inner: TwoLink,
}

impl TwoLinkBuilder {
    pub fn reference_decay(mut self, decay: f64) -> Self {
        self.inner.decay = decay;
        self
    }

    pub fn phase(mut self, phase: [f64; 2]) -> Self {
        self.inner.phase = phase;
        self
    }

    pub fn amplitude(mut self, amp: [f64; 2]) -> Self {
        self.inner.amp = amp;
        self
    }

    pub fn delay(mut self, delay: f64) -> Self {
        self.inner.spec.delay = delay;
        self
    }

    pub fn build(self) -> TwoLink {
        self.inner
    }
}

impl TwoLink {
    pub fn builder() -> TwoLinkBuilder {
        TwoLinkBuilder {
            inner: Self::default(),
        }
    }

    /// Inertia matrix entries `(m11, m12, m22)` at joint angles `q`.
    fn inertia(&self, q: &[f64; 2]) -> (f64, f64, f64) {
        let c2 = q[1].cos();
        let m11 = (self.m1 + self.m2) * self.l1 * self.l1
            + self.m2 * self.l2 * self.l2
            + 2.0 * self.m2 * self.l1 * self.l2 * c2;
        let m12 = self.m2 * self.l2 * self.l2 + self.m2 * self.l1 * self.l2 * c2;
        let m22 = self.m2 * self.l2 * self.l2;
        (m11, m12, m22)
    }

    /// Coriolis/centrifugal vector plus gravity vector.
    fn bias(&self, q: &[f64; 2], qd: &[f64; 2]) -> [f64; 2] {
        let s2 = q[1].sin();
        let h = self.m2 * self.l1 * self.l2 * s2;
        let cor1 = -h * (2.0 * qd[0] * qd[1] + qd[1] * qd[1]);
        let cor2 = h * qd[0] * qd[0];
        let g1 = (self.m1 + self.m2) * self.gravity * self.l1 * q[0].sin()
            + self.m2 * self.gravity * self.l2 * (q[0] + q[1]).sin();
        let g2 = self.m2 * self.gravity * self.l2 * (q[0] + q[1]).sin();
        [cor1 + g1, cor2 + g2]
    }

    fn solve_inertia(&self, q: &[f64; 2], rhs: &[f64; 2]) -> [f64; 2] {
        let (m11, m12, m22) = self.inertia(q);
        let det = m11 * m22 - m12 * m12;
        [
            (m22 * rhs[0] - m12 * rhs[1]) / det,
            (m11 * rhs[1] - m12 * rhs[0]) / det,
        ]
    }

    /// Reference position, velocity, and acceleration reconstructed from the
    /// oscillator state `(s, c)`.
    fn reference(&self, s: f64, c: f64) -> ([f64; 2], [f64; 2], [f64; 2]) {
        let (w, lam) = (self.omega, self.decay);
        let sd = w * c - lam * s;
        let cd = -w * s - lam * c;
        let sdd = (lam * lam - w * w) * s - 2.0 * lam * w * c;
        let cdd = (lam * lam - w * w) * c + 2.0 * lam * w * s;
        let mut q_des = [0.0; 2];
        let mut qd_des = [0.0; 2];
        let mut qdd_des = [0.0; 2];
        for j in 0..2 {
            let (cp, sp) = (self.phase[j].cos(), self.phase[j].sin());
            q_des[j] = self.q0[j] + self.amp[j] * (s * cp + c * sp);
            qd_des[j] = self.amp[j] * (sd * cp + cd * sp);
            qdd_des[j] = self.amp[j] * (sdd * cp + cdd * sp);
        }
        (q_des, qd_des, qdd_des)
    }

    /// Absolute joint coordinates for a given error-coordinate state.
    fn absolute(&self, x: &[f64]) -> ([f64; 2], [f64; 2], [f64; 2]) {
        let (q_des, qd_des, qdd_des) = self.reference(x[4], x[5]);
        let q = [q_des[0] + x[0], q_des[1] + x[1]];
        let qd = [qd_des[0] + x[2], qd_des[1] + x[3]];
        (q, qd, qdd_des)
    }

    #[cfg(test)]
    pub(crate) fn reference_and_rates_for_test(&self, x: &[f64]) -> ([f64; 2], [f64; 2]) {
        let (q, qd, _) = self.absolute(x);
        (q, qd)
    }

    #[cfg(test)]
    pub(crate) fn bias_terms_for_test(&self, q: &[f64; 2], qd: &[f64; 2]) -> [f64; 2] {
        self.bias(q, qd)
    }
}

impl Default for TwoLink {
    fn default() -> Self {
        Self {
            spec: PlantSpec::new(6, 2, 0.2, "two_link"),
            m1: 1.0,
            m2: 1.0,
            l1: 0.5,
            l2: 0.5,
            gravity: 9.81,
            kp: 4.0,
            kd: 4.0,
            q0: [0.0, 0.0],
            amp: [0.5, 0.3],
            phase: [0.0, PI / 2.0],
            omega: 2.0,
            decay: 0.35,
        }
    }
}

impl Plant for TwoLink {
    fn spec(&self) -> &PlantSpec {
        &self.spec
    }

    fn domain(&self) -> DomainBox {
        DomainBox::new(1.0, 30.0)
    }

    fn f(&self, x: &[f64], u: &[f64]) -> Vec<f64> {
        let (q, qd, qdd_des) = self.absolute(x);
        let bias = self.bias(&q, &qd);
        let rhs = [u[0] - bias[0], u[1] - bias[1]];
        let qdd = self.solve_inertia(&q, &rhs);
        let (s, c) = (x[4], x[5]);
        vec![
            x[2],
            x[3],
            qdd[0] - qdd_des[0],
            qdd[1] - qdd_des[1],
            self.omega * c - self.decay * s,
            -self.omega * s - self.decay * c,
        ]
    }

    fn kappa(&self, x: &[f64]) -> Vec<f64> {
        let (q, qd, qdd_des) = self.absolute(x);
        let (m11, m12, m22) = self.inertia(&q);
        let acc = [
            qdd_des[0] - self.kp * x[0] - self.kd * x[2],
            qdd_des[1] - self.kp * x[1] - self.kd * x[3],
        ];
        let bias = self.bias(&q, &qd);
        vec![
            m11 * acc[0] + m12 * acc[1] + bias[0],
            m12 * acc[0] + m22 * acc[1] + bias[1],
        ]
    }

    fn error_dim(&self) -> usize {
        4
    }
}

/// Serializable plant selection with per-plant parameters. Missing fields
/// fall back to the shipped defaults.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum PlantConfig {
    Integrator {
        #[serde(default)]
        delay: Option<f64>,
    },
    ScalarLinear {
        #[serde(default)]
        a: Option<f64>,
        #[serde(default)]
        gain: Option<f64>,
        #[serde(default)]
        delay: Option<f64>,
    },
    Pendulum {
        #[serde(default)]
        omega2: Option<f64>,
        #[serde(default)]
        damping: Option<f64>,
        #[serde(default)]
        kp: Option<f64>,
        #[serde(default)]
        kd: Option<f64>,
        #[serde(default)]
        delay: Option<f64>,
    },
    TwoLink {
        #[serde(default)]
        masses: Option<[f64; 2]>,
        #[serde(default)]
        lengths: Option<[f64; 2]>,
        #[serde(default)]
        gravity: Option<f64>,
        #[serde(default)]
        kp: Option<f64>,
        #[serde(default)]
        kd: Option<f64>,
        #[serde(default)]
        q0: Option<[f64; 2]>,
        #[serde(default)]
        amplitude: Option<[f64; 2]>,
        #[serde(default)]
        phase: Option<[f64; 2]>,
        #[serde(default)]
        omega: Option<f64>,
        #[serde(default)]
        reference_decay: Option<f64>,
        #[serde(default)]
        delay: Option<f64>,
    },
}

impl PlantConfig {
    /// Default configuration for a plant name, if the name is known.
    pub fn by_name(name: &str) -> Option<Self> {
        match name {
            "integrator" => Some(Self::Integrator { delay: None }),
            "scalar_linear" => Some(Self::ScalarLinear {
                a: None,
                gain: None,
                delay: None,
            }),
            "pendulum" => Some(Self::Pendulum {
                omega2: None,
                damping: None,
                kp: None,
                kd: None,
                delay: None,
            }),
            "two_link" => Some(Self::TwoLink {
                masses: None,
                lengths: None,
                gravity: None,
                kp: None,
                kd: None,
                q0: None,
                amplitude: None,
                phase: None,
                omega: None,
                reference_decay: None,
                delay: None,
            }),
            _ => None,
        }
    }

    pub fn build(&self) -> PlantHandle {
        match self {
            Self::Integrator { delay } => {
                let d = Integrator::default();
                Arc::new(Integrator::new(delay.unwrap_or(d.spec.delay)))
            }
            Self::ScalarLinear { a, gain, delay } => {
                let d = ScalarLinear::default();
                Arc::new(ScalarLinear::new(
                    a.unwrap_or(d.a),
                    gain.unwrap_or(d.gain),
                    delay.unwrap_or(d.spec.delay),
                ))
            }
            Self::Pendulum {
                omega2,
                damping,
                kp,
                kd,
                delay,
            } => {
                let d = Pendulum::default();
                Arc::new(Pendulum::new(
                    omega2.unwrap_or(d.omega2),
                    damping.unwrap_or(d.damping),
                    kp.unwrap_or(d.kp),
                    kd.unwrap_or(d.kd),
                    delay.unwrap_or(d.spec.delay),
                ))
            }
            Self::TwoLink {
                masses,
                lengths,
                gravity,
                kp,
                kd,
                q0,
                amplitude,
                phase,
                omega,
                reference_decay,
                delay,
            } => {
                let mut p = TwoLink::default();
                if let Some([m1, m2]) = masses {
                    p.m1 = *m1;
                    p.m2 = *m2;
                }
                if let Some([l1, l2]) = lengths {
                    p.l1 = *l1;
                    p.l2 = *l2;
                }
                if let Some(g) = gravity {
                    p.gravity = *g;
                }
                if let Some(v) = kp {
                    p.kp = *v;
                }
                if let Some(v) = kd {
                    p.kd = *v;
                }
                if let Some(v) = q0 {
                    p.q0 = *v;
                }
                if let Some(v) = amplitude {
                    p.amp = *v;
                }
                if let Some(v) = phase {
                    p.phase = *v;
                }
                if let Some(v) = omega {
                    p.omega = *v;
                }
                if let Some(v) = reference_decay {
                    p.decay = *v;
                }
                if let Some(v) = delay {
                    p.spec.delay = *v;
                }
                Arc::new(p)
            }
        }
    }
}
