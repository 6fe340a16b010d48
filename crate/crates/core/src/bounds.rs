//! Error-bound calculus.
//!
//! Packages the explicit constants tying operator approximation error to
//! closed-loop prediction error:
//!
//! - `C_P = max(1, D*C_f) * e^{D*C_f}` — Lipschitz constant of the predictor
//!   operator in `(x, U)`,
//! - `C_Z = e^{h*C_f*(1+C_kappa)}` — Lipschitz constant of the inter-sample
//!   closed-loop flow in its initial condition,
//! - `delta_case1(eps) = eps` — effective prediction error when the whole
//!   sampling-horizon operator is approximated (uniform sampling),
//! - `delta_case2(eps) = eps * C_Z` — effective prediction error when only
//!   the predictor is approximated and the flow is integrated between
//!   samples (bounded, possibly non-uniform sampling).
//!
//! Every simulation report embeds the active [`BoundSet`] for auditability.

use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq)]
pub enum BoundsError {
    NonPositive { field: &'static str, value: f64 },
}

impl fmt::Display for BoundsError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::NonPositive { field, value } => {
                write!(f, "{field} must be positive, got {value}")
            }
        }
    }
}

impl std::error::Error for BoundsError {}

/// Derived constants for a plant/horizon configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundSet {
    pub c_f: f64,
    pub c_kappa: f64,
    /// Input delay `D`.
    pub delay: f64,
    /// Maximum inter-sample horizon `h`.
    pub horizon: f64,
    pub c_p: f64,
    pub c_z: f64,
}

/// Build a [`BoundSet`] from Lipschitz data and horizons.
pub fn build_bounds(c_f: f64, c_kappa: f64, delay: f64, horizon: f64) -> Result<BoundSet, BoundsError> {
    for (field, value) in [
        ("C_f", c_f),
        ("C_kappa", c_kappa),
        ("delay", delay),
        ("horizon", horizon),
    ] {
        if !(value > 0.0) || !value.is_finite() {
            return Err(BoundsError::NonPositive { field, value });
        }
    }
    let c_p = (delay * c_f).max(1.0) * (delay * c_f).exp();
    let c_z = (horizon * c_f * (1.0 + c_kappa)).exp();
    Ok(BoundSet {
        c_f,
        c_kappa,
        delay,
        horizon,
        c_p,
        c_z,
    })
}

impl BoundSet {
    /// Effective prediction error under the sampling-horizon operator
    /// approximation (uniform sampling).
    pub fn delta_case1(&self, eps: f64) -> f64 {
        eps
    }

    /// Effective prediction error under the predictor-only approximation with
    /// integrated flow between samples (bounded sampling).
    pub fn delta_case2(&self, eps: f64) -> f64 {
        eps * self.c_z
    }

    /// Inverse of `delta_case1`.
    pub fn delta_case1_inv(&self, r: f64) -> f64 {
        r
    }

    /// Inverse of `delta_case2`.
    pub fn delta_case2_inv(&self, r: f64) -> f64 {
        r / self.c_z
    }

    /// Guaranteed sup-gap over one inter-sample interval between the exact
    /// flow and the flow started from an endpoint perturbed by `eps`.
    pub fn corollary_bound(&self, eps: f64) -> f64 {
        assert!(eps >= 0.0, "eps must be non-negative");
        eps * self.c_z
    }

    /// The derived fields are pure functions of the inputs; checked here and
    /// asserted after deserialization.
    pub fn is_consistent(&self) -> bool {
        let c_p = (self.delay * self.c_f).max(1.0) * (self.delay * self.c_f).exp();
        let c_z = (self.horizon * self.c_f * (1.0 + self.c_kappa)).exp();
        (self.c_p - c_p).abs() <= 1e-12 * c_p && (self.c_z - c_z).abs() <= 1e-12 * c_z
    }
}
