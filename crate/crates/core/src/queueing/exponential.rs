//! Exponential runtimes with a percentile deadline: a fraction `miss_target`
//! of jobs may wait longer than the SLA bound φ.

use serde::{Deserialize, Serialize};

use super::roots::{bisect_increasing, grow_upper};
use super::QueueLaw;
use crate::error::{Error, Result};

/// Half-width of the band around ρ = 1 where the removable singularity of
/// p₀ is replaced by its limit.
pub const UNIT_LOAD_BAND: f64 = 1e-6;

const ROOT_REL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExponentialQueueSpec {
    mu: f64,
    miss_target: f64,
}

impl ExponentialQueueSpec {
    pub fn new(mu: f64, miss_target: f64) -> Result<Self> {
        if !(mu > 0.0) || !mu.is_finite() {
            return Err(Error::domain("mu", mu, "mu > 0"));
        }
        if !(miss_target > 0.0 && miss_target < 1.0) {
            return Err(Error::domain("miss_target", miss_target, "0 < miss_target < 1"));
        }
        Ok(Self { mu, miss_target })
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn miss_target(&self) -> f64 {
        self.miss_target
    }

    /// ω with μ·ω = 1.
    pub fn mean_runtime(&self) -> f64 {
        1.0 / self.mu
    }
}

impl Default for ExponentialQueueSpec {
    fn default() -> Self {
        Self {
            mu: 1.0,
            miss_target: 0.05,
        }
    }
}

impl QueueLaw for ExponentialQueueSpec {
    fn lambda_max(&self, phi: f64) -> Result<f64> {
        exp_lambda_max(self, phi)
    }

    fn utilization(&self, lambda: f64) -> Result<f64> {
        exp_utilization(lambda, self.mu)
    }

    fn stability_bound(&self) -> f64 {
        self.mu
    }
}

/// Fraction of jobs whose wait would exceed `phi` in a single-server queue
/// with deterministic patience `phi`:
///
/// ```text
/// α_d = p₀ ρ e^{(ρ−1)μφ},   1/p₀ = 1 + ρ + ρ² (e^{(ρ−1)μφ} − 1)/(ρ − 1)
/// ```
///
/// Inside [`UNIT_LOAD_BAND`] around ρ = 1 the limit α_d = 1/(2 + μφ) is used.
pub fn exp_miss_fraction(rho: f64, mu: f64, phi: f64) -> Result<f64> {
    if !(rho > 0.0) || !rho.is_finite() {
        return Err(Error::domain("rho", rho, "rho > 0"));
    }
    if !(mu > 0.0) || !mu.is_finite() {
        return Err(Error::domain("mu", mu, "mu > 0"));
    }
    if !(phi >= 0.0) || !phi.is_finite() {
        return Err(Error::domain("phi", phi, "phi >= 0"));
    }
    let t = mu * phi;
    if (rho - 1.0).abs() < UNIT_LOAD_BAND {
        return Ok(1.0 / (2.0 + t));
    }
    let x = (rho - 1.0) * t;
    if x <= 0.0 {
        let growth = x.exp_m1() / (rho - 1.0);
        let inv_p0 = 1.0 + rho + rho * rho * growth;
        Ok(rho * x.exp() / inv_p0)
    } else {
        // Divide through by e^x so heavy loads do not overflow.
        let damped_growth = -(-x).exp_m1() / (rho - 1.0);
        let denom = (1.0 + rho) * (-x).exp() + rho * rho * damped_growth;
        Ok(rho / denom)
    }
}

/// Per-server rate λ_max = ρ_max·μ where ρ_max solves α_d(ρ) = miss_target.
pub fn exp_lambda_max(spec: &ExponentialQueueSpec, phi: f64) -> Result<f64> {
    if !(phi >= 0.0) || !phi.is_finite() {
        return Err(Error::domain("phi", phi, "phi >= 0"));
    }
    let target = spec.miss_target;
    let miss = |rho: f64| exp_miss_fraction(rho, spec.mu, phi);
    let lo = 1e-12;
    let hi = grow_upper(miss, target, 1.0, 1100)?;
    let rho_max = bisect_increasing(miss, target, lo, hi, ROOT_REL_TOL)?;
    Ok(rho_max * spec.mu)
}

/// ρ = λ/μ.
pub fn exp_utilization(lambda: f64, mu: f64) -> Result<f64> {
    if !(mu > 0.0) || !mu.is_finite() {
        return Err(Error::domain("mu", mu, "mu > 0"));
    }
    if !(lambda >= 0.0) {
        return Err(Error::domain("lambda", lambda, "lambda >= 0"));
    }
    Ok(lambda / mu)
}
