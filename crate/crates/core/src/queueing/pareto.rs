//! Pareto runtimes with an expected-wait guarantee.

use serde::{Deserialize, Serialize};

use super::roots::bisect_increasing;
use super::special::upper_incomplete_gamma;
use super::QueueLaw;
use crate::error::{Error, Result};

const ROOT_REL_TOL: f64 = 1e-10;
/// Lowest per-server rate probed, relative to the stability bound. Below it
/// the wait expression loses its significant digits to cancellation.
const LOWEST_RATE_FRACTION: f64 = 1e-9;
/// Highest per-server rate probed, relative to the stability bound.
const HIGHEST_RATE_FRACTION: f64 = 1.0 - 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParetoQueueSpec {
    shape_alpha: f64,
    min_runtime: f64,
}

impl ParetoQueueSpec {
    pub fn new(shape_alpha: f64, min_runtime: f64) -> Result<Self> {
        if !(shape_alpha > 1.0) || !shape_alpha.is_finite() {
            return Err(Error::domain("shape_alpha", shape_alpha, "shape_alpha > 1"));
        }
        if !(min_runtime > 0.0) || !min_runtime.is_finite() {
            return Err(Error::domain("min_runtime", min_runtime, "min_runtime > 0"));
        }
        Ok(Self {
            shape_alpha,
            min_runtime,
        })
    }

    pub fn shape_alpha(&self) -> f64 {
        self.shape_alpha
    }

    pub fn min_runtime(&self) -> f64 {
        self.min_runtime
    }

    pub fn mean_runtime(&self) -> f64 {
        self.shape_alpha * self.min_runtime / (self.shape_alpha - 1.0)
    }

    /// Upper end (α−1)/(α τ̲) of the stable arrival-rate region.
    pub fn stability_bound(&self) -> f64 {
        1.0 / self.mean_runtime()
    }

    fn check_rate(&self, lambda: f64) -> Result<()> {
        if !(lambda > 0.0 && lambda < self.stability_bound()) {
            return Err(Error::domain(
                "lambda",
                lambda,
                "0 < lambda < (alpha - 1)/(alpha * min_runtime)",
            ));
        }
        Ok(())
    }

    /// Smallest and largest expected wait the inversion can resolve.
    pub fn attainable_waits(&self) -> Result<(f64, f64)> {
        let bound = self.stability_bound();
        let min = pareto_expected_wait(bound * LOWEST_RATE_FRACTION, self)?;
        let max = pareto_expected_wait(bound * HIGHEST_RATE_FRACTION, self)?;
        Ok((min, max))
    }
}

impl Default for ParetoQueueSpec {
    fn default() -> Self {
        Self {
            shape_alpha: 1.4,
            min_runtime: 1.0 / 6.0,
        }
    }
}

impl QueueLaw for ParetoQueueSpec {
    fn lambda_max(&self, phi: f64) -> Result<f64> {
        pareto_lambda_max(phi, self)
    }

    fn utilization(&self, lambda: f64) -> Result<f64> {
        if lambda == 0.0 {
            return Ok(0.0);
        }
        pareto_utilization(lambda, self)
    }

    fn stability_bound(&self) -> f64 {
        ParetoQueueSpec::stability_bound(self)
    }
}

/// φ = (1/λ)·ln( α (λτ̲)^α Γ(−α, λτ̲) / (1 − α τ̲ λ/(α−1)) ).
pub fn pareto_expected_wait(lambda: f64, spec: &ParetoQueueSpec) -> Result<f64> {
    spec.check_rate(lambda)?;
    let a = spec.shape_alpha;
    let z = lambda * spec.min_runtime;
    let transform = a * z.powf(a) * upper_incomplete_gamma(-a, z)?;
    let slack = 1.0 - lambda * spec.mean_runtime();
    Ok((transform / slack).ln() / lambda)
}

/// ρ = 1 / (1 + α (λτ̲)^α Γ(−α−1, λτ̲)).
pub fn pareto_utilization(lambda: f64, spec: &ParetoQueueSpec) -> Result<f64> {
    spec.check_rate(lambda)?;
    let a = spec.shape_alpha;
    let z = lambda * spec.min_runtime;
    Ok(1.0 / (1.0 + a * z.powf(a) * upper_incomplete_gamma(-a - 1.0, z)?))
}

/// Inverts [`pareto_expected_wait`] by bisection over the stable region.
pub fn pareto_lambda_max(phi: f64, spec: &ParetoQueueSpec) -> Result<f64> {
    if !(phi > 0.0) || !phi.is_finite() {
        return Err(Error::domain("phi", phi, "phi > 0"));
    }
    let bound = spec.stability_bound();
    let lo = bound * LOWEST_RATE_FRACTION;
    let hi = bound * HIGHEST_RATE_FRACTION;
    let wait = |l: f64| pareto_expected_wait(l, spec);
    let (min, max) = (wait(lo)?, wait(hi)?);
    if !(min..=max).contains(&phi) {
        return Err(Error::InfeasibleWait { phi, min, max });
    }
    bisect_increasing(wait, phi, lo, hi, ROOT_REL_TOL)
}
