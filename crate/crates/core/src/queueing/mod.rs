//! Closed-form single-server queueing laws.
//!
//! Each model provides the two monotone maps used by the planner:
//! `lambda_max` (Q₁: waiting-time bound → largest admissible per-server
//! arrival rate) and `utilization` (Q₂: per-server arrival rate → expected
//! utilization).

mod exponential;
mod pareto;
pub mod roots;
pub mod special;

use serde::{Deserialize, Serialize};

use crate::error::Result;

pub use exponential::{exp_lambda_max, exp_miss_fraction, exp_utilization, ExponentialQueueSpec, UNIT_LOAD_BAND};
pub use pareto::{pareto_expected_wait, pareto_lambda_max, pareto_utilization, ParetoQueueSpec};
pub use special::upper_incomplete_gamma;

/// A service law that maps QoS bounds to admissible rates and rates to
/// utilizations. Both maps are increasing.
pub trait QueueLaw {
    /// Q₁(φ).
    fn lambda_max(&self, phi: f64) -> Result<f64>;
    /// Q₂(λ); `utilization(0) == 0`.
    fn utilization(&self, lambda: f64) -> Result<f64>;
    /// Per-server arrival rate at which the queue stops being stable.
    fn stability_bound(&self) -> f64;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum QueueModel {
    Exponential(ExponentialQueueSpec),
    Pareto(ParetoQueueSpec),
}

impl QueueModel {
    pub fn name(&self) -> &'static str {
        match self {
            QueueModel::Exponential(_) => "exponential",
            QueueModel::Pareto(_) => "pareto",
        }
    }

    pub fn mean_runtime(&self) -> f64 {
        match self {
            QueueModel::Exponential(s) => s.mean_runtime(),
            QueueModel::Pareto(s) => s.mean_runtime(),
        }
    }

    /// λ_max for every wait in `waits`.
    pub fn caps(&self, waits: &[f64]) -> Result<Vec<f64>> {
        waits.iter().map(|&phi| self.lambda_max(phi)).collect()
    }
}

impl Default for QueueModel {
    fn default() -> Self {
        QueueModel::Exponential(ExponentialQueueSpec::default())
    }
}

impl From<ExponentialQueueSpec> for QueueModel {
    fn from(spec: ExponentialQueueSpec) -> Self {
        QueueModel::Exponential(spec)
    }
}

impl From<ParetoQueueSpec> for QueueModel {
    fn from(spec: ParetoQueueSpec) -> Self {
        QueueModel::Pareto(spec)
    }
}

impl QueueLaw for QueueModel {
    fn lambda_max(&self, phi: f64) -> Result<f64> {
        match self {
            QueueModel::Exponential(s) => s.lambda_max(phi),
            QueueModel::Pareto(s) => s.lambda_max(phi),
        }
    }

    fn utilization(&self, lambda: f64) -> Result<f64> {
        match self {
            QueueModel::Exponential(s) => s.utilization(lambda),
            QueueModel::Pareto(s) => QueueLaw::utilization(s, lambda),
        }
    }

    fn stability_bound(&self) -> f64 {
        match self {
            QueueModel::Exponential(s) => s.stability_bound(),
            QueueModel::Pareto(s) => QueueLaw::stability_bound(s),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn exponential_laws_increase(phi in 0.0f64..20.0, dphi in 0.01f64..5.0, l in 0.0f64..5.0, dl in 0.01f64..5.0) {
            let m = QueueModel::default();
            prop_assert!(m.lambda_max(phi + dphi).unwrap() > m.lambda_max(phi).unwrap());
            prop_assert!(m.utilization(l + dl).unwrap() > m.utilization(l).unwrap());
        }

        #[test]
        fn pareto_laws_increase(phi in 0.01f64..3.0, dphi in 0.01f64..1.0, f in 0.001f64..0.9, df in 0.001f64..0.09) {
            let m = QueueModel::Pareto(ParetoQueueSpec::default());
            let bound = m.stability_bound();
            prop_assert!(m.lambda_max(phi + dphi).unwrap() > m.lambda_max(phi).unwrap());
            prop_assert!(m.utilization((f + df) * bound).unwrap() > m.utilization(f * bound).unwrap());
        }
    }
}
