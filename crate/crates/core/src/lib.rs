//! Revenue-maximizing QoS-differentiated posted pricing for a fixed fleet of
//! homogeneous servers.
//!
//! The crate is layered bottom-up:
//!
//! - [`queueing`]: closed-form laws mapping a waiting-time guarantee to the
//!   largest admissible per-server arrival rate, and an arrival rate to the
//!   resulting server utilization (exponential and Pareto runtimes).
//! - [`market`]: users, utility curves, the SLA menu and surplus-maximizing
//!   SLA choice.
//! - [`planner`]: optimal admission control and server assignment for given
//!   prices, via the virtual-queue greedy.
//! - [`pricing`]: exhaustive search over offered-SLA subsets and user
//!   breakpoints with closed-form breakpoint prices.
//! - [`sim`]: a discrete-event simulator used to check the analytical laws.
//! - [`experiments`]: scenario files, the experiment battery and CSV output.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod experiments;
pub mod market;
pub mod planner;
pub mod pricing;
pub mod queueing;
pub mod sim;

pub use error::{Error, Result};
pub use market::{Choice, SlaMenu, User, UserPopulation, UtilityShape};
pub use planner::{CapacityPlan, VirtualQueue, VirtualQueueKind};
pub use pricing::{Breakpoints, OptimizerConfig, PricingSolution};
pub use queueing::{ExponentialQueueSpec, ParetoQueueSpec, QueueLaw, QueueModel};
