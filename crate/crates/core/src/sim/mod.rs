//! Discrete-event simulation of server pools fed by uniform random dispatch.
//!
//! Arrivals form one Poisson stream per pool and each job is sent to a server
//! chosen uniformly at random. Servers run FCFS, so each server's state is
//! the time at which its queue drains and a job's wait follows from the
//! Lindley recursion.

pub mod stats;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Pareto};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market::SlaMenu;
use crate::planner::CapacityPlan;
use crate::queueing::{QueueLaw, QueueModel};
use stats::batch_mean_interval;

pub const DEFAULT_WARMUP: f64 = 0.1;
pub const DEFAULT_BATCHES: usize = 20;

const ARRIVAL_STREAM: u64 = 0;
const DISPATCH_STREAM: u64 = 1;
const FIRST_SERVICE_STREAM: u64 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Horizon {
    /// Jobs measured after warmup.
    Jobs(u64),
    /// Simulated time, warmup included.
    Time(f64),
}

/// What a server does with a job whose wait would exceed the bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LatePolicy {
    /// The job leaves without service and counts as a miss.
    Drop,
    /// The job waits, is served and counts as a miss.
    ServeLate,
}

impl LatePolicy {
    /// Drop for deadline-percentile guarantees, serve late for
    /// expected-wait guarantees.
    pub fn for_model(model: &QueueModel) -> Self {
        match model {
            QueueModel::Exponential(_) => LatePolicy::Drop,
            QueueModel::Pareto(_) => LatePolicy::ServeLate,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub arrival_rate: f64,
    pub servers: usize,
    pub service: QueueModel,
    pub horizon: Horizon,
    pub seed: u64,
    pub warmup: f64,
    pub late_policy: LatePolicy,
    pub batches: usize,
    /// Reject per-server loads at or beyond the stability bound.
    pub require_stable: bool,
}

impl SimConfig {
    pub fn new(arrival_rate: f64, servers: usize, service: QueueModel, horizon: Horizon, seed: u64) -> Self {
        Self {
            arrival_rate,
            servers,
            service,
            horizon,
            seed,
            warmup: DEFAULT_WARMUP,
            late_policy: LatePolicy::for_model(&service),
            batches: DEFAULT_BATCHES,
            require_stable: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.servers == 0 {
            return Err(Error::Config("pool needs at least one server".into()));
        }
        if !(self.arrival_rate >= 0.0) || !self.arrival_rate.is_finite() {
            return Err(Error::Config(format!("arrival rate {} is invalid", self.arrival_rate)));
        }
        match self.horizon {
            Horizon::Jobs(0) => return Err(Error::Config("job horizon must be positive".into())),
            Horizon::Time(t) if !(t > 0.0) || !t.is_finite() => {
                return Err(Error::Config(format!("time horizon {t} must be positive")))
            }
            _ => {}
        }
        if !(0.0..=0.5).contains(&self.warmup) {
            return Err(Error::Config(format!("warmup {} must lie in [0, 0.5]", self.warmup)));
        }
        if self.batches < 2 {
            return Err(Error::Config("at least two batches are needed".into()));
        }
        let per_server = self.arrival_rate / self.servers as f64;
        let bound = self.service.stability_bound();
        if self.require_stable && per_server >= bound {
            return Err(Error::Unstable {
                rate: per_server,
                bound,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ServerStats {
    pub jobs: u64,
    pub served: u64,
    pub dropped: u64,
    pub misses: u64,
    pub mean_wait: f64,
    pub utilization: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SimStats {
    pub phi: f64,
    pub jobs: u64,
    pub served: u64,
    pub dropped: u64,
    pub utilization: f64,
    pub utilization_half_width: f64,
    /// Mean queueing delay of served jobs.
    pub mean_wait: f64,
    pub mean_wait_half_width: f64,
    pub miss_fraction: f64,
    pub miss_half_width: f64,
    /// Length of the measurement window.
    pub window: f64,
    pub servers: Vec<ServerStats>,
}

impl SimStats {
    fn idle(phi: f64, servers: usize) -> Self {
        Self {
            phi,
            servers: vec![ServerStats::default(); servers],
            ..Default::default()
        }
    }
}

enum Service {
    Exp(Exp<f64>),
    Pareto(Pareto<f64>),
}

impl Service {
    fn new(model: &QueueModel) -> Result<Self> {
        let bad = |e: String| Error::Config(format!("service law: {e}"));
        Ok(match model {
            QueueModel::Exponential(s) => Service::Exp(Exp::new(s.mu()).map_err(|e| bad(e.to_string()))?),
            QueueModel::Pareto(s) => {
                Service::Pareto(Pareto::new(s.min_runtime(), s.shape_alpha()).map_err(|e| bad(e.to_string()))?)
            }
        })
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> f64 {
        match self {
            Service::Exp(d) => d.sample(rng),
            Service::Pareto(d) => d.sample(rng),
        }
    }
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Seed for an independent replication or unit derived from a base seed.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

struct Arrivals {
    times: Vec<f64>,
    servers: Vec<u32>,
    /// Index of the first measured job.
    first_measured: usize,
    window_start: f64,
    window_end: f64,
}

fn generate_arrivals(cfg: &SimConfig) -> Result<Arrivals> {
    let mut rng = stream(cfg.seed, ARRIVAL_STREAM);
    let mut pick = stream(cfg.seed, DISPATCH_STREAM);
    let gap = Exp::new(cfg.arrival_rate).map_err(|e| Error::Config(e.to_string()))?;
    let mut times = Vec::new();
    let mut servers = Vec::new();
    let mut push = |t: f64, times: &mut Vec<f64>| {
        times.push(t);
        servers.push(pick.random_range(0..cfg.servers as u32));
    };
    let (first_measured, window_start, window_end);
    match cfg.horizon {
        Horizon::Jobs(n) => {
            let total = (n as f64 / (1.0 - cfg.warmup)).ceil() as usize;
            times.reserve(total);
            let mut t = 0.0;
            for _ in 0..total {
                t += gap.sample(&mut rng);
                push(t, &mut times);
            }
            first_measured = total - n as usize;
            window_start = if first_measured == 0 { 0.0 } else { times[first_measured] };
            window_end = t;
        }
        Horizon::Time(end) => {
            let mut t = gap.sample(&mut rng);
            while t <= end {
                push(t, &mut times);
                t += gap.sample(&mut rng);
            }
            window_start = cfg.warmup * end;
            window_end = end;
            first_measured = times.partition_point(|&a| a < window_start);
        }
    }
    Ok(Arrivals {
        times,
        servers,
        first_measured,
        window_start,
        window_end,
    })
}

/// Spreads the busy interval `[start, end)` over equal time bins of the
/// measurement window and returns the overlap with the whole window.
fn add_busy(bins: &mut [f64], window: (f64, f64), start: f64, end: f64) -> f64 {
    let (lo, hi) = window;
    let (s, e) = (start.max(lo), end.min(hi));
    if e <= s {
        return 0.0;
    }
    let n = bins.len();
    let width = (hi - lo) / n as f64;
    let first = (((s - lo) / width) as usize).min(n - 1);
    let last = (((e - lo) / width) as usize).min(n - 1);
    for (b, slot) in bins.iter_mut().enumerate().take(last + 1).skip(first) {
        let bl = lo + b as f64 * width;
        let bh = if b + 1 == n { hi } else { bl + width };
        *slot += (e.min(bh) - s.max(bl)).max(0.0);
    }
    e - s
}

/// Simulates one pool and accounts misses against the wait bound `phi`.
pub fn simulate_pool(cfg: &SimConfig, phi: f64) -> Result<SimStats> {
    cfg.validate()?;
    if !(phi >= 0.0) {
        return Err(Error::domain("phi", phi, "phi >= 0"));
    }
    if cfg.arrival_rate == 0.0 {
        return Ok(SimStats::idle(phi, cfg.servers));
    }
    let arrivals = generate_arrivals(cfg)?;
    let measured = arrivals.times.len() - arrivals.first_measured;
    if measured == 0 {
        return Ok(SimStats::idle(phi, cfg.servers));
    }

    let service = Service::new(&cfg.service)?;
    let mut rngs: Vec<ChaCha8Rng> = (0..cfg.servers as u64)
        .map(|j| stream(cfg.seed, FIRST_SERVICE_STREAM + j))
        .collect();
    let mut free_at = vec![0.0f64; cfg.servers];
    let mut per_server = vec![ServerStats::default(); cfg.servers];
    let mut wait_sum = vec![0.0f64; cfg.servers];
    let mut busy = vec![0.0f64; cfg.servers];
    let window = (arrivals.window_start, arrivals.window_end);
    let mut util_bins = vec![0.0f64; cfg.batches];

    let batch_len = measured.div_ceil(cfg.batches);
    let batches = measured.div_ceil(batch_len);
    let mut batch_jobs = vec![0u64; batches];
    let mut batch_misses = vec![0u64; batches];
    let mut batch_wait = vec![0.0f64; batches];
    let mut batch_served = vec![0u64; batches];

    for (k, (&a, &srv)) in arrivals.times.iter().zip(&arrivals.servers).enumerate() {
        let j = srv as usize;
        let wait = (free_at[j] - a).max(0.0);
        let late = wait > phi;
        let serve = !(late && cfg.late_policy == LatePolicy::Drop);
        if serve {
            let start = a + wait;
            let end = start + service.draw(&mut rngs[j]);
            free_at[j] = end;
            busy[j] += add_busy(&mut util_bins, window, start, end);
        }
        if k < arrivals.first_measured {
            continue;
        }
        let b = (k - arrivals.first_measured) / batch_len;
        let st = &mut per_server[j];
        st.jobs += 1;
        batch_jobs[b] += 1;
        if late {
            st.misses += 1;
            batch_misses[b] += 1;
        }
        if serve {
            st.served += 1;
            wait_sum[j] += wait;
            batch_served[b] += 1;
            batch_wait[b] += wait;
        } else {
            st.dropped += 1;
        }
    }

    let span = window.1 - window.0;
    for (j, st) in per_server.iter_mut().enumerate() {
        st.mean_wait = if st.served > 0 { wait_sum[j] / st.served as f64 } else { 0.0 };
        st.utilization = if span > 0.0 { (busy[j] / span).clamp(0.0, 1.0) } else { 0.0 };
    }

    let miss_batches: Vec<f64> = batch_misses
        .iter()
        .zip(&batch_jobs)
        .filter(|(_, &n)| n > 0)
        .map(|(&m, &n)| m as f64 / n as f64)
        .collect();
    let wait_batches: Vec<f64> = batch_wait
        .iter()
        .zip(&batch_served)
        .filter(|(_, &n)| n > 0)
        .map(|(&w, &n)| w / n as f64)
        .collect();
    let bin_span = span / cfg.batches as f64;
    let util_batches: Vec<f64> = if bin_span > 0.0 {
        util_bins
            .iter()
            .map(|b| b / (bin_span * cfg.servers as f64))
            .collect()
    } else {
        vec![0.0; cfg.batches]
    };
    let (_, miss_hw) = batch_mean_interval(&miss_batches);
    let (_, wait_hw) = batch_mean_interval(&wait_batches);
    let (_, util_hw) = batch_mean_interval(&util_batches);

    let jobs: u64 = per_server.iter().map(|s| s.jobs).sum();
    let served: u64 = per_server.iter().map(|s| s.served).sum();
    let misses: u64 = per_server.iter().map(|s| s.misses).sum();
    Ok(SimStats {
        phi,
        jobs,
        served,
        dropped: jobs - served,
        utilization: per_server.iter().map(|s| s.utilization).sum::<f64>() / cfg.servers as f64,
        utilization_half_width: util_hw,
        mean_wait: if served > 0 { wait_sum.iter().sum::<f64>() / served as f64 } else { 0.0 },
        mean_wait_half_width: wait_hw,
        miss_fraction: misses as f64 / jobs as f64,
        miss_half_width: miss_hw,
        window: span,
        servers: per_server,
    })
}

/// Measured arrival times routed to one server of the pool.
pub fn dispatched_arrivals(cfg: &SimConfig, server: usize) -> Result<Vec<f64>> {
    cfg.validate()?;
    if server >= cfg.servers {
        return Err(Error::Config(format!("server {server} outside a pool of {}", cfg.servers)));
    }
    if cfg.arrival_rate == 0.0 {
        return Ok(Vec::new());
    }
    let arrivals = generate_arrivals(cfg)?;
    Ok(arrivals.times[arrivals.first_measured..]
        .iter()
        .zip(&arrivals.servers[arrivals.first_measured..])
        .filter(|(_, &s)| s as usize == server)
        .map(|(&t, _)| t)
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnitSimulation {
    /// Position in the plan's SLA order.
    pub sla_index: usize,
    pub servers: u64,
    pub accepted_rate: f64,
    pub wait: f64,
    pub price: f64,
    pub stats: SimStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanSimulation {
    pub units: Vec<UnitSimulation>,
    /// Σ busy time × price per unit of measured time.
    pub realized_revenue: f64,
    pub analytic_revenue: f64,
}

/// Simulates every processing unit of a plan independently.
pub fn simulate_plan(
    plan: &CapacityPlan,
    menu: &SlaMenu,
    model: &QueueModel,
    horizon: Horizon,
    seed: u64,
    late_policy: LatePolicy,
) -> Result<PlanSimulation> {
    let prices = menu
        .prices()
        .ok_or_else(|| Error::InvalidMenu("menu has no prices".into()))?;
    if prices.len() != plan.servers.len() {
        return Err(Error::InvalidMenu(format!(
            "plan has {} SLAs but the menu has {}",
            plan.servers.len(),
            prices.len()
        )));
    }
    let units = (0..plan.servers.len())
        .into_par_iter()
        .map(|l| {
            let servers = plan.servers[l];
            let rate = plan.accepted_rates[l];
            let wait = menu.waits()[l];
            let stats = if servers == 0 || rate == 0.0 {
                SimStats::idle(wait, servers as usize)
            } else {
                let mut cfg = SimConfig::new(rate, servers as usize, *model, horizon, derive_seed(seed, l as u64));
                cfg.late_policy = late_policy;
                simulate_pool(&cfg, wait)?
            };
            Ok(UnitSimulation {
                sla_index: l,
                servers,
                accepted_rate: rate,
                wait,
                price: prices[l],
                stats,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let realized_revenue = units
        .iter()
        .map(|u| u.servers as f64 * u.stats.utilization * u.price)
        .sum();
    Ok(PlanSimulation {
        units,
        realized_revenue,
        analytic_revenue: plan.total_unit_revenue,
    })
}
