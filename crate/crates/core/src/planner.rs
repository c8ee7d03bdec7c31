//! Admission control and server allocation for a priced SLA menu.
//!
//! Each SLA's offered traffic is cut into a queue that fills whole servers at
//! the admissible rate and a remainder queue that occupies at most one more
//! server. Queues are admitted greedily by revenue per server.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market::SlaMenu;
use crate::queueing::{QueueLaw, QueueModel};

/// Relative slack applied before rounding rate/cap quotients.
pub const ROUNDING_GUARD: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum VirtualQueueKind {
    FullServers,
    Remainder,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VirtualQueue {
    pub sla_index: usize,
    pub kind: VirtualQueueKind,
    pub rate: f64,
    /// Servers the queue occupies when admitted in full.
    pub servers: u64,
    /// Revenue per server per unit time.
    pub unit_revenue: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapacityPlan {
    pub accepted_rates: Vec<f64>,
    pub servers: Vec<u64>,
    pub per_server_rates: Vec<f64>,
    pub utilizations: Vec<f64>,
    pub total_unit_revenue: f64,
    /// Admitted slices of the virtual queues, in admission order.
    pub admitted: Vec<VirtualQueue>,
}

impl CapacityPlan {
    pub fn empty(slas: usize) -> Self {
        Self {
            accepted_rates: vec![0.0; slas],
            servers: vec![0; slas],
            per_server_rates: vec![0.0; slas],
            utilizations: vec![0.0; slas],
            total_unit_revenue: 0.0,
            admitted: Vec::new(),
        }
    }

    pub fn servers_used(&self) -> u64 {
        self.servers.iter().sum()
    }
}

fn check_cap(cap: f64) -> Result<()> {
    if !(cap > 0.0) || !cap.is_finite() {
        return Err(Error::domain("lambda_max", cap, "lambda_max > 0"));
    }
    Ok(())
}

fn check_rate(rate: f64) -> Result<()> {
    if !(rate >= 0.0) || !rate.is_finite() {
        return Err(Error::domain("rate", rate, "rate >= 0"));
    }
    Ok(())
}

/// ⌈rate / cap⌉, with 0 servers for 0 traffic.
pub fn min_servers(rate: f64, cap: f64) -> Result<u64> {
    check_cap(cap)?;
    check_rate(rate)?;
    let q = rate / cap;
    Ok((q - ROUNDING_GUARD * q).ceil().max(0.0) as u64)
}

fn whole_servers(rate: f64, cap: f64) -> u64 {
    let q = rate / cap;
    (q + ROUNDING_GUARD * q).floor() as u64
}

/// The 2L virtual queues, full-server queue first for each SLA.
pub fn split_virtual_queues(
    rates: &[f64],
    caps: &[f64],
    prices: &[f64],
    model: &QueueModel,
) -> Result<Vec<VirtualQueue>> {
    if rates.len() != caps.len() || rates.len() != prices.len() {
        return Err(Error::InvalidMenu(format!(
            "{} rates, {} caps and {} prices",
            rates.len(),
            caps.len(),
            prices.len()
        )));
    }
    let mut queues = Vec::with_capacity(2 * rates.len());
    for (l, ((&rate, &cap), &price)) in rates.iter().zip(caps).zip(prices).enumerate() {
        check_cap(cap)?;
        check_rate(rate)?;
        let n = whole_servers(rate, cap);
        let mut full_rate = (n as f64 * cap).min(rate);
        let mut rest = rate - full_rate;
        if rest <= ROUNDING_GUARD * rate {
            full_rate = rate;
            rest = 0.0;
        }
        let full_value = model.utilization(cap)? * price;
        queues.push(VirtualQueue {
            sla_index: l,
            kind: VirtualQueueKind::FullServers,
            rate: full_rate,
            servers: n,
            unit_revenue: full_value,
        });
        let rest_value = if rest > 0.0 {
            model.utilization(rest)? * price
        } else {
            0.0
        };
        queues.push(VirtualQueue {
            sla_index: l,
            kind: VirtualQueueKind::Remainder,
            rate: rest,
            servers: u64::from(rest > 0.0),
            unit_revenue: rest_value,
        });
    }
    Ok(queues)
}

/// Optimal admission and allocation of `fleet` servers for a priced menu.
pub fn plan_capacity(fleet: u64, rates: &[f64], menu: &SlaMenu, model: &QueueModel) -> Result<CapacityPlan> {
    let prices = menu
        .prices()
        .ok_or_else(|| Error::InvalidMenu("menu has no prices".into()))?;
    let caps = model.caps(menu.waits())?;
    plan_with_caps(fleet, rates, &caps, prices, model)
}

/// [`plan_capacity`] with the admissible per-server rates already known.
pub fn plan_with_caps(
    fleet: u64,
    rates: &[f64],
    caps: &[f64],
    prices: &[f64],
    model: &QueueModel,
) -> Result<CapacityPlan> {
    let slas = rates.len();
    let mut queues = split_virtual_queues(rates, caps, prices, model)?;
    let needed: u64 = queues.iter().map(|q| q.servers).sum();

    let mut admitted = Vec::with_capacity(queues.len());
    if needed <= fleet {
        admitted.extend(queues.into_iter().filter(|q| q.servers > 0));
    } else {
        queues.sort_by(|a, b| {
            b.unit_revenue
                .total_cmp(&a.unit_revenue)
                .then(a.sla_index.cmp(&b.sla_index))
                .then(a.kind.cmp(&b.kind))
        });
        let mut free = fleet;
        for q in queues {
            if free == 0 {
                break;
            }
            if q.servers == 0 {
                continue;
            }
            match q.kind {
                VirtualQueueKind::FullServers => {
                    let take = q.servers.min(free);
                    let rate = if take == q.servers {
                        q.rate
                    } else {
                        (caps[q.sla_index] * take as f64).min(q.rate)
                    };
                    free -= take;
                    admitted.push(VirtualQueue { rate, servers: take, ..q });
                }
                VirtualQueueKind::Remainder => {
                    free -= 1;
                    admitted.push(q);
                }
            }
        }
    }

    let mut accepted = vec![0.0; slas];
    for q in &admitted {
        accepted[q.sla_index] += q.rate;
    }
    let servers = accepted
        .iter()
        .zip(caps)
        .map(|(&rate, &cap)| min_servers(rate, cap))
        .collect::<Result<Vec<_>>>()?;
    let per_server_rates: Vec<f64> = accepted
        .iter()
        .zip(&servers)
        .map(|(&rate, &n)| if n > 0 { rate / n as f64 } else { 0.0 })
        .collect();
    let utilizations = per_server_rates
        .iter()
        .map(|&lambda| model.utilization(lambda))
        .collect::<Result<Vec<_>>>()?;
    let mut plan = CapacityPlan {
        accepted_rates: accepted,
        servers,
        per_server_rates,
        utilizations,
        total_unit_revenue: 0.0,
        admitted,
    };
    plan.total_unit_revenue = revenue_from_utilizations(&plan, prices);
    Ok(plan)
}

fn revenue_from_utilizations(plan: &CapacityPlan, prices: &[f64]) -> f64 {
    plan.servers
        .iter()
        .zip(&plan.utilizations)
        .zip(prices)
        .map(|((&n, &rho), &price)| n as f64 * rho * price)
        .sum()
}

/// Σ m_l·Q₂(Λ*_l/m_l)·θ_l.
pub fn total_unit_revenue(plan: &CapacityPlan, prices: &[f64], model: &QueueModel) -> Result<f64> {
    let mut total = 0.0;
    for ((&n, &rate), &price) in plan.servers.iter().zip(&plan.accepted_rates).zip(prices) {
        if n > 0 {
            total += n as f64 * model.utilization(rate / n as f64)? * price;
        }
    }
    Ok(total)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::queueing::{ExponentialQueueSpec, ParetoQueueSpec};
    use proptest::prelude::*;

    fn exp_model() -> QueueModel {
        QueueModel::default()
    }

    /// Best revenue over every server split and, per SLA, every accepted rate
    /// on a grid of fractions of the offered rate plus the cap-limited rate.
    pub(crate) fn brute_force_revenue(fleet: u64, rates: &[f64], caps: &[f64], prices: &[f64], model: &QueueModel) -> f64 {
        fn walk(
            l: usize,
            free: u64,
            rates: &[f64],
            caps: &[f64],
            prices: &[f64],
            model: &QueueModel,
        ) -> f64 {
            if l == rates.len() {
                return 0.0;
            }
            let mut best = f64::NEG_INFINITY;
            for k in 0..=free {
                let mut candidates: Vec<f64> = (0..=20).map(|j| rates[l] * j as f64 / 20.0).collect();
                candidates.push(rates[l].min(k as f64 * caps[l]));
                let mut here = 0.0f64;
                for rate in candidates {
                    let used = min_servers(rate, caps[l]).unwrap();
                    if used > k {
                        continue;
                    }
                    let value = if used == 0 {
                        0.0
                    } else {
                        used as f64 * model.utilization(rate / used as f64).unwrap() * prices[l]
                    };
                    here = here.max(value);
                }
                best = best.max(here + walk(l + 1, free - k, rates, caps, prices, model));
            }
            best
        }
        walk(0, fleet, rates, caps, prices, model)
    }

    #[test]
    fn min_server_counts() {
        assert_eq!(min_servers(360.0, 0.5883).unwrap(), 612);
        assert_eq!(min_servers(160.0, 0.8534).unwrap(), 188);
        assert_eq!(min_servers(0.0, 0.3).unwrap(), 0);
        assert_eq!(min_servers(3.0, 1.0).unwrap(), 3);
        assert_eq!(min_servers(3.0 * (1.0 + 1e-12), 1.0).unwrap(), 3);
        assert!(min_servers(1.0, 0.0).is_err());
        assert!(min_servers(-1.0, 1.0).is_err());
    }

    #[test]
    fn split_arithmetic() {
        let cap = 0.4;
        let qs = split_virtual_queues(&[2.5 * cap], &[cap], &[10.0], &exp_model()).unwrap();
        assert_eq!(qs.len(), 2);
        assert!((qs[0].rate - 2.0 * cap).abs() < 1e-12);
        assert_eq!(qs[0].servers, 2);
        assert!((qs[1].rate - 0.5 * cap).abs() < 1e-12);
        assert!((qs[1].unit_revenue - 0.5 * cap * 10.0).abs() < 1e-12);
        assert!((qs[0].unit_revenue - cap * 10.0).abs() < 1e-12);

        let exact = split_virtual_queues(&[3.0 * cap], &[cap], &[10.0], &exp_model()).unwrap();
        assert_eq!(exact[0].servers, 3);
        assert_eq!(exact[1].rate, 0.0);
        assert_eq!(exact[1].unit_revenue, 0.0);
        assert_eq!(exact[1].servers, 0);
    }

    #[test]
    fn compact_800_plan() {
        let menu = SlaMenu::priced(vec![4.0, 8.0], vec![57.93, 40.73]).unwrap();
        let plan = plan_capacity(800, &[360.0, 160.0], &menu, &exp_model()).unwrap();
        assert_eq!(plan.servers, vec![612, 188]);
        assert_eq!(plan.accepted_rates, vec![360.0, 160.0]);
        assert!((plan.total_unit_revenue - 27371.6).abs() < 0.5, "{}", plan.total_unit_revenue);
        let direct = total_unit_revenue(&plan, menu.prices().unwrap(), &exp_model()).unwrap();
        assert!((direct - plan.total_unit_revenue).abs() < 1e-9);
    }

    #[test]
    fn ample_capacity_accepts_everything() {
        let model = exp_model();
        let menu = SlaMenu::priced(vec![0.0, 2.0, 8.0], vec![9.0, 5.0, 1.0]).unwrap();
        let caps = model.caps(menu.waits()).unwrap();
        let rates = [1.3, 0.7, 4.1];
        let plan = plan_capacity(10_000, &rates, &menu, &model).unwrap();
        assert_eq!(plan.accepted_rates, rates.to_vec());
        for l in 0..3 {
            assert_eq!(plan.servers[l], min_servers(rates[l], caps[l]).unwrap());
        }
    }

    #[test]
    fn empty_fleet_and_empty_traffic() {
        let menu = SlaMenu::priced(vec![1.0], vec![3.0]).unwrap();
        let plan = plan_capacity(0, &[5.0], &menu, &exp_model()).unwrap();
        assert_eq!(plan, CapacityPlan::empty(1));
        let idle = plan_capacity(10, &[0.0], &menu, &exp_model()).unwrap();
        assert_eq!(idle.total_unit_revenue, 0.0);
        assert_eq!(total_unit_revenue(&CapacityPlan::empty(1), &[3.0], &exp_model()).unwrap(), 0.0);
    }

    #[test]
    fn exponential_revenue_ignores_split() {
        let model = QueueModel::Exponential(ExponentialQueueSpec::new(2.0, 0.05).unwrap());
        let menu = SlaMenu::priced(vec![1.0, 4.0], vec![6.0, 2.0]).unwrap();
        let plan = plan_capacity(7, &[3.3, 5.0], &menu, &model).unwrap();
        let identity: f64 = plan
            .accepted_rates
            .iter()
            .zip(menu.prices().unwrap())
            .map(|(r, p)| r / 2.0 * p)
            .sum();
        assert!((plan.total_unit_revenue - identity).abs() < 1e-9 * identity);
    }

    #[test]
    fn pareto_plans_respect_caps() {
        let model = QueueModel::Pareto(ParetoQueueSpec::default());
        let menu = SlaMenu::priced(vec![0.5, 2.0], vec![4.0, 1.5]).unwrap();
        let caps = model.caps(menu.waits()).unwrap();
        let plan = plan_capacity(12, &[3.0, 6.0], &menu, &model).unwrap();
        assert!(plan.servers_used() <= 12);
        for (rate, cap) in plan.per_server_rates.iter().zip(&caps) {
            assert!(*rate <= cap * (1.0 + 1e-9));
        }
    }

    /// Exhaustive optimum of the virtual-queue problem itself: each full queue
    /// may take any number of its servers, each remainder is all or nothing.
    fn virtual_queue_optimum(fleet: u64, queues: &[VirtualQueue]) -> f64 {
        fn walk(i: usize, free: u64, queues: &[VirtualQueue]) -> f64 {
            let Some(q) = queues.get(i) else { return 0.0 };
            let mut best = walk(i + 1, free, queues);
            let choices: Vec<u64> = match q.kind {
                VirtualQueueKind::FullServers => (1..=q.servers.min(free)).collect(),
                VirtualQueueKind::Remainder if q.servers == 1 && free >= 1 => vec![1],
                VirtualQueueKind::Remainder => vec![],
            };
            for k in choices {
                best = best.max(k as f64 * q.unit_revenue + walk(i + 1, free - k, queues));
            }
            best
        }
        walk(0, fleet, queues)
    }

    fn virtual_queue_revenue(plan: &CapacityPlan) -> f64 {
        plan.admitted.iter().map(|q| q.servers as f64 * q.unit_revenue).sum()
    }

    fn instance() -> impl Strategy<Value = (u64, Vec<f64>, Vec<f64>, Vec<f64>)> {
        (1usize..=3).prop_flat_map(|l| {
            (
                0u64..=8,
                proptest::collection::vec(0u32..=16, l),
                proptest::collection::vec(1u32..=20, l),
                proptest::collection::btree_set(1u32..=60, l),
            )
                .prop_map(|(m, rate_steps, cap_steps, price_set)| {
                    let rates = rate_steps.iter().map(|&s| s as f64 * 0.25).collect();
                    let caps = cap_steps.iter().map(|&s| s as f64 * 0.05).collect();
                    let prices = price_set.iter().rev().map(|&p| p as f64).collect();
                    (m, rates, caps, prices)
                })
        })
    }

    proptest! {
        #[test]
        fn greedy_matches_oracle((m, rates, caps, prices) in instance()) {
            let model = exp_model();
            let plan = plan_with_caps(m, &rates, &caps, &prices, &model).unwrap();
            let best = brute_force_revenue(m, &rates, &caps, &prices, &model);
            prop_assert!((plan.total_unit_revenue - best).abs() <= 1e-6 * best.max(1e-12),
                "greedy {} oracle {}", plan.total_unit_revenue, best);
        }

        #[test]
        fn plan_invariants((m, rates, caps, prices) in instance()) {
            let plan = plan_with_caps(m, &rates, &caps, &prices, &exp_model()).unwrap();
            prop_assert!(plan.servers_used() <= m);
            for l in 0..rates.len() {
                prop_assert!(plan.accepted_rates[l] <= rates[l] * (1.0 + 1e-12));
                prop_assert_eq!(plan.servers[l], min_servers(plan.accepted_rates[l], caps[l]).unwrap());
                prop_assert!(plan.per_server_rates[l] <= caps[l] * (1.0 + 1e-9));
            }
            let offered = split_virtual_queues(&rates, &caps, &prices, &exp_model()).unwrap();
            for q in &plan.admitted {
                let cap = caps[q.sla_index];
                match q.kind {
                    VirtualQueueKind::FullServers => {
                        let k = q.rate / cap;
                        prop_assert!((k - k.round()).abs() <= 1e-9 * k.max(1.0), "{q:?}");
                    }
                    VirtualQueueKind::Remainder => {
                        let whole = offered
                            .iter()
                            .find(|o| o.sla_index == q.sla_index && o.kind == VirtualQueueKind::Remainder)
                            .unwrap();
                        prop_assert!(q.rate == 0.0 || q.rate == whole.rate);
                    }
                }
            }
        }

        #[test]
        fn revenue_nondecreasing_in_fleet((m, rates, caps, prices) in instance()) {
            let model = exp_model();
            let small = plan_with_caps(m, &rates, &caps, &prices, &model).unwrap();
            let large = plan_with_caps(m + 1, &rates, &caps, &prices, &model).unwrap();
            prop_assert!(large.total_unit_revenue >= small.total_unit_revenue * (1.0 - 1e-12));
        }

        #[test]
        fn greedy_solves_pareto_virtual_problem(
            m in 0u64..=8,
            rate_steps in proptest::collection::vec(1u32..=40, 1..=3),
            waits_seed in proptest::collection::btree_set(1u32..=30, 3),
        ) {
            let model = QueueModel::Pareto(ParetoQueueSpec::default());
            let l = rate_steps.len();
            let waits: Vec<f64> = waits_seed.iter().take(l).map(|&w| w as f64 * 0.1).collect();
            let caps = model.caps(&waits).unwrap();
            let prices: Vec<f64> = (0..l).map(|i| 10.0 - 3.0 * i as f64).collect();
            let rates: Vec<f64> = rate_steps.iter().map(|&s| s as f64 * 0.1).collect();
            let plan = plan_with_caps(m, &rates, &caps, &prices, &model).unwrap();
            let queues = split_virtual_queues(&rates, &caps, &prices, &model).unwrap();
            let best = virtual_queue_optimum(m, &queues);
            let got = virtual_queue_revenue(&plan);
            prop_assert!((got - best).abs() <= 1e-9 * best.max(1e-12), "greedy {got} oracle {best}");
        }
    }
}
