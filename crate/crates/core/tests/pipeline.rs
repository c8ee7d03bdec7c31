use qosprice::experiments::Scenario;
use qosprice::market::{aggregate_arrivals, compact_weights};
use qosprice::planner::plan_capacity;
use qosprice::pricing::optimize_prices;
use qosprice::queueing::exp_miss_fraction;
use qosprice::sim::stats::ks_exponential;
use qosprice::sim::{dispatched_arrivals, simulate_plan, simulate_pool, Horizon, LatePolicy, SimConfig};
use qosprice::{OptimizerConfig, ParetoQueueSpec, QueueModel, SlaMenu, UserPopulation, UtilityShape};

fn compact_800_plan() -> (SlaMenu, qosprice::CapacityPlan) {
    let menu = SlaMenu::priced(vec![4.0, 8.0], vec![57.93, 40.73]).unwrap();
    let plan = plan_capacity(800, &[360.0, 160.0], &menu, &QueueModel::default()).unwrap();
    (menu, plan)
}

#[test]
fn compact_plan_served_late_earns_the_analytic_revenue() {
    let (menu, plan) = compact_800_plan();
    let sim = simulate_plan(&plan, &menu, &QueueModel::default(), Horizon::Jobs(300_000), 17, LatePolicy::ServeLate).unwrap();
    let rel = (sim.realized_revenue - 27371.6).abs() / 27371.6;
    assert!(rel < 0.01, "realized {} ({rel})", sim.realized_revenue);
}

#[test]
fn compact_plan_with_drops_meets_the_miss_target() {
    let (menu, plan) = compact_800_plan();
    let sim = simulate_plan(&plan, &menu, &QueueModel::default(), Horizon::Jobs(300_000), 18, LatePolicy::Drop).unwrap();
    let mut served_revenue = 0.0;
    for u in &sim.units {
        assert!(
            u.stats.miss_fraction <= 0.05 + u.stats.miss_half_width,
            "sla {}: miss {} ± {}",
            u.sla_index,
            u.stats.miss_fraction,
            u.stats.miss_half_width
        );
        let lambda = u.accepted_rate / u.servers as f64;
        let served = 1.0 - exp_miss_fraction(lambda, 1.0, u.wait).unwrap();
        served_revenue += u.servers as f64 * lambda * served * u.price;
    }
    let rel = (sim.realized_revenue - served_revenue).abs() / served_revenue;
    assert!(rel < 0.01, "realized {} vs {served_revenue}", sim.realized_revenue);
}

#[test]
fn optimizer_output_feeds_planner_and_market_consistently() {
    let pop = UserPopulation::from_weights(&compact_weights(20), 5.0, UtilityShape::log(0.5).unwrap()).unwrap();
    let waits = [0.0, 1.0, 2.0, 4.0];
    let model = QueueModel::default();
    let sol = optimize_prices(60, &pop, &waits, &model, &OptimizerConfig::default()).unwrap();
    let menu = sol.menu(&waits).unwrap();
    let rates = aggregate_arrivals(&pop, &menu).unwrap();
    let plan = plan_capacity(60, &rates, &menu, &model).unwrap();
    assert_eq!(plan, sol.plan);
    assert!(plan.servers_used() <= 60);
}

#[test]
fn simulated_pareto_utilization_is_rate_times_mean_runtime() {
    let spec = ParetoQueueSpec::default();
    let model = QueueModel::Pareto(spec);
    for (i, f) in [0.1, 0.3].into_iter().enumerate() {
        let lambda = f * spec.stability_bound();
        let stats = simulate_pool(&SimConfig::new(lambda, 1, model, Horizon::Jobs(1_000_000), 40 + i as u64), 1.0).unwrap();
        let expect = lambda * spec.mean_runtime();
        assert!(
            (stats.utilization - expect).abs() < 3.0 * stats.utilization_half_width + 5e-3,
            "{} vs {expect}",
            stats.utilization
        );
    }
}

#[test]
fn per_server_arrivals_are_poisson() {
    for servers in [2usize, 8] {
        let rate = 0.7 * servers as f64;
        let cfg = SimConfig::new(rate, servers, QueueModel::default(), Horizon::Jobs(400_000), 77);
        let times = dispatched_arrivals(&cfg, 0).unwrap();
        let gaps: Vec<f64> = times.windows(2).map(|w| w[1] - w[0]).collect();
        let ks = ks_exponential(&gaps, rate / servers as f64);
        assert!(ks.p_value > 0.01, "m={servers}: {ks:?}");
    }
}

#[test]
fn shipped_scenario_file_matches_built_in_defaults() {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../scenarios/default.toml");
    let loaded = Scenario::load(std::path::Path::new(path)).unwrap();
    assert_eq!(loaded, Scenario::default());
}
