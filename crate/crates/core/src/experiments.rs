//! Scenario files, the experiment battery and CSV output.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market::{compact_weights, loose_weights, UserPopulation, UtilityShape};
use crate::pricing::{optimize_prices, OptimizerConfig, PricingSolution};
use crate::queueing::{
    pareto_expected_wait, ExponentialQueueSpec, ParetoQueueSpec, QueueLaw, QueueModel,
};
use crate::sim::{derive_seed, simulate_plan, simulate_pool, Horizon, LatePolicy, SimConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WeightScheme {
    Compact,
    Loose,
}

impl WeightScheme {
    pub fn weights(&self, users: usize) -> Vec<f64> {
        match self {
            WeightScheme::Compact => compact_weights(users),
            WeightScheme::Loose => loose_weights(users),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            WeightScheme::Compact => "compact",
            WeightScheme::Loose => "loose",
        }
    }
}

/// One (weights, fleet, shape) combination of the battery.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub weights: WeightScheme,
    pub fleet: u64,
    pub shape: UtilityShape,
    /// Extra cell outside the main grid.
    pub probe: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub id: String,
    pub model: QueueModel,
    pub waits: Vec<f64>,
    pub users: usize,
    pub arrival_rate: f64,
    pub weight_schemes: Vec<WeightScheme>,
    pub shapes: Vec<UtilityShape>,
    pub fleets: Vec<u64>,
    pub probes: Vec<Cell>,
    pub seeds: Vec<u64>,
    pub sim_jobs: u64,
    pub warmup: f64,
    pub crosscheck_models: Vec<QueueModel>,
    pub output_dir: PathBuf,
}

impl Default for Scenario {
    fn default() -> Self {
        ScenarioFile::default()
            .into_scenario()
            .expect("built-in scenario is valid")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
enum ModelFile {
    Exponential {
        service_rate_per_time: f64,
        miss_target: f64,
    },
    Pareto {
        shape_alpha: f64,
        min_runtime_time: f64,
    },
}

impl ModelFile {
    fn into_model(self) -> Result<QueueModel> {
        Ok(match self {
            ModelFile::Exponential {
                service_rate_per_time,
                miss_target,
            } => ExponentialQueueSpec::new(service_rate_per_time, miss_target)?.into(),
            ModelFile::Pareto {
                shape_alpha,
                min_runtime_time,
            } => ParetoQueueSpec::new(shape_alpha, min_runtime_time)?.into(),
        })
    }

    fn exponential_default() -> Self {
        ModelFile::Exponential {
            service_rate_per_time: 1.0,
            miss_target: 0.05,
        }
    }

    fn pareto_default() -> Self {
        ModelFile::Pareto {
            shape_alpha: 1.4,
            min_runtime_time: 1.0 / 6.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct MenuFile {
    waits_time: Vec<f64>,
}

impl Default for MenuFile {
    fn default() -> Self {
        Self {
            waits_time: vec![0.0, 1.0, 2.0, 4.0, 8.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct PopulationFile {
    users: usize,
    arrival_rate_per_time: f64,
    weights: Vec<WeightScheme>,
    power_betas: Vec<f64>,
    log_epsilons_time: Vec<f64>,
}

impl Default for PopulationFile {
    fn default() -> Self {
        Self {
            users: 50,
            arrival_rate_per_time: 20.0,
            weights: vec![WeightScheme::Compact, WeightScheme::Loose],
            power_betas: vec![0.25, 0.45, 0.75],
            log_epsilons_time: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct FleetFile {
    servers: Vec<u64>,
}

impl Default for FleetFile {
    fn default() -> Self {
        Self {
            servers: vec![800, 1600, 2400],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProbeFile {
    weights: WeightScheme,
    servers: u64,
    power_beta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct SimulationFile {
    seeds: Vec<u64>,
    jobs: u64,
    warmup_fraction: f64,
    models: Vec<ModelFile>,
}

impl Default for SimulationFile {
    fn default() -> Self {
        Self {
            seeds: vec![1],
            jobs: 1_000_000,
            warmup_fraction: 0.1,
            models: vec![ModelFile::exponential_default(), ModelFile::pareto_default()],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct OutputFile {
    dir: PathBuf,
}

impl Default for OutputFile {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("results"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct ScenarioFile {
    id: String,
    model: ModelFile,
    menu: MenuFile,
    population: PopulationFile,
    fleet: FleetFile,
    probe: Vec<ProbeFile>,
    simulation: SimulationFile,
    output: OutputFile,
}

impl Default for ScenarioFile {
    fn default() -> Self {
        let probe = |weights, servers, power_beta| ProbeFile {
            weights,
            servers,
            power_beta,
        };
        Self {
            id: "default".into(),
            model: ModelFile::exponential_default(),
            menu: MenuFile::default(),
            population: PopulationFile::default(),
            fleet: FleetFile::default(),
            probe: vec![
                probe(WeightScheme::Compact, 800, 0.5),
                probe(WeightScheme::Compact, 1600, 0.5),
                probe(WeightScheme::Compact, 2400, 0.5),
                probe(WeightScheme::Loose, 1600, 0.5),
                probe(WeightScheme::Compact, 1600, 0.2),
            ],
            simulation: SimulationFile::default(),
            output: OutputFile::default(),
        }
    }
}

impl ScenarioFile {
    fn into_scenario(self) -> Result<Scenario> {
        crate::market::SlaMenu::new(self.menu.waits_time.clone())?;
        if self.menu.waits_time.is_empty() {
            return Err(Error::Config("menu needs at least one wait".into()));
        }
        let p = &self.population;
        if p.users == 0 {
            return Err(Error::Config("population needs at least one user".into()));
        }
        if !(p.arrival_rate_per_time > 0.0) {
            return Err(Error::Config("arrival_rate_per_time must be positive".into()));
        }
        let mut shapes = p
            .power_betas
            .iter()
            .map(|&b| UtilityShape::power(b))
            .collect::<Result<Vec<_>>>()?;
        for &e in &p.log_epsilons_time {
            shapes.push(UtilityShape::log(e)?);
        }
        for scheme in &p.weights {
            UserPopulation::from_weights(&scheme.weights(p.users), p.arrival_rate_per_time, UtilityShape::power(0.5)?)?;
        }
        let probes = self
            .probe
            .iter()
            .map(|pr| {
                Ok(Cell {
                    weights: pr.weights,
                    fleet: pr.servers,
                    shape: UtilityShape::power(pr.power_beta)?,
                    probe: true,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let sim = &self.simulation;
        if !(0.0..=0.5).contains(&sim.warmup_fraction) {
            return Err(Error::Config("warmup_fraction must lie in [0, 0.5]".into()));
        }
        if sim.jobs == 0 {
            return Err(Error::Config("simulation jobs must be positive".into()));
        }
        Ok(Scenario {
            id: self.id,
            model: self.model.into_model()?,
            waits: self.menu.waits_time,
            users: p.users,
            arrival_rate: p.arrival_rate_per_time,
            weight_schemes: p.weights.clone(),
            shapes,
            fleets: self.fleet.servers,
            probes,
            seeds: sim.seeds.clone(),
            sim_jobs: sim.jobs,
            warmup: sim.warmup_fraction,
            crosscheck_models: sim
                .models
                .iter()
                .cloned()
                .map(ModelFile::into_model)
                .collect::<Result<Vec<_>>>()?,
            output_dir: self.output.dir,
        })
    }
}

impl Scenario {
    pub fn from_toml(text: &str) -> Result<Self> {
        let file: ScenarioFile = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        file.into_scenario()
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn population(&self, weights: WeightScheme, shape: UtilityShape) -> Result<UserPopulation> {
        UserPopulation::from_weights(&weights.weights(self.users), self.arrival_rate, shape)
    }

    /// Main grid followed by probe cells.
    pub fn cells(&self) -> Vec<Cell> {
        let mut cells = Vec::new();
        for &weights in &self.weight_schemes {
            for &fleet in &self.fleets {
                for &shape in &self.shapes {
                    cells.push(Cell {
                        weights,
                        fleet,
                        shape,
                        probe: false,
                    });
                }
            }
        }
        cells.extend(self.probes.iter().copied());
        cells
    }
}

pub fn shape_label(shape: &UtilityShape) -> (&'static str, f64) {
    match *shape {
        UtilityShape::Power { beta } => ("power", beta),
        UtilityShape::Log { epsilon } => ("log", epsilon),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QosPoint {
    pub phi: f64,
    pub lambda_max: f64,
    pub rho_max: f64,
}

/// Largest admissible rate and its utilization at every wait of the grid.
pub fn run_qos_curve(model: &QueueModel, phi_grid: &[f64]) -> Result<Vec<QosPoint>> {
    phi_grid
        .iter()
        .map(|&phi| {
            let lambda_max = model.lambda_max(phi)?;
            Ok(QosPoint {
                phi,
                lambda_max,
                rho_max: model.utilization(lambda_max)?,
            })
        })
        .collect()
}

/// ours / baseline − 1.
pub fn improvement_ratio(revenue: f64, baseline: f64) -> f64 {
    revenue / baseline - 1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlaOutcome {
    /// 0-based index into the full menu.
    pub sla: usize,
    pub cut_user: usize,
    pub price: f64,
    pub offered_rate: f64,
    pub accepted_rate: f64,
    pub servers: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub scenario: String,
    pub cell: Cell,
    pub slas: Vec<SlaOutcome>,
    pub revenue: f64,
    pub baseline_revenue: f64,
    pub baseline_price: f64,
    pub baseline_accepted_rate: f64,
    pub baseline_servers: u64,
    pub improvement: f64,
    pub evaluations: u64,
    pub seconds: f64,
}

fn outcomes(sol: &PricingSolution, arrival_prefix: &[f64]) -> Vec<SlaOutcome> {
    let mut start = 0;
    sol.offered
        .iter()
        .enumerate()
        .map(|(p, &sla)| {
            let cut = sol.cuts[p];
            let offered_rate = arrival_prefix[cut] - arrival_prefix[start];
            start = cut;
            SlaOutcome {
                sla,
                cut_user: cut,
                price: sol.prices[p],
                offered_rate,
                accepted_rate: sol.plan.accepted_rates[p],
                servers: sol.plan.servers[p],
            }
        })
        .collect()
}

/// Optimal menu and the single-SLA baseline for one cell.
pub fn run_cell(scenario: &Scenario, cell: &Cell, config: &OptimizerConfig) -> Result<RunRecord> {
    let started = Instant::now();
    let pop = scenario.population(cell.weights, cell.shape)?;
    let sol = optimize_prices(cell.fleet, &pop, &scenario.waits, &scenario.model, config)?;
    let base = optimize_prices(cell.fleet, &pop, &scenario.waits[..1], &scenario.model, config)?;
    let prefix: Vec<f64> = std::iter::once(0.0)
        .chain(pop.users().iter().scan(0.0, |acc, u| {
            *acc += u.arrival_rate;
            Some(*acc)
        }))
        .collect();
    Ok(RunRecord {
        scenario: scenario.id.clone(),
        cell: *cell,
        slas: outcomes(&sol, &prefix),
        revenue: sol.total_unit_revenue,
        baseline_revenue: base.total_unit_revenue,
        baseline_price: base.prices.first().copied().unwrap_or(0.0),
        baseline_accepted_rate: base.plan.accepted_rates.first().copied().unwrap_or(0.0),
        baseline_servers: base.plan.servers.first().copied().unwrap_or(0),
        improvement: improvement_ratio(sol.total_unit_revenue, base.total_unit_revenue),
        evaluations: sol.evaluations + base.evaluations,
        seconds: started.elapsed().as_secs_f64(),
    })
}

/// Every cell of the scenario, in [`Scenario::cells`] order.
pub fn run_optimal_solutions(scenario: &Scenario, config: &OptimizerConfig) -> Result<Vec<RunRecord>> {
    scenario
        .cells()
        .iter()
        .map(|cell| run_cell(scenario, cell, config))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrosscheckRow {
    pub model: String,
    pub unit: String,
    pub seed: u64,
    pub servers: u64,
    pub arrival_rate: f64,
    pub phi: f64,
    pub late_policy: LatePolicy,
    pub jobs: u64,
    pub analytic_utilization: f64,
    pub simulated_utilization: f64,
    pub utilization_half_width: f64,
    pub analytic_miss: Option<f64>,
    pub simulated_miss: f64,
    pub miss_half_width: f64,
    pub analytic_wait: Option<f64>,
    pub simulated_wait: f64,
    pub wait_half_width: f64,
}

/// Per-server rates, as fractions of the stability bound, at which Pareto
/// units are checked.
pub const PARETO_CHECK_FRACTIONS: [f64; 5] = [0.05, 0.1, 0.2, 0.3, 0.4];

struct UnitSpec {
    model: QueueModel,
    unit: String,
    servers: u64,
    rate: f64,
    phi: f64,
    analytic_miss: Option<f64>,
    analytic_wait: Option<f64>,
}

fn crosscheck_units(scenario: &Scenario) -> Result<Vec<UnitSpec>> {
    let mut units = Vec::new();
    for model in &scenario.crosscheck_models {
        match model {
            QueueModel::Exponential(spec) => {
                for (l, &phi) in scenario.waits.iter().enumerate() {
                    units.push(UnitSpec {
                        model: *model,
                        unit: format!("sla{}", l + 1),
                        servers: 1,
                        rate: model.lambda_max(phi)?,
                        phi,
                        analytic_miss: Some(spec.miss_target()),
                        analytic_wait: None,
                    });
                }
            }
            QueueModel::Pareto(spec) => {
                for f in PARETO_CHECK_FRACTIONS {
                    let rate = f * spec.stability_bound();
                    units.push(UnitSpec {
                        model: *model,
                        unit: format!("load{f}"),
                        servers: 1,
                        rate,
                        phi: pareto_expected_wait(rate, spec)?,
                        analytic_miss: None,
                        analytic_wait: Some(pareto_expected_wait(rate, spec)?),
                    });
                }
            }
        }
        units.push(UnitSpec {
            model: *model,
            unit: "idle".into(),
            servers: 1,
            rate: 0.0,
            phi: 0.0,
            analytic_miss: Some(0.0),
            analytic_wait: Some(0.0),
        });
    }
    Ok(units)
}

/// Analytic against simulated statistics for every check unit and seed.
pub fn run_simulation_crosscheck(scenario: &Scenario, seeds: &[u64]) -> Result<Vec<CrosscheckRow>> {
    use rayon::prelude::*;
    let units = crosscheck_units(scenario)?;
    let jobs: Vec<(usize, u64)> = seeds
        .iter()
        .flat_map(|&seed| (0..units.len()).map(move |u| (u, seed)))
        .collect();
    jobs.par_iter()
        .map(|&(u, seed)| {
            let unit = &units[u];
            let mut cfg = SimConfig::new(
                unit.rate,
                unit.servers as usize,
                unit.model,
                Horizon::Jobs(scenario.sim_jobs),
                derive_seed(seed, u as u64),
            );
            cfg.warmup = scenario.warmup;
            let stats = simulate_pool(&cfg, unit.phi)?;
            Ok(CrosscheckRow {
                model: unit.model.name().into(),
                unit: unit.unit.clone(),
                seed,
                servers: unit.servers,
                arrival_rate: unit.rate,
                phi: unit.phi,
                late_policy: cfg.late_policy,
                jobs: stats.jobs,
                analytic_utilization: unit.model.utilization(unit.rate / unit.servers as f64)?,
                simulated_utilization: stats.utilization,
                utilization_half_width: stats.utilization_half_width,
                analytic_miss: unit.analytic_miss,
                simulated_miss: stats.miss_fraction,
                miss_half_width: stats.miss_half_width,
                analytic_wait: unit.analytic_wait,
                simulated_wait: stats.mean_wait,
                wait_half_width: stats.mean_wait_half_width,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanCheckRow {
    pub scenario: String,
    pub weights: WeightScheme,
    pub fleet: u64,
    pub seed: u64,
    pub sla: usize,
    pub servers: u64,
    pub accepted_rate: f64,
    pub phi: f64,
    pub price: f64,
    pub simulated_utilization: f64,
    pub simulated_miss: f64,
    pub miss_half_width: f64,
    pub analytic_revenue: f64,
    pub realized_revenue: f64,
}

/// Simulates the optimal plan of one cell end to end.
pub fn run_plan_check(
    scenario: &Scenario,
    cell: &Cell,
    config: &OptimizerConfig,
    seed: u64,
    horizon: Horizon,
) -> Result<Vec<PlanCheckRow>> {
    let pop = scenario.population(cell.weights, cell.shape)?;
    let sol = optimize_prices(cell.fleet, &pop, &scenario.waits, &scenario.model, config)?;
    if sol.offered.is_empty() {
        return Ok(Vec::new());
    }
    let menu = sol.menu(&scenario.waits)?;
    let late = LatePolicy::for_model(&scenario.model);
    let sim = simulate_plan(&sol.plan, &menu, &scenario.model, horizon, seed, late)?;
    Ok(sim
        .units
        .iter()
        .map(|u| PlanCheckRow {
            scenario: scenario.id.clone(),
            weights: cell.weights,
            fleet: cell.fleet,
            seed,
            sla: sol.offered[u.sla_index] + 1,
            servers: u.servers,
            accepted_rate: u.accepted_rate,
            phi: u.wait,
            price: u.price,
            simulated_utilization: u.stats.utilization,
            simulated_miss: u.stats.miss_fraction,
            miss_half_width: u.stats.miss_half_width,
            analytic_revenue: sim.analytic_revenue,
            realized_revenue: sim.realized_revenue,
        })
        .collect())
}

#[derive(Debug, Serialize)]
struct QosCsvRow<'a> {
    model: &'a str,
    phi: f64,
    lambda_max: f64,
    rho_max: f64,
}

#[derive(Debug, Serialize)]
struct SolutionCsvRow<'a> {
    scenario: &'a str,
    weights: &'a str,
    fleet: u64,
    shape: &'a str,
    shape_parameter: f64,
    probe: bool,
    sla: usize,
    cut_user: usize,
    price: f64,
    offered_rate: f64,
    accepted_rate: f64,
    servers: u64,
}

#[derive(Debug, Serialize)]
struct RevenueCsvRow<'a> {
    scenario: &'a str,
    weights: &'a str,
    fleet: u64,
    shape: &'a str,
    shape_parameter: f64,
    probe: bool,
    offered_slas: String,
    revenue: f64,
    baseline_price: f64,
    baseline_accepted_rate: f64,
    baseline_servers: u64,
    baseline_revenue: f64,
    improvement: f64,
    evaluations: u64,
}

fn csv_err(e: impl std::fmt::Display) -> Error {
    Error::Config(format!("csv output: {e}"))
}

fn write_rows<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(csv_err)?;
    }
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    for row in rows {
        w.serialize(row).map_err(csv_err)?;
    }
    w.flush().map_err(csv_err)
}

pub fn write_qos_csv(path: &Path, curves: &[(QueueModel, Vec<QosPoint>)]) -> Result<()> {
    write_rows(
        path,
        curves.iter().flat_map(|(model, points)| {
            points.iter().map(move |p| QosCsvRow {
                model: model.name(),
                phi: p.phi,
                lambda_max: p.lambda_max,
                rho_max: p.rho_max,
            })
        }),
    )
}

pub fn write_solutions_csv(path: &Path, records: &[RunRecord]) -> Result<()> {
    write_rows(
        path,
        records.iter().flat_map(|r| {
            let (shape, param) = shape_label(&r.cell.shape);
            r.slas.iter().map(move |s| SolutionCsvRow {
                scenario: &r.scenario,
                weights: r.cell.weights.name(),
                fleet: r.cell.fleet,
                shape,
                shape_parameter: param,
                probe: r.cell.probe,
                sla: s.sla + 1,
                cut_user: s.cut_user,
                price: s.price,
                offered_rate: s.offered_rate,
                accepted_rate: s.accepted_rate,
                servers: s.servers,
            })
        }),
    )
}

pub fn write_revenue_csv(path: &Path, records: &[RunRecord]) -> Result<()> {
    write_rows(
        path,
        records.iter().map(|r| {
            let (shape, param) = shape_label(&r.cell.shape);
            RevenueCsvRow {
                scenario: &r.scenario,
                weights: r.cell.weights.name(),
                fleet: r.cell.fleet,
                shape,
                shape_parameter: param,
                probe: r.cell.probe,
                offered_slas: r
                    .slas
                    .iter()
                    .map(|s| (s.sla + 1).to_string())
                    .collect::<Vec<_>>()
                    .join(";"),
                revenue: r.revenue,
                baseline_price: r.baseline_price,
                baseline_accepted_rate: r.baseline_accepted_rate,
                baseline_servers: r.baseline_servers,
                baseline_revenue: r.baseline_revenue,
                improvement: r.improvement,
                evaluations: r.evaluations,
            }
        }),
    )
}

pub fn write_crosscheck_csv(path: &Path, rows: &[CrosscheckRow]) -> Result<()> {
    write_rows(path, rows)
}

pub fn write_plan_check_csv(path: &Path, rows: &[PlanCheckRow]) -> Result<()> {
    write_rows(path, rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_scenario_mirrors_the_reference_setup() {
        let s = Scenario::default();
        assert_eq!(s.waits, vec![0.0, 1.0, 2.0, 4.0, 8.0]);
        assert_eq!(s.users, 50);
        assert_eq!(s.arrival_rate, 20.0);
        assert_eq!(s.fleets, vec![800, 1600, 2400]);
        assert_eq!(s.shapes.len(), 3);
        let cells = s.cells();
        assert_eq!(cells.iter().filter(|c| !c.probe).count(), 18);
        assert_eq!(cells.iter().filter(|c| c.probe).count(), 5);
    }

    #[test]
    fn toml_round_trip_with_overrides() {
        let text = r#"
            id = "small"
            [model]
            kind = "pareto"
            shape_alpha = 2.0
            min_runtime_time = 0.5
            [menu]
            waits_time = [0.5, 2.0]
            [population]
            users = 6
            weights = ["compact"]
            power_betas = []
            log_epsilons_time = [1.0]
            [fleet]
            servers = [10]
        "#;
        let s = Scenario::from_toml(text).unwrap();
        assert_eq!(s.id, "small");
        assert_eq!(s.model.name(), "pareto");
        assert_eq!(s.users, 6);
        assert_eq!(s.shapes, vec![UtilityShape::log(1.0).unwrap()]);
        assert_eq!(s.cells().iter().filter(|c| !c.probe).count(), 1);
    }

    #[test]
    fn bad_scenarios_are_rejected() {
        assert!(Scenario::from_toml("[menu]\nwaits_time = [2.0, 1.0]").is_err());
        assert!(Scenario::from_toml("[population]\nusers = 0").is_err());
        assert!(Scenario::from_toml("[population]\npower_betas = [1.5]").is_err());
        assert!(Scenario::from_toml("unknown_key = 3").is_err());
        assert!(Scenario::from_toml("[simulation]\nwarmup_fraction = 0.9").is_err());
    }

    #[test]
    fn improvement_definition() {
        assert!((improvement_ratio(300.0, 100.0) - 2.0).abs() < 1e-15);
        assert_eq!(improvement_ratio(100.0, 100.0), 0.0);
        assert!(improvement_ratio(50.0, 100.0) < 0.0);
    }

    #[test]
    fn exponential_qos_curve() {
        let pts = run_qos_curve(&QueueModel::default(), &[0.0, 1.0, 2.0, 4.0, 8.0]).unwrap();
        let expect = [0.05263, 0.1362, 0.2863, 0.5883, 0.8534];
        for (p, e) in pts.iter().zip(expect) {
            assert!((p.rho_max - e).abs() < 5e-4);
            assert_eq!(p.rho_max, p.lambda_max);
        }
        for w in pts.windows(2) {
            assert!(w[1].rho_max > w[0].rho_max);
        }
        assert_eq!(run_qos_curve(&QueueModel::default(), &[2.0]).unwrap().len(), 1);
    }

    #[test]
    fn pareto_qos_curve_anchor() {
        let pts = run_qos_curve(&QueueModel::Pareto(ParetoQueueSpec::default()), &[0.05]).unwrap();
        assert!((pts[0].rho_max * 100.0 - 0.3168).abs() < 0.01);
    }

    #[test]
    fn huge_fleet_cell_matches_single_sla_baseline() {
        let s = Scenario {
            users: 8,
            ..Scenario::default()
        };
        let cell = Cell {
            weights: WeightScheme::Compact,
            fleet: 1_000_000,
            shape: UtilityShape::power(0.45).unwrap(),
            probe: false,
        };
        let r = run_cell(&s, &cell, &OptimizerConfig::default()).unwrap();
        let offered: f64 = r.slas.iter().map(|x| x.offered_rate).sum();
        let accepted: f64 = r.slas.iter().map(|x| x.accepted_rate).sum();
        assert_eq!(offered, accepted);
        assert!(r.improvement.abs() < 1e-12, "{}", r.improvement);
        assert_eq!(r.slas.len(), 1);
        assert_eq!(r.baseline_accepted_rate, 8.0 * 20.0);
    }

    #[test]
    fn crosscheck_has_idle_rows_and_csv_writes() {
        let s = Scenario {
            sim_jobs: 20_000,
            ..Scenario::default()
        };
        let rows = run_simulation_crosscheck(&s, &[3]).unwrap();
        assert_eq!(rows.len(), 5 + 1 + PARETO_CHECK_FRACTIONS.len() + 1);
        let idle: Vec<_> = rows.iter().filter(|r| r.unit == "idle").collect();
        assert_eq!(idle.len(), 2);
        for r in idle {
            assert_eq!(r.simulated_utilization, 0.0);
            assert_eq!(r.simulated_miss, 0.0);
        }
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x/crosscheck.csv");
        write_crosscheck_csv(&path, &rows).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), rows.len() + 1);
        assert!(text.starts_with("model,unit,seed,"));
    }
}
