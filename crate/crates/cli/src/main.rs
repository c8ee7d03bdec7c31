use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use qosprice::experiments::{
    run_cell, run_optimal_solutions, run_plan_check, run_qos_curve, run_simulation_crosscheck, write_crosscheck_csv,
    write_plan_check_csv, write_qos_csv, write_revenue_csv, write_solutions_csv, Cell, QosPoint, RunRecord, Scenario,
    WeightScheme,
};
use qosprice::planner::plan_capacity;
use qosprice::sim::Horizon;
use qosprice::{OptimizerConfig, QueueModel, SlaMenu, UtilityShape};

#[derive(Parser)]
#[command(name = "qosprice", version, about = "QoS-differentiated pricing and capacity planning")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Scenario file (TOML); built-in defaults when omitted.
    #[arg(long, global = true)]
    scenario: Option<PathBuf>,
    /// Results directory; overrides the scenario's output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Base seed for simulations; overrides the scenario's seeds.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Measured jobs per simulated unit.
    #[arg(long, global = true)]
    jobs: Option<u64>,
    /// Optimizer worker threads (0 = all cores, 1 = sequential).
    #[arg(long, global = true, default_value_t = 0)]
    parallel: usize,
    /// Shade breakpoint prices down so every choice is strict.
    #[arg(long, global = true)]
    epsilon_pricing: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Admissible rate and utilization against the waiting-time bound.
    QosCurve,
    /// Capacity plan for a fixed priced menu and offered rates.
    Plan {
        #[arg(long)]
        servers: u64,
        #[arg(long, value_delimiter = ',', required = true)]
        waits: Vec<f64>,
        #[arg(long, value_delimiter = ',', required = true)]
        prices: Vec<f64>,
        #[arg(long, value_delimiter = ',', required = true)]
        rates: Vec<f64>,
    },
    /// Optimal prices for one cell.
    Price(CellArgs),
    /// Simulated against analytic statistics, plus one plan simulated end to end.
    Simulate(CellArgs),
    /// Every cell of the scenario, the curves and the simulation checks.
    Reproduce {
        /// Skip the simulation checks.
        #[arg(long)]
        no_simulation: bool,
    },
}

#[derive(Args)]
struct CellArgs {
    #[arg(long, default_value_t = 800)]
    servers: u64,
    #[arg(long, value_enum, default_value = "compact")]
    weights: Weights,
    /// Power-shape exponent.
    #[arg(long, default_value_t = 0.45, conflicts_with = "epsilon")]
    beta: f64,
    /// Log-shape offset.
    #[arg(long)]
    epsilon: Option<f64>,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum Weights {
    Compact,
    Loose,
}

impl CellArgs {
    fn cell(&self) -> Result<Cell> {
        let shape = match self.epsilon {
            Some(e) => UtilityShape::log(e)?,
            None => UtilityShape::power(self.beta)?,
        };
        Ok(Cell {
            weights: match self.weights {
                Weights::Compact => WeightScheme::Compact,
                Weights::Loose => WeightScheme::Loose,
            },
            fleet: self.servers,
            shape,
            probe: false,
        })
    }
}

struct Run {
    scenario: Scenario,
    out: PathBuf,
    seeds: Vec<u64>,
    optimizer: OptimizerConfig,
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let mut scenario = match &cli.common.scenario {
        Some(path) => Scenario::load(path).with_context(|| format!("loading {}", path.display()))?,
        None => Scenario::default(),
    };
    if let Some(jobs) = cli.common.jobs {
        if jobs == 0 {
            bail!("--jobs must be positive");
        }
        scenario.sim_jobs = jobs;
    }
    let ctx = Run {
        out: cli.common.out.clone().unwrap_or_else(|| scenario.output_dir.clone()),
        seeds: cli.common.seed.map_or_else(|| scenario.seeds.clone(), |s| vec![s]),
        optimizer: OptimizerConfig {
            parallelism: cli.common.parallel,
            epsilon_pricing: cli.common.epsilon_pricing,
        },
        scenario,
    };
    match cli.command {
        Command::QosCurve => qos_curve(&ctx),
        Command::Plan {
            servers,
            waits,
            prices,
            rates,
        } => plan(&ctx, servers, waits, prices, &rates),
        Command::Price(args) => price(&ctx, &args.cell()?),
        Command::Simulate(args) => simulate(&ctx, &args.cell()?),
        Command::Reproduce { no_simulation } => reproduce(&ctx, !no_simulation),
    }
}

fn qos_grid(model: &QueueModel) -> Vec<f64> {
    let mut grid: Vec<f64> = (0..=32).map(|i| i as f64 * 0.25).collect();
    if let QueueModel::Pareto(_) = model {
        grid[0] = 0.05;
    }
    grid
}

fn qos_curve(ctx: &Run) -> Result<()> {
    let curves = compute_curves(ctx)?;
    for (model, points) in &curves {
        println!("{} model", model.name());
        println!("{:>8} {:>12} {:>10}", "phi", "lambda_max", "rho_max%");
        for p in points {
            println!("{:>8.2} {:>12.6} {:>10.4}", p.phi, p.lambda_max, 100.0 * p.rho_max);
        }
        println!();
    }
    let path = ctx.out.join("qos_curve.csv");
    write_qos_csv(&path, &curves)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn compute_curves(ctx: &Run) -> Result<Vec<(QueueModel, Vec<QosPoint>)>> {
    ctx.scenario
        .crosscheck_models
        .iter()
        .map(|m| Ok((*m, run_qos_curve(m, &qos_grid(m))?)))
        .collect()
}

fn plan(ctx: &Run, servers: u64, waits: Vec<f64>, prices: Vec<f64>, rates: &[f64]) -> Result<()> {
    let menu = SlaMenu::priced(waits, prices)?;
    if rates.len() != menu.len() {
        bail!("{} rates for {} SLAs", rates.len(), menu.len());
    }
    let plan = plan_capacity(servers, rates, &menu, &ctx.scenario.model)?;
    println!("{:>4} {:>8} {:>10} {:>12} {:>12} {:>8} {:>8}", "sla", "phi", "price", "offered", "accepted", "servers", "rho%");
    for (l, rate) in rates.iter().enumerate() {
        println!(
            "{:>4} {:>8.2} {:>10.4} {:>12.4} {:>12.4} {:>8} {:>8.3}",
            l + 1,
            menu.waits()[l],
            menu.prices().unwrap_or_default()[l],
            rate,
            plan.accepted_rates[l],
            plan.servers[l],
            100.0 * plan.utilizations[l]
        );
    }
    println!("servers used {} of {}", plan.servers_used(), servers);
    println!("revenue per unit time {:.4}", plan.total_unit_revenue);
    Ok(())
}

fn print_record(r: &RunRecord) {
    let (shape, param) = qosprice::experiments::shape_label(&r.cell.shape);
    println!(
        "{} weights, {} servers, {shape} {param}{}",
        r.cell.weights.name(),
        r.cell.fleet,
        if r.cell.probe { " (probe)" } else { "" }
    );
    println!("  {:>4} {:>6} {:>10} {:>10} {:>10} {:>8}", "sla", "cut", "price", "offered", "accepted", "servers");
    for s in &r.slas {
        println!(
            "  {:>4} {:>6} {:>10.4} {:>10.3} {:>10.3} {:>8}",
            s.sla + 1,
            s.cut_user,
            s.price,
            s.offered_rate,
            s.accepted_rate,
            s.servers
        );
    }
    println!(
        "  revenue {:.2}  baseline {:.2} (price {:.2}, {} servers)  improvement {:.2}%  [{} candidates, {:.1}s]",
        r.revenue,
        r.baseline_revenue,
        r.baseline_price,
        r.baseline_servers,
        100.0 * r.improvement,
        r.evaluations,
        r.seconds
    );
}

fn price(ctx: &Run, cell: &Cell) -> Result<()> {
    let record = run_cell(&ctx.scenario, cell, &ctx.optimizer)?;
    print_record(&record);
    write_records(&ctx.out, std::slice::from_ref(&record))
}

fn write_records(out: &Path, records: &[RunRecord]) -> Result<()> {
    let solutions = out.join("solutions.csv");
    let revenue = out.join("revenue.csv");
    write_solutions_csv(&solutions, records)?;
    write_revenue_csv(&revenue, records)?;
    println!("wrote {} and {}", solutions.display(), revenue.display());
    Ok(())
}

fn simulate(ctx: &Run, cell: &Cell) -> Result<()> {
    let rows = run_simulation_crosscheck(&ctx.scenario, &ctx.seeds)?;
    println!(
        "{:>12} {:>12} {:>6} {:>10} {:>9} {:>17} {:>9} {:>17} {:>10} {:>19}",
        "model", "unit", "seed", "rate", "rho%", "sim rho%", "miss", "sim miss", "wait", "sim wait"
    );
    let opt = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |x| format!("{x:.4}"));
    for r in &rows {
        println!(
            "{:>12} {:>12} {:>6} {:>10.5} {:>9.4} {:>9.4} ±{:>6.4} {:>9} {:>9.4} ±{:>6.4} {:>10} {:>10.4} ±{:>7.4}",
            r.model,
            r.unit,
            r.seed,
            r.arrival_rate,
            100.0 * r.analytic_utilization,
            100.0 * r.simulated_utilization,
            100.0 * r.utilization_half_width,
            opt(r.analytic_miss),
            r.simulated_miss,
            r.miss_half_width,
            opt(r.analytic_wait),
            r.simulated_wait,
            r.wait_half_width
        );
    }
    let path = ctx.out.join("crosscheck.csv");
    write_crosscheck_csv(&path, &rows)?;
    println!("wrote {}", path.display());

    let mut plan_rows = Vec::new();
    for &seed in &ctx.seeds {
        plan_rows.extend(run_plan_check(
            &ctx.scenario,
            cell,
            &ctx.optimizer,
            seed,
            Horizon::Jobs(ctx.scenario.sim_jobs),
        )?);
    }
    for r in &plan_rows {
        println!(
            "plan sla {} seed {}: {} servers, rate {:.2}, sim rho {:.4}%, sim miss {:.4} ±{:.4}, revenue analytic {:.2} realized {:.2}",
            r.sla,
            r.seed,
            r.servers,
            r.accepted_rate,
            100.0 * r.simulated_utilization,
            r.simulated_miss,
            r.miss_half_width,
            r.analytic_revenue,
            r.realized_revenue
        );
    }
    let path = ctx.out.join("plan_check.csv");
    write_plan_check_csv(&path, &plan_rows)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn reproduce(ctx: &Run, with_simulation: bool) -> Result<()> {
    let curves = compute_curves(ctx)?;
    write_qos_csv(&ctx.out.join("qos_curve.csv"), &curves)?;
    let records = run_optimal_solutions(&ctx.scenario, &ctx.optimizer)?;
    for r in &records {
        print_record(r);
    }
    write_records(&ctx.out, &records)?;
    if with_simulation {
        let first = ctx.scenario.cells().first().copied();
        if let Some(cell) = first {
            simulate(ctx, &cell)?;
        }
    }
    Ok(())
}
