//! Revenue-maximizing posted prices.
//!
//! Users choose contiguous blocks of SLAs in weight order, so a candidate
//! price vector is determined by which SLAs are offered and where the user
//! list is cut. Every candidate is priced at its breakpoint supremum and
//! evaluated through the capacity planner.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market::{choose_by, prices_are_ordered, Choice, SlaMenu, UserPopulation};
use crate::planner::{plan_with_caps, CapacityPlan};
use crate::queueing::QueueModel;

/// Relative undercut used by the strict-inequality pricing variant.
pub const UNDERCUT: f64 = 1e-6;

/// Offered SLAs and the last user (1-based) of each SLA's block.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Breakpoints {
    offered: Vec<usize>,
    cuts: Vec<usize>,
}

impl Breakpoints {
    pub fn new(offered: Vec<usize>, cuts: Vec<usize>, users: usize) -> Result<Self> {
        if offered.is_empty() {
            return Err(Error::InvalidMenu("no SLA offered".into()));
        }
        if offered.len() != cuts.len() {
            return Err(Error::InvalidMenu(format!(
                "{} offered SLAs but {} cuts",
                offered.len(),
                cuts.len()
            )));
        }
        if offered.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidMenu(format!("offered SLAs must ascend: {offered:?}")));
        }
        if cuts[0] < 1 || cuts.windows(2).any(|w| w[0] >= w[1]) || cuts[cuts.len() - 1] > users {
            return Err(Error::InvalidMenu(format!(
                "cuts must satisfy 1 <= i1 < ... <= {users}: {cuts:?}"
            )));
        }
        Ok(Self { offered, cuts })
    }

    pub fn offered(&self) -> &[usize] {
        &self.offered
    }

    pub fn cuts(&self) -> &[usize] {
        &self.cuts
    }

    /// Offered-menu position that user `user` (0-based) should choose.
    pub fn block_of(&self, user: usize) -> Option<usize> {
        self.cuts.iter().position(|&c| user < c)
    }
}

fn chain_prices(cuts: &[usize], offered: &[usize], utility: impl Fn(usize, usize) -> f64, prices: &mut Vec<f64>) {
    prices.clear();
    prices.resize(cuts.len(), 0.0);
    let last = cuts.len() - 1;
    prices[last] = utility(cuts[last] - 1, offered[last]);
    for l in (0..last).rev() {
        let user = cuts[l] - 1;
        prices[l] = utility(user, offered[l]) - utility(user, offered[l + 1]) + prices[l + 1];
    }
}

/// Supremum prices that make each cut user indifferent at its block edge.
/// `waits` lists the wait of each offered SLA.
pub fn breakpoint_prices(bp: &Breakpoints, pop: &UserPopulation, waits: &[f64]) -> Result<Vec<f64>> {
    if waits.len() != bp.cuts.len() {
        return Err(Error::InvalidMenu(format!(
            "{} waits for {} offered SLAs",
            waits.len(),
            bp.cuts.len()
        )));
    }
    if bp.cuts[bp.cuts.len() - 1] > pop.len() {
        return Err(Error::InvalidPopulation(format!(
            "cut {} beyond {} users",
            bp.cuts[bp.cuts.len() - 1],
            pop.len()
        )));
    }
    let shape = pop.shape();
    let positions: Vec<usize> = (0..waits.len()).collect();
    let mut prices = Vec::new();
    chain_prices(
        &bp.cuts,
        &positions,
        |i, l| pop.users()[i].weight * shape.value(waits[l]),
        &mut prices,
    );
    if !prices_are_ordered(&prices) {
        return Err(Error::InfeasiblePrices(prices));
    }
    Ok(prices)
}

/// Breakpoint prices shaded down by [`UNDERCUT`] so every intended choice is
/// strict.
pub fn undercut_prices(prices: &[f64]) -> Vec<f64> {
    prices.iter().map(|p| p * (1.0 - UNDERCUT)).collect()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    /// Worker threads; 0 uses every core and 1 runs on the calling thread.
    pub parallelism: usize,
    pub epsilon_pricing: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PricingSolution {
    /// Offered SLA indices into the full menu, ascending.
    pub offered: Vec<usize>,
    /// Last user (1-based) of each offered SLA's block.
    pub cuts: Vec<usize>,
    /// Price per offered SLA.
    pub prices: Vec<f64>,
    /// Each user's choice, indexed into the full menu.
    pub choices: Vec<Choice>,
    /// Plan over the offered SLAs, in `offered` order.
    pub plan: CapacityPlan,
    pub total_unit_revenue: f64,
    /// Candidate price vectors examined.
    pub evaluations: u64,
}

impl PricingSolution {
    fn empty(users: usize) -> Self {
        Self {
            offered: Vec::new(),
            cuts: Vec::new(),
            prices: Vec::new(),
            choices: vec![Choice::OptOut; users],
            plan: CapacityPlan::empty(0),
            total_unit_revenue: 0.0,
            evaluations: 0,
        }
    }

    /// The priced menu of offered SLAs.
    pub fn menu(&self, waits: &[f64]) -> Result<SlaMenu> {
        SlaMenu::priced(self.offered.iter().map(|&l| waits[l]).collect(), self.prices.clone())
    }
}

struct Tables<'a> {
    fleet: u64,
    users: usize,
    utility: Vec<Vec<f64>>,
    rate_prefix: Vec<f64>,
    caps: Vec<f64>,
    model: &'a QueueModel,
    undercut: bool,
}

#[derive(Debug, Clone)]
struct Candidate {
    revenue: f64,
    offered: Vec<usize>,
    cuts: Vec<usize>,
}

impl Candidate {
    fn beats(&self, other: &Candidate) -> bool {
        other
            .revenue
            .total_cmp(&self.revenue)
            .then(self.offered.len().cmp(&other.offered.len()))
            .then_with(|| self.cuts.cmp(&other.cuts))
            .then_with(|| self.offered.cmp(&other.offered))
            .is_lt()
    }
}

fn better(a: Option<Candidate>, b: Option<Candidate>) -> Option<Candidate> {
    match (a, b) {
        (Some(a), Some(b)) => Some(if b.beats(&a) { b } else { a }),
        (a, None) => a,
        (None, b) => b,
    }
}

struct Scratch {
    prices: Vec<f64>,
    rates: Vec<f64>,
    caps: Vec<f64>,
}

impl Tables<'_> {
    fn prices_into(&self, offered: &[usize], cuts: &[usize], prices: &mut Vec<f64>) {
        chain_prices(cuts, offered, |i, l| self.utility[i][l], prices);
        if self.undercut {
            for p in prices.iter_mut() {
                *p *= 1.0 - UNDERCUT;
            }
        }
    }

    fn choice(&self, user: usize, offered: &[usize], prices: &[f64]) -> Choice {
        let row = &self.utility[user];
        choose_by(offered.len(), |l| row[offered[l]], |l| prices[l])
    }

    fn consistent(&self, offered: &[usize], cuts: &[usize], prices: &[f64]) -> bool {
        let mut block = 0;
        for user in 0..self.users {
            while block < cuts.len() && user >= cuts[block] {
                block += 1;
            }
            let want = if block < cuts.len() { Choice::Sla(block) } else { Choice::OptOut };
            if self.choice(user, offered, prices) != want {
                return false;
            }
        }
        true
    }

    /// Revenue of one candidate, or `None` when the prices do not induce
    /// the intended blocks.
    fn evaluate(&self, offered: &[usize], cuts: &[usize], s: &mut Scratch) -> Result<Option<f64>> {
        self.prices_into(offered, cuts, &mut s.prices);
        if !prices_are_ordered(&s.prices) || !self.consistent(offered, cuts, &s.prices) {
            return Ok(None);
        }
        s.rates.clear();
        s.caps.clear();
        let mut start = 0;
        for (&c, &l) in cuts.iter().zip(offered) {
            s.rates.push(self.rate_prefix[c] - self.rate_prefix[start]);
            s.caps.push(self.caps[l]);
            start = c;
        }
        let plan = plan_with_caps(self.fleet, &s.rates, &s.caps, &s.prices, self.model)?;
        Ok(Some(plan.total_unit_revenue))
    }

    /// Best candidate among all cut vectors for `offered` whose first cut is
    /// `first`, with the number of candidates examined.
    fn search_from(&self, offered: &[usize], first: usize) -> Result<(Option<Candidate>, u64)> {
        let k = offered.len();
        let mut cuts: Vec<usize> = (0..k).map(|j| first + j).collect();
        if cuts[k - 1] > self.users {
            return Ok((None, 0));
        }
        let mut scratch = Scratch {
            prices: Vec::with_capacity(k),
            rates: Vec::with_capacity(k),
            caps: Vec::with_capacity(k),
        };
        let mut best: Option<Candidate> = None;
        let mut count = 0u64;
        loop {
            count += 1;
            if let Some(revenue) = self.evaluate(offered, &cuts, &mut scratch)? {
                let cand = Candidate {
                    revenue,
                    offered: offered.to_vec(),
                    cuts: cuts.clone(),
                };
                if best.as_ref().is_none_or(|b| cand.beats(b)) {
                    best = Some(cand);
                }
            }
            if !next_tail(&mut cuts, self.users) {
                break;
            }
        }
        Ok((best, count))
    }
}

/// Advances cuts[1..] to the next increasing combination bounded by `max`,
/// keeping cuts[0] fixed.
fn next_tail(cuts: &mut [usize], max: usize) -> bool {
    let k = cuts.len();
    let mut j = k;
    while j > 1 {
        j -= 1;
        if cuts[j] < max - (k - 1 - j) {
            cuts[j] += 1;
            for t in j + 1..k {
                cuts[t] = cuts[t - 1] + 1;
            }
            return true;
        }
    }
    false
}

fn nonempty_subsets(slas: usize) -> Vec<Vec<usize>> {
    (1u64..(1 << slas))
        .map(|mask| (0..slas).filter(|l| mask >> l & 1 == 1).collect())
        .collect()
}

/// Exhaustive breakpoint search over every nonempty SLA subset.
pub fn optimize_prices(
    fleet: u64,
    pop: &UserPopulation,
    waits: &[f64],
    model: &QueueModel,
    config: &OptimizerConfig,
) -> Result<PricingSolution> {
    SlaMenu::new(waits.to_vec())?;
    if waits.len() >= 63 {
        return Err(Error::InvalidMenu(format!("{} SLAs is too many to enumerate", waits.len())));
    }
    let users = pop.len();
    if fleet == 0 || users == 0 || waits.is_empty() {
        return Ok(PricingSolution::empty(users));
    }
    let shape = pop.shape();
    let tables = Tables {
        fleet,
        users,
        utility: pop
            .users()
            .iter()
            .map(|u| waits.iter().map(|&phi| u.weight * shape.value(phi)).collect())
            .collect(),
        rate_prefix: std::iter::once(0.0)
            .chain(pop.users().iter().scan(0.0, |acc, u| {
                *acc += u.arrival_rate;
                Some(*acc)
            }))
            .collect(),
        caps: model.caps(waits)?,
        model,
        undercut: config.epsilon_pricing,
    };

    let tasks: Vec<(Vec<usize>, usize)> = nonempty_subsets(waits.len())
        .into_iter()
        .flat_map(|s| {
            let k = s.len();
            (1..=users.saturating_sub(k - 1)).map(move |first| (s.clone(), first))
        })
        .collect();

    let run = |task: &(Vec<usize>, usize)| tables.search_from(&task.0, task.1);
    let reduce = |a: Result<(Option<Candidate>, u64)>, b: Result<(Option<Candidate>, u64)>| {
        let (ca, na) = a?;
        let (cb, nb) = b?;
        Ok((better(ca, cb), na + nb))
    };
    let identity = || Ok((None, 0));
    let (best, evaluations) = match config.parallelism {
        1 => tasks.iter().map(run).fold(identity(), reduce)?,
        0 => tasks.par_iter().map(run).reduce(identity, reduce)?,
        n => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Config(e.to_string()))?
            .install(|| tasks.par_iter().map(run).reduce(identity, reduce))?,
    };

    let Some(best) = best else {
        let mut empty = PricingSolution::empty(users);
        empty.evaluations = evaluations;
        return Ok(empty);
    };
    let mut prices = Vec::new();
    tables.prices_into(&best.offered, &best.cuts, &mut prices);
    let choices = (0..users)
        .map(|i| match tables.choice(i, &best.offered, &prices) {
            Choice::Sla(p) => Choice::Sla(best.offered[p]),
            Choice::OptOut => Choice::OptOut,
        })
        .collect();
    let mut start = 0;
    let mut rates = Vec::new();
    for &c in &best.cuts {
        rates.push(tables.rate_prefix[c] - tables.rate_prefix[start]);
        start = c;
    }
    let caps: Vec<f64> = best.offered.iter().map(|&l| tables.caps[l]).collect();
    let plan = plan_with_caps(fleet, &rates, &caps, &prices, model)?;
    Ok(PricingSolution {
        total_unit_revenue: plan.total_unit_revenue,
        offered: best.offered,
        cuts: best.cuts,
        prices,
        choices,
        plan,
        evaluations,
    })
}

/// Number of candidates the exhaustive search examines: Σ_S C(K, |S|).
pub fn candidate_count(users: usize, slas: usize) -> u64 {
    fn choose(n: u64, k: u64) -> u64 {
        if k > n {
            return 0;
        }
        (0..k).fold(1u64, |acc, j| acc * (n - j) / (j + 1))
    }
    (1..=slas as u64)
        .map(|k| choose(slas as u64, k) * choose(users as u64, k))
        .sum()
}
