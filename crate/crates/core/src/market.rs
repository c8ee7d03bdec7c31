//! Users, utility curves, the SLA menu and surplus-maximizing SLA choice.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Surplus differences below this fraction of the menu's utility scale are
/// treated as ties. Breakpoint prices put the marginal user exactly on a tie,
/// which floating point cannot reproduce bit for bit.
pub const TIE_TOLERANCE: f64 = 1e-9;

/// Population-wide latency sensitivity 𝒫(φ): decreasing, with a marginal
/// loss that shrinks as φ grows.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum UtilityShape {
    /// 𝒫(φ) = (1−β)⁻¹ (1/(1+φ))^{1−β}
    Power { beta: f64 },
    /// 𝒫(φ) = ln(1 + 1/(ε+φ))
    Log { epsilon: f64 },
}

impl UtilityShape {
    pub fn power(beta: f64) -> Result<Self> {
        if !(beta > 0.0 && beta < 1.0) {
            return Err(Error::domain("beta", beta, "0 < beta < 1"));
        }
        Ok(UtilityShape::Power { beta })
    }

    pub fn log(epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0) || !epsilon.is_finite() {
            return Err(Error::domain("epsilon", epsilon, "epsilon > 0"));
        }
        Ok(UtilityShape::Log { epsilon })
    }

    pub fn value(&self, phi: f64) -> f64 {
        match *self {
            UtilityShape::Power { beta } => (1.0 + phi).powf(beta - 1.0) / (1.0 - beta),
            UtilityShape::Log { epsilon } => (1.0 / (epsilon + phi)).ln_1p(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct User {
    pub weight: f64,
    pub arrival_rate: f64,
}

impl User {
    pub fn new(weight: f64, arrival_rate: f64) -> Result<Self> {
        if !(weight > 0.0) || !weight.is_finite() {
            return Err(Error::domain("weight", weight, "weight > 0"));
        }
        if !(arrival_rate > 0.0) || !arrival_rate.is_finite() {
            return Err(Error::domain("arrival_rate", arrival_rate, "arrival_rate > 0"));
        }
        Ok(Self {
            weight,
            arrival_rate,
        })
    }
}

/// Users sorted by strictly decreasing weight, sharing one utility shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserPopulation {
    users: Vec<User>,
    shape: UtilityShape,
}

impl UserPopulation {
    pub fn new(users: Vec<User>, shape: UtilityShape) -> Result<Self> {
        for u in &users {
            User::new(u.weight, u.arrival_rate)?;
        }
        if let Some(w) = users.windows(2).find(|w| w[0].weight <= w[1].weight) {
            return Err(Error::InvalidPopulation(format!(
                "weights must be strictly decreasing, found {} then {}",
                w[0].weight, w[1].weight
            )));
        }
        Ok(Self { users, shape })
    }

    pub fn from_weights(weights: &[f64], arrival_rate: f64, shape: UtilityShape) -> Result<Self> {
        let users = weights
            .iter()
            .map(|&w| User::new(w, arrival_rate))
            .collect::<Result<Vec<_>>>()?;
        Self::new(users, shape)
    }

    pub fn users(&self) -> &[User] {
        &self.users
    }

    pub fn shape(&self) -> UtilityShape {
        self.shape
    }

    pub fn len(&self) -> usize {
        self.users.len()
    }

    pub fn is_empty(&self) -> bool {
        self.users.is_empty()
    }

    pub fn with_shape(&self, shape: UtilityShape) -> Self {
        Self {
            users: self.users.clone(),
            shape,
        }
    }
}

/// Weights 100, 99, … for `users` users.
pub fn compact_weights(users: usize) -> Vec<f64> {
    (0..users).map(|i| 100.0 - i as f64).collect()
}

/// Weights where user `K+1−i` has weight `1 + (i−1)·0.4`.
pub fn loose_weights(users: usize) -> Vec<f64> {
    (0..users).map(|i| 1.0 + (users - 1 - i) as f64 * 0.4).collect()
}

/// Waiting times φ₁ < … < φ_L, optionally with prices θ₁ > … > θ_L > 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlaMenu {
    waits: Vec<f64>,
    prices: Option<Vec<f64>>,
}

impl SlaMenu {
    pub fn new(waits: Vec<f64>) -> Result<Self> {
        if let Some(&first) = waits.first() {
            if !(first >= 0.0) {
                return Err(Error::InvalidMenu(format!("first wait {first} is negative")));
            }
        }
        if waits.iter().any(|w| !w.is_finite()) {
            return Err(Error::InvalidMenu("waits must be finite".into()));
        }
        if waits.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidMenu(format!("waits must be strictly increasing: {waits:?}")));
        }
        Ok(Self { waits, prices: None })
    }

    pub fn priced(waits: Vec<f64>, prices: Vec<f64>) -> Result<Self> {
        Self::new(waits)?.with_prices(prices)
    }

    pub fn with_prices(mut self, prices: Vec<f64>) -> Result<Self> {
        if prices.len() != self.waits.len() {
            return Err(Error::InvalidMenu(format!(
                "{} prices for {} waits",
                prices.len(),
                self.waits.len()
            )));
        }
        if !prices_are_ordered(&prices) {
            return Err(Error::InfeasiblePrices(prices));
        }
        self.prices = Some(prices);
        Ok(self)
    }

    pub fn waits(&self) -> &[f64] {
        &self.waits
    }

    pub fn prices(&self) -> Option<&[f64]> {
        self.prices.as_deref()
    }

    pub fn len(&self) -> usize {
        self.waits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.waits.is_empty()
    }

    /// The unpriced sub-menu of the given (ascending) SLA indices.
    pub fn restrict(&self, offered: &[usize]) -> Result<Self> {
        Self::new(offered.iter().map(|&l| self.waits[l]).collect())
    }

    fn require_prices(&self) -> Result<&[f64]> {
        self.prices()
            .ok_or_else(|| Error::InvalidMenu("menu has no prices".into()))
    }
}

/// θ₁ > θ₂ > … > θ_L > 0.
pub fn prices_are_ordered(prices: &[f64]) -> bool {
    prices.iter().all(|p| *p > 0.0 && p.is_finite()) && prices.windows(2).all(|w| w[0] > w[1])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Choice {
    Sla(usize),
    OptOut,
}

impl Choice {
    /// Position in the order where opting out sorts after every SLA.
    pub fn rank(&self, menu_len: usize) -> usize {
        match *self {
            Choice::Sla(l) => l,
            Choice::OptOut => menu_len,
        }
    }
}

/// 𝒰_i(φ) = α_i·𝒫(φ).
pub fn unit_utility(user: &User, shape: UtilityShape, phi: f64) -> Result<f64> {
    if !(phi >= 0.0) {
        return Err(Error::domain("phi", phi, "phi >= 0"));
    }
    Ok(user.weight * shape.value(phi))
}

/// Surplus-maximizing SLA for one user; ties go to the smaller index and a
/// zero surplus still participates.
pub fn choose_sla(user: &User, shape: UtilityShape, menu: &SlaMenu) -> Result<Choice> {
    let prices = menu.require_prices()?;
    let utilities = menu
        .waits()
        .iter()
        .map(|&phi| unit_utility(user, shape, phi))
        .collect::<Result<Vec<_>>>()?;
    Ok(choose_from_utilities(&utilities, prices))
}

/// [`choose_sla`] on precomputed utilities `𝒰(φ_l)` and prices `θ_l`.
pub fn choose_from_utilities(utilities: &[f64], prices: &[f64]) -> Choice {
    debug_assert_eq!(utilities.len(), prices.len());
    choose_by(prices.len(), |l| utilities[l], |l| prices[l])
}

/// Choice kernel over `len` SLAs given accessors for utility and price.
pub fn choose_by(len: usize, utility: impl Fn(usize) -> f64, price: impl Fn(usize) -> f64) -> Choice {
    let scale = (0..len).fold(0.0f64, |acc, l| acc.max(utility(l).abs()).max(price(l).abs()));
    let tol = TIE_TOLERANCE * scale;
    let mut best: Option<(usize, f64)> = None;
    for l in 0..len {
        let surplus = utility(l) - price(l);
        match best {
            Some((_, s)) if surplus <= s + tol => {}
            _ => best = Some((l, surplus)),
        }
    }
    match best {
        Some((l, s)) if s >= -tol => Choice::Sla(l),
        _ => Choice::OptOut,
    }
}

/// Λ_l = Σ h_i over users choosing SLA l.
pub fn aggregate_arrivals(pop: &UserPopulation, menu: &SlaMenu) -> Result<Vec<f64>> {
    let mut rates = vec![0.0; menu.len()];
    for user in pop.users() {
        if let Choice::Sla(l) = choose_sla(user, pop.shape(), menu)? {
            rates[l] += user.arrival_rate;
        }
    }
    Ok(rates)
}
