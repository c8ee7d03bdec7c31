use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("{name} = {value} is outside its domain ({expected})")]
    Domain {
        name: &'static str,
        value: f64,
        expected: &'static str,
    },

    #[error("waiting-time bound {phi} is not attainable (attainable range is [{min}, {max}])")]
    InfeasibleWait { phi: f64, min: f64, max: f64 },

    #[error("root bracket [{lo}, {hi}] does not straddle the target")]
    Bracket { lo: f64, hi: f64 },

    #[error("invalid SLA menu: {0}")]
    InvalidMenu(String),

    #[error("invalid user population: {0}")]
    InvalidPopulation(String),

    #[error("price vector violates the strictly decreasing positive ordering: {0:?}")]
    InfeasiblePrices(Vec<f64>),

    #[error("invalid simulation config: {0}")]
    Config(String),

    #[error("per-server arrival rate {rate} is not below the stability bound {bound}")]
    Unstable { rate: f64, bound: f64 },
}

impl Error {
    pub(crate) fn domain(name: &'static str, value: f64, expected: &'static str) -> Self {
        Error::Domain {
            name,
            value,
            expected,
        }
    }
}
