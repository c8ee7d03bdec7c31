//! Upper incomplete gamma function for real (possibly negative) order.

use statrs::function::gamma::gamma;

use crate::error::{Error, Result};

const MAX_ITER: usize = 2000;
const EPS: f64 = 1e-16;
const TINY: f64 = 1e-300;
const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Γ(s, z) = ∫_z^∞ x^{s-1} e^{-x} dx for real `s` and `z > 0`.
///
/// Positive orders use the lower series (Γ(s) − γ(s, z)) when `z < s + 1`
/// and the Legendre continued fraction otherwise. Non-positive orders use
/// the continued fraction for `z >= 1`; below that the value is reached by
/// downward recurrence
///
/// ```text
/// Γ(s, z) = (Γ(s + 1, z) − z^s e^{−z}) / s
/// ```
///
/// from a base order in `[0, 1)`, with `Γ(0, z) = E₁(z)` for integer `s`.
pub fn upper_incomplete_gamma(s: f64, z: f64) -> Result<f64> {
    if !(z > 0.0) || !z.is_finite() {
        return Err(Error::domain("z", z, "z > 0"));
    }
    if !s.is_finite() {
        return Err(Error::domain("s", s, "finite order"));
    }
    if s > 0.0 {
        if z < s + 1.0 {
            Ok(gamma(s) - lower_series(s, z))
        } else {
            Ok(continued_fraction(s, z))
        }
    } else if z >= 1.0 {
        Ok(continued_fraction(s, z))
    } else {
        Ok(downward_recurrence(s, z))
    }
}

fn downward_recurrence(s: f64, z: f64) -> f64 {
    let base = s - s.floor();
    let mut order = base;
    let mut value = if base == 0.0 {
        exp_integral_e1(z)
    } else {
        gamma(base) - lower_series(base, z)
    };
    let emz = (-z).exp();
    let steps = (base - s).round() as i64;
    for _ in 0..steps {
        order -= 1.0;
        value = (value - z.powf(order) * emz) / order;
    }
    value
}

/// γ(a, z) = z^a e^{−z} Σ z^n / (a (a+1) ⋯ (a+n)), for a > 0.
fn lower_series(a: f64, z: f64) -> f64 {
    let mut term = 1.0 / a;
    let mut sum = term;
    let mut ap = a;
    for _ in 0..MAX_ITER {
        ap += 1.0;
        term *= z / ap;
        sum += term;
        if term.abs() < sum.abs() * EPS {
            break;
        }
    }
    sum * (a * z.ln() - z).exp()
}

/// Modified Lentz evaluation of
/// Γ(s, z) = e^{−z} z^s / (z + 1 − s − 1·(1−s)/(z + 3 − s − 2·(2−s)/(⋯))).
fn continued_fraction(s: f64, z: f64) -> f64 {
    let mut b = z + 1.0 - s;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for n in 1..=MAX_ITER {
        let an = -(n as f64) * (n as f64 - s);
        b += 2.0;
        d = an * d + b;
        if d.abs() < TINY {
            d = TINY;
        }
        c = b + an / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < EPS {
            break;
        }
    }
    (s * z.ln() - z).exp() * h
}

/// E₁(z) by its power series, used for z < 1.
fn exp_integral_e1(z: f64) -> f64 {
    let mut sum = 0.0;
    let mut term = 1.0;
    for k in 1..MAX_ITER {
        let kf = k as f64;
        term *= -z / kf;
        let contrib = term / kf;
        sum += contrib;
        if contrib.abs() < EPS * sum.abs() {
            break;
        }
    }
    -EULER_GAMMA - z.ln() - sum
}
