//! Batch-means confidence intervals and a one-sample Kolmogorov-Smirnov test.

use statrs::distribution::{ContinuousCDF, StudentsT};

/// Mean and 95% half-width from independent batch values.
pub fn batch_mean_interval(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (0.0, 0.0);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, f64::INFINITY);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let t = StudentsT::new(0.0, 1.0, (n - 1) as f64)
        .expect("positive degrees of freedom")
        .inverse_cdf(0.975);
    (mean, t * (var / n as f64).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KsOutcome {
    pub statistic: f64,
    pub p_value: f64,
    pub samples: usize,
}

/// KS test of `samples` against Exp(`rate`).
pub fn ks_exponential(samples: &[f64], rate: f64) -> KsOutcome {
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    let nf = n as f64;
    let mut d = 0.0f64;
    for (i, &x) in xs.iter().enumerate() {
        let cdf = -(-rate * x).exp_m1();
        d = d.max((i + 1) as f64 / nf - cdf).max(cdf - i as f64 / nf);
    }
    let root = nf.sqrt();
    KsOutcome {
        statistic: d,
        p_value: kolmogorov_survival((root + 0.12 + 0.11 / root) * d),
        samples: n,
    }
}

/// P(K > x) for the Kolmogorov distribution.
pub fn kolmogorov_survival(x: f64) -> f64 {
    if x < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let k = k as f64;
        let term = (-2.0 * k * k * x * x).exp();
        sum += if k as u32 % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn interval_of_constant_batches() {
        let (m, h) = batch_mean_interval(&[2.0; 20]);
        assert_eq!(m, 2.0);
        assert_eq!(h, 0.0);
        assert_eq!(batch_mean_interval(&[]), (0.0, 0.0));
    }

    #[test]
    fn interval_matches_t_table() {
        let values: Vec<f64> = (0..20).map(|i| i as f64).collect();
        let (m, h) = batch_mean_interval(&values);
        assert!((m - 9.5).abs() < 1e-12);
        let sd = (665.0f64 / 19.0).sqrt();
        assert!((h - 2.093024 * sd / 20f64.sqrt()).abs() < 1e-5);
    }

    #[test]
    fn kolmogorov_tail_values() {
        assert!((kolmogorov_survival(1.36) - 0.0494).abs() < 5e-4);
        assert!((kolmogorov_survival(1.63) - 0.0098).abs() < 5e-4);
        assert_eq!(kolmogorov_survival(0.0), 1.0);
    }

    #[test]
    fn ks_accepts_exponential_and_rejects_uniform() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let exp: Vec<f64> = (0..5000).map(|_| -rng.random::<f64>().ln() / 2.0).collect();
        assert!(ks_exponential(&exp, 2.0).p_value > 0.01);
        let uni: Vec<f64> = (0..5000).map(|_| rng.random::<f64>()).collect();
        assert!(ks_exponential(&uni, 2.0).p_value < 1e-6);
    }
}
