//! Small statistical helpers for the Monte Carlo checks.

use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Pearson chi-square test of `counts` against the uniform distribution.
/// Returns `(statistic, p_value)`.
pub fn chi_square_uniform(counts: &[usize]) -> (f64, f64) {
    let total: usize = counts.iter().sum();
    let expected = vec![total as f64 / counts.len() as f64; counts.len()];
    chi_square(counts, &expected)
}

/// Pearson chi-square test of observed `counts` against `expected` frequencies.
pub fn chi_square(counts: &[usize], expected: &[f64]) -> (f64, f64) {
    assert_eq!(counts.len(), expected.len());
    assert!(counts.len() >= 2, "need at least two categories");
    let stat: f64 = counts
        .iter()
        .zip(expected)
        .map(|(&o, &e)| {
            let diff = o as f64 - e;
            diff * diff / e
        })
        .sum();
    let dist = ChiSquared::new((counts.len() - 1) as f64).expect("positive degrees of freedom");
    (stat, dist.sf(stat))
}

/// Binomial standard error `sqrt(p(1−p)/n)`.
pub fn binomial_std_error(p: f64, trials: u64) -> f64 {
    (p * (1.0 - p) / trials as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_frequencies() {
        let (stat, p) = chi_square(&[2, 2, 2, 3], &[2.0, 2.0, 2.0, 3.0]);
        assert_eq!(stat, 0.0);
        assert!((p - 1.0).abs() < 1e-12);
    }

    #[test]
    fn known_value() {
        // x2 = 1/2 + 1/3 + 1/4 + 9 = 10.0833..., df = 3
        let (stat, p) = chi_square(&[1, 2, 3, 4], &[2.0, 3.0, 4.0, 1.0]);
        assert!((stat - 10.083333333333334).abs() < 1e-12);
        assert!((p - 0.017_870_892_893_625_56).abs() < 1e-8);
    }

    #[test]
    fn skewed_counts_reject() {
        let (_, p) = chi_square_uniform(&[900, 100]);
        assert!(p < 1e-10);
    }

    #[test]
    fn std_error() {
        assert_eq!(binomial_std_error(0.5, 100), 0.05);
        assert_eq!(binomial_std_error(1.0, 100), 0.0);
    }
}
