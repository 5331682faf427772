//! Goodness-of-fit and summary statistics for simulation output.

use num_traits::{Float, FromPrimitive};
use statrs::distribution::{ChiSquared, ContinuousCDF};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChiSquareTest {
    pub statistic: f64,
    pub degrees_of_freedom: usize,
    pub p_value: f64,
}

impl ChiSquareTest {
    /// Fails to reject uniformity at significance `alpha`.
    pub fn passes(&self, alpha: f64) -> bool {
        self.p_value >= alpha
    }
}

/// Pearson's statistic `Σ (o - e)² / e`.
pub fn chi_square_statistic(observed: &[u64], expected: &[f64]) -> f64 {
    assert_eq!(observed.len(), expected.len());
    observed
        .iter()
        .zip(expected)
        .map(|(&o, &e)| {
            let d = o as f64 - e;
            d * d / e
        })
        .sum()
}

/// Tests `observed` counts against the uniform distribution over its cells.
pub fn chi_square_uniform(observed: &[u64]) -> ChiSquareTest {
    assert!(observed.len() >= 2, "need at least two cells");
    let total: u64 = observed.iter().sum();
    assert!(total > 0, "no observations");
    let e = total as f64 / observed.len() as f64;
    let expected = vec![e; observed.len()];
    let statistic = chi_square_statistic(observed, &expected);
    let dof = observed.len() - 1;
    let dist = ChiSquared::new(dof as f64).expect("positive degrees of freedom");
    ChiSquareTest { statistic, degrees_of_freedom: dof, p_value: dist.sf(statistic) }
}

pub fn mean<F: Float + FromPrimitive>(xs: &[F]) -> Option<F> {
    if xs.is_empty() {
        return None;
    }
    let sum = xs.iter().fold(F::zero(), |a, &b| a + b);
    Some(sum / F::from_usize(xs.len())?)
}

/// `|actual / reference - 1|`.
pub fn relative_deviation<F: Float>(actual: F, reference: F) -> F {
    (actual / reference - F::one()).abs()
}

/// Mean duration of a race to the first success among `racers` independent
/// geometric trials with success probability `p`: `1 / (1 - (1 - p)^racers)`.
pub fn geometric_min_mean<F: Float>(p: F, racers: i32) -> F {
    F::one() / (F::one() - (F::one() - p).powi(racers))
}
