use rand::seq::SliceRandom;
use rand::Rng;

use super::APReport;
use crate::error::{Error, Result};

/// Which randomized differences count as at least as extreme as the observed one.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum Sidedness {
    /// `|d*| >= |d|`.
    #[default]
    TwoSided,
    /// `d* >= d`: evidence that the first method is better.
    Greater,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum PermutationScheme {
    /// Pool both AP lists and reassign values to the two methods at random.
    #[default]
    Pooled,
    /// Randomly swap the two methods' APs query by query (equal-length lists).
    Paired,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PermutationOptions {
    pub permutations: u64,
    pub sided: Sidedness,
    pub scheme: PermutationScheme,
    /// Report `(count + 1) / (k + 1)` instead of `count / k`.
    pub add_one: bool,
}

impl PermutationOptions {
    pub fn new(permutations: u64) -> Self {
        Self {
            permutations,
            sided: Sidedness::default(),
            scheme: PermutationScheme::default(),
            add_one: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignificanceResult {
    /// `mean(a) - mean(b)`.
    pub observed: f64,
    pub permutations: u64,
    pub p_value: f64,
    pub std_error: f64,
    pub sided: Sidedness,
    pub scheme: PermutationScheme,
}

/// Standard deviation of a Monte Carlo p-value estimate: `sqrt(p (1 - p) / k)`.
pub fn standard_error(p: f64, k: u64) -> f64 {
    (p * (1.0 - p) / k as f64).sqrt()
}

/// Permutations needed so that the p-value standard deviation stays below
/// `s` whatever the true p: `ceil(1 / (4 s^2))`.
pub fn permutations_needed(s: f64) -> Result<u64> {
    if s.is_nan() || s <= 0.0 || !s.is_finite() {
        return Err(Error::InvalidParameter(format!("target deviation must be > 0, got {s}")));
    }
    let k = 1.0 / (4.0 * s * s);
    let nearest = k.round();
    // 0.001 squared is not exact in binary; do not let that add a permutation.
    let k = if (k - nearest).abs() <= 1e-9 * nearest { nearest } else { k.ceil() };
    Ok((k as u64).max(1))
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

pub fn permutation_test<R: Rng + ?Sized>(
    a: &[f64],
    b: &[f64],
    options: PermutationOptions,
    rng: &mut R,
) -> Result<SignificanceResult> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyInput("AP list"));
    }
    if options.permutations == 0 {
        return Err(Error::InvalidParameter("at least one permutation is required".into()));
    }
    if options.scheme == PermutationScheme::Paired && a.len() != b.len() {
        return Err(Error::InvalidParameter(format!(
            "paired test needs equal-length AP lists, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    let observed = mean(a) - mean(b);
    let tol = 1e-12 * (1.0 + observed.abs());
    let extreme = |d: f64| match options.sided {
        Sidedness::TwoSided => d.abs() >= observed.abs() - tol,
        Sidedness::Greater => d >= observed - tol,
    };
    let mut count = 0u64;
    match options.scheme {
        PermutationScheme::Pooled => {
            let mut pooled: Vec<f64> = a.iter().chain(b).copied().collect();
            let total: f64 = pooled.iter().sum();
            let (na, nb) = (a.len() as f64, b.len() as f64);
            for _ in 0..options.permutations {
                let (first, _) = pooled.partial_shuffle(rng, a.len());
                let sa: f64 = first.iter().sum();
                if extreme(sa / na - (total - sa) / nb) {
                    count += 1;
                }
            }
        }
        PermutationScheme::Paired => {
            let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
            for _ in 0..options.permutations {
                let s: f64 = diffs.iter().map(|&d| if rng.random::<bool>() { d } else { -d }).sum();
                if extreme(s / diffs.len() as f64) {
                    count += 1;
                }
            }
        }
    }
    let k = options.permutations;
    let p_value = if options.add_one {
        (count + 1) as f64 / (k + 1) as f64
    } else {
        count as f64 / k as f64
    };
    Ok(SignificanceResult {
        observed,
        permutations: k,
        p_value,
        std_error: standard_error(p_value, k),
        sided: options.sided,
        scheme: options.scheme,
    })
}

/// Tests whether two reports differ. The paired scheme requires both
/// reports to list the same queries in the same order.
pub fn compare_reports<R: Rng + ?Sized>(
    a: &APReport,
    b: &APReport,
    options: PermutationOptions,
    rng: &mut R,
) -> Result<SignificanceResult> {
    if options.scheme == PermutationScheme::Paired {
        let same = a.entries.len() == b.entries.len()
            && a.entries.iter().zip(&b.entries).all(|(x, y)| x.id == y.id);
        if !same {
            return Err(Error::InvalidParameter(
                "paired test needs reports over the same queries in the same order".into(),
            ));
        }
    }
    permutation_test(&a.aps(), &b.aps(), options, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    #[test]
    fn permutation_counts() {
        assert_eq!(permutations_needed(0.001).unwrap(), 250_000);
        assert_eq!(permutations_needed(0.01).unwrap(), 2_500);
        assert_eq!(permutations_needed(0.5).unwrap(), 1);
        assert!(permutations_needed(0.0).is_err());
        assert!((standard_error(0.5, 250_000) - 0.001).abs() < 1e-15);
    }

    #[test]
    fn identical_constant_lists_are_not_significant() {
        let a = [0.7; 6];
        let mut rng = seeded(4);
        for sided in [Sidedness::TwoSided, Sidedness::Greater] {
            let opts = PermutationOptions { sided, ..PermutationOptions::new(500) };
            let r = permutation_test(&a, &a, opts, &mut rng).unwrap();
            assert_eq!(r.p_value, 1.0);
            assert_eq!(r.std_error, 0.0);
        }
    }

    #[test]
    fn separated_lists_are_significant() {
        let a = [0.9, 0.95, 0.92, 0.97, 0.91, 0.93, 0.96, 0.94];
        let b = [0.1, 0.15, 0.12, 0.17, 0.11, 0.13, 0.16, 0.14];
        let mut rng = seeded(5);
        for scheme in [PermutationScheme::Pooled, PermutationScheme::Paired] {
            let opts = PermutationOptions { scheme, ..PermutationOptions::new(2000) };
            let r = permutation_test(&a, &b, opts, &mut rng).unwrap();
            assert!(r.p_value < 0.01, "{scheme:?}: {}", r.p_value);
            assert!((r.std_error - standard_error(r.p_value, 2000)).abs() == 0.0);
        }
        let opts = PermutationOptions { add_one: true, ..PermutationOptions::new(99) };
        let r = permutation_test(&a, &b, opts, &mut rng).unwrap();
        assert!(r.p_value >= 0.01);
        let opts = PermutationOptions { sided: Sidedness::Greater, ..PermutationOptions::new(500) };
        assert!(permutation_test(&b, &a, opts, &mut rng).unwrap().p_value > 0.99);
    }

    #[test]
    fn input_validation() {
        let mut rng = seeded(1);
        assert!(permutation_test(&[], &[1.0], PermutationOptions::new(10), &mut rng).is_err());
        assert!(permutation_test(&[1.0], &[1.0], PermutationOptions::new(0), &mut rng).is_err());
        let paired = PermutationOptions { scheme: PermutationScheme::Paired, ..PermutationOptions::new(10) };
        assert!(permutation_test(&[1.0], &[1.0, 0.5], paired, &mut rng).is_err());
    }
}
