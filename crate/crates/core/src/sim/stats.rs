//! Goodness-of-fit helpers for comparing samplers against kernels and
//! against each other.

use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Two-sample Kolmogorov distance `sup |F_a - F_b|`.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    assert!(!a.is_empty() && !b.is_empty(), "empty sample");
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// Kolmogorov distance between the empirical distribution of grid indices
/// and a discrete distribution given by `masses`.
pub fn ks_discrete(counts: &[u64], masses: &[f64]) -> f64 {
    assert_eq!(counts.len(), masses.len());
    let n: u64 = counts.iter().sum();
    let total: f64 = masses.iter().sum();
    let (mut fe, mut fm, mut d) = (0.0, 0.0, 0.0f64);
    for (c, m) in counts.iter().zip(masses) {
        fe += *c as f64 / n as f64;
        fm += m / total;
        d = d.max((fe - fm).abs());
    }
    d
}

/// Pearson chi-square test of observed counts against expected masses.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChiSquare {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

impl ChiSquare {
    pub fn passes(&self, level: f64) -> bool {
        self.p_value >= level
    }
}

/// Bins with expected count below `min_expected` are pooled with their
/// neighbours, scanning left to right; a trailing underfull pool is merged
/// into the last full one.
pub fn chi_square(counts: &[u64], masses: &[f64], min_expected: f64) -> ChiSquare {
    assert_eq!(counts.len(), masses.len());
    let n: u64 = counts.iter().sum();
    let total: f64 = masses.iter().sum();
    let scale = n as f64 / total;
    let mut bins: Vec<(f64, f64)> = Vec::new();
    let (mut obs, mut exp) = (0.0, 0.0);
    for (c, m) in counts.iter().zip(masses) {
        obs += *c as f64;
        exp += m * scale;
        if exp >= min_expected {
            bins.push((obs, exp));
            obs = 0.0;
            exp = 0.0;
        }
    }
    if exp > 0.0 || obs > 0.0 {
        match bins.last_mut() {
            Some(last) => {
                last.0 += obs;
                last.1 += exp;
            }
            None => bins.push((obs, exp)),
        }
    }
    let statistic: f64 = bins.iter().map(|(o, e)| (o - e).powi(2) / e).sum();
    let dof = bins.len().saturating_sub(1);
    let p_value = if dof == 0 {
        1.0
    } else {
        ChiSquared::new(dof as f64).expect("positive dof").sf(statistic)
    };
    ChiSquare {
        statistic,
        dof,
        p_value,
    }
}
