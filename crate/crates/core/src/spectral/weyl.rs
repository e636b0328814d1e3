use serde::{Deserialize, Serialize};

use super::basis::{reliable_count, EigenBasis};
use crate::geometry::BilliardDomain;

/// Two-term Weyl estimate of the number of Dirichlet states with
/// `2E / hbar^2 <= eps`.
pub fn weyl_count(area: f64, perimeter: f64, eps: f64) -> f64 {
    if eps <= 0.0 {
        return 0.0;
    }
    let fp = 4.0 * std::f64::consts::PI;
    area / fp * eps - perimeter / fp * eps.sqrt()
}

/// Default tolerance band `max(5, 1% of N)`.
pub fn default_band(n: usize) -> f64 {
    (0.01 * n as f64).max(5.0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeylReport {
    pub eps: Vec<f64>,
    pub counted: Vec<usize>,
    pub weyl: Vec<f64>,
    /// Largest `|counted - weyl|` below the reliable cutoff.
    pub max_deviation: f64,
    /// Mean of `counted - weyl` below the reliable cutoff.
    pub mean_deviation: f64,
    pub reliable_cutoff: f64,
    pub band: f64,
    pub flagged: bool,
}

/// Count of `levels` (sorted) at or below `eps`.
pub fn count_at(levels: &[f64], eps: f64) -> usize {
    levels.partition_point(|&l| l <= eps)
}

/// Compare sorted levels `eps_n = 2 E_n / hbar^2` with Weyl's law on a
/// uniform grid up to the reliable cutoff.
pub fn weyl_report_levels(levels: &[f64], area: f64, perimeter: f64, band: f64) -> WeylReport {
    let reliable_cutoff = if levels.is_empty() { 0.0 } else { levels[reliable_count(levels.len()) - 1] };
    let points = 400;
    let eps: Vec<f64> = (0..=points).map(|i| reliable_cutoff * i as f64 / points as f64).collect();
    let counted: Vec<usize> = eps.iter().map(|&e| count_at(levels, e)).collect();
    let weyl: Vec<f64> = eps.iter().map(|&e| weyl_count(area, perimeter, e)).collect();
    let dev: Vec<f64> = counted.iter().zip(&weyl).map(|(&c, &w)| c as f64 - w).collect();
    let max_deviation = dev.iter().fold(0.0f64, |m, d| m.max(d.abs()));
    let mean_deviation = dev.iter().sum::<f64>() / dev.len() as f64;
    WeylReport {
        eps,
        counted,
        weyl,
        max_deviation,
        mean_deviation,
        reliable_cutoff,
        band,
        flagged: max_deviation > band,
    }
}

pub fn weyl_report(basis: &EigenBasis, domain: &BilliardDomain) -> WeylReport {
    weyl_report_with_band(basis, domain, default_band(basis.len()))
}

pub fn weyl_report_with_band(basis: &EigenBasis, domain: &BilliardDomain, band: f64) -> WeylReport {
    weyl_report_levels(&basis.lambdas, domain.area(), domain.perimeter(), band)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn square_levels(n: usize) -> Vec<f64> {
        let mut v: Vec<f64> = (1..80).flat_map(|a| (1..80).map(move |b| PI * PI * (a * a + b * b) as f64)).collect();
        v.sort_by(f64::total_cmp);
        v.truncate(n);
        v
    }

    #[test]
    fn square_count_below_1000() {
        let v = square_levels(200);
        assert_eq!(count_at(&v, 1000.0), 71);
        assert!((weyl_count(1.0, 4.0, 1000.0) - 69.5).abs() < 0.1);
    }

    #[test]
    fn empty_range() {
        assert_eq!(count_at(&square_levels(10), 0.0), 0);
        assert_eq!(weyl_count(1.0, 4.0, 0.0), 0.0);
    }

    #[test]
    fn complete_square_within_band() {
        let r = weyl_report_levels(&square_levels(100), 1.0, 4.0, default_band(100));
        assert!(!r.flagged, "{}", r.max_deviation);
    }

    #[test]
    fn dropped_state_is_flagged() {
        let levels = square_levels(60);
        let band = 3.0;
        assert!(!weyl_report_levels(&levels, 1.0, 4.0, band).flagged);
        let mut dropped = levels.clone();
        dropped.remove(0);
        assert!(weyl_report_levels(&dropped, 1.0, 4.0, band).flagged);
    }
}
