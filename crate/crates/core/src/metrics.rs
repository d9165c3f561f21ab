//! Reconstruction quality: chord-length trajectory error, circle distance,
//! band residence fractions and eigenvalue discrepancy.

use std::f64::consts::TAU;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{KromError, Result};

fn same_length(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(KromError::Dimension(format!(
            "trace lengths differ: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    if a.is_empty() {
        return Err(KromError::InvalidArgument("empty trace".into()));
    }
    Ok(())
}

/// `(1/(T+1)) * sqrt(sum_t |e^{i w theta(t)} - e^{i w phi(t)}|^2)` with
/// `w = 2 pi / period`. The normaliser sits outside the root.
pub fn geodesic_error(theta: &[f64], phi: &[f64], period: f64) -> Result<f64> {
    same_length(theta, phi)?;
    let w = TAU / period;
    let sum: f64 = theta
        .iter()
        .zip(phi)
        .map(|(a, b)| (Complex64::from_polar(1.0, w * a) - Complex64::from_polar(1.0, w * b)).norm_sqr())
        .sum();
    Ok(sum.sqrt() / theta.len() as f64)
}

/// Euclidean analogue of [`geodesic_error`] for non-angular coordinates.
pub fn euclidean_error(x: &[f64], y: &[f64]) -> Result<f64> {
    same_length(x, y)?;
    let sum: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(sum.sqrt() / x.len() as f64)
}

/// Shortest distance between two angles on a circle of circumference `period`.
pub fn true_geodesic(a: f64, b: f64, period: f64) -> f64 {
    let d = (a - b).abs().rem_euclid(period);
    d.min(period - d)
}

/// Fraction of steps with `true_geodesic(theta, phi) in [0, 2 sigma)`.
pub fn residence_time(theta: &[f64], phi: &[f64], sigma: f64, period: f64) -> Result<f64> {
    same_length(theta, phi)?;
    check_sigma(sigma)?;
    let inside = theta
        .iter()
        .zip(phi)
        .filter(|(a, b)| true_geodesic(**a, **b, period) < 2.0 * sigma)
        .count();
    Ok(inside as f64 / theta.len() as f64)
}

/// Fraction of steps with `|x - x_rom| < 2 sigma`.
pub fn residence_time_linear(x: &[f64], x_rom: &[f64], sigma: f64) -> Result<f64> {
    same_length(x, x_rom)?;
    check_sigma(sigma)?;
    let inside = x.iter().zip(x_rom).filter(|(a, b)| (**a - **b).abs() < 2.0 * sigma).count();
    Ok(inside as f64 / x.len() as f64)
}

fn check_sigma(sigma: f64) -> Result<()> {
    if sigma.is_nan() || sigma < 0.0 {
        return Err(KromError::InvalidArgument(format!("sigma must be >= 0, got {sigma}")));
    }
    Ok(())
}

/// Mean over `computed` of the distance to the nearest `truth` eigenvalue.
pub fn eigenvalue_discrepancy(truth: &[Complex64], computed: &[Complex64]) -> Result<f64> {
    if truth.is_empty() || computed.is_empty() {
        return Err(KromError::InvalidArgument("eigenvalue sets must be non-empty".into()));
    }
    let total: f64 = computed
        .iter()
        .map(|c| truth.iter().map(|t| (c - t).norm()).fold(f64::INFINITY, f64::min))
        .sum();
    Ok(total / computed.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub modes_used: usize,
    pub coord_names: Vec<String>,
    pub per_coordinate_error: Vec<f64>,
    pub residence_fraction: Vec<f64>,
    /// Present when ground-truth eigenvalues are known.
    pub eigenvalue_discrepancy: Option<f64>,
}

impl MetricReport {
    /// Rows `modes_used,coordinate,error,residence`.
    pub fn csv_rows(&self) -> String {
        let mut out = String::new();
        for ((name, e), r) in self
            .coord_names
            .iter()
            .zip(&self.per_coordinate_error)
            .zip(&self.residence_fraction)
        {
            out.push_str(&format!("{},{name},{e:.16e},{r:.16e}\n", self.modes_used));
        }
        out
    }

    pub const CSV_HEADER: &'static str = "modes_used,coordinate,error,residence\n";
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn geodesic_error_examples() {
        assert_eq!(geodesic_error(&[0.3, 1.0], &[0.3, 1.0], TAU).unwrap(), 0.0);
        let e = geodesic_error(&[0.0; 4], &[PI; 4], TAU).unwrap();
        assert!((e - 1.0).abs() < 1e-15);
        let e = geodesic_error(&[0.0], &[TAU - 0.1], TAU).unwrap();
        assert!((e - 0.099_958_338_541_594_72).abs() < 1e-12);
        assert!(geodesic_error(&[0.0], &[0.0, 1.0], TAU).is_err());
    }

    #[test]
    fn true_geodesic_examples() {
        assert!((true_geodesic(0.0, TAU - 0.1, TAU) - 0.1).abs() < 1e-12);
        assert_eq!(true_geodesic(1.3, 1.3, TAU), 0.0);
        assert!((true_geodesic(0.0, PI, TAU) - PI).abs() < 1e-15);
        assert!((true_geodesic(0.95, 0.05, 1.0) - 0.1).abs() < 1e-12);
    }

    #[test]
    fn residence_examples() {
        assert_eq!(residence_time(&[1.0; 5], &[1.0; 5], 0.1, TAU).unwrap(), 1.0);
        assert_eq!(residence_time(&[1.0; 5], &[1.0; 5], 0.0, TAU).unwrap(), 0.0);
        let theta = [0.0; 10];
        let phi: Vec<f64> = (0..10).map(|i| if i % 2 == 0 { 0.05 } else { 0.3 }).collect();
        assert_eq!(residence_time(&theta, &phi, 0.05, TAU).unwrap(), 0.5);
    }

    #[test]
    fn residence_linear_examples() {
        assert_eq!(residence_time_linear(&[2.0; 3], &[2.0; 3], 0.1).unwrap(), 1.0);
        assert_eq!(residence_time_linear(&[0.3; 3], &[0.0; 3], 0.1).unwrap(), 0.0);
        let x = [0.1, 0.5, 0.1, 0.5];
        assert_eq!(residence_time_linear(&x, &[0.0; 4], 0.1).unwrap(), 0.5);
    }

    #[test]
    fn eigenvalue_discrepancy_examples() {
        let one = Complex64::new(1.0, 0.0);
        let i = Complex64::new(0.0, 1.0);
        assert_eq!(eigenvalue_discrepancy(&[one, i], &[one, i]).unwrap(), 0.0);
        let d = eigenvalue_discrepancy(&[one], &[Complex64::new(1.0, 0.1)]).unwrap();
        assert!((d - 0.1).abs() < 1e-15);
        let d = eigenvalue_discrepancy(&[one, i], &[Complex64::new(0.95, 0.0), Complex64::new(0.0, 1.05)]).unwrap();
        assert!((d - 0.05).abs() < 1e-15);
        assert!(eigenvalue_discrepancy(&[], &[one]).is_err());
    }
}
