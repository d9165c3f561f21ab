//! Normality testing of modal noise and the minimum-mode-count heuristic.
//!
//! The Shapiro-Wilk statistic and its p-value follow Royston's AS R94
//! approximation (coefficients from polynomial fits in `1/sqrt(n)`, a
//! log-normal transform of `1 - W` for the significance level).

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{KromError, Result};

/// Largest sample the AS R94 approximation is calibrated for.
pub const MAX_SHAPIRO_N: usize = 5000;

/// Seed for the subsample drawn when a sequence exceeds [`MAX_SHAPIRO_N`].
pub const SUBSAMPLE_SEED: u64 = 0x5eed_5a4d;

/// Significance level used when none is given.
pub const DEFAULT_THRESHOLD: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShapiroWilk {
    pub w: f64,
    pub p_value: f64,
}

/// Evaluate `c[0] + c[1] x + c[2] x^2 + ...`.
fn poly(c: &[f64], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &ci| acc * x + ci)
}

/// Normal quantile, algorithm AS 111 (the variant AS R94 was calibrated with).
fn ppnd(p: f64) -> f64 {
    const A: [f64; 4] = [2.50662823884, -18.61500062529, 41.39119773534, -25.44106049637];
    const B: [f64; 4] = [-8.47351093090, 23.08336743743, -21.06224101826, 3.13082909833];
    const C: [f64; 4] = [-2.78718931138, -2.29796479134, 4.85014127135, 2.32121276858];
    const D: [f64; 2] = [3.54388924762, 1.63706781897];

    let q = p - 0.5;
    if q.abs() <= 0.42 {
        let r = q * q;
        return q * (((A[3] * r + A[2]) * r + A[1]) * r + A[0])
            / ((((B[3] * r + B[2]) * r + B[1]) * r + B[0]) * r + 1.0);
    }
    let r = if q > 0.0 { 1.0 - p } else { p };
    if r <= 0.0 {
        return 0.0;
    }
    let r = (-r.ln()).sqrt();
    let v = (((C[3] * r + C[2]) * r + C[1]) * r + C[0]) / ((D[1] * r + D[0]) * r + 1.0);
    if q < 0.0 {
        -v
    } else {
        v
    }
}

/// Upper normal tail area, algorithm AS 66.
fn normal_upper_tail(x: f64) -> f64 {
    const LTONE: f64 = 7.0;
    const UTZERO: f64 = 38.0;
    const CON: f64 = 1.28;

    let (z, upper) = if x > 0.0 { (x, true) } else { (-x, false) };
    if !(z <= LTONE || (upper && z <= UTZERO)) {
        return if upper { 0.0 } else { 1.0 };
    }
    let y = 0.5 * z * z;
    let tail = if z <= CON {
        0.5 - z
            * (0.398942280444
                - 0.399903438504 * y
                    / (y + 5.75885480458 - 29.8213557808 / (y + 2.62433121679 + 48.6959930692 / (y + 5.92885724438))))
    } else {
        0.398942280385 * (-y).exp()
            / (z - 3.8052e-8
                + 1.00000615302
                    / (z + 3.98064794e-4
                        + 1.98615381364
                            / (z - 0.151679116635
                                + 5.29330324926 / (z + 4.8385912808 - 15.1508972451 / (z + 0.742380924027 + 30.789933034 / (z + 3.99019417011))))))
    };
    if upper {
        tail
    } else {
        1.0 - tail
    }
}

/// Shapiro-Wilk W test for normality of `sample` (3 <= n <= 5000).
pub fn shapiro_wilk(sample: &[f64]) -> Result<ShapiroWilk> {
    let n = sample.len();
    if n < 3 {
        return Err(KromError::InvalidArgument(format!(
            "Shapiro-Wilk needs at least 3 samples, got {n}"
        )));
    }
    if n > MAX_SHAPIRO_N {
        return Err(KromError::InvalidArgument(format!(
            "Shapiro-Wilk approximation is valid up to {MAX_SHAPIRO_N} samples, got {n}"
        )));
    }
    if sample.iter().any(|x| !x.is_finite()) {
        return Err(KromError::InvalidArgument("non-finite value in sample".into()));
    }

    let mut x = sample.to_vec();
    x.sort_by(f64::total_cmp);
    let median = if n % 2 == 1 {
        x[n / 2]
    } else {
        0.5 * (x[n / 2 - 1] + x[n / 2])
    };
    for v in &mut x {
        *v -= median;
    }

    let range = x[n - 1] - x[0];
    if range < 1e-19 {
        return Err(KromError::InvalidArgument("sample has zero variance".into()));
    }

    let a = coefficients(n);
    let an = n as f64;

    // W as the squared correlation between the data and the coefficients,
    // with the antisymmetric coefficient vector expanded on the fly.
    let coeff = |i: usize| -> f64 {
        let j = n - 1 - i;
        if i < j {
            -a[i]
        } else if i > j {
            a[j]
        } else {
            0.0
        }
    };
    let sx = x.iter().map(|v| v / range).sum::<f64>() / an;
    let sa = (0..n).map(coeff).sum::<f64>() / an;
    let (mut ssa, mut ssx, mut sax) = (0.0, 0.0, 0.0);
    for (i, xi) in x.iter().enumerate() {
        let asa = coeff(i) - sa;
        let xsx = xi / range - sx;
        ssa += asa * asa;
        ssx += xsx * xsx;
        sax += asa * xsx;
    }
    let ssassx = (ssa * ssx).sqrt();
    let w1 = (ssassx - sax) * (ssassx + sax) / (ssa * ssx);
    let w = 1.0 - w1;

    let p_value = if n == 3 {
        if w < 0.75 {
            0.0
        } else {
            (1.0 - (6.0 / std::f64::consts::PI) * w.sqrt().acos()).clamp(0.0, 1.0)
        }
    } else {
        let y = w1.ln();
        if n <= 11 {
            let gamma = poly(&[-2.273, 0.459], an);
            if y >= gamma {
                1e-99
            } else {
                let y = -(gamma - y).ln();
                let m = poly(&[0.5440, -0.39978, 0.025054, -6.714e-4], an);
                let s = poly(&[1.3822, -0.77857, 0.062767, -0.0020322], an).exp();
                normal_upper_tail((y - m) / s)
            }
        } else {
            let xx = an.ln();
            let m = poly(&[-1.5861, -0.31082, -0.083751, 0.0038915], xx);
            let s = poly(&[-0.4803, -0.082676, 0.0030302], xx).exp();
            normal_upper_tail((y - m) / s)
        }
    };

    Ok(ShapiroWilk {
        w,
        p_value: p_value.clamp(0.0, 1.0),
    })
}

/// Royston's approximation to the first `n/2` Shapiro-Wilk coefficients.
fn coefficients(n: usize) -> Vec<f64> {
    let nn2 = n / 2;
    let mut a = vec![0.0; nn2];
    if n == 3 {
        a[0] = std::f64::consts::FRAC_1_SQRT_2;
        return a;
    }
    const C1: [f64; 6] = [0.0, 0.221157, -0.147981, -2.071190, 4.434685, -2.706056];
    const C2: [f64; 6] = [0.0, 0.042981, -0.293762, -1.752461, 5.682633, -3.582633];

    let an = n as f64;
    let an25 = an + 0.25;
    let mut summ2 = 0.0;
    for (i, ai) in a.iter_mut().enumerate() {
        *ai = ppnd((i as f64 + 1.0 - 0.375) / an25);
        summ2 += *ai * *ai;
    }
    summ2 *= 2.0;
    let ssumm2 = summ2.sqrt();
    let rsn = 1.0 / an.sqrt();
    let a1 = poly(&C1, rsn) - a[0] / ssumm2;

    let (start, fac) = if n > 5 {
        let a2 = -a[1] / ssumm2 + poly(&C2, rsn);
        let fac = ((summ2 - 2.0 * a[0] * a[0] - 2.0 * a[1] * a[1])
            / (1.0 - 2.0 * a1 * a1 - 2.0 * a2 * a2))
            .sqrt();
        a[1] = a2;
        (2, fac)
    } else {
        let fac = ((summ2 - 2.0 * a[0] * a[0]) / (1.0 - 2.0 * a1 * a1)).sqrt();
        (1, fac)
    };
    a[0] = a1;
    for ai in a.iter_mut().skip(start) {
        *ai = -*ai / fac;
    }
    a
}

/// Deterministic subsample of at most [`MAX_SHAPIRO_N`] points, original order kept.
pub fn subsample_for_test(seq: &[f64]) -> Vec<f64> {
    if seq.len() <= MAX_SHAPIRO_N {
        return seq.to_vec();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(SUBSAMPLE_SEED);
    let mut picked = index::sample(&mut rng, seq.len(), MAX_SHAPIRO_N).into_vec();
    picked.sort_unstable();
    picked.into_iter().map(|i| seq[i]).collect()
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct NormalityReport {
    pub model_sizes: Vec<usize>,
    /// `p_values[i][c]`: p-value of coordinate `c` for model `model_sizes[i]`.
    pub p_values: Vec<Vec<f64>>,
    pub means: Vec<f64>,
    pub medians: Vec<f64>,
    pub threshold: f64,
    pub selected_j: Option<usize>,
}

impl NormalityReport {
    /// CSV rows `modes,mean,median` for the mean/median figure.
    pub fn summary_csv(&self) -> String {
        let mut out = String::from("modes,mean,median\n");
        for ((j, m), md) in self.model_sizes.iter().zip(&self.means).zip(&self.medians) {
            out.push_str(&format!("{j},{m:.16e},{md:.16e}\n"));
        }
        out
    }

    /// Long-format CSV rows `modes,coordinate,p_value` for boxplots.
    pub fn p_values_csv(&self) -> String {
        let mut out = String::from("modes,coordinate,p_value\n");
        for (j, ps) in self.model_sizes.iter().zip(&self.p_values) {
            for (c, p) in ps.iter().enumerate() {
                out.push_str(&format!("{j},{c},{p:.16e}\n"));
            }
        }
        out
    }
}

/// Modal noise of one candidate model: one real sequence per coordinate.
#[derive(Debug, Clone)]
pub struct ModalSet {
    pub modes: usize,
    pub coordinates: Vec<Vec<f64>>,
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Pick the smallest model whose per-coordinate Shapiro-Wilk p-values have
/// both mean and median above `threshold`.
///
/// Coordinates whose modal noise is numerically constant cannot be tested and
/// get p-value 0.
pub fn select_min_modes(sets: &[ModalSet], threshold: f64) -> Result<NormalityReport> {
    if sets.is_empty() {
        return Err(KromError::InvalidArgument("no candidate models".into()));
    }
    if sets.windows(2).any(|w| w[0].modes >= w[1].modes) {
        return Err(KromError::InvalidArgument(
            "candidate models must be ordered by strictly increasing size".into(),
        ));
    }
    let mut report = NormalityReport {
        model_sizes: Vec::with_capacity(sets.len()),
        p_values: Vec::with_capacity(sets.len()),
        means: Vec::with_capacity(sets.len()),
        medians: Vec::with_capacity(sets.len()),
        threshold,
        selected_j: None,
    };
    for set in sets {
        if set.coordinates.is_empty() {
            return Err(KromError::InvalidArgument(format!(
                "model with {} modes has no coordinates",
                set.modes
            )));
        }
        let mut ps = Vec::with_capacity(set.coordinates.len());
        for seq in &set.coordinates {
            let sub = subsample_for_test(seq);
            let p = match shapiro_wilk(&sub) {
                Ok(sw) => sw.p_value,
                Err(_) if sub.len() >= 3 => 0.0,
                Err(e) => return Err(e),
            };
            ps.push(p);
        }
        let mean = ps.iter().sum::<f64>() / ps.len() as f64;
        let med = median(&ps);
        if report.selected_j.is_none() && mean > threshold && med > threshold {
            report.selected_j = Some(set.modes);
        }
        report.model_sizes.push(set.modes);
        report.means.push(mean);
        report.medians.push(med);
        report.p_values.push(ps);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_tiny_samples() {
        assert!(shapiro_wilk(&[1.0, 2.0]).is_err());
        assert!(shapiro_wilk(&[3.0, 3.0, 3.0, 3.0]).is_err());
    }

    #[test]
    fn three_points_equally_spaced_is_perfectly_normal() {
        let r = shapiro_wilk(&[1.0, 2.0, 3.0]).unwrap();
        assert!((r.w - 1.0).abs() < 1e-12);
        assert!((r.p_value - 1.0).abs() < 1e-9);
    }

    #[test]
    fn ppnd_is_antisymmetric() {
        for &p in &[0.01, 0.2, 0.4, 0.45] {
            assert!((ppnd(p) + ppnd(1.0 - p)).abs() < 1e-12);
        }
        assert!((ppnd(0.975) - 1.959964).abs() < 1e-6);
    }

    #[test]
    fn normal_tail_matches_known_values() {
        assert!((normal_upper_tail(0.0) - 0.5).abs() < 1e-12);
        assert!((normal_upper_tail(1.959964) - 0.025).abs() < 1e-7);
        assert!((normal_upper_tail(-1.0) - 0.841344746).abs() < 1e-8);
    }

    #[test]
    fn all_passing_selects_smallest() {
        let normalish: Vec<f64> = (0..30).map(|i| ppnd((i as f64 + 0.5) / 30.0)).collect();
        let sets: Vec<ModalSet> = [10, 20, 30]
            .iter()
            .map(|&m| ModalSet {
                modes: m,
                coordinates: vec![normalish.clone(); 4],
            })
            .collect();
        let report = select_min_modes(&sets, 0.05).unwrap();
        assert_eq!(report.selected_j, Some(10));
        assert!(report.p_values.iter().flatten().all(|p| (0.0..=1.0).contains(p)));
    }

    #[test]
    fn empty_input_is_an_error() {
        assert!(select_min_modes(&[], 0.05).is_err());
    }

    #[test]
    fn long_sequences_are_subsampled_deterministically() {
        let seq: Vec<f64> = (0..7000).map(|i| (i as f64 * 0.37).sin()).collect();
        let a = subsample_for_test(&seq);
        let b = subsample_for_test(&seq);
        assert_eq!(a.len(), MAX_SHAPIRO_N);
        assert_eq!(a, b);
    }
}
