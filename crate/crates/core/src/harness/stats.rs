use serde::{Deserialize, Serialize};

/// 1.96, the two-sided 95% normal quantile.
const Z95: f64 = 1.959_963_984_540_054;

/// A proportion with its 95% Wilson score interval.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub successes: u64,
    pub total: u64,
    pub rate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

impl Estimate {
    pub fn new(successes: u64, total: u64) -> Self {
        assert!(successes <= total, "{successes} successes out of {total}");
        let (ci_low, ci_high) = wilson(successes, total);
        let rate = if total == 0 { 0.0 } else { successes as f64 / total as f64 };
        Estimate { successes, total, rate, ci_low, ci_high }
    }

    pub fn contains(&self, p: f64) -> bool {
        self.ci_low <= p && p <= self.ci_high
    }
}

/// Wilson score interval at 95%; `(0, 1)` when there are no trials.
pub fn wilson(successes: u64, total: u64) -> (f64, f64) {
    if total == 0 {
        return (0.0, 1.0);
    }
    let n = total as f64;
    let p = successes as f64 / n;
    let z2 = Z95 * Z95;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = Z95 * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    let low = if successes == 0 { 0.0 } else { (centre - half).max(0.0) };
    let high = if successes == total { 1.0 } else { (centre + half).min(1.0) };
    (low, high)
}

/// Least-squares line through `(x, y)`: slope, intercept and R².
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

pub fn fit_line(xs: &[f64], ys: &[f64]) -> Option<LineFit> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return None;
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let r_squared = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Some(LineFit { slope, intercept: my - slope * mx, r_squared })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wilson_reference_values() {
        // 0 of 10: upper bound z^2 / (n + z^2).
        let (lo, hi) = wilson(0, 10);
        assert_eq!(lo, 0.0);
        assert!((hi - Z95 * Z95 / (10.0 + Z95 * Z95)).abs() < 1e-12);
        let (lo, hi) = wilson(50, 100);
        assert!((lo + hi - 1.0).abs() < 1e-12);
        assert!((hi - 0.596_168_469_6).abs() < 1e-9);
    }

    #[test]
    fn exact_line() {
        let fit = fit_line(&[1.0, 2.0, 3.0], &[3.0, 5.0, 7.0]).unwrap();
        assert!((fit.slope - 2.0).abs() < 1e-12);
        assert!((fit.intercept - 1.0).abs() < 1e-12);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
    }
}
