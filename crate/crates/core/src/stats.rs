//! Monte-Carlo summaries.

/// Mean and variance of a sample with their standard errors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub count: usize,
    pub mean: f64,
    /// Unbiased sample variance.
    pub variance: f64,
    /// Standard error of the mean.
    pub mean_se: f64,
    /// Large-sample standard error of the variance, `sqrt((m4 - s⁴)/n)`.
    pub variance_se: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len();
        if n == 0 {
            return Self {
                count: 0,
                mean: f64::NAN,
                variance: f64::NAN,
                mean_se: f64::NAN,
                variance_se: f64::NAN,
            };
        }
        let nf = n as f64;
        let mean = values.iter().sum::<f64>() / nf;
        let (mut m2, mut m4) = (0.0, 0.0);
        for &v in values {
            let d = v - mean;
            let d2 = d * d;
            m2 += d2;
            m4 += d2 * d2;
        }
        let variance = if n > 1 { m2 / (nf - 1.0) } else { 0.0 };
        let biased = m2 / nf;
        let fourth = m4 / nf;
        Self {
            count: n,
            mean,
            variance,
            mean_se: (variance / nf).sqrt(),
            variance_se: ((fourth - biased * biased).max(0.0) / nf).sqrt(),
        }
    }
}

/// Standard error of the difference of two independent estimates.
pub fn combined_se(a: f64, b: f64) -> f64 {
    (a * a + b * b).sqrt()
}

/// `(a - b) / combined_se`, or 0 when both estimates are exact and equal.
pub fn z_score(a: f64, a_se: f64, b: f64, b_se: f64) -> f64 {
    let se = combined_se(a_se, b_se);
    let diff = a - b;
    if se == 0.0 {
        if diff == 0.0 {
            0.0
        } else {
            f64::INFINITY.copysign(diff)
        }
    } else {
        diff / se
    }
}
