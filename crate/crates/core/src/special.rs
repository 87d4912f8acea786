use std::f64::consts::{FRAC_1_SQRT_2, PI};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

pub fn norm_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * PI).sqrt()
}

pub fn norm_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z * FRAC_1_SQRT_2)
}

pub fn log_norm_pdf(z: f64) -> f64 {
    -0.5 * z * z - LN_SQRT_2PI
}

/// `ln Φ(z)`, accurate deep into the lower tail.
pub fn log_norm_cdf(z: f64) -> f64 {
    if z >= -30.0 {
        return norm_cdf(z).ln();
    }
    // Asymptotic series of the Mills ratio.
    let r = 1.0 / (z * z);
    let series = 1.0 - r * (1.0 - 3.0 * r * (1.0 - 5.0 * r * (1.0 - 7.0 * r * (1.0 - 9.0 * r))));
    log_norm_pdf(z) - (-z).ln() + series.ln()
}

/// `φ(z) / Φ(z)`.
pub fn inverse_mills(z: f64) -> f64 {
    (log_norm_pdf(z) - log_norm_cdf(z)).exp()
}

/// `ln Σ exp(terms)`, ignoring `-inf` entries.
pub fn log_sum_exp(terms: &[f64]) -> f64 {
    let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + terms.iter().map(|&t| (t - max).exp()).sum::<f64>().ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cdf_values() {
        assert!((norm_cdf(0.0) - 0.5).abs() < 1e-16);
        assert!((norm_cdf(1.0) - 0.841_344_746_068_542_9).abs() < 1e-15);
    }

    #[test]
    fn log_cdf_is_continuous_across_the_switch() {
        let below = log_norm_cdf(-30.0 - 1e-9);
        let above = log_norm_cdf(-30.0);
        assert!((below - above).abs() / above.abs() < 1e-10);
        // Reference ln Φ(-40) from the tail expansion to high order.
        assert!((log_norm_cdf(-40.0) - (-804.608_442_013_753_8)).abs() < 1e-9);
    }

    #[test]
    fn lse() {
        let v = log_sum_exp(&[0.0_f64.ln(), 2.0_f64.ln(), 3.0_f64.ln()]);
        assert!((v - 5.0_f64.ln()).abs() < 1e-15);
        assert_eq!(log_sum_exp(&[f64::NEG_INFINITY]), f64::NEG_INFINITY);
    }
}
