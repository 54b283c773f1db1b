//! Scalar and vector inequalities satisfied by the Laplace and arctan
//! penalties. Each function returns `rhs - lhs`; a nonnegative slack means
//! the inequality holds at that point.

use std::f64::consts::FRAC_2_PI;

/// `1/(1 - x log eps) - eps^x` for `eps` in (0, 1], `x >= 0`.
pub fn laplace_rational_slack(epsilon: f64, x: f64) -> f64 {
    1.0 / (1.0 - x * epsilon.ln()) - (x * epsilon.ln()).exp()
}

/// `-(log eps) x - (1 - eps^x)` for `x >= 0`.
pub fn laplace_linear_slack(epsilon: f64, x: f64) -> f64 {
    let l = -epsilon.ln();
    l * x + (-l * x).exp_m1()
}

/// `atan(y) - y / (1 + y^2)` for `y >= 0`.
pub fn arctan_lower_slack(y: f64) -> f64 {
    y.atan() - y / (1.0 + y * y)
}

/// `y - atan(y)` for `y >= 0`.
pub fn arctan_upper_slack(y: f64) -> f64 {
    y - y.atan()
}

/// `(log eps)^2 T sum beta^2 - (sum (1 - eps^|beta|))^2`.
pub fn laplace_sum_square_slack(epsilon: f64, beta: &[f64]) -> f64 {
    let l = epsilon.ln();
    let lhs: f64 = beta.iter().map(|b| -(b.abs() * l).exp_m1()).sum();
    let sq: f64 = beta.iter().map(|b| b * b).sum();
    l * l * beta.len() as f64 * sq - lhs * lhs
}

/// `(2 gamma / pi)^2 T sum beta^2 - ((2/pi) sum atan(gamma |beta|))^2`.
pub fn arctan_sum_square_slack(gamma: f64, beta: &[f64]) -> f64 {
    let lhs: f64 = FRAC_2_PI * beta.iter().map(|b| (gamma * b.abs()).atan()).sum::<f64>();
    let sq: f64 = beta.iter().map(|b| b * b).sum();
    let l = FRAC_2_PI * gamma;
    l * l * beta.len() as f64 * sq - lhs * lhs
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn equality_at_zero() {
        assert_eq!(laplace_rational_slack(0.3, 0.0), 0.0);
        assert_eq!(laplace_linear_slack(0.3, 0.0), 0.0);
        assert_eq!(arctan_lower_slack(0.0), 0.0);
        assert_eq!(arctan_upper_slack(0.0), 0.0);
        assert_eq!(laplace_sum_square_slack(0.1, &[0.0, 0.0]), 0.0);
    }

    #[test]
    fn eps_one_is_tight() {
        // eps = 1 makes both sides of the rational bound equal to 1.
        for x in [0.0, 0.5, 3.0] {
            assert!(laplace_rational_slack(1.0, x).abs() < 1e-15);
        }
    }

    proptest! {
        #[test]
        fn rational_bound(eps in 1e-12..=1.0f64, x in 0.0..1e3f64) {
            prop_assert!(laplace_rational_slack(eps, x) >= -1e-15);
        }

        #[test]
        fn linear_bound(eps in 1e-12..1.0f64, x in 0.0..1e3f64) {
            prop_assert!(laplace_linear_slack(eps, x) >= -1e-12);
        }

        #[test]
        fn arctan_sandwich(y in 0.0..1e6f64) {
            prop_assert!(arctan_lower_slack(y) >= -1e-15);
            prop_assert!(arctan_upper_slack(y) >= -1e-15);
        }

        #[test]
        fn vector_bounds(beta in proptest::collection::vec(0.0..20.0f64, 1..40),
                         eps in 1e-9..0.99f64, gamma in 1e-3..200.0f64) {
            let scale_l: f64 = beta.iter().map(|b| b * b).sum::<f64>() * beta.len() as f64;
            prop_assert!(laplace_sum_square_slack(eps, &beta) >= -1e-9 * scale_l.max(1.0) * eps.ln().powi(2));
            prop_assert!(arctan_sum_square_slack(gamma, &beta) >= -1e-9 * scale_l.max(1.0) * gamma * gamma);
        }
    }
}
