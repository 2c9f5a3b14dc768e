//! Observation and missingness likelihood terms shared by the sampler
//! kernels and the posterior summaries.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{log_normal_cdf, log_normal_pdf};

/// Gaussian log-density of one observed response cell.
#[inline]
pub fn gaussian_loglik(y: f64, mu: f64, sigma2: f64) -> f64 {
    debug_assert!(sigma2 > 0.0);
    log_normal_pdf(y, mu, sigma2)
}

/// Log-probability of a tooth's missingness indicator under the latent
/// probit: log Φ(μ*) when the tooth is missing, log Φ(-μ*) when present.
#[inline]
pub fn missing_logprob(missing: bool, mu_star: f64) -> f64 {
    if missing {
        log_normal_cdf(mu_star)
    } else {
        log_normal_cdf(-mu_star)
    }
}

/// Ordinal disease categories on the response scale, plus the missing state.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CalCategory {
    None,
    Slight,
    Moderate,
    Severe,
    Missing,
}

impl CalCategory {
    pub const ALL: [CalCategory; 5] = [
        CalCategory::None,
        CalCategory::Slight,
        CalCategory::Moderate,
        CalCategory::Severe,
        CalCategory::Missing,
    ];

    pub fn index(self) -> usize {
        match self {
            CalCategory::None => 0,
            CalCategory::Slight => 1,
            CalCategory::Moderate => 2,
            CalCategory::Severe => 3,
            CalCategory::Missing => 4,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            CalCategory::None => "none",
            CalCategory::Slight => "slight",
            CalCategory::Moderate => "moderate",
            CalCategory::Severe => "severe",
            CalCategory::Missing => "missing",
        }
    }
}

/// Upper bin edges separating none/slight/moderate/severe, in mm.
pub const CAL_BIN_EDGES: [f64; 3] = [1.0, 3.0, 5.0];

/// Bin an observed attachment level (or a missing cell) into its category.
/// The clinical category bounds overlap in prose; here the bins are the
/// contiguous half-open intervals [0,1), [1,3), [3,5), [5,inf).
pub fn ordinal_category(cal: Option<f64>) -> Result<CalCategory> {
    match cal {
        None => Ok(CalCategory::Missing),
        Some(v) if v < 0.0 => Err(Error::validation(format!(
            "negative attachment level {v}"
        ))),
        Some(v) if v < CAL_BIN_EDGES[0] => Ok(CalCategory::None),
        Some(v) if v < CAL_BIN_EDGES[1] => Ok(CalCategory::Slight),
        Some(v) if v < CAL_BIN_EDGES[2] => Ok(CalCategory::Moderate),
        Some(_) => Ok(CalCategory::Severe),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use crate::math::LOG_2PI;

    #[test]
    fn gaussian_hand_values() {
        assert_relative_eq!(gaussian_loglik(1.5, 1.5, 1.0), -0.5 * LOG_2PI, epsilon = 1e-14);
        let s2: f64 = 2.25;
        assert_relative_eq!(
            gaussian_loglik(3.0 + s2.sqrt(), 3.0, s2),
            -0.5 * (LOG_2PI + s2.ln()) - 0.5,
            epsilon = 1e-14
        );
    }

    #[test]
    fn gaussian_batch_is_sum_of_scalars() {
        let ys = [0.3, -1.0, 2.5, 0.0, 4.2];
        let mus = [0.1, -0.9, 2.0, 0.5, 4.4];
        let total: f64 = ys
            .iter()
            .zip(&mus)
            .map(|(&y, &m)| gaussian_loglik(y, m, 1.7))
            .sum();
        let mut acc = 0.0;
        for k in 0..5 {
            acc += gaussian_loglik(ys[k], mus[k], 1.7);
        }
        assert_relative_eq!(total, acc, epsilon = 1e-12);
    }

    #[test]
    fn missing_prob_zero_mean() {
        assert_relative_eq!(missing_logprob(true, 0.0), 0.5f64.ln(), epsilon = 1e-14);
        assert_relative_eq!(missing_logprob(false, 0.0), 0.5f64.ln(), epsilon = 1e-14);
    }

    #[test]
    fn missing_prob_extremes() {
        assert_relative_eq!(missing_logprob(true, 40.0), 0.0, epsilon = 1e-12);
        // 50-digit reference for log Φ(-8)
        assert_relative_eq!(
            missing_logprob(true, -8.0),
            -35.0134371599145499,
            max_relative = 1e-10
        );
    }

    #[test]
    fn missing_prob_branches_sum_to_one() {
        for mu in [-25.0, -6.0, -1.0, 0.0, 0.3, 2.0, 7.0, 25.0] {
            let s = missing_logprob(true, mu).exp() + missing_logprob(false, mu).exp();
            assert_relative_eq!(s, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn categories_follow_bins() {
        assert_eq!(ordinal_category(None).unwrap(), CalCategory::Missing);
        assert_eq!(ordinal_category(Some(0.0)).unwrap(), CalCategory::None);
        assert_eq!(ordinal_category(Some(0.99)).unwrap(), CalCategory::None);
        assert_eq!(ordinal_category(Some(1.0)).unwrap(), CalCategory::Slight);
        assert_eq!(ordinal_category(Some(3.5)).unwrap(), CalCategory::Moderate);
        assert_eq!(ordinal_category(Some(5.0)).unwrap(), CalCategory::Severe);
        assert!(ordinal_category(Some(-0.1)).is_err());
    }
}
