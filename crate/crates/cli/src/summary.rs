//! Cohort aggregation: mean ± population standard deviation per metric.

use proseg_core::metrics::round_sig6;
use serde::Serialize;

#[derive(Debug, Clone, Serialize)]
pub struct MetricSummary {
    pub mean: f64,
    pub sd: f64,
    pub n: usize,
}

/// Population (not sample) standard deviation, matching "0.86 ± 0.04"-style
/// reporting. Returns None for an empty input.
pub fn mean_sd(values: &[f64]) -> Option<MetricSummary> {
    if values.is_empty() {
        return None;
    }
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
    Some(MetricSummary {
        mean: round_sig6(mean),
        sd: round_sig6(var.sqrt()),
        n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_case_cohort() {
        let s = mean_sd(&[0.8, 0.9]).unwrap();
        assert!((s.mean - 0.85).abs() < 1e-12);
        assert!((s.sd - 0.05).abs() < 1e-12);
        assert_eq!(s.n, 2);
    }

    #[test]
    fn identical_values_have_zero_sd() {
        let s = mean_sd(&[1.0, 1.0, 1.0]).unwrap();
        assert_eq!(s.mean, 1.0);
        assert_eq!(s.sd, 0.0);
    }

    #[test]
    fn empty_is_none() {
        assert!(mean_sd(&[]).is_none());
    }
}
