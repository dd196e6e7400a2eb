use serde::{Deserialize, Serialize};

use crate::error::{CvmError, Result};

/// Number of households used for the national scenario (2020 registry count).
pub const DEFAULT_HOUSEHOLDS: u64 = 23_093_108;
/// Payment period of the valuation scenario, in years.
pub const DEFAULT_YEARS: u32 = 5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NationalValue {
    pub mean_wtp: f64,
    pub households: u64,
    pub years: u32,
    /// KRW per year.
    pub annual: f64,
    /// KRW over the whole payment period.
    pub total: f64,
}

/// Scales a per-household annual WTP to the whole population and period.
pub fn aggregate_value(mean_wtp: f64, households: u64, years: u32) -> Result<NationalValue> {
    if !(mean_wtp.is_finite() && mean_wtp > 0.0) {
        return Err(CvmError::InvalidArgument(format!(
            "mean WTP must be positive, got {mean_wtp}"
        )));
    }
    if households == 0 || years == 0 {
        return Err(CvmError::InvalidArgument(
            "household count and years must be positive".into(),
        ));
    }
    let annual = mean_wtp * households as f64;
    let total = annual * f64::from(years);
    if !total.is_finite() {
        return Err(CvmError::InvalidArgument("aggregate value overflows".into()));
    }
    Ok(NationalValue {
        mean_wtp,
        households,
        years,
        annual,
        total,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trivial_cases() {
        let v = aggregate_value(123.5, 1, 1).unwrap();
        assert_eq!((v.annual, v.total), (123.5, 123.5));
        let v = aggregate_value(1000.0, 10, 2).unwrap();
        assert_eq!((v.annual, v.total), (10_000.0, 20_000.0));
    }

    #[test]
    fn rejects_non_positive() {
        assert!(aggregate_value(0.0, 10, 1).is_err());
        assert!(aggregate_value(-5.0, 10, 1).is_err());
        assert!(aggregate_value(5.0, 0, 1).is_err());
        assert!(aggregate_value(5.0, 10, 0).is_err());
        assert!(aggregate_value(f64::MAX, u64::MAX, u32::MAX).is_err());
    }
}
