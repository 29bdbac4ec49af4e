//! Welch's unequal-variance two-sample t-test.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use super::ClassifyError;

pub const SIGNIFICANCE_LEVEL: f64 = 0.05;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TTest {
    pub t: f64,
    /// Welch–Satterthwaite degrees of freedom.
    pub df: f64,
    /// Two-sided p-value.
    pub p_value: f64,
    pub significant: bool,
}

fn mean_var(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

/// Compares two accuracy samples; significant when the two-sided p < 0.05.
pub fn t_test(a: &[f64], b: &[f64]) -> Result<TTest, ClassifyError> {
    if a.len() < 2 || b.len() < 2 {
        return Err(ClassifyError::TooFewSamples(a.len(), b.len()));
    }
    let (ma, va) = mean_var(a);
    let (mb, vb) = mean_var(b);
    let (sa, sb) = (va / a.len() as f64, vb / b.len() as f64);
    let se2 = sa + sb;
    if se2 <= 0.0 {
        return Err(ClassifyError::ZeroVariance);
    }
    let t = (ma - mb) / se2.sqrt();
    let df = se2 * se2
        / (sa * sa / (a.len() as f64 - 1.0) + sb * sb / (b.len() as f64 - 1.0));
    let dist = StudentsT::new(0.0, 1.0, df).map_err(|e| ClassifyError::Statistics(e.to_string()))?;
    let p_value = (2.0 * (1.0 - dist.cdf(t.abs()))).clamp(0.0, 1.0);
    Ok(TTest {
        t,
        df,
        p_value,
        significant: p_value < SIGNIFICANCE_LEVEL,
    })
}
