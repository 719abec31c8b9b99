//! Regression quality metrics.

use serde::{Deserialize, Serialize};

use super::PredictorError;

/// MSE, RMSE, MAE, and R² of a prediction vector against actuals.
///
/// `r_squared` is `None` when the actuals are constant — the variance
/// denominator vanishes and the score is undefined.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionMetrics {
    pub mse: f64,
    pub rmse: f64,
    pub mae: f64,
    pub r_squared: Option<f64>,
}

pub fn regression_metrics(
    predicted: &[f64],
    actual: &[f64],
) -> Result<RegressionMetrics, PredictorError> {
    if predicted.is_empty() {
        return Err(PredictorError::EmptyInput);
    }
    if predicted.len() != actual.len() {
        return Err(PredictorError::LengthMismatch {
            expected: actual.len(),
            got: predicted.len(),
        });
    }
    let n = actual.len() as f64;
    let mut sse = 0.0;
    let mut abs_err = 0.0;
    for (p, a) in predicted.iter().zip(actual) {
        let err = p - a;
        sse += err * err;
        abs_err += err.abs();
    }
    let mean = actual.iter().sum::<f64>() / n;
    let deviation: f64 = actual.iter().map(|a| (a - mean) * (a - mean)).sum();
    let mse = sse / n;
    Ok(RegressionMetrics {
        mse,
        rmse: libm::sqrt(mse),
        mae: abs_err / n,
        r_squared: if deviation > 0.0 {
            Some(1.0 - sse / deviation)
        } else {
            None
        },
    })
}
