//! Rolling one-step forecasts.

use super::{differencing_polynomial, ArimaError, ArimaModel};
use crate::series::TimeSeries;

/// One-step-ahead predictions over `test`.
///
/// Each prediction conditions on every true observation before it: after
/// predicting step `i` the realized value is folded into the state. The
/// coefficients are never re-estimated. `exog_test` holds one raw
/// (undifferenced) row per test value and is ignored by models without
/// exogenous terms.
pub fn rolling_forecast(model: &ArimaModel, test: &[f64], exog_test: &[Vec<f64>]) -> Result<Vec<f64>, ArimaError> {
    let width = model.params.exog.len();
    if width > 0 {
        if exog_test.len() != test.len() {
            return Err(ArimaError::ExogMismatch { expected: test.len(), found: exog_test.len() });
        }
        if let Some(bad) = exog_test.iter().find(|r| r.len() != width) {
            return Err(ArimaError::ExogMismatch { expected: width, found: bad.len() });
        }
    }
    let order = &model.order;
    let diff = differencing_polynomial(order.d, order.seasonal_d, order.period);
    let ar = model.params.ar_lags(order.period);
    let ma = model.params.ma_lags(order.period);
    let beta = &model.params.exog;

    // Histories grow to the right; lag k of step t is `buf[buf.len() - k]`.
    let mut raw = model.tail.raw.clone();
    let mut raw_exog = model.tail.raw_exog.clone();
    let mut z = model.tail.centered.clone();
    let mut e = model.tail.residuals.clone();
    let lagged = |buf: &[f64], k: usize| if k <= buf.len() { buf[buf.len() - k] } else { 0.0 };

    let mut out = Vec::with_capacity(test.len());
    for (i, &actual) in test.iter().enumerate() {
        let exog_term = if width > 0 {
            raw_exog.push(exog_test[i].clone());
            let t = raw_exog.len() - 1;
            (0..width)
                .map(|j| {
                    let dx: f64 = diff.iter().enumerate().map(|(k, a)| a * raw_exog[t - k][j]).sum();
                    dx * beta[j]
                })
                .sum()
        } else {
            0.0
        };
        let mut pred_z = 0.0;
        for &(lag, c) in &ar {
            pred_z += c * lagged(&z, lag);
        }
        for &(lag, c) in &ma {
            pred_z += c * lagged(&e, lag);
        }
        let carried: f64 = diff.iter().enumerate().skip(1).map(|(k, a)| a * lagged(&raw, k)).sum();
        let pred_w = pred_z + model.params.intercept + exog_term;
        out.push(pred_w - carried);

        let w = actual + carried;
        let zt = w - model.params.intercept - exog_term;
        e.push(zt - pred_z);
        z.push(zt);
        raw.push(actual);
    }
    Ok(out)
}

/// [`rolling_forecast`] with exogenous rows built from the test dates.
pub fn forecast_series(model: &ArimaModel, test: &TimeSeries) -> Result<Vec<f64>, ArimaError> {
    let exog = model.exog.matrix(test.dates());
    rolling_forecast(model, test.values(), &exog)
}
