//! ARIMA, SARIMA and SARIMAX.
//!
//! Models are fitted by conditional sum of squares: the series is
//! differenced, intercept and exogenous terms are subtracted, and the squared
//! one-step residuals of the multiplicative ARMA recursion are summed with
//! pre-sample residuals held at zero. The sum is minimized with Nelder–Mead.
//! Orders are chosen from a grid by AIC, and forecasts are rolled one step at
//! a time over the test period without refitting.

mod diff;
mod estimate;
mod exog;
mod forecast;
pub mod nelder_mead;
mod roots;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use diff::{difference, difference_rows, differencing_polynomial, undifference};
pub use estimate::{
    aic, css_objective, default_grid, fit, root_penalty, select_order, Candidate, FitConfig, Selection,
};
pub use exog::{fourier_exog, week_of_year, ExogSpec};
pub use forecast::{forecast_series, rolling_forecast};
pub use roots::root_moduli;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ArimaError {
    #[error("invalid order {0}")]
    InvalidOrder(String),
    #[error("series of length {len} is too short; need at least {needed}")]
    TooShort { len: usize, needed: usize },
    #[error("expected {expected} exogenous rows/columns, found {found}")]
    ExogMismatch { expected: usize, found: usize },
    #[error("parameter vector has {found} entries, order needs {expected}")]
    ParamCount { expected: usize, found: usize },
    #[error("optimizer failed: {0}")]
    Optimizer(String),
    #[error("fitted polynomial has a root of modulus {0} (must be > 1)")]
    NonStationary(f64),
    #[error("no order in the grid could be fitted: {0}")]
    NoCandidate(String),
}

/// `(p, d, q)(P, D, Q)_s`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ArimaOrder {
    pub p: usize,
    pub d: usize,
    pub q: usize,
    pub seasonal_p: usize,
    pub seasonal_d: usize,
    pub seasonal_q: usize,
    /// 0 for a non-seasonal model.
    pub period: usize,
}

impl ArimaOrder {
    pub fn arima(p: usize, d: usize, q: usize) -> Result<Self, ArimaError> {
        Self::seasonal(p, d, q, 0, 0, 0, 0)
    }

    pub fn seasonal(
        p: usize,
        d: usize,
        q: usize,
        seasonal_p: usize,
        seasonal_d: usize,
        seasonal_q: usize,
        period: usize,
    ) -> Result<Self, ArimaError> {
        let o = Self { p, d, q, seasonal_p, seasonal_d, seasonal_q, period };
        o.validate()?;
        Ok(o)
    }

    pub fn validate(&self) -> Result<(), ArimaError> {
        let seasonal_terms = self.seasonal_p + self.seasonal_d + self.seasonal_q;
        let ok = (self.period == 0) == (seasonal_terms == 0)
            && self.period != 1
            && self.d + self.seasonal_d <= 2
            && self.p <= 3
            && self.q <= 3
            && self.seasonal_p <= 1
            && self.seasonal_q <= 1;
        if ok {
            Ok(())
        } else {
            Err(ArimaError::InvalidOrder(self.to_string()))
        }
    }

    pub fn is_seasonal(&self) -> bool {
        self.period > 0
    }

    /// Largest lag of the expanded AR polynomial.
    pub fn ar_lag(&self) -> usize {
        self.p + self.period * self.seasonal_p
    }

    pub fn ma_lag(&self) -> usize {
        self.q + self.period * self.seasonal_q
    }

    /// Observations consumed by differencing.
    pub fn diff_lag(&self) -> usize {
        self.d + self.period * self.seasonal_d
    }

    /// ARMA coefficients plus the intercept.
    pub fn arma_params(&self) -> usize {
        1 + self.p + self.q + self.seasonal_p + self.seasonal_q
    }

    fn tuple(&self) -> (usize, usize, usize, usize, usize, usize, usize) {
        (self.p, self.d, self.q, self.seasonal_p, self.seasonal_d, self.seasonal_q, self.period)
    }
}

impl std::fmt::Display for ArimaOrder {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({},{},{})", self.p, self.d, self.q)?;
        if self.period > 0 {
            write!(f, "({},{},{})[{}]", self.seasonal_p, self.seasonal_d, self.seasonal_q, self.period)?;
        }
        Ok(())
    }
}

/// Coefficients of a fitted or hand-built model.
///
/// AR polynomials are `1 - Σ φ_i B^i`, MA polynomials `1 + Σ θ_j B^j`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ArimaParams {
    pub intercept: f64,
    pub ar: Vec<f64>,
    pub ma: Vec<f64>,
    pub seasonal_ar: Vec<f64>,
    pub seasonal_ma: Vec<f64>,
    pub exog: Vec<f64>,
}

impl ArimaParams {
    /// Zero coefficients of the right lengths.
    pub fn zeros(order: &ArimaOrder, n_exog: usize) -> Self {
        Self {
            intercept: 0.0,
            ar: vec![0.0; order.p],
            ma: vec![0.0; order.q],
            seasonal_ar: vec![0.0; order.seasonal_p],
            seasonal_ma: vec![0.0; order.seasonal_q],
            exog: vec![0.0; n_exog],
        }
    }

    fn check(&self, order: &ArimaOrder, n_exog: usize) -> Result<(), ArimaError> {
        let expected = (order.p, order.q, order.seasonal_p, order.seasonal_q, n_exog);
        let found = (self.ar.len(), self.ma.len(), self.seasonal_ar.len(), self.seasonal_ma.len(), self.exog.len());
        if expected != found {
            return Err(ArimaError::ParamCount {
                expected: order.arma_params() - 1 + n_exog,
                found: self.ar.len() + self.ma.len() + self.seasonal_ar.len() + self.seasonal_ma.len() + self.exog.len(),
            });
        }
        Ok(())
    }

    /// Non-zero `(lag, c)` with `z_t = Σ c z_{t-lag} + ...`.
    pub(crate) fn ar_lags(&self, period: usize) -> Vec<(usize, f64)> {
        let poly = lag_product(&self.ar, &self.seasonal_ar, period, -1.0);
        poly.iter().enumerate().skip(1).filter(|(_, c)| **c != 0.0).map(|(l, c)| (l, -c)).collect()
    }

    /// Non-zero `(lag, c)` with `... + Σ c e_{t-lag}`.
    pub(crate) fn ma_lags(&self, period: usize) -> Vec<(usize, f64)> {
        let poly = lag_product(&self.ma, &self.seasonal_ma, period, 1.0);
        poly.iter().enumerate().skip(1).filter(|(_, c)| **c != 0.0).map(|(l, c)| (l, *c)).collect()
    }

    /// Moduli of the roots of every AR and MA factor.
    pub fn root_moduli(&self, period: usize) -> Vec<f64> {
        let mut out = Vec::new();
        for (coefs, sign) in [(&self.ar, -1.0), (&self.ma, 1.0)] {
            let mut poly = vec![1.0];
            poly.extend(coefs.iter().map(|c| sign * c));
            out.extend(root_moduli(&poly));
        }
        for coefs in [&self.seasonal_ar, &self.seasonal_ma] {
            // 1 ± c z^s: all s roots share modulus |c|^(-1/s); seasonal orders are at most 1
            if let Some(&c) = coefs.first() {
                if c != 0.0 && period > 0 {
                    let m = c.abs().powf(-1.0 / period as f64);
                    out.extend(std::iter::repeat_n(m, period));
                }
            }
        }
        out
    }
}

/// Dense coefficients of `(1 + sign Σ a_i B^i)(1 + sign Σ A_j B^{js})`.
fn lag_product(regular: &[f64], seasonal: &[f64], period: usize, sign: f64) -> Vec<f64> {
    let mut left = vec![1.0];
    left.extend(regular.iter().map(|c| sign * c));
    let mut right = vec![0.0; seasonal.len() * period + 1];
    right[0] = 1.0;
    for (j, c) in seasonal.iter().enumerate() {
        right[(j + 1) * period] += sign * c;
    }
    let mut out = vec![0.0; left.len() + right.len() - 1];
    for (i, a) in left.iter().enumerate() {
        for (j, b) in right.iter().enumerate() {
            out[i + j] += a * b;
        }
    }
    out
}

/// What a rolling forecast needs from the end of the training data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainTail {
    /// Last `d + s·D` raw observations.
    pub raw: Vec<f64>,
    /// Raw exogenous rows matching `raw`.
    pub raw_exog: Vec<Vec<f64>>,
    /// Last `p + s·P` differenced, de-meaned values.
    pub centered: Vec<f64>,
    /// Last `q + s·Q` one-step residuals.
    pub residuals: Vec<f64>,
}

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArimaModel {
    pub version: u32,
    pub order: ArimaOrder,
    pub exog: ExogSpec,
    pub params: ArimaParams,
    /// Innovation variance, `css / n_eff`.
    pub sigma2: f64,
    /// Residuals entering the sum of squares.
    pub n_eff: usize,
    /// Penalty-free conditional sum of squares.
    pub css: f64,
    pub tail: TrainTail,
    pub iterations: usize,
    pub converged: bool,
}

impl ArimaModel {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    /// Estimated coefficients (intercept, ARMA and exogenous terms).
    pub fn n_params(&self) -> usize {
        self.order.arma_params() + self.params.exog.len()
    }
}
