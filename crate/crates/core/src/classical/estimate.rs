//! Conditional-sum-of-squares estimation and AIC order selection.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use super::nelder_mead::{minimize, NelderMeadConfig};
use super::{
    difference, difference_rows, ArimaError, ArimaModel, ArimaOrder, ArimaParams, ExogSpec, TrainTail,
    MODEL_FORMAT_VERSION,
};
use crate::series::TimeSeries;

/// Roots closer to the unit circle than this are penalized.
const ROOT_MARGIN: f64 = 1.001;
/// Penalty weight relative to the total sum of squares of the differenced data.
const PENALTY_WEIGHT: f64 = 1e4;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FitConfig {
    pub nelder_mead: NelderMeadConfig,
}

/// `Σ max(0, 1.001 - |root|)²` over every AR and MA factor root.
pub fn root_penalty(params: &ArimaParams, period: usize) -> f64 {
    params.root_moduli(period).iter().map(|r| (ROOT_MARGIN - r).max(0.0).powi(2)).sum()
}

/// `w_t - μ - x_t·β`.
pub(crate) fn centered(w: &[f64], exog: &[Vec<f64>], params: &ArimaParams) -> Vec<f64> {
    w.iter()
        .zip(exog)
        .map(|(v, row)| v - params.intercept - row.iter().zip(&params.exog).map(|(x, b)| x * b).sum::<f64>())
        .collect()
}

/// One-step residuals of the ARMA recursion, zero before `start`.
pub(crate) fn residuals(z: &[f64], ar: &[(usize, f64)], ma: &[(usize, f64)], start: usize) -> Vec<f64> {
    let mut e = vec![0.0; z.len()];
    for t in start..z.len() {
        let mut pred = 0.0;
        for &(lag, c) in ar {
            pred += c * z[t - lag];
        }
        for &(lag, c) in ma {
            if lag <= t {
                pred += c * e[t - lag];
            }
        }
        e[t] = z[t] - pred;
    }
    e
}

fn no_exog_rows(n: usize) -> Vec<Vec<f64>> {
    vec![Vec::new(); n]
}

fn check_exog(rows: &[Vec<f64>], n: usize, width: usize) -> Result<(), ArimaError> {
    if rows.len() != n {
        return Err(ArimaError::ExogMismatch { expected: n, found: rows.len() });
    }
    if let Some(bad) = rows.iter().find(|r| r.len() != width) {
        return Err(ArimaError::ExogMismatch { expected: width, found: bad.len() });
    }
    Ok(())
}

/// Conditional sum of squared one-step residuals of `differenced` plus the
/// unit-root penalty. `exog` holds one (differenced) row per value.
///
/// Returns `+∞` for parameters that produce non-finite residuals or do not
/// fit `order`.
pub fn css_objective(params: &ArimaParams, differenced: &[f64], exog: &[Vec<f64>], order: &ArimaOrder) -> f64 {
    if params.check(order, params.exog.len()).is_err()
        || check_exog(exog, differenced.len(), params.exog.len()).is_err()
        || differenced.len() <= order.ar_lag()
    {
        return f64::INFINITY;
    }
    let z = centered(differenced, exog, params);
    let e = residuals(&z, &params.ar_lags(order.period), &params.ma_lags(order.period), order.ar_lag());
    let ss: f64 = e[order.ar_lag()..].iter().map(|v| v * v).sum();
    let penalty = root_penalty(params, order.period);
    let total = if penalty > 0.0 {
        let n = differenced.len() as f64;
        let mean = differenced.iter().sum::<f64>() / n;
        let tss: f64 = differenced.iter().map(|v| (v - mean).powi(2)).sum();
        ss + PENALTY_WEIGHT * (tss + f64::MIN_POSITIVE) * penalty
    } else {
        ss
    };
    if total.is_finite() {
        total
    } else {
        f64::INFINITY
    }
}

impl ArimaModel {
    /// Model with the given coefficients conditioned on `train`: residuals,
    /// σ² and the forecasting tail are computed, nothing is estimated.
    pub fn from_params(
        order: ArimaOrder,
        exog: ExogSpec,
        params: ArimaParams,
        train: &TimeSeries,
    ) -> Result<Self, ArimaError> {
        order.validate()?;
        params.check(&order, exog.columns())?;
        let raw_exog = exog.matrix(train.dates());
        let (w, xd) = differenced_inputs(train.values(), &raw_exog, &order, &exog)?;
        let start = order.ar_lag();
        if w.len() <= start {
            return Err(ArimaError::TooShort { len: train.len(), needed: order.diff_lag() + start + 1 });
        }
        let z = centered(&w, &xd, &params);
        let e = residuals(&z, &params.ar_lags(order.period), &params.ma_lags(order.period), start);
        let css: f64 = e[start..].iter().map(|v| v * v).sum();
        let n_eff = w.len() - start;
        let keep = order.diff_lag();
        let n = train.len();
        let tail = TrainTail {
            raw: train.values()[n - keep..].to_vec(),
            raw_exog: raw_exog[n - keep..].to_vec(),
            centered: z[z.len() - order.ar_lag()..].to_vec(),
            residuals: e[e.len() - order.ma_lag().min(e.len())..].to_vec(),
        };
        Ok(Self {
            version: MODEL_FORMAT_VERSION,
            order,
            exog,
            params,
            sigma2: (css / n_eff as f64).max(f64::MIN_POSITIVE),
            n_eff,
            css,
            tail,
            iterations: 0,
            converged: true,
        })
    }
}

fn differenced_inputs(
    values: &[f64],
    raw_exog: &[Vec<f64>],
    order: &ArimaOrder,
    exog: &ExogSpec,
) -> Result<(Vec<f64>, Vec<Vec<f64>>), ArimaError> {
    let w = difference(values, order.d, order.seasonal_d, order.period)?;
    let xd = if exog.columns() == 0 {
        no_exog_rows(w.len())
    } else {
        difference_rows(raw_exog, order.d, order.seasonal_d, order.period)?
    };
    Ok((w, xd))
}

/// Minimizes the conditional sum of squares for `order`.
///
/// The search runs in standardized units: the intercept is expressed as an
/// offset from the mean of the differenced data in units of its standard
/// deviation, and exogenous coefficients in units of that deviation. The
/// start point is the mean intercept with every other coefficient at 0.1.
pub fn fit(train: &TimeSeries, order: ArimaOrder, exog: ExogSpec, cfg: &FitConfig) -> Result<ArimaModel, ArimaError> {
    order.validate()?;
    let raw_exog = exog.matrix(train.dates());
    let (w, xd) = differenced_inputs(train.values(), &raw_exog, &order, &exog)?;
    let n_coef = order.p + order.q + order.seasonal_p + order.seasonal_q;
    let n_exog = exog.columns();
    let k = 1 + n_coef + n_exog;
    if w.len() <= order.ar_lag() + k {
        return Err(ArimaError::TooShort { len: train.len(), needed: order.diff_lag() + order.ar_lag() + k + 1 });
    }

    let n = w.len() as f64;
    let center = w.iter().sum::<f64>() / n;
    let sd = (w.iter().map(|v| (v - center).powi(2)).sum::<f64>() / n).sqrt();
    let scale = if sd > 0.0 { sd } else { 1.0 };
    let decode = |u: &[f64]| -> ArimaParams {
        let mut it = u[1..].iter().copied();
        let mut take = |m: usize| it.by_ref().take(m).collect::<Vec<f64>>();
        ArimaParams {
            intercept: center + scale * u[0],
            ar: take(order.p),
            ma: take(order.q),
            seasonal_ar: take(order.seasonal_p),
            seasonal_ma: take(order.seasonal_q),
            exog: take(n_exog).into_iter().map(|b| b * scale).collect(),
        }
    };
    let mut start = vec![0.1; k];
    start[0] = 0.0;
    let inv_scale2 = 1.0 / (scale * scale);
    let found = minimize(|u| css_objective(&decode(u), &w, &xd, &order) * inv_scale2, &start, &cfg.nelder_mead)
        .map_err(|_| ArimaError::Optimizer(format!("{order}: every simplex vertex was non-finite")))?;

    let params = decode(&found.x);
    if let Some(&min) = params.root_moduli(order.period).iter().min_by(|a, b| a.total_cmp(b)) {
        if min <= 1.0 {
            return Err(ArimaError::NonStationary(min));
        }
    }
    let mut model = ArimaModel::from_params(order, exog, params, train)?;
    model.iterations = found.iterations;
    model.converged = found.converged;
    Ok(model)
}

/// `n_eff · ln σ² + 2k`, with `k` the number of estimated coefficients.
pub fn aic(model: &ArimaModel) -> f64 {
    model.n_eff as f64 * model.sigma2.ln() + 2.0 * model.n_params() as f64
}

/// The order grid searched by default.
///
/// Non-seasonal: `p, q ∈ 0..=3`, `d ∈ {0, 1}`. Seasonal adds
/// `P, D, Q ∈ {0, 1}` at `period`; points with no seasonal term are the plain
/// non-seasonal orders.
pub fn default_grid(seasonal: bool, period: usize) -> Vec<ArimaOrder> {
    let seasonal_terms: Vec<(usize, usize, usize)> = if seasonal {
        (0..8).map(|b| (b >> 2 & 1, b >> 1 & 1, b & 1)).collect()
    } else {
        vec![(0, 0, 0)]
    };
    let mut grid = Vec::new();
    for &(sp, sd, sq) in &seasonal_terms {
        for d in 0..=1 {
            for p in 0..=3 {
                for q in 0..=3 {
                    let s = if sp + sd + sq > 0 { period } else { 0 };
                    if let Ok(o) = ArimaOrder::seasonal(p, d, q, sp, sd, sq, s) {
                        grid.push(o);
                    }
                }
            }
        }
    }
    grid
}

/// One grid point of an order search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub order: ArimaOrder,
    pub aic: Option<f64>,
    pub n_params: usize,
    pub error: Option<String>,
}

#[derive(Debug, Clone)]
pub struct Selection {
    pub order: ArimaOrder,
    pub model: ArimaModel,
    pub aic: f64,
    pub candidates: Vec<Candidate>,
}

/// Lower AIC wins, then fewer parameters, then the smaller order tuple.
pub(crate) fn compare_candidates(a: (f64, usize, &ArimaOrder), b: (f64, usize, &ArimaOrder)) -> Ordering {
    a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then_with(|| a.2.tuple().cmp(&b.2.tuple()))
}

/// Fits every order in `grid` and keeps the one with the lowest AIC.
pub fn select_order(
    train: &TimeSeries,
    grid: &[ArimaOrder],
    exog: ExogSpec,
    cfg: &FitConfig,
) -> Result<Selection, ArimaError> {
    let mut best: Option<(f64, ArimaModel)> = None;
    let mut candidates = Vec::with_capacity(grid.len());
    for &order in grid {
        match fit(train, order, exog, cfg) {
            Ok(model) => {
                let score = aic(&model);
                candidates.push(Candidate { order, aic: Some(score), n_params: model.n_params(), error: None });
                let better = match &best {
                    None => true,
                    Some((s, m)) => {
                        compare_candidates((score, model.n_params(), &order), (*s, m.n_params(), &m.order))
                            == Ordering::Less
                    }
                };
                if better {
                    best = Some((score, model));
                }
            }
            Err(e) => candidates.push(Candidate {
                order,
                aic: None,
                n_params: order.arma_params() + exog.columns(),
                error: Some(e.to_string()),
            }),
        }
    }
    match best {
        Some((aic, model)) => Ok(Selection { order: model.order, model, aic, candidates }),
        None => {
            let reasons: Vec<String> = candidates.iter().filter_map(|c| c.error.clone()).take(3).collect();
            Err(ArimaError::NoCandidate(reasons.join("; ")))
        }
    }
}
