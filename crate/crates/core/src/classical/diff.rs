//! Regular and seasonal differencing.

use super::ArimaError;

/// Coefficients `a_k` of `(1 - B)^d (1 - B^s)^D = Σ a_k B^k`, with `a_0 = 1`.
pub fn differencing_polynomial(d: usize, seasonal_d: usize, period: usize) -> Vec<f64> {
    let mut poly = vec![1.0];
    let mut times = |lag: usize, n: usize| {
        for _ in 0..n {
            let mut next = vec![0.0; poly.len() + lag];
            for (k, &c) in poly.iter().enumerate() {
                next[k] += c;
                next[k + lag] -= c;
            }
            poly = next;
        }
    };
    times(1, d);
    if period > 0 {
        times(period, seasonal_d);
    }
    poly
}

/// Applies `(1 - B)^d (1 - B^s)^D`. The output is `d + s·D` shorter than the input.
pub fn difference(values: &[f64], d: usize, seasonal_d: usize, period: usize) -> Result<Vec<f64>, ArimaError> {
    let lost = d + period * seasonal_d;
    if values.len() <= lost {
        return Err(ArimaError::TooShort { len: values.len(), needed: lost + 1 });
    }
    let mut out = values.to_vec();
    for _ in 0..d {
        out = out.windows(2).map(|w| w[1] - w[0]).collect();
    }
    for _ in 0..seasonal_d {
        out = out[period..].iter().zip(&out).map(|(a, b)| a - b).collect();
    }
    Ok(out)
}

/// Differences each column of a row-major matrix.
pub fn difference_rows(
    rows: &[Vec<f64>],
    d: usize,
    seasonal_d: usize,
    period: usize,
) -> Result<Vec<Vec<f64>>, ArimaError> {
    let Some(width) = rows.first().map(Vec::len) else {
        return Ok(Vec::new());
    };
    let cols = (0..width)
        .map(|j| difference(&rows.iter().map(|r| r[j]).collect::<Vec<_>>(), d, seasonal_d, period))
        .collect::<Result<Vec<_>, _>>()?;
    let n = cols.first().map_or(0, Vec::len);
    Ok((0..n).map(|i| cols.iter().map(|c| c[i]).collect()).collect())
}

/// Rebuilds the original series from its first `d + s·D` values and the differences.
pub fn undifference(head: &[f64], diffed: &[f64], d: usize, seasonal_d: usize, period: usize) -> Vec<f64> {
    let poly = differencing_polynomial(d, seasonal_d, period);
    let mut out = head.to_vec();
    for &w in diffed {
        let t = out.len();
        let past: f64 = poly.iter().enumerate().skip(1).map(|(k, a)| a * out[t - k]).sum();
        out.push(w - past);
    }
    out
}
