//! First-order low-pass filtering of multichannel sequences.

use crate::error::{Error, Result};

/// Exponential smoothing: `y[0] = x[0]`, `y[t] = a*x[t] + (1-a)*y[t-1]`
/// per channel, with smoothing factor `a` in `(0, 1]` (`a = 1` is the
/// identity).
pub fn low_pass(seq: &[Vec<f64>], smoothing: f64) -> Result<Vec<Vec<f64>>> {
    if !smoothing.is_finite() || smoothing <= 0.0 || smoothing > 1.0 {
        return Err(Error::InvalidInput(format!(
            "smoothing must lie in (0, 1], got {smoothing}"
        )));
    }
    if seq.is_empty() {
        return Err(Error::InvalidInput("sequence must have T >= 1".into()));
    }
    let dim = seq[0].len();
    if seq.iter().any(|row| row.len() != dim) {
        return Err(Error::DimensionMismatch(
            "all rows must share the same dimension".into(),
        ));
    }
    let mut out = Vec::with_capacity(seq.len());
    out.push(seq[0].clone());
    for t in 1..seq.len() {
        let prev = &out[t - 1];
        let row = seq[t]
            .iter()
            .zip(prev)
            .map(|(x, y)| smoothing * x + (1.0 - smoothing) * y)
            .collect();
        out.push(row);
    }
    Ok(out)
}
