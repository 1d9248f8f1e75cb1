//! Trajectory diagnostics: per-time MSE, relative energy error and the
//! stiffness-aware index, plus cross-trajectory aggregation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrate::{State, Trajectory};

/// `(‖p̂−p‖² + ‖q̂−q‖²) / 2d` at every grid point.
pub fn mse_over_time(predicted: &Trajectory, observed: &Trajectory) -> Result<Vec<f64>> {
    if predicted.states.len() != observed.states.len()
        || predicted.grid.step != observed.grid.step
        || predicted.grid.start != observed.grid.start
    {
        return Err(Error::Structural(format!(
            "grid mismatch: {} points at step {} vs {} points at step {}",
            predicted.states.len(),
            predicted.grid.step,
            observed.states.len(),
            observed.grid.step
        )));
    }
    if predicted.dim() != observed.dim() {
        return Err(Error::Structural("trajectory dimensions differ".into()));
    }
    let d = predicted.dim() as f64;
    Ok(predicted
        .states
        .iter()
        .zip(&observed.states)
        .map(|(a, b)| a.squared_distance(b) / (2.0 * d))
        .collect())
}

/// `|H(xₜ) − H(x₀)| / |H(x₀)|` along `predicted`, with `h` the true energy.
pub fn relative_energy_error<F>(h: F, predicted: &Trajectory) -> Result<Vec<f64>>
where
    F: Fn(&State) -> Result<f64>,
{
    let h0 = h(predicted.initial())?;
    if h0 == 0.0 || !h0.is_finite() {
        return Err(Error::UndefinedMetric { index: 0 });
    }
    predicted
        .states
        .iter()
        .map(|s| Ok((h(s)? - h0).abs() / h0.abs()))
        .collect()
}

fn norm(s: &State) -> f64 {
    s.p.iter().chain(&s.q).map(|x| x * x).sum::<f64>().sqrt()
}

/// Stiffness-aware index for each interval of `observed`.
pub fn sai(observed: &Trajectory) -> Result<Vec<f64>> {
    if observed.states.len() < 2 {
        return Err(Error::Structural("SAI needs at least two states".into()));
    }
    let dt = observed.grid.step;
    observed
        .states
        .windows(2)
        .enumerate()
        .map(|(i, w)| {
            let n = norm(&w[0]);
            if n == 0.0 {
                return Err(Error::UndefinedMetric { index: i });
            }
            Ok(w[1].squared_distance(&w[0]).sqrt() / dt / n)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Statistic {
    Mean,
    Median,
    /// Linear-interpolated percentile in `[0, 100]`.
    Percentile(f64),
}

/// Percentile of `values` with linear interpolation between order statistics.
pub fn percentile(values: &[f64], pct: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::Structural("percentile of an empty set".into()));
    }
    if !(0.0..=100.0).contains(&pct) {
        return Err(Error::Structural(format!("percentile {pct} outside [0, 100]")));
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = pct / 100.0 * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    Ok(v[lo] + (v[hi] - v[lo]) * (pos - lo as f64))
}

fn statistic(values: &[f64], stat: Statistic) -> Result<f64> {
    match stat {
        Statistic::Mean => {
            if values.is_empty() {
                return Err(Error::Structural("mean of an empty set".into()));
            }
            Ok(values.iter().sum::<f64>() / values.len() as f64)
        }
        Statistic::Median => percentile(values, 50.0),
        Statistic::Percentile(x) => percentile(values, x),
    }
}

/// Pointwise statistic across equally long series.
pub fn aggregate(series: &[Vec<f64>], stat: Statistic) -> Result<Vec<f64>> {
    let first = series
        .first()
        .ok_or_else(|| Error::Structural("nothing to aggregate".into()))?;
    if series.iter().any(|s| s.len() != first.len()) {
        return Err(Error::Structural("series lengths differ".into()));
    }
    let mut column = vec![0.0; series.len()];
    (0..first.len())
        .map(|t| {
            for (c, s) in column.iter_mut().zip(series) {
                *c = s[t];
            }
            statistic(&column, stat)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bin {
    pub left: f64,
    pub right: f64,
    pub density: f64,
}

/// Density histogram with `bins` equal-width bins spanning the data.
pub fn histogram(values: &[f64], bins: usize) -> Result<Vec<Bin>> {
    if values.is_empty() || bins == 0 {
        return Err(Error::Structural("histogram needs values and at least one bin".into()));
    }
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let width = if hi > lo { (hi - lo) / bins as f64 } else { 1.0 };
    let mut counts = vec![0usize; bins];
    for &v in values {
        let k = (((v - lo) / width) as usize).min(bins - 1);
        counts[k] += 1;
    }
    let n = values.len() as f64;
    Ok(counts
        .into_iter()
        .enumerate()
        .map(|(k, c)| Bin {
            left: lo + k as f64 * width,
            right: lo + (k + 1) as f64 * width,
            density: c as f64 / (n * width),
        })
        .collect())
}

/// Lower clamp used only when exporting log-scale plot data.
pub fn plot_floor(v: f64) -> f64 {
    v.max(1e-16)
}
