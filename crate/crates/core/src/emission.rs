//! State-dependent Gaussian AR(p) densities.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;

use crate::math::LN_2PI;
use crate::model::{Emission, LabeledSeries, ModelSpec, Params};
use crate::{Error, Result};

impl Emission {
    /// Conditional mean of `x_t` given lags, written into `out`.
    pub fn conditional_mean(&self, lags: &[&[f64]], out: &mut [f64]) {
        out.copy_from_slice(&self.mean);
        for (coeffs, lag) in self.ar_coeffs.iter().zip(lags) {
            for ((o, c), x) in out.iter_mut().zip(coeffs).zip(lag.iter()) {
                *o += c * x;
            }
        }
    }

    /// `log N(x_t; mean + sum_k w_k x_{t-k}, diag(variances))`, where
    /// `lags[k - 1]` is `x_{t-k}`.
    pub fn logpdf(&self, current: &[f64], lags: &[&[f64]]) -> Result<f64> {
        if lags.len() != self.ar_coeffs.len() {
            return Err(Error::Domain(format!(
                "AR({}) emission needs {} lagged rows, got {}",
                self.ar_coeffs.len(),
                self.ar_coeffs.len(),
                lags.len()
            )));
        }
        let dim = self.mean.len();
        if current.len() != dim || lags.iter().any(|l| l.len() != dim) {
            return Err(Error::Dimension(format!("observation rows must have width {dim}")));
        }
        Ok(self.logpdf_unchecked(current, lags))
    }

    pub(crate) fn logpdf_unchecked(&self, current: &[f64], lags: &[&[f64]]) -> f64 {
        let mut acc = 0.0;
        for d in 0..self.mean.len() {
            let mut mu = self.mean[d];
            for (coeffs, lag) in self.ar_coeffs.iter().zip(lags) {
                mu += coeffs[d] * lag[d];
            }
            let var = self.variances[d];
            let r = current[d] - mu;
            acc += -0.5 * (LN_2PI + var.ln() + r * r / var);
        }
        acc
    }
}

/// Emission log-density of `state` at the last row of `window`. The window
/// holds `p` lagged rows followed by the current row, oldest first.
pub fn emission_logpdf(params: &Params, state: usize, window: &[&[f64]]) -> Result<f64> {
    let em = params
        .emissions
        .get(state)
        .ok_or_else(|| Error::Domain(format!("state {state} out of range")))?;
    let p = em.ar_coeffs.len();
    if window.len() != p + 1 {
        return Err(Error::Domain(format!(
            "window must hold {p} lagged rows plus the current row, got {} rows",
            window.len()
        )));
    }
    let current = window[p];
    let lags: Vec<&[f64]> = window[..p].iter().rev().copied().collect();
    em.logpdf(current, &lags)
}

/// Per-time, per-state emission log-densities of a series.
///
/// The first `p` rows are conditioned upon and hold 0 for every state, so
/// they contribute nothing to products over time.
#[derive(Debug, Clone, PartialEq)]
pub struct EmissionTable {
    n_states: usize,
    /// Row-major `T x J`.
    values: Vec<f64>,
    /// Prefix sums per state: `cum[t * J + j] = sum_{s < t} values[s][j]`,
    /// with `T + 1` rows.
    cum: Vec<f64>,
}

impl EmissionTable {
    pub fn new(spec: &ModelSpec, params: &Params, series: &LabeledSeries) -> Result<Self> {
        if series.dim() != spec.obs_dim {
            return Err(Error::Dimension(format!(
                "series {} has {} columns, model expects {}",
                series.id,
                series.dim(),
                spec.obs_dim
            )));
        }
        let j = spec.n_states;
        let n = series.len();
        let p = spec.ar_order;
        let mut values = vec![0.0; n * j];
        let mut lags: Vec<&[f64]> = Vec::with_capacity(p);
        for t in p..n {
            lags.clear();
            lags.extend((1..=p).map(|k| series.row(t - k)));
            for (s, em) in params.emissions.iter().enumerate() {
                values[t * j + s] = em.logpdf_unchecked(series.row(t), &lags);
            }
        }
        Ok(Self::from_values(j, values))
    }

    /// Build directly from a row-major `T x J` table of log-densities.
    pub fn from_values(n_states: usize, values: Vec<f64>) -> Self {
        let n = values.len() / n_states;
        let mut cum = vec![0.0; (n + 1) * n_states];
        for t in 0..n {
            for s in 0..n_states {
                cum[(t + 1) * n_states + s] = cum[t * n_states + s] + values[t * n_states + s];
            }
        }
        Self { n_states, values, cum }
    }

    pub fn len(&self) -> usize {
        self.values.len() / self.n_states
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    #[inline]
    pub fn at(&self, t: usize, state: usize) -> f64 {
        self.values[t * self.n_states + state]
    }

    /// `log f_state(x_{start..end})` over the half-open range.
    #[inline]
    pub fn segment(&self, state: usize, start: usize, end: usize) -> f64 {
        self.cum[end * self.n_states + state] - self.cum[start * self.n_states + state]
    }
}
