//! Accelerometer feature pipeline: raw tri-axial acceleration at a nominal
//! sampling rate to one row per second of `log(mean VeDBA)`, `mean pitch`
//! and `log(sd pitch)`.
//!
//! Steps: every axis is smoothed with a centred moving average
//! (`smoothing_window`, default 10 samples); VeDBA is the norm of the
//! dynamic acceleration, i.e. each axis minus its running mean over
//! `static_window` samples (0 keeps the raw axes); pitch is
//! `asin(running mean of surge)` in degrees. Windows of `rate` samples do
//! not overlap; a trailing partial window is dropped.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::model::LabeledSeries;
use crate::{Error, Result};

/// Values below this are floored before taking logs.
pub const LOG_FLOOR: f64 = 1e-8;

/// Centred moving average. For an even window the extra sample is taken
/// after the centre. Near the edges the window shrinks to the available
/// samples.
pub fn moving_average(signal: &[f64], window: usize) -> Result<Vec<f64>> {
    if signal.is_empty() {
        return Err(Error::Empty("signal is empty".into()));
    }
    if window == 0 {
        return Err(Error::Domain("moving-average window must be >= 1".into()));
    }
    let n = signal.len();
    let before = (window - 1) / 2;
    let after = window / 2;
    let mut prefix = vec![0.0; n + 1];
    for (i, &x) in signal.iter().enumerate() {
        prefix[i + 1] = prefix[i] + x;
    }
    Ok((0..n)
        .map(|i| {
            let lo = i.saturating_sub(before);
            let hi = (i + after).min(n - 1);
            if window == 1 {
                signal[i]
            } else {
                (prefix[hi + 1] - prefix[lo]) / (hi + 1 - lo) as f64
            }
        })
        .collect())
}

fn running_mean_or_raw(signal: &[f64], window: usize) -> Result<Vec<f64>> {
    if window == 0 {
        Ok(signal.to_vec())
    } else {
        moving_average(signal, window)
    }
}

/// Per-sample VeDBA. With `static_window > 0` each axis first has its
/// running mean over that many samples removed; `0` uses the raw axes.
pub fn vedba(surge: &[f64], sway: &[f64], heave: &[f64], static_window: usize) -> Result<Vec<f64>> {
    if surge.len() != sway.len() || surge.len() != heave.len() {
        return Err(Error::Dimension(format!(
            "axis lengths differ: {}, {}, {}",
            surge.len(),
            sway.len(),
            heave.len()
        )));
    }
    if surge.is_empty() {
        return Err(Error::Empty("signal is empty".into()));
    }
    let dynamic = |axis: &[f64]| -> Result<Vec<f64>> {
        if static_window == 0 {
            return Ok(axis.to_vec());
        }
        let stat = moving_average(axis, static_window)?;
        Ok(axis.iter().zip(stat).map(|(a, s)| a - s).collect())
    };
    let (x, y, z) = (dynamic(surge)?, dynamic(sway)?, dynamic(heave)?);
    Ok((0..x.len())
        .map(|i| (x[i] * x[i] + y[i] * y[i] + z[i] * z[i]).sqrt())
        .collect())
}

/// Per-sample pitch in degrees, `asin` of the running mean of surge (in g)
/// clamped to `[-1, 1]`. `static_window = 0` uses the raw surge.
pub fn pitch(surge: &[f64], static_window: usize) -> Result<Vec<f64>> {
    if surge.is_empty() {
        return Err(Error::Empty("signal is empty".into()));
    }
    Ok(running_mean_or_raw(surge, static_window)?
        .into_iter()
        .map(|s| s.clamp(-1.0, 1.0).asin().to_degrees())
        .collect())
}

/// Raw tri-axial acceleration in g with optional per-sample labels.
#[derive(Debug, Clone, PartialEq)]
pub struct RawAccel {
    pub time: Vec<f64>,
    pub surge: Vec<f64>,
    pub sway: Vec<f64>,
    pub heave: Vec<f64>,
    pub labels: Option<Vec<usize>>,
}

impl RawAccel {
    pub fn validate(&self) -> Result<()> {
        let n = self.time.len();
        if self.surge.len() != n || self.sway.len() != n || self.heave.len() != n {
            return Err(Error::Dimension("time and axis columns differ in length".into()));
        }
        if let Some(l) = &self.labels {
            if l.len() != n {
                return Err(Error::Dimension("label column differs in length".into()));
            }
        }
        if self.time.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Domain("timestamps must be strictly increasing".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeatureOptions {
    /// Nominal samples per second; also the window length.
    pub rate: usize,
    /// Moving-average smoothing applied to every axis first; 1 disables it.
    pub smoothing_window: usize,
    /// Running-mean window for the static component; 0 uses raw axes for
    /// VeDBA and raw surge for pitch.
    pub static_window: usize,
}

impl Default for FeatureOptions {
    fn default() -> Self {
        Self {
            rate: 40,
            smoothing_window: 10,
            static_window: 40,
        }
    }
}

/// One row per window.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSeries {
    pub start_time: Vec<f64>,
    pub log_mean_vedba: Vec<f64>,
    pub mean_pitch: Vec<f64>,
    pub log_sd_pitch: Vec<f64>,
    /// Majority label per window (lowest label on ties).
    pub labels: Option<Vec<usize>>,
    pub warnings: Vec<String>,
}

impl FeatureSeries {
    pub fn len(&self) -> usize {
        self.start_time.len()
    }

    pub fn is_empty(&self) -> bool {
        self.start_time.is_empty()
    }

    /// Three-column series `(log_mean_vedba, mean_pitch, log_sd_pitch)`.
    pub fn to_series(&self, id: impl Into<String>) -> Result<LabeledSeries> {
        let mut obs = Vec::with_capacity(3 * self.len());
        for i in 0..self.len() {
            obs.extend([self.log_mean_vedba[i], self.mean_pitch[i], self.log_sd_pitch[i]]);
        }
        let s = LabeledSeries::from_flat(id, 3, obs)?;
        match &self.labels {
            Some(l) => s.with_labels(l.clone()),
            None => Ok(s),
        }
    }
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation (denominator `n - 1`); 0 for a single value.
fn sample_sd(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

fn majority(labels: &[usize]) -> usize {
    let max = labels.iter().copied().max().unwrap_or(0);
    let mut counts = vec![0usize; max + 1];
    for &l in labels {
        counts[l] += 1;
    }
    let mut best = 0;
    for (l, &c) in counts.iter().enumerate() {
        if c > counts[best] {
            best = l;
        }
    }
    best
}

/// Summarize raw acceleration into per-window features.
pub fn window_features(raw: &RawAccel, options: &FeatureOptions) -> Result<FeatureSeries> {
    raw.validate()?;
    let rate = options.rate;
    if rate == 0 || options.smoothing_window == 0 {
        return Err(Error::Domain("rate and smoothing window must be >= 1".into()));
    }
    let n_windows = raw.time.len() / rate;
    if n_windows == 0 {
        return Err(Error::Empty(format!(
            "{} samples do not fill one window of {rate}",
            raw.time.len()
        )));
    }
    let mut warnings = Vec::new();
    if raw.time.len() >= 2 {
        let span = raw.time[raw.time.len() - 1] - raw.time[0];
        let observed = (raw.time.len() - 1) as f64 / span;
        if (observed - rate as f64).abs() > 0.1 * rate as f64 {
            warnings.push(format!(
                "observed sampling rate {observed:.3} Hz differs from nominal {rate} Hz by more than 10%"
            ));
        }
    }
    let surge = moving_average(&raw.surge, options.smoothing_window)?;
    let sway = moving_average(&raw.sway, options.smoothing_window)?;
    let heave = moving_average(&raw.heave, options.smoothing_window)?;
    let v = vedba(&surge, &sway, &heave, options.static_window)?;
    let p = pitch(&surge, options.static_window)?;

    let mut out = FeatureSeries {
        start_time: Vec::with_capacity(n_windows),
        log_mean_vedba: Vec::with_capacity(n_windows),
        mean_pitch: Vec::with_capacity(n_windows),
        log_sd_pitch: Vec::with_capacity(n_windows),
        labels: raw.labels.as_ref().map(|_| Vec::with_capacity(n_windows)),
        warnings: Vec::new(),
    };
    let (mut floored_vedba, mut floored_sd) = (0, 0);
    for w in 0..n_windows {
        let r = w * rate..(w + 1) * rate;
        let mv = mean(&v[r.clone()]);
        let sd = sample_sd(&p[r.clone()]);
        if mv < LOG_FLOOR {
            floored_vedba += 1;
        }
        if sd < LOG_FLOOR {
            floored_sd += 1;
        }
        out.start_time.push(raw.time[r.start]);
        out.log_mean_vedba.push(mv.max(LOG_FLOOR).ln());
        out.mean_pitch.push(mean(&p[r.clone()]));
        out.log_sd_pitch.push(sd.max(LOG_FLOOR).ln());
        if let (Some(dst), Some(src)) = (out.labels.as_mut(), raw.labels.as_ref()) {
            dst.push(majority(&src[r]));
        }
    }
    if floored_vedba > 0 {
        warnings.push(format!(
            "{floored_vedba} window(s) with mean VeDBA below {LOG_FLOOR:e} floored before log"
        ));
    }
    if floored_sd > 0 {
        warnings.push(format!(
            "{floored_sd} window(s) with pitch sd below {LOG_FLOOR:e} floored before log"
        ));
    }
    for w in &warnings {
        log::warn!("{w}");
    }
    out.warnings = warnings;
    Ok(out)
}
