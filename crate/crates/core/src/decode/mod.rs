//! Local (forward-backward) and global (Viterbi) state decoding for HMMs,
//! HSMMs and their AR(p) variants.

mod hmm;
mod hsmm;

use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;
use serde::{Deserialize, Serialize};

pub use hmm::{
    embed_geometric_hsmm, fb_hmm, fb_hmm_with_terminal, viterbi_hmm, viterbi_hmm_with_terminal, HmmEmbedding,
};
pub use hsmm::{fb_hsmm, resolve_max_duration, viterbi_hsmm, HsmmInputs};

use crate::math::argmax;
use crate::model::{Family, LabeledSeries, ModelSpec, Params};
use crate::{Error, Result};

/// Duration truncation and cost controls for HSMM decoding.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DecodeOptions {
    /// Used when the model specification leaves `max_duration` unset.
    pub max_duration: Option<usize>,
    /// Sojourn mass the automatic `D` must cover.
    pub coverage: f64,
    /// Upper bound on `T * D * J^2`.
    pub work_budget: u128,
}

impl Default for DecodeOptions {
    fn default() -> Self {
        Self {
            max_duration: None,
            coverage: 0.999,
            work_budget: 20_000_000_000,
        }
    }
}

/// Forward-backward tables in log space, row-major `T x J`.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardBackwardTables {
    pub n_states: usize,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    /// HSMM only.
    pub beta_star: Option<Vec<f64>>,
    /// `log Pr(C_t = j, X)`.
    pub xi: Vec<f64>,
    pub log_evidence: f64,
}

impl ForwardBackwardTables {
    pub fn len(&self) -> usize {
        self.xi.len() / self.n_states
    }

    pub fn is_empty(&self) -> bool {
        self.xi.is_empty()
    }

    /// Posterior state probabilities `Pr(C_t = j | X)`, row-major. Rows are
    /// clamped at zero and renormalized.
    pub fn marginals(&self) -> Vec<f64> {
        let j = self.n_states;
        let mut out: Vec<f64> = self.xi.iter().map(|&v| (v - self.log_evidence).exp()).collect();
        for row in out.chunks_mut(j) {
            let s: f64 = row.iter().sum();
            if s > 0.0 {
                row.iter_mut().for_each(|v| *v /= s);
            }
        }
        out
    }

    /// `Σ_j ξ_t(j) / Pr(X)` for each `t`, before any renormalization.
    pub fn occupancy_totals(&self) -> Vec<f64> {
        self.xi
            .chunks(self.n_states)
            .map(|row| row.iter().map(|&v| (v - self.log_evidence).exp()).sum())
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViterbiPath {
    pub path: Vec<usize>,
    /// Joint log probability of the path and the observations.
    pub log_prob: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecodeMode {
    Local,
    Global,
    Both,
}

impl DecodeMode {
    fn local(self) -> bool {
        matches!(self, DecodeMode::Local | DecodeMode::Both)
    }

    fn global(self) -> bool {
        matches!(self, DecodeMode::Global | DecodeMode::Both)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalDecoding {
    /// Row-major `T x J`, rows summing to 1.
    pub probs: Vec<f64>,
    /// Row-wise argmax, lowest state on ties.
    pub path: Vec<usize>,
    pub log_evidence: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecodeResult {
    pub n_states: usize,
    pub local: Option<LocalDecoding>,
    pub global: Option<ViterbiPath>,
}

/// Row-wise argmax of a row-major probability table.
pub fn argmax_rows(probs: &[f64], n_states: usize) -> Vec<usize> {
    probs.chunks(n_states).map(|row| argmax(row).unwrap_or(0)).collect()
}

/// Forward-backward tables for any model family.
pub fn forward_backward(
    series: &LabeledSeries,
    params: &Params,
    spec: &ModelSpec,
    options: &DecodeOptions,
) -> Result<ForwardBackwardTables> {
    match spec.family {
        Family::Hmm => fb_hmm(series, params, spec),
        Family::Hsmm => fb_hsmm(series, params, spec, options),
    }
}

/// Decode one series under one parameter set.
pub fn decode_params(
    series: &LabeledSeries,
    params: &Params,
    spec: &ModelSpec,
    mode: DecodeMode,
    options: &DecodeOptions,
) -> Result<DecodeResult> {
    let (local, global) = match spec.family {
        Family::Hmm => {
            let local = if mode.local() {
                Some(fb_hmm(series, params, spec)?)
            } else {
                None
            };
            let global = if mode.global() {
                Some(viterbi_hmm(series, params, spec)?)
            } else {
                None
            };
            (local, global)
        }
        Family::Hsmm => {
            // share the emission table and truncated pmfs
            let inputs = HsmmInputs::new(series, params, spec, options)?;
            let local = if mode.local() {
                Some(hsmm::forward_backward(&inputs)?)
            } else {
                None
            };
            let global = if mode.global() {
                Some(hsmm::viterbi(&inputs)?)
            } else {
                None
            };
            (local, global)
        }
    };
    let local = local.map(|tables| {
        let probs = tables.marginals();
        LocalDecoding {
            path: argmax_rows(&probs, spec.n_states),
            probs,
            log_evidence: tables.log_evidence,
        }
    });
    Ok(DecodeResult {
        n_states: spec.n_states,
        local,
        global,
    })
}

/// Decoding under a set of posterior draws.
#[derive(Debug, Clone, PartialEq)]
pub struct PooledDecode {
    pub per_draw: Vec<DecodeResult>,
    /// Mean of the per-draw local probabilities (local modes only).
    pub mean_local_probs: Option<Vec<f64>>,
    /// Row-wise argmax of `mean_local_probs`.
    pub local_path: Option<Vec<usize>>,
}

/// Pool already-computed per-draw decodings.
pub fn pool(per_draw: Vec<DecodeResult>) -> Result<PooledDecode> {
    let first = per_draw
        .first()
        .ok_or_else(|| Error::Empty("no posterior draws".into()))?;
    let j = first.n_states;
    let mean_local_probs = if per_draw.iter().all(|r| r.local.is_some()) {
        let len = first.local.as_ref().map_or(0, |l| l.probs.len());
        let mut mean = vec![0.0; len];
        for r in &per_draw {
            for (m, p) in mean.iter_mut().zip(&r.local.as_ref().expect("checked").probs) {
                *m += p;
            }
        }
        let k = per_draw.len() as f64;
        mean.iter_mut().for_each(|m| *m /= k);
        Some(mean)
    } else {
        None
    };
    let local_path = mean_local_probs.as_ref().map(|p| argmax_rows(p, j));
    Ok(PooledDecode {
        per_draw,
        mean_local_probs,
        local_path,
    })
}

/// Decode one series under every draw and pool the local probabilities.
pub fn decode(
    series: &LabeledSeries,
    draws: &[Params],
    spec: &ModelSpec,
    mode: DecodeMode,
    options: &DecodeOptions,
) -> Result<PooledDecode> {
    if draws.is_empty() {
        return Err(Error::Empty("no posterior draws".into()));
    }
    let per_draw = draws
        .iter()
        .map(|p| decode_params(series, p, spec, mode, options))
        .collect::<Result<Vec<_>>>()?;
    pool(per_draw)
}

#[cfg(test)]
mod tests;
