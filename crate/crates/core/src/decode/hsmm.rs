//! Forward-backward and Viterbi for right-censored (AR) hidden semi-Markov
//! models.
//!
//! Time is 0-based. A run of state `j` occupying `[s, t]` has duration
//! `d = t - s + 1 <= D` and weight `d_j(d) f_j(x_{s..=t})`. The first run
//! starts at 0 (weighted by `δ_j`), the last run ends at `T - 1`, and every
//! switch `i -> j` is weighted by `γ_ij` with `γ_jj = 0`.
//!
//! Tables:
//! - `alpha[t][j]`: log Pr(a run of `j` ends at `t`, x_{0..=t})
//! - `beta[t][j]`: log Pr(x_{t+1..} | a run of `j` ends at `t`)
//! - `beta_star[t][j]`: log Pr(x_{t+1..} | a run of `j` starts at `t + 1`)
//! - `xi[t][j]`: log Pr(state `j` at `t`, x)
//!
//! `xi` follows the backward recursion
//! `ξ_t(j) = ξ_{t+1}(j) + Pr(run of j ends at t, x) - Pr(run of j starts at t+1, x)`
//! from `ξ_{T-1} = α_{T-1}`, evaluated on probabilities scaled by the
//! evidence so that the subtraction happens in `[0, 1]`.

use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;

use super::{DecodeOptions, ForwardBackwardTables, ViterbiPath};
use crate::emission::EmissionTable;
use crate::math::{argmax, log_sum_exp};
use crate::model::{LabeledSeries, ModelSpec, Params};
use crate::sojourn::TruncatedSojourn;
use crate::{Error, Result};

/// Everything the HSMM recursions need, in log space.
#[derive(Debug, Clone)]
pub struct HsmmInputs {
    pub log_delta: Vec<f64>,
    /// Row-major `J x J`; the diagonal is ignored.
    pub log_tpm: Vec<f64>,
    pub durations: Vec<TruncatedSojourn>,
    pub emissions: EmissionTable,
}

impl HsmmInputs {
    pub fn new(series: &LabeledSeries, params: &Params, spec: &ModelSpec, options: &DecodeOptions) -> Result<Self> {
        if !spec.is_hsmm() {
            return Err(Error::InvalidParams("expected an HSMM specification".into()));
        }
        params.validate(spec)?;
        let n = series.len();
        let d = resolve_max_duration(params, spec, options, n)?;
        let j = spec.n_states as u128;
        let work = n as u128 * d.min(n) as u128 * j * j;
        if work > options.work_budget {
            return Err(Error::TooExpensive {
                work,
                budget: options.work_budget,
            });
        }
        let durations = params
            .sojourns
            .iter()
            .map(|s| TruncatedSojourn::new(s, d))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            log_delta: params.delta.iter().map(|v| v.ln()).collect(),
            log_tpm: params.tpm.iter().flatten().map(|v| v.ln()).collect(),
            durations,
            emissions: EmissionTable::new(spec, params, series)?,
        })
    }

    fn n_states(&self) -> usize {
        self.log_delta.len()
    }

    #[inline]
    fn log_gamma(&self, from: usize, to: usize) -> f64 {
        if from == to {
            f64::NEG_INFINITY
        } else {
            self.log_tpm[from * self.n_states() + to]
        }
    }

    fn max_duration(&self) -> usize {
        self.durations.first().map_or(1, TruncatedSojourn::max_duration)
    }
}

/// Duration support used for decoding: the specification's `D` if given,
/// else the option override, else the smallest `D` covering
/// `options.coverage` of every sojourn pmf, capped at the series length.
pub fn resolve_max_duration(
    params: &Params,
    spec: &ModelSpec,
    options: &DecodeOptions,
    series_len: usize,
) -> Result<usize> {
    let d = match spec.max_duration.or(options.max_duration) {
        Some(d) => d,
        None => params
            .sojourns
            .iter()
            .map(|s| s.coverage_length(options.coverage, series_len.max(1)))
            .max()
            .unwrap_or(1),
    };
    if d < 1 {
        return Err(Error::Domain("max duration must be >= 1".into()));
    }
    Ok(d)
}

/// Log weight of a run of `state` covering `[start, end)`.
#[inline]
fn run_weight(inp: &HsmmInputs, state: usize, start: usize, end: usize) -> f64 {
    inp.durations[state].log_pmf(end - start) + inp.emissions.segment(state, start, end)
}

pub(crate) fn forward_backward(inp: &HsmmInputs) -> Result<ForwardBackwardTables> {
    let j = inp.n_states();
    let n = inp.emissions.len();
    let dmax = inp.max_duration().min(n);
    let ninf = f64::NEG_INFINITY;

    // entry[s][j]: log Pr(a run of j starts at s, x_{0..s}), s = 0..n
    let mut entry = vec![ninf; (n + 1) * j];
    let mut alpha = vec![ninf; n * j];
    let mut terms = Vec::with_capacity(dmax.max(j));
    entry[..j].copy_from_slice(&inp.log_delta);

    for t in 0..n {
        for s in 0..j {
            terms.clear();
            for d in 1..=dmax.min(t + 1) {
                let start = t + 1 - d;
                let e = entry[start * j + s];
                if e > ninf {
                    terms.push(e + run_weight(inp, s, start, t + 1));
                }
            }
            alpha[t * j + s] = log_sum_exp(&terms);
        }
        for s in 0..j {
            terms.clear();
            terms.extend(
                (0..j)
                    .filter(|&i| i != s)
                    .map(|i| alpha[t * j + i] + inp.log_gamma(i, s)),
            );
            entry[(t + 1) * j + s] = log_sum_exp(&terms);
        }
    }

    // start[s][j]: log Pr(x_{s..} | a run of j starts at s), s = 0..n
    let mut start_tbl = vec![ninf; (n + 1) * j];
    let mut beta = vec![ninf; n * j];
    beta[(n - 1) * j..].iter_mut().for_each(|v| *v = 0.0);
    for t in (0..n).rev() {
        if t < n - 1 {
            for s in 0..j {
                terms.clear();
                terms.extend(
                    (0..j)
                        .filter(|&i| i != s)
                        .map(|i| inp.log_gamma(s, i) + start_tbl[(t + 1) * j + i]),
                );
                beta[t * j + s] = log_sum_exp(&terms);
            }
        }
        // runs starting at t
        for s in 0..j {
            terms.clear();
            for d in 1..=dmax.min(n - t) {
                let end = t + d;
                terms.push(run_weight(inp, s, t, end) + beta[(end - 1) * j + s]);
            }
            start_tbl[t * j + s] = log_sum_exp(&terms);
        }
    }

    let log_evidence = log_sum_exp(&alpha[(n - 1) * j..]);
    if !log_evidence.is_finite() {
        return Err(Error::Infeasible);
    }

    // beta_star[t] = start[t + 1]; no run can start after the last step
    let mut beta_star = vec![ninf; n * j];
    beta_star[..(n - 1) * j].copy_from_slice(&start_tbl[j..n * j]);

    // scaled occupancy recursion
    let mut xi_scaled = vec![0.0; n * j];
    for s in 0..j {
        xi_scaled[(n - 1) * j + s] = (alpha[(n - 1) * j + s] - log_evidence).exp();
    }
    for t in (0..n - 1).rev() {
        for s in 0..j {
            let ends = (alpha[t * j + s] + beta[t * j + s] - log_evidence).exp();
            let starts = (entry[(t + 1) * j + s] + start_tbl[(t + 1) * j + s] - log_evidence).exp();
            xi_scaled[t * j + s] = xi_scaled[(t + 1) * j + s] + ends - starts;
        }
    }
    let xi = xi_scaled
        .iter()
        .map(|&v| if v > 0.0 { v.ln() + log_evidence } else { ninf })
        .collect();

    Ok(ForwardBackwardTables {
        n_states: j,
        alpha,
        beta,
        beta_star: Some(beta_star),
        xi,
        log_evidence,
    })
}

pub(crate) fn viterbi(inp: &HsmmInputs) -> Result<ViterbiPath> {
    let j = inp.n_states();
    let n = inp.emissions.len();
    let dmax = inp.max_duration().min(n);
    let ninf = f64::NEG_INFINITY;

    // best_entry[s][j]: best log prob of x_{0..s} with a run of j starting at s
    let mut best_entry = vec![ninf; (n + 1) * j];
    let mut entry_pred = vec![usize::MAX; (n + 1) * j];
    // best_end[t][j] = max_d ψ_t(j, d), with the maximizing d
    let mut best_end = vec![ninf; n * j];
    let mut best_d = vec![0usize; n * j];
    best_entry[..j].copy_from_slice(&inp.log_delta);
    let mut cand = vec![ninf; j];

    for t in 0..n {
        for s in 0..j {
            let mut best = ninf;
            let mut arg = 0;
            for d in 1..=dmax.min(t + 1) {
                let start = t + 1 - d;
                let e = best_entry[start * j + s];
                if e == ninf {
                    continue;
                }
                let v = e + run_weight(inp, s, start, t + 1);
                if v > best {
                    best = v;
                    arg = d;
                }
            }
            best_end[t * j + s] = best;
            best_d[t * j + s] = arg;
        }
        for s in 0..j {
            for (i, c) in cand.iter_mut().enumerate() {
                *c = if i == s {
                    ninf
                } else {
                    best_end[t * j + i] + inp.log_gamma(i, s)
                };
            }
            if let Some(i) = argmax(&cand) {
                if cand[i] > ninf {
                    best_entry[(t + 1) * j + s] = cand[i];
                    entry_pred[(t + 1) * j + s] = i;
                }
            }
        }
    }

    let last = &best_end[(n - 1) * j..];
    let mut state = argmax(last).ok_or(Error::Infeasible)?;
    let log_prob = last[state];
    if !log_prob.is_finite() {
        return Err(Error::Infeasible);
    }
    let mut path = vec![0; n];
    let mut t = n - 1;
    loop {
        let d = best_d[t * j + state];
        let start = t + 1 - d;
        path[start..=t].iter_mut().for_each(|c| *c = state);
        if start == 0 {
            break;
        }
        let prev = entry_pred[start * j + state];
        debug_assert!(prev != usize::MAX);
        state = prev;
        t = start - 1;
    }
    Ok(ViterbiPath { path, log_prob })
}

/// Forward-backward tables for an HSMM; labels on `series` are ignored.
pub fn fb_hsmm(
    series: &LabeledSeries,
    params: &Params,
    spec: &ModelSpec,
    options: &DecodeOptions,
) -> Result<ForwardBackwardTables> {
    forward_backward(&HsmmInputs::new(series, params, spec, options)?)
}

/// Most likely state sequence of an HSMM over states and run lengths.
pub fn viterbi_hsmm(
    series: &LabeledSeries,
    params: &Params,
    spec: &ModelSpec,
    options: &DecodeOptions,
) -> Result<ViterbiPath> {
    viterbi(&HsmmInputs::new(series, params, spec, options)?)
}
