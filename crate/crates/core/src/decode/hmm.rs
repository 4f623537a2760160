//! Forward-backward and Viterbi for (AR) hidden Markov models.

use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;

use super::{ForwardBackwardTables, ViterbiPath};
use crate::emission::EmissionTable;
use crate::math::{argmax, log_sum_exp};
use crate::model::{Family, LabeledSeries, ModelSpec, Params};
use crate::sojourn::SojournDist;
use crate::{Error, Result};

fn log_matrix(m: &[Vec<f64>]) -> Vec<f64> {
    m.iter().flatten().map(|v| v.ln()).collect()
}

fn check(spec: &ModelSpec, params: &Params, terminal: Option<&[f64]>) -> Result<()> {
    params.validate(spec)?;
    if let Some(w) = terminal {
        if w.len() != spec.n_states {
            return Err(Error::Dimension(
                "terminal weights must have one entry per state".into(),
            ));
        }
    }
    Ok(())
}

/// Log-space forward-backward on a precomputed emission table. `terminal`
/// adds a per-state log weight at the final step (zero for an ordinary HMM).
pub(crate) fn forward_backward(
    log_delta: &[f64],
    log_tpm: &[f64],
    emissions: &EmissionTable,
    terminal: &[f64],
) -> Result<ForwardBackwardTables> {
    let j = log_delta.len();
    let n = emissions.len();
    let mut alpha = vec![f64::NEG_INFINITY; n * j];
    let mut beta = vec![f64::NEG_INFINITY; n * j];
    let mut buf = vec![0.0; j];

    for s in 0..j {
        alpha[s] = log_delta[s] + emissions.at(0, s);
    }
    for t in 1..n {
        for s in 0..j {
            for i in 0..j {
                buf[i] = alpha[(t - 1) * j + i] + log_tpm[i * j + s];
            }
            alpha[t * j + s] = log_sum_exp(&buf) + emissions.at(t, s);
        }
    }

    beta[(n - 1) * j..].copy_from_slice(terminal);
    for t in (0..n - 1).rev() {
        for i in 0..j {
            for s in 0..j {
                buf[s] = log_tpm[i * j + s] + emissions.at(t + 1, s) + beta[(t + 1) * j + s];
            }
            beta[t * j + i] = log_sum_exp(&buf);
        }
    }

    let last: Vec<f64> = (0..j).map(|s| alpha[(n - 1) * j + s] + terminal[s]).collect();
    let log_evidence = log_sum_exp(&last);
    if !log_evidence.is_finite() {
        return Err(Error::Infeasible);
    }
    let xi = alpha.iter().zip(&beta).map(|(a, b)| a + b).collect();
    Ok(ForwardBackwardTables {
        n_states: j,
        alpha,
        beta,
        beta_star: None,
        xi,
        log_evidence,
    })
}

pub(crate) fn viterbi(
    log_delta: &[f64],
    log_tpm: &[f64],
    emissions: &EmissionTable,
    terminal: &[f64],
) -> Result<ViterbiPath> {
    let j = log_delta.len();
    let n = emissions.len();
    let mut score = vec![f64::NEG_INFINITY; n * j];
    let mut back = vec![0usize; n * j];
    let mut buf = vec![0.0; j];

    for s in 0..j {
        score[s] = log_delta[s] + emissions.at(0, s);
    }
    for t in 1..n {
        for s in 0..j {
            for i in 0..j {
                buf[i] = score[(t - 1) * j + i] + log_tpm[i * j + s];
            }
            let best = argmax(&buf).unwrap_or(0);
            back[t * j + s] = best;
            score[t * j + s] = buf[best] + emissions.at(t, s);
        }
    }
    for s in 0..j {
        buf[s] = score[(n - 1) * j + s] + terminal[s];
    }
    let mut state = argmax(&buf).ok_or(Error::Infeasible)?;
    let log_prob = buf[state];
    if !log_prob.is_finite() {
        return Err(Error::Infeasible);
    }
    let mut path = vec![0; n];
    for t in (0..n).rev() {
        path[t] = state;
        if t > 0 {
            state = back[t * j + state];
        }
    }
    Ok(ViterbiPath { path, log_prob })
}

fn prepare(series: &LabeledSeries, params: &Params, spec: &ModelSpec) -> Result<(Vec<f64>, Vec<f64>, EmissionTable)> {
    let emissions = EmissionTable::new(spec, params, series)?;
    let log_delta: Vec<f64> = params.delta.iter().map(|v| v.ln()).collect();
    Ok((log_delta, log_matrix(&params.tpm), emissions))
}

fn require_hmm(spec: &ModelSpec) -> Result<()> {
    if spec.family != Family::Hmm {
        return Err(Error::InvalidParams("expected an HMM specification".into()));
    }
    Ok(())
}

/// Forward-backward tables for an HMM; labels on `series` are ignored.
pub fn fb_hmm(series: &LabeledSeries, params: &Params, spec: &ModelSpec) -> Result<ForwardBackwardTables> {
    fb_hmm_with_terminal(series, params, spec, None)
}

/// [`fb_hmm`] with an optional per-state log weight on the final state,
/// as needed to express right-censored geometric HSMMs as HMMs.
pub fn fb_hmm_with_terminal(
    series: &LabeledSeries,
    params: &Params,
    spec: &ModelSpec,
    terminal: Option<&[f64]>,
) -> Result<ForwardBackwardTables> {
    require_hmm(spec)?;
    check(spec, params, terminal)?;
    let (ld, lt, em) = prepare(series, params, spec)?;
    let zero = vec![0.0; spec.n_states];
    forward_backward(&ld, &lt, &em, terminal.unwrap_or(&zero))
}

/// Most likely state path of an HMM.
pub fn viterbi_hmm(series: &LabeledSeries, params: &Params, spec: &ModelSpec) -> Result<ViterbiPath> {
    viterbi_hmm_with_terminal(series, params, spec, None)
}

pub fn viterbi_hmm_with_terminal(
    series: &LabeledSeries,
    params: &Params,
    spec: &ModelSpec,
    terminal: Option<&[f64]>,
) -> Result<ViterbiPath> {
    require_hmm(spec)?;
    check(spec, params, terminal)?;
    let (ld, lt, em) = prepare(series, params, spec)?;
    let zero = vec![0.0; spec.n_states];
    viterbi(&ld, &lt, &em, terminal.unwrap_or(&zero))
}

/// The HMM equivalent to an HSMM whose sojourns are all geometric.
///
/// With stay probabilities `g_i` and exit distribution `γ_ij`, the HMM has
/// `Γ_ii = g_i`, `Γ_ij = (1 - g_i) γ_ij`. Because the HSMM's last run ends
/// exactly at `T`, its final exit probability becomes the terminal log
/// weight `log(1 - g_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct HmmEmbedding {
    pub spec: ModelSpec,
    pub params: Params,
    pub terminal: Vec<f64>,
}

pub fn embed_geometric_hsmm(spec: &ModelSpec, params: &Params) -> Result<HmmEmbedding> {
    if !spec.is_hsmm() {
        return Err(Error::InvalidParams("expected an HSMM specification".into()));
    }
    params.validate(spec)?;
    let j = spec.n_states;
    let stays: Vec<f64> = params
        .sojourns
        .iter()
        .map(|s| match *s {
            SojournDist::Geometric { stay } => Ok(stay),
            SojournDist::NegBinomial { mean, dispersion } if dispersion == 1.0 => Ok(mean / (mean + 1.0)),
            _ => Err(Error::InvalidParams("embedding needs geometric sojourns".into())),
        })
        .collect::<Result<_>>()?;
    let tpm = (0..j)
        .map(|i| {
            (0..j)
                .map(|k| {
                    if j == 1 {
                        1.0
                    } else if i == k {
                        stays[i]
                    } else {
                        (1.0 - stays[i]) * params.tpm[i][k]
                    }
                })
                .collect()
        })
        .collect();
    let mut hmm_spec = spec.clone();
    hmm_spec.family = Family::Hmm;
    hmm_spec.sojourn_family = crate::model::SojournFamily::Geometric;
    hmm_spec.max_duration = None;
    Ok(HmmEmbedding {
        spec: hmm_spec,
        params: Params {
            delta: params.delta.clone(),
            tpm,
            emissions: params.emissions.clone(),
            sojourns: Vec::new(),
        },
        terminal: stays.iter().map(|g| (1.0 - g).ln()).collect(),
    })
}
