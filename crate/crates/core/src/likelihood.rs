//! Complete-data log-likelihood and unnormalized log-posterior of labelled
//! series.
//!
//! HSMM series are right censored: every labelled run, including the first
//! and the last, contributes the full sojourn pmf of its length. HMM series
//! use the chain-rule form `log δ + Σ log γ + Σ log f`.

use alloc::format;
use alloc::vec::Vec;
#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;

use crate::emission::EmissionTable;
use crate::math::{dirichlet_logpdf, lognormal_logpdf, normal_logpdf, truncated_normal_pos_logpdf};
use crate::model::{label_runs, Family, LabeledSeries, ModelSpec, Params, Priors};
use crate::sojourn::SojournDist;
use crate::{Error, Result};

/// Complete-data log-likelihood of one labelled series.
pub fn series_loglik(series: &LabeledSeries, params: &Params, spec: &ModelSpec) -> Result<f64> {
    let j = spec.n_states;
    let labels = series.checked_labels(j)?;
    let emissions = EmissionTable::new(spec, params, series)?;
    let emission_term: f64 = labels.iter().enumerate().map(|(t, &c)| emissions.at(t, c)).sum();

    let structure = match spec.family {
        Family::Hmm => {
            let mut acc = params.delta[labels[0]].ln();
            for w in labels.windows(2) {
                acc += params.tpm[w[0]][w[1]].ln();
            }
            acc
        }
        Family::Hsmm => {
            let runs = label_runs(labels);
            if let Some(max) = spec.max_duration {
                if let Some(&(state, _, length)) = runs.iter().find(|r| r.2 > max) {
                    return Err(Error::RunTooLong { state, length, max });
                }
            }
            let mut acc = params.delta[runs[0].0].ln();
            for (r, &(state, _, length)) in runs.iter().enumerate() {
                if r > 0 {
                    acc += params.tpm[runs[r - 1].0][state].ln();
                }
                acc += params.sojourns[state].log_pmf(length);
            }
            acc
        }
    };
    Ok(structure + emission_term)
}

/// Sum of [`series_loglik`] over independent series.
pub fn complete_data_loglik(series: &[LabeledSeries], params: &Params, spec: &ModelSpec) -> Result<f64> {
    params.validate(spec)?;
    series.iter().map(|s| series_loglik(s, params, spec)).sum()
}

/// Log prior density of `params`; `-inf` outside the prior support.
pub fn log_prior(params: &Params, priors: &Priors, spec: &ModelSpec) -> f64 {
    let j = spec.n_states;
    let mut acc = dirichlet_logpdf(&params.delta, &priors.delta_concentration);
    for (i, (row, conc)) in params.tpm.iter().zip(&priors.tpm_concentration).enumerate() {
        if spec.is_hsmm() && j > 1 {
            let mut c = conc.clone();
            c[i] = 0.0;
            acc += dirichlet_logpdf(row, &c);
        } else {
            acc += dirichlet_logpdf(row, conc);
        }
    }
    for (em, pr) in params.emissions.iter().zip(&priors.emission) {
        for d in 0..spec.obs_dim {
            acc += normal_logpdf(em.mean[d], pr.mean_loc[d], pr.mean_scale[d]);
            acc += truncated_normal_pos_logpdf(em.variances[d].sqrt(), pr.sd_loc[d], pr.sd_scale[d]);
            for coeffs in &em.ar_coeffs {
                acc += normal_logpdf(coeffs[d], pr.ar_loc[d], pr.ar_scale[d]);
            }
        }
    }
    if spec.is_hsmm() {
        for (s, pr) in params.sojourns.iter().zip(&priors.sojourn) {
            match *s {
                SojournDist::NegBinomial { mean, dispersion } => {
                    acc += lognormal_logpdf(mean, pr.mean_log_loc, pr.mean_log_scale);
                    acc += lognormal_logpdf(dispersion, pr.dispersion_log_loc, pr.dispersion_log_scale);
                }
                SojournDist::Geometric { stay } => {
                    let m = stay / (1.0 - stay);
                    acc += lognormal_logpdf(m, pr.mean_log_loc, pr.mean_log_scale);
                }
            }
        }
    }
    acc
}

/// Whether parameter values lie inside the support of the priors (as opposed
/// to having the wrong shape).
fn in_support(params: &Params) -> bool {
    let probs_ok = params
        .delta
        .iter()
        .chain(params.tpm.iter().flatten())
        .all(|&v| (0.0..=1.0).contains(&v));
    let var_ok = params
        .emissions
        .iter()
        .all(|e| e.variances.iter().all(|&v| v > 0.0 && v.is_finite()));
    let soj_ok = params.sojourns.iter().all(|s| s.validate().is_ok());
    probs_ok && var_ok && soj_ok
}

fn check_shapes(params: &Params, spec: &ModelSpec) -> Result<()> {
    let j = spec.n_states;
    let shape_ok = params.delta.len() == j
        && params.tpm.len() == j
        && params.tpm.iter().all(|r| r.len() == j)
        && params.emissions.len() == j
        && params.emissions.iter().all(|e| {
            e.mean.len() == spec.obs_dim
                && e.variances.len() == spec.obs_dim
                && e.ar_coeffs.len() == spec.ar_order
                && e.ar_coeffs.iter().all(|c| c.len() == spec.obs_dim)
        })
        && (if spec.is_hsmm() {
            params.sojourns.len() == j
        } else {
            params.sojourns.is_empty()
        });
    if shape_ok {
        Ok(())
    } else {
        Err(Error::Dimension(format!(
            "parameter blocks do not match a {j}-state model of dimension {}",
            spec.obs_dim
        )))
    }
}

/// Unnormalized log posterior: complete-data log-likelihood of every series
/// plus the log prior. Parameter values outside the support give
/// `Ok(f64::NEG_INFINITY)`.
pub fn log_posterior(series: &[LabeledSeries], params: &Params, priors: &Priors, spec: &ModelSpec) -> Result<f64> {
    spec.validate()?;
    priors.validate(spec)?;
    check_shapes(params, spec)?;
    if !in_support(params) {
        return Ok(f64::NEG_INFINITY);
    }
    let prior = log_prior(params, priors, spec);
    if prior == f64::NEG_INFINITY {
        return Ok(prior);
    }
    let lik: f64 = series
        .iter()
        .map(|s| series_loglik(s, params, spec))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .sum();
    Ok(lik + prior)
}
