//! Domain types: model specification, parameters, labelled series, priors.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::sojourn::SojournDist;
use crate::{Error, Result};

const SUM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Hmm,
    Hsmm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SojournFamily {
    Geometric,
    NegBinomial,
}

/// Structure of a model: family, AR order, state count, observation
/// dimension and sojourn family.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ModelSpec {
    pub family: Family,
    #[serde(default)]
    pub ar_order: usize,
    pub n_states: usize,
    pub obs_dim: usize,
    pub sojourn_family: SojournFamily,
    /// Duration support `{1, ..., D}` for HSMMs. `None` picks `D` per
    /// parameter set when decoding; at fit time a `Some(D)` rejects longer
    /// labelled runs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_duration: Option<usize>,
}

impl ModelSpec {
    pub fn hmm(n_states: usize, obs_dim: usize) -> Self {
        Self {
            family: Family::Hmm,
            ar_order: 0,
            n_states,
            obs_dim,
            sojourn_family: SojournFamily::Geometric,
            max_duration: None,
        }
    }

    pub fn hsmm(n_states: usize, obs_dim: usize) -> Self {
        Self {
            family: Family::Hsmm,
            ar_order: 0,
            n_states,
            obs_dim,
            sojourn_family: SojournFamily::NegBinomial,
            max_duration: None,
        }
    }

    pub fn with_ar_order(mut self, p: usize) -> Self {
        self.ar_order = p;
        self
    }

    pub fn with_max_duration(mut self, d: usize) -> Self {
        self.max_duration = Some(d);
        self
    }

    pub fn with_sojourn_family(mut self, family: SojournFamily) -> Self {
        self.sojourn_family = family;
        self
    }

    pub fn is_hsmm(&self) -> bool {
        self.family == Family::Hsmm
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_states == 0 {
            return Err(Error::InvalidParams("n_states must be >= 1".into()));
        }
        if self.obs_dim == 0 {
            return Err(Error::InvalidParams("obs_dim must be >= 1".into()));
        }
        if self.family == Family::Hmm && self.sojourn_family != SojournFamily::Geometric {
            return Err(Error::InvalidParams("an HMM always has geometric sojourns".into()));
        }
        if self.max_duration == Some(0) {
            return Err(Error::Domain("max_duration must be >= 1".into()));
        }
        Ok(())
    }
}

/// Gaussian AR(p) emission of one state with diagonal covariance:
/// `x_t = mean + sum_k ar_coeffs[k-1] ⊙ x_{t-k} + eps`, `eps ~ N(0, diag(variances))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Emission {
    pub mean: Vec<f64>,
    /// `ar_coeffs[k - 1][dim]` multiplies `x_{t-k}[dim]`.
    #[serde(default)]
    pub ar_coeffs: Vec<Vec<f64>>,
    pub variances: Vec<f64>,
}

impl Emission {
    pub fn gaussian(mean: Vec<f64>, variances: Vec<f64>) -> Self {
        Self {
            mean,
            ar_coeffs: Vec::new(),
            variances,
        }
    }

    pub fn validate(&self, obs_dim: usize, ar_order: usize) -> Result<()> {
        if self.mean.len() != obs_dim || self.variances.len() != obs_dim {
            return Err(Error::Dimension(format!(
                "emission has mean/variance length {}/{}, expected {obs_dim}",
                self.mean.len(),
                self.variances.len()
            )));
        }
        if self.ar_coeffs.len() != ar_order || self.ar_coeffs.iter().any(|c| c.len() != obs_dim) {
            return Err(Error::Dimension(format!(
                "emission needs {ar_order} AR coefficient rows of length {obs_dim}"
            )));
        }
        if self.variances.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
            return Err(Error::InvalidParams("variances must be positive".into()));
        }
        if self
            .mean
            .iter()
            .chain(self.ar_coeffs.iter().flatten())
            .any(|v| !v.is_finite())
        {
            return Err(Error::InvalidParams("non-finite emission parameter".into()));
        }
        Ok(())
    }
}

/// Full parameter set of a model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Params {
    pub delta: Vec<f64>,
    /// Row-stochastic transition matrix. For HSMMs the diagonal is zero and
    /// rows hold the conditional exit distribution.
    pub tpm: Vec<Vec<f64>>,
    pub emissions: Vec<Emission>,
    /// One entry per state for HSMMs; empty for HMMs, whose sojourns are
    /// implied by the diagonal of `tpm`.
    #[serde(default)]
    pub sojourns: Vec<SojournDist>,
}

impl Params {
    pub fn n_states(&self) -> usize {
        self.delta.len()
    }

    /// Sojourn distribution of `state`: explicit for HSMMs, geometric in the
    /// self-transition probability for HMMs.
    pub fn sojourn(&self, spec: &ModelSpec, state: usize) -> SojournDist {
        match spec.family {
            Family::Hsmm => self.sojourns[state],
            Family::Hmm => SojournDist::Geometric {
                stay: self.tpm[state][state],
            },
        }
    }

    pub fn validate(&self, spec: &ModelSpec) -> Result<()> {
        spec.validate()?;
        let j = spec.n_states;
        check_prob_vector(&self.delta, j, "delta")?;
        if self.tpm.len() != j {
            return Err(Error::Dimension(format!(
                "tpm has {} rows, expected {j}",
                self.tpm.len()
            )));
        }
        for (i, row) in self.tpm.iter().enumerate() {
            check_prob_vector(row, j, "tpm row")?;
            if spec.is_hsmm() && j > 1 && row[i] != 0.0 {
                return Err(Error::InvalidParams(format!(
                    "HSMM tpm diagonal must be 0, row {i} has {}",
                    row[i]
                )));
            }
        }
        if self.emissions.len() != j {
            return Err(Error::Dimension(format!(
                "{} emissions for {j} states",
                self.emissions.len()
            )));
        }
        for e in &self.emissions {
            e.validate(spec.obs_dim, spec.ar_order)?;
        }
        match spec.family {
            Family::Hmm => {
                if !self.sojourns.is_empty() {
                    return Err(Error::InvalidParams("HMM parameters carry no explicit sojourns".into()));
                }
            }
            Family::Hsmm => {
                if self.sojourns.len() != j {
                    return Err(Error::Dimension(format!(
                        "{} sojourn distributions for {j} states",
                        self.sojourns.len()
                    )));
                }
                for s in &self.sojourns {
                    s.validate()?;
                    let ok = matches!(
                        (spec.sojourn_family, s),
                        (SojournFamily::Geometric, SojournDist::Geometric { .. })
                            | (SojournFamily::NegBinomial, SojournDist::NegBinomial { .. })
                    );
                    if !ok {
                        return Err(Error::InvalidParams(format!(
                            "sojourn {s:?} does not match family {:?}",
                            spec.sojourn_family
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

fn check_prob_vector(p: &[f64], len: usize, what: &str) -> Result<()> {
    if p.len() != len {
        return Err(Error::Dimension(format!(
            "{what} has length {}, expected {len}",
            p.len()
        )));
    }
    if p.iter().any(|&v| !(0.0..=1.0).contains(&v)) {
        return Err(Error::InvalidParams(format!("{what} has entries outside [0, 1]")));
    }
    let s: f64 = p.iter().sum();
    if (s - 1.0).abs() > SUM_TOL {
        return Err(Error::InvalidParams(format!("{what} sums to {s}, not 1")));
    }
    Ok(())
}

/// A multivariate series with optional state labels.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSeries {
    pub id: String,
    dim: usize,
    /// Row-major `T x dim`.
    obs: Vec<f64>,
    /// 0-based state per time step.
    pub labels: Option<Vec<usize>>,
}

impl LabeledSeries {
    /// Build from row-major data with `dim` columns.
    pub fn from_flat(id: impl Into<String>, dim: usize, obs: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Dimension("observation dimension must be >= 1".into()));
        }
        if obs.is_empty() || obs.len() % dim != 0 {
            return Err(Error::Dimension(format!(
                "{} values do not form rows of width {dim}",
                obs.len()
            )));
        }
        Ok(Self {
            id: id.into(),
            dim,
            obs,
            labels: None,
        })
    }

    pub fn from_rows(id: impl Into<String>, rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::Dimension("ragged observation rows".into()));
        }
        Self::from_flat(id, dim, rows.concat())
    }

    /// Univariate convenience constructor.
    pub fn univariate(id: impl Into<String>, xs: &[f64]) -> Result<Self> {
        Self::from_flat(id, 1, xs.to_vec())
    }

    pub fn with_labels(mut self, labels: Vec<usize>) -> Result<Self> {
        if labels.len() != self.len() {
            return Err(Error::Dimension(format!(
                "{} labels for {} observations",
                labels.len(),
                self.len()
            )));
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.obs.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.obs.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.obs[t * self.dim..(t + 1) * self.dim]
    }

    pub fn flat(&self) -> &[f64] {
        &self.obs
    }

    /// Labels, or an error if the series is unlabelled or a label is `>= n_states`.
    pub fn checked_labels(&self, n_states: usize) -> Result<&[usize]> {
        let labels = self
            .labels
            .as_deref()
            .ok_or_else(|| Error::Labels(format!("series {} is unlabelled", self.id)))?;
        if let Some(&bad) = labels.iter().find(|&&c| c >= n_states) {
            return Err(Error::Labels(format!(
                "series {} has label {} outside 1..={n_states}",
                self.id,
                bad + 1
            )));
        }
        Ok(labels)
    }

    /// Fingerprint of observations and labels.
    pub fn fingerprint(&self) -> u64 {
        let mut h = crate::math::Fingerprint::default();
        h.write_u64(self.dim as u64);
        for &v in &self.obs {
            h.write_f64(v);
        }
        if let Some(labels) = &self.labels {
            for &c in labels {
                h.write_u64(c as u64);
            }
        }
        h.finish()
    }
}

/// Maximal runs of equal labels as `(state, start, length)`.
pub fn label_runs(labels: &[usize]) -> Vec<(usize, usize, usize)> {
    let mut runs = Vec::new();
    let mut start = 0;
    for t in 1..=labels.len() {
        if t == labels.len() || labels[t] != labels[start] {
            runs.push((labels[start], start, t - start));
            start = t;
        }
    }
    runs
}

/// Normal prior on means, truncated-normal prior on standard deviations and
/// normal prior on AR coefficients, all per dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmissionPrior {
    pub mean_loc: Vec<f64>,
    pub mean_scale: Vec<f64>,
    pub sd_loc: Vec<f64>,
    pub sd_scale: Vec<f64>,
    pub ar_loc: Vec<f64>,
    pub ar_scale: Vec<f64>,
}

impl EmissionPrior {
    pub fn weak(obs_dim: usize) -> Self {
        Self {
            mean_loc: vec![0.0; obs_dim],
            mean_scale: vec![10.0; obs_dim],
            sd_loc: vec![0.0; obs_dim],
            sd_scale: vec![10.0; obs_dim],
            ar_loc: vec![0.0; obs_dim],
            ar_scale: vec![1.0; obs_dim],
        }
    }
}

/// Log-normal priors on the sojourn mean `m` and dispersion `k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SojournPrior {
    pub mean_log_loc: f64,
    pub mean_log_scale: f64,
    pub dispersion_log_loc: f64,
    pub dispersion_log_scale: f64,
}

impl Default for SojournPrior {
    fn default() -> Self {
        Self {
            mean_log_loc: 10f64.ln(),
            mean_log_scale: 1.5,
            dispersion_log_loc: 10f64.ln(),
            dispersion_log_scale: 1.5,
        }
    }
}

/// Independent priors for all parameter blocks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Priors {
    /// Dirichlet concentration per tpm row. HSMM diagonals are ignored.
    pub tpm_concentration: Vec<Vec<f64>>,
    pub delta_concentration: Vec<f64>,
    pub emission: Vec<EmissionPrior>,
    #[serde(default)]
    pub sojourn: Vec<SojournPrior>,
}

impl Priors {
    /// Dirichlet(1, ..., 1), N(0, 10²) means, N⁺(0, 10²) standard deviations,
    /// N(0, 1) AR coefficients and log-normal(log 10, 1.5²) sojourn parameters.
    pub fn default_for(spec: &ModelSpec) -> Self {
        let j = spec.n_states;
        Self {
            tpm_concentration: vec![vec![1.0; j]; j],
            delta_concentration: vec![1.0; j],
            emission: vec![EmissionPrior::weak(spec.obs_dim); j],
            sojourn: if spec.is_hsmm() {
                vec![SojournPrior::default(); j]
            } else {
                Vec::new()
            },
        }
    }

    /// Same structure with every emission scale widened to `scale`.
    pub fn near_flat(spec: &ModelSpec, scale: f64) -> Self {
        let mut p = Self::default_for(spec);
        for e in &mut p.emission {
            e.mean_scale.iter_mut().for_each(|s| *s = scale);
            e.sd_scale.iter_mut().for_each(|s| *s = scale);
            e.ar_scale.iter_mut().for_each(|s| *s = scale);
        }
        for s in &mut p.sojourn {
            s.mean_log_scale = scale;
            s.dispersion_log_scale = scale;
        }
        p
    }

    pub fn validate(&self, spec: &ModelSpec) -> Result<()> {
        let j = spec.n_states;
        if self.tpm_concentration.len() != j
            || self.tpm_concentration.iter().any(|r| r.len() != j)
            || self.delta_concentration.len() != j
            || self.emission.len() != j
        {
            return Err(Error::Dimension("prior blocks do not match n_states".into()));
        }
        for (i, row) in self.tpm_concentration.iter().enumerate() {
            for (k, &c) in row.iter().enumerate() {
                if spec.is_hsmm() && i == k {
                    continue;
                }
                if !(c > 0.0) {
                    return Err(Error::InvalidParams("Dirichlet concentrations must be > 0".into()));
                }
            }
        }
        if self.delta_concentration.iter().any(|&c| !(c > 0.0)) {
            return Err(Error::InvalidParams("Dirichlet concentrations must be > 0".into()));
        }
        for e in &self.emission {
            let d = spec.obs_dim;
            let lens = [
                e.mean_loc.len(),
                e.mean_scale.len(),
                e.sd_loc.len(),
                e.sd_scale.len(),
                e.ar_loc.len(),
                e.ar_scale.len(),
            ];
            if lens.iter().any(|&l| l != d) {
                return Err(Error::Dimension("emission prior has wrong dimension".into()));
            }
            if e.mean_scale
                .iter()
                .chain(&e.sd_scale)
                .chain(&e.ar_scale)
                .any(|&s| !(s > 0.0))
            {
                return Err(Error::InvalidParams("prior scales must be > 0".into()));
            }
        }
        if spec.is_hsmm() {
            if self.sojourn.len() != j {
                return Err(Error::Dimension("sojourn priors do not match n_states".into()));
            }
            if self
                .sojourn
                .iter()
                .any(|s| !(s.mean_log_scale > 0.0 && s.dispersion_log_scale > 0.0))
            {
                return Err(Error::InvalidParams("prior scales must be > 0".into()));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_state_hsmm() -> (ModelSpec, Params) {
        let spec = ModelSpec::hsmm(2, 1);
        let params = Params {
            delta: vec![0.5, 0.5],
            tpm: vec![vec![0.0, 1.0], vec![1.0, 0.0]],
            emissions: vec![
                Emission::gaussian(vec![0.0], vec![1.0]),
                Emission::gaussian(vec![3.0], vec![1.0]),
            ],
            sojourns: vec![
                SojournDist::NegBinomial {
                    mean: 4.0,
                    dispersion: 2.0,
                };
                2
            ],
        };
        (spec, params)
    }

    #[test]
    fn valid_hsmm_params_pass() {
        let (spec, params) = two_state_hsmm();
        params.validate(&spec).unwrap();
    }

    #[test]
    fn hsmm_diagonal_must_be_zero() {
        let (spec, mut params) = two_state_hsmm();
        params.tpm = vec![vec![0.5, 0.5], vec![1.0, 0.0]];
        assert!(matches!(params.validate(&spec), Err(Error::InvalidParams(_))));
    }

    #[test]
    fn hmm_with_negbinomial_is_rejected() {
        let spec = ModelSpec::hmm(2, 1).with_sojourn_family(SojournFamily::NegBinomial);
        assert!(spec.validate().is_err());
    }

    #[test]
    fn negative_variance_is_rejected() {
        let (spec, mut params) = two_state_hsmm();
        params.emissions[1].variances[0] = -1.0;
        assert!(params.validate(&spec).is_err());
    }

    #[test]
    fn rows_must_sum_to_one() {
        let (spec, mut params) = two_state_hsmm();
        params.delta = vec![0.5, 0.5 + 1e-9];
        assert!(params.validate(&spec).is_err());
    }

    #[test]
    fn runs_and_label_checks() {
        assert_eq!(label_runs(&[0, 0, 1, 1, 1]), vec![(0, 0, 2), (1, 2, 3)]);
        assert_eq!(label_runs(&[2]), vec![(2, 0, 1)]);
        let s = LabeledSeries::univariate("a", &[0.0, 1.0]).unwrap();
        assert!(s.checked_labels(2).is_err());
        let s = s.with_labels(vec![0, 2]).unwrap();
        assert!(matches!(s.checked_labels(2), Err(Error::Labels(_))));
        assert!(LabeledSeries::univariate("e", &[]).is_err());
    }

    #[test]
    fn default_priors_validate() {
        for spec in [ModelSpec::hmm(3, 2), ModelSpec::hsmm(3, 2)] {
            Priors::default_for(&spec).validate(&spec).unwrap();
        }
    }
}
