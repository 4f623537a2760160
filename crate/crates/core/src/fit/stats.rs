//! Sufficient statistics of labelled data and the conjugate Dirichlet
//! posteriors of `δ` and `Γ`.

use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::model::{label_runs, Family, LabeledSeries, ModelSpec, Priors};
use crate::{Error, Result};

/// Per-state, per-dimension regression statistics of the AR(p) emission
/// `x_t = μ + Σ_k ω_k x_{t-k} + ε`. The design row is `(1, x_{t-1}, ...,
/// x_{t-p})`; only rows `t >= p` of each series enter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionStats {
    pub n: usize,
    /// Row-major `(p + 1) x (p + 1)` Gram matrix of the design.
    pub gram: Vec<f64>,
    pub xty: Vec<f64>,
    pub yy: f64,
}

impl RegressionStats {
    fn new(p: usize) -> Self {
        let q = p + 1;
        Self {
            n: 0,
            gram: vec![0.0; q * q],
            xty: vec![0.0; q],
            yy: 0.0,
        }
    }

    fn add(&mut self, design: &[f64], y: f64) {
        let q = design.len();
        self.n += 1;
        self.yy += y * y;
        for a in 0..q {
            self.xty[a] += design[a] * y;
            for b in 0..q {
                self.gram[a * q + b] += design[a] * design[b];
            }
        }
    }

    /// Sample mean of the responses (`p = 0` only makes this the MLE of μ).
    pub fn response_mean(&self) -> Option<f64> {
        (self.n > 0).then(|| self.xty[0] / self.n as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SufficientStats {
    pub n_states: usize,
    pub n_series: usize,
    /// `transitions[j][i]`: number of `j -> i` steps. HMMs count every step
    /// (self-transitions included); HSMMs count state switches only.
    pub transitions: Vec<Vec<u64>>,
    /// Number of series starting in each state.
    pub initial: Vec<u64>,
    /// `emission[j][d]`.
    pub emission: Vec<Vec<RegressionStats>>,
    /// Run lengths of every labelled run, per state.
    pub sojourns: Vec<Vec<usize>>,
}

impl SufficientStats {
    /// Number of emission rows attributed to `state`.
    pub fn n_obs(&self, state: usize) -> usize {
        self.emission[state].first().map_or(0, |r| r.n)
    }
}

/// Count transitions, initial states, runs and emission statistics.
pub fn sufficient_stats(series: &[LabeledSeries], spec: &ModelSpec) -> Result<SufficientStats> {
    spec.validate()?;
    let j = spec.n_states;
    let p = spec.ar_order;
    let dim = spec.obs_dim;
    let mut stats = SufficientStats {
        n_states: j,
        n_series: series.len(),
        transitions: vec![vec![0; j]; j],
        initial: vec![0; j],
        emission: vec![vec![RegressionStats::new(p); dim]; j],
        sojourns: vec![Vec::new(); j],
    };
    let mut design = vec![0.0; p + 1];
    design[0] = 1.0;
    for s in series {
        if s.dim() != dim {
            return Err(Error::Dimension(alloc::format!(
                "series {} has {} columns, spec expects {dim}",
                s.id,
                s.dim()
            )));
        }
        let labels = s.checked_labels(j)?;
        stats.initial[labels[0]] += 1;
        for w in labels.windows(2) {
            if spec.family == Family::Hmm || w[0] != w[1] {
                stats.transitions[w[0]][w[1]] += 1;
            }
        }
        for (state, _, length) in label_runs(labels) {
            if spec.family == Family::Hsmm {
                if let Some(max) = spec.max_duration {
                    if length > max {
                        return Err(Error::RunTooLong { state, length, max });
                    }
                }
            }
            stats.sojourns[state].push(length);
        }
        for t in p..s.len() {
            let c = labels[t];
            for d in 0..dim {
                for k in 1..=p {
                    design[k] = s.row(t - k)[d];
                }
                stats.emission[c][d].add(&design, s.row(t)[d]);
            }
        }
    }
    Ok(stats)
}

/// Dirichlet concentrations of the posteriors of `δ` and each row of `Γ`.
/// HSMM diagonals (with more than one state) carry concentration 0, meaning
/// they are outside the support.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirichletPosteriors {
    pub delta: Vec<f64>,
    pub tpm: Vec<Vec<f64>>,
}

/// Conjugate update: prior concentration plus counts.
pub fn dirichlet_posteriors(stats: &SufficientStats, priors: &Priors, spec: &ModelSpec) -> Result<DirichletPosteriors> {
    priors.validate(spec)?;
    let j = spec.n_states;
    if stats.n_states != j {
        return Err(Error::Dimension("statistics do not match n_states".into()));
    }
    let delta = priors
        .delta_concentration
        .iter()
        .zip(&stats.initial)
        .map(|(&a, &n)| a + n as f64)
        .collect();
    let tpm = priors
        .tpm_concentration
        .iter()
        .zip(&stats.transitions)
        .enumerate()
        .map(|(r, (conc, counts))| {
            conc.iter()
                .zip(counts)
                .enumerate()
                .map(|(c, (&a, &n))| {
                    if spec.is_hsmm() && j > 1 && r == c {
                        0.0
                    } else {
                        a + n as f64
                    }
                })
                .collect()
        })
        .collect();
    Ok(DirichletPosteriors { delta, tpm })
}

/// Mean of a Dirichlet; zero-concentration coordinates get 0.
pub fn dirichlet_mean(alpha: &[f64]) -> Vec<f64> {
    let total: f64 = alpha.iter().sum();
    alpha.iter().map(|a| a / total).collect()
}

/// Mode of a Dirichlet, `(α_i - 1) / (Σα - K)` over the support. Coordinates
/// with `α_i < 1` are put at 0. When no coordinate exceeds 1 the density has
/// no unique mode and the mean is returned.
pub fn dirichlet_mode(alpha: &[f64]) -> Vec<f64> {
    let excess: Vec<f64> = alpha
        .iter()
        .map(|&a| if a > 0.0 { (a - 1.0).max(0.0) } else { 0.0 })
        .collect();
    let total: f64 = excess.iter().sum();
    if total > 0.0 {
        excess.iter().map(|e| e / total).collect()
    } else {
        dirichlet_mean(alpha)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labelled(labels: &[usize]) -> LabeledSeries {
        let xs: Vec<f64> = labels.iter().map(|&l| l as f64).collect();
        LabeledSeries::univariate("s", &xs)
            .unwrap()
            .with_labels(labels.to_vec())
            .unwrap()
    }

    #[test]
    fn hsmm_counts_switches_and_runs() {
        let spec = ModelSpec::hsmm(2, 1);
        let s = sufficient_stats(&[labelled(&[0, 0, 1, 1, 1])], &spec).unwrap();
        assert_eq!(s.transitions, vec![vec![0, 1], vec![0, 0]]);
        assert_eq!(s.sojourns, vec![vec![2], vec![3]]);
        assert_eq!(s.initial, vec![1, 0]);
    }

    #[test]
    fn hmm_counts_every_step() {
        let spec = ModelSpec::hmm(2, 1);
        let s = sufficient_stats(&[labelled(&[0, 1, 0])], &spec).unwrap();
        assert_eq!(s.transitions, vec![vec![0, 1], vec![1, 0]]);
        let s = sufficient_stats(&[labelled(&[0, 0, 1])], &spec).unwrap();
        assert_eq!(s.transitions, vec![vec![1, 1], vec![0, 0]]);
    }

    #[test]
    fn initial_counts_sum_to_series() {
        let spec = ModelSpec::hsmm(2, 1);
        let s = sufficient_stats(&[labelled(&[0, 1]), labelled(&[1, 1, 0])], &spec).unwrap();
        assert_eq!(s.initial, vec![1, 1]);
        // exits from j equal the row sums
        let exits: Vec<u64> = s.transitions.iter().map(|r| r.iter().sum()).collect();
        assert_eq!(exits, vec![1, 1]);
    }

    #[test]
    fn unlabeled_series_is_rejected() {
        let spec = ModelSpec::hmm(2, 1);
        let s = LabeledSeries::univariate("s", &[1.0, 2.0]).unwrap();
        assert!(matches!(sufficient_stats(&[s], &spec), Err(Error::Labels(_))));
    }

    #[test]
    fn declared_max_duration_is_enforced() {
        let spec = ModelSpec::hsmm(2, 1).with_max_duration(2);
        let r = sufficient_stats(&[labelled(&[0, 0, 0, 1])], &spec);
        assert!(matches!(
            r,
            Err(Error::RunTooLong {
                state: 0,
                length: 3,
                max: 2
            })
        ));
    }

    #[test]
    fn regression_stats_skip_conditioned_rows() {
        let spec = ModelSpec::hmm(1, 1).with_ar_order(1);
        let s = LabeledSeries::univariate("s", &[1.0, 2.0, 4.0])
            .unwrap()
            .with_labels(vec![0; 3])
            .unwrap();
        let st = sufficient_stats(&[s], &spec).unwrap();
        let r = &st.emission[0][0];
        assert_eq!(r.n, 2);
        assert_eq!(r.gram, vec![2.0, 3.0, 3.0, 5.0]);
        assert_eq!(r.xty, vec![6.0, 10.0]);
        assert_eq!(r.yy, 20.0);
    }

    #[test]
    fn conjugate_update_adds_counts() {
        let spec = ModelSpec::hmm(2, 1);
        let mut stats = sufficient_stats(&[labelled(&[0])], &spec).unwrap();
        stats.transitions = vec![vec![3, 7], vec![0, 0]];
        let post = dirichlet_posteriors(&stats, &Priors::default_for(&spec), &spec).unwrap();
        assert_eq!(post.tpm[0], vec![4.0, 8.0]);
        assert_eq!(post.tpm[1], vec![1.0, 1.0]);
        assert_eq!(post.delta, vec![2.0, 1.0]);
        assert!((dirichlet_mean(&post.tpm[0])[1] - 8.0 / 12.0).abs() < 1e-15);
    }

    #[test]
    fn hsmm_diagonal_is_excluded() {
        let spec = ModelSpec::hsmm(3, 1);
        let stats = sufficient_stats(&[labelled(&[0, 1, 2, 0])], &spec).unwrap();
        let post = dirichlet_posteriors(&stats, &Priors::default_for(&spec), &spec).unwrap();
        for (i, row) in post.tpm.iter().enumerate() {
            assert_eq!(row[i], 0.0);
        }
        assert_eq!(post.tpm[0], vec![0.0, 2.0, 1.0]);
    }

    #[test]
    fn dirichlet_mode_formula() {
        // Dirichlet(2, 2) plus counts (3, 7)
        let m = dirichlet_mode(&[5.0, 9.0]);
        assert!((m[0] - 4.0 / 12.0).abs() < 1e-15);
        let m = dirichlet_mode(&[4.0, 8.0]);
        assert!((m[0] - 0.3).abs() < 1e-15 && (m[1] - 0.7).abs() < 1e-15);
        assert_eq!(dirichlet_mode(&[1.0, 1.0]), vec![0.5, 0.5]);
        assert_eq!(dirichlet_mode(&[0.0, 3.0, 1.0]), vec![0.0, 1.0, 0.0]);
    }
}
