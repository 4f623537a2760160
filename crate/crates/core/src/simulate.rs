//! Synthetic series from any model, and the two-state HSMM scenario grid
//! used to compare HMM and HSMM classifiers.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::model::{Emission, Family, LabeledSeries, ModelSpec, Params};
use crate::rng::{self, derive_seed, Rng};
use crate::sojourn::SojournDist;
use crate::{Error, Result};

/// Steps used to approach the stationary law when seeding AR(p > 1) chains.
const AR_WARMUP: usize = 200;

fn categorical(rng: &mut Rng, probs: &[f64]) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    // rounding: fall back to the last state with mass
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(0)
}

fn simulate_labels(spec: &ModelSpec, params: &Params, n: usize, rng: &mut Rng) -> Vec<usize> {
    let mut labels = Vec::with_capacity(n);
    let mut state = categorical(rng, &params.delta);
    match spec.family {
        Family::Hmm => {
            labels.push(state);
            while labels.len() < n {
                state = categorical(rng, &params.tpm[state]);
                labels.push(state);
            }
        }
        Family::Hsmm => loop {
            let u = params.sojourns[state].sample(rng);
            let take = u.min(n - labels.len());
            labels.extend(core::iter::repeat(state).take(take));
            if labels.len() == n {
                break;
            }
            if spec.n_states > 1 {
                state = categorical(rng, &params.tpm[state]);
            }
        },
    }
    labels
}

fn normal(rng: &mut Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// Initial `p` rows for an AR chain in `em`.
fn initial_rows(em: &Emission, p: usize, rng: &mut Rng) -> Vec<Vec<f64>> {
    let dim = em.mean.len();
    let mut rows = vec![vec![0.0; dim]; p];
    for d in 0..dim {
        let sd = em.variances[d].sqrt();
        let coeffs: Vec<f64> = em.ar_coeffs.iter().map(|c| c[d]).collect();
        let stationary = coeffs.iter().map(|w| w.abs()).sum::<f64>() < 1.0;
        if !stationary {
            for row in rows.iter_mut() {
                row[d] = em.mean[d] + sd * normal(rng);
            }
        } else if p == 1 {
            let w = coeffs[0];
            let m = em.mean[d] / (1.0 - w);
            let s = sd / (1.0 - w * w).sqrt();
            rows[0][d] = m + s * normal(rng);
        } else {
            let mut hist: Vec<f64> = (0..p).map(|_| em.mean[d] + sd * normal(rng)).collect();
            for _ in 0..AR_WARMUP {
                let n = hist.len();
                let mu = em.mean[d] + coeffs.iter().enumerate().map(|(k, w)| w * hist[n - 1 - k]).sum::<f64>();
                hist.push(mu + sd * normal(rng));
            }
            let n = hist.len();
            for (k, row) in rows.iter_mut().enumerate() {
                row[d] = hist[n - p + k];
            }
        }
    }
    rows
}

/// Simulate one labelled series of length `length`.
///
/// HSMM state sequences are built from sojourn draws with the final run
/// truncated at `length`. AR chains start from the stationary marginal of
/// the first state when it exists, else from `N(mean, Σ)`.
pub fn simulate_series(spec: &ModelSpec, params: &Params, length: usize, seed: u64) -> Result<LabeledSeries> {
    params.validate(spec)?;
    if length == 0 {
        return Err(Error::Domain("series length must be >= 1".into()));
    }
    let mut rng = rng::stream(seed, 0);
    let labels = simulate_labels(spec, params, length, &mut rng);
    let p = spec.ar_order;
    let dim = spec.obs_dim;
    let mut obs = vec![0.0; length * dim];

    let init = initial_rows(&params.emissions[labels[0]], p.min(length), &mut rng);
    for (t, row) in init.iter().enumerate() {
        obs[t * dim..(t + 1) * dim].copy_from_slice(row);
    }
    let mut mean = vec![0.0; dim];
    for t in p..length {
        let em = &params.emissions[labels[t]];
        let lags: Vec<&[f64]> = (1..=p).map(|k| &obs[(t - k) * dim..(t - k + 1) * dim]).collect();
        em.conditional_mean(&lags, &mut mean);
        for d in 0..dim {
            obs[t * dim + d] = mean[d] + em.variances[d].sqrt() * normal(&mut rng);
        }
    }
    LabeledSeries::from_flat(format!("sim-{seed:016x}"), dim, obs)?.with_labels(labels)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Overlap {
    High,
    Medium,
    Low,
}

impl Overlap {
    /// Mean of the second state; the first is always `N(0, 1)`.
    pub fn second_mean(self) -> f64 {
        match self {
            Overlap::High => 0.3,
            Overlap::Medium => 1.0,
            Overlap::Low => 3.0,
        }
    }

    pub fn all() -> [Overlap; 3] {
        [Overlap::High, Overlap::Medium, Overlap::Low]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DispersionClass {
    OneGeometric,
    NoneGeometric,
}

/// Sojourn dispersions `(k1, k2)` of the two states.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DispersionPair {
    pub k1: f64,
    pub k2: f64,
}

impl DispersionPair {
    pub fn class(&self) -> DispersionClass {
        if self.k1 == 1.0 || self.k2 == 1.0 {
            DispersionClass::OneGeometric
        } else {
            DispersionClass::NoneGeometric
        }
    }
}

/// A grid of two-state HSMM scenarios.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub overlaps: Vec<Overlap>,
    /// `(m1 + m2) / 2`.
    pub sojourn_mean_avgs: Vec<f64>,
    /// `m1 - m2` in absolute value.
    pub sojourn_mean_diffs: Vec<f64>,
    pub dispersions: Vec<DispersionPair>,
    pub n_series: usize,
    pub series_length: usize,
    /// 0-based state that receives the larger sojourn mean.
    #[serde(default)]
    pub larger_mean_state: usize,
}

impl ScenarioConfig {
    /// 3 overlaps x 3 averages x 3 differences x 4 dispersion pairs, ten
    /// series of length 3000 per cell.
    pub fn paper() -> Self {
        Self {
            overlaps: Overlap::all().to_vec(),
            sojourn_mean_avgs: vec![20.0, 40.0, 90.0],
            sojourn_mean_diffs: vec![3.0, 15.0, 30.0],
            dispersions: vec![
                DispersionPair { k1: 1.0, k2: 10.0 },
                DispersionPair { k1: 1.0, k2: 30.0 },
                DispersionPair { k1: 30.0, k2: 50.0 },
                DispersionPair { k1: 80.0, k2: 100.0 },
            ],
            n_series: 10,
            series_length: 3000,
            larger_mean_state: 0,
        }
    }

    /// Same grid with three series of length 1000 per cell.
    pub fn desk() -> Self {
        Self {
            n_series: 3,
            series_length: 1000,
            ..Self::paper()
        }
    }

    pub fn cells(&self) -> Result<Vec<Scenario>> {
        if self.n_series == 0 || self.series_length == 0 {
            return Err(Error::Domain("need at least one series of positive length".into()));
        }
        if self.larger_mean_state > 1 {
            return Err(Error::Domain("larger_mean_state must be 0 or 1".into()));
        }
        let mut out = Vec::new();
        for &overlap in &self.overlaps {
            for &avg in &self.sojourn_mean_avgs {
                for &diff in &self.sojourn_mean_diffs {
                    for &disp in &self.dispersions {
                        let hi = avg + diff / 2.0;
                        let lo = avg - diff / 2.0;
                        if !(lo > 0.0 && hi > 0.0) {
                            return Err(Error::Domain(format!(
                                "sojourn means must be positive: average {avg}, difference {diff}"
                            )));
                        }
                        if !(disp.k1 > 0.0 && disp.k2 > 0.0) {
                            return Err(Error::Domain("dispersions must be positive".into()));
                        }
                        let (m1, m2) = if self.larger_mean_state == 0 {
                            (hi, lo)
                        } else {
                            (lo, hi)
                        };
                        out.push(Scenario {
                            index: out.len(),
                            overlap,
                            sojourn_mean_avg: avg,
                            sojourn_mean_diff: diff,
                            dispersion: disp,
                            m1,
                            m2,
                        });
                    }
                }
            }
        }
        Ok(out)
    }
}

/// One cell of the scenario grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub index: usize,
    pub overlap: Overlap,
    pub sojourn_mean_avg: f64,
    pub sojourn_mean_diff: f64,
    pub dispersion: DispersionPair,
    pub m1: f64,
    pub m2: f64,
}

impl Scenario {
    pub fn spec(&self) -> ModelSpec {
        ModelSpec::hsmm(2, 1)
    }

    /// `f1 = N(0, 1)`, `f2 = N(μ2, 1)`, NB sojourns, uniform δ and the only
    /// zero-diagonal 2x2 transition matrix.
    pub fn params(&self) -> Params {
        Params {
            delta: vec![0.5, 0.5],
            tpm: vec![vec![0.0, 1.0], vec![1.0, 0.0]],
            emissions: vec![
                Emission::gaussian(vec![0.0], vec![1.0]),
                Emission::gaussian(vec![self.overlap.second_mean()], vec![1.0]),
            ],
            sojourns: vec![
                SojournDist::NegBinomial {
                    mean: self.m1,
                    dispersion: self.dispersion.k1,
                },
                SojournDist::NegBinomial {
                    mean: self.m2,
                    dispersion: self.dispersion.k2,
                },
            ],
        }
    }

    pub fn label(&self) -> String {
        format!(
            "{:?}-avg{}-diff{}-k{}_{}",
            self.overlap, self.sojourn_mean_avg, self.sojourn_mean_diff, self.dispersion.k1, self.dispersion.k2
        )
    }

    /// Simulate the cell's series; series `i` uses seed `derive_seed(cell_seed, i)`.
    pub fn simulate(&self, n_series: usize, length: usize, cell_seed: u64) -> Result<Vec<LabeledSeries>> {
        let spec = self.spec();
        let params = self.params();
        (0..n_series)
            .map(|i| {
                let mut s = simulate_series(&spec, &params, length, derive_seed(cell_seed, i as u64))?;
                s.id = format!("cell{:03}-series{:02}", self.index, i);
                Ok(s)
            })
            .collect()
    }
}

/// Seed of grid cell `index` under a master seed.
pub fn cell_seed(master: u64, index: usize) -> u64 {
    derive_seed(master, index as u64)
}

/// Every cell of the grid with its simulated series.
pub fn scenario_grid(config: &ScenarioConfig, seed: u64) -> Result<Vec<(Scenario, Vec<LabeledSeries>)>> {
    config
        .cells()?
        .into_iter()
        .map(|cell| {
            let series = cell.simulate(config.n_series, config.series_length, cell_seed(seed, cell.index))?;
            Ok((cell, series))
        })
        .collect()
}
