//! Classification metrics, leave-one-series-out cross-validation,
//! posterior-predictive RMSE and the simulation-study runner.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::decode::{decode_params, DecodeMode, DecodeOptions};
use crate::fit::{sample_posterior_with, SamplerSettings};
use crate::math::Quartiles;
use crate::model::{LabeledSeries, ModelSpec, Params, Priors};
use crate::rng::{self, derive_seed};
use crate::simulate::{cell_seed, DispersionClass, Overlap, Scenario, ScenarioConfig};
use crate::{Error, Result};

/// Probabilities are floored at this value before taking logs.
pub const PROB_FLOOR: f64 = 1e-12;

/// Fraction of positions where the two label vectors agree.
pub fn accuracy(truth: &[usize], predicted: &[usize]) -> Result<f64> {
    if truth.len() != predicted.len() {
        return Err(Error::Dimension(format!(
            "{} true labels vs {} predictions",
            truth.len(),
            predicted.len()
        )));
    }
    if truth.is_empty() {
        return Err(Error::Empty("no labels to compare".into()));
    }
    let hits = truth.iter().zip(predicted).filter(|(a, b)| a == b).count();
    Ok(hits as f64 / truth.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrossEntropy {
    /// `-Σ_t log p_t(c_t)`.
    pub total: f64,
    /// `total / T`.
    pub mean: f64,
}

/// Cross-entropy of row-major `T x J` probabilities against true labels.
pub fn cross_entropy(truth: &[usize], probs: &[f64], n_states: usize) -> Result<CrossEntropy> {
    if n_states == 0 || probs.len() != truth.len() * n_states {
        return Err(Error::Dimension(format!(
            "{} probabilities for {} labels and {n_states} states",
            probs.len(),
            truth.len()
        )));
    }
    if truth.is_empty() {
        return Err(Error::Empty("no labels to score".into()));
    }
    let mut total = 0.0;
    for (t, &c) in truth.iter().enumerate() {
        if c >= n_states {
            return Err(Error::Labels(format!("label {} outside 1..={n_states}", c + 1)));
        }
        total -= probs[t * n_states + c].max(PROB_FLOOR).ln();
    }
    // -log(1) can be -0.0
    let total = total.max(0.0);
    Ok(CrossEntropy {
        total,
        mean: total / truth.len() as f64,
    })
}

/// Cross-validation settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CvSettings {
    /// Posterior draws used to decode each held-out series.
    pub n_pred_draws: usize,
    /// Number of folds to run; `None` runs every fold.
    pub max_folds: Option<usize>,
    pub sampler: SamplerSettings,
    pub decode: DecodeOptions,
}

impl Default for CvSettings {
    fn default() -> Self {
        Self {
            n_pred_draws: 30,
            max_folds: None,
            sampler: SamplerSettings::default(),
            decode: DecodeOptions::default(),
        }
    }
}

/// Results of one held-out series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub held_out: usize,
    pub held_out_id: String,
    pub held_out_fingerprint: u64,
    pub training_fingerprints: Vec<u64>,
    /// One value per posterior draw.
    pub accuracy_local: Vec<f64>,
    pub accuracy_global: Vec<f64>,
    pub ce_total: Vec<f64>,
    pub ce_mean: Vec<f64>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub accuracy_local: Quartiles,
    pub accuracy_global: Quartiles,
    pub ce_total: Quartiles,
    pub ce_mean: Quartiles,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub folds: Vec<FoldResult>,
    /// Quartiles over every (fold, draw) value.
    pub pooled: EvalSummary,
    #[serde(default)]
    pub rmse: Option<RmseReport>,
}

/// Indices of the series held out, in increasing order. With `max_folds`
/// below the number of series a seeded subset is chosen.
pub fn plan_folds(n_series: usize, max_folds: Option<usize>, seed: u64) -> Result<Vec<usize>> {
    if n_series < 2 {
        return Err(Error::Domain(format!(
            "leave-one-out needs at least 2 series, got {n_series}"
        )));
    }
    let k = max_folds.unwrap_or(n_series).min(n_series);
    if k == 0 {
        return Err(Error::Domain("max_folds must be >= 1".into()));
    }
    let mut idx: Vec<usize> = (0..n_series).collect();
    if k < n_series {
        let mut r = rng::stream(seed, 0x666f_6c64);
        for i in 0..k {
            let j = r.gen_range(i..n_series);
            idx.swap(i, j);
        }
        idx.truncate(k);
        idx.sort_unstable();
    }
    Ok(idx)
}

/// Fit on every series except `held_out` and score the held-out series
/// under `n_pred_draws` posterior draws.
pub fn run_fold(
    series: &[LabeledSeries],
    held_out: usize,
    priors: &Priors,
    spec: &ModelSpec,
    settings: &CvSettings,
    seed: u64,
) -> Result<FoldResult> {
    let test = series
        .get(held_out)
        .ok_or_else(|| Error::Domain(format!("no series {held_out}")))?;
    let truth = test.checked_labels(spec.n_states)?;
    let train: Vec<LabeledSeries> = series
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != held_out)
        .map(|(_, s)| s.clone())
        .collect();
    let posterior = sample_posterior_with(&train, priors, spec, settings.sampler, settings.n_pred_draws, seed)?;
    let n = posterior.draws.len();
    let mut fold = FoldResult {
        held_out,
        held_out_id: test.id.clone(),
        held_out_fingerprint: test.fingerprint(),
        training_fingerprints: train.iter().map(LabeledSeries::fingerprint).collect(),
        accuracy_local: Vec::with_capacity(n),
        accuracy_global: Vec::with_capacity(n),
        ce_total: Vec::with_capacity(n),
        ce_mean: Vec::with_capacity(n),
        warnings: posterior.diagnostics.warnings.clone(),
    };
    for draw in &posterior.draws {
        let d = decode_params(test, draw, spec, DecodeMode::Both, &settings.decode)?;
        let local = d.local.expect("both modes requested");
        let global = d.global.expect("both modes requested");
        fold.accuracy_local.push(accuracy(truth, &local.path)?);
        fold.accuracy_global.push(accuracy(truth, &global.path)?);
        let ce = cross_entropy(truth, &local.probs, spec.n_states)?;
        fold.ce_total.push(ce.total);
        fold.ce_mean.push(ce.mean);
    }
    Ok(fold)
}

/// Pool fold results into quartile summaries.
pub fn summarize(folds: Vec<FoldResult>) -> Result<EvalReport> {
    let pool = |f: fn(&FoldResult) -> &Vec<f64>| -> Result<Quartiles> {
        let all: Vec<f64> = folds.iter().flat_map(|x| f(x).iter().copied()).collect();
        Quartiles::of(&all).ok_or_else(|| Error::Empty("no fold results".into()))
    };
    let pooled = EvalSummary {
        accuracy_local: pool(|f| &f.accuracy_local)?,
        accuracy_global: pool(|f| &f.accuracy_global)?,
        ce_total: pool(|f| &f.ce_total)?,
        ce_mean: pool(|f| &f.ce_mean)?,
    };
    Ok(EvalReport {
        folds,
        pooled,
        rmse: None,
    })
}

/// Seed of the fold holding out series `held_out`.
pub fn fold_seed(seed: u64, held_out: usize) -> u64 {
    derive_seed(seed, held_out as u64)
}

/// Leave-one-series-out cross-validation with default settings and
/// `n_pred_draws` draws per fold.
pub fn loocv(
    series: &[LabeledSeries],
    priors: &Priors,
    spec: &ModelSpec,
    n_pred_draws: usize,
    seed: u64,
) -> Result<EvalReport> {
    let settings = CvSettings {
        n_pred_draws,
        ..CvSettings::default()
    };
    loocv_with(series, priors, spec, &settings, seed)
}

pub fn loocv_with(
    series: &[LabeledSeries],
    priors: &Priors,
    spec: &ModelSpec,
    settings: &CvSettings,
    seed: u64,
) -> Result<EvalReport> {
    let plan = plan_folds(series.len(), settings.max_folds, seed)?;
    let folds = plan
        .iter()
        .map(|&i| run_fold(series, i, priors, spec, settings, fold_seed(seed, i)))
        .collect::<Result<Vec<_>>>()?;
    summarize(folds)
}

/// Posterior-predictive RMSE per observed dimension, one value per draw.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RmseReport {
    /// `per_dim[d][r]`.
    pub per_dim: Vec<Vec<f64>>,
    pub summary: Vec<Quartiles>,
}

/// For each of `n_draws` posterior draws (cycling through `draws`): decode
/// every series locally, sample each state independently from its
/// smoothed marginal, draw an observation from that state's emission given
/// the observed lags, and compute the RMSE against the observations. Rows
/// `t < p` are conditioned on and excluded.
pub fn rmse_posterior_predictive(
    series: &[LabeledSeries],
    draws: &[Params],
    spec: &ModelSpec,
    n_draws: usize,
    options: &DecodeOptions,
    seed: u64,
) -> Result<RmseReport> {
    if draws.is_empty() || n_draws == 0 {
        return Err(Error::Empty("need at least one posterior draw".into()));
    }
    for d in draws {
        d.validate(spec)?;
    }
    let dim = spec.obs_dim;
    let p = spec.ar_order;
    let j = spec.n_states;
    let mut per_dim = vec![Vec::with_capacity(n_draws); dim];
    let mut mean = vec![0.0; dim];
    for r in 0..n_draws {
        let params = &draws[r % draws.len()];
        let mut rng = rng::stream(derive_seed(seed, r as u64), 0);
        let mut sq = vec![0.0; dim];
        let mut count = 0usize;
        for s in series {
            if s.dim() != dim {
                return Err(Error::Dimension(format!("series {} has {} columns", s.id, s.dim())));
            }
            let local = decode_params(s, params, spec, DecodeMode::Local, options)?
                .local
                .expect("local mode requested");
            for t in p..s.len() {
                let u: f64 = rng.gen();
                let row = &local.probs[t * j..(t + 1) * j];
                let mut acc = 0.0;
                let mut state = j - 1;
                for (c, &pr) in row.iter().enumerate() {
                    acc += pr;
                    if u < acc {
                        state = c;
                        break;
                    }
                }
                let em = &params.emissions[state];
                let lags: Vec<&[f64]> = (1..=p).map(|k| s.row(t - k)).collect();
                em.conditional_mean(&lags, &mut mean);
                let obs = s.row(t);
                for d in 0..dim {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    let pred = mean[d] + em.variances[d].sqrt() * z;
                    sq[d] += (pred - obs[d]) * (pred - obs[d]);
                }
                count += 1;
            }
        }
        if count == 0 {
            return Err(Error::Empty("no predictable observations".into()));
        }
        for d in 0..dim {
            per_dim[d].push((sq[d] / count as f64).sqrt());
        }
    }
    let summary = per_dim.iter().map(|v| Quartiles::of(v).expect("non-empty")).collect();
    Ok(RmseReport { per_dim, summary })
}

/// Which model family a study row refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StudyModel {
    Hmm,
    Hsmm,
}

impl StudyModel {
    pub fn spec(self) -> ModelSpec {
        match self {
            StudyModel::Hmm => ModelSpec::hmm(2, 1),
            StudyModel::Hsmm => ModelSpec::hsmm(2, 1),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyConfig {
    pub scenario: ScenarioConfig,
    pub cv: CvSettings,
}

impl StudyConfig {
    /// 3 series of length 1000 per cell, 2 sampled folds, 10 draws.
    pub fn desk() -> Self {
        Self {
            scenario: ScenarioConfig::desk(),
            cv: CvSettings {
                n_pred_draws: 10,
                max_folds: Some(2),
                ..CvSettings::default()
            },
        }
    }

    /// 10 series of length 3000 per cell, every fold, 30 draws.
    pub fn paper() -> Self {
        Self {
            scenario: ScenarioConfig::paper(),
            cv: CvSettings {
                n_pred_draws: 30,
                max_folds: None,
                ..CvSettings::default()
            },
        }
    }
}

/// One model evaluated on one grid cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyRow {
    pub cell: usize,
    pub label: String,
    pub overlap: Overlap,
    pub sojourn_mean_avg: f64,
    pub sojourn_mean_diff: f64,
    pub k1: f64,
    pub k2: f64,
    pub dispersion_class: DispersionClass,
    pub model: StudyModel,
    pub n_folds: usize,
    pub ce_mean: Quartiles,
    pub ce_total: Quartiles,
    pub accuracy_local: Quartiles,
    pub accuracy_global: Quartiles,
}

/// Simulate one cell and cross-validate both models on it.
pub fn run_cell(scenario: &Scenario, config: &StudyConfig, master_seed: u64) -> Result<Vec<StudyRow>> {
    let seed = cell_seed(master_seed, scenario.index);
    let sc = &config.scenario;
    let series = scenario.simulate(sc.n_series, sc.series_length, seed)?;
    let plan = plan_folds(series.len(), config.cv.max_folds, seed)?;
    let mut rows = Vec::with_capacity(2);
    for (m, model) in [StudyModel::Hmm, StudyModel::Hsmm].into_iter().enumerate() {
        let spec = model.spec();
        let priors = Priors::default_for(&spec);
        let model_seed = derive_seed(seed, 1 + m as u64);
        let folds = plan
            .iter()
            .map(|&i| run_fold(&series, i, &priors, &spec, &config.cv, fold_seed(model_seed, i)))
            .collect::<Result<Vec<_>>>()?;
        let report = summarize(folds)?;
        rows.push(StudyRow {
            cell: scenario.index,
            label: scenario.label(),
            overlap: scenario.overlap,
            sojourn_mean_avg: scenario.sojourn_mean_avg,
            sojourn_mean_diff: scenario.sojourn_mean_diff,
            k1: scenario.dispersion.k1,
            k2: scenario.dispersion.k2,
            dispersion_class: scenario.dispersion.class(),
            model,
            n_folds: report.folds.len(),
            ce_mean: report.pooled.ce_mean,
            ce_total: report.pooled.ce_total,
            accuracy_local: report.pooled.accuracy_local,
            accuracy_global: report.pooled.accuracy_global,
        });
    }
    Ok(rows)
}

/// Run every cell of the grid in order.
pub fn run_simulation_study(config: &StudyConfig, seed: u64) -> Result<Vec<StudyRow>> {
    let mut rows = Vec::new();
    for cell in config.scenario.cells()? {
        rows.extend(run_cell(&cell, config, seed)?);
    }
    Ok(rows)
}

/// Median local-decoding accuracy of the HSMM minus that of the HMM, per
/// cell, for rows produced by [`run_cell`].
pub fn accuracy_gaps(rows: &[StudyRow]) -> Vec<(usize, f64)> {
    let mut out = Vec::new();
    for hsmm in rows.iter().filter(|r| r.model == StudyModel::Hsmm) {
        if let Some(hmm) = rows.iter().find(|r| r.model == StudyModel::Hmm && r.cell == hsmm.cell) {
            out.push((hsmm.cell, hsmm.accuracy_local.median - hmm.accuracy_local.median));
        }
    }
    out
}
