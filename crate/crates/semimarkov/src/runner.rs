//! Parallel drivers over the pure core routines.
//!
//! Work items (sampler blocks, posterior draws, folds, grid cells) each own
//! a seed derived from the master seed, and results are collected in item
//! order, so the output never depends on the number of threads.

use anyhow::{bail, Context, Result};
use rayon::prelude::*;

use semimarkov_core::decode::{decode_params, pool, DecodeMode, DecodeOptions, PooledDecode};
use semimarkov_core::evaluate::{
    fold_seed, plan_folds, run_cell, run_fold, summarize, CvSettings, EvalReport, StudyConfig, StudyRow,
};
use semimarkov_core::fit::{PosteriorDraws, Sampler, SamplerSettings};
use semimarkov_core::{LabeledSeries, ModelSpec, Params, Priors};

/// Environment variable capping the number of worker threads.
pub const THREADS_ENV: &str = "SEMIMARKOV_THREADS";

/// Parse a thread cap; `None` or an empty value means no cap.
pub fn parse_threads(value: Option<&str>) -> Result<Option<usize>> {
    match value.map(str::trim) {
        None | Some("") => Ok(None),
        Some(v) => match v.parse::<usize>() {
            Ok(n) if n >= 1 => Ok(Some(n)),
            _ => bail!("{THREADS_ENV} must be a positive integer, got `{v}`"),
        },
    }
}

/// Worker pool sized by `SEMIMARKOV_THREADS` when set.
pub fn thread_pool() -> Result<rayon::ThreadPool> {
    let cap = parse_threads(std::env::var(THREADS_ENV).ok().as_deref())?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cap {
        builder = builder.num_threads(n);
    }
    builder.build().context("cannot start worker threads")
}

/// Posterior sampling with the sampler blocks run in parallel.
pub fn fit(
    series: &[LabeledSeries],
    priors: &Priors,
    spec: &ModelSpec,
    settings: SamplerSettings,
    n_draws: usize,
    seed: u64,
) -> Result<PosteriorDraws> {
    let sampler = Sampler::new(series, priors, spec, settings, n_draws, seed)?;
    let blocks = (0..sampler.n_blocks())
        .into_par_iter()
        .map(|i| sampler.run_block(i))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(sampler.assemble(blocks)?)
}

/// Decode one series under every draw in parallel and pool the results.
pub fn decode(
    series: &LabeledSeries,
    draws: &[Params],
    spec: &ModelSpec,
    mode: DecodeMode,
    options: &DecodeOptions,
) -> Result<PooledDecode> {
    if draws.is_empty() {
        bail!("no parameter draws to decode with");
    }
    let per_draw = draws
        .par_iter()
        .map(|p| decode_params(series, p, spec, mode, options))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(pool(per_draw)?)
}

/// Per-time majority vote over the Viterbi paths of every draw, lowest
/// state on ties.
pub fn majority_path(decoded: &PooledDecode) -> Option<Vec<usize>> {
    let paths: Vec<&[usize]> = decoded
        .per_draw
        .iter()
        .map(|r| r.global.as_ref().map(|g| g.path.as_slice()))
        .collect::<Option<_>>()?;
    let first = paths.first()?;
    let j = decoded.per_draw[0].n_states;
    let mut counts = vec![0usize; j];
    Some(
        (0..first.len())
            .map(|t| {
                counts.iter_mut().for_each(|c| *c = 0);
                for p in &paths {
                    counts[p[t]] += 1;
                }
                let mut best = 0;
                for (s, &c) in counts.iter().enumerate() {
                    if c > counts[best] {
                        best = s;
                    }
                }
                best
            })
            .collect(),
    )
}

/// Leave-one-series-out cross-validation with folds run in parallel.
/// Identical to the sequential core routine.
pub fn cross_validate(
    series: &[LabeledSeries],
    priors: &Priors,
    spec: &ModelSpec,
    settings: &CvSettings,
    seed: u64,
) -> Result<EvalReport> {
    let plan = plan_folds(series.len(), settings.max_folds, seed)?;
    let folds = plan
        .par_iter()
        .map(|&i| run_fold(series, i, priors, spec, settings, fold_seed(seed, i)))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(summarize(folds)?)
}

/// The simulation study with grid cells run in parallel.
pub fn study(config: &StudyConfig, seed: u64) -> Result<Vec<StudyRow>> {
    let cells = config.scenario.cells()?;
    let rows = cells
        .par_iter()
        .map(|cell| run_cell(cell, config, seed))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(rows.into_iter().flatten().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use semimarkov_core::decode::decode as decode_seq;
    use semimarkov_core::evaluate::{loocv_with, run_simulation_study};
    use semimarkov_core::fit::sample_posterior_with;
    use semimarkov_core::simulate::{Scenario, ScenarioConfig};

    fn toy_series(seed: u64) -> Vec<LabeledSeries> {
        let cfg = ScenarioConfig {
            n_series: 3,
            series_length: 200,
            ..ScenarioConfig::desk()
        };
        let cell: Scenario = cfg.cells().unwrap().remove(60);
        cell.simulate(3, 200, seed).unwrap()
    }

    fn in_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(f)
    }

    #[test]
    fn thread_cap_parsing() {
        assert_eq!(parse_threads(None).unwrap(), None);
        assert_eq!(parse_threads(Some("")).unwrap(), None);
        assert_eq!(parse_threads(Some(" 3 ")).unwrap(), Some(3));
        assert!(parse_threads(Some("0")).is_err());
        assert!(parse_threads(Some("many")).is_err());
    }

    #[test]
    fn parallel_fit_matches_sequential() {
        let series = toy_series(5);
        let spec = ModelSpec::hsmm(2, 1);
        let priors = Priors::default_for(&spec);
        let settings = SamplerSettings {
            burn_in: 200,
            ..SamplerSettings::default()
        };
        let seq = sample_posterior_with(&series, &priors, &spec, settings, 20, 9).unwrap();
        for threads in [1, 3] {
            let par = in_pool(threads, || fit(&series, &priors, &spec, settings, 20, 9).unwrap());
            assert_eq!(par, seq);
        }
    }

    #[test]
    fn parallel_cv_and_decode_match_sequential() {
        let series = toy_series(6);
        let spec = ModelSpec::hmm(2, 1);
        let priors = Priors::default_for(&spec);
        let settings = CvSettings {
            n_pred_draws: 4,
            sampler: SamplerSettings {
                burn_in: 100,
                ..SamplerSettings::default()
            },
            ..CvSettings::default()
        };
        let seq = loocv_with(&series, &priors, &spec, &settings, 2).unwrap();
        let par = in_pool(2, || cross_validate(&series, &priors, &spec, &settings, 2).unwrap());
        assert_eq!(par, seq);

        let draws = sample_posterior_with(&series, &priors, &spec, settings.sampler, 3, 1)
            .unwrap()
            .draws;
        let opts = DecodeOptions::default();
        let a = decode_seq(&series[0], &draws, &spec, DecodeMode::Both, &opts).unwrap();
        let b = in_pool(2, || {
            decode(&series[0], &draws, &spec, DecodeMode::Both, &opts).unwrap()
        });
        assert_eq!(a, b);
    }

    #[test]
    fn parallel_study_matches_sequential() {
        let mut config = StudyConfig::desk();
        config.scenario = ScenarioConfig {
            overlaps: config.scenario.overlaps[..1].to_vec(),
            sojourn_mean_avgs: vec![20.0],
            sojourn_mean_diffs: vec![3.0, 15.0],
            n_series: 2,
            series_length: 150,
            ..config.scenario
        };
        config.cv.n_pred_draws = 2;
        config.cv.sampler.burn_in = 50;
        let seq = run_simulation_study(&config, 4).unwrap();
        let par = in_pool(3, || study(&config, 4).unwrap());
        assert_eq!(par, seq);
        assert_eq!(par.len(), 2 * 2 * config.scenario.dispersions.len());
    }

    #[test]
    fn majority_vote_breaks_ties_low() {
        use semimarkov_core::decode::{DecodeResult, ViterbiPath};
        let r = |path: Vec<usize>| DecodeResult {
            n_states: 3,
            local: None,
            global: Some(ViterbiPath { path, log_prob: 0.0 }),
        };
        let pooled = pool(vec![r(vec![2, 1, 0]), r(vec![2, 0, 1]), r(vec![1, 2, 2])]).unwrap();
        assert_eq!(majority_path(&pooled).unwrap(), vec![2, 0, 0]);
    }
}
