use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

use super::*;
use crate::likelihood::log_posterior;
use crate::simulate::simulate_series;

fn two_state_hmm(mu2: f64) -> (ModelSpec, Params) {
    (
        ModelSpec::hmm(2, 1),
        Params {
            delta: vec![0.5, 0.5],
            tpm: vec![vec![0.95, 0.05], vec![0.1, 0.9]],
            emissions: vec![
                Emission::gaussian(vec![0.0], vec![1.0]),
                Emission::gaussian(vec![mu2], vec![1.0]),
            ],
            sojourns: vec![],
        },
    )
}

fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
    (m, v.sqrt())
}

#[test]
fn conjugate_draws_match_dirichlet_moments() {
    let (spec, params) = two_state_hmm(3.0);
    let data: Vec<LabeledSeries> = (0..3)
        .map(|i| simulate_series(&spec, &params, 200, 40 + i).unwrap())
        .collect();
    let priors = Priors::default_for(&spec);
    let stats = sufficient_stats(&data, &spec).unwrap();
    let post = dirichlet_posteriors(&stats, &priors, &spec).unwrap();
    let settings = SamplerSettings {
        burn_in: 200,
        ..SamplerSettings::default()
    };
    let n = 10_000;
    let draws = sample_posterior_with(&data, &priors, &spec, settings, n, 5).unwrap();
    assert_eq!(draws.len(), n);
    let check = |alpha: &[f64], values: Vec<f64>, coord: usize| {
        let a0: f64 = alpha.iter().sum();
        let mean = alpha[coord] / a0;
        let var = mean * (1.0 - mean) / (a0 + 1.0);
        let se = (var / values.len() as f64).sqrt();
        let (m, _) = mean_sd(&values);
        assert!((m - mean).abs() < 3.0 * se, "sample mean {m} vs {mean} (se {se})");
    };
    for row in 0..2 {
        let vals: Vec<f64> = draws.draws.iter().map(|p| p.tpm[row][1 - row]).collect();
        check(&post.tpm[row], vals, 1 - row);
    }
    let vals: Vec<f64> = draws.draws.iter().map(|p| p.delta[0]).collect();
    check(&post.delta, vals, 0);
}

#[test]
fn hmm_means_recovered_with_tuned_acceptance() {
    let (spec, params) = two_state_hmm(3.0);
    let data = vec![simulate_series(&spec, &params, 5000, 17).unwrap()];
    let draws = sample_posterior(&data, &Priors::default_for(&spec), &spec, 2000, 3).unwrap();
    for (state, truth) in [(0, 0.0), (1, 3.0)] {
        let vals: Vec<f64> = draws.draws.iter().map(|p| p.emissions[state].mean[0]).collect();
        let (m, sd) = mean_sd(&vals);
        assert!((m - truth).abs() < 3.0 * sd, "state {state}: {m} ± {sd}");
    }
    for b in &draws.diagnostics.blocks {
        let late = b.burn_in_acceptance.unwrap();
        let kept = b.acceptance_rate.unwrap();
        assert!((0.2..=0.5).contains(&late), "{}: burn-in acceptance {late}", b.name);
        assert!((0.2..=0.5).contains(&kept), "{}: acceptance {kept}", b.name);
    }
}

#[test]
fn hsmm_sojourns_recovered() {
    let spec = ModelSpec::hsmm(2, 1);
    let params = Params {
        delta: vec![0.5, 0.5],
        tpm: vec![vec![0.0, 1.0], vec![1.0, 0.0]],
        emissions: vec![
            Emission::gaussian(vec![0.0], vec![1.0]),
            Emission::gaussian(vec![2.0], vec![0.5]),
        ],
        sojourns: vec![
            SojournDist::NegBinomial {
                mean: 8.0,
                dispersion: 3.0,
            },
            SojournDist::NegBinomial {
                mean: 20.0,
                dispersion: 1.0,
            },
        ],
    };
    let data: Vec<LabeledSeries> = (0..4)
        .map(|i| simulate_series(&spec, &params, 3000, 90 + i).unwrap())
        .collect();
    let draws = sample_posterior(&data, &Priors::default_for(&spec), &spec, 1000, 8).unwrap();
    for (state, (m_true, k_true)) in [(0, (8.0, 3.0)), (1, (20.0, 1.0))] {
        let (ms, ks): (Vec<f64>, Vec<f64>) = draws
            .draws
            .iter()
            .map(|p| match p.sojourns[state] {
                SojournDist::NegBinomial { mean, dispersion } => (mean.ln(), dispersion.ln()),
                SojournDist::Geometric { .. } => unreachable!(),
            })
            .unzip();
        let (m, sd) = mean_sd(&ms);
        assert!(
            (m - f64::ln(m_true)).abs() < 4.0 * sd,
            "log m state {state}: {m} ± {sd}"
        );
        let (k, sd) = mean_sd(&ks);
        assert!(
            (k - f64::ln(k_true)).abs() < 4.0 * sd,
            "log k state {state}: {k} ± {sd}"
        );
    }
    for d in &draws.draws {
        assert_eq!(d.tpm, vec![vec![0.0, 1.0], vec![1.0, 0.0]]);
    }
}

#[test]
fn single_draw_without_burn_in_is_deterministic() {
    let (spec, params) = two_state_hmm(2.0);
    let data = vec![simulate_series(&spec, &params, 300, 1).unwrap()];
    let settings = SamplerSettings {
        burn_in: 0,
        ..SamplerSettings::default()
    };
    let priors = Priors::default_for(&spec);
    let a = sample_posterior_with(&data, &priors, &spec, settings, 1, 77).unwrap();
    let b = sample_posterior_with(&data, &priors, &spec, settings, 1, 77).unwrap();
    assert_eq!(a.len(), 1);
    assert_eq!(a, b);
    let c = sample_posterior_with(&data, &priors, &spec, settings, 1, 78).unwrap();
    assert_ne!(a.draws, c.draws);
}

#[test]
fn block_order_does_not_change_draws() {
    let (spec, params) = two_state_hmm(2.0);
    let data = vec![simulate_series(&spec, &params, 300, 1).unwrap()];
    let priors = Priors::default_for(&spec);
    let sampler = Sampler::new(&data, &priors, &spec, SamplerSettings::default(), 20, 9).unwrap();
    let forward: Vec<BlockDraws> = (0..sampler.n_blocks()).map(|i| sampler.run_block(i).unwrap()).collect();
    let backward: Vec<BlockDraws> = (0..sampler.n_blocks())
        .rev()
        .map(|i| sampler.run_block(i).unwrap())
        .collect();
    assert_eq!(sampler.assemble(forward).unwrap(), sampler.assemble(backward).unwrap());
}

#[test]
fn empty_state_is_drawn_from_prior_with_warning() {
    let spec = ModelSpec::hmm(3, 1);
    let labels: Vec<usize> = (0..400).map(|t| (t / 50) % 2).collect();
    let xs: Vec<f64> = labels
        .iter()
        .enumerate()
        .map(|(t, &l)| l as f64 * 3.0 + (t as f64 * 1.3).sin())
        .collect();
    let s = LabeledSeries::univariate("s", &xs)
        .unwrap()
        .with_labels(labels)
        .unwrap();
    let priors = Priors::default_for(&spec);
    let draws = sample_posterior(&[s.clone()], &priors, &spec, 4000, 2).unwrap();
    assert!(draws
        .diagnostics
        .warnings
        .iter()
        .any(|w| w.contains("emission state 3")));
    let block = &draws.diagnostics.blocks[2];
    assert!(block.prior_only && block.acceptance_rate.is_none());
    let means: Vec<f64> = draws.draws.iter().map(|p| p.emissions[2].mean[0]).collect();
    let (m, sd) = mean_sd(&means);
    // N(0, 10²) prior
    assert!(m.abs() < 4.0 * 10.0 / (4000f64).sqrt(), "prior mean {m}");
    assert!((sd - 10.0).abs() < 0.5, "prior sd {sd}");
    // Γ row of the empty state is its prior
    let rows: Vec<f64> = draws.draws.iter().map(|p| p.tpm[2][0]).collect();
    let (m, _) = mean_sd(&rows);
    assert!((m - 1.0 / 3.0).abs() < 0.02);

    let map = map_fit(&[s], &priors, &spec).unwrap();
    assert_eq!(map.emissions[2].mean[0], 0.0);
    assert_eq!(map.tpm[2], vec![1.0 / 3.0; 3]);
}

#[test]
fn map_mean_is_sample_mean_under_flat_priors() {
    let spec = ModelSpec::hmm(2, 2);
    let params = Params {
        delta: vec![0.5, 0.5],
        tpm: vec![vec![0.9, 0.1], vec![0.2, 0.8]],
        emissions: vec![
            Emission::gaussian(vec![-1.0, 4.0], vec![1.0, 2.0]),
            Emission::gaussian(vec![2.0, 0.5], vec![0.3, 1.0]),
        ],
        sojourns: vec![],
    };
    let data: Vec<LabeledSeries> = (0..2)
        .map(|i| simulate_series(&spec, &params, 700, 5 + i).unwrap())
        .collect();
    let priors = Priors::near_flat(&spec, 1e8);
    let map = map_fit(&data, &priors, &spec).unwrap();
    for state in 0..2 {
        for d in 0..2 {
            let obs: Vec<f64> = data
                .iter()
                .flat_map(|s| {
                    let labels = s.labels.as_ref().unwrap();
                    (0..s.len())
                        .filter(move |&t| labels[t] == state)
                        .map(move |t| s.row(t)[d])
                })
                .collect();
            let (m, _) = mean_sd(&obs);
            assert!((map.emissions[state].mean[d] - m).abs() < 1e-6, "state {state} dim {d}");
            // MLE of the variance divides by n
            let n = obs.len() as f64;
            let v = obs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n;
            assert!((map.emissions[state].variances[d] - v).abs() < 1e-6 * v);
        }
    }
}

#[test]
fn map_transition_rows_are_dirichlet_modes() {
    let (spec, params) = two_state_hmm(3.0);
    let data = vec![simulate_series(&spec, &params, 500, 2).unwrap()];
    let priors = Priors::default_for(&spec);
    let map = map_fit(&data, &priors, &spec).unwrap();
    let stats = sufficient_stats(&data, &spec).unwrap();
    for (row, counts) in map.tpm.iter().zip(&stats.transitions) {
        let total = (counts[0] + counts[1]) as f64;
        assert!((row[0] - counts[0] as f64 / total).abs() < 1e-14);
    }
}

#[test]
fn map_beats_true_parameters() {
    let spec = ModelSpec::hsmm(2, 2).with_ar_order(1);
    let em = |m: f64, w: f64, v: f64| Emission {
        mean: vec![m, -m],
        ar_coeffs: vec![vec![w, -w / 2.0]],
        variances: vec![v, v * 2.0],
    };
    let params = Params {
        delta: vec![0.4, 0.6],
        tpm: vec![vec![0.0, 1.0], vec![1.0, 0.0]],
        emissions: vec![em(0.5, 0.4, 1.0), em(-1.0, 0.7, 0.5)],
        sojourns: vec![
            SojournDist::NegBinomial {
                mean: 6.0,
                dispersion: 2.0,
            },
            SojournDist::NegBinomial {
                mean: 12.0,
                dispersion: 0.8,
            },
        ],
    };
    let priors = Priors::default_for(&spec);
    for seed in 0..3 {
        let data: Vec<LabeledSeries> = (0..2)
            .map(|i| simulate_series(&spec, &params, 800, seed * 10 + i).unwrap())
            .collect();
        let map = map_fit(&data, &priors, &spec).unwrap();
        let at_map = log_posterior(&data, &map, &priors, &spec).unwrap();
        let at_truth = log_posterior(&data, &params, &priors, &spec).unwrap();
        assert!(at_map >= at_truth - 1e-6, "seed {seed}: {at_map} < {at_truth}");
    }
}

#[test]
fn map_with_geometric_hsmm() {
    let spec = ModelSpec::hsmm(2, 1).with_sojourn_family(SojournFamily::Geometric);
    let params = Params {
        delta: vec![0.5, 0.5],
        tpm: vec![vec![0.0, 1.0], vec![1.0, 0.0]],
        emissions: vec![
            Emission::gaussian(vec![0.0], vec![1.0]),
            Emission::gaussian(vec![1.0], vec![1.0]),
        ],
        sojourns: vec![
            SojournDist::Geometric { stay: 0.9 },
            SojournDist::Geometric { stay: 0.8 },
        ],
    };
    let data = vec![simulate_series(&spec, &params, 4000, 12).unwrap()];
    let priors = Priors::default_for(&spec);
    let map = map_fit(&data, &priors, &spec).unwrap();
    let at_map = log_posterior(&data, &map, &priors, &spec).unwrap();
    let at_truth = log_posterior(&data, &params, &priors, &spec).unwrap();
    assert!(at_map >= at_truth - 1e-6);
    let SojournDist::Geometric { stay } = map.sojourns[0] else {
        panic!()
    };
    assert!((stay - 0.9).abs() < 0.03, "{stay}");
}

#[test]
fn zero_draws_is_an_error() {
    let (spec, params) = two_state_hmm(3.0);
    let data = vec![simulate_series(&spec, &params, 50, 2).unwrap()];
    let r = sample_posterior(&data, &Priors::default_for(&spec), &spec, 0, 1);
    assert!(matches!(r, Err(Error::Domain(_))));
}
