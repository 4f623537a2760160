use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;

use super::*;
use crate::emission::EmissionTable;
use crate::math::log_sum_exp;
use crate::model::Emission;
use crate::sojourn::{sojourn_pmf, SojournDist};

fn all_paths(j: usize, n: usize) -> Vec<Vec<usize>> {
    let total = j.pow(n as u32);
    (0..total)
        .map(|mut code| {
            let mut p = vec![0; n];
            for slot in p.iter_mut() {
                *slot = code % j;
                code /= j;
            }
            p
        })
        .collect()
}

fn emission_values(series: &LabeledSeries, params: &Params, spec: &ModelSpec) -> Vec<f64> {
    let t = EmissionTable::new(spec, params, series).unwrap();
    (0..series.len())
        .flat_map(|i| (0..spec.n_states).map(move |s| (i, s)))
        .map(|(i, s)| t.at(i, s))
        .collect()
}

/// Joint log probability of a labelling, enumerating runs explicitly.
fn joint(path: &[usize], em: &[f64], params: &Params, spec: &ModelSpec, d_max: usize) -> f64 {
    let j = spec.n_states;
    let mut acc: f64 = path.iter().enumerate().map(|(t, &c)| em[t * j + c]).sum();
    match spec.family {
        Family::Hmm => {
            acc += params.delta[path[0]].ln();
            for w in path.windows(2) {
                acc += params.tpm[w[0]][w[1]].ln();
            }
        }
        Family::Hsmm => {
            let mut start = 0;
            let mut prev: Option<usize> = None;
            for t in 1..=path.len() {
                if t == path.len() || path[t] != path[start] {
                    let state = path[start];
                    let len = t - start;
                    if len > d_max {
                        return f64::NEG_INFINITY;
                    }
                    let dist = params.sojourns[state];
                    let norm: f64 = (1..=d_max).map(|u| sojourn_pmf(&dist, u).unwrap()).sum();
                    acc += (sojourn_pmf(&dist, len).unwrap() / norm).ln();
                    acc += match prev {
                        None => params.delta[state].ln(),
                        Some(p) => params.tpm[p][state].ln(),
                    };
                    prev = Some(state);
                    start = t;
                }
            }
        }
    }
    acc
}

struct Enumerated {
    log_evidence: f64,
    marginals: Vec<f64>,
    best: f64,
}

fn enumerate(series: &LabeledSeries, params: &Params, spec: &ModelSpec, d_max: usize) -> Enumerated {
    let j = spec.n_states;
    let n = series.len();
    let em = emission_values(series, params, spec);
    let paths = all_paths(j, n);
    let logs: Vec<f64> = paths.iter().map(|p| joint(p, &em, params, spec, d_max)).collect();
    let log_evidence = log_sum_exp(&logs);
    let mut marginals = vec![0.0; n * j];
    for (p, &l) in paths.iter().zip(&logs) {
        let w = (l - log_evidence).exp();
        for (t, &c) in p.iter().enumerate() {
            marginals[t * j + c] += w;
        }
    }
    let best = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Enumerated {
        log_evidence,
        marginals,
        best,
    }
}

fn series(xs: &[f64]) -> LabeledSeries {
    LabeledSeries::univariate("s", xs).unwrap()
}

fn hmm2() -> (ModelSpec, Params) {
    (
        ModelSpec::hmm(2, 1),
        Params {
            delta: vec![0.6, 0.4],
            tpm: vec![vec![0.8, 0.2], vec![0.3, 0.7]],
            emissions: vec![
                Emission::gaussian(vec![0.0], vec![1.0]),
                Emission::gaussian(vec![1.5], vec![0.8]),
            ],
            sojourns: vec![],
        },
    )
}

fn hsmm2(d: usize) -> (ModelSpec, Params) {
    (
        ModelSpec::hsmm(2, 1).with_max_duration(d),
        Params {
            delta: vec![0.3, 0.7],
            tpm: vec![vec![0.0, 1.0], vec![1.0, 0.0]],
            emissions: vec![
                Emission::gaussian(vec![0.0], vec![1.0]),
                Emission::gaussian(vec![1.0], vec![1.5]),
            ],
            sojourns: vec![
                SojournDist::NegBinomial {
                    mean: 1.5,
                    dispersion: 2.0,
                },
                SojournDist::NegBinomial {
                    mean: 0.7,
                    dispersion: 5.0,
                },
            ],
        },
    )
}

fn assert_close(a: &[f64], b: &[f64], tol: f64) {
    assert_eq!(a.len(), b.len());
    for (x, y) in a.iter().zip(b) {
        assert!((x - y).abs() < tol, "{x} vs {y}");
    }
}

#[test]
fn single_state_marginals_are_one() {
    let spec = ModelSpec::hmm(1, 1);
    let params = Params {
        delta: vec![1.0],
        tpm: vec![vec![1.0]],
        emissions: vec![Emission::gaussian(vec![0.0], vec![1.0])],
        sojourns: vec![],
    };
    let fb = fb_hmm(&series(&[0.1, 2.0, -1.0]), &params, &spec).unwrap();
    assert!(fb.marginals().iter().all(|&p| (p - 1.0).abs() < 1e-15));
    let v = viterbi_hmm(&series(&[0.1, 2.0, -1.0]), &params, &spec).unwrap();
    assert_eq!(v.path, vec![0, 0, 0]);
}

#[test]
fn hmm_marginals_match_enumeration() {
    let (spec, params) = hmm2();
    let s = series(&[0.2, 1.4, 0.9, -0.3]);
    let fb = fb_hmm(&s, &params, &spec).unwrap();
    let e = enumerate(&s, &params, &spec, 0);
    assert!((fb.log_evidence - e.log_evidence).abs() < 1e-12);
    assert_close(&fb.marginals(), &e.marginals, 1e-12);
}

#[test]
fn sticky_hmm_approaches_hard_assignment() {
    let (spec, mut params) = hmm2();
    params.tpm = vec![vec![1.0 - 1e-9, 1e-9], vec![1e-9, 1.0 - 1e-9]];
    let s = series(&[1.2, 1.6, 1.1, 1.9]);
    let fb = fb_hmm(&s, &params, &spec).unwrap();
    let e = enumerate(&s, &params, &spec, 0);
    assert_close(&fb.marginals(), &e.marginals, 1e-10);
    // whole series in state 2 dominates
    for t in 0..4 {
        assert!(fb.marginals()[t * 2 + 1] > 0.98);
    }
}

#[test]
fn hsmm_marginals_match_enumeration() {
    let (spec, params) = hsmm2(5);
    let s = series(&[0.3, -0.2, 1.1, 1.8, 0.4]);
    let fb = fb_hsmm(&s, &params, &spec, &DecodeOptions::default()).unwrap();
    let e = enumerate(&s, &params, &spec, 5);
    assert!((fb.log_evidence - e.log_evidence).abs() < 1e-12);
    assert_close(&fb.marginals(), &e.marginals, 1e-12);
    for total in fb.occupancy_totals() {
        assert!((total - 1.0).abs() < 1e-12);
    }
}

#[test]
fn hsmm_three_states_ar1_match_enumeration() {
    let spec = ModelSpec::hsmm(3, 2).with_ar_order(1).with_max_duration(3);
    let em = |m: f64, w: f64, v: f64| Emission {
        mean: vec![m, -m],
        ar_coeffs: vec![vec![w, -w]],
        variances: vec![v, 2.0 * v],
    };
    let params = Params {
        delta: vec![0.2, 0.5, 0.3],
        tpm: vec![vec![0.0, 0.4, 0.6], vec![0.9, 0.0, 0.1], vec![0.5, 0.5, 0.0]],
        emissions: vec![em(0.0, 0.3, 1.0), em(1.0, -0.2, 0.5), em(-1.0, 0.6, 2.0)],
        sojourns: vec![
            SojournDist::NegBinomial {
                mean: 1.0,
                dispersion: 1.5,
            },
            SojournDist::NegBinomial {
                mean: 2.5,
                dispersion: 4.0,
            },
            SojournDist::NegBinomial {
                mean: 0.4,
                dispersion: 0.8,
            },
        ],
    };
    let rows: Vec<Vec<f64>> = (0..6).map(|t| vec![(t as f64).sin(), (t as f64 * 0.3).cos()]).collect();
    let s = LabeledSeries::from_rows("s", &rows).unwrap();
    let opts = DecodeOptions::default();
    let fb = fb_hsmm(&s, &params, &spec, &opts).unwrap();
    let e = enumerate(&s, &params, &spec, 3);
    assert!((fb.log_evidence - e.log_evidence).abs() < 1e-10);
    assert_close(&fb.marginals(), &e.marginals, 1e-10);
    let v = viterbi_hsmm(&s, &params, &spec, &opts).unwrap();
    assert!((v.log_prob - e.best).abs() < 1e-10);
}

fn geometric_hsmm() -> (ModelSpec, Params) {
    (
        ModelSpec::hsmm(3, 1)
            .with_sojourn_family(crate::model::SojournFamily::Geometric)
            .with_max_duration(600),
        Params {
            delta: vec![0.5, 0.2, 0.3],
            tpm: vec![vec![0.0, 0.3, 0.7], vec![0.6, 0.0, 0.4], vec![0.5, 0.5, 0.0]],
            emissions: vec![
                Emission::gaussian(vec![0.0], vec![1.0]),
                Emission::gaussian(vec![1.0], vec![0.5]),
                Emission::gaussian(vec![-1.0], vec![2.0]),
            ],
            sojourns: vec![
                SojournDist::Geometric { stay: 0.8 },
                SojournDist::Geometric { stay: 0.5 },
                SojournDist::Geometric { stay: 0.9 },
            ],
        },
    )
}

#[test]
fn geometric_hsmm_equals_embedded_hmm() {
    let (spec, params) = geometric_hsmm();
    let xs: Vec<f64> = (0..40).map(|t| ((t as f64) * 0.37).sin() * 1.5).collect();
    let s = series(&xs);
    let opts = DecodeOptions::default();
    let hs = fb_hsmm(&s, &params, &spec, &opts).unwrap();
    let emb = embed_geometric_hsmm(&spec, &params).unwrap();
    let hm = fb_hmm_with_terminal(&s, &emb.params, &emb.spec, Some(&emb.terminal)).unwrap();
    assert!((hs.log_evidence - hm.log_evidence).abs() < 1e-8);
    assert_close(&hs.marginals(), &hm.marginals(), 1e-8);
    let vs = viterbi_hsmm(&s, &params, &spec, &opts).unwrap();
    let vm = viterbi_hmm_with_terminal(&s, &emb.params, &emb.spec, Some(&emb.terminal)).unwrap();
    assert_eq!(vs.path, vm.path);
    assert!((vs.log_prob - vm.log_prob).abs() < 1e-8);
}

#[test]
fn identical_emissions_cancel() {
    let (spec, mut params) = hsmm2(6);
    params.emissions[1] = params.emissions[0].clone();
    let s = series(&[0.3, -2.2, 1.1, 3.8, 0.4, 0.0]);
    let opts = DecodeOptions::default();
    let with_data = fb_hsmm(&s, &params, &spec, &opts).unwrap();
    let mut inputs = HsmmInputs::new(&s, &params, &spec, &opts).unwrap();
    inputs.emissions = EmissionTable::from_values(2, vec![0.0; 12]);
    let data_free = hsmm::forward_backward(&inputs).unwrap();
    assert_close(&with_data.marginals(), &data_free.marginals(), 1e-12);
}

#[test]
fn marginals_invariant_under_per_time_rescaling() {
    let (spec, params) = hsmm2(4);
    let s = series(&[0.3, -0.2, 1.1, 1.8, 0.4, 0.9, 1.3]);
    let opts = DecodeOptions::default();
    let mut inputs = HsmmInputs::new(&s, &params, &spec, &opts).unwrap();
    let base = hsmm::forward_backward(&inputs).unwrap();
    let table = EmissionTable::new(&spec, &params, &s).unwrap();
    let shifted: Vec<f64> = (0..7)
        .flat_map(|t| (0..2).map(move |j| (t, j)))
        .map(|(t, j)| table.at(t, j) + 50.0 * (t as f64) - 120.0)
        .collect();
    inputs.emissions = EmissionTable::from_values(2, shifted);
    let moved = hsmm::forward_backward(&inputs).unwrap();
    assert_close(&base.marginals(), &moved.marginals(), 1e-10);

    // and for the HMM recursion
    let (hspec, hparams) = hmm2();
    let table = EmissionTable::new(&hspec, &hparams, &s).unwrap();
    let ld: Vec<f64> = hparams.delta.iter().map(|v| v.ln()).collect();
    let lt: Vec<f64> = hparams.tpm.iter().flatten().map(|v| v.ln()).collect();
    let a = hmm::forward_backward(&ld, &lt, &table, &[0.0, 0.0]).unwrap();
    let shifted: Vec<f64> = (0..7)
        .flat_map(|t| (0..2).map(move |j| (t, j)))
        .map(|(t, j)| table.at(t, j) + 300.0 * t as f64)
        .collect();
    let b = hmm::forward_backward(&ld, &lt, &EmissionTable::from_values(2, shifted), &[0.0, 0.0]).unwrap();
    assert_close(&a.marginals(), &b.marginals(), 1e-10);
}

#[test]
fn hmm_viterbi_matches_enumeration() {
    let (spec, params) = hmm2();
    let s = series(&[0.2, 1.4, 0.9, -0.3, 2.0, 0.7]);
    let v = viterbi_hmm(&s, &params, &spec).unwrap();
    let e = enumerate(&s, &params, &spec, 0);
    assert!((v.log_prob - e.best).abs() < 1e-12);
    let em = emission_values(&s, &params, &spec);
    assert!((joint(&v.path, &em, &params, &spec, 0) - e.best).abs() < 1e-12);
}

#[test]
fn sharp_emissions_give_nearest_mean_path() {
    let (spec, mut params) = hmm2();
    params.emissions[0].variances[0] = 1e-4;
    params.emissions[1].variances[0] = 1e-4;
    let xs = [0.1, 1.4, 1.6, -0.1, 0.05, 1.5];
    let v = viterbi_hmm(&series(&xs), &params, &spec).unwrap();
    let nearest: Vec<usize> = xs.iter().map(|&x| usize::from((x - 1.5f64).abs() < x.abs())).collect();
    assert_eq!(v.path, nearest);
}

#[test]
fn hsmm_viterbi_matches_enumeration() {
    let (spec, params) = hsmm2(6);
    let s = series(&[0.3, -0.2, 1.1, 1.8, 0.4, 2.0]);
    let v = viterbi_hsmm(&s, &params, &spec, &DecodeOptions::default()).unwrap();
    let e = enumerate(&s, &params, &spec, 6);
    assert!((v.log_prob - e.best).abs() < 1e-12);
    let em = emission_values(&s, &params, &spec);
    assert!((joint(&v.path, &em, &params, &spec, 6) - e.best).abs() < 1e-12);
}

#[test]
fn concentrated_sojourn_forces_runs_of_two() {
    let (spec, mut params) = hsmm2(2);
    params.sojourns = vec![
        SojournDist::NegBinomial {
            mean: 1e6,
            dispersion: 1e9,
        };
        2
    ];
    let xs = [0.0, 1.0, 0.2, 0.9, 1.1, -0.3, 0.5, 0.5];
    let v = viterbi_hsmm(&series(&xs), &params, &spec, &DecodeOptions::default()).unwrap();
    for run in crate::model::label_runs(&v.path) {
        assert_eq!(run.2, 2, "path {:?}", v.path);
    }
}

#[test]
fn zero_ar_coefficients_reduce_to_independent_emissions() {
    let (spec0, params0) = hsmm2(4);
    let spec1 = spec0.clone().with_ar_order(1);
    let mut params1 = params0.clone();
    for e in &mut params1.emissions {
        e.ar_coeffs = vec![vec![0.0]];
    }
    let s = series(&[0.3, -0.2, 1.1, 1.8, 0.4, 0.9]);
    let opts = DecodeOptions::default();
    let ar = HsmmInputs::new(&s, &params1, &spec1, &opts).unwrap();
    let mut iid = HsmmInputs::new(&s, &params0, &spec0, &opts).unwrap();
    // the AR model conditions on the first observation
    let mut values: Vec<f64> = (0..6)
        .flat_map(|t| (0..2).map(move |j| (t, j)))
        .map(|(t, j)| iid.emissions.at(t, j))
        .collect();
    values[0] = 0.0;
    values[1] = 0.0;
    iid.emissions = EmissionTable::from_values(2, values);
    let a = hsmm::forward_backward(&ar).unwrap();
    let b = hsmm::forward_backward(&iid).unwrap();
    assert_eq!(a.marginals(), b.marginals());
    assert_eq!(hsmm::viterbi(&ar).unwrap(), hsmm::viterbi(&iid).unwrap());
}

#[test]
fn pooled_decode_of_identical_draws_equals_single() {
    let (spec, params) = hsmm2(5);
    let s = series(&[0.3, -0.2, 1.1, 1.8, 0.4]);
    let opts = DecodeOptions::default();
    let single = decode_params(&s, &params, &spec, DecodeMode::Both, &opts).unwrap();
    let direct = fb_hsmm(&s, &params, &spec, &opts).unwrap();
    assert_eq!(single.local.as_ref().unwrap().probs, direct.marginals());
    let pooled = decode(&s, &[params.clone(), params], &spec, DecodeMode::Both, &opts).unwrap();
    assert_close(
        pooled.mean_local_probs.as_ref().unwrap(),
        &single.local.as_ref().unwrap().probs,
        1e-15,
    );
    assert!(decode(&s, &[], &spec, DecodeMode::Local, &opts).is_err());
}

#[test]
fn infeasible_and_expensive_inputs_are_errors() {
    let (spec, params) = hsmm2(2);
    let one = ModelSpec::hsmm(1, 1).with_max_duration(2);
    let p1 = Params {
        delta: vec![1.0],
        tpm: vec![vec![1.0]],
        emissions: vec![params.emissions[0].clone()],
        sojourns: vec![params.sojourns[0]],
    };
    let s = series(&[0.0, 0.1, 0.2]);
    assert_eq!(
        fb_hsmm(&s, &p1, &one, &DecodeOptions::default()),
        Err(Error::Infeasible)
    );
    let tight = DecodeOptions {
        work_budget: 3,
        ..DecodeOptions::default()
    };
    assert!(matches!(
        fb_hsmm(&s, &params, &spec, &tight),
        Err(Error::TooExpensive { .. })
    ));
}
