//! Plain-text diagnostics report for a set of posterior draws.

use std::fmt::Write;

use semimarkov_core::fit::PosteriorDraws;
use semimarkov_core::math::quantile_sorted;
use semimarkov_core::{Family, Params, SojournDist};

/// Posterior mean and 2.5%, 50%, 97.5% quantiles of one scalar.
fn summary_line(out: &mut String, name: &str, mut values: Vec<f64>) {
    values.sort_by(f64::total_cmp);
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let q = |p| quantile_sorted(&values, p);
    let _ = writeln!(
        out,
        "  {name:<28} {mean:>12.5} {:>12.5} {:>12.5} {:>12.5}",
        q(0.025),
        q(0.5),
        q(0.975)
    );
}

fn collect(draws: &[Params], f: impl Fn(&Params) -> f64) -> Vec<f64> {
    draws.iter().map(f).collect()
}

/// Human-readable summary: model, sampler settings, per-block acceptance,
/// parameter summaries and warnings.
pub fn fit_report(posterior: &PosteriorDraws, n_series: usize, n_obs: usize, seed: u64, method: &str) -> String {
    let spec = &posterior.spec;
    let diag = &posterior.diagnostics;
    let s = &diag.settings;
    let mut out = String::new();
    let family = match spec.family {
        Family::Hmm => "HMM",
        Family::Hsmm => "HSMM",
    };
    let _ = writeln!(out, "semimarkov fit diagnostics");
    let _ = writeln!(out, "method: {method}");
    let _ = writeln!(
        out,
        "model: {family}, {} states, {} dims, AR order {}, {:?} sojourns",
        spec.n_states, spec.obs_dim, spec.ar_order, spec.sojourn_family
    );
    let _ = writeln!(out, "data: {n_series} series, {n_obs} observations");
    let _ = writeln!(
        out,
        "draws: {} (burn-in {}, thin {}, target acceptance {})",
        posterior.len(),
        s.burn_in,
        s.thin,
        s.target_acceptance
    );
    let _ = writeln!(out, "seed: {seed}");

    if !diag.blocks.is_empty() {
        let _ = writeln!(out, "\nsampler blocks");
        let _ = writeln!(
            out,
            "  {:<28} {:>12} {:>12} {:>12}",
            "block", "acceptance", "burn-in acc", "scale"
        );
        for b in &diag.blocks {
            let rate = |r: Option<f64>| r.map_or_else(|| "prior".to_string(), |v| format!("{v:.3}"));
            let _ = writeln!(
                out,
                "  {:<28} {:>12} {:>12} {:>12.4}",
                b.name,
                rate(b.acceptance_rate),
                rate(b.burn_in_acceptance),
                b.proposal_scale
            );
        }
    }

    let draws = &posterior.draws;
    let j = spec.n_states;
    let _ = writeln!(out, "\nparameters");
    let _ = writeln!(
        out,
        "  {:<28} {:>12} {:>12} {:>12} {:>12}",
        "name", "mean", "2.5%", "50%", "97.5%"
    );
    for a in 0..j {
        summary_line(&mut out, &format!("delta[{}]", a + 1), collect(draws, |p| p.delta[a]));
    }
    for a in 0..j {
        for b in 0..j {
            if spec.family == Family::Hsmm && a == b && j > 1 {
                continue;
            }
            summary_line(
                &mut out,
                &format!("tpm[{},{}]", a + 1, b + 1),
                collect(draws, |p| p.tpm[a][b]),
            );
        }
    }
    for a in 0..j {
        for d in 0..spec.obs_dim {
            let tag = format!("{},{}", a + 1, d + 1);
            summary_line(
                &mut out,
                &format!("mean[{tag}]"),
                collect(draws, |p| p.emissions[a].mean[d]),
            );
            for k in 0..spec.ar_order {
                summary_line(
                    &mut out,
                    &format!("ar[{tag},lag {}]", k + 1),
                    collect(draws, |p| p.emissions[a].ar_coeffs[k][d]),
                );
            }
            summary_line(
                &mut out,
                &format!("sd[{tag}]"),
                collect(draws, |p| p.emissions[a].variances[d].sqrt()),
            );
        }
    }
    if spec.family == Family::Hsmm {
        for a in 0..j {
            match draws[0].sojourns[a] {
                SojournDist::Geometric { .. } => summary_line(
                    &mut out,
                    &format!("sojourn stay[{}]", a + 1),
                    collect(draws, |p| match p.sojourns[a] {
                        SojournDist::Geometric { stay } => stay,
                        SojournDist::NegBinomial { .. } => f64::NAN,
                    }),
                ),
                SojournDist::NegBinomial { .. } => {
                    let get = |i: usize| {
                        move |p: &Params| match p.sojourns[a] {
                            SojournDist::NegBinomial { mean, dispersion } => [mean, dispersion][i],
                            SojournDist::Geometric { .. } => f64::NAN,
                        }
                    };
                    summary_line(&mut out, &format!("sojourn m[{}]", a + 1), collect(draws, get(0)));
                    summary_line(&mut out, &format!("sojourn k[{}]", a + 1), collect(draws, get(1)));
                }
            }
        }
    }

    if !diag.warnings.is_empty() {
        let _ = writeln!(out, "\nwarnings");
        for w in &diag.warnings {
            let _ = writeln!(out, "  - {w}");
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use semimarkov_core::fit::sample_posterior_with;
    use semimarkov_core::fit::SamplerSettings;
    use semimarkov_core::simulate::simulate_series;
    use semimarkov_core::{Emission, ModelSpec, Priors};

    #[test]
    fn report_lists_blocks_and_parameters() {
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
                    mean: 5.0,
                    dispersion: 3.0,
                },
                SojournDist::NegBinomial {
                    mean: 8.0,
                    dispersion: 3.0,
                },
            ],
        };
        let s = simulate_series(&spec, &params, 300, 1).unwrap();
        let settings = SamplerSettings {
            burn_in: 100,
            ..SamplerSettings::default()
        };
        let post = sample_posterior_with(&[s], &Priors::default_for(&spec), &spec, settings, 50, 2).unwrap();
        let text = fit_report(&post, 1, 300, 2, "posterior sampling");
        for needle in [
            "emission state 2 dim 1",
            "sojourn state 1",
            "mean[2,1]",
            "sojourn k[2]",
            "tpm[1,2]",
        ] {
            assert!(text.contains(needle), "missing {needle}:\n{text}");
        }
        assert!(!text.contains("tpm[1,1]"));
    }
}
