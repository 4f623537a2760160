//! Log conditional posteriors of the emission and sojourn blocks on their
//! unconstrained scales, with analytic gradients.
//!
//! Emission block `(state, dim)`: `x = (μ, ω_1, ..., ω_p, log σ)`.
//! Sojourn block `state`: `x = (log m, log k)` for negative binomial
//! sojourns and `x = (log m)` for geometric ones, where `stay = m / (1 + m)`.
//!
//! With `jacobian` set the density is that of `x` (used for sampling);
//! without it the density is the one of the original parameters, so its
//! maximizer is the posterior mode reported by the MAP fit.

use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;

use crate::fit::stats::RegressionStats;
use crate::math::{digamma, ln_gamma, normal_logpdf, truncated_normal_pos_logpdf, LN_2PI};
use crate::model::{EmissionPrior, SojournFamily, SojournPrior};

#[derive(Debug, Clone)]
pub(crate) struct EmissionBlock {
    pub stats: RegressionStats,
    pub mean_loc: f64,
    pub mean_scale: f64,
    pub ar_loc: f64,
    pub ar_scale: f64,
    pub sd_loc: f64,
    pub sd_scale: f64,
}

impl EmissionBlock {
    pub fn new(stats: RegressionStats, prior: &EmissionPrior, d: usize) -> Self {
        Self {
            stats,
            mean_loc: prior.mean_loc[d],
            mean_scale: prior.mean_scale[d],
            ar_loc: prior.ar_loc[d],
            ar_scale: prior.ar_scale[d],
            sd_loc: prior.sd_loc[d],
            sd_scale: prior.sd_scale[d],
        }
    }

    pub fn ar_order(&self) -> usize {
        self.stats.xty.len() - 1
    }

    fn rss(&self, beta: &[f64]) -> f64 {
        let q = beta.len();
        let g = &self.stats.gram;
        let mut quad = 0.0;
        let mut lin = 0.0;
        for a in 0..q {
            lin += beta[a] * self.stats.xty[a];
            for b in 0..q {
                quad += beta[a] * g[a * q + b] * beta[b];
            }
        }
        (self.stats.yy - 2.0 * lin + quad).max(0.0)
    }

    pub fn log_density(&self, x: &[f64], jacobian: bool, grad: Option<&mut [f64]>) -> f64 {
        let q = self.ar_order() + 1;
        let beta = &x[..q];
        let s = x[q];
        let sigma = s.exp();
        let var = sigma * sigma;
        let n = self.stats.n as f64;
        let rss = self.rss(beta);
        let mut value = -0.5 * n * LN_2PI - n * s - rss / (2.0 * var);
        value += normal_logpdf(beta[0], self.mean_loc, self.mean_scale);
        for &w in &beta[1..] {
            value += normal_logpdf(w, self.ar_loc, self.ar_scale);
        }
        value += truncated_normal_pos_logpdf(sigma, self.sd_loc, self.sd_scale);
        if jacobian {
            value += s;
        }
        if let Some(g) = grad {
            let gram = &self.stats.gram;
            for a in 0..q {
                let mut gb = 0.0;
                for b in 0..q {
                    gb += gram[a * q + b] * beta[b];
                }
                g[a] = (self.stats.xty[a] - gb) / var;
            }
            g[0] -= (beta[0] - self.mean_loc) / (self.mean_scale * self.mean_scale);
            for a in 1..q {
                g[a] -= (beta[a] - self.ar_loc) / (self.ar_scale * self.ar_scale);
            }
            g[q] = -n + rss / var - (sigma - self.sd_loc) * sigma / (self.sd_scale * self.sd_scale);
            if jacobian {
                g[q] += 1.0;
            }
        }
        value
    }

    /// Least-squares start (lightly ridged), or the prior centre when there
    /// is too little data.
    pub fn initial_point(&self) -> Vec<f64> {
        let q = self.ar_order() + 1;
        let n = self.stats.n;
        if n <= q {
            return self.prior_centre();
        }
        let mut g = self.stats.gram.clone();
        for a in 0..q {
            g[a * q + a] += 1e-8 * (1.0 + g[a * q + a]);
        }
        let Some(mut beta) = crate::math::cholesky_solve(&g, &self.stats.xty, q) else {
            return self.prior_centre();
        };
        let rss = self.rss(&beta);
        let sd = (rss / n as f64)
            .sqrt()
            .max(1e-6 * (1.0 + self.stats.yy / n as f64).sqrt());
        beta.push(sd.ln());
        beta
    }

    /// Prior means of μ and ω, and the prior mean of σ.
    pub fn prior_centre(&self) -> Vec<f64> {
        let q = self.ar_order() + 1;
        let mut x = vec![self.ar_loc; q + 1];
        x[0] = self.mean_loc;
        x[q] = truncated_normal_mean(self.sd_loc, self.sd_scale).ln();
        x
    }
}

/// Mean of `N(loc, scale²)` truncated to `(0, ∞)`.
pub(crate) fn truncated_normal_mean(loc: f64, scale: f64) -> f64 {
    let a = -loc / scale;
    let phi = (-0.5 * a * a).exp() / (2.0 * core::f64::consts::PI).sqrt();
    let tail = 1.0 - crate::math::normal_cdf(a);
    loc + scale * phi / tail
}

#[derive(Debug, Clone)]
pub(crate) struct SojournBlock {
    pub family: SojournFamily,
    /// `(u - 1, count)` for every distinct run length `u`.
    pub histogram: Vec<(f64, f64)>,
    pub n_runs: usize,
    pub prior: SojournPrior,
}

impl SojournBlock {
    pub fn new(family: SojournFamily, runs: &[usize], prior: SojournPrior) -> Self {
        let mut sorted = runs.to_vec();
        sorted.sort_unstable();
        let mut histogram: Vec<(f64, f64)> = Vec::new();
        for u in sorted {
            let y = (u - 1) as f64;
            match histogram.last_mut() {
                Some(last) if last.0 == y => last.1 += 1.0,
                _ => histogram.push((y, 1.0)),
            }
        }
        Self {
            family,
            histogram,
            n_runs: runs.len(),
            prior,
        }
    }

    pub fn log_density(&self, x: &[f64], jacobian: bool, grad: Option<&mut [f64]>) -> f64 {
        let pr = &self.prior;
        let a = x[0];
        let m = a.exp();
        let mut value = normal_logpdf(a, pr.mean_log_loc, pr.mean_log_scale);
        let mut ga = -(a - pr.mean_log_loc) / (pr.mean_log_scale * pr.mean_log_scale);
        if !jacobian {
            value -= a;
            ga -= 1.0;
        }
        match self.family {
            SojournFamily::Geometric => {
                // log pmf = y log m - (y + 1) log(1 + m)
                let l1m = m.ln_1p();
                let share = m / (1.0 + m);
                for &(y, c) in &self.histogram {
                    value += c * (y * a - (y + 1.0) * l1m);
                    ga += c * (y - (y + 1.0) * share);
                }
                if let Some(g) = grad {
                    g[0] = ga;
                }
            }
            SojournFamily::NegBinomial => {
                let b = x[1];
                let k = b.exp();
                value += normal_logpdf(b, pr.dispersion_log_loc, pr.dispersion_log_scale);
                let mut gb = -(b - pr.dispersion_log_loc) / (pr.dispersion_log_scale * pr.dispersion_log_scale);
                if !jacobian {
                    value -= b;
                    gb -= 1.0;
                }
                let log_p = -(1.0 + m / k).ln();
                let log_q = -(1.0 + k / m).ln();
                let lg_k = ln_gamma(k);
                let dg_k = digamma(k);
                let km = k + m;
                for &(y, c) in &self.histogram {
                    value += c * (ln_gamma(y + k) - lg_k - ln_gamma(y + 1.0) + k * log_p + y * log_q);
                    ga += c * m * (y / m - (k + y) / km);
                    gb += c * k * (digamma(y + k) - dg_k + log_p + (m - y) / km);
                }
                if let Some(g) = grad {
                    g[0] = ga;
                    g[1] = gb;
                }
            }
        }
        value
    }

    /// Moment estimates, or the prior medians with no runs.
    pub fn initial_point(&self) -> Vec<f64> {
        if self.n_runs == 0 {
            return self.prior_centre();
        }
        let n = self.n_runs as f64;
        let mean: f64 = self.histogram.iter().map(|&(y, c)| y * c).sum::<f64>() / n;
        let var: f64 = self
            .histogram
            .iter()
            .map(|&(y, c)| c * (y - mean) * (y - mean))
            .sum::<f64>()
            / n;
        let m = mean.max(0.05);
        match self.family {
            SojournFamily::Geometric => vec![m.ln()],
            SojournFamily::NegBinomial => {
                let k = if var > m * 1.01 { m * m / (var - m) } else { 50.0 };
                vec![m.ln(), k.clamp(0.05, 1e3).ln()]
            }
        }
    }

    pub fn prior_centre(&self) -> Vec<f64> {
        match self.family {
            SojournFamily::Geometric => vec![self.prior.mean_log_loc],
            SojournFamily::NegBinomial => vec![self.prior.mean_log_loc, self.prior.dispersion_log_loc],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sojourn::SojournDist;

    fn check_gradient(f: impl Fn(&[f64], Option<&mut [f64]>) -> f64, x: &[f64]) {
        let mut g = vec![0.0; x.len()];
        f(x, Some(&mut g));
        for i in 0..x.len() {
            let h = 1e-6 * (1.0 + x[i].abs());
            let mut up = x.to_vec();
            let mut dn = x.to_vec();
            up[i] += h;
            dn[i] -= h;
            let fd = (f(&up, None) - f(&dn, None)) / (2.0 * h);
            assert!(
                (fd - g[i]).abs() <= 1e-4 * (1.0 + fd.abs()),
                "coordinate {i}: analytic {} vs numeric {fd}",
                g[i]
            );
        }
    }

    fn regression(p: usize) -> RegressionStats {
        let mut st = RegressionStats {
            n: 0,
            gram: vec![0.0; (p + 1) * (p + 1)],
            xty: vec![0.0; p + 1],
            yy: 0.0,
        };
        let xs: Vec<f64> = (0..40)
            .map(|t| (t as f64 * 0.7).sin() * 2.0 + 0.3 * t as f64 / 40.0)
            .collect();
        let q = p + 1;
        for t in p..xs.len() {
            let mut design = vec![1.0; q];
            for k in 1..=p {
                design[k] = xs[t - k];
            }
            st.n += 1;
            st.yy += xs[t] * xs[t];
            for a in 0..q {
                st.xty[a] += design[a] * xs[t];
                for b in 0..q {
                    st.gram[a * q + b] += design[a] * design[b];
                }
            }
        }
        st
    }

    #[test]
    fn emission_gradient_matches_finite_differences() {
        let prior = EmissionPrior::weak(1);
        for p in [0, 2] {
            let block = EmissionBlock::new(regression(p), &prior, 0);
            let mut x = vec![0.2; p + 2];
            x[p + 1] = 0.4;
            for jac in [false, true] {
                check_gradient(|x, g| block.log_density(x, jac, g), &x);
            }
        }
    }

    #[test]
    fn emission_density_matches_direct_sum() {
        // p = 0: sum of normal log densities plus priors
        let xs = [0.5, -1.0, 2.0, 0.25];
        let st = RegressionStats {
            n: 4,
            gram: vec![4.0],
            xty: vec![xs.iter().sum()],
            yy: xs.iter().map(|x| x * x).sum(),
        };
        let prior = EmissionPrior::weak(1);
        let block = EmissionBlock::new(st, &prior, 0);
        let (mu, sd) = (0.3, 1.7);
        let direct: f64 = xs.iter().map(|&x| normal_logpdf(x, mu, sd)).sum::<f64>()
            + normal_logpdf(mu, 0.0, 10.0)
            + truncated_normal_pos_logpdf(sd, 0.0, 10.0);
        let v = block.log_density(&[mu, sd.ln()], false, None);
        assert!((v - direct).abs() < 1e-12);
    }

    #[test]
    fn sojourn_density_matches_pmf_sum() {
        let runs = [1, 3, 3, 7, 12];
        let prior = SojournPrior::default();
        let (m, k) = (4.0_f64, 2.5_f64);
        let nb = SojournBlock::new(SojournFamily::NegBinomial, &runs, prior);
        let dist = SojournDist::NegBinomial { mean: m, dispersion: k };
        let direct: f64 = runs.iter().map(|&u| dist.log_pmf(u)).sum::<f64>()
            + crate::math::lognormal_logpdf(m, prior.mean_log_loc, prior.mean_log_scale)
            + crate::math::lognormal_logpdf(k, prior.dispersion_log_loc, prior.dispersion_log_scale);
        let v = nb.log_density(&[m.ln(), k.ln()], false, None);
        assert!((v - direct).abs() < 1e-10, "{v} vs {direct}");

        let geo = SojournBlock::new(SojournFamily::Geometric, &runs, prior);
        let dist = SojournDist::Geometric { stay: m / (1.0 + m) };
        let direct: f64 = runs.iter().map(|&u| dist.log_pmf(u)).sum::<f64>()
            + crate::math::lognormal_logpdf(m, prior.mean_log_loc, prior.mean_log_scale);
        let v = geo.log_density(&[m.ln()], false, None);
        assert!((v - direct).abs() < 1e-10, "{v} vs {direct}");
    }

    #[test]
    fn sojourn_gradient_matches_finite_differences() {
        let runs = [1, 2, 2, 5, 9, 14, 30];
        for family in [SojournFamily::Geometric, SojournFamily::NegBinomial] {
            let block = SojournBlock::new(family, &runs, SojournPrior::default());
            let x = match family {
                SojournFamily::Geometric => vec![1.3],
                SojournFamily::NegBinomial => vec![1.3, -0.4],
            };
            for jac in [false, true] {
                check_gradient(|x, g| block.log_density(x, jac, g), &x);
            }
        }
    }

    #[test]
    fn truncated_mean_of_half_normal() {
        let m = truncated_normal_mean(0.0, 10.0);
        assert!((m - 10.0 * (2.0 / core::f64::consts::PI).sqrt()).abs() < 1e-12);
    }
}
