//! Sojourn-time (state duration) distributions on `{1, 2, ...}`.

use alloc::format;
use alloc::vec::Vec;
#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;
use rand_distr::{Distribution, Gamma, Poisson};
use serde::{Deserialize, Serialize};

use crate::math::{ln_gamma, log_sum_exp};
use crate::{Error, Result};

/// Distribution of the number of consecutive steps spent in a state.
///
/// `NegBinomial { mean, dispersion }` is the negative binomial with mean `m`
/// and dispersion `k` shifted by one: `pmf(u) = NB(u - 1; m, k)`. Its mean
/// sojourn is therefore `m + 1`, and with `k = 1` it is the geometric
/// distribution with success probability `1 / (m + 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum SojournDist {
    /// `pmf(u) = stay^(u-1) (1 - stay)`.
    Geometric {
        stay: f64,
    },
    NegBinomial {
        mean: f64,
        dispersion: f64,
    },
}

impl SojournDist {
    pub fn validate(&self) -> Result<()> {
        match *self {
            SojournDist::Geometric { stay } => {
                if !(0.0..1.0).contains(&stay) {
                    return Err(Error::InvalidParams(format!(
                        "geometric stay probability {stay} outside [0, 1)"
                    )));
                }
            }
            SojournDist::NegBinomial { mean, dispersion } => {
                if !(mean > 0.0 && mean.is_finite() && dispersion > 0.0 && dispersion.is_finite()) {
                    return Err(Error::InvalidParams(format!(
                        "negative binomial needs m > 0 and k > 0, got m={mean}, k={dispersion}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Log pmf at sojourn length `u >= 1`. No validation; see [`sojourn_pmf`].
    pub fn log_pmf(&self, u: usize) -> f64 {
        debug_assert!(u >= 1);
        let y = (u - 1) as f64;
        match *self {
            SojournDist::Geometric { stay } => {
                let exit = (1.0 - stay).ln();
                if u == 1 {
                    exit
                } else {
                    y * stay.ln() + exit
                }
            }
            SojournDist::NegBinomial { mean, dispersion: k } => {
                // p = k / (k + m) success probability, y failures
                let log_p = (k / (k + mean)).ln();
                let log_q = (mean / (k + mean)).ln();
                let comb = ln_gamma(y + k) - ln_gamma(k) - ln_gamma(y + 1.0);
                if u == 1 {
                    k * log_p
                } else {
                    comb + k * log_p + y * log_q
                }
            }
        }
    }

    /// Expected sojourn length.
    pub fn mean_sojourn(&self) -> f64 {
        match *self {
            SojournDist::Geometric { stay } => 1.0 / (1.0 - stay),
            SojournDist::NegBinomial { mean, .. } => mean + 1.0,
        }
    }

    /// Smallest `D` with `sum_{u <= D} pmf(u) >= coverage`, capped at `cap`.
    pub fn coverage_length(&self, coverage: f64, cap: usize) -> usize {
        let mut cdf = 0.0;
        for u in 1..=cap {
            cdf += self.log_pmf(u).exp();
            if cdf >= coverage {
                return u;
            }
        }
        cap
    }

    /// Draw one sojourn length.
    pub fn sample<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> usize {
        match *self {
            SojournDist::Geometric { stay } => {
                let mut u = 1;
                while rng.gen::<f64>() < stay {
                    u += 1;
                }
                u
            }
            SojournDist::NegBinomial { mean, dispersion } => {
                // gamma-Poisson mixture
                let gamma = Gamma::new(dispersion, mean / dispersion).expect("validated params");
                let lambda: f64 = gamma.sample(rng);
                let extra = if lambda > 0.0 {
                    let draw: f64 = Poisson::new(lambda).expect("positive rate").sample(rng);
                    draw as usize
                } else {
                    0
                };
                extra + 1
            }
        }
    }
}

/// Probability of a sojourn of exactly `u` steps.
pub fn sojourn_pmf(dist: &SojournDist, u: usize) -> Result<f64> {
    if u < 1 {
        return Err(Error::Domain(format!("sojourn length must be >= 1, got {u}")));
    }
    dist.validate()?;
    Ok(dist.log_pmf(u).exp())
}

/// Log pmf of a sojourn distribution truncated to `{1, ..., D}` and
/// renormalized. Index `d - 1` holds the value for duration `d`.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedSojourn {
    log_pmf: Vec<f64>,
}

impl TruncatedSojourn {
    pub fn new(dist: &SojournDist, max_duration: usize) -> Result<Self> {
        if max_duration < 1 {
            return Err(Error::Domain("max duration must be >= 1".into()));
        }
        dist.validate()?;
        let raw: Vec<f64> = (1..=max_duration).map(|u| dist.log_pmf(u)).collect();
        let norm = log_sum_exp(&raw);
        if !norm.is_finite() {
            return Err(Error::InvalidParams(
                "sojourn distribution has no mass on the truncated support".into(),
            ));
        }
        Ok(Self {
            log_pmf: raw.into_iter().map(|v| v - norm).collect(),
        })
    }

    pub fn max_duration(&self) -> usize {
        self.log_pmf.len()
    }

    /// Log probability of duration `d`; `-inf` outside `{1, ..., D}`.
    pub fn log_pmf(&self, d: usize) -> f64 {
        if d == 0 || d > self.log_pmf.len() {
            f64::NEG_INFINITY
        } else {
            self.log_pmf[d - 1]
        }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.log_pmf
    }
}
