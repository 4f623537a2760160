//! Supervised Bayesian fitting.
//!
//! With labelled data the posterior factorizes into independent blocks:
//! `δ` and every row of `Γ` have Dirichlet posteriors and are drawn exactly;
//! each emission `(state, dimension)` and each sojourn distribution is drawn
//! by an adaptive random-walk Metropolis chain on its unconstrained scale.
//! The chains are independent, so [`Sampler::run_block`] can be driven from
//! several threads; results only depend on the seed.

mod blocks;
mod optim;
mod stats;

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;
use rand::Rng as _;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

pub use stats::{
    dirichlet_mean, dirichlet_mode, dirichlet_posteriors, sufficient_stats, DirichletPosteriors, RegressionStats,
    SufficientStats,
};

use crate::math::cholesky;
use crate::model::{Emission, Family, LabeledSeries, ModelSpec, Params, Priors, SojournFamily};
use crate::rng::{self, derive_seed, Rng};
use crate::sojourn::SojournDist;
use crate::{Error, Result};
use blocks::{EmissionBlock, SojournBlock};
use optim::{maximize, negative_hessian, BfgsOptions};

/// Metropolis settings. Iterations run = `burn_in + n_draws * thin`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplerSettings {
    pub burn_in: usize,
    pub thin: usize,
    /// Acceptance rate the proposal scale is adapted toward during burn-in.
    pub target_acceptance: f64,
}

impl Default for SamplerSettings {
    fn default() -> Self {
        Self {
            burn_in: 1000,
            thin: 1,
            target_acceptance: 0.35,
        }
    }
}

impl SamplerSettings {
    pub fn validate(&self) -> Result<()> {
        if self.thin == 0 {
            return Err(Error::Domain("thinning interval must be >= 1".into()));
        }
        if !(self.target_acceptance > 0.0 && self.target_acceptance < 1.0) {
            return Err(Error::Domain("target acceptance must lie in (0, 1)".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockDiagnostics {
    pub name: String,
    /// Acceptance rate after burn-in; `None` for prior-only blocks.
    pub acceptance_rate: Option<f64>,
    /// Acceptance rate over the second half of burn-in.
    pub burn_in_acceptance: Option<f64>,
    /// Final multiplier of the proposal Cholesky factor.
    pub proposal_scale: f64,
    /// The block had no data and was drawn from its prior.
    pub prior_only: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplerDiagnostics {
    pub settings: SamplerSettings,
    pub n_draws: usize,
    pub blocks: Vec<BlockDiagnostics>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorDraws {
    pub spec: ModelSpec,
    pub draws: Vec<Params>,
    pub diagnostics: SamplerDiagnostics,
}

impl PosteriorDraws {
    pub fn len(&self) -> usize {
        self.draws.len()
    }

    pub fn is_empty(&self) -> bool {
        self.draws.is_empty()
    }
}

#[derive(Debug, Clone)]
enum BlockKind {
    Emission {
        state: usize,
        dim: usize,
        block: EmissionBlock,
    },
    Sojourn {
        state: usize,
        block: SojournBlock,
    },
}

impl BlockKind {
    fn name(&self) -> String {
        match self {
            BlockKind::Emission { state, dim, .. } => format!("emission state {} dim {}", state + 1, dim + 1),
            BlockKind::Sojourn { state, .. } => format!("sojourn state {}", state + 1),
        }
    }

    fn is_empty(&self) -> bool {
        match self {
            BlockKind::Emission { block, .. } => block.stats.n == 0,
            BlockKind::Sojourn { block, .. } => block.n_runs == 0,
        }
    }

    fn log_density(&self, x: &[f64], jacobian: bool, grad: Option<&mut [f64]>) -> f64 {
        match self {
            BlockKind::Emission { block, .. } => block.log_density(x, jacobian, grad),
            BlockKind::Sojourn { block, .. } => block.log_density(x, jacobian, grad),
        }
    }

    fn initial_point(&self) -> Vec<f64> {
        match self {
            BlockKind::Emission { block, .. } => block.initial_point(),
            BlockKind::Sojourn { block, .. } => block.initial_point(),
        }
    }

    fn prior_centre(&self) -> Vec<f64> {
        match self {
            BlockKind::Emission { block, .. } => block.prior_centre(),
            BlockKind::Sojourn { block, .. } => block.prior_centre(),
        }
    }

    fn prior_draw(&self, rng: &mut Rng) -> Vec<f64> {
        match self {
            BlockKind::Emission { block, .. } => {
                let mut x = Vec::with_capacity(block.ar_order() + 2);
                x.push(block.mean_loc + block.mean_scale * std_normal(rng));
                for _ in 0..block.ar_order() {
                    x.push(block.ar_loc + block.ar_scale * std_normal(rng));
                }
                let mut sd = -1.0;
                for _ in 0..1_000_000 {
                    sd = block.sd_loc + block.sd_scale * std_normal(rng);
                    if sd > 0.0 {
                        break;
                    }
                }
                if !(sd > 0.0) {
                    sd = blocks::truncated_normal_mean(block.sd_loc, block.sd_scale);
                }
                x.push(sd.ln());
                x
            }
            BlockKind::Sojourn { block, .. } => {
                let pr = &block.prior;
                let mut x = vec![pr.mean_log_loc + pr.mean_log_scale * std_normal(rng)];
                if block.family == SojournFamily::NegBinomial {
                    x.push(pr.dispersion_log_loc + pr.dispersion_log_scale * std_normal(rng));
                }
                x
            }
        }
    }

    fn mode(&self, jacobian: bool) -> Result<Vec<f64>> {
        let x0 = self.initial_point();
        let m = maximize(
            |x, g| self.log_density(x, jacobian, Some(g)),
            &x0,
            BfgsOptions::default(),
        )?;
        Ok(m.x)
    }
}

fn std_normal(rng: &mut Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// Draws of one Metropolis block on its unconstrained scale.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockDraws {
    pub index: usize,
    pub values: Vec<Vec<f64>>,
    pub diagnostics: BlockDiagnostics,
}

/// Posterior sampler for labelled data, split into independent blocks.
#[derive(Debug, Clone)]
pub struct Sampler {
    spec: ModelSpec,
    dirichlet: DirichletPosteriors,
    blocks: Vec<BlockKind>,
    settings: SamplerSettings,
    n_draws: usize,
    seed: u64,
    warnings: Vec<String>,
}

impl Sampler {
    pub fn new(
        series: &[LabeledSeries],
        priors: &Priors,
        spec: &ModelSpec,
        settings: SamplerSettings,
        n_draws: usize,
        seed: u64,
    ) -> Result<Self> {
        if n_draws == 0 {
            return Err(Error::Domain("n_draws must be >= 1".into()));
        }
        settings.validate()?;
        let stats = sufficient_stats(series, spec)?;
        let dirichlet = dirichlet_posteriors(&stats, priors, spec)?;
        let blocks = build_blocks(&stats, priors, spec);
        let warnings = empty_block_warnings(&blocks);
        for w in &warnings {
            log::warn!("{w}");
        }
        Ok(Self {
            spec: spec.clone(),
            dirichlet,
            blocks,
            settings,
            n_draws,
            seed,
            warnings,
        })
    }

    /// Number of Metropolis (or prior-only) blocks.
    pub fn n_blocks(&self) -> usize {
        self.blocks.len()
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    /// Run block `index` on its own random stream.
    pub fn run_block(&self, index: usize) -> Result<BlockDraws> {
        let block = self
            .blocks
            .get(index)
            .ok_or_else(|| Error::Domain(format!("no sampler block {index}")))?;
        let mut rng = rng::stream(derive_seed(self.seed, index as u64 + 1), 0);
        if block.is_empty() {
            let values = (0..self.n_draws).map(|_| block.prior_draw(&mut rng)).collect();
            return Ok(BlockDraws {
                index,
                values,
                diagnostics: BlockDiagnostics {
                    name: block.name(),
                    acceptance_rate: None,
                    burn_in_acceptance: None,
                    proposal_scale: 0.0,
                    prior_only: true,
                },
            });
        }
        metropolis(block, index, &self.settings, self.n_draws, &mut rng)
    }

    /// Combine block draws with exact Dirichlet draws of `δ` and `Γ`.
    pub fn assemble(&self, mut block_draws: Vec<BlockDraws>) -> Result<PosteriorDraws> {
        block_draws.sort_by_key(|b| b.index);
        if block_draws.len() != self.blocks.len()
            || block_draws
                .iter()
                .enumerate()
                .any(|(i, b)| b.index != i || b.values.len() != self.n_draws)
        {
            return Err(Error::Dimension("incomplete set of block draws".into()));
        }
        let spec = &self.spec;
        let j = spec.n_states;
        let p = spec.ar_order;
        let mut rng = rng::stream(derive_seed(self.seed, 0), 0);
        let mut draws = Vec::with_capacity(self.n_draws);
        for r in 0..self.n_draws {
            let delta = dirichlet_draw(&self.dirichlet.delta, &mut rng);
            let tpm: Vec<Vec<f64>> = self.dirichlet.tpm.iter().map(|a| dirichlet_draw(a, &mut rng)).collect();
            let mut emissions = vec![
                Emission {
                    mean: vec![0.0; spec.obs_dim],
                    ar_coeffs: vec![vec![0.0; spec.obs_dim]; p],
                    variances: vec![0.0; spec.obs_dim],
                };
                j
            ];
            let mut sojourns = Vec::new();
            for (block, bd) in self.blocks.iter().zip(&block_draws) {
                let x = &bd.values[r];
                match block {
                    BlockKind::Emission { state, dim, .. } => set_emission(&mut emissions[*state], *dim, x),
                    BlockKind::Sojourn { .. } => sojourns.push(sojourn_from(spec.sojourn_family, x)),
                }
            }
            let params = Params {
                delta,
                tpm,
                emissions,
                sojourns,
            };
            params.validate(spec)?;
            draws.push(params);
        }
        Ok(PosteriorDraws {
            spec: spec.clone(),
            draws,
            diagnostics: SamplerDiagnostics {
                settings: self.settings,
                n_draws: self.n_draws,
                blocks: block_draws.into_iter().map(|b| b.diagnostics).collect(),
                warnings: self.warnings.clone(),
            },
        })
    }
}

fn build_blocks(stats: &SufficientStats, priors: &Priors, spec: &ModelSpec) -> Vec<BlockKind> {
    let mut blocks = Vec::new();
    for state in 0..spec.n_states {
        for dim in 0..spec.obs_dim {
            blocks.push(BlockKind::Emission {
                state,
                dim,
                block: EmissionBlock::new(stats.emission[state][dim].clone(), &priors.emission[state], dim),
            });
        }
    }
    if spec.family == Family::Hsmm {
        for state in 0..spec.n_states {
            blocks.push(BlockKind::Sojourn {
                state,
                block: SojournBlock::new(spec.sojourn_family, &stats.sojourns[state], priors.sojourn[state]),
            });
        }
    }
    blocks
}

fn empty_block_warnings(blocks: &[BlockKind]) -> Vec<String> {
    blocks
        .iter()
        .filter(|b| b.is_empty())
        .map(|b| format!("{} has no observations; using its prior", b.name()))
        .collect()
}

fn set_emission(em: &mut Emission, d: usize, x: &[f64]) {
    let p = em.ar_coeffs.len();
    em.mean[d] = x[0];
    for k in 0..p {
        em.ar_coeffs[k][d] = x[k + 1];
    }
    em.variances[d] = (2.0 * x[p + 1]).exp();
}

fn sojourn_from(family: SojournFamily, x: &[f64]) -> SojournDist {
    let m = x[0].exp();
    match family {
        SojournFamily::Geometric => SojournDist::Geometric { stay: m / (1.0 + m) },
        SojournFamily::NegBinomial => SojournDist::NegBinomial {
            mean: m,
            dispersion: x[1].exp(),
        },
    }
}

/// One draw from a Dirichlet; coordinates with zero concentration stay 0.
pub fn dirichlet_draw<R: rand::Rng + ?Sized>(alpha: &[f64], rng: &mut R) -> Vec<f64> {
    let mut g: Vec<f64> = alpha
        .iter()
        .map(|&a| {
            if a > 0.0 {
                Gamma::new(a, 1.0).expect("positive shape").sample(rng)
            } else {
                0.0
            }
        })
        .collect();
    let total: f64 = g.iter().sum();
    if total > 0.0 {
        g.iter_mut().for_each(|v| *v /= total);
    } else {
        // every gamma underflowed: all mass on the largest concentration
        let best = crate::math::argmax(alpha).unwrap_or(0);
        g.iter_mut()
            .enumerate()
            .for_each(|(i, v)| *v = if i == best { 1.0 } else { 0.0 });
    }
    g
}

fn metropolis(
    block: &BlockKind,
    index: usize,
    settings: &SamplerSettings,
    n_draws: usize,
    rng: &mut Rng,
) -> Result<BlockDraws> {
    let start = match block.mode(true) {
        Ok(x) => x,
        Err(Error::NotConverged { best, .. }) => best,
        Err(e) => return Err(e),
    };
    let target = |x: &[f64]| block.log_density(x, true, None);
    let mut current = start;
    let mut f_current = target(&current);
    if !f_current.is_finite() {
        return Err(Error::NonFiniteInit(format!(
            "{}: log posterior {f_current}",
            block.name()
        )));
    }
    let dim = current.len();
    let chol = proposal_factor(block, &current);
    let mut log_scale = (2.38 / (dim as f64).sqrt()).ln();
    let total = settings.burn_in + n_draws * settings.thin;
    let mut values = Vec::with_capacity(n_draws);
    let (mut late_burn, mut late_burn_acc) = (0usize, 0usize);
    let (mut kept_iter, mut kept_acc) = (0usize, 0usize);
    let mut z = vec![0.0; dim];
    let mut proposal = vec![0.0; dim];
    for it in 0..total {
        let scale = log_scale.exp();
        for v in z.iter_mut() {
            *v = std_normal(rng);
        }
        for a in 0..dim {
            let step: f64 = (0..=a).map(|b| chol[a * dim + b] * z[b]).sum();
            proposal[a] = current[a] + scale * step;
        }
        let f_prop = target(&proposal);
        let log_ratio = f_prop - f_current;
        let accept_prob = if log_ratio.is_nan() {
            0.0
        } else {
            log_ratio.min(0.0).exp()
        };
        let u: f64 = rng.gen();
        let accepted = u < accept_prob;
        if accepted {
            current.copy_from_slice(&proposal);
            f_current = f_prop;
        }
        if it < settings.burn_in {
            log_scale += (accept_prob - settings.target_acceptance) / ((it + 1) as f64).powf(0.6);
            if 2 * it >= settings.burn_in {
                late_burn += 1;
                late_burn_acc += accepted as usize;
            }
        } else {
            kept_iter += 1;
            kept_acc += accepted as usize;
            if (it - settings.burn_in + 1) % settings.thin == 0 {
                values.push(current.clone());
            }
        }
    }
    Ok(BlockDraws {
        index,
        values,
        diagnostics: BlockDiagnostics {
            name: block.name(),
            acceptance_rate: (kept_iter > 0).then(|| kept_acc as f64 / kept_iter as f64),
            burn_in_acceptance: (late_burn > 0).then(|| late_burn_acc as f64 / late_burn as f64),
            proposal_scale: log_scale.exp(),
            prior_only: false,
        },
    })
}

/// Cholesky factor of the inverse negative Hessian at the mode, falling back
/// to a diagonal guess when the curvature is not positive definite.
fn proposal_factor(block: &BlockKind, mode: &[f64]) -> Vec<f64> {
    let n = mode.len();
    let h = negative_hessian(|x, g| block.log_density(x, true, Some(g)), mode);
    if let Some(cov) = crate::math::spd_inverse(&h, n) {
        if let Some(l) = cholesky(&cov, n) {
            return l;
        }
    }
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        let c = h[i * n + i];
        l[i * n + i] = if c > 0.0 && c.is_finite() { 1.0 / c.sqrt() } else { 0.1 };
    }
    l
}

/// Draw `n_draws` samples from the posterior, running blocks in sequence.
pub fn sample_posterior(
    series: &[LabeledSeries],
    priors: &Priors,
    spec: &ModelSpec,
    n_draws: usize,
    seed: u64,
) -> Result<PosteriorDraws> {
    sample_posterior_with(series, priors, spec, SamplerSettings::default(), n_draws, seed)
}

pub fn sample_posterior_with(
    series: &[LabeledSeries],
    priors: &Priors,
    spec: &ModelSpec,
    settings: SamplerSettings,
    n_draws: usize,
    seed: u64,
) -> Result<PosteriorDraws> {
    let sampler = Sampler::new(series, priors, spec, settings, n_draws, seed)?;
    let blocks = (0..sampler.n_blocks())
        .map(|i| sampler.run_block(i))
        .collect::<Result<Vec<_>>>()?;
    sampler.assemble(blocks)
}

/// Posterior mode: Dirichlet modes for `δ` and `Γ`, quasi-Newton maxima of
/// the emission and sojourn conditionals. Blocks without data are set to
/// their prior centre (prior means of μ, ω and σ; prior median of m, k).
pub fn map_fit(series: &[LabeledSeries], priors: &Priors, spec: &ModelSpec) -> Result<Params> {
    let stats = sufficient_stats(series, spec)?;
    let dirichlet = dirichlet_posteriors(&stats, priors, spec)?;
    let blocks = build_blocks(&stats, priors, spec);
    for w in empty_block_warnings(&blocks) {
        log::warn!("{w}");
    }
    let j = spec.n_states;
    let mut emissions = vec![
        Emission {
            mean: vec![0.0; spec.obs_dim],
            ar_coeffs: vec![vec![0.0; spec.obs_dim]; spec.ar_order],
            variances: vec![0.0; spec.obs_dim],
        };
        j
    ];
    let mut sojourns = Vec::new();
    for block in &blocks {
        let x = if block.is_empty() {
            block.prior_centre()
        } else {
            block.mode(false)?
        };
        match block {
            BlockKind::Emission { state, dim, .. } => set_emission(&mut emissions[*state], *dim, &x),
            BlockKind::Sojourn { .. } => sojourns.push(sojourn_from(spec.sojourn_family, &x)),
        }
    }
    let params = Params {
        delta: dirichlet_mode(&dirichlet.delta),
        tpm: dirichlet.tpm.iter().map(|a| dirichlet_mode(a)).collect(),
        emissions,
        sojourns,
    };
    params.validate(spec)?;
    Ok(params)
}

#[cfg(test)]
mod tests;
