//! Dirichlet/Beta posteriors over outcome counts, the Chebyshev sample-size
//! bound and the Bayesian bootstrap.

use rand::Rng;
use rand_distr::{Binomial, Distribution, Exp1};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

/// Observed counts per outcome.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountVector {
    pub counts: Vec<u64>,
}

impl CountVector {
    pub fn new(counts: Vec<u64>) -> Self {
        CountVector { counts }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn d(&self) -> usize {
        self.counts.len()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub enum Prior {
    /// α_i = 1/d.
    #[default]
    InverseDimension,
    /// α_i = α for every category.
    Symmetric(f64),
    /// α_i = 0; categories that were never observed are dropped.
    Haldane,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DirichletPosterior {
    pub concentrations: Vec<f64>,
    /// Original category index of each concentration (all categories unless
    /// the Haldane prior dropped some).
    pub categories: Vec<usize>,
}

impl DirichletPosterior {
    pub fn total(&self) -> f64 {
        self.concentrations.iter().sum()
    }

    /// Posterior for a coarser partition: each group's concentration is the
    /// sum of its members'. Groups refer to positions in `concentrations`.
    pub fn aggregate(&self, groups: &[Vec<usize>]) -> Result<DirichletPosterior> {
        let mut seen = vec![false; self.concentrations.len()];
        let mut out = Vec::with_capacity(groups.len());
        for g in groups {
            let mut s = 0.0;
            for &i in g {
                if i >= seen.len() || seen[i] {
                    return Err(Error::invalid("groups must partition the categories"));
                }
                seen[i] = true;
                s += self.concentrations[i];
            }
            out.push(s);
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::invalid("groups must partition the categories"));
        }
        Ok(DirichletPosterior {
            categories: (0..out.len()).collect(),
            concentrations: out,
        })
    }
}

pub fn posterior(counts: &CountVector, prior: Prior) -> Result<DirichletPosterior> {
    let d = counts.d();
    if d == 0 {
        return Err(Error::invalid("empty count vector"));
    }
    let alpha = match prior {
        Prior::InverseDimension => 1.0 / d as f64,
        Prior::Symmetric(a) if a > 0.0 && a.is_finite() => a,
        Prior::Symmetric(a) => return Err(Error::invalid(format!("prior concentration {a} must be positive"))),
        Prior::Haldane => 0.0,
    };
    let (categories, concentrations): (Vec<usize>, Vec<f64>) = counts
        .counts
        .iter()
        .enumerate()
        .filter(|&(_, &c)| alpha > 0.0 || c > 0)
        .map(|(i, &c)| (i, alpha + c as f64))
        .unzip();
    if concentrations.is_empty() {
        return Err(Error::invalid("Haldane prior needs at least one observation"));
    }
    Ok(DirichletPosterior {
        concentrations,
        categories,
    })
}

/// Marginal mean and variance of component `i` of a Dirichlet distribution.
pub fn component_mean_var(post: &DirichletPosterior, i: usize) -> Result<(f64, f64)> {
    let a = *post
        .concentrations
        .get(i)
        .ok_or_else(|| Error::invalid(format!("component {i} out of range")))?;
    let total = post.total();
    let mean = a / total;
    let var = a * (total - a) / (total * total * (total + 1.0));
    Ok((mean, var))
}

/// Beta(½ + heavy counts, ½ + light counts) for the heavy-output probability.
pub fn heavy_posterior(counts: &CountVector, heavy: &[usize]) -> Result<(f64, f64)> {
    if let Some(&bad) = heavy.iter().find(|&&i| i >= counts.d()) {
        return Err(Error::invalid(format!("heavy index {bad} out of range")));
    }
    let mut in_heavy = vec![false; counts.d()];
    for &i in heavy {
        in_heavy[i] = true;
    }
    let (mut h, mut l) = (0u64, 0u64);
    for (i, &c) in counts.counts.iter().enumerate() {
        if in_heavy[i] {
            h += c;
        } else {
            l += c;
        }
    }
    Ok((0.5 + h as f64, 0.5 + l as f64))
}

pub fn beta_mean_var(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (a / s, a * b / (s * s * (s + 1.0)))
}

/// Smallest N with 1/(4 ε² (N + 2)) ≤ 1 − confidence.
pub fn chebyshev_n(epsilon: f64, confidence: f64) -> Result<u64> {
    if !(epsilon > 0.0 && epsilon < 1.0) || !(confidence > 0.0 && confidence < 1.0) {
        return Err(Error::invalid("need 0 < epsilon < 1 and 0 < confidence < 1"));
    }
    let bound = 1.0 / (4.0 * epsilon * epsilon * (1.0 - confidence));
    // The relative slack absorbs rounding in the inputs (0.1² is not exact).
    let n = (bound * (1.0 - 1e-12)).ceil() - 2.0;
    Ok(n.max(0.0) as u64)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BootstrapSummary {
    pub mean: f64,
    pub std: f64,
    pub resamples: usize,
    pub seed: u64,
}

pub const DEFAULT_RESAMPLES: usize = 10_000;

const BOOTSTRAP_BLOCK: usize = 256;

/// Rubin's Bayesian bootstrap of the mean: each resample re-weights the
/// values with ω ~ Dir(1, …, 1), drawn as normalized unit exponentials.
///
/// Resamples are generated in fixed-size blocks with their own seed streams,
/// so the result does not depend on the thread pool.
pub fn bayesian_bootstrap(values: &[f64], resamples: usize, seed: u64) -> Result<BootstrapSummary> {
    if values.is_empty() || resamples == 0 {
        return Err(Error::invalid("bootstrap needs values and at least one resample"));
    }
    // Working relative to one of the values keeps constant inputs exactly
    // constant, so their spread is exactly zero.
    let shift = values[0];
    let n_blocks = resamples.div_ceil(BOOTSTRAP_BLOCK);
    let stats: Vec<f64> = (0..n_blocks)
        .into_par_iter()
        .flat_map_iter(|b| {
            let mut r = rng::stream(seed, &[b as u64]);
            let len = BOOTSTRAP_BLOCK.min(resamples - b * BOOTSTRAP_BLOCK);
            (0..len)
                .map(|_| {
                    let (mut wsum, mut acc) = (0.0, 0.0);
                    for &v in values {
                        let w: f64 = Exp1.sample(&mut r);
                        wsum += w;
                        acc += w * (v - shift);
                    }
                    acc / wsum
                })
                .collect::<Vec<_>>()
        })
        .collect();
    let m = stats.len() as f64;
    let mean = stats.iter().sum::<f64>() / m;
    let var = if stats.len() > 1 {
        stats.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (m - 1.0)
    } else {
        0.0
    };
    Ok(BootstrapSummary {
        mean: shift + mean,
        std: var.sqrt(),
        resamples,
        seed,
    })
}

/// Append the missing probability mass as a final category.
pub fn with_leakage_category(p: &[f64]) -> Vec<f64> {
    let mut out = p.to_vec();
    out.push((1.0 - p.iter().sum::<f64>()).max(0.0));
    out
}

/// Multinomial draw by sequential conditional binomials.
pub fn sample_counts<R: Rng + ?Sized>(p: &[f64], n: u64, rng: &mut R) -> Result<CountVector> {
    if p.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) {
        return Err(Error::invalid("probabilities must be finite and non-negative"));
    }
    let total: f64 = p.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::invalid(format!("probabilities sum to {total}")));
    }
    let mut counts = vec![0u64; p.len()];
    let mut left = n;
    let mut mass = total;
    for (i, &pi) in p.iter().enumerate() {
        if left == 0 {
            break;
        }
        if i + 1 == p.len() {
            counts[i] = left;
            break;
        }
        let frac = if mass > 0.0 { (pi / mass).clamp(0.0, 1.0) } else { 0.0 };
        let k = Binomial::new(left, frac)
            .map_err(|e| Error::invalid(format!("binomial: {e}")))?
            .sample(rng);
        counts[i] = k;
        left -= k;
        mass -= pi;
    }
    Ok(CountVector { counts })
}
