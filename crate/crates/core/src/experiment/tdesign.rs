use rand_distr::{Distribution, Exp1};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{candidate_seed, compile_candidate, ExperimentConfig};
use crate::error::{Error, Result};
use crate::hilbert::{frame_potential_pairs, frame_potentials, haar_unitary, FramePotentialEstimator, UnitaryEnsemble};
use crate::rng;

/// Resamples used for the frame-potential band.
pub const TDESIGN_RESAMPLES: usize = 400;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatioBand {
    pub t: u32,
    /// F^(t) / t!.
    pub ratio: f64,
    pub std: f64,
    /// ratio ± 2·std.
    pub low: f64,
    pub high: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TdesignReport {
    pub d: usize,
    pub count: usize,
    pub raw: Vec<RatioBand>,
    /// Ratios on the members whose state preparation passed post-selection.
    pub post_selected: Option<Vec<f64>>,
    pub n_post_selected: usize,
    /// A single-member ensemble only sees its own d^{2t} diagonal term.
    pub degenerate: bool,
    /// Orders at which the post-selected ratio leaves the raw band.
    pub biased_orders: Vec<u32>,
}

fn factorial(t: u32) -> f64 {
    (1..=t).map(f64::from).product()
}

/// Band from re-weighting the members with flat-Dirichlet weights: each
/// resample evaluates Σ_{i<j} w_i w_j x_ij^t / Σ_{i<j} w_i w_j.
fn bands(n: usize, overlaps: &[f64], point: &[f64], seed: u64) -> Vec<RatioBand> {
    let t_max = point.len();
    let draws: Vec<Vec<f64>> = (0..TDESIGN_RESAMPLES)
        .into_par_iter()
        .map(|r| {
            let mut g = rng::stream(seed, &[r as u64]);
            let w: Vec<f64> = (0..n).map(|_| Exp1.sample(&mut g)).collect();
            let mut num = vec![0.0; t_max];
            let mut den = 0.0;
            let mut k = 0;
            for i in 0..n {
                for j in i + 1..n {
                    let ww = w[i] * w[j];
                    den += ww;
                    let mut x = ww;
                    for acc in num.iter_mut() {
                        x *= overlaps[k];
                        *acc += x;
                    }
                    k += 1;
                }
            }
            num.iter().map(|v| v / den).collect()
        })
        .collect();
    (0..t_max)
        .map(|ti| {
            let t = ti as u32 + 1;
            let f = factorial(t);
            let m = draws.len() as f64;
            let mean = draws.iter().map(|v| v[ti]).sum::<f64>() / m;
            let var = draws.iter().map(|v| (v[ti] - mean).powi(2)).sum::<f64>() / (m - 1.0);
            let ratio = point[ti] / f;
            let std = var.sqrt() / f;
            RatioBand {
                t,
                ratio,
                std,
                low: ratio - 2.0 * std,
                high: ratio + 2.0 * std,
            }
        })
        .collect()
}

/// Frame-potential ratios F^(t)/t! for t = 1..=t_max on `count` Haar
/// unitaries and, when `post_selection` is given, on the subset whose
/// first-column state preparation meets its threshold. Members use the same
/// candidate seeds as [`super::run_sweep`].
pub fn run_tdesign_check(
    d: usize,
    count: usize,
    t_max: u32,
    seed: u64,
    post_selection: Option<&ExperimentConfig>,
) -> Result<TdesignReport> {
    if d < 2 || count == 0 || t_max == 0 {
        return Err(Error::invalid("need d >= 2, count >= 1 and t_max >= 1"));
    }
    let members: Vec<_> = (0..count)
        .into_par_iter()
        .map(|i| haar_unitary(d, &mut rng::stream(candidate_seed(seed, d, i), &[0])))
        .collect();
    let ens = UnitaryEnsemble::from_members(members, seed)?;
    let point = frame_potentials(&ens, t_max, FramePotentialEstimator::DistinctPairs);
    let degenerate = count < 2;
    let raw = if degenerate {
        point
            .iter()
            .enumerate()
            .map(|(i, &f)| {
                let r = f / factorial(i as u32 + 1);
                RatioBand {
                    t: i as u32 + 1,
                    ratio: r,
                    std: 0.0,
                    low: r,
                    high: r,
                }
            })
            .collect()
    } else {
        bands(count, &frame_potential_pairs(&ens), &point, rng::derive_seed(seed, &[0x7de5]))
    };

    let mut post_selected = None;
    let mut n_post_selected = 0;
    let mut biased_orders = Vec::new();
    if let Some(cfg) = post_selection {
        let cfg = ExperimentConfig { seed, ..cfg.clone() };
        let kept: Vec<bool> = (0..count)
            .into_par_iter()
            .map(|i| compile_candidate(&cfg, d, i).map(|a| a.compilation.converged))
            .collect::<Result<_>>()?;
        let sub: Vec<_> = ens
            .members
            .iter()
            .zip(&kept)
            .filter(|(_, k)| **k)
            .map(|(u, _)| u.clone())
            .collect();
        n_post_selected = sub.len();
        if n_post_selected >= 2 {
            let sub = UnitaryEnsemble::from_members(sub, seed)?;
            let ratios: Vec<f64> = frame_potentials(&sub, t_max, FramePotentialEstimator::DistinctPairs)
                .iter()
                .enumerate()
                .map(|(i, f)| f / factorial(i as u32 + 1))
                .collect();
            for (b, r) in raw.iter().zip(&ratios) {
                if !degenerate && (*r < b.low || *r > b.high) {
                    biased_orders.push(b.t);
                }
            }
            post_selected = Some(ratios);
        }
    }
    Ok(TdesignReport {
        d,
        count,
        raw,
        post_selected,
        n_post_selected,
        degenerate,
        biased_orders,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_member_is_degenerate() {
        let r = run_tdesign_check(3, 1, 2, 4, None).unwrap();
        assert!(r.degenerate);
        assert!((r.raw[0].ratio - 9.0).abs() < 1e-9);
        assert!((r.raw[1].ratio - 81.0 / 2.0).abs() < 1e-9);
    }

    #[test]
    fn haar_ratios_near_one() {
        let r = run_tdesign_check(4, 200, 2, 9, None).unwrap();
        for b in &r.raw {
            assert!(b.low < 1.0 && 1.0 < b.high || (b.ratio - 1.0).abs() < 0.1, "{b:?}");
            assert!(b.std > 0.0);
        }
    }

    #[test]
    fn post_selection_subset_is_reported() {
        let cfg = ExperimentConfig {
            n_cavity: 16,
            ..Default::default()
        };
        let r = run_tdesign_check(2, 20, 2, 3, Some(&cfg)).unwrap();
        assert!(r.n_post_selected >= 2);
        assert_eq!(r.post_selected.as_ref().unwrap().len(), 2);
    }

    #[test]
    fn rejects_empty_requests() {
        assert!(run_tdesign_check(4, 0, 2, 0, None).is_err());
        assert!(run_tdesign_check(4, 5, 0, 0, None).is_err());
    }
}
