//! Seeded ensemble sweeps: sample Haar targets, compile state preparation,
//! post-select, simulate at gate or pulse level and score.

mod config;
mod emit;
mod tdesign;

pub use config::{ExperimentConfig, Mode};
pub use emit::{emit, reaggregate_csv, Manifest, ManifestEntry, CSV_HEADER};
pub use tdesign::{run_tdesign_check, RatioBand, TdesignReport};

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::compile::{ansatz_state, state_fidelity, variational_state_prep, CompilationResult};
use crate::error::{Error, Result};
use crate::hilbert::{haar_unitary, FockSpaceConfig};
use crate::lindblad::{evolve_with_report, fock_distribution, trace_out_qubit, DensityMatrix, NoiseModel};
use crate::metrics::{ideal_distribution, metric_record, DistributionPair, MetricRecord};
use crate::pulse::schedule_for_sequence;
use crate::rng;
use crate::stats::{bayesian_bootstrap, BootstrapSummary};
use crate::C64;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Outcome for one post-selected unitary at one grid point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UnitaryResult {
    /// Candidate index within its dimension, counting rejected candidates.
    pub unitary_index: usize,
    pub seed: u64,
    pub d: usize,
    pub compile_infidelity: f64,
    pub q: Vec<f64>,
    pub p: Vec<f64>,
    pub leakage: f64,
    pub metrics: MetricRecord,
    /// ⟨ψ|ρ_cavity|ψ⟩ against the target (pulse level only).
    pub state_fidelity: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    /// Bootstrap standard deviation of the mean.
    pub err: f64,
    pub bootstrap: BootstrapSummary,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aggregates {
    pub hog: Estimate,
    pub xeb: Estimate,
    pub xeb_n: Estimate,
}

/// Results at one (d, T₁, T₂) grid point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub d: usize,
    #[serde(with = "config::seconds")]
    pub t1: f64,
    #[serde(with = "config::seconds")]
    pub t2: f64,
    pub mode: Mode,
    /// Candidates examined to collect the accepted set.
    pub n_candidates: usize,
    pub n_accepted: usize,
    pub pass_rate: f64,
    pub unitaries: Vec<UnitaryResult>,
    /// Absent when post-selection left nothing to score.
    pub aggregates: Option<Aggregates>,
    pub wall_clock_s: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sweep {
    pub config: ExperimentConfig,
    pub version: String,
    pub records: Vec<ExperimentRecord>,
    pub wall_clock_s: f64,
}

/// A compiled candidate that passed post-selection.
#[derive(Clone, Debug)]
pub struct Accepted {
    pub index: usize,
    pub seed: u64,
    pub target: Vec<C64>,
    pub q: Vec<f64>,
    pub compilation: CompilationResult,
}

#[derive(Clone, Debug)]
pub struct PostSelection {
    pub accepted: Vec<Accepted>,
    pub n_candidates: usize,
}

impl PostSelection {
    pub fn pass_rate(&self) -> f64 {
        if self.n_candidates == 0 {
            0.0
        } else {
            self.accepted.len() as f64 / self.n_candidates as f64
        }
    }
}

pub(crate) fn candidate_seed(seed: u64, d: usize, index: usize) -> u64 {
    rng::derive_seed(seed, &[d as u64, index as u64])
}

fn compile_candidate(cfg: &ExperimentConfig, d: usize, index: usize) -> Result<Accepted> {
    let seed = candidate_seed(cfg.seed, d, index);
    let u = haar_unitary(d, &mut rng::stream(seed, &[0]));
    let q = ideal_distribution(&u);
    let target: Vec<C64> = (0..d).map(|x| u.get(x, 0)).collect();
    let compilation =
        variational_state_prep(&target, cfg.ansatz_layers, &cfg.optimizer_config(), &mut rng::stream(seed, &[1]))?;
    Ok(Accepted {
        index,
        seed,
        target,
        q,
        compilation,
    })
}

/// Compile candidates in index order until `n_unitaries` pass the threshold
/// or the candidate limit is reached. Each candidate depends only on its own
/// seed, so batching and thread count do not change the outcome.
pub fn post_select(cfg: &ExperimentConfig, d: usize) -> Result<PostSelection> {
    let limit = cfg.candidate_limit();
    let want = cfg.n_unitaries;
    let mut accepted = Vec::new();
    let mut next = 0;
    while accepted.len() < want && next < limit {
        let batch = (want - accepted.len()).max(rayon::current_num_threads()).min(limit - next);
        let results: Vec<Accepted> = (next..next + batch)
            .into_par_iter()
            .map(|i| compile_candidate(cfg, d, i))
            .collect::<Result<_>>()?;
        for r in results {
            next = r.index + 1;
            if r.compilation.converged {
                accepted.push(r);
                if accepted.len() == want {
                    break;
                }
            }
        }
    }
    Ok(PostSelection {
        accepted,
        n_candidates: next,
    })
}

/// Output distribution of one accepted unitary under `noise`.
fn simulate(cfg: &ExperimentConfig, a: &Accepted, noise: &NoiseModel) -> Result<(Vec<f64>, f64, Option<f64>)> {
    let d = a.q.len();
    match cfg.mode {
        Mode::Gate => {
            let psi = ansatz_state(&a.compilation.sequence, cfg.n_cavity)?;
            let p: Vec<f64> = psi[..d].iter().map(|z| z.norm_sqr()).collect();
            let leakage = psi[d..].iter().map(|z| z.norm_sqr()).sum();
            Ok((p, leakage, None))
        }
        Mode::Pulse => {
            let fcfg = FockSpaceConfig::new(cfg.n_cavity, d)?;
            let schedule = schedule_for_sequence(&a.compilation.sequence, cfg.chi, &cfg.schedule)?;
            let mut vac = vec![C64::new(0.0, 0.0); cfg.n_cavity];
            vac[0] = C64::new(1.0, 0.0);
            let rho0 = DensityMatrix::product_pure(&vac, false)?;
            let (rho, report) = evolve_with_report(&rho0, &schedule, noise, &cfg.integrator)?;
            if report.trace_drift > 1e-7 {
                return Err(Error::Integrator(format!("trace drift {:.2e}", report.trace_drift)));
            }
            let cavity = trace_out_qubit(&rho, &fcfg)?;
            let (p, leakage) = fock_distribution(&cavity, d)?;
            let fid = state_fidelity(&cavity, &a.target)?;
            Ok((p, leakage, Some(fid)))
        }
    }
}

/// Point estimates from per-unitary inner products, summed in index order.
/// The emitted CSV carries exactly these inputs, so re-aggregation from the
/// file reproduces the numbers bit for bit.
pub fn point_estimates(d: usize, hog: &[f64], xeb_inner: &[f64], qq_inner: &[f64]) -> Result<(f64, f64, f64)> {
    let n = hog.len() as f64;
    if hog.is_empty() || xeb_inner.len() != hog.len() || qq_inner.len() != hog.len() {
        return Err(Error::invalid("per-unitary columns must be nonempty and of equal length"));
    }
    let d = d as f64;
    let hog_mean = hog.iter().sum::<f64>() / n;
    let xeb = d * (xeb_inner.iter().sum::<f64>() / n) - 1.0;
    let denom = d * (qq_inner.iter().sum::<f64>() / n) - 1.0;
    if denom.abs() < 1e-12 {
        return Err(Error::Degenerate(format!("normalized XEB denominator {denom:.3e}")));
    }
    Ok((hog_mean, xeb, xeb / denom))
}

/// Point estimates plus Bayesian-bootstrap errors.
pub fn aggregate(
    d: usize,
    hog: &[f64],
    xeb_inner: &[f64],
    qq_inner: &[f64],
    resamples: usize,
    seed: u64,
) -> Result<Aggregates> {
    let (h, x, xn) = point_estimates(d, hog, xeb_inner, qq_inner)?;
    let df = d as f64;
    let n = qq_inner.len() as f64;
    let denom = df * (qq_inner.iter().sum::<f64>() / n) - 1.0;
    let xeb_c: Vec<f64> = xeb_inner.iter().map(|v| df * v - 1.0).collect();
    let xeb_n_c: Vec<f64> = xeb_c.iter().map(|v| v / denom).collect();
    let est = |value: f64, values: &[f64], stream: u64| -> Result<Estimate> {
        let b = bayesian_bootstrap(values, resamples, rng::derive_seed(seed, &[stream]))?;
        Ok(Estimate {
            value,
            err: b.std,
            bootstrap: b,
        })
    };
    Ok(Aggregates {
        hog: est(h, hog, 0)?,
        xeb: est(x, &xeb_c, 1)?,
        xeb_n: est(xn, &xeb_n_c, 2)?,
    })
}

pub(crate) fn bootstrap_seed(seed: u64, d: usize, point: usize) -> u64 {
    rng::derive_seed(seed, &[0xb007, d as u64, point as u64])
}

/// Score the post-selected set at one noise point.
pub fn evaluate(
    cfg: &ExperimentConfig,
    sel: &PostSelection,
    d: usize,
    noise: &NoiseModel,
    point: usize,
) -> Result<ExperimentRecord> {
    let start = Instant::now();
    let sims: Vec<(Vec<f64>, f64, Option<f64>)> =
        sel.accepted.par_iter().map(|a| simulate(cfg, a, noise)).collect::<Result<_>>()?;
    let mut unitaries = Vec::with_capacity(sims.len());
    for (a, (p, leakage, fid)) in sel.accepted.iter().zip(sims) {
        let pair = DistributionPair::new(a.q.clone(), p)?;
        unitaries.push(UnitaryResult {
            unitary_index: a.index,
            seed: a.seed,
            d,
            compile_infidelity: a.compilation.infidelity,
            metrics: metric_record(&pair),
            q: pair.q,
            p: pair.p,
            leakage,
            state_fidelity: fid,
        });
    }
    let aggregates = if unitaries.is_empty() {
        None
    } else {
        let col = |f: fn(&MetricRecord) -> f64| unitaries.iter().map(|u| f(&u.metrics)).collect::<Vec<_>>();
        Some(aggregate(
            d,
            &col(|m| m.hog_fraction_contrib),
            &col(|m| m.xeb_inner),
            &col(|m| m.qq_inner),
            cfg.bootstrap_resamples,
            bootstrap_seed(cfg.seed, d, point),
        )?)
    };
    Ok(ExperimentRecord {
        d,
        t1: noise.t1,
        t2: noise.t2,
        mode: cfg.mode,
        n_candidates: sel.n_candidates,
        n_accepted: sel.accepted.len(),
        pass_rate: sel.pass_rate(),
        unitaries,
        aggregates,
        wall_clock_s: start.elapsed().as_secs_f64(),
    })
}

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::invalid(format!("thread pool: {e}")))
}

/// Every (d, T₁, T₂) grid point of `cfg`, d outer. Compilation and
/// post-selection run once per dimension and are shared by its noise points.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<Sweep> {
    cfg.validate()?;
    let start = Instant::now();
    let noise = cfg.noise_points()?;
    let records = pool(cfg.workers)?.install(|| -> Result<Vec<ExperimentRecord>> {
        let mut out = Vec::new();
        for &d in &cfg.d_values {
            let sel = post_select(cfg, d)?;
            for (i, n) in noise.iter().enumerate() {
                out.push(evaluate(cfg, &sel, d, n, i)?);
            }
        }
        Ok(out)
    })?;
    Ok(Sweep {
        config: cfg.clone(),
        version: VERSION.to_string(),
        records,
        wall_clock_s: start.elapsed().as_secs_f64(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::{hog_score, xeb, xeb_normalized};

    fn small(mode: Mode) -> ExperimentConfig {
        ExperimentConfig {
            d_values: vec![3],
            n_unitaries: 4,
            mode,
            seed: 11,
            bootstrap_resamples: 200,
            n_cavity: 20,
            ..Default::default()
        }
    }

    #[test]
    fn point_estimates_match_metric_functions() {
        let mut r = rng::rng_from_seed(3);
        let pairs: Vec<DistributionPair> = (0..7)
            .map(|_| {
                let q = ideal_distribution(&haar_unitary(5, &mut r));
                let p = ideal_distribution(&haar_unitary(5, &mut r));
                DistributionPair::new(q, p).unwrap()
            })
            .collect();
        let recs: Vec<MetricRecord> = pairs.iter().map(metric_record).collect();
        let col = |f: fn(&MetricRecord) -> f64| recs.iter().map(f).collect::<Vec<_>>();
        let (h, x, xn) = point_estimates(
            5,
            &col(|m| m.hog_fraction_contrib),
            &col(|m| m.xeb_inner),
            &col(|m| m.qq_inner),
        )
        .unwrap();
        assert!((h - hog_score(&pairs).unwrap()).abs() < 1e-15);
        assert!((x - xeb(&pairs).unwrap()).abs() < 1e-14);
        assert!((xn - xeb_normalized(&pairs).unwrap()).abs() < 1e-14);
    }

    #[test]
    fn gate_sweep_is_reproducible_and_worker_independent() {
        let cfg = small(Mode::Gate);
        let a = run_sweep(&cfg).unwrap();
        let b = run_sweep(&ExperimentConfig { workers: 1, ..cfg.clone() }).unwrap();
        assert_eq!(a.records[0].unitaries, b.records[0].unitaries);
        assert_eq!(a.records[0].aggregates, b.records[0].aggregates);
        let r = &a.records[0];
        assert_eq!(r.n_accepted, 4);
        assert!(r.pass_rate > 0.0 && r.pass_rate <= 1.0);
        let agg = r.aggregates.unwrap();
        assert!(agg.xeb_n.value > 0.95, "{agg:?}");
    }

    #[test]
    fn empty_post_selection_is_reported() {
        let cfg = ExperimentConfig {
            infidelity_threshold: 1e-300,
            max_candidates: 4,
            optimizer: crate::compile::OptimizerConfig {
                restarts: 0,
                ..Default::default()
            },
            ..small(Mode::Gate)
        };
        let s = run_sweep(&cfg).unwrap();
        let r = &s.records[0];
        assert_eq!(r.n_candidates, 4);
        assert_eq!(r.n_accepted, 0);
        assert!(r.aggregates.is_none());
    }

    #[test]
    fn pulse_level_noiseless_tracks_gate_level() {
        let cfg = ExperimentConfig {
            d_values: vec![2],
            n_unitaries: 2,
            ..small(Mode::Pulse)
        };
        let pulse = run_sweep(&cfg).unwrap();
        let gate = run_sweep(&ExperimentConfig { mode: Mode::Gate, ..cfg }).unwrap();
        for (a, b) in pulse.records[0].unitaries.iter().zip(&gate.records[0].unitaries) {
            assert!(a.state_fidelity.unwrap() > 0.98, "{:?}", a.state_fidelity);
            for (x, y) in a.p.iter().zip(&b.p) {
                assert!((x - y).abs() < 0.02, "{:?} vs {:?}", a.p, b.p);
            }
        }
    }
}
