use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use rand::Rng as _;
use serde_json::json;

use snapqv::compile::{exact_compile, native_compile, variational_state_prep};
use snapqv::experiment::{emit, run_sweep, run_tdesign_check, ExperimentConfig, Mode};
use snapqv::hilbert::truncation_error;
use snapqv::{rng, Error, Operator, OptimizerConfig, Result, C64};

#[derive(Parser)]
#[command(name = "bench", version, about = "Cavity-qudit benchmark harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Gate,
    Pulse,
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Exact,
    Native,
    Variational,
}

#[derive(Subcommand)]
enum Command {
    /// Run a (d, T1, T2) sweep from a TOML config and write CSV + manifest.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum)]
        mode: Option<ModeArg>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long, env = "SNAPQV_OUT_DIR", default_value = "results")]
        out: PathBuf,
    },
    /// Frame-potential ratios F^(t)/t! for a Haar ensemble.
    Tdesign {
        #[arg(long)]
        d: usize,
        #[arg(long)]
        count: usize,
        #[arg(long)]
        tmax: u32,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Also score the subset whose state preparation passes post-selection.
        #[arg(long)]
        post_select: bool,
    },
    /// Compile a unitary stored as JSON ({"dim": d, "entries": [re, im, ...]}).
    Compile {
        #[arg(long)]
        unitary: PathBuf,
        #[arg(long, value_enum)]
        method: Method,
        /// Infidelity budget for the native method.
        #[arg(long, default_value_t = 1e-3)]
        budget: f64,
        /// Ansatz layers for the variational method (prepares U|0⟩).
        #[arg(long, default_value_t = 2)]
        layers: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Truncation error of random displacements on the d block.
    Truncation {
        #[arg(long)]
        d: usize,
        #[arg(long)]
        ncav: usize,
        #[arg(long)]
        samples: usize,
        /// Displacements are drawn uniformly from the disc |α| <= alpha-max.
        #[arg(long, default_value_t = 1.5)]
        alpha_max: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn print(v: serde_json::Value) {
    println!("{}", serde_json::to_string_pretty(&v).expect("JSON output"));
}

fn run(cmd: Command) -> Result<()> {
    match cmd {
        Command::Sweep {
            config,
            mode,
            seed,
            workers,
            out,
        } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(m) = mode {
                cfg.mode = match m {
                    ModeArg::Gate => Mode::Gate,
                    ModeArg::Pulse => Mode::Pulse,
                };
            }
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(w) = workers {
                cfg.workers = w;
            }
            cfg.validate()?;
            let sweep = run_sweep(&cfg)?;
            for r in &sweep.records {
                let agg = r.aggregates.map(|a| {
                    format!(
                        "hog {:.4} ± {:.4}, xeb_n {:.4} ± {:.4}",
                        a.hog.value, a.hog.err, a.xeb_n.value, a.xeb_n.err
                    )
                });
                eprintln!(
                    "d={} t1={:e} t2={:e}: post-selection {}/{} -> {}",
                    r.d,
                    r.t1,
                    r.t2,
                    r.n_accepted,
                    r.n_candidates,
                    agg.unwrap_or_else(|| "no unitaries passed".into())
                );
            }
            let manifest = emit(&sweep, &out)?;
            eprintln!("wrote {} grid files to {}", manifest.entries.len(), out.display());
        }
        Command::Tdesign {
            d,
            count,
            tmax,
            seed,
            post_select,
        } => {
            let cfg = ExperimentConfig::default();
            let report = run_tdesign_check(d, count, tmax, seed, post_select.then_some(&cfg))?;
            print(serde_json::to_value(&report).map_err(|e| Error::Format(e.to_string()))?);
        }
        Command::Compile {
            unitary,
            method,
            budget,
            layers,
            seed,
        } => {
            let u = Operator::load(&unitary)?;
            u.ensure_unitary(1e-8)?;
            let value = match method {
                Method::Exact => {
                    let seq = exact_compile(&u)?;
                    json!({ "method": "exact", "sequence": seq, "gate_count": seq.len() })
                }
                Method::Native => {
                    let nc = native_compile(&u, budget)?;
                    json!({
                        "method": "native",
                        "infidelity": nc.infidelity,
                        "gate_count": nc.gate_count(),
                        "repetitions": nc.repetitions,
                        "sequence": nc.sequence,
                    })
                }
                Method::Variational => {
                    let target: Vec<C64> = (0..u.dim()).map(|i| u.get(i, 0)).collect();
                    let opt = OptimizerConfig::default();
                    let r = variational_state_prep(&target, layers, &opt, &mut rng::rng_from_seed(seed))?;
                    json!({
                        "method": "variational",
                        "infidelity": r.infidelity,
                        "converged": r.converged,
                        "iterations": r.iterations,
                        "sequence": r.sequence,
                    })
                }
            };
            print(value);
        }
        Command::Truncation {
            d,
            ncav,
            samples,
            alpha_max,
            seed,
        } => {
            if samples == 0 || !(alpha_max > 0.0) {
                return Err(Error::InvalidParameter("need samples >= 1 and alpha-max > 0".into()));
            }
            let mut r = rng::rng_from_seed(seed);
            let mut errs = Vec::with_capacity(samples);
            for _ in 0..samples {
                let radius = alpha_max * r.random::<f64>().sqrt();
                let alpha = C64::from_polar(radius, r.random_range(0.0..std::f64::consts::TAU));
                errs.push(truncation_error(alpha, d, ncav, 2 * ncav)?);
            }
            let max = errs.iter().cloned().fold(0.0, f64::max);
            let mean = errs.iter().sum::<f64>() / samples as f64;
            print(json!({
                "d": d,
                "n_cavity": ncav,
                "n_reference": 2 * ncav,
                "samples": samples,
                "alpha_max": alpha_max,
                "mean_error": mean,
                "max_error": max,
            }));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 2 } else { 3 })
        }
    }
}
