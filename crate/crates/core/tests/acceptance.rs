//! Acceptance suite. Runs every criterion in sequence, prints one PASS/FAIL
//! line each and exits non-zero if any failed.

use std::f64::consts::{LN_2, PI};
use std::time::Instant;

use rand::Rng as _;
use snapqv::compile::{
    exact_compile, givens_native_error, native_compile, state_infidelity,
};
use snapqv::experiment::{evaluate, post_select, ExperimentConfig, Mode};
use snapqv::hilbert::{displacement_by_generator, displacement_matrix_n, frame_potential, haar_unitary};
use snapqv::lindblad::{
    evolve_pure, evolve_until, DensityMatrix, DephasingConvention, IntegratorConfig, NoiseModel,
};
use snapqv::metrics::{hog_score, ideal_distribution, xeb_denominator, xeb_normalized, DistributionPair};
use snapqv::pulse::{default_displacement_envelope, displacement_schedule, single_level_snap_schedule, PulseSchedule};
use snapqv::rng::rng_from_seed;
use snapqv::stats::{
    bayesian_bootstrap, beta_mean_var, chebyshev_n, component_mean_var, heavy_posterior, posterior, CountVector, Prior,
};
use snapqv::{UnitaryEnsemble, C64};

const CHI: f64 = 2.0 * PI * 1e6;

struct Outcome {
    pass: bool,
    detail: String,
}

fn check(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Least-squares slope of log y against log x.
fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

fn exact_round_trip() -> Outcome {
    let mut rng = rng_from_seed(101);
    let mut worst = 0.0f64;
    let mut counts_ok = true;
    for d in [2usize, 4, 8] {
        for _ in 0..50 {
            let u = haar_unitary(d, &mut rng);
            let seq = exact_compile(&u).expect("exact compile");
            let w = seq.unitary(d).expect("sequence unitary");
            worst = worst.max(w.frobenius_distance(&u));
            counts_ok &= seq.count_snaps() == d && seq.count_givens() == d * (d - 1) / 2;
        }
    }
    check(
        worst < 1e-9 && counts_ok,
        format!("max reconstruction error {worst:.2e} (< 1e-9), gate counts exact: {counts_ok}"),
    )
}

fn givens_native() -> Outcome {
    let thetas: Vec<f64> = (0..9).map(|i| 0.01 * 20f64.powf(i as f64 / 8.0)).collect();
    let mut slopes = Vec::new();
    for k in [0usize, 3] {
        let errs: Vec<f64> = thetas
            .iter()
            .map(|&t| givens_native_error(k, t, 1, 60, k + 2).expect("native error"))
            .collect();
        slopes.push(loglog_slope(&thetas, &errs));
    }
    let ds = [2usize, 4, 8, 16];
    let mut rng = rng_from_seed(202);
    let mut counts = Vec::new();
    for &d in &ds {
        let mut total = 0.0;
        let samples = 3;
        for _ in 0..samples {
            let u = haar_unitary(d, &mut rng);
            total += native_compile(&u, 1e-3).expect("native compile").gate_count() as f64;
        }
        counts.push(total / samples as f64);
    }
    let dsf: Vec<f64> = ds.iter().map(|&d| d as f64).collect();
    let exponent = loglog_slope(&dsf, &counts);
    let slope_ok = slopes.iter().all(|s| (s - 6.0).abs() <= 0.3);
    check(
        slope_ok && exponent <= 2.7,
        format!(
            "error slopes k=0: {:.3}, k=3: {:.3} (6 ± 0.3); gate counts {:?} -> exponent {exponent:.3} (<= 2.7)",
            slopes[0], slopes[1], counts
        ),
    )
}

fn displacement_oracle() -> Outcome {
    // Reference exponential on a space large enough that its top-left
    // 25 block is converged for |α| < 5√2.
    let mut rng = rng_from_seed(303);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let alpha = c(rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0));
        let lag = displacement_matrix_n(alpha, 60).expect("laguerre");
        let gen = displacement_by_generator(alpha, 260).expect("generator");
        for i in 0..25 {
            for j in 0..25 {
                worst = worst.max((lag.get(i, j) - gen.get(i, j)).norm());
            }
        }
    }
    check(worst < 1e-8, format!("max entrywise difference {worst:.2e} (< 1e-8)"))
}

fn frame_potentials() -> Outcome {
    let mut worst = 0.0f64;
    let mut lines = Vec::new();
    for d in [4usize, 8] {
        let ens = UnitaryEnsemble::haar(d, 500, 404 + d as u64);
        let mut ratios = Vec::new();
        for t in 1..=4u32 {
            let fact: f64 = (1..=t).map(f64::from).product();
            let r = frame_potential(&ens, t) / fact;
            worst = worst.max((r - 1.0).abs());
            ratios.push(format!("{r:.3}"));
        }
        lines.push(format!("d={d}: F/t! = [{}]", ratios.join(", ")));
    }
    check(worst <= 0.25, format!("{}; max deviation {worst:.3} (<= 0.25)", lines.join("; ")))
}

fn collision_statistic() -> Outcome {
    let d = 16;
    let mut rng = rng_from_seed(505);
    let pairs: Vec<DistributionPair> = (0..1000)
        .map(|_| {
            let q = ideal_distribution(&haar_unitary(d, &mut rng));
            DistributionPair::new(q.clone(), q).expect("pair")
        })
        .collect();
    let v = xeb_denominator(&pairs).expect("denominator");
    let want = (d as f64 - 1.0) / (d as f64 + 1.0);
    check((v - want).abs() <= 0.05, format!("d·E[q·q] − 1 = {v:.4} vs {want:.4} (± 0.05)"))
}

fn hog_calibration() -> Outcome {
    let d = 32;
    let mut rng = rng_from_seed(606);
    let qs: Vec<Vec<f64>> = (0..500).map(|_| ideal_distribution(&haar_unitary(d, &mut rng))).collect();
    let ideal: Vec<DistributionPair> =
        qs.iter().map(|q| DistributionPair::new(q.clone(), q.clone()).expect("pair")).collect();
    let uniform: Vec<DistributionPair> = qs
        .iter()
        .map(|q| DistributionPair::new(q.clone(), vec![1.0 / d as f64; d]).expect("pair"))
        .collect();
    let h_ideal = hog_score(&ideal).expect("hog");
    let h_unif = hog_score(&uniform).expect("hog");
    let target = (1.0 + LN_2) / 2.0;
    check(
        (h_ideal - target).abs() <= 0.05 && (h_unif - 0.5).abs() <= 0.02,
        format!("p = q: {h_ideal:.4} vs {target:.4} (± 0.05); uniform p: {h_unif:.4} (0.5 ± 0.02)"),
    )
}

fn lindblad_oracle() -> Outcome {
    let icfg = IntegratorConfig::default();
    let idle = PulseSchedule::empty(CHI).expect("schedule");
    let mut drift = 0.0f64;

    let mut cav = vec![c(0.0, 0.0); 4];
    cav[0] = c(1.0, 0.0);
    let excited = DensityMatrix::product_pure(&cav, true).expect("state");
    let noise = NoiseModel::relaxation_only(150e-6).expect("noise");
    let (rho, rep) = evolve_until(&excited, &idle, 100e-6, &noise, &icfg, None).expect("evolve");
    drift = drift.max(rep.trace_drift);
    let pop = rho.get(1, 1).re;
    let want = (-2.0f64 / 3.0).exp();
    let decay_err = (pop - want).abs();

    // Equal superposition of |0,g⟩ and |0,e⟩ under pure dephasing.
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let mut psi = vec![c(0.0, 0.0); 8];
    psi[0] = c(h, 0.0);
    psi[1] = c(h, 0.0);
    let plus = DensityMatrix::pure(&psi).expect("state");
    let mut deph_err = 0.0f64;
    for conv in [DephasingConvention::MatchT2, DephasingConvention::DoubledRate] {
        let noise = NoiseModel {
            t1: 150e-6,
            t2: 35e-6,
            dephasing: conv,
        };
        let (rho, rep) = evolve_until(&plus, &idle, 20e-6, &noise, &icfg, None).expect("evolve");
        drift = drift.max(rep.trace_drift);
        let want = 0.5 * (-noise.coherence_decay_rate() * 20e-6).exp();
        deph_err = deph_err.max((rho.get(0, 1).norm() - want).abs());
        if conv == DephasingConvention::MatchT2 {
            deph_err = deph_err.max((rho.get(0, 1).norm() - 0.5 * (-20.0f64 / 35.0).exp()).abs());
        }
    }

    // A driven run for the drift bound.
    let env = default_displacement_envelope();
    let sched = displacement_schedule(c(1.0, 0.5), &env, CHI).expect("schedule");
    let vac = {
        let mut v = vec![c(0.0, 0.0); 30];
        v[0] = c(1.0, 0.0);
        v
    };
    let ground = DensityMatrix::product_pure(&vac, false).expect("state");
    let (_, rep) = evolve_until(&ground, &sched, 2e-6, &NoiseModel::new(10e-6, 5e-6).expect("noise"), &icfg, None)
        .expect("evolve");
    drift = drift.max(rep.trace_drift);

    check(
        decay_err <= 1e-3 && deph_err <= 1e-3 && drift < 1e-7,
        format!(
            "excited population {pop:.6} vs {want:.6} (± 1e-3); dephasing error {deph_err:.2e} (<= 1e-3); max trace drift {drift:.2e} (< 1e-7)"
        ),
    )
}

fn pulse_fidelity() -> Outcome {
    let icfg = IntegratorConfig::default();
    let n = 60;
    let alpha = c(1.0, 0.0);
    let sched = displacement_schedule(alpha, &default_displacement_envelope(), CHI).expect("schedule");
    let exact = displacement_matrix_n(alpha, n).expect("displacement");
    // Process fidelity over inputs |0⟩..|7⟩, comparing full output columns
    // since D(α) carries the upper inputs out of the block.
    let inputs = 8;
    let mut tr = c(0.0, 0.0);
    for j in 0..inputs {
        let mut psi = vec![c(0.0, 0.0); 2 * n];
        psi[2 * j] = c(1.0, 0.0);
        let out = evolve_pure(&psi, &sched, &icfg).expect("evolve");
        tr += (0..n).map(|i| exact.get(i, j).conj() * out[2 * i]).sum::<C64>();
    }
    let disp_fid = (tr / inputs as f64).norm_sqr();

    // Fock-selective SNAP on |1⟩ at peak drive |χ|/10.
    let theta = PI / 2.0;
    let snap = single_level_snap_schedule(1, theta, CHI, None).expect("schedule");
    let peak = snap
        .segments
        .iter()
        .map(|s| s.envelope.value(s.envelope.duration / 2.0))
        .fold(0.0f64, f64::max);
    let mut psi = vec![c(0.0, 0.0); 2 * n];
    psi[2] = c(1.0, 0.0);
    let out = evolve_pure(&psi, &snap, &icfg).expect("evolve");
    let amp = out[2];
    let phase_err = (amp / C64::from_polar(1.0, theta)).arg().abs();
    let leakage = 1.0 - amp.norm_sqr();
    check(
        disp_fid >= 0.999 && phase_err < 0.05 && leakage < 1e-2,
        format!(
            "displacement process fidelity {disp_fid:.6} (>= 0.999); SNAP χ/|ε| = {:.2}: phase error {phase_err:.2e} rad (< 0.05), leakage {leakage:.2e} (< 1e-2)",
            CHI / peak
        ),
    )
}

fn statistics() -> Outcome {
    let n = chebyshev_n(0.1, 0.99).expect("chebyshev");
    let counts = CountVector::new(vec![40, 3, 0, 17, 25, 9]);
    let d = 6.0;
    let total = 94.0;
    let post = posterior(&counts, Prior::InverseDimension).expect("posterior");
    let mut worst = 0.0f64;
    for (i, &k) in counts.counts.iter().enumerate() {
        let (m, v) = component_mean_var(&post, i).expect("component");
        let a = k as f64 + 1.0 / d;
        let s = total + 1.0;
        worst = worst.max((m - a / s).abs()).max((v - a * (s - a) / (s * s * (s + 1.0))).abs());
    }
    let heavy = vec![0usize, 3, 4];
    let agg = post.aggregate(&[heavy.clone(), vec![1, 2, 5]]).expect("aggregate");
    let (am, av) = component_mean_var(&agg, 0).expect("component");
    let (a, b) = heavy_posterior(&counts, &heavy).expect("beta");
    let (bm, bv) = beta_mean_var(a, b);
    let (hm, hv) = (82.5 / 95.0, 82.5 * 12.5 / (95.0 * 95.0 * 96.0));
    worst = worst.max((am - hm).abs()).max((av - hv).abs()).max((bm - hm).abs()).max((bv - hv).abs());
    let boot = bayesian_bootstrap(&[0.37; 50], 2000, 9).expect("bootstrap");
    check(
        n == 2498 && worst <= 1e-12 && boot.std == 0.0,
        format!("chebyshev_n(0.1, 0.99) = {n} (2498); closed-form error {worst:.1e} (<= 1e-12); constant bootstrap std {:e}", boot.std),
    )
}

fn trend_reproduction() -> Outcome {
    let base = ExperimentConfig {
        n_unitaries: 50,
        mode: Mode::Pulse,
        seed: 2024,
        ..Default::default()
    };
    let mut notes = Vec::new();

    let t1s = [10e-6, 25e-6, 50e-6, 100e-6];
    let relax = ExperimentConfig {
        d_values: vec![8],
        t1_values: t1s.to_vec(),
        ..base.clone()
    };
    let sel8 = post_select(&relax, 8).expect("post-selection");
    notes.push(format!("d=8 pass rate {}/{}", sel8.accepted.len(), sel8.n_candidates));
    let mut hogs = Vec::new();
    for (i, noise) in relax.noise_points().expect("grid").iter().enumerate() {
        let r = evaluate(&relax, &sel8, 8, noise, i).expect("evaluate");
        hogs.push(r.aggregates.expect("aggregates").hog.value);
    }
    let monotone = hogs.windows(2).all(|w| w[1] >= w[0]);
    let pass_hog = hogs[3] > 2.0 / 3.0;
    notes.push(format!(
        "HOG at T1 = 10/25/50/100 us: {}",
        hogs.iter().map(|h| format!("{h:.4}")).collect::<Vec<_>>().join(", ")
    ));

    let deph = ExperimentConfig {
        t1_values: vec![150e-6],
        t2_values: vec![300e-6, 35e-6],
        ..base
    };
    let mut ordered = true;
    for d in [4usize, 8] {
        let sel = if d == 8 { sel8.clone() } else { post_select(&deph, d).expect("post-selection") };
        let pts = deph.noise_points().expect("grid");
        let weak = evaluate(&deph, &sel, d, &pts[0], 0).expect("evaluate").aggregates.expect("aggregates");
        let strong = evaluate(&deph, &sel, d, &pts[1], 1).expect("evaluate").aggregates.expect("aggregates");
        ordered &= weak.hog.value >= strong.hog.value && weak.xeb_n.value >= strong.xeb_n.value;
        notes.push(format!(
            "d={d} T2 300 vs 35 us: HOG {:.4} vs {:.4}, XEB_n {:.4} vs {:.4}",
            weak.hog.value, strong.hog.value, weak.xeb_n.value, strong.xeb_n.value
        ));
    }
    check(
        monotone && pass_hog && ordered,
        format!(
            "{}; monotone {monotone}, HOG(100 us) > 2/3 {pass_hog}, dephasing ordering {ordered}",
            notes.join("; ")
        ),
    )
}

fn gate_level_sanity() -> Outcome {
    let cfg = ExperimentConfig {
        d_values: vec![4],
        n_unitaries: 100,
        mode: Mode::Gate,
        seed: 1111,
        ..Default::default()
    };
    let sel = post_select(&cfg, 4).expect("post-selection");
    let noise = NoiseModel::noiseless();
    let rec = evaluate(&cfg, &sel, 4, &noise, 0).expect("evaluate");
    let agg = rec.aggregates.expect("aggregates");
    let ideal: Vec<DistributionPair> = sel
        .accepted
        .iter()
        .map(|a| DistributionPair::new(a.q.clone(), a.q.clone()).expect("pair"))
        .collect();
    let h_exact = hog_score(&ideal).expect("hog");
    assert!((xeb_normalized(&ideal).expect("xeb_n") - 1.0).abs() < 1e-12);
    // Independent check of the recorded compilation quality.
    let worst_inf = sel
        .accepted
        .iter()
        .map(|a| {
            let psi = snapqv::compile::ansatz_state(&a.compilation.sequence, cfg.n_cavity).expect("state");
            let mut t = a.target.clone();
            t.resize(cfg.n_cavity, c(0.0, 0.0));
            state_infidelity(&t, &psi)
        })
        .fold(0.0f64, f64::max);
    check(
        agg.xeb_n.value >= 0.95 && (agg.hog.value - h_exact).abs() <= 0.02 && worst_inf < 0.01,
        format!(
            "pass rate {}/{}; XEB_n {:.4} (>= 0.95); HOG {:.4} vs exact {h_exact:.4} (± 0.02); worst accepted infidelity {worst_inf:.2e}",
            sel.accepted.len(),
            sel.n_candidates,
            agg.xeb_n.value,
            agg.hog.value
        ),
    )
}

fn main() {
    let criteria: [(&str, f64, fn() -> Outcome); 11] = [
        ("exact compiler round trip", 30.0, exact_round_trip),
        ("Givens native decomposition", 300.0, givens_native),
        ("displacement oracle equivalence", 120.0, displacement_oracle),
        ("frame potential", 300.0, frame_potentials),
        ("Haar collision statistic", 60.0, collision_statistic),
        ("HOG calibration", 60.0, hog_calibration),
        ("Lindblad oracle", 60.0, lindblad_oracle),
        ("pulse-level gate fidelity", 300.0, pulse_fidelity),
        ("statistics", 60.0, statistics),
        ("trend reproduction (pulse level)", 5400.0, trend_reproduction),
        ("gate-level end-to-end", 600.0, gate_level_sanity),
    ];
    let filter: Option<usize> = std::env::var("ACCEPTANCE_ONLY").ok().and_then(|s| s.parse().ok());
    let mut failed = 0;
    for (i, (name, budget, f)) in criteria.iter().enumerate() {
        let id = i + 1;
        if filter.is_some_and(|only| only != id) {
            continue;
        }
        let start = Instant::now();
        let out = f();
        let secs = start.elapsed().as_secs_f64();
        let pass = out.pass && secs <= *budget;
        if !pass {
            failed += 1;
        }
        println!(
            "{} [{id:>2}] {name}: {} [{secs:.1} s of {budget:.0} s]",
            if pass { "PASS" } else { "FAIL" },
            out.detail
        );
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
