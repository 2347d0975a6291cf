//! Master-equation evolution of the cavity ⊗ qubit density matrix.
//!
//! ρ̇ = −i[H′(t), ρ] + γ₁ D[σ⁻]ρ + c γ_φ D[σz]ρ, with D[L]ρ = LρL† − ½{L†L, ρ}.
//!
//! The integrator works in the interaction picture of the dispersive term
//! H₀ = χ a†a ⊗ |e⟩⟨e|, which is diagonal with energies E(n, q) = χ n q.
//! That removes the fast phase rotation of the excited branch from the
//! dynamics; the drive and jump terms pick up explicit phases e^{iχ·(…)t}.

mod integrator;

pub use integrator::{IntegratorConfig, Method, StepStats};

use std::io::Write;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{on_qubit, sigma_minus, sigma_z, FockSpaceConfig, Operator};
use crate::pulse::{Channel, PulseSchedule};
use crate::C64;
use integrator::{Stepper, System};

/// Hermitian, unit-trace, positive semidefinite matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix(DMatrix<C64>);

impl DensityMatrix {
    /// Accepts a matrix that is Hermitian to 1e−10 with trace within 1e−8
    /// of one. Positivity is checked separately by [`DensityMatrix::validate`].
    pub fn from_matrix(m: DMatrix<C64>) -> Result<Self> {
        let op = Operator::from_matrix(m)?;
        let herm = op.hermiticity_error();
        if herm > 1e-10 {
            return Err(Error::invalid(format!("density matrix not Hermitian ({herm:.2e})")));
        }
        let tr = op.trace();
        if (tr.re - 1.0).abs() > 1e-8 || tr.im.abs() > 1e-8 {
            return Err(Error::invalid(format!("density matrix trace {tr}")));
        }
        Ok(DensityMatrix(op.into_matrix()))
    }

    pub fn pure(psi: &[C64]) -> Result<Self> {
        let v = nalgebra::DVector::from_column_slice(psi);
        let norm = v.norm();
        if (norm - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(format!("state norm {norm} is not 1")));
        }
        Self::from_matrix(&v * v.adjoint())
    }

    /// |ψ_cavity⟩ ⊗ |q⟩ with q = 0 for |g⟩ and 1 for |e⟩.
    pub fn product_pure(cavity: &[C64], qubit_excited: bool) -> Result<Self> {
        let mut psi = vec![C64::new(0.0, 0.0); 2 * cavity.len()];
        for (n, c) in cavity.iter().enumerate() {
            psi[2 * n + usize::from(qubit_excited)] = *c;
        }
        Self::pure(&psi)
    }

    /// Uniform mixture of the first `d` basis states of a `dim`-dimensional space.
    pub fn maximally_mixed(dim: usize, d: usize) -> Result<Self> {
        if d == 0 || d > dim {
            return Err(Error::invalid("need 0 < d <= dim"));
        }
        let mut m = DMatrix::zeros(dim, dim);
        for i in 0..d {
            m[(i, i)] = C64::new(1.0 / d as f64, 0.0);
        }
        Ok(DensityMatrix(m))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.0
    }

    pub fn trace(&self) -> C64 {
        self.0.trace()
    }

    pub fn purity(&self) -> f64 {
        self.0.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.0[(i, j)]
    }

    /// Checks Hermiticity (1e−10), trace (1e−8) and eigenvalues ≥ −1e−8.
    pub fn validate(&self) -> Result<()> {
        let checked = Self::from_matrix(self.0.clone())?;
        let herm = (&checked.0 + checked.0.adjoint()) * C64::new(0.5, 0.0);
        let min = herm
            .symmetric_eigenvalues()
            .iter()
            .fold(f64::INFINITY, |m, v| m.min(*v));
        if min < -1e-8 {
            return Err(Error::invalid(format!("density matrix has eigenvalue {min:.3e}")));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DephasingConvention {
    /// Collapse operator √(γ_φ/2) σz: coherences decay at γ₁/2 + γ_φ = 1/T₂.
    #[default]
    MatchT2,
    /// Collapse operator √(2γ_φ) σz, a four times faster pure-dephasing
    /// contribution (γ₁/2 + 4γ_φ).
    DoubledRate,
}

impl DephasingConvention {
    pub fn coefficient(self) -> f64 {
        match self {
            DephasingConvention::MatchT2 => 0.5,
            DephasingConvention::DoubledRate => 2.0,
        }
    }
}

/// Qubit relaxation and dephasing times in seconds; infinity disables a channel.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub t1: f64,
    pub t2: f64,
    #[serde(default)]
    pub dephasing: DephasingConvention,
}

impl NoiseModel {
    pub fn new(t1: f64, t2: f64) -> Result<Self> {
        let n = NoiseModel {
            t1,
            t2,
            dephasing: DephasingConvention::default(),
        };
        n.validate()?;
        Ok(n)
    }

    pub fn noiseless() -> Self {
        NoiseModel {
            t1: f64::INFINITY,
            t2: f64::INFINITY,
            dephasing: DephasingConvention::default(),
        }
    }

    /// T₂ = 2T₁: relaxation only.
    pub fn relaxation_only(t1: f64) -> Result<Self> {
        Self::new(t1, 2.0 * t1)
    }

    pub fn validate(&self) -> Result<()> {
        if self.t1.is_nan() || self.t2.is_nan() || self.t1 <= 0.0 || self.t2 <= 0.0 {
            return Err(Error::invalid("T1 and T2 must be positive"));
        }
        if self.t2 > 2.0 * self.t1 * (1.0 + 1e-12) {
            return Err(Error::invalid(format!(
                "T2 = {} s exceeds 2·T1 = {} s",
                self.t2,
                2.0 * self.t1
            )));
        }
        Ok(())
    }

    pub fn gamma1(&self) -> f64 {
        1.0 / self.t1
    }

    /// γ_φ = 1/T₂ − 1/(2T₁), clamped at zero against rounding.
    pub fn gamma_phi(&self) -> f64 {
        (1.0 / self.t2 - 0.5 / self.t1).max(0.0)
    }

    /// Rate multiplying D[σz] in the master equation.
    pub fn dephasing_rate(&self) -> f64 {
        self.dephasing.coefficient() * self.gamma_phi()
    }

    /// Decay rate of a qubit coherence |g⟩⟨e|.
    pub fn coherence_decay_rate(&self) -> f64 {
        0.5 * self.gamma1() + 2.0 * self.dephasing_rate()
    }
}

/// √γ₁ (I ⊗ σ⁻) and √(c γ_φ) (I ⊗ σz), omitting disabled channels.
pub fn collapse_operators(noise: &NoiseModel, cfg: &FockSpaceConfig) -> Result<Vec<Operator>> {
    noise.validate()?;
    let mut out = Vec::new();
    let g1 = noise.gamma1();
    if g1 > 0.0 {
        let op = on_qubit(&sigma_minus(), cfg).into_matrix() * C64::new(g1.sqrt(), 0.0);
        out.push(Operator::from_matrix(op)?);
    }
    let gp = noise.dephasing_rate();
    if gp > 0.0 {
        let op = on_qubit(&sigma_z(), cfg).into_matrix() * C64::new(gp.sqrt(), 0.0);
        out.push(Operator::from_matrix(op)?);
    }
    Ok(out)
}

/// Drive couplings of the interaction-picture Hamiltonian at one instant.
struct Couplings {
    /// (a†)_{(n+1,q),(n,q)} coefficient, indexed [2n + q].
    cav: Vec<C64>,
    /// (σ⁺)_{(n,e),(n,g)} coefficient, indexed [n].
    qub: Vec<C64>,
    cav_on: bool,
    qub_on: bool,
}

struct Model<'a> {
    n: usize,
    chi: f64,
    schedule: &'a PulseSchedule,
    segment: Option<usize>,
    gamma1: f64,
    dephasing: f64,
    /// e^{iχnt} for n < N.
    phase: Vec<C64>,
    coup: Couplings,
    scratch: Vec<C64>,
}

impl<'a> Model<'a> {
    fn new(n: usize, schedule: &'a PulseSchedule, noise: &NoiseModel) -> Self {
        Model {
            n,
            chi: schedule.chi,
            schedule,
            segment: None,
            gamma1: if noise.t1.is_finite() { noise.gamma1() } else { 0.0 },
            dephasing: noise.dephasing_rate(),
            phase: vec![C64::new(1.0, 0.0); n],
            coup: Couplings {
                cav: vec![C64::new(0.0, 0.0); 2 * n],
                qub: vec![C64::new(0.0, 0.0); n],
                cav_on: false,
                qub_on: false,
            },
            scratch: vec![C64::new(0.0, 0.0); 4 * n * n],
        }
    }

    fn prepare(&mut self, t: f64) {
        for (k, p) in self.phase.iter_mut().enumerate() {
            *p = C64::from_polar(1.0, self.chi * k as f64 * t);
        }
        self.coup.cav_on = false;
        self.coup.qub_on = false;
        let Some(idx) = self.segment else { return };
        let seg = &self.schedule.segments[idx];
        let c = seg.coefficient(t);
        match seg.channel {
            Channel::Cavity => {
                self.coup.cav_on = true;
                // The excited branch gains e^{iχt} per added photon.
                let w = self.phase.get(1).copied().unwrap_or(C64::new(1.0, 0.0));
                for k in 0..self.n - 1 {
                    let v = c * ((k + 1) as f64).sqrt();
                    self.coup.cav[2 * k] = v;
                    self.coup.cav[2 * k + 1] = v * w;
                }
            }
            Channel::Qubit => {
                self.coup.qub_on = true;
                for k in 0..self.n {
                    self.coup.qub[k] = c * self.phase[k];
                }
            }
        }
    }

    /// (H_I x)_i for a column-accessor `x`.
    #[inline]
    fn apply_h(&self, i: usize, x: impl Fn(usize) -> C64) -> C64 {
        let (k, q) = (i / 2, i % 2);
        let mut acc = C64::new(0.0, 0.0);
        if self.coup.cav_on {
            if k > 0 {
                acc += self.coup.cav[2 * (k - 1) + q] * x(i - 2);
            }
            if k + 1 < self.n {
                acc += self.coup.cav[2 * k + q].conj() * x(i + 2);
            }
        }
        if self.coup.qub_on {
            if q == 1 {
                acc += self.coup.qub[k] * x(i - 1);
            } else {
                acc += self.coup.qub[k].conj() * x(i + 1);
            }
        }
        acc
    }
}

impl System for Model<'_> {
    fn rhs(&mut self, t: f64, y: &[C64], dy: &mut [C64]) {
        self.prepare(t);
        let dim = 2 * self.n;
        let minus_i = C64::new(0.0, -1.0);
        let driven = self.coup.cav_on || self.coup.qub_on;
        let mut p = std::mem::take(&mut self.scratch);
        if driven {
            // p = H ρ, row by row.
            for i in 0..dim {
                for j in 0..dim {
                    p[i * dim + j] = self.apply_h(i, |r| y[r * dim + j]);
                }
            }
        }
        let g1 = self.gamma1;
        let deph = 2.0 * self.dephasing;
        for i in 0..dim {
            let (ni, qi) = (i / 2, i % 2);
            for j in 0..dim {
                let (nj, qj) = (j / 2, j % 2);
                let idx = i * dim + j;
                let rho = y[idx];
                let mut v = if driven {
                    // −i(Hρ − ρH) with ρH = (Hρ)† for Hermitian ρ.
                    minus_i * (p[idx] - p[j * dim + i].conj())
                } else {
                    C64::new(0.0, 0.0)
                };
                v -= rho * (0.5 * g1 * (qi + qj) as f64);
                if qi != qj {
                    v -= rho * deph;
                }
                if g1 > 0.0 && qi == 0 && qj == 0 {
                    let ee = y[(2 * ni + 1) * dim + 2 * nj + 1];
                    v += ee * self.phase[ni].conj() * self.phase[nj] * g1;
                }
                dy[idx] = v;
            }
        }
        self.scratch = p;
    }

    fn accept(&mut self, y: &mut [C64]) {
        let dim = 2 * self.n;
        for i in 0..dim {
            y[i * dim + i].im = 0.0;
            for j in i + 1..dim {
                let a = y[i * dim + j];
                let b = y[j * dim + i];
                let m = (a + b.conj()) * 0.5;
                y[i * dim + j] = m;
                y[j * dim + i] = m.conj();
            }
        }
    }
}

/// Noise-free Schrödinger evolution of a state vector, same frame.
struct PureModel<'a>(Model<'a>);

impl System for PureModel<'_> {
    fn rhs(&mut self, t: f64, y: &[C64], dy: &mut [C64]) {
        let m = &mut self.0;
        m.prepare(t);
        let minus_i = C64::new(0.0, -1.0);
        for (i, out) in dy.iter_mut().enumerate() {
            *out = minus_i * m.apply_h(i, |r| y[r]);
        }
    }
}

/// Summary of one evolution.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EvolutionReport {
    pub steps: StepStats,
    /// |Tr ρ(T) − Tr ρ(0)|.
    pub trace_drift: f64,
}

fn energy(i: usize, chi: f64) -> f64 {
    chi * (i / 2) as f64 * (i % 2) as f64
}

fn check_product_dim(dim: usize) -> Result<usize> {
    if dim < 2 || dim % 2 != 0 {
        return Err(Error::invalid(format!("dimension {dim} is not cavity ⊗ qubit")));
    }
    Ok(dim / 2)
}

/// Integrate the master equation over the whole schedule.
pub fn evolve(rho0: &DensityMatrix, schedule: &PulseSchedule, noise: &NoiseModel, icfg: &IntegratorConfig) -> Result<DensityMatrix> {
    evolve_with_report(rho0, schedule, noise, icfg).map(|(r, _)| r)
}

pub fn evolve_with_report(
    rho0: &DensityMatrix,
    schedule: &PulseSchedule,
    noise: &NoiseModel,
    icfg: &IntegratorConfig,
) -> Result<(DensityMatrix, EvolutionReport)> {
    evolve_until(rho0, schedule, schedule.total_duration, noise, icfg, None)
}

/// As [`evolve`], continuing with no drive until `t_end` ≥ total_duration.
/// When `trajectory` is given, (time, excited population, purity) rows are
/// written at interval boundaries.
pub fn evolve_until(
    rho0: &DensityMatrix,
    schedule: &PulseSchedule,
    t_end: f64,
    noise: &NoiseModel,
    icfg: &IntegratorConfig,
    mut trajectory: Option<&mut dyn Write>,
) -> Result<(DensityMatrix, EvolutionReport)> {
    noise.validate()?;
    icfg.validate()?;
    schedule.validate()?;
    if !(t_end >= schedule.total_duration) || !t_end.is_finite() {
        return Err(Error::invalid("evolution end precedes the schedule end"));
    }
    let dim = rho0.dim();
    let n = check_product_dim(dim)?;
    let chi = schedule.chi;

    let mut y: Vec<C64> = Vec::with_capacity(dim * dim);
    for i in 0..dim {
        for j in 0..dim {
            y.push(rho0.get(i, j));
        }
    }
    let tr0: C64 = (0..dim).map(|i| y[i * dim + i]).sum();

    let mut model = Model::new(n, schedule, noise);
    let mut stepper = Stepper::new(*icfg, dim * dim);
    let mut intervals = schedule.intervals();
    if t_end > schedule.total_duration {
        intervals.push(crate::pulse::Interval {
            start: schedule.total_duration,
            end: t_end,
            segment: None,
        });
    }
    if let Some(w) = trajectory.as_deref_mut() {
        write_trajectory_row(w, 0.0, &y, dim)?;
    }
    for iv in &intervals {
        model.segment = iv.segment;
        stepper.integrate(&mut model, &mut y, iv.start, iv.end)?;
        if let Some(w) = trajectory.as_deref_mut() {
            write_trajectory_row(w, iv.end, &y, dim)?;
        }
    }

    let tr1: C64 = (0..dim).map(|i| y[i * dim + i]).sum();
    let m = DMatrix::from_fn(dim, dim, |i, j| {
        y[i * dim + j] * C64::from_polar(1.0, -(energy(i, chi) - energy(j, chi)) * t_end)
    });
    let report = EvolutionReport {
        steps: stepper.stats,
        trace_drift: (tr1 - tr0).norm(),
    };
    Ok((DensityMatrix(m), report))
}

fn write_trajectory_row(w: &mut dyn Write, t: f64, y: &[C64], dim: usize) -> Result<()> {
    let excited: f64 = (0..dim / 2).map(|k| y[(2 * k + 1) * dim + 2 * k + 1].re).sum();
    let purity: f64 = y.iter().map(|z| z.norm_sqr()).sum();
    writeln!(w, "{t:.9e},{excited:.12e},{purity:.12e}").map_err(|e| Error::io("<trajectory>", e))
}

/// Noise-free evolution of a pure state over the schedule.
pub fn evolve_pure(psi0: &[C64], schedule: &PulseSchedule, icfg: &IntegratorConfig) -> Result<Vec<C64>> {
    icfg.validate()?;
    schedule.validate()?;
    let n = check_product_dim(psi0.len())?;
    let noise = NoiseModel::noiseless();
    let mut model = PureModel(Model::new(n, schedule, &noise));
    let mut stepper = Stepper::new(*icfg, psi0.len());
    let mut y = psi0.to_vec();
    for iv in schedule.intervals() {
        model.0.segment = iv.segment;
        stepper.integrate(&mut model, &mut y, iv.start, iv.end)?;
    }
    let t = schedule.total_duration;
    let chi = schedule.chi;
    Ok(y
        .iter()
        .enumerate()
        .map(|(i, v)| v * C64::from_polar(1.0, -energy(i, chi) * t))
        .collect())
}

/// Partial trace over the qubit.
pub fn trace_out_qubit(rho: &DensityMatrix, cfg: &FockSpaceConfig) -> Result<DensityMatrix> {
    let n = cfg.n_cavity;
    if rho.dim() != 2 * n {
        return Err(Error::DimensionMismatch {
            expected: 2 * n,
            found: rho.dim(),
        });
    }
    let m = DMatrix::from_fn(n, n, |a, b| rho.get(2 * a, 2 * b) + rho.get(2 * a + 1, 2 * b + 1));
    Ok(DensityMatrix(m))
}

/// Populations of the first `d` Fock levels, clamped to [0, 1], and the
/// leaked remainder 1 − Σ p. The probabilities are not renormalized.
pub fn fock_distribution(rho_cavity: &DensityMatrix, d: usize) -> Result<(Vec<f64>, f64)> {
    if d == 0 || d > rho_cavity.dim() {
        return Err(Error::invalid(format!("cannot read {d} levels from dimension {}", rho_cavity.dim())));
    }
    let probs: Vec<f64> = (0..d).map(|i| rho_cavity.get(i, i).re.clamp(0.0, 1.0)).collect();
    let leakage = 1.0 - probs.iter().sum::<f64>();
    Ok((probs, leakage))
}

/// Populations of the excited qubit branch.
pub fn excited_population(rho: &DensityMatrix) -> f64 {
    (0..rho.dim() / 2).map(|k| rho.get(2 * k + 1, 2 * k + 1).re).sum()
}
