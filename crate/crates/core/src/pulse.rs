//! Physical drive schedules for displacement and SNAP gates, and the
//! rotating-frame Hamiltonian they generate.
//!
//! In the frame rotating at the dressed cavity and qubit frequencies,
//!
//! H′(t) = χ a†a ⊗ |e⟩⟨e|
//!       + ε₁(t) [e^{−i(δ₁t + φ₁)} a† + h.c.]
//!       + Σ_tones ε₂(t) [e^{−i(δ_j t + φ_j)} σ⁺ + h.c.],
//!
//! with t the absolute schedule time. Cavity and qubit drives never overlap.

use std::f64::consts::{FRAC_PI_2, PI, SQRT_2};
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::compile::{Gate, GateSequence};
use crate::error::{Error, Result};
use crate::hilbert::{FockSpaceConfig, Operator};
use crate::C64;

/// Area ∫ε₂ of one π rotation. With the drive written as ε(σ⁺ + σ⁻) the
/// Rabi frequency is 2ε, so a π rotation needs area π/2.
pub const PI_PULSE_AREA: f64 = FRAC_PI_2;

/// Selectivity rule for number-selective qubit tones: |ε₂| ≤ |χ| / 10.
pub const WEAK_DRIVE_RATIO: f64 = 10.0;

/// Sign relating the second π pulse's phase to the SNAP angle: tone j of the
/// second pulse carries phase π − SNAP_PHASE_SIGN·θ_j. A drive phase of π − θ
/// imprints e^{−iθ} on the selected level in this frame; the sign is flipped
/// so the schedule implements S(θ) as defined by the gate matrix.
pub const SNAP_PHASE_SIGN: f64 = -1.0;

pub const DEFAULT_DISPLACEMENT_DURATION: f64 = 100e-9;
pub const DEFAULT_DISPLACEMENT_RISE: f64 = 10e-9;
pub const DEFAULT_GAUSSIAN_TRUNCATION: f64 = 2.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum Shape {
    /// Gaussian centred in the window, cut at ±`truncation` σ.
    GaussianTruncated { truncation: f64 },
    /// Raised-cosine ramps of length `rise` around a flat top.
    FlatTop { rise: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    pub shape: Shape,
    /// Seconds.
    pub duration: f64,
    /// Peak value in rad/s.
    pub amplitude: f64,
}

impl Envelope {
    pub fn gaussian(duration: f64, truncation: f64, amplitude: f64) -> Result<Self> {
        let e = Envelope {
            shape: Shape::GaussianTruncated { truncation },
            duration,
            amplitude,
        };
        e.validate()?;
        Ok(e)
    }

    pub fn flat_top(duration: f64, rise: f64, amplitude: f64) -> Result<Self> {
        let e = Envelope {
            shape: Shape::FlatTop { rise },
            duration,
            amplitude,
        };
        e.validate()?;
        Ok(e)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return Err(Error::invalid(format!("envelope duration {} must be positive", self.duration)));
        }
        if !(self.amplitude >= 0.0 && self.amplitude.is_finite()) {
            return Err(Error::invalid(format!("envelope amplitude {} must be non-negative", self.amplitude)));
        }
        match self.shape {
            Shape::GaussianTruncated { truncation } if !(truncation > 0.0 && truncation.is_finite()) => {
                Err(Error::invalid("Gaussian truncation must be positive"))
            }
            Shape::FlatTop { rise } if !(rise >= 0.0 && 2.0 * rise <= self.duration) => {
                Err(Error::invalid("flat-top rise must lie in [0, duration/2]"))
            }
            _ => Ok(()),
        }
    }

    fn sigma(&self, truncation: f64) -> f64 {
        self.duration / (2.0 * truncation)
    }

    /// ε(τ) for τ measured from the start of the envelope; zero outside.
    pub fn value(&self, tau: f64) -> f64 {
        if !(0.0..=self.duration).contains(&tau) {
            return 0.0;
        }
        match self.shape {
            Shape::GaussianTruncated { truncation } => {
                let s = self.sigma(truncation);
                let x = (tau - 0.5 * self.duration) / s;
                self.amplitude * (-0.5 * x * x).exp()
            }
            Shape::FlatTop { rise } => {
                let edge = tau.min(self.duration - tau);
                if edge >= rise {
                    self.amplitude
                } else {
                    0.5 * self.amplitude * (1.0 - (PI * edge / rise).cos())
                }
            }
        }
    }

    /// Closed-form ∫ε over the envelope.
    pub fn integral(&self) -> f64 {
        self.amplitude * self.unit_integral()
    }

    /// Integral of the same shape at unit peak amplitude.
    pub fn unit_integral(&self) -> f64 {
        match self.shape {
            Shape::GaussianTruncated { truncation } => {
                self.sigma(truncation) * (2.0 * PI).sqrt() * libm::erf(truncation / SQRT_2)
            }
            Shape::FlatTop { rise } => self.duration - rise,
        }
    }

    /// Same shape and duration, with the amplitude set so the area is `area`.
    pub fn with_area(&self, area: f64) -> Envelope {
        Envelope {
            amplitude: area / self.unit_integral(),
            ..*self
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Channel {
    Cavity,
    Qubit,
}

/// One carrier sharing its segment's envelope.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tone {
    /// Carrier detuning from the dressed frequency, rad/s.
    pub detuning: f64,
    /// Radians.
    pub phase: f64,
}

/// A drive on one channel. Several tones may share the envelope, which is
/// how a multiplexed SNAP pulse is represented.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DriveSegment {
    pub channel: Channel,
    /// Seconds from the start of the schedule.
    pub start: f64,
    pub envelope: Envelope,
    pub tones: Vec<Tone>,
}

impl DriveSegment {
    pub fn end(&self) -> f64 {
        self.start + self.envelope.duration
    }

    /// Complex coefficient multiplying a† (cavity) or σ⁺ (qubit) at absolute
    /// time `t`.
    pub fn coefficient(&self, t: f64) -> C64 {
        let eps = self.envelope.value(t - self.start);
        if eps == 0.0 {
            return C64::new(0.0, 0.0);
        }
        self.tones
            .iter()
            .map(|tone| C64::from_polar(eps, -(tone.detuning * t + tone.phase)))
            .sum()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PulseSchedule {
    pub segments: Vec<DriveSegment>,
    pub total_duration: f64,
    /// Dispersive shift, rad/s.
    pub chi: f64,
}

/// Piece of the schedule with at most one active segment.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Interval {
    pub start: f64,
    pub end: f64,
    pub segment: Option<usize>,
}

impl PulseSchedule {
    pub fn new(mut segments: Vec<DriveSegment>, chi: f64) -> Result<Self> {
        segments.sort_by(|a, b| a.start.total_cmp(&b.start));
        let total = segments.iter().map(DriveSegment::end).fold(0.0, f64::max);
        let s = PulseSchedule {
            segments,
            total_duration: total,
            chi,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn empty(chi: f64) -> Result<Self> {
        Self::new(Vec::new(), chi)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.chi.is_finite() && self.chi != 0.0) {
            return Err(Error::invalid("chi must be finite and nonzero"));
        }
        let mut prev_end = 0.0f64;
        for (i, s) in self.segments.iter().enumerate() {
            s.envelope.validate()?;
            if !(s.start >= 0.0 && s.start.is_finite()) {
                return Err(Error::invalid(format!("segment {i} starts at {}", s.start)));
            }
            if s.tones.is_empty() {
                return Err(Error::invalid(format!("segment {i} has no tones")));
            }
            if s.tones.iter().any(|t| !t.detuning.is_finite() || !t.phase.is_finite()) {
                return Err(Error::NonFinite("tone parameters"));
            }
            if s.channel == Channel::Cavity && s.tones.len() != 1 {
                return Err(Error::invalid("cavity segments carry a single tone"));
            }
            let slack = 1e-12 * s.end().max(1e-9);
            if i > 0 && s.start < prev_end - slack {
                return Err(Error::invalid(format!("segment {i} overlaps its predecessor")));
            }
            prev_end = prev_end.max(s.end());
        }
        let expected = prev_end;
        if (self.total_duration - expected).abs() > 1e-12 * expected.max(1e-9) {
            return Err(Error::invalid("total duration must equal the last segment end"));
        }
        Ok(())
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    pub fn count(&self, channel: Channel) -> usize {
        self.segments.iter().filter(|s| s.channel == channel).count()
    }

    /// Shift every segment by `offset` and append.
    pub fn append(&mut self, other: &PulseSchedule, offset: f64) -> Result<()> {
        for s in &other.segments {
            let mut s = s.clone();
            s.start += offset;
            self.segments.push(s);
        }
        let chi = self.chi;
        *self = PulseSchedule::new(std::mem::take(&mut self.segments), chi)?;
        Ok(())
    }

    /// Consecutive intervals covering [0, total_duration].
    pub fn intervals(&self) -> Vec<Interval> {
        let mut out = Vec::new();
        let mut t = 0.0;
        for (i, s) in self.segments.iter().enumerate() {
            if s.start > t {
                out.push(Interval {
                    start: t,
                    end: s.start,
                    segment: None,
                });
            }
            out.push(Interval {
                start: s.start.max(t),
                end: s.end(),
                segment: Some(i),
            });
            t = s.end();
        }
        out
    }

    /// (cavity a† coefficient, qubit σ⁺ coefficient) at absolute time `t`.
    pub fn coefficients(&self, t: f64) -> (C64, C64) {
        let mut cav = C64::new(0.0, 0.0);
        let mut qub = C64::new(0.0, 0.0);
        for s in &self.segments {
            if t >= s.start && t <= s.end() {
                match s.channel {
                    Channel::Cavity => cav += s.coefficient(t),
                    Channel::Qubit => qub += s.coefficient(t),
                }
            }
        }
        (cav, qub)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("schedule serialization cannot fail")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let sched: PulseSchedule =
            serde_json::from_str(s).map_err(|e| Error::Format(format!("schedule JSON: {e}")))?;
        sched.validate()?;
        Ok(sched)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&s)
    }
}

/// Flat-top cavity envelope used for displacements unless overridden.
pub fn default_displacement_envelope() -> Envelope {
    Envelope {
        shape: Shape::FlatTop {
            rise: DEFAULT_DISPLACEMENT_RISE,
        },
        duration: DEFAULT_DISPLACEMENT_DURATION,
        amplitude: 1.0,
    }
}

/// Single-tone π-pulse duration whose ±2σ Gaussian peaks at |χ|/10.
pub fn default_pi_duration(chi: f64) -> f64 {
    let unit = Envelope {
        shape: Shape::GaussianTruncated {
            truncation: DEFAULT_GAUSSIAN_TRUNCATION,
        },
        duration: 1.0,
        amplitude: 1.0,
    }
    .unit_integral();
    PI_PULSE_AREA * WEAK_DRIVE_RATIO / (chi.abs() * unit)
}

/// Resonant cavity drive with φ₁ = −π/2 − arg α and ∫ε₁ = |α|, so that
/// −i e^{−iφ₁} ∫ε₁ = α. The amplitude of `envelope` is ignored.
pub fn displacement_schedule(alpha: C64, envelope: &Envelope, chi: f64) -> Result<PulseSchedule> {
    if !alpha.re.is_finite() || !alpha.im.is_finite() {
        return Err(Error::NonFinite("displacement amplitude"));
    }
    let template = Envelope { amplitude: 1.0, ..*envelope };
    template.validate()?;
    if alpha.norm() == 0.0 {
        return PulseSchedule::empty(chi);
    }
    let seg = DriveSegment {
        channel: Channel::Cavity,
        start: 0.0,
        envelope: template.with_area(alpha.norm()),
        tones: vec![Tone {
            detuning: 0.0,
            phase: -FRAC_PI_2 - alpha.arg(),
        }],
    };
    PulseSchedule::new(vec![seg], chi)
}

fn pi_envelope(duration: f64) -> Envelope {
    Envelope {
        shape: Shape::GaussianTruncated {
            truncation: DEFAULT_GAUSSIAN_TRUNCATION,
        },
        duration,
        amplitude: 1.0,
    }
    .with_area(PI_PULSE_AREA)
}

fn check_chi(chi: f64) -> Result<()> {
    if chi == 0.0 || !chi.is_finite() {
        Err(Error::invalid("chi must be finite and nonzero"))
    } else {
        Ok(())
    }
}

fn resolve_pi_duration(chi: f64, base: Option<f64>) -> Result<f64> {
    let t = base.unwrap_or_else(|| default_pi_duration(chi));
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::invalid("π-pulse duration must be positive"));
    }
    let peak = pi_envelope(t).amplitude;
    if peak > chi.abs() / WEAK_DRIVE_RATIO * (1.0 + 1e-9) {
        return Err(Error::invalid(format!(
            "π pulse of {t:.3e} s peaks at {peak:.3e} rad/s, above |χ|/{WEAK_DRIVE_RATIO}"
        )));
    }
    Ok(t)
}

/// Two back-to-back conditional π pulses on the listed levels. Each pulse
/// lasts `duration`; the first has all phases 0, the second phase π − s·θ_n.
fn conditional_pi_pair(levels: &[(usize, f64)], chi: f64, duration: f64) -> Result<PulseSchedule> {
    let env = pi_envelope(duration);
    let first = DriveSegment {
        channel: Channel::Qubit,
        start: 0.0,
        envelope: env,
        tones: levels
            .iter()
            .map(|&(n, _)| Tone {
                detuning: n as f64 * chi,
                phase: 0.0,
            })
            .collect(),
    };
    let second = DriveSegment {
        channel: Channel::Qubit,
        start: duration,
        envelope: env,
        tones: levels
            .iter()
            .map(|&(n, theta)| Tone {
                detuning: n as f64 * chi,
                phase: PI - SNAP_PHASE_SIGN * theta,
            })
            .collect(),
    };
    PulseSchedule::new(vec![first, second], chi)
}

/// Multiplexed SNAP on levels 0..d: each π pulse lasts `base_pi_duration·√d`
/// and every tone carries 1/√d of the single-tone amplitude.
pub fn snap_schedule(thetas: &[f64], chi: f64, base_pi_duration: Option<f64>) -> Result<PulseSchedule> {
    if thetas.is_empty() {
        return Err(Error::invalid("SNAP needs at least one level"));
    }
    if thetas.iter().any(|t| !t.is_finite()) {
        return Err(Error::NonFinite("SNAP phases"));
    }
    check_chi(chi)?;
    let base = resolve_pi_duration(chi, base_pi_duration)?;
    let levels: Vec<(usize, f64)> = thetas.iter().copied().enumerate().collect();
    conditional_pi_pair(&levels, chi, base * (thetas.len() as f64).sqrt())
}

/// SNAP acting on a single Fock level with the single-tone π duration.
pub fn single_level_snap_schedule(level: usize, theta: f64, chi: f64, base_pi_duration: Option<f64>) -> Result<PulseSchedule> {
    if !theta.is_finite() {
        return Err(Error::NonFinite("SNAP phase"));
    }
    check_chi(chi)?;
    let base = resolve_pi_duration(chi, base_pi_duration)?;
    conditional_pi_pair(&[(level, theta)], chi, base)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScheduleOptions {
    /// Shape and duration for displacements; the amplitude is recomputed.
    pub displacement_envelope: Envelope,
    /// Single-tone π duration; derived from χ when absent.
    pub pi_duration: Option<f64>,
    /// Idle time inserted after each gate, seconds.
    pub buffer: f64,
}

impl Default for ScheduleOptions {
    fn default() -> Self {
        ScheduleOptions {
            displacement_envelope: default_displacement_envelope(),
            pi_duration: None,
            buffer: 0.0,
        }
    }
}

/// Concatenate the gate schedules of a native sequence in order.
pub fn schedule_for_sequence(seq: &GateSequence, chi: f64, opts: &ScheduleOptions) -> Result<PulseSchedule> {
    seq.validate()?;
    check_chi(chi)?;
    if !(opts.buffer >= 0.0 && opts.buffer.is_finite()) {
        return Err(Error::invalid("buffer must be non-negative"));
    }
    let mut out = PulseSchedule::empty(chi)?;
    let mut cursor = 0.0;
    for g in &seq.elements {
        let part = match g {
            Gate::Displacement { alpha } => displacement_schedule(*alpha, &opts.displacement_envelope, chi)?,
            Gate::Snap { thetas } => snap_schedule(thetas, chi, opts.pi_duration)?,
            Gate::Givens { .. } => {
                return Err(Error::invalid(
                    "Givens rotations have no direct pulse; lower the sequence with native_compile first",
                ))
            }
        };
        if part.is_empty() {
            continue;
        }
        out.append(&part, cursor)?;
        cursor += part.total_duration + opts.buffer;
    }
    Ok(out)
}

/// Dense H′(t) on cavity ⊗ qubit.
pub fn drive_hamiltonian(t: f64, schedule: &PulseSchedule, cfg: &FockSpaceConfig) -> Result<Operator> {
    if !(t >= 0.0 && t <= schedule.total_duration) {
        return Err(Error::invalid(format!(
            "time {t} outside the schedule [0, {}]",
            schedule.total_duration
        )));
    }
    let n = cfg.n_cavity;
    let dim = 2 * n;
    let mut h = DMatrix::<C64>::zeros(dim, dim);
    for k in 0..n {
        h[(2 * k + 1, 2 * k + 1)] = C64::new(schedule.chi * k as f64, 0.0);
    }
    let (cav, qub) = schedule.coefficients(t);
    for k in 0..n {
        for q in 0..2 {
            if k + 1 < n {
                let v = cav * ((k + 1) as f64).sqrt();
                h[(2 * (k + 1) + q, 2 * k + q)] += v;
                h[(2 * k + q, 2 * (k + 1) + q)] += v.conj();
            }
        }
        h[(2 * k + 1, 2 * k)] += qub;
        h[(2 * k, 2 * k + 1)] += qub.conj();
    }
    Operator::from_matrix(h)
}
