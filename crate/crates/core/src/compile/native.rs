use std::collections::HashMap;
use std::sync::OnceLock;

use nalgebra::DMatrix;

use super::{exact_compile, Gate, GateSequence};
use crate::error::{Error, Result};
use crate::hilbert::{displacement_matrix_n, givens_matrix, Operator, DEFAULT_N_CAVITY};
use crate::C64;

const MAX_ATTEMPTS: usize = 10;
const NEGLIGIBLE_ANGLE: f64 = 1e-14;

/// m repetitions of V_k(α) = D(α) R_π(k) D(−2α) R_π(k) D(α) with
/// α = θ / (4 m √(k+1)), where R_π(k) is a SNAP with phase π on levels 0..=k.
///
/// To leading order V_k(α) = exp(4α√(k+1) (|k+1⟩⟨k| − |k⟩⟨k+1|)), i.e. the
/// Givens rotation G_k(θ/m); the first correction is third order in θ/m.
pub fn givens_to_native(k: usize, theta: f64, m: usize) -> Result<GateSequence> {
    if m == 0 {
        return Err(Error::invalid("repetition count must be at least 1"));
    }
    if !theta.is_finite() {
        return Err(Error::NonFinite("Givens angle"));
    }
    GateSequence::new(k + 2, native_elements(k, theta, m))
}

fn native_elements(k: usize, theta: f64, m: usize) -> Vec<Gate> {
    let alpha = theta / (4.0 * m as f64 * ((k + 1) as f64).sqrt());
    let flip = Gate::Snap {
        thetas: vec![std::f64::consts::PI; k + 1],
    };
    let mut out = Vec::with_capacity(5 * m);
    for _ in 0..m {
        out.push(Gate::Displacement { alpha: C64::new(alpha, 0.0) });
        out.push(flip.clone());
        out.push(Gate::Displacement { alpha: C64::new(-2.0 * alpha, 0.0) });
        out.push(flip.clone());
        out.push(Gate::Displacement { alpha: C64::new(alpha, 0.0) });
    }
    out
}

/// Squared Frobenius distance between the top-left `block` of the native
/// sequence (simulated at `n_cavity`) and the exact rotation G_k(θ).
pub fn givens_native_error(k: usize, theta: f64, m: usize, n_cavity: usize, block: usize) -> Result<f64> {
    if block < k + 2 || block > n_cavity {
        return Err(Error::invalid("block must cover levels k, k+1 and fit in the cavity"));
    }
    let approx = givens_to_native(k, theta, m)?.unitary(n_cavity)?.block(block);
    let exact = givens_matrix(k, theta, block)?;
    Ok(approx.frobenius_distance(&exact).powi(2))
}

/// Constant c of the single-repetition error model c·θ⁶, calibrated once
/// against the exact rotation.
pub fn native_error_constant() -> f64 {
    static C: OnceLock<f64> = OnceLock::new();
    *C.get_or_init(|| {
        let theta: f64 = 0.1;
        givens_native_error(0, theta, 1, DEFAULT_N_CAVITY, 2).expect("calibration parameters are valid") / theta.powi(6)
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct NativeCompilation {
    pub sequence: GateSequence,
    /// 1 − |Tr(U† W)/d|² with W the simulated sequence on the d block.
    pub infidelity: f64,
    /// Repetition count chosen for each non-trivial Givens rotation.
    pub repetitions: Vec<usize>,
    pub attempts: usize,
}

impl NativeCompilation {
    pub fn gate_count(&self) -> usize {
        self.sequence.len()
    }
}

/// Exact compilation followed by native lowering of every rotation, with the
/// repetition counts sized so the unitary infidelity on the d block stays
/// below `error_budget`.
///
/// With the per-rotation error model c θ⁶ / m⁴, the allocation minimizing
/// Σ m subject to a total error E is m_r ∝ |θ_r|^{6/5}. The resulting
/// sequence is simulated and the internal error target tightened until the
/// measured infidelity meets the budget.
pub fn native_compile(u: &Operator, error_budget: f64) -> Result<NativeCompilation> {
    native_compile_at(u, error_budget, DEFAULT_N_CAVITY)
}

pub fn native_compile_at(u: &Operator, error_budget: f64, n_cavity: usize) -> Result<NativeCompilation> {
    if !(error_budget > 0.0 && error_budget.is_finite()) {
        return Err(Error::invalid("error budget must be positive"));
    }
    let d = u.dim();
    if d > n_cavity {
        return Err(Error::invalid("unitary larger than the cavity truncation"));
    }
    let exact = exact_compile(u)?;
    let angles: Vec<f64> = exact
        .elements
        .iter()
        .filter_map(|g| match g {
            Gate::Givens { angle, .. } if angle.abs() >= NEGLIGIBLE_ANGLE => Some(angle.abs()),
            _ => None,
        })
        .collect();
    let c = native_error_constant();
    let weight: f64 = angles.iter().map(|t| t.powf(1.2)).sum();
    let mut target = error_budget * d as f64;
    let mut cache = DisplacementCache::new(n_cavity);
    let mut last_err = f64::INFINITY;

    for attempt in 1..=MAX_ATTEMPTS {
        let kappa = (c * weight / target).powf(0.25);
        let reps: Vec<usize> = angles
            .iter()
            .map(|t| ((kappa * t.powf(1.2)).ceil() as usize).max(1))
            .collect();
        let sequence = lower(&exact, &reps)?;
        let infidelity = block_infidelity(u, &sequence, &mut cache)?;
        if infidelity < error_budget {
            return Ok(NativeCompilation {
                sequence,
                infidelity,
                repetitions: reps,
                attempts: attempt,
            });
        }
        last_err = infidelity;
        target *= 0.9 * error_budget / infidelity;
    }
    Err(Error::invalid(format!(
        "native compilation did not reach budget {error_budget:.1e} (last infidelity {last_err:.3e})"
    )))
}

fn lower(exact: &GateSequence, reps: &[usize]) -> Result<GateSequence> {
    let mut out = Vec::new();
    let mut r = reps.iter();
    for g in &exact.elements {
        match g {
            Gate::Givens { level, angle } => {
                if angle.abs() >= NEGLIGIBLE_ANGLE {
                    let m = *r.next().expect("one repetition count per rotation");
                    out.extend(native_elements(*level, *angle, m));
                }
            }
            Gate::Snap { thetas } => {
                if thetas.iter().any(|t| *t != 0.0) {
                    out.push(g.clone());
                }
            }
            Gate::Displacement { .. } => out.push(g.clone()),
        }
    }
    GateSequence::new(exact.d, merge_adjacent(out))
}

/// Fuse neighbouring SNAPs, and neighbouring displacements along the same
/// phase-space axis (which commute exactly).
pub(crate) fn merge_adjacent(gates: Vec<Gate>) -> Vec<Gate> {
    let mut out: Vec<Gate> = Vec::with_capacity(gates.len());
    for g in gates {
        match (out.last_mut(), &g) {
            (Some(Gate::Displacement { alpha: a }), Gate::Displacement { alpha: b }) if (a.conj() * b).im == 0.0 => {
                *a += b;
                if a.norm() < 1e-15 {
                    out.pop();
                }
            }
            (Some(Gate::Snap { thetas: a }), Gate::Snap { thetas: b }) => {
                if b.len() > a.len() {
                    a.resize(b.len(), 0.0);
                }
                for (x, y) in a.iter_mut().zip(b) {
                    *x += y;
                }
            }
            _ => out.push(g),
        }
    }
    out
}

struct DisplacementCache {
    n: usize,
    map: HashMap<(u64, u64), DMatrix<C64>>,
}

impl DisplacementCache {
    fn new(n: usize) -> Self {
        DisplacementCache { n, map: HashMap::new() }
    }

    fn get(&mut self, alpha: C64) -> Result<&DMatrix<C64>> {
        let key = (alpha.re.to_bits(), alpha.im.to_bits());
        if !self.map.contains_key(&key) {
            let m = displacement_matrix_n(alpha, self.n)?.into_matrix();
            self.map.insert(key, m);
        }
        Ok(&self.map[&key])
    }
}

/// Propagate the first d basis columns through the native sequence and
/// compare with `u` on the d block.
fn block_infidelity(u: &Operator, seq: &GateSequence, cache: &mut DisplacementCache) -> Result<f64> {
    let d = u.dim();
    let n = cache.n;
    let mut x = DMatrix::<C64>::zeros(n, d);
    for j in 0..d {
        x[(j, j)] = C64::new(1.0, 0.0);
    }
    for g in &seq.elements {
        match g {
            Gate::Displacement { alpha } => {
                x = cache.get(*alpha)? * &x;
            }
            Gate::Snap { thetas } => {
                for (i, t) in thetas.iter().enumerate() {
                    let ph = C64::from_polar(1.0, *t);
                    for j in 0..d {
                        x[(i, j)] *= ph;
                    }
                }
            }
            Gate::Givens { .. } => return Err(Error::invalid("non-native gate in lowered sequence")),
        }
    }
    let mut tr = C64::new(0.0, 0.0);
    for j in 0..d {
        for i in 0..d {
            tr += u.get(i, j).conj() * x[(i, j)];
        }
    }
    Ok((1.0 - (tr / d as f64).norm_sqr()).max(0.0))
}
