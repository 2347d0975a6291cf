//! Compilation onto SNAP and displacement gates.
//!
//! [`exact_compile`] factors any unitary into SNAPs and SO(2) Givens
//! rotations, [`givens_to_native`] and [`native_compile`] lower the rotations
//! to SNAPs and displacements, and [`variational_state_prep`] fits the
//! k-layer ansatz D(α_{k+1}) S(θ_k) ⋯ S(θ_1) D(α_1) to a target state.

mod exact;
mod native;
mod optimize;
mod variational;

pub use exact::exact_compile;
pub use native::{givens_native_error, givens_to_native, native_compile, native_error_constant, NativeCompilation};
pub use optimize::{bfgs, BfgsOutcome};
pub use variational::{ansatz_state, variational_state_prep, OptimizerConfig};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{displacement_matrix_n, givens_matrix, snap_matrix_n, Operator};
use crate::lindblad::DensityMatrix;
use crate::C64;

/// One element of a gate sequence.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "gate", rename_all = "snake_case")]
pub enum Gate {
    Displacement { alpha: C64 },
    Snap { thetas: Vec<f64> },
    Givens { level: usize, angle: f64 },
}

impl Gate {
    pub fn matrix(&self, n: usize) -> Result<Operator> {
        match self {
            Gate::Displacement { alpha } => displacement_matrix_n(*alpha, n),
            Gate::Snap { thetas } => snap_matrix_n(thetas, n),
            Gate::Givens { level, angle } => givens_matrix(*level, *angle, n),
        }
    }

    pub fn is_native(&self) -> bool {
        !matches!(self, Gate::Givens { .. })
    }
}

/// Gates in application order: `elements[0]` acts first.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GateSequence {
    pub d: usize,
    pub elements: Vec<Gate>,
}

impl GateSequence {
    pub fn new(d: usize, elements: Vec<Gate>) -> Result<Self> {
        let seq = GateSequence { d, elements };
        seq.validate()?;
        Ok(seq)
    }

    pub fn validate(&self) -> Result<()> {
        if self.d == 0 {
            return Err(Error::invalid("sequence dimension must be positive"));
        }
        for g in &self.elements {
            match g {
                Gate::Displacement { alpha } => {
                    if !alpha.re.is_finite() || !alpha.im.is_finite() {
                        return Err(Error::NonFinite("displacement amplitude"));
                    }
                }
                Gate::Snap { thetas } => {
                    if thetas.len() > self.d {
                        return Err(Error::invalid(format!(
                            "SNAP with {} phases in a d = {} sequence",
                            thetas.len(),
                            self.d
                        )));
                    }
                    if thetas.iter().any(|t| !t.is_finite()) {
                        return Err(Error::NonFinite("SNAP phases"));
                    }
                }
                Gate::Givens { level, angle } => {
                    if *level + 2 > self.d {
                        return Err(Error::invalid(format!("Givens level {level} outside d = {}", self.d)));
                    }
                    if !angle.is_finite() {
                        return Err(Error::NonFinite("Givens angle"));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn count_snaps(&self) -> usize {
        self.elements.iter().filter(|g| matches!(g, Gate::Snap { .. })).count()
    }

    pub fn count_displacements(&self) -> usize {
        self.elements
            .iter()
            .filter(|g| matches!(g, Gate::Displacement { .. }))
            .count()
    }

    pub fn count_givens(&self) -> usize {
        self.elements.iter().filter(|g| matches!(g, Gate::Givens { .. })).count()
    }

    /// Ordered product of the gate matrices at truncation `n`.
    pub fn unitary(&self, n: usize) -> Result<Operator> {
        let mut u = Operator::identity(n);
        for g in &self.elements {
            u = &g.matrix(n)? * &u;
        }
        Ok(u)
    }

    /// Apply the sequence to a state vector of length `n`.
    pub fn apply(&self, psi: &[C64]) -> Result<Vec<C64>> {
        let n = psi.len();
        let mut v = nalgebra::DVector::from_column_slice(psi);
        for g in &self.elements {
            v = g.matrix(n)?.matrix() * v;
        }
        Ok(v.iter().copied().collect())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("gate sequence serialization cannot fail")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let seq: GateSequence =
            serde_json::from_str(s).map_err(|e| Error::Format(format!("gate sequence JSON: {e}")))?;
        seq.validate()?;
        Ok(seq)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompilationResult {
    pub sequence: GateSequence,
    pub infidelity: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// 1 − |⟨a|b⟩|², with the shorter vector zero-padded.
pub fn state_infidelity(a: &[C64], b: &[C64]) -> f64 {
    let ov: C64 = a.iter().zip(b).map(|(x, y)| x.conj() * y).sum();
    (1.0 - ov.norm_sqr()).max(0.0)
}

/// 1 − |Tr(U†V)/d|² on the top-left d block of `v`.
pub fn unitary_infidelity(u: &Operator, v: &Operator) -> f64 {
    let d = u.dim();
    let mut tr = C64::new(0.0, 0.0);
    for j in 0..d {
        for i in 0..d {
            tr += u.get(i, j).conj() * v.get(i, j);
        }
    }
    (1.0 - (tr / d as f64).norm_sqr()).max(0.0)
}

/// ⟨ψ|ρ|ψ⟩ with ψ zero-padded to the dimension of ρ.
pub fn state_fidelity(rho: &DensityMatrix, psi: &[C64]) -> Result<f64> {
    let n = rho.dim();
    if psi.len() > n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: psi.len(),
        });
    }
    let m = rho.matrix();
    let mut f = C64::new(0.0, 0.0);
    for (i, a) in psi.iter().enumerate() {
        for (j, b) in psi.iter().enumerate() {
            f += a.conj() * m[(i, j)] * b;
        }
    }
    Ok(f.re)
}
