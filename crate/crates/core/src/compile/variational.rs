use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::optimize::{bfgs, Objective};
use super::{state_infidelity, CompilationResult, Gate, GateSequence};
use crate::error::{Error, Result};
use crate::hilbert::{displacement_matrix_n, DEFAULT_N_CAVITY};
use crate::C64;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerConfig {
    /// Random restarts after the all-zero starting point.
    pub restarts: usize,
    pub max_iterations: usize,
    /// Central-difference step for every parameter.
    pub fd_step: f64,
    pub grad_tol: f64,
    /// Skip the remaining restarts once the best infidelity is below this.
    pub early_stop: f64,
    /// Infidelity below which a result counts as converged.
    pub threshold: f64,
    pub n_cavity: usize,
    /// Initial displacements are drawn uniformly from (−range, range).
    pub alpha_range: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            restarts: 16,
            max_iterations: 400,
            fd_step: 1e-6,
            grad_tol: 1e-10,
            early_stop: 1e-8,
            threshold: 0.01,
            n_cavity: DEFAULT_N_CAVITY,
            alpha_range: 1.0,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.fd_step <= 0.0 || self.threshold <= 0.0 || self.alpha_range <= 0.0 || self.max_iterations == 0 {
            return Err(Error::invalid("optimizer step, threshold, range and iterations must be positive"));
        }
        if self.n_cavity == 0 {
            return Err(Error::invalid("n_cavity must be positive"));
        }
        Ok(())
    }
}

/// Parameters are laid out as [α_1, …, α_{k+1}, θ_1 (d entries), …, θ_k].
struct Ansatz<'a> {
    target: &'a [C64],
    d: usize,
    k: usize,
    n: usize,
    h: f64,
}

impl Ansatz<'_> {
    fn alphas<'x>(&self, x: &'x [f64]) -> &'x [f64] {
        &x[..=self.k]
    }

    fn thetas<'x>(&self, x: &'x [f64], layer: usize) -> &'x [f64] {
        let start = self.k + 1 + layer * self.d;
        &x[start..start + self.d]
    }

    fn displacement(&self, alpha: f64) -> DMatrix<C64> {
        displacement_matrix_n(C64::new(alpha, 0.0), self.n)
            .expect("optimizer parameters stay finite")
            .into_matrix()
    }

    fn snap(&self, v: &mut DVector<C64>, thetas: &[f64]) {
        for (i, t) in thetas.iter().enumerate() {
            v[i] *= C64::from_polar(1.0, *t);
        }
    }

    fn overlap(&self, v: &DVector<C64>) -> C64 {
        self.target.iter().zip(v.iter()).map(|(a, b)| a.conj() * b).sum()
    }
}

impl Objective for Ansatz<'_> {
    fn value(&mut self, x: &[f64]) -> f64 {
        let alphas = self.alphas(x);
        let mut v = self.displacement(alphas[0]).column(0).into_owned();
        for l in 0..self.k {
            self.snap(&mut v, self.thetas(x, l));
            v = self.displacement(alphas[l + 1]) * v;
        }
        1.0 - self.overlap(&v).norm_sqr()
    }

    /// Central differences. Perturbing one SNAP phase changes the final
    /// overlap linearly, and perturbing one displacement only needs the
    /// perturbed matrix applied to the cached input of that layer, so every
    /// f(x ± h e_j) is evaluated without re-running the full circuit.
    fn gradient(&mut self, x: &[f64]) -> Vec<f64> {
        let (k, h) = (self.k, self.h);
        let alphas = self.alphas(x).to_vec();
        let mats: Vec<DMatrix<C64>> = alphas.iter().map(|&a| self.displacement(a)).collect();

        // inputs[l] enters D(α_{l+1}); outputs[l] = D(α_{l+1}) inputs[l].
        let mut e0 = DVector::<C64>::zeros(self.n);
        e0[0] = C64::new(1.0, 0.0);
        let mut inputs = Vec::with_capacity(k + 1);
        let mut outputs = Vec::with_capacity(k + 1);
        inputs.push(e0);
        outputs.push(&mats[0] * &inputs[0]);
        for l in 0..k {
            let mut u = outputs[l].clone();
            self.snap(&mut u, self.thetas(x, l));
            outputs.push(&mats[l + 1] * &u);
            inputs.push(u);
        }

        // back[l] satisfies overlap = ⟨back[l] | outputs[l]⟩.
        let mut back = vec![DVector::<C64>::zeros(self.n); k + 1];
        back[k] = DVector::from_column_slice(self.target);
        for l in (0..k).rev() {
            let mut b = mats[l + 1].adjoint() * &back[l + 1];
            for (i, t) in self.thetas(x, l).iter().enumerate() {
                b[i] *= C64::from_polar(1.0, -*t);
            }
            back[l] = b;
        }
        let ov: C64 = back[k].iter().zip(outputs[k].iter()).map(|(a, b)| a.conj() * b).sum();
        let f_of = |o: C64| 1.0 - o.norm_sqr();

        let mut grad = vec![0.0; x.len()];
        for (i, &a) in alphas.iter().enumerate() {
            let mut fs = [0.0; 2];
            for (slot, sign) in [1.0, -1.0].into_iter().enumerate() {
                let v = self.displacement(a + sign * h) * &inputs[i];
                let o: C64 = back[i].iter().zip(v.iter()).map(|(p, q)| p.conj() * q).sum();
                fs[slot] = f_of(o);
            }
            grad[i] = (fs[0] - fs[1]) / (2.0 * h);
        }
        for l in 0..k {
            // c = D(α_{l+2})† back[l+1], so overlap = Σ_i c_i* e^{iθ_i} outputs[l]_i.
            let c = mats[l + 1].adjoint() * &back[l + 1];
            for (i, &t) in self.thetas(x, l).iter().enumerate() {
                let w = c[i].conj() * outputs[l][i];
                let base = C64::from_polar(1.0, t);
                let plus = ov + (C64::from_polar(1.0, t + h) - base) * w;
                let minus = ov + (C64::from_polar(1.0, t - h) - base) * w;
                grad[k + 1 + l * self.d + i] = (f_of(plus) - f_of(minus)) / (2.0 * h);
            }
        }
        grad
    }
}

/// D(α_{k+1}) S(θ_k) ⋯ S(θ_1) D(α_1)|0⟩ as a gate sequence.
fn ansatz_sequence(d: usize, k: usize, x: &[f64]) -> Result<GateSequence> {
    let mut elements = Vec::with_capacity(2 * k + 1);
    elements.push(Gate::Displacement { alpha: C64::new(x[0], 0.0) });
    for l in 0..k {
        let start = k + 1 + l * d;
        elements.push(Gate::Snap {
            thetas: x[start..start + d].to_vec(),
        });
        elements.push(Gate::Displacement { alpha: C64::new(x[l + 1], 0.0) });
    }
    GateSequence::new(d, elements)
}

/// State prepared by `seq` from vacuum at truncation `n`.
pub fn ansatz_state(seq: &GateSequence, n: usize) -> Result<Vec<C64>> {
    let mut vac = vec![C64::new(0.0, 0.0); n];
    vac[0] = C64::new(1.0, 0.0);
    seq.apply(&vac)
}

/// Fit the k-layer SNAP + displacement ansatz to `target` (length d) by
/// multi-start BFGS. The all-zero point is tried first, followed by
/// `opt.restarts` random starts; the best result is returned whether or not
/// it meets the threshold.
pub fn variational_state_prep<R: Rng + ?Sized>(
    target: &[C64],
    k: usize,
    opt: &OptimizerConfig,
    rng: &mut R,
) -> Result<CompilationResult> {
    opt.validate()?;
    let d = target.len();
    if k == 0 {
        return Err(Error::invalid("need at least one ansatz layer"));
    }
    if d == 0 || d > opt.n_cavity {
        return Err(Error::invalid(format!("target length {d} incompatible with n_cavity {}", opt.n_cavity)));
    }
    if target.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NonFinite("target state"));
    }
    let norm: f64 = target.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if (norm - 1.0).abs() > 1e-9 {
        return Err(Error::invalid(format!("target norm {norm} is not 1")));
    }
    let mut padded = target.to_vec();
    padded.resize(opt.n_cavity, C64::new(0.0, 0.0));

    let mut obj = Ansatz {
        target: &padded,
        d,
        k,
        n: opt.n_cavity,
        h: opt.fd_step,
    };
    let n_params = k + 1 + k * d;
    let zeros = vec![0.0; n_params];
    let mut best_f = obj.value(&zeros);
    let mut best_x = zeros;
    let mut iterations = 0;

    if best_f >= opt.early_stop {
        for _ in 0..opt.restarts {
            let x0: Vec<f64> = (0..n_params)
                .map(|j| {
                    if j <= k {
                        rng.random_range(-opt.alpha_range..opt.alpha_range)
                    } else {
                        rng.random_range(-std::f64::consts::PI..std::f64::consts::PI)
                    }
                })
                .collect();
            let out = bfgs(&mut obj, &x0, opt.max_iterations, opt.grad_tol, opt.early_stop * 0.1);
            iterations += out.iterations;
            if out.f < best_f {
                best_f = out.f;
                best_x = out.x;
            }
            if best_f < opt.early_stop {
                break;
            }
        }
    }

    let sequence = ansatz_sequence(d, k, &best_x)?;
    let state = ansatz_state(&sequence, opt.n_cavity)?;
    let infidelity = state_infidelity(&padded, &state);
    Ok(CompilationResult {
        sequence,
        infidelity,
        iterations,
        converged: infidelity < opt.threshold,
    })
}
