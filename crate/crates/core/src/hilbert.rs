//! Truncated Fock-space linear algebra: ladder operators, exact gate
//! matrices, Haar sampling, frame potentials and truncation error.
//!
//! Product-space operators use the ordering cavity ⊗ qubit, so the basis
//! state |n, q⟩ (q = 0 for |g⟩, 1 for |e⟩) has index `2 n + q`.

use std::ops::Mul;
use std::path::Path;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;
use crate::C64;

pub const DEFAULT_N_CAVITY: usize = 60;

/// Fock truncation together with the computational qudit dimension.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FockSpaceConfig {
    pub n_cavity: usize,
    pub d: usize,
}

impl FockSpaceConfig {
    pub fn new(n_cavity: usize, d: usize) -> Result<Self> {
        let cfg = FockSpaceConfig { n_cavity, d };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_d(d: usize) -> Result<Self> {
        Self::new(DEFAULT_N_CAVITY, d)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_cavity == 0 || self.d == 0 {
            return Err(Error::invalid("n_cavity and d must be positive"));
        }
        if self.d > self.n_cavity {
            return Err(Error::invalid(format!(
                "qudit dimension {} exceeds cavity truncation {}",
                self.d, self.n_cavity
            )));
        }
        Ok(())
    }

    /// Dimension of the cavity ⊗ qubit space.
    pub fn product_dim(&self) -> usize {
        2 * self.n_cavity
    }
}

impl Default for FockSpaceConfig {
    fn default() -> Self {
        FockSpaceConfig {
            n_cavity: DEFAULT_N_CAVITY,
            d: 4,
        }
    }
}

/// Dense complex square matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Operator(DMatrix<C64>);

#[derive(Serialize, Deserialize)]
struct OperatorData {
    dim: usize,
    /// Row-major, interleaved real and imaginary parts.
    entries: Vec<f64>,
}

impl Operator {
    pub fn from_matrix(m: DMatrix<C64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::DimensionMismatch {
                expected: m.nrows(),
                found: m.ncols(),
            });
        }
        if m.nrows() == 0 {
            return Err(Error::invalid("operator dimension must be positive"));
        }
        if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite("operator entries"));
        }
        Ok(Operator(m))
    }

    pub fn identity(dim: usize) -> Self {
        Operator(DMatrix::identity(dim, dim))
    }

    pub fn zeros(dim: usize) -> Self {
        Operator(DMatrix::zeros(dim, dim))
    }

    pub fn from_diagonal(diag: &[C64]) -> Self {
        Operator(DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(diag)))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.0
    }

    pub fn get(&self, row: usize, col: usize) -> C64 {
        self.0[(row, col)]
    }

    pub fn adjoint(&self) -> Operator {
        Operator(self.0.adjoint())
    }

    pub fn kron(&self, other: &Operator) -> Operator {
        Operator(self.0.kronecker(&other.0))
    }

    pub fn commutator(&self, other: &Operator) -> Operator {
        Operator(&self.0 * &other.0 - &other.0 * &self.0)
    }

    /// Top-left `d × d` block.
    pub fn block(&self, d: usize) -> Operator {
        Operator(self.0.view((0, 0), (d, d)).into_owned())
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.0.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn frobenius_distance(&self, other: &Operator) -> f64 {
        (&self.0 - &other.0).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn trace(&self) -> C64 {
        self.0.trace()
    }

    /// ‖U†U − I‖_F.
    pub fn unitarity_error(&self) -> f64 {
        let p = self.0.adjoint() * &self.0;
        let n = self.dim();
        let mut s = 0.0;
        for j in 0..n {
            for i in 0..n {
                let target = if i == j { 1.0 } else { 0.0 };
                s += (p[(i, j)] - target).norm_sqr();
            }
        }
        s.sqrt()
    }

    pub fn is_unitary(&self, tol: f64) -> bool {
        self.unitarity_error() < tol
    }

    pub fn ensure_unitary(&self, tol: f64) -> Result<()> {
        let e = self.unitarity_error();
        if e < tol {
            Ok(())
        } else {
            Err(Error::NotUnitary(e))
        }
    }

    /// ‖H − H†‖_F.
    pub fn hermiticity_error(&self) -> f64 {
        (&self.0 - self.0.adjoint()).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Row-major entries, interleaved re/im.
    pub fn to_interleaved(&self) -> Vec<f64> {
        let n = self.dim();
        let mut out = Vec::with_capacity(2 * n * n);
        for i in 0..n {
            for j in 0..n {
                let z = self.0[(i, j)];
                out.push(z.re);
                out.push(z.im);
            }
        }
        out
    }

    pub fn from_interleaved(dim: usize, entries: &[f64]) -> Result<Self> {
        if entries.len() != 2 * dim * dim {
            return Err(Error::DimensionMismatch {
                expected: 2 * dim * dim,
                found: entries.len(),
            });
        }
        let m = DMatrix::from_fn(dim, dim, |i, j| {
            let k = 2 * (i * dim + j);
            C64::new(entries[k], entries[k + 1])
        });
        Operator::from_matrix(m)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&OperatorData {
            dim: self.dim(),
            entries: self.to_interleaved(),
        })
        .expect("operator serialization cannot fail")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let data: OperatorData =
            serde_json::from_str(s).map_err(|e| Error::Format(format!("operator JSON: {e}")))?;
        Operator::from_interleaved(data.dim, &data.entries)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Operator::from_json(&s)
    }
}

impl Mul for &Operator {
    type Output = Operator;

    fn mul(self, rhs: &Operator) -> Operator {
        Operator(&self.0 * &rhs.0)
    }
}

impl Mul for Operator {
    type Output = Operator;

    fn mul(self, rhs: Operator) -> Operator {
        Operator(self.0 * rhs.0)
    }
}

pub fn annihilation(cfg: &FockSpaceConfig) -> Operator {
    annihilation_n(cfg.n_cavity)
}

pub fn annihilation_n(n: usize) -> Operator {
    let mut m = DMatrix::zeros(n, n);
    for k in 1..n {
        m[(k - 1, k)] = C64::new((k as f64).sqrt(), 0.0);
    }
    Operator(m)
}

pub fn creation(cfg: &FockSpaceConfig) -> Operator {
    annihilation(cfg).adjoint()
}

/// σ⁻ = |g⟩⟨e| in the qubit basis (|g⟩, |e⟩).
pub fn sigma_minus() -> Operator {
    let mut m = DMatrix::zeros(2, 2);
    m[(0, 1)] = C64::new(1.0, 0.0);
    Operator(m)
}

pub fn sigma_plus() -> Operator {
    sigma_minus().adjoint()
}

/// σz = |e⟩⟨e| − |g⟩⟨g|.
pub fn sigma_z() -> Operator {
    Operator::from_diagonal(&[C64::new(-1.0, 0.0), C64::new(1.0, 0.0)])
}

/// Lift a cavity operator to cavity ⊗ qubit.
pub fn on_cavity(op: &Operator) -> Operator {
    op.kron(&Operator::identity(2))
}

/// Lift a qubit operator to cavity ⊗ qubit.
pub fn on_qubit(op: &Operator, cfg: &FockSpaceConfig) -> Operator {
    Operator::identity(cfg.n_cavity).kron(op)
}

fn ln_factorials(n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n + 1];
    for k in 1..=n {
        out[k] = out[k - 1] + (k as f64).ln();
    }
    out
}

/// Displacement operator from the closed-form Laguerre matrix elements.
///
/// Entries are those of the untruncated operator, so the result does not
/// depend on `n_cavity` beyond its size.
pub fn displacement_matrix(alpha: C64, cfg: &FockSpaceConfig) -> Result<Operator> {
    displacement_matrix_n(alpha, cfg.n_cavity)
}

pub fn displacement_matrix_n(alpha: C64, n: usize) -> Result<Operator> {
    if !alpha.re.is_finite() || !alpha.im.is_finite() {
        return Err(Error::NonFinite("displacement amplitude"));
    }
    let r = alpha.norm();
    if r == 0.0 {
        return Ok(Operator::identity(n));
    }
    let x = r * r;
    let arg = alpha.arg();
    let ln_r = r.ln();
    let lnf = ln_factorials(n);
    let mut m = DMatrix::zeros(n, n);
    for k in 0..n {
        // Lower triangle carries (α/|α|)^k, upper triangle (−α*/|α|)^k.
        let below = C64::from_polar(1.0, k as f64 * arg);
        let above = C64::from_polar(1.0, k as f64 * (std::f64::consts::PI - arg));
        // sqrt(j!/(j+k)!) |α|^k e^{-x/2}, updated multiplicatively in j.
        let mut pref = (k as f64 * ln_r - 0.5 * lnf[k] - 0.5 * x).exp();
        let kf = k as f64;
        let (mut l_prev, mut l_cur) = (0.0, 1.0);
        for j in 0..n - k {
            if j == 1 {
                l_prev = 1.0;
                l_cur = 1.0 + kf - x;
            } else if j > 1 {
                let jf = j as f64;
                let next = ((2.0 * jf - 1.0 + kf - x) * l_cur - (jf - 1.0 + kf) * l_prev) / jf;
                l_prev = l_cur;
                l_cur = next;
            }
            let v = pref * l_cur;
            m[(j + k, j)] = below * v;
            if k > 0 {
                m[(j, j + k)] = above * v;
            }
            pref *= ((j + 1) as f64 / (j + 1 + k) as f64).sqrt();
        }
    }
    Ok(Operator(m))
}

/// exp(α a† − α* a) with the generator truncated to `n` levels.
///
/// This is what a simulation that never uses the closed form would build; it
/// differs from [`displacement_matrix_n`] near the truncation edge.
pub fn displacement_by_generator(alpha: C64, n: usize) -> Result<Operator> {
    if !alpha.re.is_finite() || !alpha.im.is_finite() {
        return Err(Error::NonFinite("displacement amplitude"));
    }
    let a = annihilation_n(n).into_matrix();
    let g = a.adjoint() * alpha - a * alpha.conj();
    Ok(Operator(g.exp()))
}

/// Diagonal SNAP operator: e^{iθ_j} on levels j < len(thetas), 1 elsewhere.
pub fn snap_matrix(thetas: &[f64], cfg: &FockSpaceConfig) -> Result<Operator> {
    if thetas.len() > cfg.d {
        return Err(Error::DimensionMismatch {
            expected: cfg.d,
            found: thetas.len(),
        });
    }
    snap_matrix_n(thetas, cfg.n_cavity)
}

pub fn snap_matrix_n(thetas: &[f64], n: usize) -> Result<Operator> {
    if thetas.len() > n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: thetas.len(),
        });
    }
    if thetas.iter().any(|t| !t.is_finite()) {
        return Err(Error::NonFinite("SNAP phases"));
    }
    let diag: Vec<C64> = (0..n)
        .map(|j| thetas.get(j).map_or(C64::new(1.0, 0.0), |&t| C64::from_polar(1.0, t)))
        .collect();
    Ok(Operator::from_diagonal(&diag))
}

/// SO(2) rotation on levels (k, k+1): |k⟩ → cos θ|k⟩ + sin θ|k+1⟩.
pub fn givens_matrix(k: usize, theta: f64, n: usize) -> Result<Operator> {
    if k + 1 >= n {
        return Err(Error::invalid(format!("Givens level {k} needs dimension > {}", k + 1)));
    }
    let mut m = DMatrix::identity(n, n);
    let (s, c) = theta.sin_cos();
    m[(k, k)] = C64::new(c, 0.0);
    m[(k + 1, k + 1)] = C64::new(c, 0.0);
    m[(k, k + 1)] = C64::new(-s, 0.0);
    m[(k + 1, k)] = C64::new(s, 0.0);
    Ok(Operator(m))
}

/// Haar-random unitary from the QR decomposition of a complex Ginibre matrix,
/// with the phases of R's diagonal moved into Q.
pub fn haar_unitary<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Operator {
    assert!(d >= 1, "Haar dimension must be positive");
    let scale = std::f64::consts::FRAC_1_SQRT_2;
    let mut z = DMatrix::<C64>::zeros(d, d);
    for j in 0..d {
        for i in 0..d {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            z[(i, j)] = C64::new(re * scale, im * scale);
        }
    }
    let qr = z.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..d {
        let rjj = r[(j, j)];
        let n = rjj.norm();
        let ph = if n > 0.0 { rjj / n } else { C64::new(1.0, 0.0) };
        for i in 0..d {
            q[(i, j)] *= ph;
        }
    }
    Operator(q)
}

/// A seeded collection of unitaries of a common dimension.
#[derive(Clone, Debug)]
pub struct UnitaryEnsemble {
    pub dim: usize,
    pub seed: u64,
    pub members: Vec<Operator>,
}

#[derive(Serialize, Deserialize)]
struct EnsembleData {
    dim: usize,
    seed: u64,
    count: usize,
    members: Vec<Vec<f64>>,
}

impl UnitaryEnsemble {
    /// `count` Haar unitaries; member `i` is drawn from its own sub-stream.
    pub fn haar(d: usize, count: usize, seed: u64) -> Self {
        let members = (0..count as u64)
            .into_par_iter()
            .map(|i| haar_unitary(d, &mut rng::stream(seed, &[i])))
            .collect();
        UnitaryEnsemble {
            dim: d,
            seed,
            members,
        }
    }

    pub fn from_members(members: Vec<Operator>, seed: u64) -> Result<Self> {
        let dim = members
            .first()
            .map(Operator::dim)
            .ok_or_else(|| Error::invalid("ensemble must be nonempty"))?;
        for m in &members {
            if m.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: m.dim(),
                });
            }
            m.ensure_unitary(1e-10)?;
        }
        Ok(UnitaryEnsemble { dim, seed, members })
    }

    pub fn count(&self) -> usize {
        self.members.len()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&EnsembleData {
            dim: self.dim,
            seed: self.seed,
            count: self.count(),
            members: self.members.iter().map(Operator::to_interleaved).collect(),
        })
        .expect("ensemble serialization cannot fail")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let data: EnsembleData =
            serde_json::from_str(s).map_err(|e| Error::Format(format!("ensemble JSON: {e}")))?;
        if data.count != data.members.len() {
            return Err(Error::DimensionMismatch {
                expected: data.count,
                found: data.members.len(),
            });
        }
        let members = data
            .members
            .iter()
            .map(|m| Operator::from_interleaved(data.dim, m))
            .collect::<Result<Vec<_>>>()?;
        UnitaryEnsemble::from_members(members, data.seed)
    }
}

/// How the double sum over ensemble members treats the U = V terms.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum FramePotentialEstimator {
    /// Average over ordered pairs with U ≠ V. Unbiased for the ensemble's
    /// underlying distribution; a single-member ensemble falls back to
    /// [`FramePotentialEstimator::AllPairs`].
    #[default]
    DistinctPairs,
    /// The plain double sum over all ordered pairs, including the d^{2t}
    /// diagonal terms that bias finite ensembles upwards by d^{2t}/|E|.
    AllPairs,
}

/// |Tr(U_i† U_j)|² for i < j, row by row.
fn pair_overlaps(ens: &UnitaryEnsemble) -> Vec<f64> {
    let n = ens.count();
    (0..n)
        .into_par_iter()
        .flat_map_iter(|i| {
            let u = ens.members[i].matrix();
            (i + 1..n).map(move |j| {
                let v = ens.members[j].matrix();
                u.iter().zip(v.iter()).map(|(a, b)| a.conj() * b).sum::<C64>().norm_sqr()
            })
        })
        .collect()
}

pub fn frame_potential(ens: &UnitaryEnsemble, t: u32) -> f64 {
    frame_potential_with(ens, t, FramePotentialEstimator::default())
}

pub fn frame_potential_with(ens: &UnitaryEnsemble, t: u32, estimator: FramePotentialEstimator) -> f64 {
    assert!(t >= 1, "frame potential order must be positive");
    frame_potentials(ens, t, estimator)[t as usize - 1]
}

/// Frame potentials for orders 1..=t_max sharing one pass over the pairs.
pub fn frame_potentials(ens: &UnitaryEnsemble, t_max: u32, estimator: FramePotentialEstimator) -> Vec<f64> {
    let n = ens.count();
    assert!(n >= 1, "frame potential of an empty ensemble");
    let overlaps = pair_overlaps(ens);
    let diag = (ens.dim * ens.dim) as f64;
    (1..=t_max)
        .map(|t| {
            let off: f64 = overlaps.iter().map(|x| x.powi(t as i32)).sum::<f64>() * 2.0;
            let diag_sum = n as f64 * diag.powi(t as i32);
            match estimator {
                FramePotentialEstimator::DistinctPairs if n >= 2 => off / (n * (n - 1)) as f64,
                _ => (off + diag_sum) / (n * n) as f64,
            }
        })
        .collect()
}

/// Pairwise overlaps exposed for resampling-based error bars.
pub fn frame_potential_pairs(ens: &UnitaryEnsemble) -> Vec<f64> {
    pair_overlaps(ens)
}

/// Frobenius distance between the computational blocks of the truncated
/// generator exponential at `n_cavity` and at `n_reference`.
///
/// The closed-form Laguerre matrix is exact at any cutoff, so the error made
/// by truncating the space shows up only when the displacement is built from
/// the truncated generator.
pub fn truncation_error(alpha: C64, d: usize, n_cavity: usize, n_reference: usize) -> Result<f64> {
    if d > n_cavity || n_cavity >= n_reference {
        return Err(Error::invalid("need d <= n_cavity < n_reference"));
    }
    let a = displacement_by_generator(alpha, n_cavity)?.block(d);
    let b = displacement_by_generator(alpha, n_reference)?.block(d);
    Ok(a.frobenius_distance(&b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn annihilation_entries() {
        let a = annihilation_n(2);
        assert_eq!(a.get(0, 1), c(1.0, 0.0));
        assert_eq!(a.get(1, 0), c(0.0, 0.0));
        let a3 = annihilation_n(3);
        assert!((a3.get(1, 2).re - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn canonical_commutator_on_inner_block() {
        let cfg = FockSpaceConfig::new(12, 4).unwrap();
        let a = annihilation(&cfg);
        let comm = a.commutator(&a.adjoint()).block(11);
        assert!(comm.frobenius_distance(&Operator::identity(11)) < 1e-12);
    }

    #[test]
    fn displacement_zero_is_identity() {
        let d = displacement_matrix_n(c(0.0, 0.0), 10).unwrap();
        assert_eq!(d, Operator::identity(10));
    }

    #[test]
    fn displacement_vacuum_amplitude() {
        for alpha in [c(0.3, 0.0), c(1.3, 0.2), c(-2.0, 1.5)] {
            let d = displacement_matrix_n(alpha, 30).unwrap();
            let expected = (-0.5 * alpha.norm_sqr()).exp();
            assert!((d.get(0, 0) - c(expected, 0.0)).norm() < 1e-14);
            // D|0> is the coherent state with amplitudes e^{-|α|²/2} αⁿ/√n!.
            let mut coeff = c(expected, 0.0);
            for n in 0..15 {
                assert!((d.get(n, 0) - coeff).norm() < 1e-12, "n = {n}");
                coeff = coeff * alpha / ((n + 1) as f64).sqrt();
            }
        }
    }

    #[test]
    fn displacement_matches_generator_exponential() {
        let alpha = c(1.3, 0.2);
        let laguerre = displacement_matrix_n(alpha, 60).unwrap().block(25);
        let expm = displacement_by_generator(alpha, 60).unwrap().block(25);
        for i in 0..25 {
            for j in 0..25 {
                assert!((laguerre.get(i, j) - expm.get(i, j)).norm() < 1e-8);
            }
        }
    }

    #[test]
    fn displacement_adjoint_is_negation() {
        let alpha = c(0.7, -1.1);
        let d = displacement_matrix_n(alpha, 40).unwrap();
        let dm = displacement_matrix_n(-alpha, 40).unwrap();
        assert!(d.adjoint().frobenius_distance(&dm) < 1e-12);
    }

    #[test]
    fn displacement_large_cutoff_is_finite() {
        let d = displacement_matrix_n(c(5.0, -4.0), 200).unwrap();
        assert!(d.matrix().iter().all(|z| z.re.is_finite() && z.im.is_finite()));
        // Columns well inside the cutoff keep unit norm.
        for n in 0..40 {
            let norm: f64 = (0..200).map(|m| d.get(m, n).norm_sqr()).sum();
            assert!((norm - 1.0).abs() < 1e-10, "column {n}: {norm}");
        }
    }

    #[test]
    fn displacement_rejects_nan() {
        assert!(displacement_matrix_n(c(f64::NAN, 0.0), 5).is_err());
    }

    #[test]
    fn snap_properties() {
        let cfg = FockSpaceConfig::new(8, 3).unwrap();
        assert_eq!(snap_matrix(&[0.0; 3], &cfg).unwrap(), Operator::identity(8));
        let s = snap_matrix(&[std::f64::consts::PI, 0.0, 0.0], &cfg).unwrap();
        assert!((s.get(0, 0) - c(-1.0, 0.0)).norm() < 1e-15);
        let a = [0.3, -1.2, 2.0];
        let b = [1.1, 0.4, -0.5];
        let sum: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x + y).collect();
        let prod = &snap_matrix(&a, &cfg).unwrap() * &snap_matrix(&b, &cfg).unwrap();
        assert!(prod.frobenius_distance(&snap_matrix(&sum, &cfg).unwrap()) < 1e-12);
        assert!(snap_matrix(&[0.0; 4], &cfg).is_err());
    }

    #[test]
    fn haar_is_unitary_and_reproducible() {
        for d in [1, 2, 5, 16] {
            let u = haar_unitary(d, &mut rng_from_seed(11));
            assert!(u.unitarity_error() < 1e-10);
            let v = haar_unitary(d, &mut rng_from_seed(11));
            assert_eq!(u, v);
        }
        let u1 = haar_unitary(1, &mut rng_from_seed(3));
        assert!((u1.get(0, 0).norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn frame_potential_single_member() {
        let ens = UnitaryEnsemble::haar(3, 1, 5);
        for t in 1..=3 {
            let f = frame_potential(&ens, t);
            assert!((f - 9f64.powi(t as i32)).abs() < 1e-9 * f);
        }
    }

    #[test]
    fn frame_potential_estimators_differ_by_diagonal() {
        let ens = UnitaryEnsemble::haar(3, 20, 5);
        let distinct = frame_potential_with(&ens, 2, FramePotentialEstimator::DistinctPairs);
        let all = frame_potential_with(&ens, 2, FramePotentialEstimator::AllPairs);
        let n = 20.0;
        let expected = (distinct * n * (n - 1.0) + n * 81.0) / (n * n);
        assert!((all - expected).abs() < 1e-9);
    }

    #[test]
    fn haar_frame_potential_t2_at_d4() {
        let ens = UnitaryEnsemble::haar(4, 500, 2024);
        let f = frame_potential(&ens, 2);
        assert!((f - 2.0).abs() < 0.4, "F2 = {f}");
    }

    #[test]
    fn ensemble_json_round_trip() {
        let ens = UnitaryEnsemble::haar(3, 4, 9);
        let back = UnitaryEnsemble::from_json(&ens.to_json()).unwrap();
        assert_eq!(back.seed, 9);
        for (a, b) in ens.members.iter().zip(&back.members) {
            assert_eq!(a, b);
        }
    }

    #[test]
    fn truncation_error_examples() {
        assert_eq!(truncation_error(c(0.0, 0.0), 4, 10, 20).unwrap(), 0.0);
        let e = truncation_error(c(2.0, 0.0), 10, 60, 120).unwrap();
        assert!(e < 1e-6, "{e}");
        let coarse = truncation_error(c(3.0, 0.0), 10, 20, 120).unwrap();
        let fine = truncation_error(c(3.0, 0.0), 10, 40, 120).unwrap();
        assert!(fine <= coarse);
    }

    #[test]
    fn givens_matrix_rotates_pair() {
        let g = givens_matrix(1, 0.3, 4).unwrap();
        assert!(g.unitarity_error() < 1e-14);
        assert!((g.get(2, 1).re - 0.3f64.sin()).abs() < 1e-15);
        assert!((g.get(1, 2).re + 0.3f64.sin()).abs() < 1e-15);
        assert!(givens_matrix(3, 0.1, 4).is_err());
    }
}
