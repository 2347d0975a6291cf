use nalgebra::DMatrix;

use super::{Gate, GateSequence};
use crate::error::{Error, Result};
use crate::hilbert::Operator;
use crate::C64;

const ZERO_ENTRY: f64 = 1e-14;
const ELIMINATION_TOL: f64 = 1e-12;

/// Factor `u` into exactly d SNAPs and d(d−1)/2 Givens rotations.
///
/// Columns are cleared from the last one down. For column j the entries
/// 0..=j are de-phased by a SNAP, then rotations on (0,1), (1,2), …, (j−1,j)
/// push all weight into entry j. Since the working matrix stays unitary,
/// row j is cleared at the same time. Inverting the recorded operations in
/// reverse order gives the emitted sequence.
pub fn exact_compile(u: &Operator) -> Result<GateSequence> {
    u.ensure_unitary(1e-10)?;
    let d = u.dim();
    let mut m: DMatrix<C64> = u.matrix().clone();
    // Per column: de-phasing angles and rotation angles, as applied.
    let mut snaps: Vec<Vec<f64>> = vec![Vec::new(); d];
    let mut rotations: Vec<Vec<f64>> = vec![Vec::new(); d];

    for j in (0..d).rev() {
        let thetas: Vec<f64> = (0..=j)
            .map(|i| {
                let z = m[(i, j)];
                if z.norm() < ZERO_ENTRY {
                    0.0
                } else {
                    -z.arg()
                }
            })
            .collect();
        for (i, &t) in thetas.iter().enumerate() {
            let ph = C64::from_polar(1.0, t);
            for c in 0..d {
                m[(i, c)] *= ph;
            }
        }
        snaps[j] = thetas;

        for i in 0..j {
            let a = m[(i, j)].re;
            let b = m[(i + 1, j)].re;
            let angle = if a.abs() < ZERO_ENTRY && b.abs() < ZERO_ENTRY {
                0.0
            } else {
                a.atan2(b)
            };
            let (s, c) = angle.sin_cos();
            for col in 0..d {
                let x = m[(i, col)];
                let y = m[(i + 1, col)];
                m[(i, col)] = x * c - y * s;
                m[(i + 1, col)] = x * s + y * c;
            }
            let residual = m[(i, j)].norm();
            if residual > ELIMINATION_TOL {
                return Err(Error::invalid(format!(
                    "entry ({i}, {j}) left at {residual:.3e} after its rotation"
                )));
            }
            rotations[j].push(angle);
        }

        for c in 0..j {
            let z = m[(j, c)].norm();
            if z > 1e-10 {
                return Err(Error::invalid(format!("row {j} not cleared: |M[{j},{c}]| = {z:.3e}")));
            }
        }
    }

    let mut elements = Vec::with_capacity(d + d * (d - 1) / 2);
    for j in 0..d {
        for (i, &angle) in rotations[j].iter().enumerate().rev() {
            elements.push(Gate::Givens { level: i, angle: -angle });
        }
        elements.push(Gate::Snap {
            thetas: snaps[j].iter().map(|t| -t).collect(),
        });
    }
    GateSequence::new(d, elements)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::haar_unitary;
    use crate::rng::rng_from_seed;

    #[test]
    fn identity_compiles_to_zero_angles() {
        let seq = exact_compile(&Operator::identity(4)).unwrap();
        assert_eq!(seq.count_snaps(), 4);
        assert_eq!(seq.count_givens(), 6);
        for g in &seq.elements {
            match g {
                Gate::Snap { thetas } => assert!(thetas.iter().all(|t| *t == 0.0)),
                Gate::Givens { angle, .. } => assert_eq!(*angle, 0.0),
                Gate::Displacement { .. } => unreachable!(),
            }
        }
    }

    #[test]
    fn reconstructs_haar_unitaries() {
        let mut rng = rng_from_seed(17);
        for d in [1, 2, 3, 5, 8, 16] {
            for _ in 0..5 {
                let u = haar_unitary(d, &mut rng);
                let seq = exact_compile(&u).unwrap();
                assert_eq!(seq.count_snaps(), d);
                assert_eq!(seq.count_givens(), d * (d - 1) / 2);
                let err = seq.unitary(d).unwrap().frobenius_distance(&u);
                assert!(err < 1e-10, "d = {d}: {err}");
            }
        }
    }

    #[test]
    fn snap_lengths_follow_column_index() {
        let u = haar_unitary(5, &mut rng_from_seed(2));
        let lens: Vec<usize> = exact_compile(&u)
            .unwrap()
            .elements
            .iter()
            .filter_map(|g| match g {
                Gate::Snap { thetas } => Some(thetas.len()),
                _ => None,
            })
            .collect();
        assert_eq!(lens, vec![1, 2, 3, 4, 5]);
    }

    #[test]
    fn rejects_non_unitary() {
        let mut m = Operator::identity(3).into_matrix();
        m[(0, 1)] = C64::new(0.1, 0.0);
        let op = Operator::from_matrix(m).unwrap();
        assert!(matches!(exact_compile(&op), Err(Error::NotUnitary(_))));
    }
}
