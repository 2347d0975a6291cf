//! Heavy-output and linear cross-entropy scores.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::Operator;
use crate::stats;

/// Ideal distribution `q` and measured (or simulated) distribution `p` over
/// the d computational levels. `p` may sum to less than one; the missing mass
/// is leakage and is never renormalized away.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistributionPair {
    pub q: Vec<f64>,
    pub p: Vec<f64>,
}

impl DistributionPair {
    pub fn new(q: Vec<f64>, p: Vec<f64>) -> Result<Self> {
        if q.len() != p.len() {
            return Err(Error::DimensionMismatch {
                expected: q.len(),
                found: p.len(),
            });
        }
        if q.is_empty() {
            return Err(Error::invalid("empty distribution"));
        }
        if q.iter().chain(&p).any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("distribution"));
        }
        let qs: f64 = q.iter().sum();
        if (qs - 1.0).abs() > 1e-9 || q.iter().any(|&x| x < 0.0) {
            return Err(Error::invalid(format!("ideal distribution sums to {qs}")));
        }
        let ps: f64 = p.iter().sum();
        if ps > 1.0 + 1e-9 || p.iter().any(|&x| x < 0.0) {
            return Err(Error::invalid(format!("measured distribution sums to {ps}")));
        }
        Ok(DistributionPair { q, p })
    }

    pub fn d(&self) -> usize {
        self.q.len()
    }

    pub fn leakage(&self) -> f64 {
        1.0 - self.p.iter().sum::<f64>()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricRecord {
    pub hog_fraction_contrib: f64,
    pub xeb_inner: f64,
    pub qq_inner: f64,
    pub heavy_set: Vec<usize>,
}

/// q(x) = |⟨x|U|0⟩|².
pub fn ideal_distribution(u: &Operator) -> Vec<f64> {
    (0..u.dim()).map(|x| u.get(x, 0).norm_sqr()).collect()
}

/// Median with the even-length convention of averaging the middle pair.
pub fn median(q: &[f64]) -> f64 {
    assert!(!q.is_empty(), "median of an empty slice");
    let mut s = q.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

/// Outcomes whose ideal probability strictly exceeds the median.
pub fn heavy_set(q: &[f64]) -> Vec<usize> {
    let med = median(q);
    (0..q.len()).filter(|&x| q[x] > med).collect()
}

pub fn metric_record(pair: &DistributionPair) -> MetricRecord {
    let heavy = heavy_set(&pair.q);
    MetricRecord {
        hog_fraction_contrib: heavy.iter().map(|&x| pair.p[x]).sum(),
        xeb_inner: dot(&pair.p, &pair.q),
        qq_inner: dot(&pair.q, &pair.q),
        heavy_set: heavy,
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn check_nonempty(pairs: &[DistributionPair]) -> Result<()> {
    if pairs.is_empty() {
        Err(Error::invalid("no distribution pairs"))
    } else {
        Ok(())
    }
}

fn common_d(pairs: &[DistributionPair]) -> Result<usize> {
    check_nonempty(pairs)?;
    let d = pairs[0].d();
    if let Some(p) = pairs.iter().find(|p| p.d() != d) {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: p.d(),
        });
    }
    Ok(d)
}

/// Mean heavy-set mass of `p`.
pub fn hog_score(pairs: &[DistributionPair]) -> Result<f64> {
    check_nonempty(pairs)?;
    let total: f64 = pairs.iter().map(|p| metric_record(p).hog_fraction_contrib).sum();
    Ok(total / pairs.len() as f64)
}

/// d·E[p·q] − 1.
pub fn xeb(pairs: &[DistributionPair]) -> Result<f64> {
    let d = common_d(pairs)? as f64;
    let mean = pairs.iter().map(|p| dot(&p.p, &p.q)).sum::<f64>() / pairs.len() as f64;
    Ok(d * mean - 1.0)
}

/// XEB divided by the same ensemble's ideal value d·E[q·q] − 1.
pub fn xeb_normalized(pairs: &[DistributionPair]) -> Result<f64> {
    let denom = xeb_denominator(pairs)?;
    Ok(xeb(pairs)? / denom)
}

pub fn xeb_denominator(pairs: &[DistributionPair]) -> Result<f64> {
    let d = common_d(pairs)? as f64;
    let mean = pairs.iter().map(|p| dot(&p.q, &p.q)).sum::<f64>() / pairs.len() as f64;
    let denom = d * mean - 1.0;
    if denom.abs() < 1e-12 {
        return Err(Error::Degenerate(format!(
            "normalized XEB denominator {denom:.3e} (ideal distributions are uniform)"
        )));
    }
    Ok(denom)
}

/// Per-unitary normalized XEB contributions, whose mean is [`xeb_normalized`].
pub fn xeb_normalized_contributions(pairs: &[DistributionPair]) -> Result<Vec<f64>> {
    let denom = xeb_denominator(pairs)?;
    let d = pairs[0].d() as f64;
    Ok(pairs.iter().map(|p| (d * dot(&p.p, &p.q) - 1.0) / denom).collect())
}

/// Lab-style heavy-output estimate: draw `shots` outcomes from `p` (leaked
/// shots land outside every heavy set) and return the heavy fraction.
pub fn sampled_hog_fraction<R: Rng + ?Sized>(pair: &DistributionPair, shots: u64, rng: &mut R) -> Result<f64> {
    if shots == 0 {
        return Err(Error::invalid("need at least one shot"));
    }
    let probs = stats::with_leakage_category(&pair.p);
    let counts = stats::sample_counts(&probs, shots, rng)?;
    let heavy: u64 = heavy_set(&pair.q).iter().map(|&x| counts.counts[x]).sum();
    Ok(heavy as f64 / shots as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::haar_unitary;
    use crate::rng::rng_from_seed;

    fn pair(q: &[f64], p: &[f64]) -> DistributionPair {
        DistributionPair::new(q.to_vec(), p.to_vec()).unwrap()
    }

    #[test]
    fn ideal_distribution_examples() {
        assert_eq!(ideal_distribution(&Operator::identity(3)), vec![1.0, 0.0, 0.0]);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let m = nalgebra::DMatrix::from_row_slice(2, 2, &[h, h, h, -h].map(|x| crate::C64::new(x, 0.0)));
        let q = ideal_distribution(&Operator::from_matrix(m).unwrap());
        assert!((q[0] - 0.5).abs() < 1e-15 && (q[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn haar_first_outcome_is_uniform_on_average() {
        let mut rng = rng_from_seed(1);
        let mean: f64 = (0..1000).map(|_| ideal_distribution(&haar_unitary(8, &mut rng))[0]).sum::<f64>() / 1000.0;
        assert!((mean - 0.125).abs() < 0.01, "{mean}");
    }

    #[test]
    fn heavy_set_examples() {
        assert!(heavy_set(&[0.25; 4]).is_empty());
        assert_eq!(heavy_set(&[0.2, 0.8]), vec![1]);
        assert_eq!(heavy_set(&[0.5, 0.3, 0.2]), vec![0]);
        assert_eq!(heavy_set(&[1.0, 0.0, 0.0, 0.0]), vec![0]);
        let p = pair(&[1.0, 0.0, 0.0, 0.0], &[1.0, 0.0, 0.0, 0.0]);
        assert_eq!(hog_score(&[p]).unwrap(), 1.0);
    }

    #[test]
    fn xeb_limits() {
        let q1 = [0.5, 0.3, 0.2];
        let q2 = [0.1, 0.6, 0.3];
        let ideal = [pair(&q1, &q1), pair(&q2, &q2)];
        assert_eq!(xeb_normalized(&ideal).unwrap(), 1.0);
        let u = [1.0 / 3.0; 3];
        let uniform = [pair(&q1, &u), pair(&q2, &u)];
        assert!(xeb(&uniform).unwrap().abs() < 1e-15);
        assert!(xeb_normalized(&uniform).unwrap().abs() < 1e-14);
        let flat = [pair(&u, &u)];
        assert!(matches!(xeb_normalized(&flat), Err(Error::Degenerate(_))));
    }

    #[test]
    fn leakage_penalizes_both_scores() {
        let q = [0.6, 0.3, 0.1];
        let full = pair(&q, &q);
        let leaky = pair(&q, &[0.54, 0.27, 0.09]);
        assert!((leaky.leakage() - 0.1).abs() < 1e-12);
        let hf = hog_score(std::slice::from_ref(&full)).unwrap();
        let hl = hog_score(std::slice::from_ref(&leaky)).unwrap();
        assert!((hl - 0.9 * hf).abs() < 1e-12);
        assert!(xeb(&[leaky]).unwrap() < xeb(&[full]).unwrap());
    }

    #[test]
    fn contributions_average_to_normalized_xeb() {
        let pairs = [pair(&[0.5, 0.3, 0.2], &[0.4, 0.3, 0.25]), pair(&[0.1, 0.6, 0.3], &[0.2, 0.5, 0.3])];
        let c = xeb_normalized_contributions(&pairs).unwrap();
        let mean = c.iter().sum::<f64>() / c.len() as f64;
        assert!((mean - xeb_normalized(&pairs).unwrap()).abs() < 1e-14);
    }

    #[test]
    fn sampled_hog_tracks_exact() {
        let q = [0.5, 0.3, 0.15, 0.05];
        let p = pair(&q, &[0.45, 0.3, 0.15, 0.05]);
        let exact = hog_score(std::slice::from_ref(&p)).unwrap();
        let est = sampled_hog_fraction(&p, 100_000, &mut rng_from_seed(4)).unwrap();
        assert!((est - exact).abs() < 0.01);
    }

    #[test]
    fn rejects_bad_pairs() {
        assert!(DistributionPair::new(vec![0.5, 0.5], vec![0.5]).is_err());
        assert!(DistributionPair::new(vec![0.5, 0.4], vec![0.5, 0.4]).is_err());
        assert!(DistributionPair::new(vec![0.5, 0.5], vec![0.7, 0.4]).is_err());
    }
}
