//! Standard errors and jackknife resampling for U-statistics of batch
//! shadows.
//!
//! The U-statistic of order `k` over `N_B` batch matrices `ρ̄_b` is
//!
//! ```text
//! θ̂ = (N_B − k)!/N_B! · Σ tr(ρ̄_{j1} ρ̄_{j2} ⋯ ρ̄_{jk})
//! ```
//!
//! summed over ordered tuples of distinct indices. Every tuple trace is
//! evaluated once; the same pass accumulates, for each batch `i`, the sum of
//! tuples containing `i`, so every leave-one-out estimate is a subtraction.

use log::warn;
use nalgebra::DMatrix;

use crate::shadows::BatchShadowSet;
use crate::{Error, Result, C64};

/// Fewer batches than this trigger a warning.
pub const RECOMMENDED_MIN_BATCHES: usize = 10;

/// Tuple enumeration beyond `k = 3` is limited to this many batches.
pub const MAX_BATCHES_HIGH_ORDER: usize = 16;

/// Standard error of the mean: sample standard deviation (`n − 1`
/// denominator) over `√n`.
pub fn sem(values: &[f64]) -> Result<f64> {
    let n = values.len();
    if n < 2 {
        return Err(Error::NotEnoughSamples { needed: 2, got: n });
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    Ok((var / n as f64).sqrt())
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

#[derive(Clone, Debug, PartialEq)]
pub struct JackknifeResult {
    /// Bias-corrected `θ_JK = N_B θ̂ − (N_B − 1) mean(θ̂_(i))`.
    pub point_estimate: f64,
    /// Full-sample estimate `θ̂`.
    pub raw_estimate: f64,
    /// `σ_JK² = (N_B − 1)/N_B Σ_i (θ̂_(i) − mean)²`.
    pub variance: f64,
    pub leave_one_out: Vec<f64>,
}

impl JackknifeResult {
    /// Applies the jackknife formulas to a full estimate and its `N_B`
    /// leave-one-out recomputations.
    pub fn from_leave_one_out(raw_estimate: f64, leave_one_out: Vec<f64>) -> Self {
        let nb = leave_one_out.len() as f64;
        let bar = mean(&leave_one_out);
        let variance = (nb - 1.0) / nb * leave_one_out.iter().map(|t| (t - bar).powi(2)).sum::<f64>();
        JackknifeResult {
            point_estimate: nb * raw_estimate - (nb - 1.0) * bar,
            raw_estimate,
            variance,
            leave_one_out,
        }
    }

    pub fn std_error(&self) -> f64 {
        self.variance.sqrt()
    }
}

#[derive(Clone, Debug)]
pub struct JackknifeMoments {
    pub ks: Vec<usize>,
    pub results: Vec<JackknifeResult>,
    /// `σ_kl` over the requested orders, when asked for.
    pub covariance: Option<DMatrix<f64>>,
}

/// Sums over all ordered tuples of `k` distinct batches.
#[derive(Clone, Debug)]
pub struct MomentTerms {
    pub k: usize,
    pub n_batches: usize,
    /// Sum of all tuple traces.
    pub total: C64,
    /// `containing[i]`: sum of the tuple traces that include batch `i`.
    pub containing: Vec<C64>,
}

impl MomentTerms {
    /// Number of ordered `k`-tuples of distinct indices out of `n`.
    pub fn n_tuples(n: usize, k: usize) -> f64 {
        (0..k).map(|j| (n - j) as f64).product()
    }

    pub fn estimate(&self) -> f64 {
        self.total.re / Self::n_tuples(self.n_batches, self.k)
    }

    /// Estimate with batch `i` removed.
    pub fn leave_one_out(&self, i: usize) -> f64 {
        (self.total - self.containing[i]).re / Self::n_tuples(self.n_batches - 1, self.k)
    }
}

fn check_order(n_batches: usize, k: usize) -> Result<()> {
    if k < 2 {
        return Err(Error::InvalidInput(format!("moment order must be at least 2, got {k}")));
    }
    if n_batches < k {
        return Err(Error::NotEnoughBatches { needed: k, got: n_batches });
    }
    if k >= 4 && n_batches > MAX_BATCHES_HIGH_ORDER {
        return Err(Error::TooLarge(format!(
            "order-{k} moments are limited to {MAX_BATCHES_HIGH_ORDER} batches, got {n_batches}"
        )));
    }
    Ok(())
}

fn check_square(matrices: &[&DMatrix<C64>]) -> Result<()> {
    let shape = matrices.first().map(|m| m.shape());
    if let Some((r, c)) = shape {
        if r != c || matrices.iter().any(|m| m.shape() != (r, c)) {
            return Err(Error::SizeMismatch("batch matrices must be square of one size".into()));
        }
    }
    Ok(())
}

/// `tr(A B)` without forming the product.
fn trace_product(a: &DMatrix<C64>, b: &DMatrix<C64>) -> C64 {
    a.iter().zip(b.transpose().iter()).map(|(x, y)| x * y).sum()
}

struct TupleWalk<'a> {
    matrices: &'a [&'a DMatrix<C64>],
    pairs: Vec<Option<DMatrix<C64>>>,
    k: usize,
    track: bool,
    total: C64,
    containing: Vec<C64>,
    stack: Vec<usize>,
}

impl TupleWalk<'_> {
    fn record(&mut self, v: C64) {
        self.total += v;
        if self.track {
            for &i in &self.stack {
                self.containing[i] += v;
            }
        }
    }

    fn descend(&mut self, prefix: &DMatrix<C64>) {
        let nb = self.matrices.len();
        let depth = self.stack.len();
        for j in 0..nb {
            if self.stack.contains(&j) {
                continue;
            }
            self.stack.push(j);
            if depth + 1 == self.k {
                let v = trace_product(prefix, self.matrices[j]);
                self.record(v);
            } else {
                let next = prefix * self.matrices[j];
                self.descend(&next);
            }
            self.stack.pop();
        }
    }

    fn run(&mut self) {
        let nb = self.matrices.len();
        for a in 0..nb {
            for b in 0..nb {
                if a == b {
                    continue;
                }
                self.stack.push(a);
                self.stack.push(b);
                if self.k == 2 {
                    let v = trace_product(self.matrices[a], self.matrices[b]);
                    self.record(v);
                } else {
                    let p = self.pairs[a * nb + b].take().unwrap_or_else(|| self.matrices[a] * self.matrices[b]);
                    self.descend(&p);
                    self.pairs[a * nb + b] = Some(p);
                }
                self.stack.clear();
            }
        }
    }
}

fn walk(matrices: &[&DMatrix<C64>], k: usize, track: bool) -> Result<MomentTerms> {
    check_square(matrices)?;
    let nb = matrices.len();
    check_order(nb, k)?;
    let mut pairs = vec![None; nb * nb];
    if k > 2 {
        for a in 0..nb {
            for b in 0..nb {
                if a != b {
                    pairs[a * nb + b] = Some(matrices[a] * matrices[b]);
                }
            }
        }
    }
    let mut w = TupleWalk {
        matrices,
        pairs,
        k,
        track,
        total: C64::new(0.0, 0.0),
        containing: vec![C64::new(0.0, 0.0); nb],
        stack: Vec::with_capacity(k),
    };
    w.run();
    Ok(MomentTerms { k, n_batches: nb, total: w.total, containing: w.containing })
}

/// Full tuple sum and per-batch containing sums for order `k`.
pub fn moment_terms(matrices: &[&DMatrix<C64>], k: usize) -> Result<MomentTerms> {
    walk(matrices, k, true)
}

/// Order-`k` U-statistic alone, without the leave-one-out bookkeeping.
pub fn u_statistic(matrices: &[&DMatrix<C64>], k: usize) -> Result<f64> {
    Ok(walk(matrices, k, false)?.estimate())
}

/// Jackknife for each order in `ks` on the given batch matrices.
pub fn jackknife_matrices(matrices: &[&DMatrix<C64>], ks: &[usize], compute_cov: bool) -> Result<JackknifeMoments> {
    let nb = matrices.len();
    if nb < 2 {
        return Err(Error::NotEnoughBatches { needed: 2, got: nb });
    }
    if let Some(&kmax) = ks.iter().max() {
        if nb < kmax + 1 {
            return Err(Error::NotEnoughBatches { needed: kmax + 1, got: nb });
        }
    }
    if nb < RECOMMENDED_MIN_BATCHES {
        warn!("jackknife over {nb} batches; at least {RECOMMENDED_MIN_BATCHES} are recommended");
    }
    let results = ks
        .iter()
        .map(|&k| {
            let terms = moment_terms(matrices, k)?;
            let loo = (0..nb).map(|i| terms.leave_one_out(i)).collect();
            Ok(JackknifeResult::from_leave_one_out(terms.estimate(), loo))
        })
        .collect::<Result<Vec<_>>>()?;
    let covariance = compute_cov.then(|| covariance(&results));
    Ok(JackknifeMoments { ks: ks.to_vec(), results, covariance })
}

/// Jackknife estimates of `tr(ρ^k)` from batch shadows.
pub fn jackknife_moments(batches: &BatchShadowSet, ks: &[usize], compute_cov: bool) -> Result<JackknifeMoments> {
    jackknife_matrices(&batches.matrices(), ks, compute_cov)
}

/// `σ_kl = (N_B − 1)/N_B Σ_i (θ̂_k,(i) − θ̄_k)(θ̂_l,(i) − θ̄_l)`.
pub fn covariance(results: &[JackknifeResult]) -> DMatrix<f64> {
    let m = results.len();
    let bars: Vec<f64> = results.iter().map(|r| mean(&r.leave_one_out)).collect();
    DMatrix::from_fn(m, m, |a, b| {
        let ra = &results[a].leave_one_out;
        let rb = &results[b].leave_one_out;
        let nb = ra.len() as f64;
        (nb - 1.0) / nb * ra.iter().zip(rb).map(|(x, y)| (x - bars[a]) * (y - bars[b])).sum::<f64>()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c;
    use crate::sampling::RngSeed;
    use rand_distr::{Distribution, StandardNormal};

    fn random_hermitian(d: usize, seed: u64) -> DMatrix<C64> {
        let mut rng = RngSeed::new(seed, 0).rng();
        let g = DMatrix::from_fn(d, d, |_, _| crate::sampling::complex_gaussian(&mut rng));
        (&g + g.adjoint()) * c(0.5, 0.0)
    }

    #[test]
    fn sem_small_cases() {
        assert_eq!(sem(&[1.0, 1.0, 1.0, 1.0]).unwrap(), 0.0);
        assert!((sem(&[0.0, 2.0]).unwrap() - 1.0).abs() < 1e-15);
        assert!(matches!(sem(&[1.0]), Err(Error::NotEnoughSamples { .. })));
        let mut rng = RngSeed::new(1, 0).rng();
        let v: Vec<f64> = (0..10_000).map(|_| StandardNormal.sample(&mut rng)).collect();
        assert!((sem(&v).unwrap() - 0.01).abs() < 0.002);
    }

    #[test]
    fn three_batch_pair_sum() {
        let ms: Vec<_> = (0..3).map(|s| random_hermitian(4, s)).collect();
        let refs: Vec<&DMatrix<C64>> = ms.iter().collect();
        let t = |a: usize, b: usize| (&ms[a] * &ms[b]).trace().re;
        let expect = 2.0 * (t(0, 1) + t(0, 2) + t(1, 2)) / 6.0;
        assert!((u_statistic(&refs, 2).unwrap() - expect).abs() < 1e-12);
    }

    #[test]
    fn identical_batches_have_zero_variance() {
        let m = random_hermitian(4, 9);
        let refs = vec![&m; 6];
        let jk = jackknife_matrices(&refs, &[2, 3], true).unwrap();
        for (r, k) in jk.results.iter().zip([2, 3]) {
            let exact = (0..k - 1).fold(m.clone(), |acc, _| &acc * &m).trace().re;
            assert!((r.raw_estimate - exact).abs() < 1e-9 * exact.abs().max(1.0));
            assert!(r.variance < 1e-18);
            assert!((r.point_estimate - r.raw_estimate).abs() < 1e-9 * exact.abs().max(1.0));
        }
    }

    #[test]
    fn order_checks() {
        let m = random_hermitian(2, 1);
        let refs = vec![&m; 3];
        assert!(matches!(u_statistic(&refs, 4), Err(Error::NotEnoughBatches { .. })));
        assert!(matches!(jackknife_matrices(&refs, &[3], false), Err(Error::NotEnoughBatches { .. })));
        assert!(u_statistic(&refs, 1).is_err());
        let many = vec![&m; 17];
        assert!(matches!(u_statistic(&many, 4), Err(Error::TooLarge(_))));
    }

    #[test]
    fn covariance_diagonal_is_variance() {
        let ms: Vec<_> = (0..7).map(|s| random_hermitian(4, 20 + s)).collect();
        let refs: Vec<&DMatrix<C64>> = ms.iter().collect();
        let jk = jackknife_matrices(&refs, &[2, 3, 4], true).unwrap();
        let cov = jk.covariance.unwrap();
        for (i, r) in jk.results.iter().enumerate() {
            assert_eq!(cov[(i, i)], r.variance);
        }
    }
}
