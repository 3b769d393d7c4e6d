//! Estimators of physical properties from shadows or directly from
//! measurement groups.

use rayon::prelude::*;

use crate::shadows::{self, BatchShadowSet, CalibrationVector, Shadow};
use crate::sim::QuantumState;
use crate::stats;
use crate::types::{MeasurementData, MeasurementGroup, Pauli, PauliObservable};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EstimateWithError {
    pub value: f64,
    /// Standard error, when requested.
    pub sem: Option<f64>,
    /// Number of independent samples the error is based on.
    pub n_samples: usize,
}

impl EstimateWithError {
    pub fn new(value: f64, sem: Option<f64>, n_samples: usize) -> Self {
        EstimateWithError { value, sem, n_samples }
    }

    /// `|value − target| ≤ n_sigma · sem`; false without a standard error.
    pub fn covers(&self, target: f64, n_sigma: f64) -> bool {
        self.sem.is_some_and(|s| (self.value - target).abs() <= n_sigma * s)
    }
}

fn check_observable(obs: &PauliObservable, n: usize) -> Result<()> {
    if obs.n_qubits() != n {
        return Err(Error::SizeMismatch(format!(
            "{}-qubit observable on {}-qubit shadows",
            obs.n_qubits(),
            n
        )));
    }
    Ok(())
}

fn observable_value<S: Shadow + ?Sized>(obs: &PauliObservable, shadow: &S) -> f64 {
    obs.terms()
        .iter()
        .map(|t| t.coefficient * shadow.trace_with(&t.letters).re)
        .sum()
}

/// Mean of `tr(O ρ̂)` over the shadows, with the standard error of the mean
/// over shadows when `compute_sem` is set.
pub fn expect_shadow<S: Shadow + Sync>(
    obs: &PauliObservable,
    shadows: &[S],
    compute_sem: bool,
) -> Result<EstimateWithError> {
    if shadows.is_empty() {
        return Err(Error::NotEnoughSamples { needed: 1, got: 0 });
    }
    for s in shadows {
        check_observable(obs, s.n_qubits())?;
    }
    let values: Vec<f64> = shadows.par_iter().map(|s| observable_value(obs, s)).collect();
    let sem = if compute_sem { Some(stats::sem(&values)?) } else { None };
    Ok(EstimateWithError::new(stats::mean(&values), sem, values.len()))
}

/// Factorized-shadow estimate of `⟨O⟩` straight from the data, without
/// materializing the shadows.
///
/// Snapshots of the same setting are correlated, so the standard error is
/// taken over batch means: each of the `n_batches` contiguous blocks of
/// settings (default: one per setting) contributes its mean snapshot value.
pub fn expect_group(
    obs: &PauliObservable,
    group: &MeasurementGroup,
    g: Option<&CalibrationVector>,
    n_batches: Option<usize>,
    compute_sem: bool,
) -> Result<EstimateWithError> {
    let n = group.n_qubits();
    check_observable(obs, n)?;
    let ones = CalibrationVector::ones(n);
    let g = g.unwrap_or(&ones);
    if g.n_qubits() != n {
        return Err(Error::SizeMismatch(format!(
            "calibration vector of length {} for {} qubits",
            g.n_qubits(),
            n
        )));
    }
    // per setting: (sum of snapshot values, shot count)
    let per_setting = group
        .entries()
        .par_iter()
        .map(|data| setting_sum(obs, data, g.g()))
        .collect::<Result<Vec<_>>>()?;
    let shots: usize = per_setting.iter().map(|p| p.1).sum();
    if shots == 0 {
        return Err(Error::NotEnoughShots { needed: 1, got: 0 });
    }
    let value = per_setting.iter().map(|p| p.0).sum::<f64>() / shots as f64;
    let n_b = n_batches.unwrap_or(group.n_settings());
    let assignment = shadows::batch_assignment(group.n_settings(), n_b)?;
    let mut sums = vec![(0.0, 0usize); n_b];
    for (&b, &(s, m)) in assignment.iter().zip(&per_setting) {
        sums[b].0 += s;
        sums[b].1 += m;
    }
    let sem = if compute_sem {
        let means: Vec<f64> = sums.iter().map(|&(s, m)| s / m as f64).collect();
        Some(stats::sem(&means)?)
    } else {
        None
    };
    Ok(EstimateWithError::new(value, sem, n_b))
}

fn setting_sum(obs: &PauliObservable, data: &MeasurementData, g: &[f64]) -> Result<(f64, usize)> {
    let pairs = shadows::setting_factor_pairs(data, g)?;
    // traces[i][p][b] = tr(P_p F_i[b]) for p in X, Y, Z
    let traces: Vec<[[f64; 2]; 3]> = pairs
        .iter()
        .map(|pair| {
            [Pauli::X, Pauli::Y, Pauli::Z].map(|p| [0, 1].map(|b| shadows::pauli_trace_2x2(p, &pair[b]).re))
        })
        .collect();
    let supports: Vec<Vec<(usize, usize)>> = obs
        .terms()
        .iter()
        .map(|t| {
            t.letters
                .iter()
                .enumerate()
                .filter_map(|(i, p)| match p {
                    Pauli::I => None,
                    Pauli::X => Some((i, 0)),
                    Pauli::Y => Some((i, 1)),
                    Pauli::Z => Some((i, 2)),
                })
                .collect()
        })
        .collect();
    let mut sum = 0.0;
    for shot in data.shots() {
        for (t, support) in obs.terms().iter().zip(&supports) {
            let prod: f64 = support.iter().map(|&(i, p)| traces[i][p][shot[i] as usize]).product();
            sum += t.coefficient * prod;
        }
    }
    Ok((sum, data.n_shots()))
}

/// Unbiased estimates of `tr(ρ^k)` for each `k` from batch shadows. The
/// standard error is the jackknife one.
pub fn trace_moments(batches: &BatchShadowSet, ks: &[usize], compute_sem: bool) -> Result<Vec<EstimateWithError>> {
    let nb = batches.n_batches();
    if compute_sem {
        let jk = stats::jackknife_moments(batches, ks, false)?;
        Ok(jk
            .results
            .iter()
            .map(|r| EstimateWithError::new(r.raw_estimate, Some(r.std_error()), nb))
            .collect())
    } else {
        let ms = batches.matrices();
        ks.iter()
            .map(|&k| Ok(EstimateWithError::new(stats::u_statistic(&ms, k)?, None, nb)))
            .collect()
    }
}

/// Bit-packed shots of one record.
fn pack_shots(data: &MeasurementData) -> Vec<Vec<u64>> {
    data.shots()
        .map(|shot| {
            let mut words = vec![0u64; shot.len().div_ceil(64)];
            for (i, &b) in shot.iter().enumerate() {
                words[i / 64] |= (b as u64) << (i % 64);
            }
            words
        })
        .collect()
}

fn hamming(a: &[u64], b: &[u64]) -> u32 {
    a.iter().zip(b).map(|(x, y)| (x ^ y).count_ones()).sum()
}

/// `2^N (−2)^{−D}` for all possible Hamming distances `D`.
fn hamming_kernel(n: usize) -> Vec<f64> {
    (0..=n)
        .map(|d| {
            let sign = if d % 2 == 0 { 1.0 } else { -1.0 };
            sign * 2f64.powi((n - d) as i32)
        })
        .collect()
}

fn mean_with_sem(values: Vec<f64>, compute_sem: bool) -> Result<EstimateWithError> {
    let sem = if compute_sem { Some(stats::sem(&values)?) } else { None };
    Ok(EstimateWithError::new(stats::mean(&values), sem, values.len()))
}

/// Purity `tr(ρ²)` from the Hamming-distance kernel over pairs of distinct
/// shots of the same setting, averaged over settings.
pub fn purity_direct(group: &MeasurementGroup, compute_sem: bool) -> Result<EstimateWithError> {
    let n = group.n_qubits();
    let kernel = hamming_kernel(n);
    let per_setting = group
        .entries()
        .par_iter()
        .map(|data| {
            if !data.setting().is_local() {
                return Err(Error::UnsupportedSetting("direct purity needs local settings".into()));
            }
            let m = data.n_shots();
            if m < 2 {
                return Err(Error::NotEnoughShots { needed: 2, got: m });
            }
            let packed = pack_shots(data);
            let mut acc = 0.0;
            for a in 0..m {
                for b in a + 1..m {
                    acc += kernel[hamming(&packed[a], &packed[b]) as usize];
                }
            }
            Ok(2.0 * acc / (m * (m - 1)) as f64)
        })
        .collect::<Result<Vec<_>>>()?;
    mean_with_sem(per_setting, compute_sem)
}

fn check_common_settings(g1: &MeasurementGroup, g2: &MeasurementGroup) -> Result<()> {
    if g1.n_qubits() != g2.n_qubits() || g1.n_settings() != g2.n_settings() {
        return Err(Error::SettingsMismatch(format!(
            "groups of {}×{} and {}×{} (qubits × settings)",
            g1.n_qubits(),
            g1.n_settings(),
            g2.n_qubits(),
            g2.n_settings()
        )));
    }
    for (j, (a, b)) in g1.settings().zip(g2.settings()).enumerate() {
        if a != b {
            return Err(Error::SettingsMismatch(format!("setting {} differs between groups", j + 1)));
        }
    }
    Ok(())
}

/// Overlap `tr(ρ₁ρ₂)` from two groups measured with the same settings.
pub fn overlap_direct(g1: &MeasurementGroup, g2: &MeasurementGroup, compute_sem: bool) -> Result<EstimateWithError> {
    check_common_settings(g1, g2)?;
    let n = g1.n_qubits();
    let kernel = hamming_kernel(n);
    let per_setting = g1
        .entries()
        .par_iter()
        .zip(g2.entries())
        .map(|(d1, d2)| {
            if !d1.setting().is_local() {
                return Err(Error::UnsupportedSetting("direct overlap needs local settings".into()));
            }
            let (m1, m2) = (d1.n_shots(), d2.n_shots());
            if m1 == 0 || m2 == 0 {
                return Err(Error::NotEnoughShots { needed: 1, got: 0 });
            }
            let (p1, p2) = (pack_shots(d1), pack_shots(d2));
            let mut acc = 0.0;
            for a in &p1 {
                for b in &p2 {
                    acc += kernel[hamming(a, b) as usize];
                }
            }
            Ok(acc / (m1 * m2) as f64)
        })
        .collect::<Result<Vec<_>>>()?;
    mean_with_sem(per_setting, compute_sem)
}

/// `tr(ρ₁ρ₂) / max(tr ρ₁², tr ρ₂²)`. The standard error propagates the three
/// constituent errors to first order, ignoring their covariance.
pub fn cross_platform_fidelity(
    g1: &MeasurementGroup,
    g2: &MeasurementGroup,
    compute_sem: bool,
) -> Result<EstimateWithError> {
    let o = overlap_direct(g1, g2, compute_sem)?;
    let p1 = purity_direct(g1, compute_sem)?;
    let p2 = purity_direct(g2, compute_sem)?;
    let p = if p1.value >= p2.value { p1 } else { p2 };
    let value = o.value / p.value;
    let sem = match (o.sem, p.sem) {
        (Some(so), Some(sp)) => Some(((so / p.value).powi(2) + (o.value * sp / p.value.powi(2)).powi(2)).sqrt()),
        _ => None,
    };
    Ok(EstimateWithError::new(value, sem, o.n_samples))
}

fn dimension(n: usize) -> f64 {
    2f64.powi(n as i32)
}

/// Linear cross-entropy score `2^N · mean p(s) − 1` of computational-basis
/// data against the ideal state's output probabilities.
pub fn xeb<S: QuantumState + ?Sized>(ideal: &S, data: &MeasurementData) -> Result<f64> {
    if data.n_qubits() != ideal.n_qubits() {
        return Err(Error::SizeMismatch(format!(
            "{}-qubit data for a {}-qubit state",
            data.n_qubits(),
            ideal.n_qubits()
        )));
    }
    if !data.setting().is_computational() {
        return Err(Error::UnsupportedSetting("XEB needs computational-basis data".into()));
    }
    if data.n_shots() == 0 {
        return Err(Error::NotEnoughShots { needed: 1, got: 0 });
    }
    let total = data
        .shots()
        .map(|s| ideal.outcome_probability(s))
        .sum::<Result<f64>>()?;
    Ok(dimension(data.n_qubits()) * total / data.n_shots() as f64 - 1.0)
}

/// [`xeb`] over all records of a group.
pub fn xeb_group<S: QuantumState + ?Sized>(ideal: &S, group: &MeasurementGroup) -> Result<f64> {
    let mut total = 0.0;
    let mut shots = 0usize;
    for data in group.entries() {
        let x = xeb(ideal, data)?;
        total += (x + 1.0) * data.n_shots() as f64;
        shots += data.n_shots();
    }
    Ok(total / shots as f64 - 1.0)
}

/// `2^N Σ_s p(s)² − 1`, the score of perfect samples; `xeb / self_xeb` is the
/// normalized score.
pub fn self_xeb<S: QuantumState + ?Sized>(ideal: &S) -> Result<f64> {
    Ok(dimension(ideal.n_qubits()) * ideal.collision_probability()? - 1.0)
}
