//! Classical simulation of data acquisition: Born-rule sampling from dense
//! state vectors, dense density matrices and matrix product states, with
//! optional single-qubit depolarizing noise before the measurement.

mod dense;
mod mps;

pub use dense::{DensityMatrix, StateVector, DENSITY_MATRIX_LIMIT, STATE_VECTOR_LIMIT};
pub use mps::{Mps, MPS_DENSE_LIMIT};

use rand::{Rng, RngCore};
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::sampling::RngSeed;
use crate::types::{BitString, MeasurementData, MeasurementGroup, MeasurementSetting, PauliObservable};
use crate::{Error, Result};

/// Common interface of the simulation backends.
pub trait QuantumState {
    fn n_qubits(&self) -> usize;

    /// Outcome distribution `p(s) = ⟨s|U ρ U†|s⟩` of the ideal measurement.
    fn born_probabilities(&self, setting: &MeasurementSetting) -> Result<MeasurementProbability>;

    /// `n_shots` i.i.d. bitstrings, with depolarizing noise applied before
    /// the measurement when `noise` is given.
    fn sample_measurements(
        &self,
        setting: &MeasurementSetting,
        n_shots: usize,
        noise: Option<&NoiseModel>,
        rng: &mut dyn RngCore,
    ) -> Result<MeasurementData>;

    fn pauli_expectation(&self, obs: &PauliObservable) -> Result<f64>;

    /// Ideal computational-basis probability of one bitstring.
    fn outcome_probability(&self, bits: &[u8]) -> Result<f64>;

    /// `Σ_s p(s)²` in the computational basis.
    fn collision_probability(&self) -> Result<f64>;
}

/// Per-qubit depolarizing strengths `p_i`: `ρ ↦ (1 - p)ρ + p·I/2` on each site.
#[derive(Clone, Debug, PartialEq)]
pub struct NoiseModel {
    strengths: Vec<f64>,
}

impl NoiseModel {
    pub fn new(strengths: Vec<f64>) -> Result<Self> {
        if let Some(p) = strengths.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::InvalidInput(format!("depolarizing strength {p} outside [0, 1]")));
        }
        Ok(NoiseModel { strengths })
    }

    pub fn uniform(n: usize, p: f64) -> Result<Self> {
        Self::new(vec![p; n])
    }

    /// Strengths drawn from a normal distribution clipped to `[0, 1]`.
    pub fn random_normal<R: Rng + ?Sized>(n: usize, mean: f64, sd: f64, rng: &mut R) -> Result<Self> {
        let dist = Normal::new(mean, sd).map_err(|e| Error::InvalidInput(e.to_string()))?;
        Self::new((0..n).map(|_| dist.sample(rng).clamp(0.0, 1.0)).collect())
    }

    pub fn strengths(&self) -> &[f64] {
        &self.strengths
    }

    pub fn n_qubits(&self) -> usize {
        self.strengths.len()
    }

    pub(crate) fn check_size(&self, n: usize) -> Result<()> {
        if self.strengths.len() != n {
            return Err(Error::SizeMismatch(format!(
                "noise model for {} qubits applied to {n} qubits",
                self.strengths.len()
            )));
        }
        Ok(())
    }

    /// Draws the Pauli inserted on each site for one shot: with probability
    /// `3p/4` a uniformly random X, Y or Z (coded 1..=3), else identity (0).
    pub(crate) fn draw_paulis(&self, rng: &mut dyn RngCore) -> Vec<u8> {
        self.strengths
            .iter()
            .map(|&p| {
                let u: f64 = rng.random();
                if u < 0.75 * p {
                    1 + rng.random_range(0..3u8)
                } else {
                    0
                }
            })
            .collect()
    }
}

/// Normalized outcome distribution over `2^N` bitstrings for one setting.
#[derive(Clone, Debug, PartialEq)]
pub struct MeasurementProbability {
    probabilities: Vec<f64>,
    setting: MeasurementSetting,
}

impl MeasurementProbability {
    pub fn new(probabilities: Vec<f64>, setting: MeasurementSetting) -> Result<Self> {
        if probabilities.len() != 1usize << setting.n_qubits() {
            return Err(Error::SizeMismatch(format!(
                "{} probabilities for a {}-qubit setting",
                probabilities.len(),
                setting.n_qubits()
            )));
        }
        if probabilities.iter().any(|&p| p < -1e-12 || !p.is_finite()) {
            return Err(Error::InvalidInput("negative or non-finite probability".into()));
        }
        let total: f64 = probabilities.iter().sum();
        if (total - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidInput(format!("probabilities sum to {total}")));
        }
        Ok(MeasurementProbability { probabilities, setting })
    }

    /// Empirical Born distribution of recorded data.
    pub fn from_data(data: &MeasurementData) -> Result<Self> {
        let counts = data.counts()?;
        let m = data.n_shots() as f64;
        Self::new(counts.iter().map(|&k| k as f64 / m).collect(), data.setting().clone())
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn setting(&self) -> &MeasurementSetting {
        &self.setting
    }

    /// Draws `n_shots` outcomes by inverse-CDF sampling.
    pub fn sample(&self, n_shots: usize, rng: &mut dyn RngCore) -> Result<MeasurementData> {
        let n = self.setting.n_qubits();
        let cdf = cumulative(&self.probabilities);
        let mut outcomes = Vec::with_capacity(n_shots * n);
        for _ in 0..n_shots {
            let idx = draw_index(&cdf, rng);
            outcomes.extend_from_slice(BitString::from_index(idx, n).as_slice());
        }
        MeasurementData::from_flat(self.setting.clone(), n_shots, outcomes)
    }
}

pub(crate) fn cumulative(p: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    p.iter()
        .map(|&x| {
            acc += x.max(0.0);
            acc
        })
        .collect()
}

pub(crate) fn draw_index(cdf: &[f64], rng: &mut dyn RngCore) -> usize {
    let total = *cdf.last().expect("non-empty distribution");
    let u: f64 = rng.random::<f64>() * total;
    cdf.partition_point(|&c| c <= u).min(cdf.len() - 1)
}

pub(crate) fn check_setting(n: usize, setting: &MeasurementSetting) -> Result<()> {
    if setting.n_qubits() != n {
        return Err(Error::SizeMismatch(format!(
            "{}-qubit setting for a {n}-qubit state",
            setting.n_qubits()
        )));
    }
    Ok(())
}

pub fn born_probabilities<S: QuantumState + ?Sized>(
    state: &S,
    setting: &MeasurementSetting,
) -> Result<MeasurementProbability> {
    state.born_probabilities(setting)
}

pub fn sample_measurements<S: QuantumState + ?Sized>(
    state: &S,
    setting: &MeasurementSetting,
    n_shots: usize,
    noise: Option<&NoiseModel>,
    rng: &mut dyn RngCore,
) -> Result<MeasurementData> {
    state.sample_measurements(setting, n_shots, noise, rng)
}

pub fn pauli_expectation<S: QuantumState + ?Sized>(state: &S, obs: &PauliObservable) -> Result<f64> {
    state.pauli_expectation(obs)
}

/// Simulates one measurement record per setting. Setting `j` draws its shots
/// from the random stream `(seed, j)`, so the result does not depend on how
/// the settings are scheduled across threads.
pub fn simulate_group<S: QuantumState + Sync + ?Sized>(
    state: &S,
    settings: &[MeasurementSetting],
    n_shots: usize,
    noise: Option<&NoiseModel>,
    seed: u64,
) -> Result<MeasurementGroup> {
    if let Some(noise) = noise {
        noise.check_size(state.n_qubits())?;
    }
    let entries = settings
        .par_iter()
        .enumerate()
        .map(|(j, setting)| {
            let mut rng = RngSeed::new(seed, j as u64).rng();
            state.sample_measurements(setting, n_shots, noise, &mut rng)
        })
        .collect::<Result<Vec<_>>>()?;
    MeasurementGroup::new(entries)
}

/// GHZ state `(|0…0⟩ + |1…1⟩)/√2` as an MPS of bond dimension 2.
pub fn ghz_state(n: usize) -> Result<Mps> {
    Mps::ghz(n)
}

/// `|0…0⟩` as a bond-dimension-1 MPS.
pub fn product_zero(n: usize) -> Result<Mps> {
    Mps::product_zero(n)
}

pub fn random_mps<R: Rng + ?Sized>(n: usize, chi: usize, rng: &mut R) -> Result<Mps> {
    Mps::random(n, chi, rng)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noise_validation() {
        assert!(NoiseModel::new(vec![0.1, 1.2]).is_err());
        let mut rng = RngSeed::new(1, 0).rng();
        let m = NoiseModel::random_normal(100, 0.1, 0.02, &mut rng).unwrap();
        assert!(m.strengths().iter().all(|p| (0.0..=1.0).contains(p)));
    }

    #[test]
    fn inverse_cdf_sampling_hits_support_only() {
        let setting = MeasurementSetting::Computational(crate::types::ComputationalBasisSetting::new(2).unwrap());
        let p = MeasurementProbability::new(vec![0.5, 0.0, 0.0, 0.5], setting).unwrap();
        let mut rng = RngSeed::new(3, 0).rng();
        let data = p.sample(1000, &mut rng).unwrap();
        for shot in data.shots() {
            assert!(shot == [0, 0] || shot == [1, 1]);
        }
    }
}
