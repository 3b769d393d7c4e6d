use nalgebra::DMatrix;
use rand::{Rng, RngCore};

use super::{check_setting, cumulative, draw_index, MeasurementProbability, NoiseModel, QuantumState};
use crate::linalg::{self, c, Mat2};
use crate::sampling::complex_gaussian;
use crate::types::{bits_index, BitString, MeasurementData, MeasurementSetting, Pauli, PauliObservable};
use crate::{Error, Result, C64};

pub const STATE_VECTOR_LIMIT: usize = 14;
pub const DENSITY_MATRIX_LIMIT: usize = 10;

fn n_from_len(len: usize) -> Result<usize> {
    if len < 2 || !len.is_power_of_two() {
        return Err(Error::InvalidSize(format!("dimension {len} is not 2^N with N ≥ 1")));
    }
    Ok(len.trailing_zeros() as usize)
}

fn pauli_code_matrix(code: u8) -> Mat2 {
    linalg::pauli_matrix(match code {
        1 => Pauli::X,
        2 => Pauli::Y,
        3 => Pauli::Z,
        _ => Pauli::I,
    })
}

fn apply_pauli_string(letters: &[Pauli], state: &mut [C64]) {
    let n = letters.len();
    for (i, &p) in letters.iter().enumerate() {
        if p != Pauli::I {
            linalg::apply_1q(state, n, i + 1, &linalg::pauli_matrix(p));
        }
    }
}

/// Dense pure state on `N ≤ 14` qubits.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    n_qubits: usize,
    amplitudes: Vec<C64>,
}

impl StateVector {
    pub fn new(amplitudes: Vec<C64>) -> Result<Self> {
        let n = n_from_len(amplitudes.len())?;
        if n > STATE_VECTOR_LIMIT {
            return Err(Error::TooLargeForDense { n_qubits: n, limit: STATE_VECTOR_LIMIT });
        }
        let norm: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidInput(format!("state vector norm {norm} ≠ 1")));
        }
        Ok(StateVector { n_qubits: n, amplitudes })
    }

    /// Normalizes `amplitudes` before validating.
    pub fn normalized(mut amplitudes: Vec<C64>) -> Result<Self> {
        let norm: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if !(norm > 0.0) {
            return Err(Error::InvalidInput("zero vector".into()));
        }
        amplitudes.iter_mut().for_each(|a| *a /= norm);
        Self::new(amplitudes)
    }

    pub fn zero(n: usize) -> Result<Self> {
        Self::basis_state(&BitString::zeros(n))
    }

    pub fn basis_state(bits: &BitString) -> Result<Self> {
        if bits.is_empty() || bits.len() > STATE_VECTOR_LIMIT {
            return Err(Error::InvalidSize(format!("{} qubits", bits.len())));
        }
        let mut amps = vec![c(0.0, 0.0); 1 << bits.len()];
        amps[bits.index()] = c(1.0, 0.0);
        Self::new(amps)
    }

    pub fn ghz(n: usize) -> Result<Self> {
        if n == 0 || n > STATE_VECTOR_LIMIT {
            return Err(Error::InvalidSize(format!("{n} qubits")));
        }
        let mut amps = vec![c(0.0, 0.0); 1 << n];
        let h = std::f64::consts::FRAC_1_SQRT_2;
        amps[0] = c(h, 0.0);
        amps[(1 << n) - 1] = c(h, 0.0);
        Self::new(amps)
    }

    /// `|+⟩^⊗N`: every bitstring has probability `2^-N`.
    pub fn uniform_superposition(n: usize) -> Result<Self> {
        if n == 0 || n > STATE_VECTOR_LIMIT {
            return Err(Error::InvalidSize(format!("{n} qubits")));
        }
        let a = (1.0 / (1u64 << n) as f64).sqrt();
        Self::new(vec![c(a, 0.0); 1 << n])
    }

    /// Haar-random pure state.
    pub fn random<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<Self> {
        if n == 0 || n > STATE_VECTOR_LIMIT {
            return Err(Error::InvalidSize(format!("{n} qubits")));
        }
        Self::normalized((0..1usize << n).map(|_| complex_gaussian(rng)).collect())
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amplitudes
    }

    pub fn inner(&self, other: &StateVector) -> C64 {
        self.amplitudes.iter().zip(&other.amplitudes).map(|(a, b)| a.conj() * b).sum()
    }

    pub fn to_density_matrix(&self) -> Result<DensityMatrix> {
        let d = self.amplitudes.len();
        let v = DMatrix::from_column_slice(d, 1, &self.amplitudes);
        DensityMatrix::new(&v * v.adjoint())
    }

    fn rotated(&self, setting: &MeasurementSetting) -> Result<Vec<C64>> {
        let mut psi = self.amplitudes.clone();
        setting.apply(&mut psi)?;
        Ok(psi)
    }
}

impl QuantumState for StateVector {
    fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    fn born_probabilities(&self, setting: &MeasurementSetting) -> Result<MeasurementProbability> {
        check_setting(self.n_qubits, setting)?;
        let psi = self.rotated(setting)?;
        MeasurementProbability::new(psi.iter().map(|a| a.norm_sqr()).collect(), setting.clone())
    }

    fn sample_measurements(
        &self,
        setting: &MeasurementSetting,
        n_shots: usize,
        noise: Option<&NoiseModel>,
        rng: &mut dyn RngCore,
    ) -> Result<MeasurementData> {
        check_setting(self.n_qubits, setting)?;
        let ideal = self.born_probabilities(setting)?;
        let Some(noise) = noise else {
            return ideal.sample(n_shots, rng);
        };
        noise.check_size(self.n_qubits)?;
        // one quantum trajectory per shot; the ideal distribution is reused
        // for shots without an inserted Pauli
        let n = self.n_qubits;
        let ideal_cdf = cumulative(ideal.probabilities());
        let mut outcomes = Vec::with_capacity(n_shots * n);
        for _ in 0..n_shots {
            let paulis = noise.draw_paulis(rng);
            let idx = if paulis.iter().all(|&p| p == 0) {
                draw_index(&ideal_cdf, rng)
            } else {
                let mut psi = self.amplitudes.clone();
                for (i, &code) in paulis.iter().enumerate() {
                    if code != 0 {
                        linalg::apply_1q(&mut psi, n, i + 1, &pauli_code_matrix(code));
                    }
                }
                setting.apply(&mut psi)?;
                let cdf = cumulative(&psi.iter().map(|a| a.norm_sqr()).collect::<Vec<_>>());
                draw_index(&cdf, rng)
            };
            outcomes.extend_from_slice(BitString::from_index(idx, n).as_slice());
        }
        MeasurementData::from_flat(setting.clone(), n_shots, outcomes)
    }

    fn pauli_expectation(&self, obs: &PauliObservable) -> Result<f64> {
        if obs.n_qubits() != self.n_qubits {
            return Err(Error::SizeMismatch(format!(
                "{}-qubit observable on a {}-qubit state",
                obs.n_qubits(),
                self.n_qubits
            )));
        }
        let mut total = 0.0;
        for term in obs.terms() {
            let mut p_psi = self.amplitudes.clone();
            apply_pauli_string(&term.letters, &mut p_psi);
            let v: C64 = self.amplitudes.iter().zip(&p_psi).map(|(a, b)| a.conj() * b).sum();
            total += term.coefficient * v.re;
        }
        Ok(total)
    }

    fn outcome_probability(&self, bits: &[u8]) -> Result<f64> {
        if bits.len() != self.n_qubits {
            return Err(Error::SizeMismatch(format!("{}-bit string", bits.len())));
        }
        Ok(self.amplitudes[bits_index(bits)].norm_sqr())
    }

    fn collision_probability(&self) -> Result<f64> {
        Ok(self.amplitudes.iter().map(|a| a.norm_sqr().powi(2)).sum())
    }
}

/// Dense mixed state on `N ≤ 10` qubits.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    n_qubits: usize,
    matrix: DMatrix<C64>,
}

impl DensityMatrix {
    pub fn new(matrix: DMatrix<C64>) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::InvalidSize("density matrix must be square".into()));
        }
        let n = n_from_len(matrix.nrows())?;
        if n > DENSITY_MATRIX_LIMIT {
            return Err(Error::TooLargeForDense { n_qubits: n, limit: DENSITY_MATRIX_LIMIT });
        }
        let herm = linalg::hermiticity_deviation(&matrix);
        if herm > 1e-10 {
            return Err(Error::InvalidInput(format!("not Hermitian (deviation {herm:.2e})")));
        }
        let tr = linalg::trace(&matrix);
        if (tr - c(1.0, 0.0)).norm() > 1e-10 {
            return Err(Error::InvalidInput(format!("trace {tr} ≠ 1")));
        }
        let min_ev = linalg::hermitian_eigenvalues(&matrix)[0];
        if min_ev < -1e-8 {
            return Err(Error::InvalidInput(format!("negative eigenvalue {min_ev:.2e}")));
        }
        Ok(DensityMatrix { n_qubits: n, matrix })
    }

    pub fn maximally_mixed(n: usize) -> Result<Self> {
        if n == 0 || n > DENSITY_MATRIX_LIMIT {
            return Err(Error::InvalidSize(format!("{n} qubits")));
        }
        let d = 1usize << n;
        Self::new(DMatrix::identity(d, d) * c(1.0 / d as f64, 0.0))
    }

    /// Reduced state of a Haar-random pure state on `n + n_ancilla` qubits,
    /// a random mixed state of rank `≤ 2^n_ancilla`.
    pub fn random_induced<R: Rng + ?Sized>(n: usize, n_ancilla: usize, rng: &mut R) -> Result<Self> {
        if n == 0 || n > DENSITY_MATRIX_LIMIT {
            return Err(Error::InvalidSize(format!("{n} qubits")));
        }
        let d = 1usize << n;
        let k = 1usize << n_ancilla;
        let g = DMatrix::from_fn(d, k, |_, _| complex_gaussian(rng));
        let mut rho = &g * g.adjoint();
        let tr = linalg::trace(&rho).re;
        rho /= c(tr, 0.0);
        // exact Hermitian symmetrization removes rounding asymmetry
        let rho = (&rho + rho.adjoint()) * c(0.5, 0.0);
        Self::new(rho)
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn purity(&self) -> f64 {
        linalg::trace_of_product(&self.matrix, &self.matrix).re
    }

    /// `tr(ρ^k)`.
    pub fn trace_moment(&self, k: usize) -> f64 {
        let mut p = DMatrix::identity(self.matrix.nrows(), self.matrix.ncols());
        for _ in 0..k {
            p = &p * &self.matrix;
        }
        linalg::trace(&p).re
    }

    pub fn reduced(&self, keep: &[usize]) -> Result<DensityMatrix> {
        DensityMatrix::new(linalg::partial_trace(&self.matrix, self.n_qubits, keep))
    }

    /// Applies `ρ ↦ (1 - p)ρ + p·(I/2 ⊗ tr_site ρ)` on each site.
    pub fn depolarized(&self, noise: &NoiseModel) -> Result<DensityMatrix> {
        noise.check_size(self.n_qubits)?;
        let n = self.n_qubits;
        let d = self.matrix.nrows();
        let mut rho = self.matrix.clone();
        for (i, &p) in noise.strengths().iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            let mask = 1usize << (n - 1 - i);
            let mut out = rho.clone() * c(1.0 - p, 0.0);
            for a in 0..d {
                for b in 0..d {
                    if (a & mask) != (b & mask) {
                        continue;
                    }
                    let reduced = rho[(a & !mask, b & !mask)] + rho[(a | mask, b | mask)];
                    out[(a, b)] += reduced * c(0.5 * p, 0.0);
                }
            }
            rho = out;
        }
        Ok(DensityMatrix { n_qubits: n, matrix: rho })
    }

    /// `U ρ U†` for the setting unitary.
    pub fn rotated(&self, setting: &MeasurementSetting) -> Result<DMatrix<C64>> {
        check_setting(self.n_qubits, setting)?;
        let d = self.matrix.nrows();
        let mut a = self.matrix.clone();
        for j in 0..d {
            setting.apply(a.column_mut(j).as_mut_slice())?;
        }
        // U (U ρ)† = U ρ U† for Hermitian ρ
        let mut b = a.adjoint();
        for j in 0..d {
            setting.apply(b.column_mut(j).as_mut_slice())?;
        }
        Ok(b)
    }
}

impl QuantumState for DensityMatrix {
    fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    fn born_probabilities(&self, setting: &MeasurementSetting) -> Result<MeasurementProbability> {
        let r = self.rotated(setting)?;
        MeasurementProbability::new((0..r.nrows()).map(|i| r[(i, i)].re).collect(), setting.clone())
    }

    fn sample_measurements(
        &self,
        setting: &MeasurementSetting,
        n_shots: usize,
        noise: Option<&NoiseModel>,
        rng: &mut dyn RngCore,
    ) -> Result<MeasurementData> {
        let probs = match noise {
            Some(noise) => self.depolarized(noise)?.born_probabilities(setting)?,
            None => self.born_probabilities(setting)?,
        };
        probs.sample(n_shots, rng)
    }

    fn pauli_expectation(&self, obs: &PauliObservable) -> Result<f64> {
        if obs.n_qubits() != self.n_qubits {
            return Err(Error::SizeMismatch(format!(
                "{}-qubit observable on a {}-qubit state",
                obs.n_qubits(),
                self.n_qubits
            )));
        }
        Ok(obs
            .terms()
            .iter()
            .map(|t| t.coefficient * linalg::pauli_trace(&t.letters, &self.matrix).re)
            .sum())
    }

    fn outcome_probability(&self, bits: &[u8]) -> Result<f64> {
        if bits.len() != self.n_qubits {
            return Err(Error::SizeMismatch(format!("{}-bit string", bits.len())));
        }
        let i = bits_index(bits);
        Ok(self.matrix[(i, i)].re)
    }

    fn collision_probability(&self) -> Result<f64> {
        Ok((0..self.matrix.nrows()).map(|i| self.matrix[(i, i)].re.powi(2)).sum())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::{local_unitary_setting, RngSeed};
    use crate::types::ComputationalBasisSetting;

    fn computational(n: usize) -> MeasurementSetting {
        ComputationalBasisSetting::new(n).unwrap().into()
    }

    #[test]
    fn zero_state_is_deterministic() {
        let psi = StateVector::zero(3).unwrap();
        let p = psi.born_probabilities(&computational(3)).unwrap();
        assert_eq!(p.probabilities()[0], 1.0);
        let mut rng = RngSeed::new(0, 0).rng();
        let data = psi.sample_measurements(&computational(3), 50, None, &mut rng).unwrap();
        assert!(data.outcomes_flat().iter().all(|&b| b == 0));
    }

    #[test]
    fn ghz2_probabilities() {
        let p = StateVector::ghz(2).unwrap().born_probabilities(&computational(2)).unwrap();
        let expect = [0.5, 0.0, 0.0, 0.5];
        for (a, b) in p.probabilities().iter().zip(expect) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn rotated_probabilities_match_full_matrix_oracle() {
        let mut rng = RngSeed::new(11, 0).rng();
        let psi = StateVector::random(4, &mut rng).unwrap();
        let setting: MeasurementSetting = local_unitary_setting(4, &mut rng).unwrap().into();
        let u = linalg::kron_all(&setting.local_unitaries().unwrap());
        let v = DMatrix::from_column_slice(16, 1, psi.amplitudes());
        let rotated = &u * v;
        let p = psi.born_probabilities(&setting).unwrap();
        for i in 0..16 {
            assert!((p.probabilities()[i] - rotated[(i, 0)].norm_sqr()).abs() < 1e-12);
        }
        // same through the density-matrix backend
        let rho = psi.to_density_matrix().unwrap();
        let q = rho.born_probabilities(&setting).unwrap();
        for i in 0..16 {
            assert!((p.probabilities()[i] - q.probabilities()[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn setting_then_adjoint_restores_state() {
        let mut rng = RngSeed::new(12, 0).rng();
        let psi = StateVector::random(5, &mut rng).unwrap();
        let setting: MeasurementSetting =
            crate::sampling::shallow_setting(5, 3, &mut rng).unwrap().into();
        let u = setting.dense_unitary().unwrap();
        let v = DMatrix::from_column_slice(32, 1, psi.amplitudes());
        let back = u.adjoint() * (&u * &v);
        assert!((back - v).norm() < 1e-10);
    }

    #[test]
    fn depolarized_zero_state_closed_form() {
        let rho = StateVector::zero(1).unwrap().to_density_matrix().unwrap();
        let noisy = rho.depolarized(&NoiseModel::uniform(1, 0.1).unwrap()).unwrap();
        assert!((noisy.matrix()[(1, 1)].re - 0.05).abs() < 1e-15);
        assert!((noisy.matrix()[(0, 0)].re - 0.95).abs() < 1e-15);
    }

    #[test]
    fn trajectory_noise_single_qubit() {
        // P(1) = p/2 for |0⟩ under depolarizing p
        let psi = StateVector::zero(1).unwrap();
        let noise = NoiseModel::uniform(1, 0.1).unwrap();
        let mut rng = RngSeed::new(13, 0).rng();
        let n = 100_000;
        let data = psi.sample_measurements(&computational(1), n, Some(&noise), &mut rng).unwrap();
        let ones = data.outcomes_flat().iter().filter(|&&b| b == 1).count() as f64 / n as f64;
        let se = (0.05 * 0.95 / n as f64).sqrt();
        assert!((ones - 0.05).abs() < 5.0 * se, "{ones}");
    }

    #[test]
    fn expectation_of_ghz() {
        let psi = StateVector::ghz(5).unwrap();
        let zz = PauliObservable::from_str_letters("ZZIII").unwrap();
        let z = PauliObservable::from_str_letters("ZIIII").unwrap();
        let xxxxx = PauliObservable::from_str_letters("XXXXX").unwrap();
        assert!((psi.pauli_expectation(&zz).unwrap() - 1.0).abs() < 1e-14);
        assert!(psi.pauli_expectation(&z).unwrap().abs() < 1e-14);
        assert!((psi.pauli_expectation(&xxxxx).unwrap() - 1.0).abs() < 1e-14);
        let rho = psi.to_density_matrix().unwrap();
        assert!((rho.pauli_expectation(&xxxxx).unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn density_matrix_validation() {
        let bad = DMatrix::from_element(2, 2, c(0.5, 0.0)) + DMatrix::from_fn(2, 2, |i, j| c(0.0, i as f64 - j as f64));
        assert!(DensityMatrix::new(bad).is_err());
        let mut rng = RngSeed::new(2, 0).rng();
        let rho = DensityMatrix::random_induced(3, 1, &mut rng).unwrap();
        assert!(rho.purity() < 1.0);
        assert!(DensityMatrix::maximally_mixed(11).is_err());
    }
}
