use nalgebra::DMatrix;

use crate::linalg::{self, Mat2, Mat4, UNITARITY_TOL};
use crate::{Error, Result, C64};

/// Product of single-qubit unitaries `U_1 ⊗ … ⊗ U_N`.
#[derive(Clone, Debug, PartialEq)]
pub struct LocalUnitarySetting {
    unitaries: Vec<Mat2>,
}

impl LocalUnitarySetting {
    pub fn new(unitaries: Vec<Mat2>) -> Result<Self> {
        if unitaries.is_empty() {
            return Err(Error::InvalidSize("a setting needs at least one qubit".into()));
        }
        for u in &unitaries {
            let deviation = linalg::mat2_unitarity_deviation(u);
            if !(deviation < UNITARITY_TOL) {
                return Err(Error::NotUnitary { deviation });
            }
        }
        Ok(LocalUnitarySetting { unitaries })
    }

    pub fn n_qubits(&self) -> usize {
        self.unitaries.len()
    }

    pub fn unitaries(&self) -> &[Mat2] {
        &self.unitaries
    }
}

/// Measurement directly in the computational basis.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ComputationalBasisSetting {
    n_qubits: usize,
}

impl ComputationalBasisSetting {
    pub fn new(n_qubits: usize) -> Result<Self> {
        if n_qubits == 0 {
            return Err(Error::InvalidSize("a setting needs at least one qubit".into()));
        }
        Ok(ComputationalBasisSetting { n_qubits })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }
}

/// A gate of a shallow circuit. Two-qubit gates act on `|x_a x_b⟩` with the
/// first listed site as the more significant bit.
#[derive(Clone, Debug, PartialEq)]
pub enum Gate {
    Single { site: usize, unitary: Mat2 },
    Two { sites: (usize, usize), unitary: Mat4 },
}

impl Gate {
    pub fn sites(&self) -> Vec<usize> {
        match self {
            Gate::Single { site, .. } => vec![*site],
            Gate::Two { sites, .. } => vec![sites.0, sites.1],
        }
    }
}

/// Ordered list of one- and two-qubit gates; the list order is the
/// application order.
#[derive(Clone, Debug, PartialEq)]
pub struct ShallowCircuitSetting {
    n_qubits: usize,
    depth: usize,
    gates: Vec<Gate>,
}

impl ShallowCircuitSetting {
    pub fn new(n_qubits: usize, depth: usize, gates: Vec<Gate>) -> Result<Self> {
        if n_qubits == 0 {
            return Err(Error::InvalidSize("a setting needs at least one qubit".into()));
        }
        for gate in &gates {
            let deviation = match gate {
                Gate::Single { site, unitary } => {
                    if *site == 0 || *site > n_qubits {
                        return Err(Error::InvalidInput(format!("gate site {site} out of range")));
                    }
                    linalg::mat2_unitarity_deviation(unitary)
                }
                Gate::Two { sites: (a, b), unitary } => {
                    if *a == 0 || *b == 0 || *a > n_qubits || *b > n_qubits {
                        return Err(Error::InvalidInput(format!("gate sites ({a},{b}) out of range")));
                    }
                    if a.abs_diff(*b) != 1 {
                        return Err(Error::InvalidInput(format!(
                            "two-qubit gate on ({a},{b}) is not nearest-neighbour"
                        )));
                    }
                    linalg::mat4_unitarity_deviation(unitary)
                }
            };
            if !(deviation < UNITARITY_TOL) {
                return Err(Error::NotUnitary { deviation });
            }
        }
        Ok(ShallowCircuitSetting { n_qubits, depth, gates })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    /// Site tuples of all gates in order, i.e. the circuit layout without
    /// the gate matrices.
    pub fn layout(&self) -> Vec<Vec<usize>> {
        self.gates.iter().map(Gate::sites).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SettingKind {
    Local,
    Computational,
    Shallow,
}

impl SettingKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SettingKind::Local => "local",
            SettingKind::Computational => "computational",
            SettingKind::Shallow => "shallow",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum MeasurementSetting {
    Local(LocalUnitarySetting),
    Computational(ComputationalBasisSetting),
    Shallow(ShallowCircuitSetting),
}

impl MeasurementSetting {
    pub fn n_qubits(&self) -> usize {
        match self {
            MeasurementSetting::Local(s) => s.n_qubits(),
            MeasurementSetting::Computational(s) => s.n_qubits(),
            MeasurementSetting::Shallow(s) => s.n_qubits(),
        }
    }

    pub fn kind(&self) -> SettingKind {
        match self {
            MeasurementSetting::Local(_) => SettingKind::Local,
            MeasurementSetting::Computational(_) => SettingKind::Computational,
            MeasurementSetting::Shallow(_) => SettingKind::Shallow,
        }
    }

    /// True for product-form settings (local or computational).
    pub fn is_local(&self) -> bool {
        !matches!(self, MeasurementSetting::Shallow(_))
    }

    /// True when the setting measures directly in the computational basis.
    pub fn is_computational(&self) -> bool {
        match self {
            MeasurementSetting::Computational(_) => true,
            MeasurementSetting::Local(s) => s.unitaries().iter().all(|u| *u == Mat2::identity()),
            MeasurementSetting::Shallow(s) => s.gates().is_empty(),
        }
    }

    /// Per-site unitaries of a product-form setting (identities for the
    /// computational basis).
    pub fn local_unitaries(&self) -> Result<Vec<Mat2>> {
        match self {
            MeasurementSetting::Local(s) => Ok(s.unitaries().to_vec()),
            MeasurementSetting::Computational(s) => Ok(vec![Mat2::identity(); s.n_qubits()]),
            MeasurementSetting::Shallow(_) => Err(Error::UnsupportedSetting(
                "shallow circuit settings are not of product form".into(),
            )),
        }
    }

    /// Applies the setting unitary to a dense `2^n` state vector in place.
    pub fn apply(&self, state: &mut [C64]) -> Result<()> {
        let n = self.n_qubits();
        if state.len() != 1usize << n {
            return Err(Error::SizeMismatch(format!(
                "vector of length {} for a {n}-qubit setting",
                state.len()
            )));
        }
        match self {
            MeasurementSetting::Local(s) => {
                for (i, u) in s.unitaries().iter().enumerate() {
                    linalg::apply_1q(state, n, i + 1, u);
                }
            }
            MeasurementSetting::Computational(_) => {}
            MeasurementSetting::Shallow(s) => {
                for gate in s.gates() {
                    match gate {
                        Gate::Single { site, unitary } => linalg::apply_1q(state, n, *site, unitary),
                        Gate::Two { sites, unitary } => {
                            linalg::apply_2q(state, n, sites.0, sites.1, unitary)
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// Dense `2^n × 2^n` matrix of the setting unitary.
    pub fn dense_unitary(&self) -> Result<DMatrix<C64>> {
        let n = self.n_qubits();
        const LIMIT: usize = 14;
        if n > LIMIT {
            return Err(Error::TooLargeForDense { n_qubits: n, limit: LIMIT });
        }
        let d = 1usize << n;
        let mut u = DMatrix::<C64>::identity(d, d);
        for j in 0..d {
            self.apply(u.column_mut(j).as_mut_slice())?;
        }
        Ok(u)
    }
}

impl From<LocalUnitarySetting> for MeasurementSetting {
    fn from(s: LocalUnitarySetting) -> Self {
        MeasurementSetting::Local(s)
    }
}

impl From<ComputationalBasisSetting> for MeasurementSetting {
    fn from(s: ComputationalBasisSetting) -> Self {
        MeasurementSetting::Computational(s)
    }
}

impl From<ShallowCircuitSetting> for MeasurementSetting {
    fn from(s: ShallowCircuitSetting) -> Self {
        MeasurementSetting::Shallow(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, hadamard};

    #[test]
    fn rejects_non_unitary() {
        let bad = Mat2::identity() * c(1.0 + 1e-9, 0.0);
        assert!(matches!(
            LocalUnitarySetting::new(vec![bad]),
            Err(Error::NotUnitary { .. })
        ));
    }

    #[test]
    fn rejects_non_neighbour_gate() {
        let g = Gate::Two { sites: (1, 3), unitary: Mat4::identity() };
        assert!(ShallowCircuitSetting::new(3, 1, vec![g]).is_err());
    }

    #[test]
    fn computational_equals_identity_local() {
        let comp = MeasurementSetting::from(ComputationalBasisSetting::new(3).unwrap());
        let local = MeasurementSetting::from(
            LocalUnitarySetting::new(vec![Mat2::identity(); 3]).unwrap(),
        );
        assert_eq!(comp.local_unitaries().unwrap(), local.local_unitaries().unwrap());
        assert!(local.is_computational());
        assert_eq!(comp.dense_unitary().unwrap(), local.dense_unitary().unwrap());
    }

    #[test]
    fn dense_unitary_of_local_setting_is_kron() {
        let h = hadamard();
        let s = MeasurementSetting::from(LocalUnitarySetting::new(vec![h, Mat2::identity()]).unwrap());
        let u = s.dense_unitary().unwrap();
        let expect = linalg::kron_all(&[h, Mat2::identity()]);
        assert!((u - expect).norm() < 1e-14);
    }
}
