use super::{BitString, LocalUnitarySetting, MeasurementSetting, Subsystem};
use crate::types::ComputationalBasisSetting;
use crate::{Error, Result};

/// Bitstrings recorded in one setting, stored row-major (`n_shots × n_qubits`).
#[derive(Clone, Debug, PartialEq)]
pub struct MeasurementData {
    setting: MeasurementSetting,
    n_shots: usize,
    outcomes: Vec<u8>,
}

impl MeasurementData {
    pub fn new(setting: MeasurementSetting, shots: Vec<BitString>) -> Result<Self> {
        let n = setting.n_qubits();
        if let Some(bad) = shots.iter().find(|s| s.len() != n) {
            return Err(Error::SizeMismatch(format!(
                "bitstring of length {} for a {n}-qubit setting",
                bad.len()
            )));
        }
        let n_shots = shots.len();
        let outcomes = shots.into_iter().flat_map(BitString::into_vec).collect();
        Self::from_flat(setting, n_shots, outcomes)
    }

    /// Builds from a flat row-major outcome buffer.
    pub fn from_flat(setting: MeasurementSetting, n_shots: usize, outcomes: Vec<u8>) -> Result<Self> {
        if n_shots == 0 {
            return Err(Error::InvalidSize("measurement data needs at least one shot".into()));
        }
        let n = setting.n_qubits();
        if outcomes.len() != n_shots * n {
            return Err(Error::SizeMismatch(format!(
                "{} outcome bits for {n_shots} shots on {n} qubits",
                outcomes.len()
            )));
        }
        if outcomes.iter().any(|&b| b > 1) {
            return Err(Error::InvalidInput("outcome bits must be 0 or 1".into()));
        }
        Ok(MeasurementData { setting, n_shots, outcomes })
    }

    pub fn setting(&self) -> &MeasurementSetting {
        &self.setting
    }

    pub fn n_qubits(&self) -> usize {
        self.setting.n_qubits()
    }

    pub fn n_shots(&self) -> usize {
        self.n_shots
    }

    pub fn shot(&self, i: usize) -> &[u8] {
        let n = self.n_qubits();
        &self.outcomes[i * n..(i + 1) * n]
    }

    pub fn shots(&self) -> impl ExactSizeIterator<Item = &[u8]> + '_ {
        self.outcomes.chunks_exact(self.n_qubits())
    }

    pub fn outcomes_flat(&self) -> &[u8] {
        &self.outcomes
    }

    /// Outcome counts indexed by basis-state index; needs `n_qubits ≤ 24`.
    pub fn counts(&self) -> Result<Vec<u64>> {
        let n = self.n_qubits();
        if n > 24 {
            return Err(Error::TooLargeForDense { n_qubits: n, limit: 24 });
        }
        let mut counts = vec![0u64; 1 << n];
        for shot in self.shots() {
            counts[super::bits::bits_to_index(shot)] += 1;
        }
        Ok(counts)
    }

    pub fn reduce(&self, sub: &Subsystem) -> Result<MeasurementData> {
        let n = self.n_qubits();
        sub.check_within(n)?;
        let setting = match &self.setting {
            MeasurementSetting::Local(s) => {
                let us = sub.positions().map(|p| s.unitaries()[p]).collect();
                MeasurementSetting::Local(LocalUnitarySetting::new(us)?)
            }
            MeasurementSetting::Computational(_) => {
                MeasurementSetting::Computational(ComputationalBasisSetting::new(sub.len())?)
            }
            MeasurementSetting::Shallow(_) => {
                return Err(Error::UnsupportedSetting(
                    "cannot reduce shallow-circuit data to a subsystem".into(),
                ))
            }
        };
        let mut outcomes = Vec::with_capacity(self.n_shots * sub.len());
        for shot in self.shots() {
            outcomes.extend(sub.positions().map(|p| shot[p]));
        }
        MeasurementData::from_flat(setting, self.n_shots, outcomes)
    }
}

/// `N_U` measurement records sharing a qubit count.
#[derive(Clone, Debug, PartialEq)]
pub struct MeasurementGroup {
    entries: Vec<MeasurementData>,
}

impl MeasurementGroup {
    pub fn new(entries: Vec<MeasurementData>) -> Result<Self> {
        let first = entries
            .first()
            .ok_or_else(|| Error::InvalidSize("a measurement group needs at least one setting".into()))?;
        let n = first.n_qubits();
        if let Some(bad) = entries.iter().find(|e| e.n_qubits() != n) {
            return Err(Error::SizeMismatch(format!(
                "group mixes {n}-qubit and {}-qubit data",
                bad.n_qubits()
            )));
        }
        Ok(MeasurementGroup { entries })
    }

    pub fn entries(&self) -> &[MeasurementData] {
        &self.entries
    }

    pub fn into_entries(self) -> Vec<MeasurementData> {
        self.entries
    }

    pub fn n_qubits(&self) -> usize {
        self.entries[0].n_qubits()
    }

    pub fn n_settings(&self) -> usize {
        self.entries.len()
    }

    /// Shot count if all settings share it.
    pub fn uniform_shots(&self) -> Option<usize> {
        let m = self.entries[0].n_shots();
        self.entries.iter().all(|e| e.n_shots() == m).then_some(m)
    }

    pub fn total_shots(&self) -> usize {
        self.entries.iter().map(MeasurementData::n_shots).sum()
    }

    pub fn settings(&self) -> impl Iterator<Item = &MeasurementSetting> + '_ {
        self.entries.iter().map(MeasurementData::setting)
    }

    pub fn reduce(&self, sub: &Subsystem) -> Result<MeasurementGroup> {
        let entries = self.entries.iter().map(|e| e.reduce(sub)).collect::<Result<_>>()?;
        MeasurementGroup::new(entries)
    }
}

/// Keeps only the columns (and per-site unitaries) listed in `sub`.
pub fn reduce_group_to_subsystem(group: &MeasurementGroup, sub: &Subsystem) -> Result<MeasurementGroup> {
    group.reduce(sub)
}
