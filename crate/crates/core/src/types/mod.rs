//! Settings, data, observables and subsystems: the vocabulary shared by every
//! other module. All types are immutable values.

mod bits;
mod data;
mod observable;
mod setting;
mod subsystem;

pub use bits::BitString;
pub(crate) use bits::bits_to_index as bits_index;
pub use data::{reduce_group_to_subsystem, MeasurementData, MeasurementGroup};
pub use observable::{reduce_observable_to_subsystem, Pauli, PauliObservable, PauliTerm};
pub use setting::{
    ComputationalBasisSetting, Gate, LocalUnitarySetting, MeasurementSetting,
    ShallowCircuitSetting, SettingKind,
};
pub use subsystem::Subsystem;
