//! Randomized measurements on qubit systems.
//!
//! The crate follows the three stages of a randomized-measurement experiment:
//!
//! 1. **Settings** ([`sampling`]): draw random single-qubit rotations or
//!    shallow brickwork circuits from a fixed ensemble.
//! 2. **Data** ([`sim`], or a real device via [`format`]): apply each setting,
//!    measure in the computational basis, collect bitstrings into a
//!    [`MeasurementGroup`].
//! 3. **Post-processing** ([`shadows`], [`estimators`], [`stats`], [`shallow`]):
//!    build classical shadows and estimate observables, trace moments,
//!    purities, overlaps and benchmarking scores, with error bars.
//!
//! Site indices are 1-based everywhere. In a dense `2^N` vector, site 1 is the
//! most significant bit of the basis-state index.
//!
//! ```
//! use randmeas::prelude::*;
//!
//! let n = 6;
//! let settings = sampling::sample_settings(50, 11, |rng| sampling::local_unitary_setting(n, rng))
//!     .unwrap();
//! let psi = Mps::ghz(n).unwrap();
//! let group = sim::simulate_group(&psi, &settings, 20, None, 3).unwrap();
//!
//! let obs = PauliObservable::from_str_letters("ZZIIII").unwrap();
//! let est = estimators::expect_group(&obs, &group, None, None, true).unwrap();
//! assert!((est.value - 1.0).abs() < 5.0 * est.sem.unwrap());
//! ```

pub mod cli;
pub mod error;
pub mod estimators;
pub mod format;
pub mod linalg;
pub mod sampling;
pub mod shadows;
pub mod shallow;
pub mod sim;
pub mod stats;
pub mod types;

pub use error::{Error, Result};
pub use types::{
    BitString, ComputationalBasisSetting, Gate, LocalUnitarySetting, MeasurementData,
    MeasurementGroup, MeasurementSetting, Pauli, PauliObservable, PauliTerm,
    SettingKind, ShallowCircuitSetting, Subsystem,
};

/// Complex scalar used throughout.
pub type C64 = nalgebra::Complex<f64>;

pub mod prelude {
    pub use crate::estimators::{self, EstimateWithError};
    pub use crate::sampling::{self, RngSeed};
    pub use crate::shadows::{self, BatchShadowSet, CalibrationVector, DenseShadow, FactorizedShadow};
    pub use crate::shallow;
    pub use crate::sim::{self, DensityMatrix, Mps, NoiseModel, QuantumState, StateVector};
    pub use crate::stats;
    pub use crate::types::*;
    pub use crate::{Error, Result, C64};
}
