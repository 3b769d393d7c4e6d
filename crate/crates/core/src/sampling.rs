//! Random measurement settings with reproducible random streams.
//!
//! Every setting `j` of a batch is drawn from its own ChaCha stream
//! `(seed, j)`, so parallel generation gives the same settings as a
//! sequential loop regardless of thread scheduling.

use nalgebra::{DMatrix, Matrix2, Matrix4};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::linalg::{c, hadamard, Mat2, Mat4};
use crate::types::{
    ComputationalBasisSetting, Gate, LocalUnitarySetting, MeasurementSetting, ShallowCircuitSetting,
};
use crate::{Error, Result, C64};

pub type SimRng = ChaCha8Rng;

/// `(seed, stream_id)` names one independent, replayable random stream.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct RngSeed {
    pub seed: u64,
    pub stream_id: u64,
}

impl RngSeed {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        RngSeed { seed, stream_id }
    }

    pub fn rng(&self) -> SimRng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream_id);
        rng
    }
}

/// Standard complex normal variate, `E|z|² = 1`.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    c(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Haar-random `dim × dim` unitary: QR of a complex Ginibre matrix, with the
/// phases of `R`'s diagonal moved into `Q`.
pub fn haar_unitary<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> DMatrix<C64> {
    let z = DMatrix::from_fn(dim, dim, |_, _| complex_gaussian(rng));
    let qr = z.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..dim {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { c(1.0, 0.0) };
        for i in 0..dim {
            q[(i, j)] *= phase;
        }
    }
    q
}

pub fn haar_unitary_2x2<R: Rng + ?Sized>(rng: &mut R) -> Mat2 {
    let u = haar_unitary(2, rng);
    Matrix2::from_fn(|i, j| u[(i, j)])
}

pub fn haar_unitary_4x4<R: Rng + ?Sized>(rng: &mut R) -> Mat4 {
    let u = haar_unitary(4, rng);
    Matrix4::from_fn(|i, j| u[(i, j)])
}

/// One independent Haar rotation per qubit.
pub fn local_unitary_setting<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<LocalUnitarySetting> {
    if n == 0 {
        return Err(Error::InvalidSize("number of qubits must be positive".into()));
    }
    LocalUnitarySetting::new((0..n).map(|_| haar_unitary_2x2(rng)).collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PauliBasis {
    X,
    Y,
    Z,
}

impl PauliBasis {
    /// Rotation taking the basis' eigenvectors to `|0⟩, |1⟩`:
    /// X → H, Y → H·S†, Z → I.
    pub fn rotation(self) -> Mat2 {
        match self {
            PauliBasis::X => hadamard(),
            PauliBasis::Y => {
                let s_dag = Mat2::new(c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, -1.0));
                hadamard() * s_dag
            }
            PauliBasis::Z => Mat2::identity(),
        }
    }
}

/// Uniformly random X, Y or Z basis on each qubit.
pub fn pauli_basis_setting<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<LocalUnitarySetting> {
    if n == 0 {
        return Err(Error::InvalidSize("number of qubits must be positive".into()));
    }
    let us = (0..n)
        .map(|_| match rng.random_range(0..3) {
            0 => PauliBasis::X,
            1 => PauliBasis::Y,
            _ => PauliBasis::Z,
        })
        .map(PauliBasis::rotation)
        .collect();
    LocalUnitarySetting::new(us)
}

pub fn computational_setting(n: usize) -> Result<ComputationalBasisSetting> {
    ComputationalBasisSetting::new(n)
}

/// Site pairs of brickwork layer `layer` (1-based): `(1,2),(3,4),…` on odd
/// layers and `(2,3),(4,5),…` on even layers.
pub fn brickwork_layer(n: usize, layer: usize) -> Vec<(usize, usize)> {
    let start = if layer % 2 == 1 { 1 } else { 2 };
    (start..n).step_by(2).map(|a| (a, a + 1)).collect()
}

/// Brickwork circuit of `depth` layers of Haar-random two-qubit gates.
pub fn shallow_setting<R: Rng + ?Sized>(n: usize, depth: usize, rng: &mut R) -> Result<ShallowCircuitSetting> {
    if n == 0 || (depth > 0 && n < 2) {
        return Err(Error::InvalidSize(format!(
            "brickwork circuit of depth {depth} needs at least 2 qubits, got {n}"
        )));
    }
    let mut gates = Vec::new();
    for layer in 1..=depth {
        for sites in brickwork_layer(n, layer) {
            gates.push(Gate::Two { sites, unitary: haar_unitary_4x4(rng) });
        }
    }
    ShallowCircuitSetting::new(n, depth, gates)
}

/// Draws `count` settings in parallel, setting `j` from stream `(seed, j)`.
pub fn sample_settings<T, F>(count: usize, seed: u64, draw: F) -> Result<Vec<MeasurementSetting>>
where
    T: Into<MeasurementSetting>,
    F: Fn(&mut SimRng) -> Result<T> + Sync,
{
    (0..count)
        .into_par_iter()
        .map(|j| draw(&mut RngSeed::new(seed, j as u64).rng()).map(Into::into))
        .collect()
}
