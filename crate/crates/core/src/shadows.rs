//! Classical shadows from randomized-measurement data.
//!
//! For a local setting with rotations `U_i` and outcome `s`, the snapshot is
//! the product of single-site factors
//!
//! ```text
//! ρ̂_i = (3/G_i) U_i†|s_i⟩⟨s_i|U_i − ((3 − G_i)/(2 G_i)) I
//! ```
//!
//! with `G_i = 1` for the standard estimator. A [`CalibrationVector`] supplies
//! measured `G_i` to undo depolarizing readout noise.

use std::collections::HashMap;
use std::sync::Arc;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::linalg::{self, c, Mat2};
use crate::sim::QuantumState;
use crate::types::{MeasurementData, MeasurementGroup, Pauli, Subsystem};
use crate::{Error, Result, C64};

/// Largest subsystem for which dense shadows are built.
pub const DENSE_SHADOW_LIMIT: usize = 12;

/// Accepted range of calibration parameters.
pub const CALIBRATION_MIN: f64 = 0.05;
pub const CALIBRATION_MAX: f64 = 1.2;

const SHADOW_TOL: f64 = 1e-10;

/// Anything that can be traced against a Pauli string.
pub trait Shadow {
    fn n_qubits(&self) -> usize;

    /// `tr(P ρ̂)` for the Pauli string `P`.
    fn trace_with(&self, letters: &[Pauli]) -> C64;
}

/// Snapshot stored as a tensor product of `N` single-site factors.
#[derive(Clone, Debug, PartialEq)]
pub struct FactorizedShadow {
    site_factors: Vec<Mat2>,
    weight: f64,
}

impl FactorizedShadow {
    /// Checks that every factor is Hermitian with unit trace.
    pub fn new(site_factors: Vec<Mat2>) -> Result<Self> {
        if site_factors.is_empty() {
            return Err(Error::InvalidSize("a shadow needs at least one site".into()));
        }
        for (k, f) in site_factors.iter().enumerate() {
            let herm = (f - f.adjoint()).iter().fold(0.0f64, |m, z| m.max(z.norm()));
            let tr = f.trace();
            if herm > SHADOW_TOL || (tr - c(1.0, 0.0)).norm() > SHADOW_TOL {
                return Err(Error::InvalidInput(format!(
                    "site {} factor is not a Hermitian unit-trace matrix",
                    k + 1
                )));
            }
        }
        Ok(FactorizedShadow { site_factors, weight: 1.0 })
    }

    pub fn site_factors(&self) -> &[Mat2] {
        &self.site_factors
    }

    pub fn weight(&self) -> f64 {
        self.weight
    }

    /// Keeps the factors on `sub`. Traced-out factors contribute their trace,
    /// which is 1.
    pub fn reduce(&self, sub: &Subsystem) -> Result<FactorizedShadow> {
        sub.check_within(self.site_factors.len())?;
        Ok(FactorizedShadow {
            site_factors: sub.positions().map(|k| self.site_factors[k]).collect(),
            weight: self.weight,
        })
    }

    /// Full `2^N × 2^N` matrix of the snapshot.
    pub fn to_dense(&self) -> Result<DenseShadow> {
        let n = self.site_factors.len();
        if n > DENSE_SHADOW_LIMIT {
            return Err(Error::TooLargeForDense { n_qubits: n, limit: DENSE_SHADOW_LIMIT });
        }
        Ok(DenseShadow {
            matrix: Arc::new(linalg::kron_all(&self.site_factors)),
            sites: Subsystem::full(n),
            weight: self.weight,
        })
    }
}

impl Shadow for FactorizedShadow {
    fn n_qubits(&self) -> usize {
        self.site_factors.len()
    }

    fn trace_with(&self, letters: &[Pauli]) -> C64 {
        let mut acc = c(1.0, 0.0);
        for (f, &p) in self.site_factors.iter().zip(letters) {
            if p != Pauli::I {
                acc *= pauli_trace_2x2(p, f);
            }
        }
        acc
    }
}

/// `tr(P F)` for a single-site factor.
pub(crate) fn pauli_trace_2x2(p: Pauli, f: &Mat2) -> C64 {
    match p {
        Pauli::I => f[(0, 0)] + f[(1, 1)],
        Pauli::X => f[(0, 1)] + f[(1, 0)],
        Pauli::Y => (f[(0, 1)] - f[(1, 0)]) * c(0.0, 1.0),
        Pauli::Z => f[(0, 0)] - f[(1, 1)],
    }
}

/// Snapshot stored as a dense matrix on a set of sites. Per-shot shadows of
/// the same setting and outcome share one allocation.
#[derive(Clone, Debug)]
pub struct DenseShadow {
    matrix: Arc<DMatrix<C64>>,
    sites: Subsystem,
    weight: f64,
}

impl DenseShadow {
    /// Checks shape, Hermiticity and unit trace.
    pub fn new(matrix: DMatrix<C64>, sites: Subsystem) -> Result<Self> {
        Self::from_shared(Arc::new(matrix), sites)
    }

    pub fn from_shared(matrix: Arc<DMatrix<C64>>, sites: Subsystem) -> Result<Self> {
        let d = 1usize << sites.len();
        if matrix.shape() != (d, d) {
            return Err(Error::SizeMismatch(format!(
                "{}×{} matrix on {} sites",
                matrix.nrows(),
                matrix.ncols(),
                sites.len()
            )));
        }
        if linalg::hermiticity_deviation(&matrix) > SHADOW_TOL {
            return Err(Error::InvalidInput("shadow matrix is not Hermitian".into()));
        }
        if (linalg::trace(&matrix) - c(1.0, 0.0)).norm() > 1e-9 {
            return Err(Error::InvalidInput("shadow matrix does not have unit trace".into()));
        }
        Ok(DenseShadow { matrix, sites, weight: 1.0 })
    }

    pub(crate) fn unchecked(matrix: Arc<DMatrix<C64>>, sites: Subsystem) -> Self {
        DenseShadow { matrix, sites, weight: 1.0 }
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn shared_matrix(&self) -> &Arc<DMatrix<C64>> {
        &self.matrix
    }

    pub fn sites(&self) -> &Subsystem {
        &self.sites
    }

    pub fn weight(&self) -> f64 {
        self.weight
    }
}

impl Shadow for DenseShadow {
    fn n_qubits(&self) -> usize {
        self.sites.len()
    }

    fn trace_with(&self, letters: &[Pauli]) -> C64 {
        linalg::pauli_trace(letters, &self.matrix)
    }
}

/// Batch-averaged dense shadows over contiguous blocks of settings.
#[derive(Clone, Debug)]
pub struct BatchShadowSet {
    batches: Vec<DenseShadow>,
    batch_assignment: Vec<usize>,
    snapshots: Vec<usize>,
}

impl BatchShadowSet {
    /// Wraps externally computed batch matrices (one per batch, common
    /// sites). Each setting index is assigned to the batch given in
    /// `batch_assignment`.
    pub fn new(batches: Vec<DenseShadow>, batch_assignment: Vec<usize>) -> Result<Self> {
        if batches.is_empty() {
            return Err(Error::InvalidSize("empty batch set".into()));
        }
        let sites = batches[0].sites().clone();
        if batches.iter().any(|b| b.sites() != &sites) {
            return Err(Error::SizeMismatch("batch shadows live on different sites".into()));
        }
        let mut snapshots = vec![0usize; batches.len()];
        for &b in &batch_assignment {
            if b >= batches.len() {
                return Err(Error::InvalidInput(format!("setting assigned to missing batch {b}")));
            }
            snapshots[b] += 1;
        }
        Ok(BatchShadowSet { batches, batch_assignment, snapshots })
    }

    /// Builds a set directly from matrices on `sites`, one setting per batch.
    pub fn from_matrices(matrices: Vec<DMatrix<C64>>, sites: Subsystem) -> Result<Self> {
        let n = matrices.len();
        let batches = matrices
            .into_iter()
            .map(|m| DenseShadow::new(m, sites.clone()))
            .collect::<Result<Vec<_>>>()?;
        Self::new(batches, (0..n).collect())
    }

    pub fn n_batches(&self) -> usize {
        self.batches.len()
    }

    pub fn batches(&self) -> &[DenseShadow] {
        &self.batches
    }

    pub fn matrices(&self) -> Vec<&DMatrix<C64>> {
        self.batches.iter().map(|b| b.matrix()).collect()
    }

    /// Batch index of every setting.
    pub fn batch_assignment(&self) -> &[usize] {
        &self.batch_assignment
    }

    /// Number of snapshots averaged into each batch. When built with
    /// [`BatchShadowSet::new`] these are setting counts.
    pub fn snapshots(&self) -> &[usize] {
        &self.snapshots
    }

    pub fn sites(&self) -> &Subsystem {
        self.batches[0].sites()
    }

    /// Snapshot-weighted mean of the batch shadows, i.e. the mean of all
    /// underlying snapshots.
    pub fn mean(&self) -> DMatrix<C64> {
        let total: usize = self.snapshots.iter().sum();
        let mut acc = DMatrix::zeros(self.batches[0].matrix().nrows(), self.batches[0].matrix().ncols());
        for (b, &w) in self.batches.iter().zip(&self.snapshots) {
            acc += b.matrix() * c(w as f64 / total as f64, 0.0);
        }
        acc
    }
}

/// Per-qubit depolarizing parameters `G_i` of the measurement.
#[derive(Clone, Debug, PartialEq)]
pub struct CalibrationVector {
    g: Vec<f64>,
    standard_errors: Option<Vec<f64>>,
}

impl CalibrationVector {
    pub fn new(g: Vec<f64>) -> Result<Self> {
        if g.is_empty() {
            return Err(Error::InvalidSize("empty calibration vector".into()));
        }
        for (k, &v) in g.iter().enumerate() {
            if !(CALIBRATION_MIN..=CALIBRATION_MAX).contains(&v) {
                return Err(Error::CalibrationOutOfRange { site: k + 1, value: v });
            }
        }
        Ok(CalibrationVector { g, standard_errors: None })
    }

    pub fn ones(n: usize) -> Self {
        CalibrationVector { g: vec![1.0; n], standard_errors: None }
    }

    pub fn g(&self) -> &[f64] {
        &self.g
    }

    /// Standard errors of the entries when the vector was estimated from data.
    pub fn standard_errors(&self) -> Option<&[f64]> {
        self.standard_errors.as_deref()
    }

    pub fn n_qubits(&self) -> usize {
        self.g.len()
    }

    pub fn reduce(&self, sub: &Subsystem) -> Result<CalibrationVector> {
        sub.check_within(self.g.len())?;
        Ok(CalibrationVector {
            g: sub.positions().map(|k| self.g[k]).collect(),
            standard_errors: self
                .standard_errors
                .as_ref()
                .map(|se| sub.positions().map(|k| se[k]).collect()),
        })
    }
}

/// Both possible factors of one site for one setting, indexed by outcome bit.
pub(crate) fn site_factor_pair(u: &Mat2, g: f64) -> [Mat2; 2] {
    let scale = c(3.0 / g, 0.0);
    let shift = c((3.0 - g) / (2.0 * g), 0.0);
    [0usize, 1].map(|s| {
        // U†|s⟩ has components conj(U[s, a])
        let phi = [u[(s, 0)].conj(), u[(s, 1)].conj()];
        let mut f = Mat2::from_fn(|a, b| phi[a] * phi[b].conj() * scale);
        f[(0, 0)] -= shift;
        f[(1, 1)] -= shift;
        f
    })
}

fn check_calibration(g: Option<&CalibrationVector>, n: usize) -> Result<Vec<f64>> {
    match g {
        None => Ok(vec![1.0; n]),
        Some(cv) if cv.n_qubits() != n => Err(Error::SizeMismatch(format!(
            "calibration vector of length {} for {} qubits",
            cv.n_qubits(),
            n
        ))),
        Some(cv) => {
            for (k, &v) in cv.g().iter().enumerate() {
                if !(CALIBRATION_MIN..=CALIBRATION_MAX).contains(&v) {
                    return Err(Error::CalibrationOutOfRange { site: k + 1, value: v });
                }
            }
            Ok(cv.g().to_vec())
        }
    }
}

/// Factor pairs of every site of one measurement record.
pub(crate) fn setting_factor_pairs(data: &MeasurementData, g: &[f64]) -> Result<Vec<[Mat2; 2]>> {
    let us = data.setting().local_unitaries()?;
    Ok(us.iter().zip(g).map(|(u, &gi)| site_factor_pair(u, gi)).collect())
}

/// One factorized shadow per (setting, shot), settings in order.
pub fn factorized_shadows(group: &MeasurementGroup, g: Option<&CalibrationVector>) -> Result<Vec<FactorizedShadow>> {
    let g = check_calibration(g, group.n_qubits())?;
    let per_setting = group
        .entries()
        .par_iter()
        .map(|data| {
            let pairs = setting_factor_pairs(data, &g)?;
            Ok(data
                .shots()
                .map(|shot| FactorizedShadow {
                    site_factors: shot.iter().zip(&pairs).map(|(&b, pair)| pair[b as usize]).collect(),
                    weight: 1.0,
                })
                .collect::<Vec<_>>())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(per_setting.into_iter().flatten().collect())
}

/// One dense shadow per (setting, shot) on the full register.
pub fn dense_shadows(group: &MeasurementGroup, g: Option<&CalibrationVector>) -> Result<Vec<DenseShadow>> {
    dense_shadows_impl(group, g, Subsystem::full(group.n_qubits()))
}

/// Dense shadows of the reduced state on `sub`.
pub fn dense_shadows_on(
    group: &MeasurementGroup,
    sub: &Subsystem,
    g: Option<&CalibrationVector>,
) -> Result<Vec<DenseShadow>> {
    let reduced = group.reduce(sub)?;
    let g = g.map(|cv| cv.reduce(sub)).transpose()?;
    dense_shadows_impl(&reduced, g.as_ref(), sub.clone())
}

fn dense_shadows_impl(group: &MeasurementGroup, g: Option<&CalibrationVector>, sites: Subsystem) -> Result<Vec<DenseShadow>> {
    let n = group.n_qubits();
    if n > DENSE_SHADOW_LIMIT {
        return Err(Error::TooLargeForDense { n_qubits: n, limit: DENSE_SHADOW_LIMIT });
    }
    let g = check_calibration(g, n)?;
    let per_setting = group
        .entries()
        .par_iter()
        .map(|data| {
            let pairs = setting_factor_pairs(data, &g)?;
            let mut cache: HashMap<&[u8], Arc<DMatrix<C64>>> = HashMap::new();
            let mut out = Vec::with_capacity(data.n_shots());
            for shot in data.shots() {
                let m = cache
                    .entry(shot)
                    .or_insert_with(|| {
                        let factors: Vec<Mat2> = shot.iter().zip(&pairs).map(|(&b, p)| p[b as usize]).collect();
                        Arc::new(linalg::kron_all(&factors))
                    })
                    .clone();
                out.push(DenseShadow::unchecked(m, sites.clone()));
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(per_setting.into_iter().flatten().collect())
}

/// Contiguous partition of `n_settings` into `n_batches` blocks; when the
/// split is uneven the last `n_settings mod n_batches` blocks get one extra
/// setting.
pub fn batch_assignment(n_settings: usize, n_batches: usize) -> Result<Vec<usize>> {
    if n_batches == 0 || n_batches > n_settings {
        return Err(Error::InvalidInput(format!(
            "cannot split {n_settings} settings into {n_batches} batches"
        )));
    }
    let q = n_settings / n_batches;
    let r = n_settings % n_batches;
    let mut out = Vec::with_capacity(n_settings);
    for b in 0..n_batches {
        let size = if b >= n_batches - r { q + 1 } else { q };
        out.extend(std::iter::repeat_n(b, size));
    }
    Ok(out)
}

/// Batch shadows on the full register. `n_batches = None` makes every
/// setting its own batch.
pub fn batch_shadows(
    group: &MeasurementGroup,
    n_batches: Option<usize>,
    g: Option<&CalibrationVector>,
) -> Result<BatchShadowSet> {
    batch_shadows_impl(group, n_batches, g, Subsystem::full(group.n_qubits()))
}

/// Batch shadows of the reduced state on `sub`.
pub fn batch_shadows_on(
    group: &MeasurementGroup,
    sub: &Subsystem,
    n_batches: Option<usize>,
    g: Option<&CalibrationVector>,
) -> Result<BatchShadowSet> {
    let reduced = group.reduce(sub)?;
    let g = g.map(|cv| cv.reduce(sub)).transpose()?;
    batch_shadows_impl(&reduced, n_batches, g.as_ref(), sub.clone())
}

fn batch_shadows_impl(
    group: &MeasurementGroup,
    n_batches: Option<usize>,
    g: Option<&CalibrationVector>,
    sites: Subsystem,
) -> Result<BatchShadowSet> {
    let n = group.n_qubits();
    if n > DENSE_SHADOW_LIMIT {
        return Err(Error::TooLargeForDense { n_qubits: n, limit: DENSE_SHADOW_LIMIT });
    }
    let g = check_calibration(g, n)?;
    let n_settings = group.n_settings();
    let assignment = batch_assignment(n_settings, n_batches.unwrap_or(n_settings))?;
    let n_b = assignment.last().map_or(0, |&b| b + 1);
    let mut ranges = vec![(usize::MAX, 0usize); n_b];
    for (j, &b) in assignment.iter().enumerate() {
        ranges[b].0 = ranges[b].0.min(j);
        ranges[b].1 = j + 1;
    }
    let entries = group.entries();
    let batches = ranges
        .par_iter()
        .map(|&(start, end)| {
            let d = 1usize << n;
            let mut acc = DMatrix::<C64>::zeros(d, d);
            let mut shots = 0usize;
            for data in &entries[start..end] {
                let pairs = setting_factor_pairs(data, &g)?;
                let counts = data.counts()?;
                acc += factor_transform(&counts, &pairs);
                shots += data.n_shots();
            }
            if shots == 0 {
                return Err(Error::NotEnoughShots { needed: 1, got: 0 });
            }
            acc /= c(shots as f64, 0.0);
            Ok((DenseShadow::unchecked(Arc::new(acc), sites.clone()), shots))
        })
        .collect::<Result<Vec<_>>>()?;
    let (batches, snapshots): (Vec<_>, Vec<_>) = batches.into_iter().unzip();
    Ok(BatchShadowSet { batches, batch_assignment: assignment, snapshots })
}

/// `Σ_s w(s) ⊗_i F_i[s_i]` for weights over all `2^n` outcomes, computed
/// one site at a time in `O(4^n)` per site instead of one Kronecker product
/// per outcome.
pub(crate) fn factor_transform(weights: &[u64], pairs: &[[Mat2; 2]]) -> DMatrix<C64> {
    let n = pairs.len();
    // layout: [(a_1 b_1) … (a_i b_i)] [s_{i+1} … s_n]
    let mut t: Vec<C64> = weights.iter().map(|&w| c(w as f64, 0.0)).collect();
    for (i, pair) in pairs.iter().enumerate() {
        let rest = 1usize << (n - i - 1);
        let done = 1usize << (2 * i);
        let mut next = vec![c(0.0, 0.0); done * 4 * rest];
        for dd in 0..done {
            for s in 0..2 {
                let src = &t[(dd * 2 + s) * rest..(dd * 2 + s + 1) * rest];
                let f = &pair[s];
                for ab in 0..4 {
                    let w = f[(ab >> 1, ab & 1)];
                    if w == c(0.0, 0.0) {
                        continue;
                    }
                    let dst = &mut next[(dd * 4 + ab) * rest..(dd * 4 + ab + 1) * rest];
                    for (x, y) in dst.iter_mut().zip(src) {
                        *x += w * y;
                    }
                }
            }
        }
        t = next;
    }
    let d = 1usize << n;
    let mut m = DMatrix::zeros(d, d);
    for (idx, v) in t.into_iter().enumerate() {
        let (mut row, mut col) = (0usize, 0usize);
        for i in 0..n {
            let ab = (idx >> (2 * (n - 1 - i))) & 3;
            row = (row << 1) | (ab >> 1);
            col = (col << 1) | (ab & 1);
        }
        m[(row, col)] = v;
    }
    m
}

/// Estimates `G_i` from data taken on `|0…0⟩`.
///
/// The standard-shadow estimate of `⟨Z_i⟩` has expectation `G_i` under
/// depolarizing readout noise. Per setting it is divided by its noiseless
/// expectation for the same rotation, `Σ_s |U[s,0]|² z(s)`, which averages
/// to 1 over the ensemble; the ratio of the two sums removes the
/// fluctuation between settings and leaves only shot noise.
pub fn calibration_vector<S: QuantumState + ?Sized>(psi0: &S, group: &MeasurementGroup) -> Result<CalibrationVector> {
    let n = group.n_qubits();
    if psi0.n_qubits() != n {
        return Err(Error::SizeMismatch(format!(
            "{}-qubit reference state for {}-qubit data",
            psi0.n_qubits(),
            n
        )));
    }
    let p0 = psi0.outcome_probability(&vec![0u8; n])?;
    if (p0 - 1.0).abs() > 1e-10 {
        return Err(Error::UnsupportedReferenceState(
            "calibration requires the all-zero product state".into(),
        ));
    }
    // z(s) = 3(|U[s,0]|² − |U[s,1]|²) = tr(Z ρ̂) for outcome s
    let z = |u: &Mat2, s: usize| 3.0 * (u[(s, 0)].norm_sqr() - u[(s, 1)].norm_sqr());
    // per setting: (observed mean of z, noiseless expectation of z) per site
    let per_setting = group
        .entries()
        .par_iter()
        .filter(|data| data.n_shots() > 0)
        .map(|data| {
            let us = data.setting().local_unitaries()?;
            let mut observed = vec![0.0; n];
            for shot in data.shots() {
                for (i, (&b, u)) in shot.iter().zip(&us).enumerate() {
                    observed[i] += z(u, b as usize);
                }
            }
            let m = data.n_shots() as f64;
            let pairs = us
                .iter()
                .zip(observed)
                .map(|(u, o)| (o / m, u[(0, 0)].norm_sqr() * z(u, 0) + u[(1, 0)].norm_sqr() * z(u, 1)))
                .collect::<Vec<_>>();
            Ok((pairs, m))
        })
        .collect::<Result<Vec<_>>>()?;
    if per_setting.is_empty() {
        return Err(Error::NotEnoughShots { needed: 1, got: 0 });
    }
    let mut g = vec![0.0; n];
    for (i, gi) in g.iter_mut().enumerate() {
        let num: f64 = per_setting.iter().map(|(p, m)| m * p[i].0).sum();
        let den: f64 = per_setting.iter().map(|(p, m)| m * p[i].1).sum();
        *gi = num / den;
    }
    // delta method on the ratio, over settings
    let standard_errors = (per_setting.len() >= 2).then(|| {
        (0..n)
            .map(|i| {
                let residuals: Vec<f64> = per_setting.iter().map(|(p, _)| p[i].0 - g[i] * p[i].1).collect();
                let den = crate::stats::mean(&per_setting.iter().map(|(p, _)| p[i].1).collect::<Vec<_>>());
                crate::stats::sem(&residuals).map_or(f64::NAN, |s| s / den)
            })
            .collect()
    });
    let mut cv = CalibrationVector::new(g)?;
    cv.standard_errors = standard_errors;
    Ok(cv)
}

/// Free-function form of [`FactorizedShadow::reduce`].
pub fn reduce_shadow(shadow: &FactorizedShadow, sub: &Subsystem) -> Result<FactorizedShadow> {
    shadow.reduce(sub)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::{self, RngSeed};
    use crate::sim::{self, StateVector};
    use crate::types::MeasurementSetting;

    fn haar_group(state: &StateVector, n_u: usize, n_m: usize, seed: u64) -> MeasurementGroup {
        let n = state.n_qubits();
        let settings = sampling::sample_settings(n_u, seed, |rng| sampling::local_unitary_setting(n, rng)).unwrap();
        sim::simulate_group(state, &settings, n_m, None, seed + 1).unwrap()
    }

    #[test]
    fn identity_rotation_zero_outcome() {
        let [f0, f1] = site_factor_pair(&Mat2::identity(), 1.0);
        assert_eq!(f0, Mat2::new(c(2.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(-1.0, 0.0)));
        assert_eq!(f1, Mat2::new(c(-1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(2.0, 0.0)));
    }

    #[test]
    fn factors_have_unit_trace_for_any_calibration() {
        let mut rng = RngSeed::new(1, 0).rng();
        for g in [0.05, 0.5, 0.9, 1.0, 1.2] {
            let u = sampling::haar_unitary_2x2(&mut rng);
            for f in site_factor_pair(&u, g) {
                assert!((f.trace() - c(1.0, 0.0)).norm() < 1e-12);
                assert!((f - f.adjoint()).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn all_ones_calibration_is_bit_identical() {
        let mut rng = RngSeed::new(2, 0).rng();
        let psi = StateVector::random(3, &mut rng).unwrap();
        let group = haar_group(&psi, 20, 5, 3);
        let a = factorized_shadows(&group, None).unwrap();
        let b = factorized_shadows(&group, Some(&CalibrationVector::ones(3))).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn dense_matches_factorized() {
        let mut rng = RngSeed::new(3, 0).rng();
        let psi = StateVector::random(3, &mut rng).unwrap();
        let group = haar_group(&psi, 10, 4, 4);
        let f = factorized_shadows(&group, None).unwrap();
        let d = dense_shadows(&group, None).unwrap();
        assert_eq!(f.len(), d.len());
        for (x, y) in f.iter().zip(&d) {
            assert!((x.to_dense().unwrap().matrix() - y.matrix()).norm() < 1e-12);
            assert!((linalg::trace(y.matrix()) - c(1.0, 0.0)).norm() < 1e-9);
        }
    }

    #[test]
    fn reduce_then_densify_equals_partial_trace() {
        let mut rng = RngSeed::new(4, 0).rng();
        let psi = StateVector::random(4, &mut rng).unwrap();
        let group = haar_group(&psi, 3, 2, 5);
        let sub = Subsystem::new(vec![2, 4]).unwrap();
        for s in factorized_shadows(&group, None).unwrap() {
            let full = s.to_dense().unwrap();
            let pt = linalg::partial_trace(full.matrix(), 4, sub.sites());
            let red = s.reduce(&sub).unwrap().to_dense().unwrap();
            assert!((pt - red.matrix()).norm() < 1e-12);
            assert_eq!(s.reduce(&Subsystem::full(4)).unwrap(), s);
            assert_eq!(s.reduce(&Subsystem::new(vec![2]).unwrap()).unwrap().site_factors()[0], s.site_factors()[1]);
        }
    }

    #[test]
    fn factor_transform_matches_kron_sum() {
        let mut rng = RngSeed::new(5, 0).rng();
        let pairs: Vec<[Mat2; 2]> = (0..3).map(|_| site_factor_pair(&sampling::haar_unitary_2x2(&mut rng), 0.8)).collect();
        let weights: Vec<u64> = (0..8).map(|i| (i * 7 % 5) as u64).collect();
        let fast = factor_transform(&weights, &pairs);
        let mut slow = DMatrix::zeros(8, 8);
        for (s, &w) in weights.iter().enumerate() {
            let factors: Vec<Mat2> = (0..3).map(|i| pairs[i][(s >> (2 - i)) & 1]).collect();
            slow += linalg::kron_all(&factors) * c(w as f64, 0.0);
        }
        assert!((fast - slow).norm() < 1e-12);
    }

    #[test]
    fn batches_partition_and_average() {
        let mut rng = RngSeed::new(6, 0).rng();
        let psi = StateVector::random(2, &mut rng).unwrap();
        let group = haar_group(&psi, 200, 100, 7);
        let set = batch_shadows(&group, Some(8), None).unwrap();
        assert_eq!(set.n_batches(), 8);
        assert!(set.snapshots().iter().all(|&s| s == 2500));
        let all = dense_shadows(&group, None).unwrap();
        let mut mean = DMatrix::zeros(4, 4);
        for s in &all {
            mean += s.matrix();
        }
        mean /= c(all.len() as f64, 0.0);
        assert!((set.mean() - mean).norm() < 1e-12);
    }

    #[test]
    fn uneven_batches_give_extra_settings_to_the_last() {
        assert_eq!(batch_assignment(7, 3).unwrap(), vec![0, 0, 1, 1, 2, 2, 2]);
        assert_eq!(batch_assignment(8, 3).unwrap(), vec![0, 0, 1, 1, 1, 2, 2, 2]);
        assert!(batch_assignment(2, 3).is_err());
        assert!(batch_assignment(2, 0).is_err());
    }

    #[test]
    fn ghz3_batch_mean_converges() {
        let psi = StateVector::ghz(3).unwrap();
        let rho = psi.to_density_matrix().unwrap();
        let mut distances = Vec::new();
        for (n_u, seed) in [(5000, 8), (50_000, 18)] {
            let group = haar_group(&psi, n_u, 10, seed);
            let set = batch_shadows(&group, Some(10), None).unwrap();
            distances.push(linalg::trace_distance(&set.mean(), rho.matrix()));
        }
        // snapshot noise ~ 7/√(N_U N_M) in trace distance for this state
        assert!(distances[0] < 0.15, "{distances:?}");
        assert!(distances[1] < 0.05, "{distances:?}");
    }

    #[test]
    fn calibration_rejects_other_reference_states() {
        let psi = StateVector::ghz(2).unwrap();
        let group = haar_group(&psi, 4, 2, 9);
        assert!(matches!(
            calibration_vector(&psi, &group),
            Err(Error::UnsupportedReferenceState(_))
        ));
    }

    #[test]
    fn calibration_range_is_enforced() {
        assert!(matches!(
            CalibrationVector::new(vec![1.0, 0.01]),
            Err(Error::CalibrationOutOfRange { site: 2, .. })
        ));
        assert!(CalibrationVector::new(vec![1.3]).is_err());
    }

    #[test]
    fn shallow_settings_are_rejected() {
        let mut rng = RngSeed::new(10, 0).rng();
        let s: MeasurementSetting = sampling::shallow_setting(2, 1, &mut rng).unwrap().into();
        let psi = StateVector::zero(2).unwrap();
        let data = psi.sample_measurements(&s, 3, None, &mut rng).unwrap();
        let group = MeasurementGroup::new(vec![data]).unwrap();
        assert!(matches!(factorized_shadows(&group, None), Err(Error::UnsupportedSetting(_))));
    }
}
