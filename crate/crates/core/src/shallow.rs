//! Shallow-circuit shadows on small registers.
//!
//! The measurement channel of a circuit ensemble,
//!
//! ```text
//! M(X) = E_U Σ_s ⟨s|U X U†|s⟩ U†|s⟩⟨s|U,
//! ```
//!
//! is stored as a dense `4^N × 4^N` superoperator acting on row-major
//! vectorized operators (`vec(X)[i·d + j] = X[i, j]`). It is estimated by
//! averaging exact per-circuit superoperators over sampled circuits, then
//! pseudo-inverted; a snapshot is `ρ̂ = M⁺(U†|s⟩⟨s|U)`.

use std::collections::HashMap;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;

use crate::linalg::c;
use crate::sampling::{self, RngSeed};
use crate::shadows::{BatchShadowSet, DenseShadow};
use crate::types::{Gate, MeasurementGroup, MeasurementSetting, ShallowCircuitSetting, Subsystem};
use crate::{Error, Result, C64};

/// Largest register handled by the dense superoperator.
pub const SHALLOW_LIMIT: usize = 6;

/// Default relative cutoff for discarding singular values.
pub const DEFAULT_RCOND: f64 = 1e-8;

/// Circuits summed per work unit; fixes the summation order independently
/// of the thread count.
const CHUNK: usize = 64;

/// Random-circuit ensemble defining a measurement channel.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CircuitEnsemble {
    /// Brickwork of Haar two-qubit gates; depth 0 measures in the
    /// computational basis.
    Brickwork { n_qubits: usize, depth: usize },
    /// One Haar single-qubit gate per site.
    LocalHaar { n_qubits: usize },
}

impl CircuitEnsemble {
    pub fn n_qubits(&self) -> usize {
        match *self {
            CircuitEnsemble::Brickwork { n_qubits, .. } | CircuitEnsemble::LocalHaar { n_qubits } => n_qubits,
        }
    }

    pub fn depth(&self) -> usize {
        match *self {
            CircuitEnsemble::Brickwork { depth, .. } => depth,
            CircuitEnsemble::LocalHaar { .. } => 1,
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<ShallowCircuitSetting> {
        match *self {
            CircuitEnsemble::Brickwork { n_qubits, depth } => sampling::shallow_setting(n_qubits, depth, rng),
            CircuitEnsemble::LocalHaar { n_qubits } => {
                let gates = (1..=n_qubits)
                    .map(|site| Gate::Single { site, unitary: sampling::haar_unitary_2x2(rng) })
                    .collect();
                ShallowCircuitSetting::new(n_qubits, 1, gates)
            }
        }
    }

    /// Whether `setting` has the size, depth and gate layout of this
    /// ensemble.
    pub fn matches(&self, setting: &ShallowCircuitSetting) -> bool {
        if setting.n_qubits() != self.n_qubits() || setting.depth() != self.depth() {
            return false;
        }
        let expected: Vec<Vec<usize>> = match *self {
            CircuitEnsemble::Brickwork { n_qubits, depth } => (1..=depth)
                .flat_map(|layer| sampling::brickwork_layer(n_qubits, layer))
                .map(|(a, b)| vec![a, b])
                .collect(),
            CircuitEnsemble::LocalHaar { n_qubits } => (1..=n_qubits).map(|s| vec![s]).collect(),
        };
        let single = matches!(self, CircuitEnsemble::LocalHaar { .. });
        setting.layout() == expected
            && setting.gates().iter().all(|g| matches!(g, Gate::Single { .. }) == single)
    }

    fn check(&self) -> Result<()> {
        let n = self.n_qubits();
        if n == 0 {
            return Err(Error::InvalidSize("ensemble needs at least one qubit".into()));
        }
        if n > SHALLOW_LIMIT {
            return Err(Error::TooLarge(format!(
                "dense channels are limited to {SHALLOW_LIMIT} qubits, got {n}"
            )));
        }
        Ok(())
    }
}

/// Estimated measurement channel of an ensemble.
#[derive(Clone, Debug)]
pub struct DenseChannel {
    ensemble: CircuitEnsemble,
    superoperator: DMatrix<C64>,
    n_circuits: usize,
}

impl DenseChannel {
    pub fn new(ensemble: CircuitEnsemble, superoperator: DMatrix<C64>, n_circuits: usize) -> Result<Self> {
        ensemble.check()?;
        let d2 = 1usize << (2 * ensemble.n_qubits());
        if superoperator.shape() != (d2, d2) {
            return Err(Error::SizeMismatch(format!(
                "{}×{} superoperator for {} qubits",
                superoperator.nrows(),
                superoperator.ncols(),
                ensemble.n_qubits()
            )));
        }
        Ok(DenseChannel { ensemble, superoperator, n_circuits })
    }

    pub fn ensemble(&self) -> CircuitEnsemble {
        self.ensemble
    }

    pub fn n_qubits(&self) -> usize {
        self.ensemble.n_qubits()
    }

    pub fn superoperator(&self) -> &DMatrix<C64> {
        &self.superoperator
    }

    pub fn n_circuits(&self) -> usize {
        self.n_circuits
    }

    /// `M(X)` for a `2^N × 2^N` operator.
    pub fn apply(&self, x: &DMatrix<C64>) -> Result<DMatrix<C64>> {
        apply_superoperator(&self.superoperator, x)
    }
}

fn vectorize(x: &DMatrix<C64>) -> DVector<C64> {
    let d = x.nrows();
    DVector::from_fn(d * d, |k, _| x[(k / d, k % d)])
}

fn unvectorize(v: &DVector<C64>, d: usize) -> DMatrix<C64> {
    DMatrix::from_fn(d, d, |i, j| v[i * d + j])
}

fn apply_superoperator(s: &DMatrix<C64>, x: &DMatrix<C64>) -> Result<DMatrix<C64>> {
    let d = x.nrows();
    if x.ncols() != d || d * d != s.ncols() {
        return Err(Error::SizeMismatch(format!("{}×{} operator for a {}-dim superoperator", d, x.ncols(), s.ncols())));
    }
    Ok(unvectorize(&(s * vectorize(x)), d))
}

/// Columns `vec(U†|s⟩⟨s|U)` for all outcomes `s`.
fn outcome_vectors(setting: &ShallowCircuitSetting) -> Result<DMatrix<C64>> {
    let n = setting.n_qubits();
    let d = 1usize << n;
    let u = MeasurementSetting::Shallow(setting.clone()).dense_unitary()?;
    let mut w = DMatrix::zeros(d * d, d);
    for s in 0..d {
        // U†|s⟩ has components conj(U[s, a])
        for a in 0..d {
            let pa = u[(s, a)].conj();
            for b in 0..d {
                w[(a * d + b, s)] = pa * u[(s, b)];
            }
        }
    }
    Ok(w)
}

/// Exact superoperator `Σ_s vec(φ_s φ_s†) vec(φ_s φ_s†)†` of one circuit,
/// with `φ_s = U†|s⟩`.
pub fn circuit_superoperator(setting: &ShallowCircuitSetting) -> Result<DMatrix<C64>> {
    if setting.n_qubits() > SHALLOW_LIMIT {
        return Err(Error::TooLarge(format!(
            "dense channels are limited to {SHALLOW_LIMIT} qubits, got {}",
            setting.n_qubits()
        )));
    }
    let w = outcome_vectors(setting)?;
    Ok(&w * w.adjoint())
}

/// Channel of the brickwork ensemble of the given depth, averaged over
/// `n_circuits` sampled circuits.
pub fn estimate_channel(n_qubits: usize, depth: usize, n_circuits: usize, seed: u64) -> Result<DenseChannel> {
    estimate_channel_for(CircuitEnsemble::Brickwork { n_qubits, depth }, n_circuits, seed)
}

/// Channel of an arbitrary ensemble. Circuit `j` is drawn from the random
/// stream `(seed, j)`.
pub fn estimate_channel_for(ensemble: CircuitEnsemble, n_circuits: usize, seed: u64) -> Result<DenseChannel> {
    ensemble.check()?;
    if n_circuits == 0 {
        return Err(Error::NotEnoughSamples { needed: 1, got: 0 });
    }
    let d = 1usize << ensemble.n_qubits();
    let d2 = d * d;
    let chunks: Vec<(usize, usize)> = (0..n_circuits)
        .step_by(CHUNK)
        .map(|start| (start, (start + CHUNK).min(n_circuits)))
        .collect();
    // W W† with W = A + iB is (AAᵀ + BBᵀ) + i(BAᵀ − ABᵀ); real products of
    // the stacked chunk use the fast f64 kernel
    let partials = chunks
        .par_iter()
        .map(|&(start, end)| {
            let cols = (end - start) * d;
            let mut a = DMatrix::<f64>::zeros(d2, cols);
            let mut b = DMatrix::<f64>::zeros(d2, cols);
            for j in start..end {
                let setting = ensemble.sample(&mut RngSeed::new(seed, j as u64).rng())?;
                let w = outcome_vectors(&setting)?;
                let offset = (j - start) * d;
                for s in 0..d {
                    for r in 0..d2 {
                        let z = w[(r, s)];
                        a[(r, offset + s)] = z.re;
                        b[(r, offset + s)] = z.im;
                    }
                }
            }
            let re = &a * a.transpose() + &b * b.transpose();
            let x = &b * a.transpose();
            let im = &x - x.transpose();
            Ok((re, im))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut re = DMatrix::<f64>::zeros(d2, d2);
    let mut im = DMatrix::<f64>::zeros(d2, d2);
    for (r, i) in partials {
        re += r;
        im += i;
    }
    let scale = 1.0 / n_circuits as f64;
    let total = DMatrix::from_fn(d2, d2, |r, col| c(re[(r, col)] * scale, im[(r, col)] * scale));
    DenseChannel::new(ensemble, total, n_circuits)
}

/// Pseudo-inverse of a measurement channel.
#[derive(Clone, Debug)]
pub struct InverseChannel {
    ensemble: CircuitEnsemble,
    superoperator: DMatrix<C64>,
    condition_number: f64,
    rank: usize,
    residual: f64,
}

impl InverseChannel {
    pub fn ensemble(&self) -> CircuitEnsemble {
        self.ensemble
    }

    pub fn n_qubits(&self) -> usize {
        self.ensemble.n_qubits()
    }

    pub fn superoperator(&self) -> &DMatrix<C64> {
        &self.superoperator
    }

    /// `σ_max / σ_min` over the retained singular values.
    pub fn condition_number(&self) -> f64 {
        self.condition_number
    }

    /// Number of retained singular values.
    pub fn rank(&self) -> usize {
        self.rank
    }

    /// `‖M M⁺ − Π‖_F`, with `Π` the projector onto the retained range of `M`.
    pub fn residual(&self) -> f64 {
        self.residual
    }

    pub fn apply(&self, x: &DMatrix<C64>) -> Result<DMatrix<C64>> {
        apply_superoperator(&self.superoperator, x)
    }
}

/// SVD pseudo-inverse, discarding singular values below `rcond · σ_max`.
/// Sectors the ensemble cannot see (e.g. off-diagonal operators at depth 0)
/// are dropped rather than amplified.
pub fn invert_channel(m: &DenseChannel, rcond: f64) -> Result<InverseChannel> {
    if !(rcond > 0.0 && rcond < 1.0) {
        return Err(Error::InvalidInput(format!("rcond must lie in (0, 1), got {rcond}")));
    }
    let s = m.superoperator();
    if s.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::ChannelNotInvertible("superoperator has non-finite entries".into()));
    }
    let svd = s.clone().svd(true, true);
    let u = svd.u.as_ref().expect("left singular vectors requested");
    let v_t = svd.v_t.as_ref().expect("right singular vectors requested");
    let sigma = &svd.singular_values;
    let smax = sigma.iter().copied().fold(0.0f64, f64::max);
    if !(smax > 0.0) {
        return Err(Error::ChannelNotInvertible("superoperator is zero".into()));
    }
    let kept: Vec<usize> = (0..sigma.len()).filter(|&i| sigma[i] >= rcond * smax).collect();
    let smin = kept.iter().map(|&i| sigma[i]).fold(f64::INFINITY, f64::min);
    let dim = s.nrows();
    let mut inv = DMatrix::<C64>::zeros(dim, dim);
    let mut proj = DMatrix::<C64>::zeros(dim, dim);
    for &i in &kept {
        let ui = u.column(i);
        let vi = v_t.row(i).adjoint();
        inv += &vi * ui.adjoint() * c(1.0 / sigma[i], 0.0);
        proj += &ui * ui.adjoint();
    }
    let residual = (s * &inv - proj).norm();
    Ok(InverseChannel {
        ensemble: m.ensemble(),
        superoperator: inv,
        condition_number: smax / smin,
        rank: kept.len(),
        residual,
    })
}

fn check_group(group: &MeasurementGroup, ensemble: CircuitEnsemble) -> Result<Vec<&ShallowCircuitSetting>> {
    group
        .entries()
        .iter()
        .enumerate()
        .map(|(j, data)| match data.setting() {
            MeasurementSetting::Shallow(s) if ensemble.matches(s) => Ok(s),
            MeasurementSetting::Shallow(_) => Err(Error::EnsembleMismatch(format!(
                "setting {} was not drawn from {:?}",
                j + 1,
                ensemble
            ))),
            other => Err(Error::UnsupportedSetting(format!(
                "setting {} is {}, expected a shallow circuit",
                j + 1,
                other.kind().as_str()
            ))),
        })
        .collect()
}

/// Hermitian part of an inverted snapshot, checked for unit trace.
fn snapshot_matrix(v: &DVector<C64>, d: usize) -> Result<DMatrix<C64>> {
    let m = unvectorize(v, d);
    let h = (&m + m.adjoint()) * c(0.5, 0.0);
    let tr = crate::linalg::trace(&h);
    if (tr - c(1.0, 0.0)).norm() > 1e-6 {
        return Err(Error::ChannelNotInvertible(format!(
            "inverted snapshot has trace {tr}; the identity is outside the retained range"
        )));
    }
    Ok(h)
}

/// Snapshots `M⁺(U†|s⟩⟨s|U)`, one per (setting, shot). Shots with the same
/// outcome under the same setting share their matrix.
pub fn shallow_shadows(group: &MeasurementGroup, minv: &InverseChannel) -> Result<Vec<DenseShadow>> {
    let settings = check_group(group, minv.ensemble())?;
    let n = group.n_qubits();
    let d = 1usize << n;
    let sites = Subsystem::full(n);
    let per_setting = group
        .entries()
        .par_iter()
        .zip(settings)
        .map(|(data, setting)| {
            let mapped = minv.superoperator() * outcome_vectors(setting)?;
            let mut cache: HashMap<usize, Arc<DMatrix<C64>>> = HashMap::new();
            let mut out = Vec::with_capacity(data.n_shots());
            for shot in data.shots() {
                let s = crate::types::bits_index(shot);
                let m = match cache.get(&s) {
                    Some(m) => m.clone(),
                    None => {
                        let m = Arc::new(snapshot_matrix(&mapped.column(s).into_owned(), d)?);
                        cache.insert(s, m.clone());
                        m
                    }
                };
                out.push(DenseShadow::unchecked(m, sites.clone()));
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(per_setting.into_iter().flatten().collect())
}

/// Batch-averaged shallow shadows over contiguous blocks of settings.
pub fn shallow_batch_shadows(
    group: &MeasurementGroup,
    minv: &InverseChannel,
    n_batches: Option<usize>,
) -> Result<BatchShadowSet> {
    let settings = check_group(group, minv.ensemble())?;
    let n = group.n_qubits();
    let d = 1usize << n;
    let assignment = crate::shadows::batch_assignment(group.n_settings(), n_batches.unwrap_or(group.n_settings()))?;
    let n_b = assignment.last().map_or(0, |&b| b + 1);
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); n_b];
    for (j, &b) in assignment.iter().enumerate() {
        members[b].push(j);
    }
    let batches = members
        .par_iter()
        .map(|js| {
            // average of U†|s⟩⟨s|U over the batch's snapshots, then M⁺
            let mut acc = DVector::<C64>::zeros(d * d);
            let mut shots = 0usize;
            for &j in js {
                let data = &group.entries()[j];
                let w = outcome_vectors(settings[j])?;
                let counts = data.counts()?;
                let weights = DVector::from_iterator(d, counts.iter().map(|&k| c(k as f64, 0.0)));
                acc += w * weights;
                shots += data.n_shots();
            }
            if shots == 0 {
                return Err(Error::NotEnoughShots { needed: 1, got: 0 });
            }
            acc /= c(shots as f64, 0.0);
            let m = snapshot_matrix(&(minv.superoperator() * acc), d)?;
            Ok(DenseShadow::unchecked(Arc::new(m), Subsystem::full(n)))
        })
        .collect::<Result<Vec<_>>>()?;
    BatchShadowSet::new(batches, assignment)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg;
    use crate::sim::{self, QuantumState, StateVector};

    fn random_matrix(d: usize, seed: u64) -> DMatrix<C64> {
        let mut rng = RngSeed::new(seed, 0).rng();
        DMatrix::from_fn(d, d, |_, _| sampling::complex_gaussian(&mut rng))
    }

    #[test]
    fn depth_zero_is_dephasing() {
        let ch = estimate_channel(2, 0, 3, 1).unwrap();
        let x = random_matrix(4, 2);
        let y = ch.apply(&x).unwrap();
        let expect = DMatrix::from_fn(4, 4, |i, j| if i == j { x[(i, i)] } else { c(0.0, 0.0) });
        assert!((y - &expect).norm() < 1e-12);
        let inv = invert_channel(&ch, DEFAULT_RCOND).unwrap();
        assert_eq!(inv.rank(), 4);
        assert!((inv.condition_number() - 1.0).abs() < 1e-12);
        assert!((inv.apply(&expect).unwrap() - &expect).norm() < 1e-12);
    }

    #[test]
    fn identity_channel_inverts_to_identity() {
        let ens = CircuitEnsemble::LocalHaar { n_qubits: 1 };
        let ch = DenseChannel::new(ens, DMatrix::identity(4, 4), 1).unwrap();
        let inv = invert_channel(&ch, DEFAULT_RCOND).unwrap();
        assert!((inv.superoperator() - DMatrix::<C64>::identity(4, 4)).norm() < 1e-12);
        assert!((inv.condition_number() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn local_haar_channel_is_trace_preserving_and_inverts() {
        let ens = CircuitEnsemble::LocalHaar { n_qubits: 1 };
        let ch = estimate_channel_for(ens, 4000, 3).unwrap();
        let inv = invert_channel(&ch, DEFAULT_RCOND).unwrap();
        for seed in 0..5 {
            let x = random_matrix(2, 10 + seed);
            let y = ch.apply(&x).unwrap();
            assert!((linalg::trace(&y) - linalg::trace(&x)).norm() < 1e-10);
            let back = ch.apply(&inv.apply(&x).unwrap()).unwrap();
            assert!((back - &x).norm() < 1e-10);
            let closed = &x * c(3.0, 0.0) - DMatrix::identity(2, 2) * linalg::trace(&x);
            assert!((inv.apply(&x).unwrap() - closed).norm() < 0.3);
        }
    }

    #[test]
    fn ensemble_layout_checks() {
        let mut rng = RngSeed::new(4, 0).rng();
        let bw = CircuitEnsemble::Brickwork { n_qubits: 4, depth: 2 };
        let s = bw.sample(&mut rng).unwrap();
        assert!(bw.matches(&s));
        assert!(!CircuitEnsemble::Brickwork { n_qubits: 4, depth: 1 }.matches(&s));
        assert!(!CircuitEnsemble::LocalHaar { n_qubits: 4 }.matches(&s));
        let lh = CircuitEnsemble::LocalHaar { n_qubits: 4 }.sample(&mut rng).unwrap();
        assert!(CircuitEnsemble::LocalHaar { n_qubits: 4 }.matches(&lh));
        assert!(matches!(estimate_channel(7, 1, 1, 0), Err(Error::TooLarge(_))));
    }

    #[test]
    fn depth_zero_shadows_are_diagonal() {
        let ens = CircuitEnsemble::Brickwork { n_qubits: 3, depth: 0 };
        let inv = invert_channel(&estimate_channel_for(ens, 1, 0).unwrap(), DEFAULT_RCOND).unwrap();
        let psi = StateVector::zero(3).unwrap();
        let settings: Vec<MeasurementSetting> = (0..5).map(|j| ens.sample(&mut RngSeed::new(9, j).rng()).unwrap().into()).collect();
        let group = sim::simulate_group(&psi, &settings, 4, None, 1).unwrap();
        for s in shallow_shadows(&group, &inv).unwrap() {
            let m = s.matrix();
            assert!((m[(0, 0)] - c(1.0, 0.0)).norm() < 1e-12);
            assert!((m.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn mismatched_ensembles_are_rejected() {
        let ens = CircuitEnsemble::Brickwork { n_qubits: 3, depth: 1 };
        let inv = invert_channel(&estimate_channel_for(ens, 50, 0).unwrap(), DEFAULT_RCOND).unwrap();
        let other = CircuitEnsemble::Brickwork { n_qubits: 3, depth: 2 };
        let psi = StateVector::zero(3).unwrap();
        let setting: MeasurementSetting = other.sample(&mut RngSeed::new(1, 1).rng()).unwrap().into();
        let group = sim::simulate_group(&psi, &[setting], 4, None, 1).unwrap();
        assert!(matches!(shallow_shadows(&group, &inv), Err(Error::EnsembleMismatch(_))));
        let _ = psi.n_qubits();
    }
}
