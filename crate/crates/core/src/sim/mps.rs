//! Open-boundary matrix product states for qubits.
//!
//! Site `k` holds two matrices `A_k[0]`, `A_k[1]` of shape
//! `left_bond × right_bond`, so that `⟨s|ψ⟩ = A_1[s_1] A_2[s_2] ⋯ A_N[s_N]`.
//! Random states are generated left-canonical. Right environments
//! `E_k = Σ_p A_{k+1}[p] E_{k+1} A_{k+1}[p]†` are computed once at
//! construction; local unitaries on the physical index leave them unchanged,
//! which makes per-shot sequential sampling cost `O(N χ²)`.

use nalgebra::DMatrix;
use rand::{Rng, RngCore};

use super::{check_setting, MeasurementProbability, NoiseModel, QuantumState};
use crate::linalg::{self, c, Mat2};
use crate::sampling::complex_gaussian;
use crate::types::{MeasurementData, MeasurementSetting, Pauli, PauliObservable};
use crate::{Error, Result, C64};

/// Largest `N` for which dense `2^N` outputs are formed from an MPS.
pub const MPS_DENSE_LIMIT: usize = 24;

type SiteMats = [DMatrix<C64>; 2];

#[derive(Clone, Debug)]
pub struct Mps {
    sites: Vec<SiteMats>,
    right_env: Vec<DMatrix<C64>>,
}

fn right_environments(sites: &[SiteMats]) -> (Vec<DMatrix<C64>>, f64) {
    let n = sites.len();
    let mut env = vec![DMatrix::zeros(0, 0); n];
    env[n - 1] = DMatrix::from_element(1, 1, c(1.0, 0.0));
    for k in (1..n).rev() {
        let e = &env[k];
        let a = &sites[k];
        env[k - 1] = &a[0] * e * a[0].adjoint() + &a[1] * e * a[1].adjoint();
    }
    let a = &sites[0];
    let norm2 = (&a[0] * &env[0] * a[0].adjoint() + &a[1] * &env[0] * a[1].adjoint())[(0, 0)].re;
    (env, norm2)
}

impl Mps {
    /// Validates bond shapes and normalizes the state.
    pub fn from_site_matrices(mut sites: Vec<SiteMats>) -> Result<Self> {
        let n = sites.len();
        if n == 0 {
            return Err(Error::InvalidSize("MPS needs at least one site".into()));
        }
        for (k, [a0, a1]) in sites.iter().enumerate() {
            if a0.shape() != a1.shape() {
                return Err(Error::InvalidSize(format!("site {} has mismatched physical slices", k + 1)));
            }
        }
        if sites[0][0].nrows() != 1 || sites[n - 1][0].ncols() != 1 {
            return Err(Error::InvalidSize("boundary bonds must have dimension 1".into()));
        }
        for k in 1..n {
            if sites[k - 1][0].ncols() != sites[k][0].nrows() {
                return Err(Error::InvalidSize(format!("bond {k} dimensions disagree")));
            }
        }
        let (_, norm2) = right_environments(&sites);
        if !(norm2 > 0.0) || !norm2.is_finite() {
            return Err(Error::InvalidInput("MPS has zero or non-finite norm".into()));
        }
        let scale = c(1.0 / norm2.sqrt(), 0.0);
        for a in sites[0].iter_mut() {
            *a *= scale;
        }
        let (right_env, _) = right_environments(&sites);
        Ok(Mps { sites, right_env })
    }

    pub fn product_zero(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidSize("MPS needs at least one site".into()));
        }
        let one = DMatrix::from_element(1, 1, c(1.0, 0.0));
        let zero = DMatrix::from_element(1, 1, c(0.0, 0.0));
        Self::from_site_matrices(vec![[one, zero]; n])
    }

    pub fn ghz(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidSize("MPS needs at least one site".into()));
        }
        let h = std::f64::consts::FRAC_1_SQRT_2;
        if n == 1 {
            let a = DMatrix::from_element(1, 1, c(h, 0.0));
            return Self::from_site_matrices(vec![[a.clone(), a]]);
        }
        let proj = |p: usize, rows: usize, cols: usize| {
            DMatrix::from_fn(rows, cols, |i, j| {
                let hit = (rows == 1 || i == p) && (cols == 1 || j == p);
                if hit { c(1.0, 0.0) } else { c(0.0, 0.0) }
            })
        };
        let mut sites = Vec::with_capacity(n);
        sites.push([proj(0, 1, 2) * c(h, 0.0), proj(1, 1, 2) * c(h, 0.0)]);
        for _ in 1..n - 1 {
            sites.push([proj(0, 2, 2), proj(1, 2, 2)]);
        }
        sites.push([proj(0, 2, 1), proj(1, 2, 1)]);
        Self::from_site_matrices(sites)
    }

    /// Random MPS with bond dimension `min(χ, 2^k, 2^(N-k))` at cut `k`:
    /// i.i.d. standard complex Gaussian entries, then left-canonicalized.
    pub fn random<R: Rng + ?Sized>(n: usize, chi: usize, rng: &mut R) -> Result<Self> {
        if n == 0 || chi == 0 {
            return Err(Error::InvalidSize(format!("random MPS needs N ≥ 1 and χ ≥ 1, got {n}, {chi}")));
        }
        let bond = |k: usize| -> usize {
            if k == 0 || k == n {
                return 1;
            }
            let cap = |e: usize| if e >= 63 { usize::MAX } else { 1usize << e };
            chi.min(cap(k)).min(cap(n - k))
        };
        let mut sites: Vec<SiteMats> = (0..n)
            .map(|k| {
                let (l, r) = (bond(k), bond(k + 1));
                [
                    DMatrix::from_fn(l, r, |_, _| complex_gaussian(rng)),
                    DMatrix::from_fn(l, r, |_, _| complex_gaussian(rng)),
                ]
            })
            .collect();
        left_canonicalize(&mut sites);
        Self::from_site_matrices(sites)
    }

    pub fn n_sites(&self) -> usize {
        self.sites.len()
    }

    /// Bond dimensions of the `N - 1` internal bonds.
    pub fn bond_dims(&self) -> Vec<usize> {
        self.sites[..self.sites.len() - 1].iter().map(|a| a[0].ncols()).collect()
    }

    pub fn max_bond_dim(&self) -> usize {
        self.bond_dims().into_iter().max().unwrap_or(1)
    }

    pub fn norm(&self) -> f64 {
        let (_, norm2) = right_environments(&self.sites);
        norm2.sqrt()
    }

    pub fn amplitude(&self, bits: &[u8]) -> Result<C64> {
        if bits.len() != self.n_sites() {
            return Err(Error::SizeMismatch(format!("{}-bit string on {} sites", bits.len(), self.n_sites())));
        }
        let mut v = DMatrix::from_element(1, 1, c(1.0, 0.0));
        for (a, &b) in self.sites.iter().zip(bits) {
            v = v * &a[b as usize];
        }
        Ok(v[(0, 0)])
    }

    /// Dense amplitudes (site 1 most significant); `N ≤ 24`.
    pub fn to_dense(&self) -> Result<Vec<C64>> {
        self.rotated_dense(None)
    }

    fn rotated_dense(&self, rotations: Option<&[Mat2]>) -> Result<Vec<C64>> {
        let n = self.n_sites();
        if n > MPS_DENSE_LIMIT {
            return Err(Error::TooLargeForDense { n_qubits: n, limit: MPS_DENSE_LIMIT });
        }
        // rows: bitstring prefixes, cols: open right bond
        let mut psi = DMatrix::from_element(1, 1, c(1.0, 0.0));
        for (k, a) in self.sites.iter().enumerate() {
            let b = match rotations {
                Some(us) => rotate_site(a, &us[k]),
                None => a.clone(),
            };
            let rows = psi.nrows();
            let r = b[0].ncols();
            let mut next = DMatrix::zeros(rows * 2, r);
            let p0 = &psi * &b[0];
            let p1 = &psi * &b[1];
            for i in 0..rows {
                next.row_mut(2 * i).copy_from(&p0.row(i));
                next.row_mut(2 * i + 1).copy_from(&p1.row(i));
            }
            psi = next;
        }
        Ok(psi.column(0).iter().copied().collect())
    }

    fn product_transfer(&self, letters: &[Pauli]) -> C64 {
        let mut env = DMatrix::from_element(1, 1, c(1.0, 0.0));
        for (a, &p) in self.sites.iter().zip(letters) {
            let m = linalg::pauli_matrix(p);
            let mut next = DMatrix::zeros(a[0].ncols(), a[0].ncols());
            for bra in 0..2 {
                for ket in 0..2 {
                    let w = m[(bra, ket)];
                    if w == c(0.0, 0.0) {
                        continue;
                    }
                    next += (a[bra].adjoint() * &env * &a[ket]) * w;
                }
            }
            env = next;
        }
        env[(0, 0)]
    }

    fn sample_local(
        &self,
        setting: &MeasurementSetting,
        n_shots: usize,
        noise: Option<&NoiseModel>,
        rng: &mut dyn RngCore,
    ) -> Result<MeasurementData> {
        let n = self.n_sites();
        let us = setting.local_unitaries()?;
        // variants[k][code] = U_k · P_code · A_k, code 0 = no error
        let codes: &[u8] = if noise.is_some() { &[0, 1, 2, 3] } else { &[0] };
        let variants: Vec<Vec<SiteMats>> = self
            .sites
            .iter()
            .zip(&us)
            .map(|(a, u)| {
                codes
                    .iter()
                    .map(|&code| {
                        let p = linalg::pauli_matrix(match code {
                            1 => Pauli::X,
                            2 => Pauli::Y,
                            3 => Pauli::Z,
                            _ => Pauli::I,
                        });
                        rotate_site(a, &(u * p))
                    })
                    .collect()
            })
            .collect();
        let mut outcomes = Vec::with_capacity(n_shots * n);
        let mut row = vec![0u8; n];
        for _ in 0..n_shots {
            let paulis = match noise {
                Some(noise) => noise.draw_paulis(rng),
                None => vec![0u8; n],
            };
            let mut v = DMatrix::from_element(1, 1, c(1.0, 0.0));
            for k in 0..n {
                let b = &variants[k][paulis[k] as usize];
                let env = &self.right_env[k];
                let w0 = &v * &b[0];
                let w1 = &v * &b[1];
                let q0 = (&w0 * env * w0.adjoint())[(0, 0)].re.max(0.0);
                let q1 = (&w1 * env * w1.adjoint())[(0, 0)].re.max(0.0);
                let u: f64 = rng.random::<f64>() * (q0 + q1);
                let (bit, w, q) = if u < q0 { (0u8, w0, q0) } else { (1u8, w1, q1) };
                row[k] = bit;
                v = w / c(q.sqrt(), 0.0);
            }
            outcomes.extend_from_slice(&row);
        }
        MeasurementData::from_flat(setting.clone(), n_shots, outcomes)
    }
}

fn rotate_site(a: &SiteMats, u: &Mat2) -> SiteMats {
    [
        &a[0] * u[(0, 0)] + &a[1] * u[(0, 1)],
        &a[0] * u[(1, 0)] + &a[1] * u[(1, 1)],
    ]
}

fn left_canonicalize(sites: &mut [SiteMats]) {
    let n = sites.len();
    for k in 0..n - 1 {
        let (l, r) = sites[k][0].shape();
        // stack physical slices: rows (p, l)
        let mut m = DMatrix::zeros(2 * l, r);
        m.rows_mut(0, l).copy_from(&sites[k][0]);
        m.rows_mut(l, l).copy_from(&sites[k][1]);
        let qr = m.qr();
        let q = qr.q();
        let rr = qr.r();
        let kept = q.ncols();
        sites[k] = [q.rows(0, l).into_owned(), q.rows(l, l).into_owned()];
        let next = &sites[k + 1];
        let updated = [&rr * &next[0], &rr * &next[1]];
        debug_assert_eq!(updated[0].nrows(), kept);
        sites[k + 1] = updated;
    }
}

impl QuantumState for Mps {
    fn n_qubits(&self) -> usize {
        self.n_sites()
    }

    fn born_probabilities(&self, setting: &MeasurementSetting) -> Result<MeasurementProbability> {
        check_setting(self.n_sites(), setting)?;
        let us = setting.local_unitaries()?;
        let psi = self.rotated_dense(Some(&us))?;
        MeasurementProbability::new(psi.iter().map(|a| a.norm_sqr()).collect(), setting.clone())
    }

    fn sample_measurements(
        &self,
        setting: &MeasurementSetting,
        n_shots: usize,
        noise: Option<&NoiseModel>,
        rng: &mut dyn RngCore,
    ) -> Result<MeasurementData> {
        check_setting(self.n_sites(), setting)?;
        if let Some(noise) = noise {
            noise.check_size(self.n_sites())?;
        }
        if !setting.is_local() {
            return Err(Error::UnsupportedSetting(
                "MPS sampling supports product-form settings only".into(),
            ));
        }
        self.sample_local(setting, n_shots, noise, rng)
    }

    fn pauli_expectation(&self, obs: &PauliObservable) -> Result<f64> {
        if obs.n_qubits() != self.n_sites() {
            return Err(Error::SizeMismatch(format!(
                "{}-qubit observable on {} sites",
                obs.n_qubits(),
                self.n_sites()
            )));
        }
        let norm2 = self.product_transfer(&vec![Pauli::I; self.n_sites()]).re;
        Ok(obs
            .terms()
            .iter()
            .map(|t| t.coefficient * self.product_transfer(&t.letters).re / norm2)
            .sum())
    }

    fn outcome_probability(&self, bits: &[u8]) -> Result<f64> {
        Ok(self.amplitude(bits)?.norm_sqr())
    }

    /// Contracts two ket and two bra replicas: `Σ_s |ψ(s)|⁴` is the squared
    /// norm of the MPS with site matrices `A[p] ⊗ A[p]`.
    fn collision_probability(&self) -> Result<f64> {
        let chi = self.max_bond_dim();
        if chi > 32 {
            return Err(Error::TooLarge(format!("collision contraction at bond dimension {chi}")));
        }
        let mut env = DMatrix::from_element(1, 1, c(1.0, 0.0));
        for a in &self.sites {
            let mut next = DMatrix::zeros(a[0].ncols().pow(2), a[0].ncols().pow(2));
            for p in 0..2 {
                let k = a[p].kronecker(&a[p]);
                next += k.adjoint() * &env * &k;
            }
            env = next;
        }
        Ok(env[(0, 0)].re)
    }
}
