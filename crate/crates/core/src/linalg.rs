//! Small dense linear-algebra kernels on qubit registers.
//!
//! Register convention: in a vector of length `2^n`, site `q` (1-based) is
//! the bit of weight `2^(n - q)`.

use nalgebra::{DMatrix, Matrix2, Matrix4};

use crate::types::Pauli;
use crate::C64;

pub type Mat2 = Matrix2<C64>;
pub type Mat4 = Matrix4<C64>;

pub const UNITARITY_TOL: f64 = 1e-12;

#[inline]
pub(crate) fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// `max |U†U - I|` over all entries.
pub fn unitarity_deviation(u: &DMatrix<C64>) -> f64 {
    let prod = u.adjoint() * u;
    let mut worst = 0.0f64;
    for i in 0..prod.nrows() {
        for j in 0..prod.ncols() {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((prod[(i, j)] - c(target, 0.0)).norm());
        }
    }
    worst
}

pub fn mat2_unitarity_deviation(u: &Mat2) -> f64 {
    let prod = u.adjoint() * u;
    (prod - Mat2::identity()).iter().fold(0.0f64, |m, z| m.max(z.norm()))
}

pub fn mat4_unitarity_deviation(u: &Mat4) -> f64 {
    let prod = u.adjoint() * u;
    (prod - Mat4::identity()).iter().fold(0.0f64, |m, z| m.max(z.norm()))
}

pub fn pauli_matrix(p: Pauli) -> Mat2 {
    let z = c(0.0, 0.0);
    let one = c(1.0, 0.0);
    match p {
        Pauli::I => Mat2::identity(),
        Pauli::X => Mat2::new(z, one, one, z),
        Pauli::Y => Mat2::new(z, c(0.0, -1.0), c(0.0, 1.0), z),
        Pauli::Z => Mat2::new(one, z, z, -one),
    }
}

pub fn hadamard() -> Mat2 {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    Mat2::new(c(h, 0.0), c(h, 0.0), c(h, 0.0), c(-h, 0.0))
}

/// Kronecker product `f[0] ⊗ f[1] ⊗ …`; site 1 is the slowest index.
pub fn kron_all(factors: &[Mat2]) -> DMatrix<C64> {
    let mut out = DMatrix::from_element(1, 1, c(1.0, 0.0));
    for f in factors {
        let d = out.nrows();
        let mut next = DMatrix::zeros(2 * d, 2 * d);
        for i in 0..d {
            for j in 0..d {
                let a = out[(i, j)];
                if a == c(0.0, 0.0) {
                    continue;
                }
                for r in 0..2 {
                    for s in 0..2 {
                        next[(2 * i + r, 2 * j + s)] = a * f[(r, s)];
                    }
                }
            }
        }
        out = next;
    }
    out
}

/// Applies a single-qubit gate in place on a `2^n` vector.
pub fn apply_1q(state: &mut [C64], n: usize, site: usize, u: &Mat2) {
    debug_assert!(site >= 1 && site <= n);
    let stride = 1usize << (n - site);
    let (u00, u01, u10, u11) = (u[(0, 0)], u[(0, 1)], u[(1, 0)], u[(1, 1)]);
    let len = state.len();
    let mut base = 0;
    while base < len {
        for i in base..base + stride {
            let a0 = state[i];
            let a1 = state[i + stride];
            state[i] = u00 * a0 + u01 * a1;
            state[i + stride] = u10 * a0 + u11 * a1;
        }
        base += 2 * stride;
    }
}

/// Applies a two-qubit gate in place. `u` acts on `|x_a x_b⟩` with site `a` as
/// the more significant bit of the gate's 4-dimensional index.
pub fn apply_2q(state: &mut [C64], n: usize, a: usize, b: usize, u: &Mat4) {
    debug_assert!(a != b && a >= 1 && b >= 1 && a <= n && b <= n);
    let ma = 1usize << (n - a);
    let mb = 1usize << (n - b);
    for i in 0..state.len() {
        if i & ma != 0 || i & mb != 0 {
            continue;
        }
        let idx = [i, i | mb, i | ma, i | ma | mb];
        let v = [state[idx[0]], state[idx[1]], state[idx[2]], state[idx[3]]];
        for (r, &target) in idx.iter().enumerate() {
            let mut acc = c(0.0, 0.0);
            for (col, &x) in v.iter().enumerate() {
                acc += u[(r, col)] * x;
            }
            state[target] = acc;
        }
    }
}

pub fn trace(m: &DMatrix<C64>) -> C64 {
    (0..m.nrows()).map(|i| m[(i, i)]).sum()
}

/// `max |M - M†|`.
pub fn hermiticity_deviation(m: &DMatrix<C64>) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..m.nrows() {
        for j in 0..=i {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// Eigenvalues of the Hermitian part of `m`, ascending.
pub fn hermitian_eigenvalues(m: &DMatrix<C64>) -> Vec<f64> {
    let h = (m + m.adjoint()) * c(0.5, 0.0);
    let mut ev: Vec<f64> = h.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(|a, b| a.total_cmp(b));
    ev
}

/// `½ ‖A − B‖₁` for Hermitian `A`, `B`.
pub fn trace_distance(a: &DMatrix<C64>, b: &DMatrix<C64>) -> f64 {
    0.5 * hermitian_eigenvalues(&(a - b)).iter().map(|x| x.abs()).sum::<f64>()
}

/// `tr(A B)` without forming the product.
pub fn trace_of_product(a: &DMatrix<C64>, b: &DMatrix<C64>) -> C64 {
    let d = a.nrows();
    let mut acc = c(0.0, 0.0);
    for i in 0..d {
        for j in 0..d {
            acc += a[(i, j)] * b[(j, i)];
        }
    }
    acc
}

/// Reduced density matrix on `keep` (1-based, increasing) of an `n`-qubit
/// operator.
pub fn partial_trace(rho: &DMatrix<C64>, n: usize, keep: &[usize]) -> DMatrix<C64> {
    let traced: Vec<usize> = (1..=n).filter(|s| !keep.contains(s)).collect();
    let dk = 1usize << keep.len();
    let dt = 1usize << traced.len();
    let embed = |kept_bits: usize, traced_bits: usize| -> usize {
        let mut idx = 0usize;
        for (j, &site) in keep.iter().enumerate() {
            if (kept_bits >> (keep.len() - 1 - j)) & 1 == 1 {
                idx |= 1 << (n - site);
            }
        }
        for (j, &site) in traced.iter().enumerate() {
            if (traced_bits >> (traced.len() - 1 - j)) & 1 == 1 {
                idx |= 1 << (n - site);
            }
        }
        idx
    };
    DMatrix::from_fn(dk, dk, |i, j| {
        (0..dt).map(|t| rho[(embed(i, t), embed(j, t))]).sum()
    })
}

/// Dense matrix of a Pauli string (site 1 first).
pub fn pauli_string_matrix(letters: &[Pauli]) -> DMatrix<C64> {
    let factors: Vec<Mat2> = letters.iter().map(|&p| pauli_matrix(p)).collect();
    kron_all(&factors)
}

/// `tr(P M)` for a Pauli string `P` in `O(2^n)`.
pub fn pauli_trace(letters: &[Pauli], m: &DMatrix<C64>) -> C64 {
    let n = letters.len();
    let mut flip = 0usize;
    for (j, p) in letters.iter().enumerate() {
        if matches!(p, Pauli::X | Pauli::Y) {
            flip |= 1 << (n - 1 - j);
        }
    }
    let d = 1usize << n;
    let mut acc = c(0.0, 0.0);
    for s in 0..d {
        // P[s, s ^ flip] as a product of single-site entries
        let t = s ^ flip;
        let mut phase = c(1.0, 0.0);
        for (j, p) in letters.iter().enumerate() {
            let bit = (s >> (n - 1 - j)) & 1;
            match p {
                Pauli::I | Pauli::X => {}
                Pauli::Y => phase *= if bit == 0 { c(0.0, -1.0) } else { c(0.0, 1.0) },
                Pauli::Z => {
                    if bit == 1 {
                        phase = -phase
                    }
                }
            }
        }
        acc += phase * m[(t, s)];
    }
    acc
}
