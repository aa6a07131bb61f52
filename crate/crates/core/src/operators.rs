//! Dense complex matrix algebra for small Hermitian generators and unitaries.
//!
//! Everything here works on `d x d` matrices with `d <= 16`. Exponentials
//! and logarithms go through eigendecompositions: Hermitian generators are
//! diagonalized directly (closed form for `d = 2`), unitaries through a
//! complex Schur factorization, which is diagonal for normal matrices.
//!
//! Sign convention: a Hermitian generator `eta` and a unitary `U` are related
//! by `U = exp(-i eta)`, so `eta = i logm U`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, Schur};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;

const I: C64 = C64::new(0.0, 1.0);

/// Elementwise tolerance used when validating Hermitian input.
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Per-dimension Frobenius tolerance used when validating unitary input.
pub const UNITARY_TOL: f64 = 1e-10;
/// Eigenvalues of a unitary closer than this are treated as one cluster.
const CLUSTER_TOL: f64 = 1e-8;

/// Matrix norm used for noise susceptibilities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NormKind {
    #[default]
    Frobenius,
    Spectral,
}

/// The norm every susceptibility report uses unless told otherwise.
pub const SUSCEPTIBILITY_NORM: NormKind = NormKind::Frobenius;

/// A Hermitian matrix, e.g. a Hamiltonian term in rad/ns.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianOp(CMatrix);

impl HermitianOp {
    pub fn new(m: CMatrix) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::DimensionMismatch { expected: m.nrows(), found: m.ncols() });
        }
        let dev = hermitian_deviation(&m);
        if dev > HERMITIAN_TOL {
            return Err(Error::NotHermitian(dev));
        }
        Ok(HermitianOp(hermitize(&m)))
    }

    /// Wraps `m` after symmetrizing away round-off; the caller guarantees
    /// that `m` is Hermitian up to accumulated floating point error.
    pub(crate) fn from_hermitian(m: CMatrix) -> Self {
        HermitianOp(hermitize(&m))
    }

    pub fn zeros(dim: usize) -> Self {
        HermitianOp(CMatrix::zeros(dim, dim))
    }

    pub fn identity(dim: usize) -> Self {
        HermitianOp(CMatrix::identity(dim, dim))
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        let d = diag.len();
        HermitianOp(CMatrix::from_fn(d, d, |i, j| if i == j { C64::new(diag[i], 0.0) } else { C64::new(0.0, 0.0) }))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> CMatrix {
        self.0
    }

    pub fn scale(&self, s: f64) -> Self {
        HermitianOp(self.0.map(|z| z * s))
    }

    pub fn add(&self, other: &HermitianOp) -> Result<Self> {
        check_dims(self.dim(), other.dim())?;
        Ok(HermitianOp(&self.0 + &other.0))
    }

    /// Sorted eigenvalues.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut v = eigh(&self.0).values;
        v.sort_by(|a, b| a.total_cmp(b));
        v
    }
}

/// A unitary matrix, e.g. a propagator.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitaryOp(CMatrix);

impl UnitaryOp {
    pub fn new(m: CMatrix) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::DimensionMismatch { expected: m.nrows(), found: m.ncols() });
        }
        let dev = unitarity_defect(&m);
        if dev > UNITARY_TOL * m.nrows() as f64 {
            return Err(Error::NotUnitary(dev));
        }
        Ok(UnitaryOp(m))
    }

    pub(crate) fn from_unitary(m: CMatrix) -> Self {
        UnitaryOp(m)
    }

    pub fn identity(dim: usize) -> Self {
        UnitaryOp(CMatrix::identity(dim, dim))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> CMatrix {
        self.0
    }

    pub fn adjoint(&self) -> UnitaryOp {
        UnitaryOp(self.0.adjoint())
    }

    pub fn compose(&self, right: &UnitaryOp) -> Result<UnitaryOp> {
        check_dims(self.dim(), right.dim())?;
        Ok(UnitaryOp(&self.0 * &right.0))
    }

    /// Multiplies by the global phase `e^{i phi}`.
    pub fn with_phase(&self, phi: f64) -> UnitaryOp {
        let p = C64::from_polar(1.0, phi);
        UnitaryOp(self.0.map(|z| z * p))
    }
}

pub(crate) fn check_dims(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}

pub fn hermitian_deviation(m: &CMatrix) -> f64 {
    let d = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..d {
        for j in 0..d {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

pub fn unitarity_defect(m: &CMatrix) -> f64 {
    let d = m.nrows();
    (m.adjoint() * m - CMatrix::identity(d, d)).norm()
}

pub(crate) fn hermitize(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()).map(|z| z * 0.5)
}

pub fn pauli_x() -> HermitianOp {
    HermitianOp(CMatrix::from_row_slice(
        2,
        2,
        &[C64::new(0.0, 0.0), C64::new(1.0, 0.0), C64::new(1.0, 0.0), C64::new(0.0, 0.0)],
    ))
}

pub fn pauli_y() -> HermitianOp {
    HermitianOp(CMatrix::from_row_slice(
        2,
        2,
        &[C64::new(0.0, 0.0), C64::new(0.0, -1.0), C64::new(0.0, 1.0), C64::new(0.0, 0.0)],
    ))
}

pub fn pauli_z() -> HermitianOp {
    HermitianOp::from_real_diagonal(&[1.0, -1.0])
}

/// Kronecker product `a ⊗ b`; the first factor is the most significant index.
pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

pub fn commutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a * b - b * a
}

/// Eigendecomposition `H = V diag(values) V^dag` of a Hermitian matrix.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    pub vectors: CMatrix,
}

/// Hermitian eigendecomposition; closed form for `d = 2`, cyclic Jacobi above.
pub fn eigh(h: &CMatrix) -> HermitianEigen {
    if h.nrows() == 2 {
        return eigh2(h);
    }
    jacobi(hermitize(h))
}

const JACOBI_SWEEPS: usize = 64;

// nalgebra's complex SymmetricEigen stops early on close eigenvalues (H is
// reproduced only to ~1e-9 at a gap of 6e-3); Jacobi reaches roundoff.
fn jacobi(mut a: CMatrix) -> HermitianEigen {
    let d = a.nrows();
    let mut v = CMatrix::identity(d, d);
    let scale = a.norm();
    for _ in 0..JACOBI_SWEEPS {
        let off: f64 = (0..d)
            .flat_map(|i| (0..d).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)].norm_sqr())
            .sum();
        if off.sqrt() <= f64::EPSILON * scale * 1e-2 || off == 0.0 {
            break;
        }
        for p in 0..d {
            for q in p + 1..d {
                let apq = a[(p, q)];
                let mag = apq.norm();
                if mag == 0.0 {
                    continue;
                }
                // Phase the pair so a_pq is real, then a real Jacobi rotation.
                let e = apq / mag;
                let tau = (a[(q, q)].re - a[(p, p)].re) / (2.0 * mag);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                let (cc, sc) = (C64::new(c, 0.0), C64::new(s, 0.0));
                let ec = e.conj();
                // Columns: A <- A J, V <- V J with J = diag(1, conj(e)) R.
                for k in 0..d {
                    let (akp, akq) = (a[(k, p)], a[(k, q)]);
                    a[(k, p)] = cc * akp - sc * ec * akq;
                    a[(k, q)] = sc * akp + cc * ec * akq;
                    let (vkp, vkq) = (v[(k, p)], v[(k, q)]);
                    v[(k, p)] = cc * vkp - sc * ec * vkq;
                    v[(k, q)] = sc * vkp + cc * ec * vkq;
                }
                // Rows: A <- J^dag A.
                for k in 0..d {
                    let (apk, aqk) = (a[(p, k)], a[(q, k)]);
                    a[(p, k)] = cc * apk - sc * e * aqk;
                    a[(q, k)] = sc * apk + cc * e * aqk;
                }
                a[(p, q)] = C64::new(0.0, 0.0);
                a[(q, p)] = C64::new(0.0, 0.0);
            }
        }
    }
    HermitianEigen { values: (0..d).map(|i| a[(i, i)].re).collect(), vectors: v }
}

fn eigh2(h: &CMatrix) -> HermitianEigen {
    let a = h[(0, 0)].re;
    let d = h[(1, 1)].re;
    let b = (h[(0, 1)] + h[(1, 0)].conj()) * 0.5;
    let mean = 0.5 * (a + d);
    let half = 0.5 * (a - d);
    let r = half.hypot(b.norm());
    if r == 0.0 {
        return HermitianEigen { values: vec![mean, mean], vectors: CMatrix::identity(2, 2) };
    }
    // Eigenvector of mean + r, in whichever of two equivalent forms avoids cancellation.
    let (x, y) = if half >= 0.0 { (C64::new(r + half, 0.0), b.conj()) } else { (b, C64::new(r - half, 0.0)) };
    let n = (x.norm_sqr() + y.norm_sqr()).sqrt();
    let (x, y) = (x / n, y / n);
    let vectors = CMatrix::from_row_slice(2, 2, &[x, -y.conj(), y, x.conj()]);
    HermitianEigen { values: vec![mean + r, mean - r], vectors }
}

impl HermitianEigen {
    /// `exp(-i s H)`.
    pub fn exp(&self, s: f64) -> CMatrix {
        let d = self.values.len();
        let phases: Vec<C64> = self.values.iter().map(|&e| C64::from_polar(1.0, -s * e)).collect();
        let v = &self.vectors;
        let mut out = CMatrix::zeros(d, d);
        for i in 0..d {
            for j in 0..d {
                let mut acc = C64::new(0.0, 0.0);
                for k in 0..d {
                    acc += v[(i, k)] * phases[k] * v[(j, k)].conj();
                }
                out[(i, j)] = acc;
            }
        }
        out
    }

    /// Fréchet derivative of `H -> exp(-i s H)` at this `H` along `direction`,
    /// i.e. `d/de exp(-i s (H + e direction))` at `e = 0`.
    pub fn exp_frechet(&self, s: f64, direction: &CMatrix) -> CMatrix {
        let d = self.values.len();
        let v = &self.vectors;
        let mut inner = v.adjoint() * direction * v;
        for i in 0..d {
            for j in 0..d {
                inner[(i, j)] *= exp_divided_difference(s, self.values[i], self.values[j]);
            }
        }
        v * inner * v.adjoint()
    }
}

/// Divided difference of `x -> exp(-i s x)` at `(a, b)`, stable as `a -> b`.
fn exp_divided_difference(s: f64, a: f64, b: f64) -> C64 {
    let half = 0.5 * s * (a - b);
    let sinc = if half.abs() < 1e-8 { 1.0 - half * half / 6.0 } else { half.sin() / half };
    -I * s * C64::from_polar(1.0, -0.5 * s * (a + b)) * sinc
}

/// `exp(-i s H)`.
pub fn mat_exp(h: &HermitianOp, s: f64) -> UnitaryOp {
    UnitaryOp(eigh(h.matrix()).exp(s))
}

/// The logarithm of a unitary together with the eigenbasis it was built in,
/// which is what its derivative needs.
#[derive(Debug, Clone)]
pub struct UnitaryLog {
    /// Hermitian `eta` with `exp(-i eta) = U`.
    pub generator: HermitianOp,
    vectors: CMatrix,
    phases: Vec<f64>,
}

impl UnitaryLog {
    /// Directional derivative of `U -> eta` along a perturbation `dU`.
    pub fn derivative(&self, du: &CMatrix) -> CMatrix {
        let d = self.phases.len();
        let v = &self.vectors;
        let mut inner = v.adjoint() * du * v;
        for i in 0..d {
            for j in 0..d {
                inner[(i, j)] *= log_divided_difference(self.phases[i], self.phases[j]);
            }
        }
        v * inner * v.adjoint()
    }

    pub fn phases(&self) -> &[f64] {
        &self.phases
    }
}

/// Divided difference of `mu -> i log(mu)` between `mu_a = e^{-i a}` and
/// `mu_b = e^{-i b}` on the branches `a`, `b`.
fn log_divided_difference(a: f64, b: f64) -> C64 {
    let half = 0.5 * (a - b);
    let s = half.sin();
    let ratio = if half.abs() < 1e-8 {
        1.0 + half * half / 6.0
    } else if s.abs() < 1e-12 {
        // Same eigenvalue placed on different branches: the derivative across
        // the pair is undefined and the mixing term is dropped.
        return C64::new(0.0, 0.0);
    } else {
        half / s
    };
    I * C64::from_polar(1.0, 0.5 * (a + b)) * ratio
}

/// Hermitian `eta` with `exp(-i eta) = U`.
///
/// Without a hint every eigenphase is taken on the principal branch
/// `(-pi, pi]`. With a hint (typically the generator of a nearby unitary),
/// each eigenphase is shifted by the multiple of `2 pi` that brings `eta`
/// closest to the hint in Frobenius norm.
pub fn mat_log_unitary(u: &UnitaryOp, branch_hint: Option<&HermitianOp>) -> Result<HermitianOp> {
    Ok(unitary_log(u, branch_hint)?.generator)
}

pub fn unitary_log(u: &UnitaryOp, branch_hint: Option<&HermitianOp>) -> Result<UnitaryLog> {
    let d = u.dim();
    if let Some(h) = branch_hint {
        check_dims(d, h.dim())?;
    }
    let (mut q, t) = Schur::new(u.matrix().clone()).unpack();
    let mu: Vec<C64> = (0..d).map(|i| t[(i, i)]).collect();

    let clusters = cluster_indices(&mu);
    let mut phases: Vec<f64> = mu.iter().map(|m| principal_phase(*m)).collect();

    match branch_hint {
        Some(hint) => {
            for cluster in clusters.iter().filter(|c| c.len() > 1) {
                align_cluster_with_hint(&mut q, cluster, hint.matrix());
            }
            let projected = q.adjoint() * hint.matrix() * &q;
            for (i, phase) in phases.iter_mut().enumerate() {
                let target = projected[(i, i)].re;
                *phase += 2.0 * PI * ((target - *phase) / (2.0 * PI)).round();
            }
        }
        None => {
            let on_cut = |i: usize| (mu[i] + C64::new(1.0, 0.0)).norm() < CLUSTER_TOL.sqrt();
            if clusters.iter().any(|c| c.len() > 1 && c.iter().all(|&i| on_cut(i))) {
                return Err(Error::BranchAmbiguity);
            }
        }
    }

    let mut eta = CMatrix::zeros(d, d);
    for (k, &phase) in phases.iter().enumerate() {
        let col = q.column(k);
        eta += col * col.adjoint() * C64::new(phase, 0.0);
    }
    Ok(UnitaryLog { generator: HermitianOp::from_hermitian(eta), vectors: q, phases })
}

/// `lambda` in `(-pi, pi]` with `mu = e^{-i lambda}`.
fn principal_phase(mu: C64) -> f64 {
    let lambda = -mu.arg();
    if lambda <= -PI {
        lambda + 2.0 * PI
    } else {
        lambda
    }
}

fn cluster_indices(mu: &[C64]) -> Vec<Vec<usize>> {
    let mut clusters: Vec<Vec<usize>> = Vec::new();
    for i in 0..mu.len() {
        match clusters.iter_mut().find(|c| c.iter().any(|&j| (mu[i] - mu[j]).norm() < CLUSTER_TOL)) {
            Some(c) => c.push(i),
            None => clusters.push(vec![i]),
        }
    }
    clusters
}

/// Re-diagonalizes a degenerate eigenspace so that the hint is diagonal in it.
fn align_cluster_with_hint(q: &mut CMatrix, cluster: &[usize], hint: &CMatrix) {
    let d = q.nrows();
    let k = cluster.len();
    let basis = CMatrix::from_fn(d, k, |r, c| q[(r, cluster[c])]);
    let restricted = basis.adjoint() * hint * &basis;
    let eig = eigh(&restricted);
    let rotated = basis * eig.vectors;
    for (c, &col) in cluster.iter().enumerate() {
        q.set_column(col, &rotated.column(c));
    }
}

/// `Tr(eta^dag sigma)`; real for Hermitian arguments.
pub fn pauli_project(eta: &HermitianOp, sigma: &HermitianOp) -> Result<f64> {
    check_dims(eta.dim(), sigma.dim())?;
    Ok(trace_inner(eta.matrix(), sigma.matrix()).re)
}

/// `Tr(a^dag b)`.
pub fn trace_inner(a: &CMatrix, b: &CMatrix) -> C64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}

pub fn frobenius_norm(m: &HermitianOp) -> f64 {
    m.matrix().norm()
}

pub fn matrix_norm(m: &CMatrix, kind: NormKind) -> f64 {
    match kind {
        NormKind::Frobenius => m.norm(),
        NormKind::Spectral => m.clone().singular_values().iter().copied().fold(0.0, f64::max),
    }
}

/// `|Tr(U^dag V)| / d`. Insensitive to a global phase on either argument.
pub fn gate_fidelity(u: &UnitaryOp, v: &UnitaryOp) -> Result<f64> {
    check_dims(u.dim(), v.dim())?;
    Ok(trace_inner(u.matrix(), v.matrix()).norm() / u.dim() as f64)
}
