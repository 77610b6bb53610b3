//! Dense complex linear algebra with a fixed tensor convention: in every
//! product space the right factor runs fastest, so `kron(a, b)` places
//! `b` inside the blocks of `a` and `partial_trace` with [`Factor::Fast`]
//! replaces each block by its trace.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{QqcError, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;
pub type RMatrix = DMatrix<f64>;

const EIG_MAX_SWEEPS: usize = 10_000;

#[inline]
pub fn c64(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// A square complex matrix equal to its own conjugate transpose.
///
/// Construction symmetrizes the input as `(m + m†)/2`, so the invariant
/// holds exactly after every constructor.
#[derive(Clone, Debug, PartialEq)]
pub struct HermitianMatrix(CMatrix);

impl HermitianMatrix {
    pub fn new(m: CMatrix) -> Result<Self> {
        if m.nrows() != m.ncols() || m.nrows() == 0 {
            return Err(QqcError::DimensionMismatch(format!(
                "Hermitian matrix must be square and nonempty, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        Ok(Self::symmetrized(m))
    }

    fn symmetrized(m: CMatrix) -> Self {
        let adj = m.adjoint();
        HermitianMatrix((m + adj).scale(0.5))
    }

    pub fn from_real(m: &RMatrix) -> Result<Self> {
        Self::new(m.map(|v| c64(v, 0.0)))
    }

    pub fn zeros(dim: usize) -> Self {
        HermitianMatrix(CMatrix::zeros(dim, dim))
    }

    pub fn identity(dim: usize) -> Self {
        HermitianMatrix(CMatrix::identity(dim, dim))
    }

    /// The all-ones matrix E.
    pub fn ones(dim: usize) -> Self {
        HermitianMatrix(CMatrix::from_element(dim, dim, c64(1.0, 0.0)))
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let mut m = CMatrix::zeros(diag.len(), diag.len());
        for (i, d) in diag.iter().enumerate() {
            m[(i, i)] = c64(*d, 0.0);
        }
        HermitianMatrix(m)
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_inner(self) -> CMatrix {
        self.0
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.0[(i, j)]
    }

    pub fn trace(&self) -> f64 {
        self.0.trace().re
    }

    pub fn sum_entries(&self) -> f64 {
        self.0.iter().map(|v| v.re).sum()
    }

    pub fn frobenius(&self) -> f64 {
        self.0.norm()
    }

    /// The real inner product `tr(self · other)`.
    pub fn inner(&self, other: &HermitianMatrix) -> f64 {
        self.0
            .iter()
            .zip(other.0.transpose().iter())
            .map(|(a, b)| (a * b).re)
            .sum()
    }

    pub fn add(&self, other: &HermitianMatrix) -> HermitianMatrix {
        HermitianMatrix(&self.0 + &other.0)
    }

    pub fn sub(&self, other: &HermitianMatrix) -> HermitianMatrix {
        HermitianMatrix(&self.0 - &other.0)
    }

    pub fn scale(&self, s: f64) -> HermitianMatrix {
        HermitianMatrix(self.0.scale(s))
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        Ok(*eig_hermitian(self)?.values.last().unwrap_or(&0.0))
    }

    pub fn max_eigenvalue(&self) -> Result<f64> {
        Ok(*eig_hermitian(self)?.values.first().unwrap_or(&0.0))
    }

    /// Projection onto the PSD cone in Frobenius norm.
    pub fn psd_part(&self) -> Result<HermitianMatrix> {
        spectral_map(self, |l| l.max(0.0))
    }

    /// Frobenius norm of the negative spectral part, i.e. the distance to the PSD cone.
    pub fn negative_part_norm(&self) -> Result<f64> {
        let e = eig_hermitian(self)?;
        Ok(e.values.iter().filter(|l| **l < 0.0).map(|l| l * l).sum::<f64>().sqrt())
    }
}

/// Ordered factor dimensions of a tensor product space, slowest first.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TensorIndex {
    dims: Vec<usize>,
}

impl TensorIndex {
    pub fn new(dims: Vec<usize>) -> Result<Self> {
        if dims.is_empty() || dims.contains(&0) {
            return Err(QqcError::DimensionMismatch(format!("invalid factor dimensions {dims:?}")));
        }
        Ok(TensorIndex { dims })
    }

    pub fn pair(slow: usize, fast: usize) -> Result<Self> {
        Self::new(vec![slow, fast])
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn total(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn flat(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.dims).fold(0, |acc, (i, d)| acc * d + i)
    }

    pub fn split(&self, mut flat: usize) -> Vec<usize> {
        let mut out = vec![0; self.dims.len()];
        for (slot, d) in out.iter_mut().zip(&self.dims).rev() {
            *slot = flat % d;
            flat /= d;
        }
        out
    }
}

/// Which factor of a bipartite [`TensorIndex`] to trace out.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Factor {
    Slow,
    Fast,
}

pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

pub fn schur(a: &CMatrix, b: &CMatrix) -> Result<CMatrix> {
    if a.shape() != b.shape() {
        return Err(QqcError::DimensionMismatch(format!(
            "Schur product of {:?} and {:?}",
            a.shape(),
            b.shape()
        )));
    }
    Ok(a.component_mul(b))
}

pub fn partial_trace(m: &HermitianMatrix, idx: &TensorIndex, factor: Factor) -> Result<HermitianMatrix> {
    if idx.dims().len() != 2 {
        return Err(QqcError::DimensionMismatch("partial trace needs exactly two factors".into()));
    }
    if m.dim() != idx.total() {
        return Err(QqcError::DimensionMismatch(format!(
            "matrix of dimension {} on a space of dimension {}",
            m.dim(),
            idx.total()
        )));
    }
    let (ds, df) = (idx.dims()[0], idx.dims()[1]);
    let out = match factor {
        Factor::Fast => ptrace_fast(m.as_matrix(), ds, df),
        Factor::Slow => ptrace_slow(m.as_matrix(), ds, df),
    };
    Ok(HermitianMatrix(out))
}

pub(crate) fn ptrace_fast(m: &CMatrix, ds: usize, df: usize) -> CMatrix {
    CMatrix::from_fn(ds, ds, |x, y| (0..df).map(|i| m[(x * df + i, y * df + i)]).sum())
}

pub(crate) fn ptrace_slow(m: &CMatrix, ds: usize, df: usize) -> CMatrix {
    CMatrix::from_fn(df, df, |i, j| (0..ds).map(|x| m[(x * df + i, x * df + j)]).sum())
}

/// Eigendecomposition with eigenvalues in descending order.
///
/// Each eigenvector is rotated so that its largest-magnitude entry is real
/// and positive, which makes the output deterministic.
#[derive(Clone, Debug)]
pub struct Eigen {
    pub values: Vec<f64>,
    pub vectors: CMatrix,
}

pub fn eig_hermitian(m: &HermitianMatrix) -> Result<Eigen> {
    let d = m.dim();
    let raw = SymmetricEigen::try_new(m.as_matrix().clone(), f64::EPSILON, EIG_MAX_SWEEPS)
        .ok_or(QqcError::EigenNonConvergence(EIG_MAX_SWEEPS))?;
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| raw.eigenvalues[b].total_cmp(&raw.eigenvalues[a]));
    let values: Vec<f64> = order.iter().map(|&k| raw.eigenvalues[k]).collect();
    let mut vectors = CMatrix::zeros(d, d);
    for (col, &k) in order.iter().enumerate() {
        let v = raw.eigenvectors.column(k);
        let pivot = v.iter().copied().max_by(|a, b| a.norm().total_cmp(&b.norm())).unwrap_or(c64(1.0, 0.0));
        let phase = if pivot.norm() > 0.0 { pivot.conj() / pivot.norm() } else { c64(1.0, 0.0) };
        vectors.set_column(col, &(v * phase));
    }
    let e = Eigen { values, vectors };
    let err = (m.as_matrix() - e.reconstruct()).norm();
    if err > 1e-9 * (1.0 + m.frobenius()) {
        return Err(QqcError::EigenNonConvergence(EIG_MAX_SWEEPS));
    }
    Ok(e)
}

impl Eigen {
    pub fn reconstruct(&self) -> CMatrix {
        let lam = CMatrix::from_diagonal(&DVector::from_iterator(
            self.values.len(),
            self.values.iter().map(|l| c64(*l, 0.0)),
        ));
        &self.vectors * lam * self.vectors.adjoint()
    }
}

/// Applies a real function to the spectrum of a Hermitian matrix.
pub fn spectral_map(m: &HermitianMatrix, f: impl Fn(f64) -> f64) -> Result<HermitianMatrix> {
    let e = eig_hermitian(m)?;
    let mut scaled = e.vectors.clone();
    for (k, l) in e.values.iter().enumerate() {
        let fl = f(*l);
        scaled.column_mut(k).scale_mut(fl);
    }
    HermitianMatrix::new(scaled * e.vectors.adjoint())
}

/// Vectors whose Gram matrix `⟨v_X|v_Y⟩` reproduces `g`.
///
/// Eigenvalues at or below `rank_tol` are treated as zero; anything below
/// `-rank_tol` is rejected as a PSD violation.
pub fn gram_factor(g: &HermitianMatrix, rank_tol: f64) -> Result<Vec<CVector>> {
    let e = eig_hermitian(g)?;
    if let Some(&lmin) = e.values.last() {
        if lmin < -rank_tol {
            return Err(QqcError::NotPsd(lmin));
        }
    }
    let kept: Vec<usize> = (0..e.values.len()).filter(|&k| e.values[k] > rank_tol).collect();
    Ok((0..g.dim())
        .map(|x| {
            CVector::from_iterator(
                kept.len(),
                kept.iter().map(|&k| e.vectors[(x, k)].conj() * e.values[k].sqrt()),
            )
        })
        .collect())
}

/// Reshapes a vector on A⊗B into the `dim_a × dim_b` coefficient matrix.
pub fn coefficient_matrix(psi: &CVector, dim_a: usize, dim_b: usize) -> CMatrix {
    CMatrix::from_fn(dim_a, dim_b, |a, b| psi[a * dim_b + b])
}

pub fn flatten_coefficients(m: &CMatrix) -> CVector {
    let (ra, cb) = m.shape();
    CVector::from_fn(ra * cb, |k, _| m[(k / cb, k % cb)])
}

/// The reduced state on A of a pure state on A⊗B.
pub fn reduce_to_first(psi: &CVector, dim_a: usize, dim_b: usize) -> HermitianMatrix {
    let c = coefficient_matrix(psi, dim_a, dim_b);
    HermitianMatrix::symmetrized(&c * c.adjoint())
}

/// Finds a unitary `u` on B with `(I ⊗ u)|psi⟩ ≈ |target⟩`.
///
/// Both vectors live on A⊗B. The maximal-overlap unitary comes from the
/// polar factor of the overlap matrix between their coefficient matrices.
/// Fails when the reduced states on A differ by more than `tol`.
pub fn align_purifications(
    psi: &CVector,
    target: &CVector,
    dim_a: usize,
    dim_b: usize,
    tol: f64,
) -> Result<CMatrix> {
    if psi.len() != dim_a * dim_b || target.len() != dim_a * dim_b {
        return Err(QqcError::WorkspaceTooSmall {
            needed: psi.len().max(target.len()),
            available: dim_a * dim_b,
        });
    }
    let gap = (reduce_to_first(psi, dim_a, dim_b).sub(&reduce_to_first(target, dim_a, dim_b))).frobenius();
    if gap > tol {
        return Err(QqcError::PurificationMismatch(gap));
    }
    let p = coefficient_matrix(psi, dim_a, dim_b);
    let t = coefficient_matrix(target, dim_a, dim_b);
    let overlap = t.adjoint() * p;
    let svd = overlap.svd(true, true);
    let (u, v_t) = match (svd.u, svd.v_t) {
        (Some(u), Some(v_t)) => (u, v_t),
        _ => return Err(QqcError::EigenNonConvergence(0)),
    };
    let w = v_t.adjoint() * u.adjoint();
    Ok(w.transpose())
}

/// A projective measurement on a larger space together with the isometry
/// that pulls it back to a given POVM.
#[derive(Clone, Debug)]
pub struct NaimarkExtension {
    pub dim: usize,
    pub projectors: Vec<CMatrix>,
    pub isometry: CMatrix,
}

pub fn naimark_extend(povm: &[HermitianMatrix], rank_tol: f64) -> Result<NaimarkExtension> {
    let d = povm.first().map(HermitianMatrix::dim).ok_or_else(|| {
        QqcError::DimensionMismatch("empty POVM".into())
    })?;
    let mut total = HermitianMatrix::zeros(d);
    for r in povm {
        if r.dim() != d {
            return Err(QqcError::DimensionMismatch("POVM elements of different sizes".into()));
        }
        let lmin = r.min_eigenvalue()?;
        if lmin < -1e-8 {
            return Err(QqcError::NotPsd(lmin));
        }
        total = total.add(r);
    }
    let dev = total.sub(&HermitianMatrix::identity(d)).frobenius();
    if dev > 1e-8 {
        return Err(QqcError::PovmIncomplete(dev));
    }

    let mut rows: Vec<CVector> = Vec::new();
    let mut owner: Vec<usize> = Vec::new();
    for (z, r) in povm.iter().enumerate() {
        let e = eig_hermitian(r)?;
        let cut = rank_tol * e.values.first().copied().unwrap_or(0.0).max(1.0);
        for (k, &mu) in e.values.iter().enumerate() {
            if mu > cut {
                rows.push(e.vectors.column(k).map(|v| v.conj()) * c64(mu.sqrt(), 0.0));
                owner.push(z);
            }
        }
    }
    let big_d = rows.len();
    let mut v = CMatrix::zeros(big_d, d);
    for (i, row) in rows.iter().enumerate() {
        v.set_row(i, &row.transpose());
    }
    let vtv = HermitianMatrix::new(v.adjoint() * &v)?;
    let inv_sqrt = spectral_map(&vtv, |l| if l > 0.0 { 1.0 / l.sqrt() } else { 0.0 })?;
    let isometry = v * inv_sqrt.as_matrix();
    let projectors = (0..povm.len())
        .map(|z| {
            let mut p = CMatrix::zeros(big_d, big_d);
            for (i, &o) in owner.iter().enumerate() {
                if o == z {
                    p[(i, i)] = c64(1.0, 0.0);
                }
            }
            p
        })
        .collect();
    Ok(NaimarkExtension { dim: big_d, projectors, isometry })
}

/// Extends orthonormal columns to a unitary by an ordered Gram–Schmidt
/// sweep over the standard basis.
pub fn complete_unitary(cols: &CMatrix) -> Result<CMatrix> {
    let (d, k) = cols.shape();
    if k > d {
        return Err(QqcError::DimensionMismatch(format!("{k} columns in dimension {d}")));
    }
    let mut basis: Vec<CVector> = (0..k).map(|j| cols.column(j).into_owned()).collect();
    for e in 0..d {
        if basis.len() == d {
            break;
        }
        let mut v = CVector::zeros(d);
        v[e] = c64(1.0, 0.0);
        for b in &basis {
            let proj = b.dotc(&v);
            v -= b * proj;
        }
        for b in &basis {
            let proj = b.dotc(&v);
            v -= b * proj;
        }
        let nv = v.norm();
        if nv > 1e-8 {
            basis.push(v / c64(nv, 0.0));
        }
    }
    let mut u = CMatrix::zeros(d, d);
    for (j, b) in basis.iter().enumerate() {
        u.set_column(j, b);
    }
    Ok(u)
}

/// `‖U†U − I‖_F`.
pub fn unitarity_residual(u: &CMatrix) -> f64 {
    if u.nrows() != u.ncols() {
        return f64::INFINITY;
    }
    (u.adjoint() * u - CMatrix::identity(u.nrows(), u.ncols())).norm()
}

/// The real-symmetric embedding `A + iB ↦ [[A, −B], [B, A]]`.
pub fn real_embedding(m: &CMatrix) -> RMatrix {
    let (r, c) = m.shape();
    RMatrix::from_fn(2 * r, 2 * c, |i, j| {
        let v = m[(i % r, j % c)];
        match (i < r, j < c) {
            (true, true) | (false, false) => v.re,
            (true, false) => -v.im,
            (false, true) => v.im,
        }
    })
}

/// Inverse of [`real_embedding`], averaging the duplicated copies.
pub fn from_real_embedding(m: &RMatrix) -> CMatrix {
    let (r, c) = (m.nrows() / 2, m.ncols() / 2);
    CMatrix::from_fn(r, c, |i, j| {
        let re = 0.5 * (m[(i, j)] + m[(i + r, j + c)]);
        let im = 0.5 * (m[(i + r, j)] - m[(i, j + c)]);
        c64(re, im)
    })
}

pub fn random_complex<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| {
        c64(rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal))
    })
}

pub fn random_hermitian<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> HermitianMatrix {
    HermitianMatrix::symmetrized(random_complex(rng, dim, dim))
}

/// Haar-distributed unitary from the QR decomposition of a Gaussian matrix.
pub fn random_unitary<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> CMatrix {
    let qr = random_complex(rng, dim, dim).qr();
    let (q, r) = (qr.q(), qr.r());
    let mut u = q;
    for j in 0..dim {
        let d = r[(j, j)];
        if d.norm() > 0.0 {
            let ph = d / d.norm();
            let col = u.column(j) * ph;
            u.set_column(j, &col);
        }
    }
    u
}

/// Random PSD matrix of the given rank.
pub fn random_psd<R: Rng + ?Sized>(rng: &mut R, dim: usize, rank: usize) -> HermitianMatrix {
    let a = random_complex(rng, dim, rank.max(1));
    HermitianMatrix::symmetrized(&a * a.adjoint())
}
