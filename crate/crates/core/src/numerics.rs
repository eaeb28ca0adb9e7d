//! Dense complex Hermitian linear algebra.
//!
//! Everything else in the crate is expressed through [`HermitianMatrix`] and
//! the handful of spectral quantities defined here: eigendecomposition,
//! operator and trace norms, trace inner products, psd repair and numerical
//! rank. Eigenvalues are always reported in descending order.

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use thiserror::Error;

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

/// Hermiticity tolerance, relative to the largest entry magnitude.
pub const TOL_HERM: f64 = 1e-10;
/// Psd tolerance, relative to the trace (floored at 1).
pub const TOL_PSD: f64 = 1e-9;
/// Reconstruction tolerance for eigendecompositions.
pub const TOL_RECON: f64 = 1e-10;
/// Default relative threshold for [`numerical_rank`].
pub const RANK_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NumericsError {
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix is not Hermitian (deviation {deviation:.3e} exceeds {allowed:.3e})")]
    NotHermitian { deviation: f64, allowed: f64 },
    #[error("dimension mismatch: {left} vs {right}")]
    DimMismatch { left: usize, right: usize },
    #[error("eigensolver did not converge on a {dim}x{dim} matrix")]
    NoConvergence { dim: usize },
    #[error("matrix is genuinely indefinite: min eigenvalue {min_eigenvalue:.3e} below -{tol:.3e}")]
    Indefinite { min_eigenvalue: f64, tol: f64 },
}

/// A dense complex matrix that is Hermitian up to [`TOL_HERM`].
#[derive(Clone, Debug, PartialEq)]
pub struct HermitianMatrix {
    m: CMatrix,
}

impl HermitianMatrix {
    /// Wraps `m` after checking that it is square and Hermitian.
    ///
    /// Nearly-Hermitian input is rejected rather than symmetrized; use
    /// [`HermitianMatrix::hermitian_part`] when the symmetrization is intended.
    pub fn new(m: CMatrix) -> Result<Self, NumericsError> {
        if !m.is_square() {
            return Err(NumericsError::NotSquare { rows: m.nrows(), cols: m.ncols() });
        }
        let n = m.nrows();
        let scale = m.iter().fold(0.0_f64, |acc, z| acc.max(z.norm()));
        let mut deviation = 0.0_f64;
        for j in 0..n {
            for k in j..n {
                deviation = deviation.max((m[(j, k)] - m[(k, j)].conj()).norm());
            }
        }
        let allowed = TOL_HERM * scale;
        if deviation > allowed {
            return Err(NumericsError::NotHermitian { deviation, allowed });
        }
        Ok(Self { m })
    }

    /// `(m + m†) / 2`. Accepts any square matrix.
    pub fn hermitian_part(m: &CMatrix) -> Result<Self, NumericsError> {
        if !m.is_square() {
            return Err(NumericsError::NotSquare { rows: m.nrows(), cols: m.ncols() });
        }
        let h = (m + m.adjoint()).unscale(2.0);
        Ok(Self { m: h })
    }

    pub fn zeros(dim: usize) -> Self {
        Self { m: CMatrix::zeros(dim, dim) }
    }

    pub fn identity(dim: usize) -> Self {
        Self { m: CMatrix::identity(dim, dim) }
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        let mut m = CMatrix::zeros(n, n);
        for (i, &v) in diag.iter().enumerate() {
            m[(i, i)] = Complex64::new(v, 0.0);
        }
        Self { m }
    }

    /// The rank-one matrix `|v⟩⟨v|`.
    pub fn projector(v: &CVector) -> Self {
        Self { m: v * v.adjoint() }
    }

    /// `|e_k⟩⟨e_k|` in dimension `dim`.
    pub fn basis_projector(dim: usize, k: usize) -> Self {
        let mut m = CMatrix::zeros(dim, dim);
        m[(k, k)] = Complex64::new(1.0, 0.0);
        Self { m }
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.m
    }

    pub fn into_matrix(self) -> CMatrix {
        self.m
    }

    pub fn entry(&self, j: usize, k: usize) -> Complex64 {
        self.m[(j, k)]
    }

    /// Real part of the trace.
    pub fn trace(&self) -> f64 {
        (0..self.dim()).map(|i| self.m[(i, i)].re).sum()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self { m: self.m.scale(factor) }
    }

    pub fn max_abs_entry(&self) -> f64 {
        self.m.iter().fold(0.0_f64, |acc, z| acc.max(z.norm()))
    }

    pub fn checked_add(&self, other: &Self) -> Result<Self, NumericsError> {
        same_dim(self, other)?;
        Ok(Self { m: &self.m + &other.m })
    }

    pub fn checked_sub(&self, other: &Self) -> Result<Self, NumericsError> {
        same_dim(self, other)?;
        Ok(Self { m: &self.m - &other.m })
    }

    /// Sum of a non-empty list, or the zero matrix of `dim` for an empty one.
    pub fn sum<'a, I>(dim: usize, items: I) -> Result<Self, NumericsError>
    where
        I: IntoIterator<Item = &'a HermitianMatrix>,
    {
        let mut acc = CMatrix::zeros(dim, dim);
        for h in items {
            if h.dim() != dim {
                return Err(NumericsError::DimMismatch { left: dim, right: h.dim() });
            }
            acc += &h.m;
        }
        Ok(Self { m: acc })
    }

    /// Largest entrywise deviation from `other`.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.m.iter().zip(other.m.iter()).fold(0.0_f64, |acc, (a, b)| acc.max((a - b).norm()))
    }
}

fn same_dim(a: &HermitianMatrix, b: &HermitianMatrix) -> Result<(), NumericsError> {
    if a.dim() != b.dim() {
        Err(NumericsError::DimMismatch { left: a.dim(), right: b.dim() })
    } else {
        Ok(())
    }
}

/// Psd tolerance used for a given matrix: `TOL_PSD * max(|tr H|, 1)`.
pub fn psd_tolerance(h: &HermitianMatrix) -> f64 {
    TOL_PSD * h.trace().abs().max(1.0)
}

/// Spectral decomposition `H = Σ_a λ_a |ψ_a⟩⟨ψ_a|`, eigenvalues descending.
#[derive(Clone, Debug)]
pub struct EigenDecomposition {
    pub eigenvalues: Vec<f64>,
    /// One orthonormal eigenvector per column, in eigenvalue order.
    pub eigenvectors: CMatrix,
}

impl EigenDecomposition {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn eigenvector(&self, a: usize) -> CVector {
        self.eigenvectors.column(a).into_owned()
    }

    /// `Σ_a λ_a |ψ_a⟩⟨ψ_a|` restricted to the eigenpairs in `range`.
    pub fn partial_sum(&self, range: std::ops::Range<usize>) -> HermitianMatrix {
        let n = self.eigenvectors.nrows();
        let mut m = CMatrix::zeros(n, n);
        for a in range {
            let v = self.eigenvectors.column(a);
            m += (v * v.adjoint()).scale(self.eigenvalues[a]);
        }
        HermitianMatrix { m }
    }

    pub fn reconstruct(&self) -> HermitianMatrix {
        self.partial_sum(0..self.len())
    }
}

fn sorted_desc(values: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
    order
}

/// Full eigendecomposition of a Hermitian matrix.
pub fn eigh(h: &HermitianMatrix) -> Result<EigenDecomposition, NumericsError> {
    let n = h.dim();
    if n == 0 {
        return Ok(EigenDecomposition { eigenvalues: vec![], eigenvectors: CMatrix::zeros(0, 0) });
    }
    let max_iter = 1000 * n.max(8);
    let eig =
        SymmetricEigen::try_new(h.m.clone(), f64::EPSILON, max_iter).ok_or(NumericsError::NoConvergence { dim: n })?;
    let raw: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    let order = sorted_desc(&raw);
    let eigenvalues = order.iter().map(|&i| raw[i]).collect();
    let mut eigenvectors = CMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        eigenvectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    Ok(EigenDecomposition { eigenvalues, eigenvectors })
}

/// Eigenvalues only, descending. Cheaper than [`eigh`].
pub fn eigenvalues(h: &HermitianMatrix) -> Vec<f64> {
    if h.dim() == 0 {
        return vec![];
    }
    let mut vals: Vec<f64> = h.m.symmetric_eigenvalues().iter().copied().collect();
    vals.sort_by(|a, b| b.total_cmp(a));
    vals
}

/// `Re tr(AB)`.
pub fn trace_inner(a: &HermitianMatrix, b: &HermitianMatrix) -> Result<f64, NumericsError> {
    same_dim(a, b)?;
    // tr(AB) = Σ_jk A_jk B_kj = Σ_jk A_jk conj(B_jk) for Hermitian B.
    Ok(a.m.iter().zip(b.m.iter()).map(|(x, y)| x.re * y.re + x.im * y.im).sum())
}

/// Largest absolute eigenvalue.
pub fn op_norm(h: &HermitianMatrix) -> f64 {
    let vals = eigenvalues(h);
    match (vals.first(), vals.last()) {
        (Some(&hi), Some(&lo)) => hi.abs().max(lo.abs()),
        _ => 0.0,
    }
}

/// Sum of absolute eigenvalues.
pub fn trace_norm(h: &HermitianMatrix) -> f64 {
    eigenvalues(h).iter().map(|v| v.abs()).sum()
}

pub fn min_eigenvalue(h: &HermitianMatrix) -> f64 {
    eigenvalues(h).last().copied().unwrap_or(0.0)
}

/// Whether `λ_min(H) ≥ -tol`, decided by a Cholesky factorization of `H + tol·I`.
///
/// A failed factorization is confirmed with the eigenvalues, since Cholesky can
/// break down on matrices sitting exactly at the boundary.
pub fn is_psd(h: &HermitianMatrix, tol: f64) -> bool {
    let n = h.dim();
    if n == 0 {
        return true;
    }
    let mut shifted = h.m.clone();
    for i in 0..n {
        shifted[(i, i)] += Complex64::new(tol, 0.0);
    }
    // nalgebra takes complex square roots of negative pivots instead of failing,
    // so the pivots have to be inspected.
    if let Some(ch) = Cholesky::new(shifted) {
        let l = ch.l_dirty();
        if (0..n).all(|i| l[(i, i)].re > 0.0 && l[(i, i)].im.abs() <= 1e-12 * l[(i, i)].re) {
            return true;
        }
    }
    min_eigenvalue(h) >= -tol
}

/// Clips eigenvalues in `[-tol, 0)` to zero.
///
/// A matrix with no negative eigenvalue is returned unchanged. Eigenvalues
/// below `-tol` are an error: the input is genuinely indefinite.
pub fn psd_project(h: &HermitianMatrix, tol: f64) -> Result<HermitianMatrix, NumericsError> {
    let eig = eigh(h)?;
    let min = eig.eigenvalues.last().copied().unwrap_or(0.0);
    if min >= 0.0 {
        return Ok(h.clone());
    }
    if min < -tol {
        return Err(NumericsError::Indefinite { min_eigenvalue: min, tol });
    }
    let clipped = EigenDecomposition {
        eigenvalues: eig.eigenvalues.iter().map(|&v| v.max(0.0)).collect(),
        eigenvectors: eig.eigenvectors,
    };
    Ok(clipped.reconstruct())
}

/// Number of eigenvalues above `rel_tol · λ_max`. The zero matrix has rank 0.
pub fn numerical_rank(h: &HermitianMatrix, rel_tol: f64) -> usize {
    rank_of_spectrum(&eigenvalues(h), rel_tol)
}

/// [`numerical_rank`] on an already computed descending spectrum.
pub fn rank_of_spectrum(spectrum: &[f64], rel_tol: f64) -> usize {
    let max = spectrum.first().copied().unwrap_or(0.0);
    if max <= 0.0 {
        return 0;
    }
    spectrum.iter().filter(|&&v| v > rel_tol * max).count()
}

fn split(a: &CMatrix) -> (DMatrix<f64>, DMatrix<f64>) {
    (a.map(|z| z.re), a.map(|z| z.im))
}

/// Complex matrix product computed as four real products.
pub fn matmul(a: &CMatrix, b: &CMatrix) -> CMatrix {
    assert_eq!(a.ncols(), b.nrows(), "matmul shape mismatch");
    let (ar, ai) = split(a);
    let (br, bi) = split(b);
    let re = &ar * &br - &ai * &bi;
    let im = &ar * &bi + &ai * &br;
    CMatrix::from_fn(a.nrows(), b.ncols(), |j, k| Complex64::new(re[(j, k)], im[(j, k)]))
}

/// `P H P†` for a rectangular `P`, returned as the Hermitian part of the product.
pub fn sandwich(p: &CMatrix, h: &HermitianMatrix) -> HermitianMatrix {
    assert_eq!(p.ncols(), h.dim(), "sandwich shape mismatch");
    let ph = matmul(p, &h.m);
    let out = matmul(&ph, &p.adjoint());
    HermitianMatrix { m: (&out + out.adjoint()).unscale(2.0) }
}

pub fn vector_norm(v: &CVector) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}
