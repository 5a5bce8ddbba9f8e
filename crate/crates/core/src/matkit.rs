//! Dense complex small-matrix kernels.
//!
//! Everything in the crate that needs a solve, an eigendecomposition or a
//! singular value goes through here. Matrices are plain
//! `nalgebra::DMatrix<Complex64>`; Hermitian inputs are validated once and
//! carried as [`Hermitian`].

use nalgebra::linalg::{Schur, SymmetricEigen};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type CMat = DMatrix<Complex64>;
pub type CVec = DVector<Complex64>;

pub const I: Complex64 = Complex64::new(0.0, 1.0);

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MatError {
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("matrix contains non-finite entries")]
    NonFinite,
    #[error("matrix is singular (sigma_min = {sigma_min:e}, norm = {norm:e})")]
    SingularMatrix { sigma_min: f64, norm: f64 },
    #[error("matrix is not Hermitian (asymmetry {asymmetry:e})")]
    NotHermitian { asymmetry: f64 },
    #[error("matrix is not positive semidefinite (eigenvalue {eigenvalue:e})")]
    NotPsd { eigenvalue: f64 },
    #[error("eigenvalue iteration did not converge within {max_sweeps} sweeps")]
    ConvergenceFailure { max_sweeps: usize },
}

/// Numerical thresholds shared by the whole crate.
///
/// Every operation that needs a cut-off reads it from here; callers that want
/// something other than the defaults build their own record and use the
/// `*_with` variants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Relative asymmetry allowed for a matrix to count as Hermitian.
    pub hermitian_rel: f64,
    /// `solve_linear` refuses when `sigma_min <= singular_rel * ||M||`.
    pub singular_rel: f64,
    /// Negative eigenvalues in `[-psd_clamp_rel * ||M||, 0)` are clamped to zero.
    pub psd_clamp_rel: f64,
    /// Iteration cap for the eigenvalue solvers.
    pub eig_max_sweeps: usize,
    /// `perturbed_resolvent` invertibility threshold (relative to `1 + ||TA||`).
    pub resonance_rel: f64,
    /// `exists_at_coupling` invertibility threshold (relative to `1 + ||TA||`).
    pub exists_rel: f64,
    /// An eigenvalue `mu` of `T J` counts as real when `|Im mu| <= real_eig * (1 + |mu|)`.
    pub real_eig: f64,
    /// Eigenvalues of `T J` closer than `cluster_rel * (1 + |mu|)` are merged
    /// into one cluster (one resonance with multiplicity).
    pub cluster_rel: f64,
    /// Extrapolation convergence threshold for boundary limits.
    pub limit: f64,
    /// Minimum fitted exponent for a `Diverged` classification.
    pub divergence_exponent: f64,
    /// `null_vector_certificate` singularity threshold (relative to `1 + ||M||`).
    pub null_rel: f64,
    /// Threshold for a sigma_min dip on the resonance cross-check grid.
    pub dip: f64,
    /// Step of the resonance cross-check grid.
    pub scan_step: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            hermitian_rel: 1e-12,
            singular_rel: 1e-13,
            psd_clamp_rel: 1e-10,
            eig_max_sweeps: 10_000,
            resonance_rel: 1e-12,
            exists_rel: 1e-10,
            real_eig: 1e-9,
            cluster_rel: 1e-4,
            limit: 1e-6,
            divergence_exponent: 0.5,
            null_rel: 1e-8,
            dip: 1e-6,
            scan_step: 1e-3,
        }
    }
}

/// A square matrix equal to its conjugate transpose.
///
/// Construction symmetrizes the input, so downstream kernels see an exactly
/// Hermitian matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Hermitian(CMat);

impl Hermitian {
    pub fn new(m: CMat) -> Result<Self, MatError> {
        Self::new_with(m, &Tolerances::default())
    }

    pub fn new_with(m: CMat, tol: &Tolerances) -> Result<Self, MatError> {
        check_square(&m)?;
        check_finite(&m)?;
        let asym = max_abs(&(&m - m.adjoint()));
        if asym > tol.hermitian_rel * max_abs(&m) {
            return Err(MatError::NotHermitian { asymmetry: asym });
        }
        Ok(Self((&m + m.adjoint()).scale(0.5)))
    }

    pub fn from_real_diagonal(d: &[f64]) -> Self {
        let v = CVec::from_iterator(d.len(), d.iter().map(|&x| Complex64::new(x, 0.0)));
        Self(CMat::from_diagonal(&v))
    }

    pub fn identity(n: usize) -> Self {
        Self(CMat::identity(n, n))
    }

    pub fn zeros(n: usize) -> Self {
        Self(CMat::zeros(n, n))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &CMat {
        &self.0
    }

    pub fn into_matrix(self) -> CMat {
        self.0
    }

    pub fn scale(&self, a: f64) -> Self {
        Self(self.0.scale(a))
    }

    pub fn add(&self, other: &Hermitian) -> Self {
        Self(&self.0 + &other.0)
    }

    pub fn sub(&self, other: &Hermitian) -> Self {
        Self(&self.0 - &other.0)
    }

    /// `s * 1 - self`.
    pub fn shift_neg(&self, s: f64) -> Self {
        let n = self.dim();
        Self(CMat::identity(n, n).scale(s) - &self.0)
    }

    /// Conjugation `Q^* self Q`, which stays Hermitian.
    pub fn congruence(&self, q: &CMat) -> Self {
        let m = q.adjoint() * &self.0 * q;
        Self((&m + m.adjoint()).scale(0.5))
    }

    pub fn norm(&self) -> f64 {
        op_norm(&self.0)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        eig_hermitian(self)
            .map(|e| e.values.first().copied().unwrap_or(0.0))
            .unwrap_or(f64::NAN)
    }

    pub fn is_psd(&self, rel: f64) -> bool {
        self.dim() == 0 || self.min_eigenvalue() >= -rel * self.norm()
    }
}

/// Ascending eigenvalues with matching orthonormal eigenvectors (as columns).
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    pub vectors: CMat,
}

impl HermitianEigen {
    pub fn reconstruct_with(&self, f: impl Fn(f64) -> f64) -> CMat {
        let d = CVec::from_iterator(
            self.values.len(),
            self.values.iter().map(|&l| Complex64::new(f(l), 0.0)),
        );
        &self.vectors * CMat::from_diagonal(&d) * self.vectors.adjoint()
    }
}

fn check_square(m: &CMat) -> Result<(), MatError> {
    if m.nrows() != m.ncols() {
        return Err(MatError::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    Ok(())
}

fn check_finite(m: &CMat) -> Result<(), MatError> {
    if m.iter().all(|c| c.re.is_finite() && c.im.is_finite()) {
        Ok(())
    } else {
        Err(MatError::NonFinite)
    }
}

pub fn max_abs(m: &CMat) -> f64 {
    m.iter().fold(0.0_f64, |acc, c| acc.max(c.norm()))
}

/// Spectral norm (largest singular value).
pub fn op_norm(m: &CMat) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    if m.nrows() == 1 && m.ncols() == 1 {
        return m[(0, 0)].norm();
    }
    m.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .fold(0.0_f64, |a, &b| a.max(b))
}

pub fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}

pub fn solve_linear(m: &CMat, b: &CMat) -> Result<CMat, MatError> {
    solve_linear_with(m, b, &Tolerances::default())
}

/// Solves `M X = B` by partial-pivot LU after checking that `M` is not
/// numerically singular.
pub fn solve_linear_with(m: &CMat, b: &CMat, tol: &Tolerances) -> Result<CMat, MatError> {
    check_square(m)?;
    if b.nrows() != m.nrows() {
        return Err(MatError::Dimension(format!(
            "rhs has {} rows, matrix is {}x{}",
            b.nrows(),
            m.nrows(),
            m.ncols()
        )));
    }
    check_finite(m)?;
    check_finite(b)?;
    let svals = m.clone().svd(false, false).singular_values;
    let norm = svals.iter().fold(0.0_f64, |a, &s| a.max(s));
    let sigma_min = svals.iter().fold(f64::INFINITY, |a, &s| a.min(s));
    if m.nrows() > 0 && sigma_min <= tol.singular_rel * norm {
        return Err(MatError::SingularMatrix { sigma_min, norm });
    }
    m.clone()
        .lu()
        .solve(b)
        .ok_or(MatError::SingularMatrix { sigma_min, norm })
}

pub fn eig_general(m: &CMat) -> Result<Vec<Complex64>, MatError> {
    eig_general_with(m, &Tolerances::default())
}

/// Eigenvalues (with algebraic multiplicity) from a complex Schur form,
/// sorted lexicographically by (re, im).
pub fn eig_general_with(m: &CMat, tol: &Tolerances) -> Result<Vec<Complex64>, MatError> {
    check_square(m)?;
    check_finite(m)?;
    let n = m.nrows();
    if n == 0 {
        return Ok(Vec::new());
    }
    let schur = Schur::try_new(m.clone(), f64::EPSILON, tol.eig_max_sweeps).ok_or(
        MatError::ConvergenceFailure {
            max_sweeps: tol.eig_max_sweeps,
        },
    )?;
    let (_, t) = schur.unpack();
    let mut vals: Vec<Complex64> = (0..n).map(|i| t[(i, i)]).collect();
    sort_complex(&mut vals);
    Ok(vals)
}

pub fn sort_complex(v: &mut [Complex64]) {
    v.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
}

pub fn eig_hermitian(m: &Hermitian) -> Result<HermitianEigen, MatError> {
    eig_hermitian_with(m, &Tolerances::default())
}

pub fn eig_hermitian_with(m: &Hermitian, tol: &Tolerances) -> Result<HermitianEigen, MatError> {
    let n = m.dim();
    if n == 0 {
        return Ok(HermitianEigen {
            values: Vec::new(),
            vectors: CMat::zeros(0, 0),
        });
    }
    let eig = SymmetricEigen::try_new(m.as_matrix().clone(), f64::EPSILON, tol.eig_max_sweeps)
        .ok_or(MatError::ConvergenceFailure {
            max_sweeps: tol.eig_max_sweeps,
        })?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = CMat::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    Ok(HermitianEigen { values, vectors })
}

/// Eigenvalues of a general square matrix validated as Hermitian on the fly.
pub fn eig_hermitian_checked(m: &CMat) -> Result<HermitianEigen, MatError> {
    eig_hermitian(&Hermitian::new(m.clone())?)
}

pub fn psd_sqrt(m: &Hermitian) -> Result<Hermitian, MatError> {
    psd_sqrt_with(m, &Tolerances::default())
}

/// Principal square root of a positive semidefinite matrix.
pub fn psd_sqrt_with(m: &Hermitian, tol: &Tolerances) -> Result<Hermitian, MatError> {
    let eig = eig_hermitian_with(m, tol)?;
    let floor = -tol.psd_clamp_rel * m.norm();
    if let Some(&lo) = eig.values.first() {
        if lo < floor {
            return Err(MatError::NotPsd { eigenvalue: lo });
        }
    }
    let r = eig.reconstruct_with(|l| l.max(0.0).sqrt());
    Ok(Hermitian((&r + r.adjoint()).scale(0.5)))
}

/// Absolute value `|J| = U diag(|lambda|) U^*`.
pub fn abs_hermitian(j: &Hermitian) -> Result<Hermitian, MatError> {
    let eig = eig_hermitian(j)?;
    let r = eig.reconstruct_with(f64::abs);
    Ok(Hermitian((&r + r.adjoint()).scale(0.5)))
}

/// `(T + T^*) / 2`.
pub fn re_part(t: &CMat) -> Result<Hermitian, MatError> {
    check_square(t)?;
    Ok(Hermitian((t + t.adjoint()).scale(0.5)))
}

/// `(T - T^*) / 2i`.
pub fn im_part(t: &CMat) -> Result<Hermitian, MatError> {
    check_square(t)?;
    let d = t - t.adjoint();
    Ok(Hermitian(d.map(|c| Complex64::new(c.im * 0.5, -c.re * 0.5))))
}

pub fn smallest_singular(m: &CMat) -> f64 {
    match m.shape() {
        (1, 1) => m[(0, 0)].norm(),
        (2, 2) => {
            // sigma_max from the Gram trace, sigma_min = |det| / sigma_max
            let fro2: f64 = m.iter().map(|c| c.norm_sqr()).sum();
            let det = (m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)]).norm();
            let disc = (fro2 * fro2 - 4.0 * det * det).max(0.0).sqrt();
            let smax = ((fro2 + disc) / 2.0).sqrt();
            if smax == 0.0 {
                0.0
            } else {
                det / smax
            }
        }
        _ => smallest_singular_pair(m).0,
    }
}

/// Smallest singular value together with a unit right singular vector.
pub fn smallest_singular_pair(m: &CMat) -> (f64, CVec) {
    let n = m.ncols();
    if n == 0 {
        return (0.0, CVec::zeros(0));
    }
    let svd = m.clone().svd(false, true);
    let (idx, &sigma) = svd
        .singular_values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("nonempty");
    let v_t = svd.v_t.expect("requested v_t");
    let v = v_t.row(idx).adjoint();
    (sigma, v.normalize())
}

/// Column vector with the given complex entries.
pub fn cvec(entries: &[Complex64]) -> CVec {
    CVec::from_column_slice(entries)
}

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Row-major construction from real entries.
pub fn real_matrix(rows: usize, cols: usize, data: &[f64]) -> CMat {
    CMat::from_row_iterator(rows, cols, data.iter().map(|&x| Complex64::new(x, 0.0)))
}

pub fn complex_matrix(rows: usize, cols: usize, data: &[Complex64]) -> CMat {
    CMat::from_row_slice(rows, cols, data)
}

/// Block diagonal `diag(a, b)`.
pub fn block_diag(a: &CMat, b: &CMat) -> CMat {
    let (ra, ca) = a.shape();
    let (rb, cb) = b.shape();
    let mut out = CMat::zeros(ra + rb, ca + cb);
    out.view_mut((0, 0), (ra, ca)).copy_from(a);
    out.view_mut((ra, ca), (rb, cb)).copy_from(b);
    out
}

/// Serde adapter writing a matrix as nested row arrays of `[re, im]` pairs.
pub mod serde_cmat {
    use super::CMat;
    use num_complex::Complex64;
    use serde::de::Error;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn to_rows(m: &CMat) -> Vec<Vec<Complex64>> {
        (0..m.nrows())
            .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
            .collect()
    }

    pub fn from_rows(rows: &[Vec<Complex64>]) -> Result<CMat, String> {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != ncols) {
            return Err("ragged matrix rows".into());
        }
        Ok(CMat::from_row_iterator(
            nrows,
            ncols,
            rows.iter().flat_map(|r| r.iter().copied()),
        ))
    }

    pub fn serialize<S: Serializer>(m: &CMat, s: S) -> Result<S::Ok, S::Error> {
        to_rows(m).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<CMat, D::Error> {
        let rows = Vec::<Vec<Complex64>>::deserialize(d)?;
        from_rows(&rows).map_err(D::Error::custom)
    }
}

/// Serde adapter for [`super::Hermitian`] values using the same row layout.
pub mod serde_herm {
    use super::Hermitian;
    use serde::de::Error;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(m: &Hermitian, s: S) -> Result<S::Ok, S::Error> {
        super::serde_cmat::serialize(m.as_matrix(), s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Hermitian, D::Error> {
        let m = super::serde_cmat::deserialize(d)?;
        Hermitian::new(m).map_err(D::Error::custom)
    }
}
