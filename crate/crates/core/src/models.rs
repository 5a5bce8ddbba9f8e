//! Concrete base operators `H0` together with a finite-rank rigging `F`.
//!
//! A [`RiggedModel`] evaluates the sandwiched resolvent
//! `T_z = F (H0 - z)^{-1} F^*` as a `k x k` matrix, either off the real axis
//! or, where a closed form exists, exactly on it.

use nalgebra::DVector;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matkit::{self, CMat, Hermitian, MatError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("lattice boundary value undefined at threshold lambda = {lambda}")]
    BoundaryOutsideAc { lambda: f64 },
    #[error("no exact boundary value at lambda = {lambda}; use a numeric limit")]
    NoExactBoundary { lambda: f64 },
    #[error("invalid spectral point: {0}")]
    InvalidPoint(String),
    #[error("rigging does not match model: {0}")]
    RiggingMismatch(String),
    #[error(transparent)]
    Matrix(#[from] MatError),
}

/// `z = lambda + i y` with `y >= 0`; `y == 0` marks a boundary point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HalfPlanePoint {
    pub lambda: f64,
    pub y: f64,
}

impl HalfPlanePoint {
    pub fn new(lambda: f64, y: f64) -> Result<Self, ModelError> {
        if !lambda.is_finite() || !y.is_finite() || y < 0.0 {
            return Err(ModelError::InvalidPoint(format!("lambda = {lambda}, y = {y}")));
        }
        Ok(Self { lambda, y })
    }

    pub fn boundary(lambda: f64) -> Self {
        Self { lambda, y: 0.0 }
    }

    pub fn is_boundary(&self) -> bool {
        self.y == 0.0
    }

    pub fn z(&self) -> Complex64 {
        Complex64::new(self.lambda, self.y)
    }
}

/// One channel of a lattice rigging: a finitely supported sequence on `Z`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatticeChannel {
    pub sites: Vec<(i64, Complex64)>,
}

impl LatticeChannel {
    pub fn delta(site: i64) -> Self {
        Self {
            sites: vec![(site, Complex64::new(1.0, 0.0))],
        }
    }

    fn is_nonzero(&self) -> bool {
        self.sites.iter().any(|(_, a)| a.norm() > 0.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Rigging {
    /// `k x n` matrix for a finite model; row `p` is the functional `u -> (F u)_p`.
    Matrix(CMat),
    Lattice(Vec<LatticeChannel>),
    /// Channels of the left summand followed by those of the right summand.
    Block(Box<Rigging>, Box<Rigging>),
}

impl Rigging {
    pub fn channels(&self) -> usize {
        match self {
            Rigging::Matrix(f) => f.nrows(),
            Rigging::Lattice(ch) => ch.len(),
            Rigging::Block(l, r) => l.channels() + r.channels(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum OperatorModel {
    FiniteHermitian(FiniteHermitian),
    /// `(H0 u)_n = u_{n+1} + u_{n-1}` on `l^2(Z)`.
    FreeLattice1D,
    DirectSum(Box<OperatorModel>, Box<OperatorModel>),
}

impl OperatorModel {
    pub fn finite(h: Hermitian) -> Self {
        OperatorModel::FiniteHermitian(FiniteHermitian::new(h))
    }

    /// Essential spectrum as a list of closed intervals. Informational only.
    pub fn essential_spectrum(&self) -> Vec<(f64, f64)> {
        match self {
            OperatorModel::FiniteHermitian(_) => Vec::new(),
            OperatorModel::FreeLattice1D => vec![(-2.0, 2.0)],
            OperatorModel::DirectSum(l, r) => {
                let mut v = l.essential_spectrum();
                v.extend(r.essential_spectrum());
                v.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
                v.dedup();
                v
            }
        }
    }
}

/// A Hermitian matrix with its band structure detected once.
///
/// Tridiagonal matrices (truncated lattices) are solved in `O(n)` off the
/// real axis; everything else goes through dense LU.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteHermitian {
    h: Hermitian,
    tridiagonal: Option<(Vec<f64>, Vec<Complex64>)>,
}

impl FiniteHermitian {
    pub fn new(h: Hermitian) -> Self {
        let m = h.as_matrix();
        let n = m.nrows();
        let banded = n > 2
            && (0..n).all(|j| (0..n).all(|i| i.abs_diff(j) <= 1 || m[(i, j)] == Complex64::ZERO));
        let tridiagonal = banded.then(|| {
            let diag = (0..n).map(|i| m[(i, i)].re).collect();
            let off = (0..n - 1).map(|i| m[(i + 1, i)]).collect();
            (diag, off)
        });
        Self { h, tridiagonal }
    }

    pub fn matrix(&self) -> &Hermitian {
        &self.h
    }

    pub fn dim(&self) -> usize {
        self.h.dim()
    }

    /// `(H - z)^{-1} B`.
    fn resolve(&self, z: Complex64, rhs: &CMat) -> Result<CMat, ModelError> {
        if let (Some((diag, off)), true) = (&self.tridiagonal, z.im != 0.0) {
            return Ok(thomas_solve(diag, off, z, rhs));
        }
        let n = self.dim();
        let shifted = self.h.as_matrix() - CMat::identity(n, n) * z;
        if n <= 64 {
            return Ok(matkit::solve_linear(&shifted, rhs)?);
        }
        shifted
            .lu()
            .solve(rhs)
            .ok_or(ModelError::Matrix(MatError::SingularMatrix {
                sigma_min: 0.0,
                norm: self.h.norm(),
            }))
    }
}

/// Tridiagonal solve of `(H - z) X = B` with `Im z != 0`.
///
/// The pivots satisfy `Im d_k <= -Im z` for `Im z > 0` (and the mirror bound
/// below the axis), so no pivot vanishes.
fn thomas_solve(diag: &[f64], off: &[Complex64], z: Complex64, rhs: &CMat) -> CMat {
    let n = diag.len();
    let mut out = rhs.clone();
    let mut pivots = vec![Complex64::ZERO; n];
    // lower[i] = H[i+1, i], upper[i] = H[i, i+1] = conj(lower[i])
    pivots[0] = diag[0] - z;
    for i in 1..n {
        let l = off[i - 1] / pivots[i - 1];
        pivots[i] = diag[i] - z - l * off[i - 1].conj();
    }
    for col in 0..rhs.ncols() {
        let mut x = out.column(col).clone_owned();
        for i in 1..n {
            let l = off[i - 1] / pivots[i - 1];
            x[i] = x[i] - l * x[i - 1];
        }
        x[n - 1] /= pivots[n - 1];
        for i in (0..n - 1).rev() {
            x[i] = (x[i] - off[i].conj() * x[i + 1]) / pivots[i];
        }
        out.set_column(col, &x);
    }
    out
}

/// Root `zeta` of `zeta^2 - z zeta + 1 = 0` used by the free lattice kernel.
///
/// Off the axis this is the root inside the unit disk. On the axis inside
/// `(-2, 2)` it is `(lambda - i sqrt(4 - lambda^2)) / 2`, the continuation
/// from the upper half-plane; outside `[-2, 2]` it is the real root of modulus
/// less than one.
fn lattice_zeta(z: Complex64) -> Result<Complex64, ModelError> {
    if z.im == 0.0 {
        let l = z.re;
        if l.abs() < 2.0 {
            return Ok(Complex64::new(l / 2.0, -(4.0 - l * l).sqrt() / 2.0));
        }
        if l.abs() == 2.0 || !l.is_finite() {
            return Err(ModelError::BoundaryOutsideAc { lambda: l });
        }
        let big = (l + l.signum() * (l * l - 4.0).sqrt()) / 2.0;
        return Ok(Complex64::new(1.0 / big, 0.0));
    }
    let disc = (z * z - 4.0).sqrt();
    let plus = (z + disc) * 0.5;
    let minus = (z - disc) * 0.5;
    // the product of the roots is 1: take the larger one and invert it
    let big = if plus.norm() >= minus.norm() { plus } else { minus };
    Ok(big.inv())
}

fn lattice_kernel_at(z: Complex64, d: u64) -> Result<Complex64, ModelError> {
    let zeta = lattice_zeta(z)?;
    let denom = zeta - zeta.inv();
    Ok(zeta.powu(d as u32) / denom)
}

/// Matrix element `R_z(n, m) = <delta_n, (H0 - z)^{-1} delta_m>` of the free
/// lattice.
pub fn free_lattice_kernel(point: HalfPlanePoint, n: i64, m: i64) -> Result<Complex64, ModelError> {
    lattice_kernel_at(point.z(), n.abs_diff(m))
}

/// Sandwiched free-lattice resolvent for arbitrary non-real `z`, or real `z`
/// off the thresholds.
fn lattice_sandwich(channels: &[LatticeChannel], z: Complex64) -> Result<CMat, ModelError> {
    let k = channels.len();
    let zeta = lattice_zeta(z)?;
    let denom = zeta - zeta.inv();
    let mut t = CMat::zeros(k, k);
    for (p, fp) in channels.iter().enumerate() {
        for (q, fq) in channels.iter().enumerate() {
            let mut acc = Complex64::ZERO;
            for &(n, a) in &fp.sites {
                for &(m, b) in &fq.sites {
                    acc += a.conj() * b * zeta.powu(n.abs_diff(m) as u32);
                }
            }
            t[(p, q)] = acc / denom;
        }
    }
    Ok(t)
}

/// The value of `T_z(H)`: a `k x k` matrix tagged with its evaluation point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SandwichedResolvent {
    #[serde(with = "matkit::serde_cmat")]
    pub value: CMat,
    pub point: HalfPlanePoint,
}

impl SandwichedResolvent {
    pub fn norm(&self) -> f64 {
        matkit::op_norm(&self.value)
    }

    pub fn im_min_eigenvalue(&self) -> f64 {
        matkit::im_part(&self.value)
            .map(|h| h.min_eigenvalue())
            .unwrap_or(f64::NAN)
    }
}

/// A base operator together with its rigging.
#[derive(Debug, Clone, PartialEq)]
pub struct RiggedModel {
    model: OperatorModel,
    rigging: Rigging,
}

impl RiggedModel {
    pub fn new(model: OperatorModel, rigging: Rigging) -> Result<Self, ModelError> {
        validate(&model, &rigging)?;
        Ok(Self { model, rigging })
    }

    /// Free lattice with one `delta_site` channel per listed site.
    pub fn lattice_deltas(sites: &[i64]) -> Self {
        Self {
            model: OperatorModel::FreeLattice1D,
            rigging: Rigging::Lattice(sites.iter().map(|&s| LatticeChannel::delta(s)).collect()),
        }
    }

    /// One-dimensional model `H = [lambda0]` with rigging `F = [amplitude]`.
    pub fn point_mass(lambda0: f64, amplitude: Complex64) -> Self {
        Self {
            model: OperatorModel::finite(Hermitian::from_real_diagonal(&[lambda0])),
            rigging: Rigging::Matrix(matkit::complex_matrix(1, 1, &[amplitude])),
        }
    }

    pub fn model(&self) -> &OperatorModel {
        &self.model
    }

    pub fn rigging(&self) -> &Rigging {
        &self.rigging
    }

    pub fn channels(&self) -> usize {
        self.rigging.channels()
    }

    /// `T_z` at an arbitrary complex `z`. Real `z` is accepted only where the
    /// model has an exact boundary value.
    pub fn resolvent_at(&self, z: Complex64) -> Result<CMat, ModelError> {
        if z.im == 0.0 {
            return self
                .exact_boundary_matrix(z.re)?
                .ok_or(ModelError::NoExactBoundary { lambda: z.re });
        }
        eval(&self.model, &self.rigging, z)
    }

    pub fn sandwiched_resolvent(
        &self,
        point: HalfPlanePoint,
    ) -> Result<SandwichedResolvent, ModelError> {
        let value = self.resolvent_at(point.z())?;
        Ok(SandwichedResolvent { value, point })
    }

    /// Exact `T_{lambda + i0}` where a closed form or a direct solve is
    /// available; `None` means "take a numeric limit".
    pub fn boundary_exact(&self, lambda: f64) -> Option<SandwichedResolvent> {
        self.exact_boundary_matrix(lambda)
            .ok()
            .flatten()
            .map(|value| SandwichedResolvent {
                value,
                point: HalfPlanePoint::boundary(lambda),
            })
    }

    fn exact_boundary_matrix(&self, lambda: f64) -> Result<Option<CMat>, ModelError> {
        exact_boundary(&self.model, &self.rigging, lambda)
    }

    /// Direct sum of two rigged models; channels of `self` come first.
    pub fn direct_sum(&self, right: &RiggedModel) -> RiggedModel {
        make_direct_sum(self, right)
    }

    /// Dense `F` and `H` for finite models, used for direct assembly checks.
    pub fn as_finite(&self) -> Option<(&FiniteHermitian, &CMat)> {
        match (&self.model, &self.rigging) {
            (OperatorModel::FiniteHermitian(h), Rigging::Matrix(f)) => Some((h, f)),
            _ => None,
        }
    }
}

pub fn make_direct_sum(left: &RiggedModel, right: &RiggedModel) -> RiggedModel {
    RiggedModel {
        model: OperatorModel::DirectSum(Box::new(left.model.clone()), Box::new(right.model.clone())),
        rigging: Rigging::Block(
            Box::new(left.rigging.clone()),
            Box::new(right.rigging.clone()),
        ),
    }
}

/// The free lattice restricted to sites `-half_width..=half_width` as a
/// finite tridiagonal model, with the lattice channels mapped to rows of `F`.
/// Sites outside the window are dropped.
pub fn truncated_lattice(
    half_width: usize,
    channels: &[LatticeChannel],
) -> Result<RiggedModel, ModelError> {
    let n = 2 * half_width + 1;
    let mut h = CMat::zeros(n, n);
    for i in 0..n - 1 {
        h[(i, i + 1)] = Complex64::ONE;
        h[(i + 1, i)] = Complex64::ONE;
    }
    let mut f = CMat::zeros(channels.len(), n);
    let hw = half_width as i64;
    for (p, ch) in channels.iter().enumerate() {
        for &(site, a) in &ch.sites {
            if (-hw..=hw).contains(&site) {
                f[(p, (site + hw) as usize)] += a.conj();
            }
        }
    }
    RiggedModel::new(
        OperatorModel::finite(Hermitian::new(h)?),
        Rigging::Matrix(f),
    )
}

fn validate(model: &OperatorModel, rigging: &Rigging) -> Result<(), ModelError> {
    match (model, rigging) {
        (OperatorModel::FiniteHermitian(h), Rigging::Matrix(f)) => {
            if f.nrows() == 0 {
                return Err(ModelError::RiggingMismatch("rigging has no channels".into()));
            }
            if f.ncols() != h.dim() {
                return Err(ModelError::RiggingMismatch(format!(
                    "rigging acts on dimension {}, operator has dimension {}",
                    f.ncols(),
                    h.dim()
                )));
            }
            for (p, row) in f.row_iter().enumerate() {
                if row.iter().all(|c| c.norm() == 0.0) {
                    return Err(ModelError::RiggingMismatch(format!("channel {p} is zero")));
                }
            }
            if !f.iter().all(|c| c.re.is_finite() && c.im.is_finite()) {
                return Err(ModelError::Matrix(MatError::NonFinite));
            }
            Ok(())
        }
        (OperatorModel::FreeLattice1D, Rigging::Lattice(ch)) => {
            if ch.is_empty() {
                return Err(ModelError::RiggingMismatch("rigging has no channels".into()));
            }
            for (p, c) in ch.iter().enumerate() {
                if !c.is_nonzero() {
                    return Err(ModelError::RiggingMismatch(format!("channel {p} is zero")));
                }
            }
            Ok(())
        }
        (OperatorModel::DirectSum(l, r), Rigging::Block(fl, fr)) => {
            validate(l, fl)?;
            validate(r, fr)
        }
        _ => Err(ModelError::RiggingMismatch(
            "rigging kind does not match operator kind".into(),
        )),
    }
}

fn eval(model: &OperatorModel, rigging: &Rigging, z: Complex64) -> Result<CMat, ModelError> {
    match (model, rigging) {
        (OperatorModel::FiniteHermitian(h), Rigging::Matrix(f)) => {
            let x = h.resolve(z, &f.adjoint())?;
            Ok(f * x)
        }
        (OperatorModel::FreeLattice1D, Rigging::Lattice(ch)) => lattice_sandwich(ch, z),
        (OperatorModel::DirectSum(l, r), Rigging::Block(fl, fr)) => {
            Ok(matkit::block_diag(&eval(l, fl, z)?, &eval(r, fr, z)?))
        }
        _ => Err(ModelError::RiggingMismatch(
            "rigging kind does not match operator kind".into(),
        )),
    }
}

/// Relative distance below which `lambda` counts as an eigenvalue of a
/// finite block.
const EIGEN_HIT_REL: f64 = 1e-10;

fn exact_boundary(
    model: &OperatorModel,
    rigging: &Rigging,
    lambda: f64,
) -> Result<Option<CMat>, ModelError> {
    match (model, rigging) {
        (OperatorModel::FiniteHermitian(h), Rigging::Matrix(f)) => {
            let eig = matkit::eig_hermitian(h.matrix())?;
            let scale = 1.0 + h.matrix().norm();
            if eig
                .values
                .iter()
                .any(|&e| (e - lambda).abs() <= EIGEN_HIT_REL * scale)
            {
                return Ok(None);
            }
            let z = Complex64::new(lambda, 0.0);
            // spectral form: sum_j F u_j u_j^* F^* / (e_j - lambda)
            let fu = f * &eig.vectors;
            let inv = DVector::from_iterator(
                eig.values.len(),
                eig.values.iter().map(|&e| (Complex64::new(e, 0.0) - z).inv()),
            );
            Ok(Some(&fu * CMat::from_diagonal(&inv) * fu.adjoint()))
        }
        (OperatorModel::FreeLattice1D, Rigging::Lattice(ch)) => {
            if lambda.abs() == 2.0 || !lambda.is_finite() {
                return Ok(None);
            }
            Ok(Some(lattice_sandwich(ch, Complex64::new(lambda, 0.0))?))
        }
        (OperatorModel::DirectSum(l, r), Rigging::Block(fl, fr)) => {
            match (exact_boundary(l, fl, lambda)?, exact_boundary(r, fr, lambda)?) {
                (Some(a), Some(b)) => Ok(Some(matkit::block_diag(&a, &b))),
                _ => Ok(None),
            }
        }
        _ => Err(ModelError::RiggingMismatch(
            "rigging kind does not match operator kind".into(),
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matkit::{c, max_abs, I};

    fn pt(l: f64, y: f64) -> HalfPlanePoint {
        HalfPlanePoint::new(l, y).unwrap()
    }

    #[test]
    fn kernel_examples() {
        let v = free_lattice_kernel(pt(0.0, 0.0), 0, 0).unwrap();
        assert!((v - c(0.0, 0.5)).norm() < 1e-15);

        let v = free_lattice_kernel(pt(3.0, 0.0), 0, 0).unwrap();
        assert!((v - c(-1.0 / 5f64.sqrt(), 0.0)).norm() < 1e-15);
        assert!((v.re + 0.4472136).abs() < 1e-7);

        let v = free_lattice_kernel(pt(0.0, 1.0), 0, 0).unwrap();
        assert!((v - c(0.0, 1.0 / 5f64.sqrt())).norm() < 1e-15);
    }

    #[test]
    fn kernel_threshold_is_an_error() {
        assert!(matches!(
            free_lattice_kernel(pt(2.0, 0.0), 0, 0),
            Err(ModelError::BoundaryOutsideAc { .. })
        ));
        assert!(matches!(
            free_lattice_kernel(pt(-2.0, 0.0), 1, 0),
            Err(ModelError::BoundaryOutsideAc { .. })
        ));
        // off the axis the thresholds are harmless
        assert!(free_lattice_kernel(pt(2.0, 1e-3), 0, 0).is_ok());
    }

    #[test]
    fn kernel_negative_real_axis_outside_band() {
        // symmetric under lambda -> -lambda up to the sign (-1)^{n-m}
        let a = free_lattice_kernel(pt(-3.0, 0.0), 0, 1).unwrap();
        let b = free_lattice_kernel(pt(3.0, 0.0), 0, 1).unwrap();
        assert!((a - b).norm() < 1e-15);
        let a = free_lattice_kernel(pt(-3.0, 0.0), 0, 0).unwrap();
        let b = free_lattice_kernel(pt(3.0, 0.0), 0, 0).unwrap();
        assert!((a + b).norm() < 1e-15);
    }

    #[test]
    fn kernel_boundary_imaginary_part_on_grid() {
        for i in 0..=38 {
            let l = -1.9 + 0.1 * i as f64;
            let v = free_lattice_kernel(pt(l, 0.0), 0, 0).unwrap();
            assert!((v.im - 1.0 / (4.0 - l * l).sqrt()).abs() < 1e-12, "{l}");
            assert!(v.re.abs() < 1e-12 || l != 0.0);
        }
    }

    #[test]
    fn sandwiched_examples() {
        let scalar = RiggedModel::point_mass(0.0, c(1.0, 0.0));
        let t = scalar.sandwiched_resolvent(pt(0.0, 1.0)).unwrap();
        assert!((t.value[(0, 0)] - I).norm() < 1e-15);

        let lat = RiggedModel::lattice_deltas(&[0]);
        let t = lat.sandwiched_resolvent(pt(0.0, 1.0)).unwrap();
        let k = free_lattice_kernel(pt(0.0, 1.0), 0, 0).unwrap();
        assert!((t.value[(0, 0)] - k).norm() < 1e-15);

        let sum = lat.direct_sum(&scalar);
        let p = pt(0.3, 0.2);
        let t = sum.sandwiched_resolvent(p).unwrap().value;
        let m = free_lattice_kernel(p, 0, 0).unwrap();
        let expect = matkit::complex_matrix(2, 2, &[m, c(0.0, 0.0), c(0.0, 0.0), -p.z().inv()]);
        assert!(max_abs(&(t - expect)) < 1e-15);
    }

    #[test]
    fn boundary_examples() {
        let lat = RiggedModel::lattice_deltas(&[0]);
        let t = lat.boundary_exact(0.0).unwrap().value;
        assert!((t[(0, 0)] - c(0.0, 0.5)).norm() < 1e-15);
        let t = lat.boundary_exact(1.0).unwrap().value;
        assert!((t[(0, 0)] - c(0.0, 1.0 / 3f64.sqrt())).norm() < 1e-15);

        let emb = lat.direct_sum(&RiggedModel::point_mass(0.0, c(1.0, 0.0)));
        assert!(emb.boundary_exact(0.0).is_none());
        assert!(emb.boundary_exact(0.5).is_some());
        assert!(lat.boundary_exact(2.0).is_none());
    }

    #[test]
    fn direct_sum_examples() {
        let p = RiggedModel::point_mass(0.0, c(1.0, 0.0));
        let pp = p.direct_sum(&p);
        let z = pt(0.4, 0.7);
        let t = pp.sandwiched_resolvent(z).unwrap().value;
        assert!(max_abs(&(t - CMat::identity(2, 2) * (-z.z().inv()))) < 1e-15);
        assert_eq!(pp.channels(), 2);

        let a = RiggedModel::lattice_deltas(&[0, 3]);
        let b = RiggedModel::point_mass(0.5, c(2.0, 0.0));
        let cm = RiggedModel::point_mass(-1.0, c(0.0, 1.0));
        let left = a.direct_sum(&b).direct_sum(&cm);
        let right = a.direct_sum(&b.direct_sum(&cm));
        assert_eq!(
            left.sandwiched_resolvent(z).unwrap().value,
            right.sandwiched_resolvent(z).unwrap().value
        );
    }

    #[test]
    fn mismatched_rigging_rejected() {
        assert!(RiggedModel::new(OperatorModel::FreeLattice1D, Rigging::Matrix(CMat::zeros(1, 1))).is_err());
        assert!(RiggedModel::new(OperatorModel::FreeLattice1D, Rigging::Lattice(vec![])).is_err());
        let zero = LatticeChannel { sites: vec![(0, c(0.0, 0.0))] };
        assert!(RiggedModel::new(OperatorModel::FreeLattice1D, Rigging::Lattice(vec![zero])).is_err());
        let h = OperatorModel::finite(Hermitian::identity(2));
        assert!(RiggedModel::new(h, Rigging::Matrix(CMat::identity(1, 3))).is_err());
    }

    #[test]
    fn truncation_matches_closed_form_small() {
        let ch = vec![LatticeChannel::delta(0), LatticeChannel { sites: vec![(1, c(1.0, 1.0)), (-2, c(0.5, 0.0))] }];
        let lat = RiggedModel::new(OperatorModel::FreeLattice1D, Rigging::Lattice(ch.clone())).unwrap();
        let trunc = truncated_lattice(300, &ch).unwrap();
        let p = pt(0.7, 0.5);
        let a = lat.sandwiched_resolvent(p).unwrap().value;
        let b = trunc.sandwiched_resolvent(p).unwrap().value;
        assert!(max_abs(&(a - b)) < 1e-12);
    }

    #[test]
    fn tridiagonal_path_matches_dense() {
        let trunc = truncated_lattice(20, &[LatticeChannel::delta(0), LatticeChannel::delta(5)]).unwrap();
        let (h, f) = trunc.as_finite().unwrap();
        let z = c(0.3, 0.4);
        let fast = trunc.resolvent_at(z).unwrap();
        let n = h.dim();
        let dense = f * matkit::solve_linear(&(h.matrix().as_matrix() - CMat::identity(n, n) * z), &f.adjoint()).unwrap();
        assert!(max_abs(&(fast - dense)) < 1e-13);
    }

    #[test]
    fn finite_boundary_avoids_eigenvalues() {
        let h = Hermitian::from_real_diagonal(&[-1.0, 1.0]);
        let m = RiggedModel::new(OperatorModel::finite(h), Rigging::Matrix(CMat::identity(2, 2))).unwrap();
        assert!(m.boundary_exact(1.0).is_none());
        let t = m.boundary_exact(0.0).unwrap().value;
        assert!(max_abs(&(t - matkit::real_matrix(2, 2, &[-1.0, 0.0, 0.0, 1.0]))) < 1e-15);
    }

    #[test]
    fn essential_spectrum_metadata() {
        let emb = RiggedModel::lattice_deltas(&[0]).direct_sum(&RiggedModel::point_mass(0.0, c(1.0, 0.0)));
        assert_eq!(emb.model().essential_spectrum(), vec![(-2.0, 2.0)]);
        assert!(RiggedModel::point_mass(0.0, c(1.0, 0.0)).model().essential_spectrum().is_empty());
    }
}
