//! Perturbations `V = F^* J F` acting through the rigging.
//!
//! With `T = T_z(H)` and a Hermitian `A` on the auxiliary space,
//!
//! ```text
//! T_z(H + F^* A F) = [1 + T A]^{-1} T = T [1 + A T]^{-1},
//! ```
//!
//! so everything about the coupled path `H_r = H0 + r F^* J F` is computed
//! from `k x k` matrices. The same identity on the boundary says that the
//! limit for `H_r` exists exactly when `1 + (r - r0) T_{lambda+i0}(H_{r0}) J`
//! is invertible, which is how resonance couplings are located.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lap::{self, BoundaryLimit, LapError, YGrid};
use crate::matkit::{self, CMat, Hermitian, MatError, Tolerances};
use crate::models::{HalfPlanePoint, ModelError, OperatorModel, RiggedModel, Rigging, SandwichedResolvent};
use crate::verify::{null_vector_certificate, NullCertificate};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PerturbError {
    #[error("1 + T A is not invertible (sigma_min = {sigma_min:e})")]
    AtResonance { sigma_min: f64 },
    #[error("direction is {direction}x{direction}, rigging has {channels} channels")]
    Dimension { direction: usize, channels: usize },
    #[error("lambda = {lambda} is an eigenvalue ({eigenvalue}) of the path at r = {r}")]
    EndpointOnSpectrum { r: f64, lambda: f64, eigenvalue: f64 },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Lap(#[from] LapError),
    #[error(transparent)]
    Matrix(#[from] MatError),
}

/// Hermitian `J` on the auxiliary space; the perturbation is `F^* J F`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Direction(#[serde(with = "matkit::serde_herm")] pub Hermitian);

impl Direction {
    pub fn new(j: Hermitian) -> Self {
        Self(j)
    }

    /// The direction `F^* F`.
    pub fn identity(k: usize) -> Self {
        Self(Hermitian::identity(k))
    }

    pub fn zeros(k: usize) -> Self {
        Self(Hermitian::zeros(k))
    }

    pub fn dim(&self) -> usize {
        self.0.dim()
    }

    pub fn matrix(&self) -> &CMat {
        self.0.as_matrix()
    }

    pub fn hermitian(&self) -> &Hermitian {
        &self.0
    }

    fn check(&self, model: &RiggedModel) -> Result<(), PerturbError> {
        if self.dim() != model.channels() {
            return Err(PerturbError::Dimension {
                direction: self.dim(),
                channels: model.channels(),
            });
        }
        Ok(())
    }
}

/// `H_r = H0 + r F^* J F`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoupledOperator {
    pub base: RiggedModel,
    pub direction: Direction,
    pub coupling: f64,
}

impl CoupledOperator {
    pub fn new(base: RiggedModel, direction: Direction, coupling: f64) -> Result<Self, PerturbError> {
        direction.check(&base)?;
        Ok(Self {
            base,
            direction,
            coupling,
        })
    }

    /// The accumulated Hermitian `r J` acting on the auxiliary space.
    pub fn total(&self) -> Hermitian {
        self.direction.hermitian().scale(self.coupling)
    }

    /// Adds a second coupling `r2 J2` through the same rigging; the result
    /// carries the single direction `r1 J1 + r2 J2` at coupling 1.
    pub fn compose(&self, other: &Direction, coupling: f64) -> Result<Self, PerturbError> {
        other.check(&self.base)?;
        let total = self.total().add(&other.hermitian().scale(coupling));
        Ok(Self {
            base: self.base.clone(),
            direction: Direction(total),
            coupling: 1.0,
        })
    }

    /// For a finite base, the explicitly assembled model `H + F^* (r J) F`
    /// with the same rigging.
    pub fn assemble_finite(&self) -> Option<RiggedModel> {
        let (h, f) = self.base.as_finite()?;
        let v = f.adjoint() * self.total().as_matrix() * f;
        let hr = Hermitian::new(h.matrix().as_matrix() + v).ok()?;
        RiggedModel::new(OperatorModel::finite(hr), Rigging::Matrix(f.clone())).ok()
    }
}

/// `[1 + T A]^{-1} T`, the sandwiched resolvent of the operator perturbed by
/// `F^* A F`.
pub fn perturbed_resolvent(
    t: &SandwichedResolvent,
    a: &Hermitian,
) -> Result<SandwichedResolvent, PerturbError> {
    perturbed_resolvent_with(t, a, &Tolerances::default())
}

pub fn perturbed_resolvent_with(
    t: &SandwichedResolvent,
    a: &Hermitian,
    tol: &Tolerances,
) -> Result<SandwichedResolvent, PerturbError> {
    let value = perturb_matrix(&t.value, a.as_matrix(), tol)?;
    Ok(SandwichedResolvent {
        value,
        point: t.point,
    })
}

fn perturb_matrix(t: &CMat, a: &CMat, tol: &Tolerances) -> Result<CMat, PerturbError> {
    let k = t.nrows();
    if a.nrows() != k {
        return Err(PerturbError::Dimension {
            direction: a.nrows(),
            channels: k,
        });
    }
    let ta = t * a;
    let m = CMat::identity(k, k) + &ta;
    let sigma_min = matkit::smallest_singular(&m);
    if sigma_min <= tol.resonance_rel * (1.0 + matkit::op_norm(&ta)) {
        return Err(PerturbError::AtResonance { sigma_min });
    }
    let tol = Tolerances {
        singular_rel: 0.0,
        ..*tol
    };
    matkit::solve_linear_with(&m, t, &tol).map_err(|e| match e {
        MatError::SingularMatrix { sigma_min, .. } => PerturbError::AtResonance { sigma_min },
        other => other.into(),
    })
}

/// `T_z(H_r)` through the resolvent identity. On the real axis this needs an
/// exact base boundary value.
pub fn coupled_t(op: &CoupledOperator, point: HalfPlanePoint) -> Result<SandwichedResolvent, PerturbError> {
    let base = op.base.sandwiched_resolvent(point)?;
    if op.coupling == 0.0 {
        return Ok(base);
    }
    perturbed_resolvent(&base, &op.total())
}

/// `T_{lambda+i0}(H_r)`: exact through the identity when the base has an exact
/// boundary value, otherwise a numeric limit of [`coupled_t`].
pub fn coupled_boundary_limit(
    op: &CoupledOperator,
    lambda: f64,
    grid: &YGrid,
    tol: &Tolerances,
) -> Result<BoundaryLimit, PerturbError> {
    if let Some(t0) = op.base.boundary_exact(lambda) {
        let t = perturbed_resolvent_with(&t0, &op.total(), tol)?;
        return Ok(BoundaryLimit::exact(t.value));
    }
    Ok(lap::numeric_limit(|p| coupled_t(op, p), lambda, grid, tol)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExistenceCheck {
    pub exists: bool,
    pub sigma_min: f64,
    pub null_certificate: Option<NullCertificate>,
}

/// Does the boundary limit survive the extra perturbation `F^* delta_a F`?
/// True exactly when `1 + T_limit delta_a` is invertible.
pub fn exists_at_coupling(t_limit: &CMat, delta_a: &Hermitian, tol: &Tolerances) -> ExistenceCheck {
    let m = t_limit * delta_a.as_matrix();
    let k = m.nrows();
    let sigma_min = matkit::smallest_singular(&(CMat::identity(k, k) + &m));
    if sigma_min > tol.exists_rel * (1.0 + matkit::op_norm(&m)) {
        return ExistenceCheck {
            exists: true,
            sigma_min,
            null_certificate: None,
        };
    }
    ExistenceCheck {
        exists: false,
        sigma_min,
        null_certificate: null_vector_certificate(&m, tol).ok(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Resonance {
    pub r: f64,
    pub multiplicity: usize,
    /// Mean of the eigenvalue cluster of `T J` that produced this coupling.
    pub mu: Complex64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dip {
    pub r: f64,
    pub sigma_min: f64,
}

/// Independent check of the eigenvalue route: local minima of
/// `sigma_min(1 + (r - r0) T J)` on a uniform grid, refined by golden section.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossCheck {
    pub step: f64,
    pub dips: Vec<Dip>,
    pub agrees: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResonanceReport {
    pub anchor: f64,
    pub resonances: Vec<Resonance>,
    pub window: (f64, f64),
    pub real_tolerance: f64,
    /// Rank of `J` when the problem was restricted to its range; equals the
    /// channel count for invertible `J`.
    pub restricted_rank: usize,
    pub cross_check: CrossCheck,
}

impl ResonanceReport {
    pub fn couplings(&self) -> Vec<f64> {
        self.resonances.iter().map(|r| r.r).collect()
    }
}

/// Range restriction: with `J = Q D Q^*` over the nonzero eigenvalues,
/// the nonzero spectrum of `T J` equals that of `(Q^* T Q) D`.
pub fn restrict_to_range(t: &CMat, j: &Hermitian) -> Result<(CMat, CMat), MatError> {
    let eig = matkit::eig_hermitian(j)?;
    let scale = eig.values.iter().fold(0.0_f64, |a, &l| a.max(l.abs()));
    let keep: Vec<usize> = (0..eig.values.len())
        .filter(|&i| eig.values[i].abs() > 1e-12 * scale)
        .collect();
    let k = j.dim();
    let mut q = CMat::zeros(k, keep.len());
    for (dst, &src) in keep.iter().enumerate() {
        q.set_column(dst, &eig.vectors.column(src));
    }
    let d = CMat::from_diagonal(&nalgebra::DVector::from_iterator(
        keep.len(),
        keep.iter().map(|&i| Complex64::new(eig.values[i], 0.0)),
    ));
    Ok((q.adjoint() * t * q, d))
}

/// Couplings `r` in `window` at which `T_{lambda+i0}(H_r)` fails to exist,
/// relative to an anchor `r0` where it exists with value `t_limit`.
///
/// These are `r = r0 - 1/mu` for the real nonzero eigenvalues `mu` of
/// `t_limit J`. Eigenvalues are first grouped into clusters; realness and
/// location are read off the cluster mean, which stays accurate for
/// defective eigenvalues where individual eigenvalues split like
/// `sqrt(error)`.
pub fn resonance_couplings(
    t_limit: &CMat,
    anchor: f64,
    j: &Direction,
    window: (f64, f64),
    tol: &Tolerances,
) -> Result<ResonanceReport, PerturbError> {
    let k = t_limit.nrows();
    if j.dim() != k {
        return Err(PerturbError::Dimension {
            direction: j.dim(),
            channels: k,
        });
    }
    let (tr, d) = restrict_to_range(t_limit, j.hermitian())?;
    let restricted_rank = d.nrows();
    let mus = matkit::eig_general_with(&(&tr * &d), tol)?;
    let scale = matkit::op_norm(t_limit) * j.hermitian().norm();

    let mut resonances = Vec::new();
    for cluster in cluster_eigenvalues(&mus, tol.cluster_rel) {
        let mean = cluster.iter().sum::<Complex64>() / cluster.len() as f64;
        let is_real = mean.im.abs() <= tol.real_eig * (1.0 + mean.norm());
        if !is_real || mean.re.abs() <= 1e-14 * scale.max(f64::MIN_POSITIVE) {
            continue;
        }
        let r = anchor - 1.0 / mean.re;
        if r >= window.0 && r <= window.1 {
            resonances.push(Resonance {
                r,
                multiplicity: cluster.len(),
                mu: mean,
            });
        }
    }
    resonances.sort_by(|a, b| a.r.total_cmp(&b.r));

    let tj = t_limit * j.matrix();
    let dips = sigma_dips(&tj, anchor, window, tol);
    let agrees = resonances
        .iter()
        .all(|res| dips.iter().any(|d| (d.r - res.r).abs() <= tol.scan_step))
        && dips
            .iter()
            .all(|d| resonances.iter().any(|res| (d.r - res.r).abs() <= tol.scan_step));

    Ok(ResonanceReport {
        anchor,
        resonances,
        window,
        real_tolerance: tol.real_eig,
        restricted_rank,
        cross_check: CrossCheck {
            step: tol.scan_step,
            dips,
            agrees,
        },
    })
}

/// Single-linkage clusters of eigenvalues closer than `rel * (1 + |mu|)`.
fn cluster_eigenvalues(mus: &[Complex64], rel: f64) -> Vec<Vec<Complex64>> {
    let n = mus.len();
    let mut label: Vec<usize> = (0..n).collect();
    fn root(label: &mut [usize], mut i: usize) -> usize {
        while label[i] != i {
            label[i] = label[label[i]];
            i = label[i];
        }
        i
    }
    for a in 0..n {
        for b in a + 1..n {
            let radius = rel * (1.0 + mus[a].norm().max(mus[b].norm()));
            if (mus[a] - mus[b]).norm() <= radius {
                let (ra, rb) = (root(&mut label, a), root(&mut label, b));
                label[ra.max(rb)] = ra.min(rb);
            }
        }
    }
    let mut groups: Vec<(usize, Vec<Complex64>)> = Vec::new();
    for (i, &mu) in mus.iter().enumerate() {
        let r = root(&mut label, i);
        match groups.iter_mut().find(|g| g.0 == r) {
            Some(g) => g.1.push(mu),
            None => groups.push((r, vec![mu])),
        }
    }
    groups.into_iter().map(|g| g.1).collect()
}

/// `sigma_min(1 + (r - r0) T J)` at a single `r`.
pub fn criterion_sigma(tj: &CMat, anchor: f64, r: f64) -> f64 {
    let k = tj.nrows();
    matkit::smallest_singular(&(CMat::identity(k, k) + tj * Complex64::new(r - anchor, 0.0)))
}

pub fn sigma_dips(tj: &CMat, anchor: f64, window: (f64, f64), tol: &Tolerances) -> Vec<Dip> {
    let (lo, hi) = window;
    if hi.partial_cmp(&lo) != Some(std::cmp::Ordering::Greater) || tol.scan_step <= 0.0 {
        return Vec::new();
    }
    let n = ((hi - lo) / tol.scan_step).round() as usize + 1;
    let rs: Vec<f64> = (0..n).map(|i| (lo + i as f64 * tol.scan_step).min(hi)).collect();
    let sig: Vec<f64> = rs.par_iter().map(|&r| criterion_sigma(tj, anchor, r)).collect();

    let mut dips = Vec::new();
    for i in 0..n {
        let left = if i == 0 { f64::INFINITY } else { sig[i - 1] };
        let right = if i + 1 == n { f64::INFINITY } else { sig[i + 1] };
        if !(sig[i] < left && sig[i] <= right) {
            continue;
        }
        let a = rs[i.saturating_sub(1)];
        let b = rs[(i + 1).min(n - 1)];
        let (r, s) = golden_min(|r| criterion_sigma(tj, anchor, r), a, b);
        let (r, s) = if sig[i] < s { (rs[i], sig[i]) } else { (r, s) };
        if s < tol.dip {
            dips.push(Dip { r, sigma_min: s });
        }
    }
    dips
}

fn golden_min(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> (f64, f64) {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..200 {
        if (b - a).abs() <= 1e-15 * (1.0 + a.abs().max(b.abs())) {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    if fc < fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// Knobs for [`regular_direction`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegularityConfig {
    pub grid: YGrid,
    pub tol: Tolerances,
    pub anchors: Vec<f64>,
    pub window: (f64, f64),
}

pub const DEFAULT_ANCHORS: [f64; 5] = [0.0, 1.0, -1.0, 0.5, 2.0];

impl Default for RegularityConfig {
    fn default() -> Self {
        Self {
            grid: YGrid::default(),
            tol: Tolerances::default(),
            anchors: DEFAULT_ANCHORS.to_vec(),
            window: (-5.0, 5.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AttemptOutcome {
    Limit { limit: BoundaryLimit },
    AtResonance { sigma_min: f64 },
    Failed { message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnchorAttempt {
    pub anchor: f64,
    pub outcome: AttemptOutcome,
}

/// `Regular` carries a converged limit as evidence; `NotObserved` is absence
/// of evidence, not a proof of irregularity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum RegularityVerdict {
    Regular {
        witness_coupling: f64,
        limit: BoundaryLimit,
        resonances: ResonanceReport,
        attempts: Vec<AnchorAttempt>,
    },
    NotObserved {
        attempts: Vec<AnchorAttempt>,
    },
}

impl RegularityVerdict {
    pub fn is_regular(&self) -> bool {
        matches!(self, RegularityVerdict::Regular { .. })
    }

    pub fn witness(&self) -> Option<(f64, &CMat)> {
        match self {
            RegularityVerdict::Regular {
                witness_coupling,
                limit,
                ..
            } => limit.value().map(|v| (*witness_coupling, v)),
            RegularityVerdict::NotObserved { .. } => None,
        }
    }

    pub fn resonances(&self) -> Option<&ResonanceReport> {
        match self {
            RegularityVerdict::Regular { resonances, .. } => Some(resonances),
            RegularityVerdict::NotObserved { .. } => None,
        }
    }
}

/// Tries the anchors in order and stops at the first coupling where
/// `T_{lambda+i0}(H0 + r F^* J F)` is observed to exist.
pub fn regular_direction(
    model: &RiggedModel,
    lambda: f64,
    j: &Direction,
    cfg: &RegularityConfig,
) -> Result<RegularityVerdict, PerturbError> {
    j.check(model)?;
    let mut attempts = Vec::new();
    for &anchor in &cfg.anchors {
        let op = CoupledOperator::new(model.clone(), j.clone(), anchor)?;
        let outcome = match coupled_boundary_limit(&op, lambda, &cfg.grid, &cfg.tol) {
            Ok(limit) => {
                if let Some(value) = limit.value() {
                    let resonances = resonance_couplings(value, anchor, j, cfg.window, &cfg.tol)?;
                    return Ok(RegularityVerdict::Regular {
                        witness_coupling: anchor,
                        limit,
                        resonances,
                        attempts,
                    });
                }
                AttemptOutcome::Limit { limit }
            }
            Err(PerturbError::AtResonance { sigma_min }) => AttemptOutcome::AtResonance { sigma_min },
            Err(e) => AttemptOutcome::Failed {
                message: e.to_string(),
            },
        };
        attempts.push(AnchorAttempt { anchor, outcome });
    }
    Ok(RegularityVerdict::NotObserved { attempts })
}

/// Regularity of the direction `F^* F`, which decides semi-regularity of
/// `lambda` on its own.
pub fn is_semi_regular(
    model: &RiggedModel,
    lambda: f64,
    cfg: &RegularityConfig,
) -> Result<RegularityVerdict, PerturbError> {
    regular_direction(model, lambda, &Direction::identity(model.channels()), cfg)
}

/// Net number of eigenvalues of `H0 + r V` crossing `lambda` upwards as `r`
/// runs from `r_from` to `r_to`: `N(r_from) - N(r_to)` with `N` counting
/// eigenvalues below `lambda`.
pub fn spectral_flow_finite(
    h0: &Hermitian,
    v: &Hermitian,
    lambda: f64,
    r_from: f64,
    r_to: f64,
) -> Result<i64, PerturbError> {
    if h0.dim() != v.dim() {
        return Err(PerturbError::Dimension {
            direction: v.dim(),
            channels: h0.dim(),
        });
    }
    let count = |r: f64| -> Result<i64, PerturbError> {
        let h = h0.add(&v.scale(r));
        let eig = matkit::eig_hermitian(&h)?;
        let guard = 1e-10 * (1.0 + h.norm());
        if let Some(&e) = eig.values.iter().find(|&&e| (e - lambda).abs() <= guard) {
            return Err(PerturbError::EndpointOnSpectrum {
                r,
                lambda,
                eigenvalue: e,
            });
        }
        Ok(eig.values.iter().filter(|&&e| e < lambda).count() as i64)
    };
    Ok(count(r_from)? - count(r_to)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matkit::{c, complex_matrix, max_abs, real_matrix, I};

    fn scalar_t(v: Complex64) -> SandwichedResolvent {
        SandwichedResolvent {
            value: complex_matrix(1, 1, &[v]),
            point: HalfPlanePoint::boundary(0.0),
        }
    }

    fn herm(rows: usize, data: &[f64]) -> Hermitian {
        Hermitian::new(real_matrix(rows, rows, data)).unwrap()
    }

    fn embedded() -> RiggedModel {
        RiggedModel::lattice_deltas(&[0]).direct_sum(&RiggedModel::point_mass(0.0, c(1.0, 0.0)))
    }

    fn swap() -> Direction {
        Direction::new(herm(2, &[0.0, 1.0, 1.0, 0.0]))
    }

    #[test]
    fn perturbed_resolvent_examples() {
        let t = scalar_t(c(0.3, 0.7));
        let same = perturbed_resolvent(&t, &Hermitian::zeros(1)).unwrap();
        assert_eq!(same.value, t.value);

        // (i/2)/(1 + i)
        let out = perturbed_resolvent(&scalar_t(c(0.0, 0.5)), &herm(1, &[2.0])).unwrap();
        assert!((out.value[(0, 0)] - c(0.25, 0.25)).norm() < 1e-15);

        let s5 = 5f64.sqrt();
        let err = perturbed_resolvent(&scalar_t(c(-1.0 / s5, 0.0)), &herm(1, &[s5])).unwrap_err();
        assert!(matches!(err, PerturbError::AtResonance { .. }));
    }

    #[test]
    fn scalar_coupling_both_routes() {
        let base = RiggedModel::point_mass(0.0, c(1.0, 0.0));
        let op = CoupledOperator::new(base.clone(), Direction::new(herm(1, &[1.0])), 1.0).unwrap();
        let z = HalfPlanePoint::new(0.0, 1.0).unwrap();
        let via_identity = coupled_t(&op, z).unwrap().value[(0, 0)];
        let direct = op.assemble_finite().unwrap().sandwiched_resolvent(z).unwrap().value[(0, 0)];
        assert!((via_identity - c(0.5, 0.5)).norm() < 1e-15);
        assert!((direct - c(0.5, 0.5)).norm() < 1e-15);

        let zero = CoupledOperator::new(base.clone(), Direction::new(herm(1, &[1.0])), 0.0).unwrap();
        assert_eq!(coupled_t(&zero, z).unwrap(), base.sandwiched_resolvent(z).unwrap());
    }

    #[test]
    fn embedded_limit_at_unit_coupling() {
        let op = CoupledOperator::new(embedded(), swap(), 1.0).unwrap();
        let lim = coupled_boundary_limit(&op, 0.0, &YGrid::default(), &Tolerances::default()).unwrap();
        let v = lim.value().expect("converged");
        let expect = complex_matrix(2, 2, &[c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 2.0)]);
        assert!(max_abs(&(v - expect)) < 1e-6, "{v}");
    }

    #[test]
    fn composition_collapses_directions() {
        let base = RiggedModel::lattice_deltas(&[0, 2]);
        let j1 = Direction::new(herm(2, &[1.0, 0.5, 0.5, -1.0]));
        let j2 = Direction::new(herm(2, &[0.0, 2.0, 2.0, 3.0]));
        let op = CoupledOperator::new(base, j1, 0.7).unwrap();
        let both = op.compose(&j2, -0.4).unwrap();
        assert_eq!(both.coupling, 1.0);
        let z = HalfPlanePoint::new(0.2, 0.3).unwrap();
        let stepwise = perturbed_resolvent(&coupled_t(&op, z).unwrap(), &j2.hermitian().scale(-0.4)).unwrap();
        let direct = coupled_t(&both, z).unwrap();
        assert!(max_abs(&(stepwise.value - direct.value)) < 1e-12);
    }

    #[test]
    fn dimension_mismatch() {
        assert!(matches!(
            CoupledOperator::new(embedded(), Direction::identity(3), 1.0),
            Err(PerturbError::Dimension { .. })
        ));
    }

    #[test]
    fn existence_examples() {
        let tol = Tolerances::default();
        let t = complex_matrix(1, 1, &[c(0.0, 0.5)]);
        assert!(exists_at_coupling(&t, &Hermitian::zeros(1), &tol).exists);
        for s in [-1e3, -2.0, -0.5, 0.0, 0.5, 2.0, 1e3] {
            let chk = exists_at_coupling(&t, &herm(1, &[s]), &tol);
            assert!(chk.exists && chk.sigma_min >= 1.0 - 1e-15);
        }
        let s5 = 5f64.sqrt();
        let t = complex_matrix(1, 1, &[c(-1.0 / s5, 0.0)]);
        let chk = exists_at_coupling(&t, &herm(1, &[s5]), &tol);
        assert!(!chk.exists);
        let cert = chk.null_certificate.unwrap();
        assert!((cert.vector[0].norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn resonance_outside_band() {
        let lat = RiggedModel::lattice_deltas(&[0]);
        let t = lat.boundary_exact(3.0).unwrap().value;
        let rep = resonance_couplings(&t, 0.0, &Direction::identity(1), (-3.0, 3.0), &Tolerances::default()).unwrap();
        assert_eq!(rep.resonances.len(), 1);
        assert!((rep.resonances[0].r - 5f64.sqrt()).abs() < 1e-12);
        assert_eq!(rep.resonances[0].multiplicity, 1);
        assert!(rep.cross_check.agrees, "{:?}", rep.cross_check);
    }

    #[test]
    fn no_resonance_inside_band() {
        let lat = RiggedModel::lattice_deltas(&[0]);
        let t = lat.boundary_exact(0.0).unwrap().value;
        let rep = resonance_couplings(&t, 0.0, &Direction::identity(1), (-5.0, 5.0), &Tolerances::default()).unwrap();
        assert!(rep.resonances.is_empty());
        assert!(rep.cross_check.dips.is_empty());
        assert!(rep.cross_check.agrees);
    }

    #[test]
    fn embedded_double_resonance_from_exact_anchor_value() {
        let t = complex_matrix(2, 2, &[c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 2.0)]);
        let tj = &t * swap().matrix();
        assert!(max_abs(&(tj - complex_matrix(2, 2, &[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 2.0), c(1.0, 0.0)]))) < 1e-15);
        let rep = resonance_couplings(&t, 1.0, &swap(), (-5.0, 5.0), &Tolerances::default()).unwrap();
        assert_eq!(rep.resonances.len(), 1);
        assert!(rep.resonances[0].r.abs() < 1e-12);
        assert_eq!(rep.resonances[0].multiplicity, 2);
        assert!(rep.cross_check.agrees);
    }

    #[test]
    fn singular_direction_restricts_to_range() {
        let t = complex_matrix(2, 2, &[c(-0.5, 0.0), c(0.1, 0.0), c(0.1, 0.0), c(0.0, 1.0)]);
        let j = Direction::new(Hermitian::from_real_diagonal(&[1.0, 0.0]));
        let rep = resonance_couplings(&t, 0.0, &j, (-5.0, 5.0), &Tolerances::default()).unwrap();
        assert_eq!(rep.restricted_rank, 1);
        assert_eq!(rep.resonances.len(), 1);
        assert!((rep.resonances[0].r - 2.0).abs() < 1e-12);
        let zero = resonance_couplings(&t, 0.0, &Direction::zeros(2), (-5.0, 5.0), &Tolerances::default()).unwrap();
        assert_eq!(zero.restricted_rank, 0);
        assert!(zero.resonances.is_empty());
    }

    #[test]
    fn regularity_examples() {
        let cfg = RegularityConfig::default();
        let lat = RiggedModel::lattice_deltas(&[0]);
        let v = regular_direction(&lat, 0.0, &Direction::identity(1), &cfg).unwrap();
        let (w, _) = v.witness().unwrap();
        assert_eq!(w, 0.0);
        assert!(v.resonances().unwrap().resonances.is_empty());

        let v = regular_direction(&embedded(), 0.0, &swap(), &cfg).unwrap();
        let (w, _) = v.witness().unwrap();
        assert_eq!(w, 1.0);
        let rep = v.resonances().unwrap();
        assert_eq!(rep.couplings().len(), 1);
        assert!(rep.resonances[0].r.abs() < 1e-8, "{rep:?}");
        assert_eq!(rep.resonances[0].multiplicity, 2);
        if let RegularityVerdict::Regular { attempts, .. } = &v {
            assert_eq!(attempts.len(), 1);
            match &attempts[0].outcome {
                AttemptOutcome::Limit { limit } => assert!(limit.is_diverged()),
                other => panic!("{other:?}"),
            }
        }

        let v = regular_direction(&embedded(), 0.0, &Direction::zeros(2), &cfg).unwrap();
        match v {
            RegularityVerdict::NotObserved { attempts } => assert_eq!(attempts.len(), 5),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn semi_regular_examples() {
        let cfg = RegularityConfig::default();
        assert!(is_semi_regular(&RiggedModel::lattice_deltas(&[0]), 0.0, &cfg).unwrap().is_regular());

        let v = is_semi_regular(&embedded(), 0.0, &cfg).unwrap();
        let (w, t) = v.witness().unwrap();
        assert_eq!(w, 1.0);
        let expect = complex_matrix(2, 2, &[c(0.2, 0.4), c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]);
        assert!(max_abs(&(t - expect)) < 1e-6);

        let point = RiggedModel::point_mass(0.0, c(1.0, 0.0));
        let v = is_semi_regular(&point, 0.0, &cfg).unwrap();
        let (w, t) = v.witness().unwrap();
        assert_eq!(w, 1.0);
        assert!((t[(0, 0)] - c(1.0, 0.0)).norm() < 1e-6);
    }

    #[test]
    fn spectral_flow_examples() {
        let h0 = herm(1, &[0.0]);
        assert_eq!(spectral_flow_finite(&h0, &herm(1, &[1.0]), 0.5, 0.0, 1.0).unwrap(), 1);
        assert_eq!(spectral_flow_finite(&h0, &herm(1, &[0.0]), 0.5, 0.0, 1.0).unwrap(), 0);
        let h0 = Hermitian::from_real_diagonal(&[-1.0, 1.0]);
        assert_eq!(spectral_flow_finite(&h0, &Hermitian::identity(2), 0.5, 0.0, 1.0).unwrap(), 0);
        assert!(matches!(
            spectral_flow_finite(&h0, &Hermitian::identity(2), 1.0, 0.0, 1.0),
            Err(PerturbError::EndpointOnSpectrum { .. })
        ));
    }

    #[test]
    fn herglotz_preserved_by_coupling() {
        let lat = RiggedModel::lattice_deltas(&[0, 1, 4]);
        let j = Direction::new(herm(3, &[1.0, -2.0, 0.5, -2.0, 0.0, 1.0, 0.5, 1.0, -3.0]));
        for r in [-2.0, -0.3, 0.9, 4.0] {
            let op = CoupledOperator::new(lat.clone(), j.clone(), r).unwrap();
            let t = coupled_t(&op, HalfPlanePoint::new(0.4, 0.01).unwrap()).unwrap();
            assert!(t.im_min_eigenvalue() >= -1e-10 * t.norm());
        }
        let _ = I;
    }
}
