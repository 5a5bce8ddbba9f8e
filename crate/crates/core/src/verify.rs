//! Executable checks of the regular-direction statements.
//!
//! * [`verify_identity_direction`]: if some direction `F^* J F` is regular at
//!   `lambda`, so is `F^* F`.
//! * [`verify_abs_direction`]: if `F^* J F` is regular, so is `F^* |J| F`.
//! * [`verify_monotone_direction`]: for `0 <= J <= J~`, regularity of `J`
//!   passes to `J~`.
//!
//! The verifiers only consume verdicts produced by
//! [`crate::perturb::regular_direction`]; the certificates embed that raw
//! evidence. [`proof_chain_check`] evaluates the intermediate identities of the
//! invertibility argument at a concrete singular point.

use nalgebra::DVector;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matkit::{self, CMat, Hermitian, MatError, Tolerances};
use crate::models::{LatticeChannel, OperatorModel, RiggedModel, Rigging};
use crate::perturb::{self, Direction, PerturbError, RegularityConfig, RegularityVerdict};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum VerifyError {
    #[error("1 + M is not singular (sigma_min = {sigma_min:e})")]
    NotSingular { sigma_min: f64 },
    #[error("shift s = {s} must exceed ||J|| = {norm}")]
    SBelowNorm { s: f64, norm: f64 },
    #[error("invalid premise: {0}")]
    InvalidPremise(String),
    #[error("eigenvalue {index} is not simple (gap {gap:e})")]
    DegenerateEigenvalue { index: usize, gap: f64 },
    #[error("invalid analytic path: {0}")]
    InvalidPath(String),
    #[error(transparent)]
    Perturb(#[from] PerturbError),
    #[error(transparent)]
    Matrix(#[from] MatError),
}

/// Unit vector in the kernel of `1 + M`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NullCertificate {
    pub vector: Vec<Complex64>,
    pub residual: f64,
    pub sigma_min: f64,
}

impl NullCertificate {
    pub fn as_vector(&self) -> DVector<Complex64> {
        DVector::from_column_slice(&self.vector)
    }
}

/// Right singular vector of the smallest singular value of `1 + M`, provided
/// `1 + M` is numerically singular.
pub fn null_vector_certificate(m: &CMat, tol: &Tolerances) -> Result<NullCertificate, VerifyError> {
    let k = m.nrows();
    let one_plus = CMat::identity(k, k) + m;
    let bound = tol.null_rel * (1.0 + matkit::op_norm(m));
    let (sigma_min, v) = matkit::smallest_singular_pair(&one_plus);
    if sigma_min > bound {
        return Err(VerifyError::NotSingular { sigma_min });
    }
    let residual = (&one_plus * &v).norm();
    if residual > bound {
        return Err(VerifyError::NotSingular { sigma_min: residual });
    }
    Ok(NullCertificate {
        vector: v.iter().copied().collect(),
        residual,
        sigma_min,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evidence {
    pub direction: Direction,
    pub verdict: RegularityVerdict,
}

impl Evidence {
    pub fn witness_coupling(&self) -> Option<f64> {
        self.verdict.witness().map(|(r, _)| r)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoremCertificate {
    pub claim: String,
    pub scenario: String,
    pub premise: Evidence,
    pub conclusion: Option<Evidence>,
    /// True when the premise could not be established, in which case `pass`
    /// holds vacuously.
    pub vacuous: bool,
    pub pass: bool,
}

impl TheoremCertificate {
    pub fn conclusion_limit(&self) -> Option<(f64, &CMat)> {
        self.conclusion.as_ref().and_then(|e| e.verdict.witness())
    }
}

fn certify(
    claim: &str,
    scenario: &str,
    model: &RiggedModel,
    lambda: f64,
    premise_dir: &Direction,
    conclusion_dir: impl FnOnce() -> Result<Direction, VerifyError>,
    cfg: &RegularityConfig,
) -> Result<TheoremCertificate, VerifyError> {
    let premise = Evidence {
        direction: premise_dir.clone(),
        verdict: perturb::regular_direction(model, lambda, premise_dir, cfg)?,
    };
    if !premise.verdict.is_regular() {
        return Ok(TheoremCertificate {
            claim: claim.into(),
            scenario: scenario.into(),
            premise,
            conclusion: None,
            vacuous: true,
            pass: true,
        });
    }
    let dir = conclusion_dir()?;
    let verdict = perturb::regular_direction(model, lambda, &dir, cfg)?;
    let pass = verdict.is_regular();
    Ok(TheoremCertificate {
        claim: claim.into(),
        scenario: scenario.into(),
        premise,
        conclusion: Some(Evidence {
            direction: dir,
            verdict,
        }),
        vacuous: false,
        pass,
    })
}

/// Regular `J` at `lambda` implies regular `F^* F`.
pub fn verify_identity_direction(
    model: &RiggedModel,
    lambda: f64,
    j: &Direction,
    cfg: &RegularityConfig,
) -> Result<TheoremCertificate, VerifyError> {
    let k = model.channels();
    certify(
        "F*F is a regular direction",
        &format!("lambda = {lambda}, k = {k}"),
        model,
        lambda,
        j,
        || Ok(Direction::identity(k)),
        cfg,
    )
}

/// Regular `J` implies regular `|J|`. The resonance analysis of the
/// conclusion runs on the range of `|J|` when `|J|` is singular.
pub fn verify_abs_direction(
    model: &RiggedModel,
    lambda: f64,
    j: &Direction,
    cfg: &RegularityConfig,
) -> Result<TheoremCertificate, VerifyError> {
    certify(
        "F*|J|F is a regular direction",
        &format!("lambda = {lambda}, k = {}", model.channels()),
        model,
        lambda,
        j,
        || Ok(Direction::new(matkit::abs_hermitian(j.hermitian())?)),
        cfg,
    )
}

/// For `0 <= J <= J~`, regular `J` implies regular `J~`.
pub fn verify_monotone_direction(
    model: &RiggedModel,
    lambda: f64,
    j: &Direction,
    j_tilde: &Direction,
    cfg: &RegularityConfig,
) -> Result<TheoremCertificate, VerifyError> {
    if j.dim() != j_tilde.dim() {
        return Err(VerifyError::InvalidPremise("J and J~ differ in size".into()));
    }
    let rel = cfg.tol.psd_clamp_rel;
    if !j.hermitian().is_psd(rel) {
        return Err(VerifyError::InvalidPremise("J is not positive semidefinite".into()));
    }
    let gap = j_tilde.hermitian().sub(j.hermitian());
    let scale = j.hermitian().norm().max(j_tilde.hermitian().norm());
    if gap.dim() > 0 && gap.min_eigenvalue() < -rel * scale {
        return Err(VerifyError::InvalidPremise("J~ - J is not positive semidefinite".into()));
    }
    certify(
        "F*J~F is a regular direction",
        &format!("lambda = {lambda}, k = {}", model.channels()),
        model,
        lambda,
        j,
        || Ok(j_tilde.clone()),
        cfg,
    )
}

/// Values of the intermediate identities at one singular point of
/// `1 + r T (s - J)`, with `psi` the unit null vector of
/// `1 + r sqrt(s-J) T sqrt(s-J)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProofChainSteps {
    pub psi: Vec<Complex64>,
    /// `|| r S T S psi + psi ||`.
    pub eigen_residual: f64,
    /// `|| Im T S psi ||`.
    pub im_annihilation: f64,
    /// `|| r S Re T S psi + psi ||`.
    pub real_part_residual: f64,
    /// `<psi, (s - J)^{-1} psi>`; recorded, not asserted.
    pub inverse_form: f64,
    pub sigma_min: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum ProofChain {
    Checked(ProofChainSteps),
    /// `Im T` is positive definite, so `1 + r T (s - J)` has no singular point.
    VacuouslyConsistent { im_min_eigenvalue: f64 },
}

pub fn proof_chain_check(
    t_limit: &CMat,
    j: &Direction,
    r: f64,
    s: f64,
    tol: &Tolerances,
) -> Result<ProofChain, VerifyError> {
    let norm = j.hermitian().norm();
    if s <= norm {
        return Err(VerifyError::SBelowNorm { s, norm });
    }
    let im_t = matkit::im_part(t_limit)?;
    let re_t = matkit::re_part(t_limit)?;
    let im_min = im_t.min_eigenvalue();
    if im_min > 1e-8 * matkit::op_norm(t_limit) {
        return Ok(ProofChain::VacuouslyConsistent {
            im_min_eigenvalue: im_min,
        });
    }
    let shifted = j.hermitian().shift_neg(s);
    let root = matkit::psd_sqrt_with(&shifted, tol)?;
    let sq = root.as_matrix();
    let rc = Complex64::new(r, 0.0);
    let m = sq * t_limit * sq * rc;
    let cert = null_vector_certificate(&m, tol)?;
    let psi = cert.as_vector();
    let s_psi = sq * &psi;

    let eigen_residual = (&m * &psi + &psi).norm();
    let im_annihilation = (im_t.as_matrix() * &s_psi).norm();
    let real_part_residual = (sq * re_t.as_matrix() * &s_psi * rc + &psi).norm();
    let k = psi.len();
    let inv_psi = matkit::solve_linear(shifted.as_matrix(), &CMat::from_column_slice(k, 1, psi.as_slice()))?;
    let inverse_form = psi.dotc(&inv_psi.column(0).clone_owned()).re;

    Ok(ProofChain::Checked(ProofChainSteps {
        psi: cert.vector,
        eigen_residual,
        im_annihilation,
        real_part_residual,
        inverse_form,
        sigma_min: cert.sigma_min,
    }))
}

/// `N_s = sum_j A_j s^j` with Hermitian coefficients, degree at most 4.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalyticPath {
    coefficients: Vec<Hermitian>,
}

impl AnalyticPath {
    pub fn new(coefficients: Vec<Hermitian>) -> Result<Self, VerifyError> {
        if coefficients.is_empty() || coefficients.len() > 5 {
            return Err(VerifyError::InvalidPath(format!(
                "expected 1 to 5 coefficients, got {}",
                coefficients.len()
            )));
        }
        let n = coefficients[0].dim();
        if coefficients.iter().any(|a| a.dim() != n) {
            return Err(VerifyError::InvalidPath("coefficients differ in size".into()));
        }
        Ok(Self { coefficients })
    }

    pub fn at(&self, s: f64) -> Hermitian {
        let n = self.coefficients[0].dim();
        let mut acc = Hermitian::zeros(n);
        for a in self.coefficients.iter().rev() {
            acc = acc.scale(s).add(a);
        }
        acc
    }

    pub fn derivative_at(&self, s: f64) -> Hermitian {
        let n = self.coefficients[0].dim();
        let mut acc = Hermitian::zeros(n);
        for (j, a) in self.coefficients.iter().enumerate().skip(1).rev() {
            acc = acc.scale(s).add(&a.scale(j as f64));
        }
        acc
    }

    /// The `which`-th eigenvalue (ascending) of `N_s`.
    pub fn eigenvalue(&self, s: f64, which: usize) -> Result<f64, VerifyError> {
        let eig = matkit::eig_hermitian(&self.at(s))?;
        eig.values
            .get(which)
            .copied()
            .ok_or_else(|| VerifyError::InvalidPath(format!("no eigenvalue with index {which}")))
    }
}

/// `d/ds lambda_which(s)` at `s0` as `<phi, N'_{s0} phi>`.
pub fn hellmann_feynman_derivative(
    path: &AnalyticPath,
    s0: f64,
    which: usize,
) -> Result<f64, VerifyError> {
    let n_s = path.at(s0);
    let eig = matkit::eig_hermitian(&n_s)?;
    let vals = &eig.values;
    if which >= vals.len() {
        return Err(VerifyError::InvalidPath(format!("no eigenvalue with index {which}")));
    }
    let below = if which > 0 { vals[which] - vals[which - 1] } else { f64::INFINITY };
    let above = vals.get(which + 1).map_or(f64::INFINITY, |v| v - vals[which]);
    let gap = below.min(above);
    if gap <= 1e-6 * n_s.norm() {
        return Err(VerifyError::DegenerateEigenvalue { index: which, gap });
    }
    let phi = eig.vectors.column(which).clone_owned();
    let d = path.derivative_at(s0);
    Ok(phi.dotc(&(d.as_matrix() * &phi)).re)
}

/// A randomized embedded-eigenvalue scenario: a lattice channel plus a point
/// mass sitting exactly at `lambda`, so the unperturbed limit fails there.
#[derive(Debug, Clone)]
pub struct EmbeddedScenario {
    pub seed: u64,
    pub lambda: f64,
    pub model: RiggedModel,
    /// Hermitian direction with nonzero coupling between the two channels.
    pub j: Direction,
    /// Positive semidefinite direction and a dominating one, for the
    /// monotonicity check.
    pub j_psd: Direction,
    pub j_tilde: Direction,
}

fn random_complex(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> Complex64 {
    let radius = rng.random_range(lo..hi);
    let phase = rng.random_range(0.0..std::f64::consts::TAU);
    Complex64::from_polar(radius, phase)
}

fn random_gram(rng: &mut ChaCha8Rng, k: usize, cols: usize) -> Hermitian {
    let b = CMat::from_fn(k, cols, |_, _| random_complex(rng, 0.2, 1.5));
    Hermitian::new(&b * b.adjoint()).expect("Gram matrices are Hermitian")
}

impl EmbeddedScenario {
    pub fn generate(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let lambda = rng.random_range(-1.9..1.9);

        let n_sites = rng.random_range(1..=3usize);
        let mut sites: Vec<i64> = Vec::new();
        while sites.len() < n_sites {
            let s = rng.random_range(-2..=2i64);
            if !sites.contains(&s) {
                sites.push(s);
            }
        }
        sites.sort_unstable();
        let channel = LatticeChannel {
            sites: sites
                .iter()
                .map(|&s| (s, random_complex(&mut rng, 0.5, 1.5)))
                .collect(),
        };
        let lattice = RiggedModel::new(OperatorModel::FreeLattice1D, Rigging::Lattice(vec![channel]))
            .expect("nonzero lattice channel");
        let amplitude = Complex64::new(rng.random_range(0.5..2.0), 0.0);
        let model = lattice.direct_sum(&RiggedModel::point_mass(lambda, amplitude));

        let d0 = rng.random_range(-2.0..2.0);
        let d1 = rng.random_range(-2.0..2.0);
        let off = random_complex(&mut rng, 0.1, 2.0);
        let j = Hermitian::new(matkit::complex_matrix(
            2,
            2,
            &[Complex64::new(d0, 0.0), off, off.conj(), Complex64::new(d1, 0.0)],
        ))
        .expect("Hermitian by construction");

        let rank = rng.random_range(1..=2usize);
        let j_psd = random_gram(&mut rng, 2, rank);
        let extra_rank = rng.random_range(1..=2usize);
        let j_tilde = j_psd.add(&random_gram(&mut rng, 2, extra_rank));

        Self {
            seed,
            lambda,
            model,
            j: Direction::new(j),
            j_psd: Direction::new(j_psd),
            j_tilde: Direction::new(j_tilde),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Claim {
    IdentityDirection,
    AbsDirection,
    MonotoneDirection,
}

impl Claim {
    pub fn name(&self) -> &'static str {
        match self {
            Claim::IdentityDirection => "identity_direction",
            Claim::AbsDirection => "abs_direction",
            Claim::MonotoneDirection => "monotone_direction",
        }
    }

    pub fn run(
        &self,
        sc: &EmbeddedScenario,
        cfg: &RegularityConfig,
    ) -> Result<TheoremCertificate, VerifyError> {
        match self {
            Claim::IdentityDirection => verify_identity_direction(&sc.model, sc.lambda, &sc.j, cfg),
            Claim::AbsDirection => verify_abs_direction(&sc.model, sc.lambda, &sc.j, cfg),
            Claim::MonotoneDirection => {
                verify_monotone_direction(&sc.model, sc.lambda, &sc.j_psd, &sc.j_tilde, cfg)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub index: usize,
    pub seed: u64,
    pub lambda: f64,
    pub premise_established: bool,
    pub pass: bool,
    pub premise_witness: Option<f64>,
    pub conclusion_witness: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub claim: Claim,
    pub master_seed: u64,
    pub count: usize,
    pub established: usize,
    pub passed_established: usize,
    pub failures: Vec<usize>,
    pub rows: Vec<SweepRow>,
}

impl SweepSummary {
    /// Every established premise led to a regular conclusion.
    pub fn all_pass(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Runs `claim` on scenarios `master_seed + i` for `i < count`. Scenarios are
/// independent, so the sweep runs in parallel; rows come back in index order.
pub fn sweep(claim: Claim, master_seed: u64, count: usize, cfg: &RegularityConfig) -> SweepSummary {
    let rows: Vec<SweepRow> = (0..count)
        .into_par_iter()
        .map(|index| {
            let seed = master_seed.wrapping_add(index as u64);
            let sc = EmbeddedScenario::generate(seed);
            match claim.run(&sc, cfg) {
                Ok(cert) => SweepRow {
                    index,
                    seed,
                    lambda: sc.lambda,
                    premise_established: !cert.vacuous,
                    pass: cert.pass,
                    premise_witness: cert.premise.witness_coupling(),
                    conclusion_witness: cert.conclusion.as_ref().and_then(Evidence::witness_coupling),
                    error: None,
                },
                Err(e) => SweepRow {
                    index,
                    seed,
                    lambda: sc.lambda,
                    premise_established: false,
                    pass: false,
                    premise_witness: None,
                    conclusion_witness: None,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();
    let established = rows.iter().filter(|r| r.premise_established).count();
    let passed_established = rows.iter().filter(|r| r.premise_established && r.pass).count();
    let failures = rows
        .iter()
        .filter(|r| !r.pass || r.error.is_some())
        .map(|r| r.index)
        .collect();
    SweepSummary {
        claim,
        master_seed,
        count,
        established,
        passed_established,
        failures,
        rows,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matkit::{c, complex_matrix, max_abs, real_matrix};

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
    fn null_vector_examples() {
        let tol = Tolerances::default();
        let cert = null_vector_certificate(&real_matrix(1, 1, &[-1.0]), &tol).unwrap();
        assert_eq!(cert.residual, 0.0);
        assert!((cert.vector[0].norm() - 1.0).abs() < 1e-15);

        let cert = null_vector_certificate(&real_matrix(2, 2, &[-1.0, 0.0, 0.0, 5.0]), &tol).unwrap();
        assert!((cert.vector[0].norm() - 1.0).abs() < 1e-15);
        assert!(cert.vector[1].norm() < 1e-15);

        let s5 = 5f64.sqrt();
        let m = real_matrix(1, 1, &[s5 * (-1.0 / s5) * 1.0]);
        let cert = null_vector_certificate(&m, &tol).unwrap();
        assert!(cert.residual <= 1e-10);

        assert!(matches!(
            null_vector_certificate(&real_matrix(1, 1, &[0.5]), &tol),
            Err(VerifyError::NotSingular { .. })
        ));
    }

    #[test]
    fn identity_direction_examples() {
        let cfg = RegularityConfig::default();
        let cert = verify_identity_direction(&embedded(), 0.0, &swap(), &cfg).unwrap();
        assert!(cert.pass && !cert.vacuous);
        let (t, lim) = cert.conclusion_limit().unwrap();
        assert_eq!(t, 1.0);
        let expect = complex_matrix(2, 2, &[c(0.2, 0.4), c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]);
        assert!(max_abs(&(lim - expect)) < 1e-6);

        let lat = RiggedModel::lattice_deltas(&[0]);
        let cert = verify_identity_direction(&lat, 0.0, &Direction::new(herm(1, &[5.0])), &cfg).unwrap();
        assert!(cert.pass && !cert.vacuous);
        assert_eq!(cert.premise.witness_coupling(), Some(0.0));

        let cert = verify_identity_direction(&embedded(), 0.0, &Direction::zeros(2), &cfg).unwrap();
        assert!(cert.pass && cert.vacuous);
        assert!(cert.conclusion.is_none());
    }

    #[test]
    fn abs_direction_examples() {
        let cfg = RegularityConfig::default();
        let cert = verify_abs_direction(&embedded(), 0.0, &swap(), &cfg).unwrap();
        assert!(cert.pass && !cert.vacuous);
        let dir = &cert.conclusion.as_ref().unwrap().direction;
        assert!(max_abs(&(dir.matrix() - CMat::identity(2, 2))) < 1e-14);

        let idem = Direction::new(Hermitian::from_real_diagonal(&[0.0, 1.0]));
        let cert = verify_abs_direction(&embedded(), 0.0, &idem, &cfg).unwrap();
        assert!(cert.pass);
        assert_eq!(cert.premise.direction, cert.conclusion.as_ref().unwrap().direction);

        let lat = RiggedModel::lattice_deltas(&[0]);
        let cert = verify_abs_direction(&lat, 0.0, &Direction::new(herm(1, &[-1.0])), &cfg).unwrap();
        assert!(cert.pass && !cert.vacuous);
    }

    #[test]
    fn monotone_examples() {
        let cfg = RegularityConfig::default();
        let lat = RiggedModel::lattice_deltas(&[0]);
        let one = Direction::new(herm(1, &[1.0]));
        let cert = verify_monotone_direction(&lat, 0.0, &one, &Direction::new(herm(1, &[3.0])), &cfg).unwrap();
        assert!(cert.pass && !cert.vacuous);

        let cert = verify_monotone_direction(
            &embedded(),
            0.0,
            &Direction::identity(2),
            &Direction::new(Hermitian::identity(2).scale(2.0)),
            &cfg,
        )
        .unwrap();
        assert!(cert.pass && !cert.vacuous);

        assert!(matches!(
            verify_monotone_direction(&lat, 0.0, &one, &Direction::new(herm(1, &[0.5])), &cfg),
            Err(VerifyError::InvalidPremise(_))
        ));
        assert!(matches!(
            verify_monotone_direction(&lat, 0.0, &Direction::new(herm(1, &[-1.0])), &one, &cfg),
            Err(VerifyError::InvalidPremise(_))
        ));
    }

    #[test]
    fn proof_chain_outside_band() {
        let s5 = 5f64.sqrt();
        let t = real_matrix(1, 1, &[-1.0 / s5]);
        let chain = proof_chain_check(&t, &Direction::identity(1), s5, 2.0, &Tolerances::default()).unwrap();
        match chain {
            ProofChain::Checked(steps) => {
                assert_eq!(steps.im_annihilation, 0.0);
                assert!(steps.real_part_residual <= 1e-10);
                assert!(steps.eigen_residual <= 1e-10);
                assert!((steps.inverse_form - 1.0).abs() < 1e-12);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn proof_chain_positive_imaginary_part_is_vacuous() {
        let t = complex_matrix(1, 1, &[c(0.0, 0.5)]);
        assert!(matches!(
            proof_chain_check(&t, &Direction::identity(1), 1.0, 2.0, &Tolerances::default()).unwrap(),
            ProofChain::VacuouslyConsistent { .. }
        ));
    }

    #[test]
    fn proof_chain_preconditions() {
        let t = complex_matrix(2, 2, &[c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 2.0)]);
        // 1 - T (2 - I) = 1 - T has determinant -2i
        assert!(matches!(
            proof_chain_check(&t, &Direction::identity(2), -1.0, 2.0, &Tolerances::default()),
            Err(VerifyError::NotSingular { .. })
        ));
        assert!(matches!(
            proof_chain_check(&t, &Direction::identity(2), -1.0, 1.0, &Tolerances::default()),
            Err(VerifyError::SBelowNorm { .. })
        ));
    }

    #[test]
    fn proof_chain_mixed_channels() {
        // lattice channel (Im > 0) next to a real channel; J diagonal
        let t = complex_matrix(2, 2, &[c(0.1, 0.5), c(0.0, 0.0), c(0.0, 0.0), c(-0.8, 0.0)]);
        let j = Direction::new(Hermitian::from_real_diagonal(&[0.5, -1.0]));
        let s = 2.0;
        let r = -1.0 / (-0.8 * (s + 1.0));
        match proof_chain_check(&t, &j, r, s, &Tolerances::default()).unwrap() {
            ProofChain::Checked(steps) => {
                assert!(steps.eigen_residual < 1e-12);
                assert!(steps.im_annihilation < 1e-12);
                assert!(steps.real_part_residual < 1e-12);
                assert!((steps.inverse_form - 1.0 / 3.0).abs() < 1e-12);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn hellmann_feynman_examples() {
        let a0 = Hermitian::zeros(2);
        let path = AnalyticPath::new(vec![a0.clone(), Hermitian::from_real_diagonal(&[1.0, -1.0])]).unwrap();
        assert!((hellmann_feynman_derivative(&path, 1.0, 1).unwrap() - 1.0).abs() < 1e-14);

        let path = AnalyticPath::new(vec![a0, herm(2, &[0.0, 1.0, 1.0, 0.0])]).unwrap();
        assert!((hellmann_feynman_derivative(&path, 1.0, 1).unwrap() - 1.0).abs() < 1e-14);
        assert!(matches!(
            hellmann_feynman_derivative(&path, 0.0, 1),
            Err(VerifyError::DegenerateEigenvalue { .. })
        ));
        assert!(AnalyticPath::new(vec![]).is_err());
        assert!(AnalyticPath::new(vec![Hermitian::identity(1), Hermitian::identity(2)]).is_err());
    }

    #[test]
    fn path_evaluation() {
        let path = AnalyticPath::new(vec![
            herm(1, &[1.0]),
            herm(1, &[2.0]),
            herm(1, &[3.0]),
        ])
        .unwrap();
        assert!((path.at(2.0).as_matrix()[(0, 0)].re - 17.0).abs() < 1e-14);
        assert!((path.derivative_at(2.0).as_matrix()[(0, 0)].re - 14.0).abs() < 1e-14);
    }

    #[test]
    fn generator_is_deterministic() {
        let a = EmbeddedScenario::generate(7);
        let b = EmbeddedScenario::generate(7);
        assert_eq!(a.lambda, b.lambda);
        assert_eq!(a.model, b.model);
        assert_eq!(a.j, b.j);
        assert!(a.j.matrix()[(0, 1)].norm() >= 0.1);
        assert!(a.j_psd.hermitian().is_psd(1e-10));
        assert!(a.j_tilde.hermitian().sub(a.j_psd.hermitian()).is_psd(1e-10));
        assert!(a.model.boundary_exact(a.lambda).is_none());
    }
}
