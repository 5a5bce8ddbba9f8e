use num_complex::Complex64;
use proptest::prelude::*;

use regdir_core::matkit::{self, CMat, Hermitian};
use regdir_core::models::{HalfPlanePoint, OperatorModel, RiggedModel, Rigging};
use regdir_core::perturb::{self, CoupledOperator, Direction};

fn cmat(k: usize, cols: usize, data: &[(f64, f64)]) -> CMat {
    CMat::from_fn(k, cols, |i, j| {
        let (re, im) = data[i * cols + j];
        Complex64::new(re, im)
    })
}

fn entries(len: usize) -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), len)
}

fn hermitian(n: usize) -> impl Strategy<Value = Hermitian> {
    entries(n * n).prop_map(move |d| {
        let a = cmat(n, n, &d);
        Hermitian::new((&a + a.adjoint()).unscale(2.0)).unwrap()
    })
}

fn gram(n: usize) -> impl Strategy<Value = Hermitian> {
    entries(n * n).prop_map(move |d| {
        let a = cmat(n, n, &d);
        Hermitian::new(&a * a.adjoint()).unwrap()
    })
}

/// Finite model of size `n` with `k` channels.
fn finite_model(n: usize, k: usize) -> impl Strategy<Value = RiggedModel> {
    (hermitian(n), entries(k * n)).prop_map(move |(h, f)| {
        let f = cmat(k, n, &f) + CMat::from_fn(k, n, |i, j| if i == j { Complex64::ONE } else { Complex64::ZERO });
        RiggedModel::new(OperatorModel::finite(h.scale(3.0)), Rigging::Matrix(f)).unwrap()
    })
}

fn upper_point() -> impl Strategy<Value = HalfPlanePoint> {
    (-3.0..3.0f64, 0.05..2.0f64).prop_map(|(l, y)| HalfPlanePoint::new(l, y).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn solve_residual(d in entries(16), b in entries(8)) {
        let m = cmat(4, 4, &d) + CMat::identity(4, 4).scale(5.0);
        let b = cmat(4, 2, &b);
        let x = matkit::solve_linear(&m, &b).unwrap();
        prop_assert!(matkit::max_abs(&(&m * &x - &b)) < 1e-12);
    }

    #[test]
    fn psd_sqrt_squares_back(a in gram(4)) {
        let s = matkit::psd_sqrt(&a).unwrap();
        prop_assert!(s.is_psd(1e-10));
        let back = s.as_matrix() * s.as_matrix();
        prop_assert!(matkit::max_abs(&(back - a.as_matrix())) < 1e-10 * (1.0 + a.norm()));
    }

    #[test]
    fn abs_squares_to_square(j in hermitian(4)) {
        let a = matkit::abs_hermitian(&j).unwrap();
        prop_assert!(a.is_psd(1e-10));
        let lhs = a.as_matrix() * a.as_matrix();
        let rhs = j.as_matrix() * j.as_matrix();
        prop_assert!(matkit::max_abs(&(lhs - rhs)) < 1e-10);
    }

    #[test]
    fn eigenvalues_invariant_under_transpose(d in entries(9)) {
        let m = cmat(3, 3, &d);
        let a = matkit::eig_general(&m).unwrap();
        let b = matkit::eig_general(&m.transpose()).unwrap();
        for x in &a {
            let best = b.iter().map(|y| (x - y).norm()).fold(f64::INFINITY, f64::min);
            prop_assert!(best < 1e-8);
        }
    }

    #[test]
    fn hermitian_eigen_reconstructs(h in hermitian(5)) {
        let e = matkit::eig_hermitian(&h).unwrap();
        prop_assert!(e.values.windows(2).all(|w| w[0] <= w[1]));
        let back = e.reconstruct_with(|x| x);
        prop_assert!(matkit::max_abs(&(back - h.as_matrix())) < 1e-12);
    }

    #[test]
    fn herglotz(model in finite_model(5, 2), p in upper_point()) {
        let t = model.sandwiched_resolvent(p).unwrap();
        prop_assert!(t.im_min_eigenvalue() >= -1e-12 * (1.0 + t.norm()));
    }

    #[test]
    fn full_rank_rigging_gives_strictly_positive_imaginary_part(
        model in finite_model(4, 2),
        p in upper_point(),
    ) {
        let (_, f) = model.as_finite().unwrap();
        prop_assume!(matkit::smallest_singular(&f.adjoint()) > 0.1);
        let t = model.sandwiched_resolvent(p).unwrap();
        prop_assert!(t.im_min_eigenvalue() > 0.0);
    }

    #[test]
    fn conjugate_symmetry(model in finite_model(5, 2), p in upper_point()) {
        let up = model.resolvent_at(p.z()).unwrap();
        let down = model.resolvent_at(p.z().conj()).unwrap();
        prop_assert!(matkit::max_abs(&(down - up.adjoint())) < 1e-12 * (1.0 + up.norm()));
    }

    #[test]
    fn resolvent_identity_matches_direct_assembly(
        model in finite_model(5, 2),
        j in hermitian(2),
        r in -2.0..2.0f64,
        p in upper_point(),
    ) {
        let op = CoupledOperator::new(model.clone(), Direction::new(j.clone()), r).unwrap();
        let via_identity = perturb::coupled_t(&op, p).unwrap().value;
        let direct = op.assemble_finite().unwrap().resolvent_at(p.z()).unwrap();
        prop_assert!(matkit::max_abs(&(&via_identity - &direct)) < 1e-9 * (1.0 + direct.norm()));

        // both orderings of the identity
        let t = model.resolvent_at(p.z()).unwrap();
        let a = j.scale(r);
        let k = t.nrows();
        let right = &t * matkit::solve_linear(&(CMat::identity(k, k) + a.as_matrix() * &t), &CMat::identity(k, k)).unwrap();
        prop_assert!(matkit::max_abs(&(&via_identity - right)) < 1e-9 * (1.0 + direct.norm()));
    }

    #[test]
    fn composition_is_one_step(
        model in finite_model(4, 2),
        j1 in hermitian(2),
        j2 in hermitian(2),
        r1 in -1.0..1.0f64,
        r2 in -1.0..1.0f64,
        p in upper_point(),
    ) {
        let first = CoupledOperator::new(model.clone(), Direction::new(j1.clone()), r1).unwrap();
        let both = first.compose(&Direction::new(j2.clone()), r2).unwrap();
        let t0 = model.sandwiched_resolvent(p).unwrap();
        let t1 = perturb::perturbed_resolvent(&t0, &j1.scale(r1)).unwrap();
        let t2 = perturb::perturbed_resolvent(&t1, &j2.scale(r2)).unwrap();
        let one = perturb::coupled_t(&both, p).unwrap();
        prop_assert!(matkit::max_abs(&(t2.value - &one.value)) < 1e-9 * (1.0 + one.norm()));
    }

    #[test]
    fn flow_is_additive(h in hermitian(6), v in hermitian(6), lambda in -0.9..0.9f64) {
        let h = h.scale(2.0);
        let (a, b, c) = (-1.3, 0.37, 1.9);
        let ab = perturb::spectral_flow_finite(&h, &v, lambda, a, b);
        let bc = perturb::spectral_flow_finite(&h, &v, lambda, b, c);
        let ac = perturb::spectral_flow_finite(&h, &v, lambda, a, c);
        if let (Ok(ab), Ok(bc), Ok(ac)) = (ab, bc, ac) {
            prop_assert_eq!(ab + bc, ac);
        }
    }

    #[test]
    fn flow_of_positive_rank_one_is_zero_or_one(
        h in hermitian(6),
        v in entries(6),
        lambda in -0.9..0.9f64,
        r in 0.1..5.0f64,
    ) {
        let v = cmat(6, 1, &v);
        let vv = Hermitian::new(&v * v.adjoint()).unwrap();
        // eigenvalues only move up, and a rank-one step moves at most one across
        if let Ok(flow) = perturb::spectral_flow_finite(&h, &vv, lambda, 0.0, r) {
            prop_assert!(flow == 0 || flow == 1, "flow = {}", flow);
        }
    }

    #[test]
    fn flow_counts_crossings_of_diagonal_path(
        d0 in prop::collection::vec(-3.0..3.0f64, 5),
        slopes in prop::collection::vec(-2.0..2.0f64, 5),
        lambda in -1.0..1.0f64,
        r in -2.0..2.0f64,
    ) {
        // for diagonal paths each eigenvalue is a line, so crossings are explicit
        let h = Hermitian::from_real_diagonal(&d0);
        let v = Hermitian::from_real_diagonal(&slopes);
        let mut brute = 0i64;
        for (d, s) in d0.iter().zip(&slopes) {
            let below_from = *d < lambda;
            let below_to = d + r * s < lambda;
            brute += below_from as i64 - below_to as i64;
        }
        if let Ok(flow) = perturb::spectral_flow_finite(&h, &v, lambda, 0.0, r) {
            prop_assert_eq!(flow, brute);
        }
    }
}
