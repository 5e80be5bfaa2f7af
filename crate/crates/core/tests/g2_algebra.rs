use cone_forge::exterior::{Form, Mat7};
use cone_forge::g2::*;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn psi0_expected() -> FourForm7 {
    // ⋆φ₀ for the flat metric, written out by hand from e^{ijk} ∧ ⋆e^{ijk} = e^{1…7}
    let terms: [([usize; 4], f64); 7] = [
        ([4, 5, 6, 7], 1.0),
        ([2, 3, 6, 7], 1.0),
        ([2, 3, 4, 5], 1.0),
        ([1, 3, 5, 7], 1.0),
        ([1, 3, 4, 6], -1.0),
        ([1, 2, 5, 6], -1.0),
        ([1, 2, 4, 7], -1.0),
    ];
    let mut f = Form::zero(4);
    for (idx, s) in terms {
        f = f.add(&Form::basis_element(&idx).scale(s));
    }
    FourForm7::from_form(&f)
}

#[test]
fn phi0_induces_flat_metric() {
    let m = induced_metric(&phi0()).unwrap();
    assert!((m.g - Mat7::identity()).amax() < 1e-14);
    assert!((m.vol - 1.0).abs() < 1e-14);
}

#[test]
fn theta_of_phi0_is_standard_four_form() {
    let t = theta(&phi0()).unwrap();
    assert!(t.sub(&psi0_expected()).norm() < 1e-14);
}

#[test]
fn phi_wedge_star_phi_is_seven_volumes() {
    let p = phi0().to_form();
    let s = theta(&phi0()).unwrap().to_form();
    assert!((p.wedge(&s).top_coeff() - 7.0).abs() < 1e-14);
}

#[test]
fn star_is_involution_in_odd_dimension() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let phi = phi0().add(&random_unit_form(&mut rng).scale(0.2));
    let m = induced_metric(&phi).unwrap();
    for k in 0..=7 {
        let mut f = Form::zero(k);
        for (i, c) in f.coeffs.iter_mut().enumerate() {
            *c = (i as f64 * 0.37).sin();
        }
        let back = hodge_star(&m, &hodge_star(&m, &f).unwrap()).unwrap();
        assert!(back.sub(&f).euclidean_norm() < 1e-12, "degree {k}");
    }
}

#[test]
fn decomposition_ranks_are_1_7_27() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for phi in [phi0(), phi0().add(&random_unit_form(&mut rng).scale(0.3))] {
        let [p1, p7, p27] = Projector::new(&phi).unwrap().matrices().unwrap();
        assert_eq!(rank(&p1, 1e-8), 1);
        assert_eq!(rank(&p7, 1e-8), 7);
        assert_eq!(rank(&p27, 1e-8), 27);
        // projections are idempotent and mutually annihilating
        for p in [&p1, &p7, &p27] {
            assert!((p * p - p).amax() < 1e-10);
        }
        assert!((&p1 * &p7).amax() < 1e-10);
        assert!((&p7 * &p27).amax() < 1e-10);
    }
}

#[test]
fn flat_split_form_is_rejected() {
    // φ₀ with an odd number of sign flips on the terms through e¹ gives a split form
    let mut split = phi0();
    let idx = cone_forge::exterior::position(0b0000111);
    split.0[idx] = -1.0;
    assert!(matches!(induced_metric(&split), Err(G2Error::DegenerateForm { .. })));
    assert!(matches!(induced_metric(&ThreeForm7::zero()), Err(G2Error::DegenerateForm { .. })));
    let e123 = ThreeForm7::from_form(&Form::basis_element(&[1, 2, 3]));
    assert!(matches!(theta(&e123), Err(G2Error::DegenerateForm { .. })));
}

#[test]
fn theta_is_homogeneous_of_degree_four_thirds() {
    let t = theta(&phi0().scale(2.0)).unwrap();
    let expect = theta(&phi0()).unwrap().scale(2f64.powf(4.0 / 3.0));
    assert!(t.sub(&expect).norm() < 1e-12);
}

#[test]
fn linearization_matches_on_isotypic_pieces() {
    // γ = φ₀ lies in Ω³₁; Θ(cφ₀) = c^{4/3}Θ(φ₀) gives derivative (4/3)⋆φ₀
    let r = linearization_residual(&phi0(), DEFAULT_STEP).unwrap();
    assert!(r <= 1e-6, "residual {r}");
}

#[test]
fn convention_with_factor_on_star_pi1_wins() {
    let (starred, dropped) = convention_residuals(&phi0(), DEFAULT_STEP).unwrap();
    assert!(starred < 1e-6);
    assert!(dropped > 0.1);
}

#[test]
fn g2_algebra_is_fourteen_dimensional_and_fixes_phi0() {
    let basis = g2_algebra_basis();
    assert_eq!(basis.len(), 14);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let a = random_g2_rotation(&mut rng, 0.7);
    assert!((a.transpose() * a - Mat7::identity()).amax() < 1e-12);
    assert!((a.determinant() - 1.0).abs() < 1e-12);
    assert!(phi0().pullback(&a).sub(&phi0()).norm() < 1e-12);
}

#[test]
fn json_round_trip() {
    let p = phi0();
    let s = serde_json::to_string(&p).unwrap();
    let back: ThreeForm7 = serde_json::from_str(&s).unwrap();
    assert_eq!(back, p);
    assert!(serde_json::from_str::<ThreeForm7>("[1.0, 2.0]").is_err());
}

fn mat_strategy(eps: f64) -> impl Strategy<Value = Mat7> {
    proptest::collection::vec(-eps..eps, 49).prop_map(|v| Mat7::identity() + Mat7::from_column_slice(&v))
}

fn form_strategy(eps: f64) -> impl Strategy<Value = ThreeForm7> {
    proptest::collection::vec(-eps..eps, 35).prop_map(|v| {
        let mut c = [0.0; 35];
        c.copy_from_slice(&v);
        phi0().add(&ThreeForm7(c))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn theta_is_gl_plus_natural(a in mat_strategy(0.2), phi in form_strategy(0.2)) {
        prop_assume!(a.determinant() > 0.1);
        let lhs = theta(&phi.pullback(&a)).unwrap();
        let rhs = theta(&phi).unwrap().pullback(&a);
        prop_assert!(lhs.sub(&rhs).norm() < 1e-10 * (1.0 + rhs.norm()));
    }

    #[test]
    fn projections_sum_to_identity(phi in form_strategy(0.25), g in form_strategy(1.0)) {
        let d = project_3form(&phi, &g).unwrap();
        prop_assert!(d.pi1.add(&d.pi7).add(&d.pi27).sub(&g).norm() < 1e-11);
    }

    #[test]
    fn linearization_residual_bound(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = random_unit_form(&mut rng);
        prop_assert!(linearization_residual(&g, DEFAULT_STEP).unwrap() <= 1e-6);
    }

    #[test]
    fn g2_rotations_commute_with_theta(seed in any::<u64>(), eps in form_strategy(0.2)) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_g2_rotation(&mut rng, 1.0);
        let lhs = theta(&eps.pullback(&a)).unwrap();
        let rhs = theta(&eps).unwrap().pullback(&a);
        prop_assert!(lhs.sub(&rhs).norm() < 1e-10);
    }
}

#[test]
fn residual_decays_quadratically() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for _ in 0..4 {
        let g = random_unit_form(&mut rng);
        let order = convergence_order(&g, &[1e-2, 1e-3, 1e-4]).unwrap();
        assert!((order - 2.0).abs() < 0.1, "order {order}");
    }
}
