mod common;

use std::collections::BTreeMap;

use cone_forge::spectra::*;
use num_rational::BigRational;
use num_traits::One;
use proptest::prelude::*;

const S5: &str = include_str!("../../../data/spectra/s5.json");
const S2S3: &str = include_str!("../../../data/spectra/s2xs3_partial.json");

fn r(s: &str) -> Real {
    s.parse().unwrap()
}

#[test]
fn s5_multiplicities_match_brute_force() {
    for k in 0..=6u64 {
        assert_eq!(harmonic_polynomial_dim(6, k), common::brute_harmonic_dim(k as usize) as u128, "k = {k}");
    }
    assert_eq!(harmonic_polynomial_dim(6, 2), 20);
}

#[test]
fn shipped_s5_agrees_with_multiplicity_formula() {
    let spec = LinkSpectrum::from_json(S5).unwrap();
    let listed: Vec<(Real, u64)> = spec.modes(0).map(|m| (m.mu.clone(), m.mult)).collect();
    let formula = s5_function_modes(6);
    assert_eq!(listed.len(), formula.len());
    for ((a, ma), (b, mb)) in listed.iter().zip(&formula) {
        assert!(a.eq_tol(b));
        assert_eq!(ma, mb);
    }
}

#[test]
fn s5_function_rates_are_integers() {
    let modes = s5_function_modes(6);
    let w = Window::open(r("-11"), r("7"));
    let out = function_rates(3, &modes, &w).unwrap();
    // μ = k(k+4) gives λ ∈ {k, −k−4}
    let mut got: Vec<(f64, u64)> = out.rates.iter().map(|c| (c.lambda.to_f64(), c.multiplicity)).collect();
    got.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut want = Vec::new();
    for k in 0..=6u64 {
        let m = harmonic_polynomial_dim(6, k) as u64;
        want.push((k as f64, m));
        want.push((-(k as f64) - 4.0, m));
    }
    want.sort_by(|a, b| a.0.total_cmp(&b.0));
    assert_eq!(got, want);
    assert!(out.rates.iter().all(|c| c.lambda.is_exact()));
}

#[test]
fn s5_gap_report() {
    let out = function_rates(3, &s5_function_modes(6), &Window::open(r("-20"), r("20"))).unwrap();
    assert!(out.gaps.negative_gap);
    // k = 1 gives λ = 1, and μ = 5 ≤ 2n − 1
    assert!(!out.gaps.unit_gap);
    assert!(!out.gaps.unit_gap_predicted);
    assert_eq!(out.gaps.offending.len(), 1);
    assert!(out.gaps.offending[0].eq_tol(&r("5")));
}

#[test]
fn gap_threshold_agrees_with_roots() {
    for n in 2..6u32 {
        for mu in ["1/2", "3", "5", "7", "9", "10", "25/2"] {
            let out = function_rates(n, &[(r(mu), 1)], &Window::open(r("-30"), r("30"))).unwrap();
            assert_eq!(out.gaps.unit_gap, out.gaps.unit_gap_predicted, "n = {n}, μ = {mu}");
            assert!(out.gaps.negative_gap);
        }
    }
}

#[test]
fn s5_degree_zero_catalog() {
    let spec = LinkSpectrum::from_json(S5).unwrap();
    let cat = harmonic_rate_catalog(&spec, 0, &Window::open(r("-9/2"), r("7/2"))).unwrap();
    let got: Vec<(f64, String)> = cat.rates.iter().map(|c| (c.lambda.to_f64(), c.gen_type.to_string())).collect();
    let want: Vec<(f64, String)> = [(-4.0, "T7"), (0.0, "T6"), (1.0, "T7"), (2.0, "T7"), (3.0, "T7")]
        .iter()
        .map(|(l, t)| (*l, t.to_string()))
        .collect();
    assert_eq!(got, want);
    assert!(cat.complete);
    let wide = harmonic_rate_catalog(&spec, 0, &Window::open(r("-9/2"), r("15/2"))).unwrap();
    assert!(!wide.complete, "μ up to 86.25 exceeds the bound 77");
}

#[test]
fn one_form_catalog_empty_below_zero() {
    let spec = LinkSpectrum::from_json(S2S3).unwrap();
    let cat = one_form_catalog(&spec, &Window::closed(r("-3"), r("0"))).unwrap();
    assert!(cat.is_empty());
    let up = one_form_catalog(&spec, &Window::closed(r("-3"), r("1"))).unwrap();
    let fams: Vec<String> = up.iter().map(|c| c.gen_type.to_string()).collect();
    assert_eq!(fams, vec!["one_form2", "one_form3"]);
    assert!(up.iter().all(|c| c.lambda.eq_tol(&r("1"))));
}

fn with_mu0(extra: &[&str]) -> LinkSpectrum {
    let mut spec = LinkSpectrum::from_json(S2S3).unwrap();
    for mu in extra {
        spec.coexact_modes.push(Mode { p: 0, mu: r(mu), mult: 1 });
    }
    spec.validate().unwrap();
    spec
}

#[test]
fn paired_catalog_families() {
    let spec = with_mu0(&["29/4", "12"]);
    let cat = paired_catalog(&spec, &Window { lo: r("-2"), hi: r("0"), lo_closed: false, hi_closed: true }).unwrap();
    let mut fam4: Vec<f64> =
        cat.iter().filter(|c| c.gen_type == GenType::Paired(4)).map(|c| c.lambda.to_f64()).collect();
    fam4.sort_by(f64::total_cmp);
    assert_eq!(fam4.len(), 2);
    assert!((fam4[0] - (11.25f64.sqrt() - 4.0)).abs() < 1e-12);
    assert_eq!(fam4[1], 0.0);
    for k in 1..=3 {
        let f: Vec<&CriticalRate> = cat.iter().filter(|c| c.gen_type == GenType::Paired(k)).collect();
        assert_eq!(f.len(), 1);
        assert!(f[0].lambda.is_zero_tol());
    }
    // λ = √(μ+4) − 4 for μ = 29/4 is irrational and carried exactly
    let irr = cat.iter().find(|c| c.lambda.to_f64() < -0.1).unwrap();
    assert!(irr.lambda.is_exact());
    assert!(irr.lambda.as_rational().is_none());
}

#[test]
fn one_form_family_four_and_one() {
    let spec = with_mu0(&["29/4", "12"]);
    let cat = one_form_catalog(&spec, &Window::closed(r("-3"), r("1"))).unwrap();
    let f1: Vec<f64> = cat.iter().filter(|c| c.gen_type == GenType::OneForm(1)).map(|c| c.lambda.to_f64()).collect();
    assert_eq!(f1.len(), 2);
    assert!(f1.iter().any(|l| (l - (11.25f64.sqrt() - 3.0)).abs() < 1e-12));
    assert!(f1.iter().any(|l| *l == 1.0));
    assert_eq!(cat.iter().filter(|c| c.gen_type == GenType::OneForm(4)).count(), 1);
}

#[test]
fn catalogs_reject_bad_inputs() {
    let spec = LinkSpectrum::from_json(S2S3).unwrap();
    assert!(matches!(
        one_form_catalog(&spec, &Window::closed(r("-4"), r("0"))),
        Err(SpectraError::WindowOutOfRange(_))
    ));
    assert!(matches!(
        paired_catalog(&spec, &Window::closed(r("-2"), r("0"))),
        Err(SpectraError::WindowOutOfRange(_))
    ));
    // the λ = 0 families sit on an open upper end
    assert!(matches!(
        paired_catalog(&spec, &Window::open(r("-2"), r("0"))),
        Err(SpectraError::CriticalEndpoint { .. })
    ));
    let mut low = spec.clone();
    low.coexact_modes.push(Mode { p: 0, mu: r("4"), mult: 1 });
    low.constraints.clear();
    assert!(matches!(
        one_form_catalog(&low, &Window::closed(r("-3"), r("0"))),
        Err(SpectraError::ConstraintViolation(_))
    ));
    assert!(matches!(harmonic_rate_catalog(&spec, 7, &Window::open(r("-1"), r("1"))), Err(SpectraError::DegreeOutOfRange(7))));
    assert!(matches!(laplacian_coefficients(7, 0.0), Err(SpectraError::DegreeOutOfRange(7))));
}

#[test]
fn open_endpoint_on_rate_is_rejected() {
    let spec = LinkSpectrum::from_json(S5).unwrap();
    let err = harmonic_rate_catalog(&spec, 0, &Window::open(r("-4"), r("1/2"))).unwrap_err();
    assert!(matches!(err, SpectraError::CriticalEndpoint { .. }));
    let ok = harmonic_rate_catalog(&spec, 0, &Window::closed(r("-4"), r("1/2"))).unwrap();
    assert_eq!(ok.rates.len(), 2);
}

#[test]
fn invalid_spectra_are_rejected() {
    let dual = r#"{"betti":[1,1,0,0,0,1],"coexact_modes":[{"p":0,"mu":"0","mult":1}]}"#;
    assert!(matches!(LinkSpectrum::from_json(dual), Err(SpectraError::ConstraintViolation(_))));
    let harmonic = r#"{"betti":[1,0,0,0,0,1],"coexact_modes":[{"p":0,"mu":"0","mult":1}]}"#;
    assert!(matches!(LinkSpectrum::from_json(harmonic), Err(SpectraError::ConstraintViolation(_))));
    let bound = r#"{"betti":[1,0,0,0,0,1],"coexact_modes":[
        {"p":0,"mu":"0","mult":1},{"p":5,"mu":"0","mult":1},{"p":0,"mu":"3","mult":1}],
        "constraints":[{"p":0,"bound":"5","strict":true,"scope":"nonzero"}]}"#;
    assert!(matches!(LinkSpectrum::from_json(bound), Err(SpectraError::ConstraintViolation(_))));
    let schema = r#"{"betti":[1,0,0,0,0,1],"coexact_modes":[{"p":0,"mu":"0","mult":0}]}"#;
    assert!(matches!(LinkSpectrum::from_json(schema), Err(SpectraError::InvalidSpectrum(_))));
    assert!(matches!(LinkSpectrum::from_json("{"), Err(SpectraError::InvalidSpectrum(_))));
}

#[test]
fn complete_below_forms() {
    let base = r#"{"betti":[1,0,0,0,0,1],"coexact_modes":[{"p":0,"mu":"0","mult":1},{"p":5,"mu":"0","mult":1}],"complete_below":"#;
    let uniform = LinkSpectrum::from_json(&format!("{base}10}}")).unwrap();
    assert_eq!(uniform.complete_below.len(), 6);
    let list = LinkSpectrum::from_json(&format!("{base}[10, null, \"3\"]}}")).unwrap();
    assert_eq!(list.complete_below.keys().copied().collect::<Vec<_>>(), vec![0, 2]);
    let map = LinkSpectrum::from_json(&format!("{base}{{\"4\": 1}}}}")).unwrap();
    assert!(!map.complete_below[&4].is_exact());
}

#[test]
fn spectrum_json_round_trip() {
    let spec = LinkSpectrum::from_json(S2S3).unwrap();
    let text = serde_json::to_string(&spec).unwrap();
    let back = LinkSpectrum::from_json(&text).unwrap();
    assert_eq!(back.coexact_modes.len(), spec.coexact_modes.len());
    assert!(back.coexact_modes.iter().all(|m| m.mu.is_exact()));
    assert!(back.complete_below[&1].eq_tol(&r("8")));
}

#[test]
fn laplacian_coefficients_slots() {
    let c0 = laplacian_coefficients(0, 1.0).unwrap();
    assert_eq!(c0.a1, None);
    assert_eq!(c0.a2, Some(1.0 * 5.0));
    assert_eq!(c0.cross_alpha, None);
    let c6 = laplacian_coefficients(6, 1.0).unwrap();
    assert_eq!(c6.a1, Some(5.0 * 1.0));
    assert_eq!(c6.a2, None);
    let c3 = laplacian_coefficients(3, 0.5).unwrap();
    assert_eq!(c3.a1, Some(1.5 * 3.5));
    assert_eq!(c3.a2, Some(3.5 * 1.5));
    assert_eq!((c3.cross_alpha, c3.cross_beta), (Some(-2.0), Some(-2.0)));
    for p in 0..=6usize {
        let c = laplacian_coefficients(p, -2.0).unwrap();
        let (s1, s2) = normal_form_shifts(p).unwrap();
        if let Some(a1) = c.a1 {
            assert_eq!(a1, -(s1 as f64));
        }
        if let Some(a2) = c.a2 {
            assert_eq!(a2, -(s2 as f64));
        }
    }
}

#[test]
fn hat_eigenvalue_families() {
    let spec = LinkSpectrum::from_json(S2S3).unwrap();
    let hats = hat_eigenvalues(&spec, 2).unwrap();
    // p = 2: family 2 on harmonic 2-forms gives μ̂ = 0 and a log mode at −2
    assert!(hats.iter().any(|h| h.family == 2 && h.mu_hat.is_zero_tol()));
    let rates = hat_route_rates(&spec, 2).unwrap();
    let log = rates.iter().find(|c| c.log_mode).unwrap();
    assert!(log.lambda.eq_tol(&r("-2")));
    assert_eq!(log.dimension(), 2);
    for h in &hats {
        assert!(h.sqrt_mu_hat.square().eq_tol(&h.mu_hat));
    }
}

#[test]
fn index_change_symmetric_end() {
    // single μ = 0 mode on the cylinder: log pair at 0, d_∞(0) = 2
    let end = cylinder_rates(&[(r("0"), 1)], &Window::closed(r("-1"), r("1"))).unwrap();
    assert_eq!(end.len(), 1);
    assert_eq!(end[0].dimension(), 2);
    let d = WeightVector { cone_weights: vec![], end_weight: r("-1/2") };
    let dp = WeightVector { cone_weights: vec![], end_weight: r("1/2") };
    let n = index_change(&[], &end, &d, &dp).unwrap();
    assert_eq!(n, 2);
    assert_eq!(symmetric_index(n), num_rational::Ratio::new(-1, 1));
}

#[test]
fn index_change_errors() {
    let end = cylinder_rates(&[(r("0"), 1), (r("4"), 3)], &Window::closed(r("-5"), r("5"))).unwrap();
    let w = |c: Vec<&str>, e: &str| WeightVector { cone_weights: c.into_iter().map(r).collect(), end_weight: r(e) };
    assert!(matches!(
        index_change(&[], &end, &w(vec![], "1"), &w(vec![], "-1")),
        Err(SpectraError::WeightOrderViolation { .. })
    ));
    assert!(matches!(
        index_change(&[], &end, &w(vec![], "-2"), &w(vec![], "1")),
        Err(SpectraError::CriticalEndpoint { .. })
    ));
    assert_eq!(index_change(&[], &end, &w(vec![], "1/3"), &w(vec![], "1/3")).unwrap(), 0);
    assert_eq!(index_change(&[], &end, &w(vec![], "-3"), &w(vec![], "3")).unwrap(), 2 + 3 + 3);
    let spec = LinkSpectrum::from_json(S5).unwrap();
    let cone = harmonic_rate_catalog(&spec, 0, &Window::closed(r("-3"), r("3/2"))).unwrap().rates;
    let n = index_change(&[cone.clone()], &end, &w(vec!["-1/2"], "-1"), &w(vec!["3/2"], "1")).unwrap();
    // cone: λ = 0, 1 (1 + 6); end: log pair at 0 (2)
    assert_eq!(n, 1 + 6 + 2);
    assert!(matches!(
        index_change(&[cone], &end, &w(vec![], "-1"), &w(vec![], "1")),
        Err(SpectraError::InvalidArgument(_))
    ));
}

#[test]
fn weight_and_window_parsing() {
    let wv = WeightVector::parse("-1/2, 0.25 ; f:1.5").unwrap();
    assert_eq!(wv.cone_weights.len(), 2);
    assert!(wv.cone_weights[1].eq_tol(&r("1/4")));
    assert!(!wv.end_weight.is_exact());
    let w = Window::parse("(-2:0]").unwrap();
    assert!(!w.lo_closed && w.hi_closed);
    let o = Window::parse("-3:1").unwrap();
    assert!(!o.lo_closed && !o.hi_closed);
    assert!(Window::parse("3:1").is_err());
    assert!(Window::parse("nonsense").is_err());
}

#[test]
fn rates_csv_columns() {
    let spec = LinkSpectrum::from_json(S5).unwrap();
    let cat = harmonic_rate_catalog(&spec, 0, &Window::open(r("-9/2"), r("1/2"))).unwrap();
    let csv = rates_csv(&cat.rates);
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "lambda,degree,mult,type,log_mode,lambda_exact");
    assert_eq!(lines.next().unwrap(), "-4,0,1,T7,false,-4");
}

fn multiset(rates: &[CriticalRate]) -> Vec<(f64, u64)> {
    let mut by: Vec<(f64, u64)> = Vec::new();
    let mut sorted: Vec<(f64, u64)> = rates.iter().map(|c| (c.lambda.to_f64(), c.dimension())).collect();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    for (l, d) in sorted {
        match by.last_mut() {
            Some((l0, d0)) if (l - *l0).abs() < 1e-9 => *d0 += d,
            _ => by.push((l, d)),
        }
    }
    by
}

fn spectrum_strategy() -> impl Strategy<Value = (LinkSpectrum, bool)> {
    let mode = (0usize..=5, 0i64..=40, 1i64..=4, 1u64..=3);
    (prop::collection::vec(mode, 0..8), 0u64..=2, 0u64..=2, 0u64..=2, any::<bool>()).prop_map(
        |(raw, h0, h1, h2, exact)| {
            let betti = [h0, h1, h2, h2, h1, h0];
            let mk = |num: i64, den: i64| {
                if exact {
                    Real::rational(BigRational::new(num.into(), den.into()))
                } else {
                    r(&format!("f:{}", num as f64 / den as f64))
                }
            };
            let mut modes = Vec::new();
            for (p, &h) in betti.iter().enumerate() {
                if h > 0 {
                    modes.push(Mode { p, mu: mk(0, 1), mult: h });
                }
            }
            for (p, num, den, mult) in raw {
                if num > 0 {
                    modes.push(Mode { p, mu: mk(num, den), mult });
                }
            }
            (LinkSpectrum::new(betti, modes, vec![], BTreeMap::new()).unwrap(), exact)
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn hat_route_matches_type_route((spec, exact) in spectrum_strategy(), p in 0usize..=6) {
        let t = type_route_rates(&spec, p).unwrap();
        let h = hat_route_rates(&spec, p).unwrap();
        let (mt, mh) = (multiset(&t), multiset(&h));
        prop_assert_eq!(mt.len(), mh.len());
        for ((lt, dt), (lh, dh)) in mt.iter().zip(&mh) {
            prop_assert!((lt - lh).abs() < 1e-9 * lt.abs().max(1.0), "{} vs {}", lt, lh);
            prop_assert_eq!(dt, dh);
        }
        if exact {
            prop_assert!(t.iter().chain(&h).all(|c| c.lambda.is_exact()));
        }
    }

    #[test]
    fn window_counts_are_additive((spec, _) in spectrum_strategy(), p in 0usize..=6,
                                  a in -40i64..0, gap in 1i64..40, split in 0i64..40) {
        // quarter-integer cut points avoid integer and most surd rates
        let q = |n: i64| Real::rational(BigRational::new((4 * n + 1).into(), 4.into()));
        let (lo, hi, mid) = (q(a), q(a + gap), q(a + split.min(gap)));
        let count = |w: Window| harmonic_rate_catalog(&spec, p, &w).map(|c| c.rates.iter().map(|r| r.dimension()).sum::<u64>());
        let whole = count(Window::open(lo.clone(), hi.clone()));
        let left = count(Window { lo: lo.clone(), hi: mid.clone(), lo_closed: false, hi_closed: false });
        let right = count(Window { lo: mid, hi, lo_closed: true, hi_closed: false });
        if let (Ok(w), Ok(l), Ok(r)) = (whole, left, right) {
            prop_assert_eq!(w, l + r);
        }
    }

    #[test]
    fn multiplicity_formula_matches_recursion(k in 0u64..30) {
        // dim P_k(ℝ⁶) = Σ_j H_{k−2j}
        let total: u128 = (0..=k / 2).map(|j| harmonic_polynomial_dim(6, k - 2 * j)).sum();
        let mut binom = BigRational::one();
        for i in 0..5u64 {
            binom = binom * BigRational::from_integer((k + 5 - i).into()) / BigRational::from_integer((i + 1).into());
        }
        prop_assert_eq!(BigRational::from_integer(total.into()), binom);
    }
}
