use std::f64::consts::PI;

use lagflow::expander::rescale;
use lagflow::field::SampledField;
use lagflow::flow::{FlowDomain, PotentialState};
use lagflow::geometry::{cone_invariance_check, cone_slope, Booster, BoosterKind};
use lagflow::inequality::{check_max_principle_form, check_sos_identity, CampaignConfig};
use lagflow::spectral::{angle_via_complex_det, eigen_decompose, lagrangian_angle, two_convexity, SymMatrix};
use proptest::prelude::*;

fn sym_matrix() -> impl Strategy<Value = SymMatrix> {
    (1usize..=5).prop_flat_map(|n| {
        prop::collection::vec(-5.0f64..5.0, n * n).prop_map(move |raw| {
            SymMatrix::from_upper(n, |i, j| raw[i * n + j]).unwrap()
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn eigen_decomposition_reconstructs(m in sym_matrix()) {
        let e = eigen_decompose(&m).unwrap();
        prop_assert!(e.reconstruction_residual(&m) <= 1e-12 * (1.0 + m.frobenius()));
        let l = e.spectrum.lambdas();
        prop_assert!(l.windows(2).all(|w| w[0] <= w[1]));
        let trace: f64 = (0..m.n()).map(|i| m.get(i, i)).sum();
        prop_assert!((l.iter().sum::<f64>() - trace).abs() <= 1e-11 * (1.0 + m.frobenius()));
    }

    #[test]
    fn angle_matches_complex_determinant(m in sym_matrix()) {
        let e = eigen_decompose(&m).unwrap();
        let a = lagrangian_angle(&e.spectrum);
        let b = angle_via_complex_det(&m).unwrap();
        prop_assert!((a - b).abs() <= 1e-10 * a.abs().max(1.0));
        prop_assert!(a.abs() < m.n() as f64 * PI / 2.0);
    }

    #[test]
    fn spectral_quantities_stay_in_range(m in sym_matrix()) {
        let s = eigen_decompose(&m).unwrap().spectrum;
        prop_assert!(s.star_omega > 0.0 && s.star_omega <= 1.0);
        prop_assert!(s.det_s_frak.abs() <= 1.0 + 1e-15);
        let c = two_convexity(&s, false);
        prop_assert_eq!(c.is_2convex, s.n() < 2 || (s.min_pair_sum >= 0.0 && s.min_pair_prod >= 0.0));
    }

    #[test]
    fn sum_of_squares_identities(a in -1e3f64..1e3, b in -1e3f64..1e3) {
        let (p, q) = check_sos_identity(a, b);
        prop_assert!(p.is_identity() && q.is_identity());
    }

    #[test]
    fn form_at_c_two_is_a_perfect_square(
        a in prop::collection::vec(-10.0f64..10.0, 3),
        b in prop::collection::vec(-10.0f64..10.0, 3),
    ) {
        let m = check_max_principle_form(&a, &b, 2.0).unwrap();
        let d: f64 = a.iter().zip(&b).map(|(x, y)| (x - y) * (x - y)).sum();
        prop_assert!(m.holds());
        prop_assert!((m.value - 6.0 * d).abs() <= 1e-12 * m.scale);
    }

    #[test]
    fn cone_corner_solves_both_constraints(d1 in 0.01f64..0.99, d2 in 0.01f64..5.0) {
        let c = cone_slope(d1, d2).unwrap();
        prop_assert!(c.x0 < 0.0 && c.y0 > 0.0 && c.tau >= 1.0);
        prop_assert!((c.x0 + c.y0 - d2).abs() <= 1e-12 * (1.0 + d2));
        prop_assert!((1.0 + c.x0 * c.y0 - d1).abs() <= 1e-12);
        prop_assert_eq!(cone_invariance_check(&c, 2000, 7).violations, 0);
    }

    #[test]
    fn outer_booster_ratio_and_domination(
        tau in 1.0f64..6.0,
        k in 2.0f64..20.0,
        r in 1e-3f64..40.0,
    ) {
        let b = Booster::new(BoosterKind::Outer, k, tau, 0.05).unwrap();
        let q = b.fprime(r) / b.f_over_r(r);
        prop_assert!(q >= 1.0 / tau - 1e-9 && q <= tau + 1e-9);
        prop_assert!(b.f(r) <= r * (1.0 + 1e-12));
        prop_assert!(b.value(r) >= 0.0);
    }

    #[test]
    fn inner_booster_is_identity_near_the_origin(tau in 1.0f64..6.0, k in 1.0f64..1e3, s in 0.0f64..1.0) {
        let b = Booster::new(BoosterKind::Inner, k, tau, 0.05).unwrap();
        let r = s / k;
        prop_assert!((b.f(r) - r).abs() <= 1e-12 * (1.0 + r));
        prop_assert!(b.fprime(10.0 / k) <= 1.0);
    }

    #[test]
    fn quadratic_states_have_constant_rhs(d0 in -3.0f64..3.0, d1 in -3.0f64..3.0, off in -1.0f64..1.0) {
        let a0 = SymMatrix::from_rows(&[vec![d0, off], vec![off, d1]]).unwrap();
        let expect = lagrangian_angle(&eigen_decompose(&a0).unwrap().spectrum);
        let d = FlowDomain::periodic(a0, 1.0, 16).unwrap();
        let s = PotentialState::new(d, vec![0.0; 256], 0.0).unwrap();
        prop_assert!(s.rhs().iter().all(|v| (v - expect).abs() <= 1e-14));
    }

    #[test]
    fn quadratic_line_state_is_scale_invariant(a in -2.0f64..2.0, mu in 0.25f64..4.0, t in 0.0f64..2.0) {
        let d = FlowDomain::line(4.0, 64).unwrap();
        let v = (0..d.node_count()).map(|i| {
            let x = d.point(i)[0];
            0.5 * a * x * x + t * a.atan()
        }).collect();
        let s = PotentialState::new(d, v, t).unwrap();
        let r = rescale(&s, mu).unwrap();
        for i in 0..r.domain.node_count() {
            let x = r.domain.point(i)[0];
            let expect = 0.5 * a * x * x + r.t * a.atan();
            prop_assert!((r.values()[i] - expect).abs() <= 1e-12 * (1.0 + expect.abs()));
        }
    }

    #[test]
    fn field_csv_round_trips(
        values in prop::collection::vec(-1e6f64..1e6, 12),
        h in 1e-3f64..1.0,
        lo in -10.0f64..10.0,
    ) {
        let f = SampledField::new(&[lo, -lo], &[3, 4], h, values).unwrap();
        let g = SampledField::from_csv_str(&f.to_csv_string()).unwrap();
        prop_assert_eq!(g.shape(), f.shape());
        for (x, y) in f.values().iter().zip(g.values()) {
            prop_assert_eq!(x.to_bits(), y.to_bits());
        }
    }

    #[test]
    fn csv_reader_never_panics(s in "\\PC{0,200}") {
        let _ = SampledField::from_csv_str(&s);
    }

    #[test]
    fn campaign_config_round_trips(samples in 1usize..1_000_000, seed in any::<u64>(), c in -5.0f64..5.0) {
        let cfg = CampaignConfig { samples, seed, form_c: c, ..Default::default() };
        let back: CampaignConfig = serde_json::from_str(&serde_json::to_string(&cfg).unwrap()).unwrap();
        prop_assert_eq!(back, cfg);
    }
}
