//! Property tests for the kernel identities and solver contracts, over
//! randomized in-domain inputs.

use backlund::classical::{flow_exact, flow_rk4};
use backlund::verify::{ks_statistic, ks_two_sample};
use backlund::{PhasePoint, QuadratureSpec, SystemKind, SystemSpec};
use proptest::prelude::*;

fn arb_spec() -> impl Strategy<Value = SystemSpec> {
    prop_oneof![
        Just(SystemSpec::toda()),
        Just(SystemSpec::rational_cm()),
        (0.5f64..2.0, 1.0f64..3.0).prop_map(|(e, m)| SystemSpec::hyperbolic_i(e, m).unwrap()),
        (0.5f64..2.0, 0.6f64..3.0).prop_map(|(e, m)| SystemSpec::hyperbolic_ii(e, m).unwrap()),
    ]
}

fn in_domain_point(spec: SystemSpec, xr: f64, ur: f64) -> PhasePoint {
    // xr, ur in (0, 1); map into a comfortably interior box
    let x = match spec.kind() {
        SystemKind::Toda => -1.0 + 3.0 * xr,
        _ => 0.4 + 2.0 * xr,
    };
    let u = match spec.kind() {
        SystemKind::Toda | SystemKind::HyperbolicII => 3.0 * (2.0 * ur - 1.0),
        _ => 0.8 * x * (2.0 * ur - 1.0),
    };
    PhasePoint::new(x, u)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn closed_form_gradients_match_finite_differences(
        spec in arb_spec(),
        xr in 0.01f64..0.99,
        ur in 0.01f64..0.99,
        lambda in -1.5f64..1.5,
    ) {
        let p = in_domain_point(spec, xr, ur);
        let h = 1e-5;
        let (gx, gu) = spec.grad_log_kernel(lambda, p).unwrap();
        let fd_x = (spec.log_kernel(lambda, PhasePoint::new(p.x + h, p.u)).unwrap()
            - spec.log_kernel(lambda, PhasePoint::new(p.x - h, p.u)).unwrap()) / (2.0 * h);
        let fd_u = (spec.log_kernel(lambda, PhasePoint::new(p.x, p.u + h)).unwrap()
            - spec.log_kernel(lambda, PhasePoint::new(p.x, p.u - h)).unwrap()) / (2.0 * h);
        prop_assert!((gx - fd_x).abs() <= 1e-6, "gx {gx} vs fd {fd_x} at {p:?}");
        prop_assert!((gu - fd_u).abs() <= 1e-6, "gu {gu} vs fd {fd_u} at {p:?}");
    }

    #[test]
    fn first_kernel_identity_is_exact_algebra(
        spec in arb_spec(),
        xr in 0.01f64..0.99,
        ur in 0.01f64..0.99,
    ) {
        let p = in_domain_point(spec, xr, ur);
        let (r_grad, _) = spec.backlund_residuals(p, 1e-4).unwrap();
        prop_assert!(r_grad <= 1e-10, "r_grad {r_grad} at {p:?}");
    }

    #[test]
    fn critical_point_residual_and_oddness(
        spec in arb_spec(),
        lf in -0.95f64..0.95,
        x in 0.2f64..3.0,
    ) {
        let lambda = lf * spec.lambda_cap().unwrap_or(1.5);
        let u = spec.critical_point(lambda, x).unwrap();
        let (_, gu) = spec.grad_log_kernel(lambda, PhasePoint::new(x, u)).unwrap();
        prop_assert!(gu.abs() <= 1e-12, "residual {} at lambda={lambda} x={x}", gu.abs());
        let um = spec.critical_point(-lambda, x).unwrap();
        prop_assert!((u + um).abs() <= 1e-12, "odd: {u} vs {um}");
    }

    #[test]
    fn exact_flow_agrees_with_rk4(
        spec in arb_spec(),
        lf in -0.9f64..0.9,
        x0 in 0.5f64..1.8,
    ) {
        let lambda = lf * spec.lambda_cap().unwrap_or(1.0);
        let traj = flow_rk4(&spec, lambda, x0, 0.5, 1e-3).unwrap();
        let exact = flow_exact(&spec, lambda, x0, 0.5).unwrap();
        let end = traj.endpoint();
        prop_assert!((end.x - exact.x).abs() < 1e-8, "{} vs {}", end.x, exact.x);
    }

    #[test]
    fn ks_statistic_is_symmetric_and_bounded(
        a in prop::collection::vec(-5.0f64..5.0, 30..80),
        b in prop::collection::vec(-5.0f64..5.0, 30..80),
    ) {
        let d_ab = ks_statistic(&a, &b);
        let d_ba = ks_statistic(&b, &a);
        prop_assert_eq!(d_ab, d_ba);
        prop_assert!((0.0..=1.0).contains(&d_ab));
        let r_ab = ks_two_sample(&a, &b, 0.01).unwrap();
        let r_ba = ks_two_sample(&b, &a, 0.01).unwrap();
        prop_assert_eq!(r_ab.statistic, r_ba.statistic);
        prop_assert_eq!(r_ab.p_value, r_ba.p_value);
    }

    #[test]
    fn psi_positive_and_even_in_lambda(
        lf in 0.05f64..0.85,
        x in 0.4f64..2.0,
    ) {
        // lambda-evenness across the three systems with a stated symmetry
        let quad = QuadratureSpec::default();
        for spec in [
            SystemSpec::toda(),
            SystemSpec::rational_cm(),
            SystemSpec::hyperbolic_ii(1.0, 1.0).unwrap(),
        ] {
            let lambda = lf * spec.lambda_cap().unwrap_or(1.0);
            let plus = backlund::eigen::psi(&spec, lambda, x, &quad).unwrap();
            let minus = backlund::eigen::psi(&spec, -lambda, x, &quad).unwrap();
            prop_assert!(plus > 0.0);
            prop_assert!(((plus - minus) / plus).abs() <= 1e-8,
                "{}: {plus} vs {minus}", spec.kind().name());
        }
    }
}
