//! Pointwise identities of the vector fields, checked on random states.

use proptest::prelude::*;
use soliton_forge::forward::{integrate, IntegrationOptions};
use soliton_forge::kahler::lift_to_xyzw;
use soliton_forge::soliton::{
    first_integral_residual, fundamental_matrix, linear_part, make_params, mat_vec, rhs_kahler,
    rhs_nonlin1, FirstIntegralContext, KahlerState, PhaseState, SolitonParams,
};

fn params() -> impl Strategy<Value = SolitonParams> {
    (
        prop::sample::select(vec![2u32, 4, 6]),
        prop::sample::select(vec![-2.0, -1.0, 1.0, 0.5]),
    )
        .prop_map(|(d, q)| make_params(d, q).unwrap())
}

fn shifted(st: &PhaseState, tan: &[f64; 8], h: f64) -> PhaseState {
    let mut a = st.to_array();
    for (x, v) in a.iter_mut().zip(tan) {
        *x += h * v;
    }
    PhaseState::from_array(st.t + h, &a)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn fundamental_matrix_solves_linear_system(
        t in -3.0..3.0f64,
        t0 in -3.0..3.0f64,
        c in prop::array::uniform4(-1.0..1.0f64),
    ) {
        let p = make_params(2, -1.0).unwrap();
        let a = linear_part(&p);
        let h = 1e-5;
        let plus = mat_vec(&fundamental_matrix(&p, t + h, t0), &c);
        let minus = mat_vec(&fundamental_matrix(&p, t - h, t0), &c);
        let exact = mat_vec(&a, &mat_vec(&fundamental_matrix(&p, t, t0), &c));
        for i in 0..4 {
            let fd = (plus[i] - minus[i]) / (2.0 * h);
            prop_assert!((fd - exact[i]).abs() < 1e-6 * exact[i].abs().max(1.0), "{} vs {}", fd, exact[i]);
        }
    }

    /// `R' = 2(dX² + Z²)R`, so `R = 0` is invariant.
    #[test]
    fn first_integral_derivative(
        p in params(),
        x in -0.5..0.5f64, y in 0.05..1.0f64, z in -0.5..1.0f64, w in 0.05..0.5f64,
        l in 0.01..1.0f64, big in 1.0..200.0f64,
    ) {
        let ctx = FirstIntegralContext::new(&p, big, 1.0).unwrap();
        let st = PhaseState { t: 0.0, x, y, z, w, lng: 0.0, s: 0.0, f: 0.0, l };
        let tan = rhs_nonlin1(&p, &st).unwrap().to_array();
        let h = 1e-6;
        let r = |s: &PhaseState| first_integral_residual(&p, s, &ctx);
        let fd = (r(&shifted(&st, &tan, h)) - r(&shifted(&st, &tan, -h))) / (2.0 * h);
        let exact = 2.0 * (p.df() * x * x + z * z) * r(&st);
        prop_assert!((fd - exact).abs() < 1e-6 * exact.abs().max(1.0), "{} vs {}", fd, exact);
    }

    /// The planar flow, lifted, is a solution of the four-dimensional one.
    #[test]
    fn kahler_lift_commutes_with_flow(x in 1e-3..1.0f64, yt in 1e-3..1.0f64) {
        let p = make_params(2, -1.0).unwrap();
        let d2 = p.df() + 2.0;
        let k = KahlerState { t: 0.0, x, yt };
        let lifted = lift_to_xyzw(&p, &[k]).unwrap()[0];
        prop_assert_eq!(lifted.w, 2.0 * x / d2);
        let [dx, dyt] = rhs_kahler(&p, &k);
        // X' must agree; Y = √(XỸ), Z = (d+2)Ỹ - 1, W = 2X/(d+2) by the chain rule.
        let full = rhs_nonlin1(&p, &PhaseState { l: 1.0, ..lifted }).unwrap();
        let dy = 0.5 * (dx * yt + x * dyt) / lifted.y;
        let tol = |v: f64| 1e-12 * v.abs().max(1.0);
        prop_assert!((full.x - dx).abs() < tol(dx), "X' {} vs {}", full.x, dx);
        prop_assert!((full.y - dy).abs() < tol(dy), "Y' {} vs {}", full.y, dy);
        prop_assert!((full.z - d2 * dyt).abs() < tol(dyt), "Z' {} vs {}", full.z, d2 * dyt);
        prop_assert!((full.w - 2.0 * dx / d2).abs() < tol(dx), "W' {} vs {}", full.w, 2.0 * dx / d2);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    /// Y, Z and W keep their signs along the flow: Y' and W' carry their own
    /// variable as a factor and Z' only gains the nonnegative source A₃W².
    #[test]
    fn signs_persist(
        p in params(),
        x in -0.3..0.3f64, y in 0.05..0.5f64, z in 0.05..1.0f64, w in 0.01..0.3f64,
    ) {
        let ctx = FirstIntegralContext::new(&p, 40.0, 1.0).unwrap();
        let start = PhaseState { t: 0.0, x, y, z, w, lng: 0.0, s: 0.0, f: 0.0, l: 0.1 };
        let opts = IntegrationOptions { max_t: 20.0, ..IntegrationOptions::default() };
        let traj = integrate(&p, start, &ctx, &opts).unwrap();
        for s in &traj.samples {
            prop_assert!(s.y > 0.0 && s.z > 0.0 && s.w > 0.0, "sign lost at t = {}: {:?}", s.t, s);
        }
    }
}
