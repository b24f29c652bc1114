use super::params::SolitonParams;

pub type Vec4 = [f64; 4];
pub type Mat4 = [[f64; 4]; 4];

/// Linearization `A` of the reversed-time system at the origin.
pub fn linear_part(p: &SolitonParams) -> Mat4 {
    let k = p.a2() / p.df();
    [
        [0.0, -k, 0.0, 0.0],
        [0.0, -2.0, 0.0, 0.0],
        [0.0, 0.0, -2.0, 0.0],
        [0.0, 0.0, 0.0, -2.0],
    ]
}

/// Closed-form fundamental matrix `Φ(t, t₀)` of `u' = A·u`.
pub fn fundamental_matrix(p: &SolitonParams, t: f64, t0: f64) -> Mat4 {
    let e = (-2.0 * (t - t0)).exp();
    let k = p.x_over_y2_limit();
    [
        [1.0, k * e - k, 0.0, 0.0],
        [0.0, e, 0.0, 0.0],
        [0.0, 0.0, e, 0.0],
        [0.0, 0.0, 0.0, e],
    ]
}

/// Nonlinear remainder `b(v) = F(v) - A·v` of the reversed-time system.
///
/// Each component is the printed polynomial with its linear term removed, so
/// `b` has only quadratic and cubic terms.
pub fn nonlinearity_b(p: &SolitonParams, v: &Vec4) -> Vec4 {
    let (d, a3) = (p.df(), p.a3());
    let [x, yt, zt, w] = *v;
    [
        -x * (d * x * x + zt * zt - 2.0 * zt) + 2.0 * (a3 / d) * w * w,
        -2.0 * yt * (d * x * x - x + zt * zt - 2.0 * zt),
        -zt * (d * x * x + zt * zt - 3.0 * zt) + d * x * x + a3 * w * w,
        -w * (d * x * x - 2.0 * x + zt * zt - 3.0 * zt),
    ]
}

/// Constants `(K₁, K₂)` with `|b(v)|∞ ≤ K₁|v|∞² + K₂|v|∞³`, read off the
/// monomials of [`nonlinearity_b`].
pub fn b_bound_constants(p: &SolitonParams) -> (f64, f64) {
    let (d, a3) = (p.df(), p.a3());
    let k1 = [2.0 + 2.0 * a3 / d, 6.0, 3.0 + d + a3, 5.0]
        .into_iter()
        .fold(0.0, f64::max);
    let k2 = [d + 1.0, 2.0 * d + 2.0, d + 1.0, d + 1.0]
        .into_iter()
        .fold(0.0, f64::max);
    (k1, k2)
}

pub fn mat_vec(m: &Mat4, v: &Vec4) -> Vec4 {
    let mut out = [0.0; 4];
    for (o, row) in out.iter_mut().zip(m) {
        *o = row.iter().zip(v).map(|(a, b)| a * b).sum();
    }
    out
}

pub fn mat_mul(a: &Mat4, b: &Mat4) -> Mat4 {
    let mut out = [[0.0; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            out[i][j] = (0..4).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::soliton::{make_params, rhs_nonlin2};
    use proptest::prelude::*;

    fn fd_jacobian(f: impl Fn(&Vec4) -> Vec4, at: &Vec4, h: f64) -> Mat4 {
        let mut jac = [[0.0; 4]; 4];
        for j in 0..4 {
            let (mut plus, mut minus) = (*at, *at);
            plus[j] += h;
            minus[j] -= h;
            let (fp, fm) = (f(&plus), f(&minus));
            for i in 0..4 {
                jac[i][j] = (fp[i] - fm[i]) / (2.0 * h);
            }
        }
        jac
    }

    #[test]
    fn jacobian_at_origin_is_a() {
        for (d, q) in [(2, -1.0), (4, -2.0), (6, 0.5)] {
            let p = make_params(d, q).unwrap();
            let jac = fd_jacobian(|v| rhs_nonlin2(&p, v), &[0.0; 4], 1e-6);
            let a = linear_part(&p);
            for i in 0..4 {
                for j in 0..4 {
                    assert!((jac[i][j] - a[i][j]).abs() < 1e-6, "d={d} [{i}][{j}]");
                }
            }
        }
    }

    #[test]
    fn b_has_no_constant_or_linear_part() {
        let p = make_params(2, -1.0).unwrap();
        assert_eq!(nonlinearity_b(&p, &[0.0; 4]), [0.0; 4]);
        let jac = fd_jacobian(|v| nonlinearity_b(&p, v), &[0.0; 4], 1e-6);
        for row in jac {
            for e in row {
                assert!(e.abs() < 1e-6);
            }
        }
        assert_eq!(nonlinearity_b(&p, &[0.0, 1.0, 0.0, 0.0])[1], 0.0);
    }

    #[test]
    fn fundamental_matrix_examples() {
        let p = make_params(2, -1.0).unwrap();
        let id = fundamental_matrix(&p, 0.7, 0.7);
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(id[i][j], if i == j { 1.0 } else { 0.0 });
            }
        }
        let m = fundamental_matrix(&p, 0.0, 0.5 * 2f64.ln());
        assert!((m[0][1] - 2.0).abs() < 1e-14);
        let m = fundamental_matrix(&p, 1.0, 0.0);
        assert!((m[1][1] - 0.135_335_283_236_612_7).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn b_matches_f_minus_av(x in -0.5..0.5f64, yt in -0.5..0.5f64, zt in -0.5..0.5f64, w in -0.5..0.5f64) {
            let p = make_params(2, -2.0).unwrap();
            let v = [x, yt, zt, w];
            let f = rhs_nonlin2(&p, &v);
            let av = mat_vec(&linear_part(&p), &v);
            let b = nonlinearity_b(&p, &v);
            for i in 0..4 {
                prop_assert!((f[i] - av[i] - b[i]).abs() < 1e-13);
            }
        }

        #[test]
        fn b_respects_bound(x in -0.5..0.5f64, yt in -0.5..0.5f64, zt in -0.5..0.5f64, w in -0.5..0.5f64) {
            let p = make_params(4, -1.5).unwrap();
            let v = [x, yt, zt, w];
            let n = v.iter().fold(0.0f64, |m, a| m.max(a.abs()));
            let (k1, k2) = b_bound_constants(&p);
            let b = nonlinearity_b(&p, &v);
            let bn = b.iter().fold(0.0f64, |m, a| m.max(a.abs()));
            prop_assert!(bn <= k1 * n * n + k2 * n * n * n + 1e-15);
        }

        #[test]
        fn semigroup(t in -5.0..5.0f64, r in -5.0..5.0f64, t0 in -5.0..5.0f64) {
            let p = make_params(2, -1.0).unwrap();
            let (a, b) = (fundamental_matrix(&p, t, r), fundamental_matrix(&p, r, t0));
            let lhs = mat_mul(&a, &b);
            let rhs = fundamental_matrix(&p, t, t0);
            for i in 0..4 {
                for j in 0..4 {
                    // rounding in the product is relative to Σ|a_ik||b_kj|
                    let scale: f64 = (0..4).map(|k| (a[i][k] * b[k][j]).abs()).sum::<f64>().max(1.0);
                    prop_assert!((lhs[i][j] - rhs[i][j]).abs() < 1e-12 * scale,
                        "[{}][{}] {} vs {}", i, j, lhs[i][j], rhs[i][j]);
                }
            }
        }

        #[test]
        fn solves_linear_system(t in -2.0..2.0f64, c0 in -1.0..1.0f64, c1 in -1.0..1.0f64,
                                c2 in -1.0..1.0f64, c3 in -1.0..1.0f64) {
            let p = make_params(2, -1.0).unwrap();
            let c = [c0, c1, c2, c3];
            let h = 1e-5;
            let plus = mat_vec(&fundamental_matrix(&p, t + h, 0.3), &c);
            let minus = mat_vec(&fundamental_matrix(&p, t - h, 0.3), &c);
            let here = mat_vec(&fundamental_matrix(&p, t, 0.3), &c);
            let av = mat_vec(&linear_part(&p), &here);
            for i in 0..4 {
                let fd = (plus[i] - minus[i]) / (2.0 * h);
                prop_assert!((fd - av[i]).abs() < 1e-6 * av[i].abs().max(1.0));
            }
        }
    }
}
