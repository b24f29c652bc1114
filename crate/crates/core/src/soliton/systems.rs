use serde::{Deserialize, Serialize};

use super::params::{FirstIntegralContext, SolitonParams};
use super::state::{KahlerState, PhaseState, TildeState};
use crate::error::{Result, SolitonError};

/// Time derivative of the augmented state `(X, Y, Z, W, ln g, s, f, ℒ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseTangent {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub w: f64,
    pub lng: f64,
    pub s: f64,
    pub f: f64,
    pub l: f64,
}

impl PhaseTangent {
    pub fn core(&self) -> [f64; 4] {
        [self.x, self.y, self.z, self.w]
    }

    pub fn to_array(&self) -> [f64; 8] {
        [
            self.x, self.y, self.z, self.w, self.lng, self.s, self.f, self.l,
        ]
    }
}

/// The four polynomials of the `(X, Y, Z, W)` flow.
pub fn rhs_core(p: &SolitonParams, v: &[f64; 4]) -> [f64; 4] {
    let (d, a2, a3) = (p.df(), p.a2(), p.a3());
    let [x, y, z, w] = *v;
    [
        x * (d * x * x + z * z - 1.0) + (a2 / d) * y * y - 2.0 * (a3 / d) * w * w,
        y * (d * x * x + z * z - x),
        z * (d * x * x + z * z - 1.0) + a3 * w * w,
        w * (d * x * x + z * z - 2.0 * x + z),
    ]
}

/// Augmented right-hand side: the core flow plus `(ln g)' = X`, `s' = ℒ`,
/// `f' = g·Z·W/Y` and `ℒ' = ℒ(dX² + Z²)`.
///
/// `f'` is undefined for `Y ≤ 0` unless `W = 0`, in which case it is zero.
pub fn rhs_nonlin1(p: &SolitonParams, st: &PhaseState) -> Result<PhaseTangent> {
    let [x, y, z, w] = rhs_core(p, &st.core());
    let f_t = if st.w == 0.0 {
        0.0
    } else if st.y > 0.0 {
        st.lng.exp() * st.z * st.w / st.y
    } else {
        return Err(SolitonError::DegenerateState {
            t: st.t,
            reason: "Y <= 0 with W != 0 makes df/dt undefined",
        });
    };
    let d = p.df();
    Ok(PhaseTangent {
        x,
        y,
        z,
        w,
        lng: st.x,
        s: st.l,
        f: f_t,
        l: st.l * (d * st.x * st.x + st.z * st.z),
    })
}

/// Reversed-time system in `(X, Ỹ, Z̃, W)`; the origin is stationary.
pub fn rhs_nonlin2(p: &SolitonParams, v: &[f64; 4]) -> [f64; 4] {
    let (d, a2, a3) = (p.df(), p.a2(), p.a3());
    let [x, yt, zt, w] = *v;
    [
        -x * (d * x * x + zt * zt - 2.0 * zt) - (a2 / d) * yt + 2.0 * (a3 / d) * w * w,
        -2.0 * yt * (d * x * x - x + zt * zt - 2.0 * zt + 1.0),
        -zt * (d * x * x + zt * zt - 3.0 * zt + 2.0) + d * x * x + a3 * w * w,
        -w * (d * x * x - 2.0 * x + zt * zt - 3.0 * zt + 2.0),
    ]
}

impl TildeState {
    pub fn tangent(&self, p: &SolitonParams) -> [f64; 4] {
        rhs_nonlin2(p, &self.as_vec())
    }
}

/// Planar Kähler system in `(X, Ỹ)`.
pub fn rhs_kahler(p: &SolitonParams, st: &KahlerState) -> [f64; 2] {
    let d = p.df();
    let (x, yt) = (st.x, st.yt);
    [
        x * (d * x * x + (d + 2.0) * (d + 2.0) * yt * yt - 2.0 * x - (d + 2.0) * yt),
        yt * (d * x * x + (d + 2.0) * (d + 2.0) * yt * yt - 3.0 * (d + 2.0) * yt + 2.0),
    ]
}

/// `dX² + A₂Y² + Z² - A₃W² - 1 + 𝒞ℒ²`, zero on exact solitons.
///
/// Along any solution it evolves as `R' = 2(dX² + Z²)R`, so a nonzero value
/// is carried forward scaled by `ℒ²`.
pub fn first_integral_residual(
    p: &SolitonParams,
    st: &PhaseState,
    ctx: &FirstIntegralContext,
) -> f64 {
    let (d, a2, a3) = (p.df(), p.a2(), p.a3());
    let (x, y, z, w) = (st.x, st.y, st.z, st.w);
    d * x * x + a2 * y * y + z * z - a3 * w * w - 1.0 + ctx.c * st.l * st.l
}

/// Residual of the reduced first integral
/// `-𝒞g²X = A₂X + (d+2)²Ỹ - 2(d+2)`, written with `Ỹ` measured from the
/// equilibrium value `2/(d+2)` to avoid cancellation near the zero section.
pub fn reduced_first_integral_residual(
    p: &SolitonParams,
    x: f64,
    yt_dev: f64,
    g: f64,
    ctx: &FirstIntegralContext,
) -> f64 {
    let d2 = p.df() + 2.0;
    -ctx.c * g * g * x - p.a2() * x - d2 * d2 * yt_dev
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::soliton::make_params;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn nonlin1_examples() {
        let p = make_params(2, -1.0).unwrap();
        assert_eq!(rhs_core(&p, &[0.0, 0.0, 1.0, 0.0]), [0.0; 4]);
        assert_eq!(rhs_core(&p, &[0.0, 1.0, 1.0, 0.0]), [4.0, 1.0, 0.0, 0.0]);
        let r = rhs_core(&p, &[1.0, 1e-300, 0.0, 1.0]);
        assert_eq!(r[0], -7.0);
        assert_eq!(r[2], 8.0);
        assert!(r[1].abs() < 1e-299);
        assert_eq!(r[3], 0.0);
    }

    #[test]
    fn nonlin1_augmented_components() {
        let p = make_params(2, -1.0).unwrap();
        let st = PhaseState {
            t: 0.0,
            x: 0.1,
            y: 0.5,
            z: 0.8,
            w: 0.2,
            lng: 0.3,
            s: 1.0,
            f: 0.4,
            l: 0.7,
        };
        let tan = rhs_nonlin1(&p, &st).unwrap();
        assert_eq!(tan.lng, 0.1);
        assert_eq!(tan.s, 0.7);
        assert!(close(tan.f, 0.3f64.exp() * 0.8 * 0.2 / 0.5, 1e-15));
        assert!(close(tan.l, 0.7 * (2.0 * 0.01 + 0.64), 1e-15));
    }

    #[test]
    fn nonlin1_degenerate_y() {
        let p = make_params(2, -1.0).unwrap();
        let mut st = PhaseState {
            t: 0.0,
            x: 0.0,
            y: 0.0,
            z: 1.0,
            w: 0.0,
            lng: 0.0,
            s: 0.0,
            f: 0.0,
            l: 0.0,
        };
        assert_eq!(rhs_nonlin1(&p, &st).unwrap().to_array(), [0.0; 8]);
        st.w = 0.1;
        assert!(matches!(
            rhs_nonlin1(&p, &st),
            Err(SolitonError::DegenerateState { .. })
        ));
    }

    #[test]
    fn nonlin2_examples() {
        let p = make_params(2, -1.0).unwrap();
        assert_eq!(rhs_nonlin2(&p, &[0.0; 4]), [0.0; 4]);
        assert_eq!(
            rhs_nonlin2(&p, &[0.0, 1.0, 0.0, 0.0]),
            [-4.0, -2.0, 0.0, 0.0]
        );
    }

    #[test]
    fn nonlin2_is_nonlin1_reversed() {
        // Chain rule: d/dt̃ of (X, Y², 1 - Z, W) equals minus the t-derivative.
        let p = make_params(4, -2.0).unwrap();
        let v = [0.03, 0.2, 0.9, 0.05];
        let r1 = rhs_core(&p, &v);
        let r2 = rhs_nonlin2(&p, &[v[0], v[1] * v[1], 1.0 - v[2], v[3]]);
        assert!(close(r2[0], -r1[0], 1e-14));
        assert!(close(r2[1], -2.0 * v[1] * r1[1], 1e-14));
        assert!(close(r2[2], r1[2], 1e-14));
        assert!(close(r2[3], -r1[3], 1e-14));
    }

    #[test]
    fn kahler_examples() {
        let p = make_params(2, -1.0).unwrap();
        let fixed = KahlerState {
            t: 0.0,
            x: 0.0,
            yt: 0.5,
        };
        assert_eq!(rhs_kahler(&p, &fixed), [0.0, 0.0]);
        let r = rhs_kahler(
            &p,
            &KahlerState {
                t: 0.0,
                x: 0.1,
                yt: 0.5,
            },
        );
        assert!(close(r[0], 0.182, 1e-15), "{}", r[0]);
        assert!(close(r[1], 0.01, 1e-15), "{}", r[1]);
    }

    #[test]
    fn kahler_linearization_is_twice_identity() {
        for d in [2u32, 4, 6] {
            let p = make_params(d, -1.0).unwrap();
            let c = 2.0 / (p.df() + 2.0);
            let h = 1e-6;
            let mut jac = [[0.0; 2]; 2];
            for j in 0..2 {
                let mut plus = KahlerState {
                    t: 0.0,
                    x: 0.0,
                    yt: c,
                };
                let mut minus = plus;
                if j == 0 {
                    plus.x += h;
                    minus.x -= h;
                } else {
                    plus.yt += h;
                    minus.yt -= h;
                }
                let (fp, fm) = (rhs_kahler(&p, &plus), rhs_kahler(&p, &minus));
                for i in 0..2 {
                    jac[i][j] = (fp[i] - fm[i]) / (2.0 * h);
                }
            }
            for i in 0..2 {
                for j in 0..2 {
                    let expect = if i == j { 2.0 } else { 0.0 };
                    assert!(
                        close(jac[i][j], expect, 1e-6),
                        "d={d} J[{i}][{j}]={}",
                        jac[i][j]
                    );
                }
            }
        }
    }

    #[test]
    fn first_integral_examples() {
        let p = make_params(2, -1.0).unwrap();
        let ctx = FirstIntegralContext::new(&p, 1.0, 1.0).unwrap();
        let rest = PhaseState {
            t: 0.0,
            x: 0.0,
            y: 0.0,
            z: 1.0,
            w: 0.0,
            lng: 0.0,
            s: 0.0,
            f: 0.0,
            l: 0.0,
        };
        assert_eq!(first_integral_residual(&p, &rest, &ctx), 0.0);
        let st = PhaseState {
            y: 1.0,
            l: 1.0,
            ..rest
        };
        assert_eq!(first_integral_residual(&p, &st, &ctx), 9.0);
    }

    #[test]
    fn first_integral_growth_law() {
        // R' = 2(dX² + Z²)R, checked by differentiating along the vector field.
        let p = make_params(2, -2.0).unwrap();
        let ctx = FirstIntegralContext::new(&p, 13.0, 1.3).unwrap();
        let st = PhaseState {
            t: 0.0,
            x: 0.11,
            y: 0.31,
            z: 0.72,
            w: 0.05,
            lng: 0.2,
            s: 0.0,
            f: 0.1,
            l: 0.4,
        };
        let tan = rhs_nonlin1(&p, &st).unwrap();
        let h = 1e-6;
        let shift = |k: f64| {
            let mut a = st.to_array();
            let ta = tan.to_array();
            for i in 0..8 {
                a[i] += k * h * ta[i];
            }
            first_integral_residual(&p, &PhaseState::from_array(0.0, &a), &ctx)
        };
        let deriv = (shift(1.0) - shift(-1.0)) / (2.0 * h);
        let r = first_integral_residual(&p, &st, &ctx);
        let expect = 2.0 * (2.0 * st.x * st.x + st.z * st.z) * r;
        assert!(close(deriv, expect, 1e-7), "{deriv} vs {expect}");
    }
}
