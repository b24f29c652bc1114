use serde::{Deserialize, Serialize};

/// A point of the augmented flow: the projectivized variables plus the
/// quadratures that recover the metric (`ln g`, arclength `s`, fiber radius
/// `f` and `ℒ = g·Y`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseState {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub w: f64,
    pub lng: f64,
    pub s: f64,
    pub f: f64,
    pub l: f64,
}

impl PhaseState {
    pub fn core(&self) -> [f64; 4] {
        [self.x, self.y, self.z, self.w]
    }

    /// Augmented state vector in integrator order `(X, Y, Z, W, ln g, s, f, ℒ)`.
    pub fn to_array(&self) -> [f64; 8] {
        [
            self.x, self.y, self.z, self.w, self.lng, self.s, self.f, self.l,
        ]
    }

    pub fn from_array(t: f64, a: &[f64; 8]) -> Self {
        Self {
            t,
            x: a[0],
            y: a[1],
            z: a[2],
            w: a[3],
            lng: a[4],
            s: a[5],
            f: a[6],
            l: a[7],
        }
    }

    pub fn g(&self) -> f64 {
        self.lng.exp()
    }

    /// Sup norm of `(X, Y, Z, W)`.
    pub fn core_norm(&self) -> f64 {
        self.core().iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// Converts to the reversed-time variables. `ln g`, `s`, `f` and `ℒ` are
    /// dropped.
    pub fn to_tilde(&self) -> TildeState {
        TildeState {
            tt: -self.t,
            x: self.x,
            yt: self.y * self.y,
            zt: 1.0 - self.z,
            w: self.w,
        }
    }
}

/// Reversed-time variables `(X, Ỹ = Y², Z̃ = 1 - Z, W)` at `t̃ = -t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TildeState {
    pub tt: f64,
    pub x: f64,
    pub yt: f64,
    pub zt: f64,
    pub w: f64,
}

impl TildeState {
    pub fn as_vec(&self) -> [f64; 4] {
        [self.x, self.yt, self.zt, self.w]
    }

    pub fn from_vec(tt: f64, v: &[f64; 4]) -> Self {
        Self {
            tt,
            x: v[0],
            yt: v[1],
            zt: v[2],
            w: v[3],
        }
    }

    /// Inverse change of variables taking the positive root `Y = √Ỹ`.
    ///
    /// Augmented components are zero; callers fill them in.
    pub fn to_phase(&self) -> PhaseState {
        PhaseState {
            t: -self.tt,
            x: self.x,
            y: self.yt.max(0.0).sqrt(),
            z: 1.0 - self.zt,
            w: self.w,
            lng: 0.0,
            s: 0.0,
            f: 0.0,
            l: 0.0,
        }
    }
}

/// State of the planar Kähler reduction, `Ỹ = Y²/X`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KahlerState {
    pub t: f64,
    pub x: f64,
    pub yt: f64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn tilde_round_trip(t in -20.0..20.0f64, x in -1.0..1.0f64, y in 1e-6..2.0f64,
                            z in -1.0..2.0f64, w in -1.0..1.0f64) {
            let st = PhaseState { t, x, y, z, w, lng: 0.0, s: 0.0, f: 0.0, l: 0.0 };
            let back = st.to_tilde().to_phase();
            prop_assert_eq!(back.t, t);
            prop_assert_eq!(back.x, x);
            prop_assert!((back.y - y).abs() <= 4.0 * f64::EPSILON * y);
            prop_assert!((back.z - z).abs() <= 4.0 * f64::EPSILON * z.abs().max(1.0));
            prop_assert_eq!(back.w, w);
        }
    }

    #[test]
    fn array_round_trip() {
        let st = PhaseState {
            t: 1.5,
            x: 0.1,
            y: 0.2,
            z: 0.3,
            w: 0.4,
            lng: 0.5,
            s: 0.6,
            f: 0.7,
            l: 0.8,
        };
        assert_eq!(PhaseState::from_array(st.t, &st.to_array()), st);
        assert_eq!(st.core_norm(), 0.4);
    }
}
