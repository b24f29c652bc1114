//! Dormand-Prince 5(4) embedded Runge-Kutta integrator with a PI step-size
//! controller and the pair's native fourth-order continuous extension.
//!
//! Coefficients and controller constants follow Hairer, Nørsett & Wanner,
//! *Solving Ordinary Differential Equations I*, section II.5 (DOPRI5).

use crate::error::SolitonError;

/// Right-hand side of `y' = F(t, y)`.
pub trait OdeSystem<const N: usize> {
    fn rhs(&self, t: f64, y: &[f64; N]) -> Result<[f64; N], SolitonError>;
}

#[derive(Debug, Clone, Copy)]
pub struct StepControl {
    pub rtol: f64,
    pub atol: f64,
    /// Initial step; estimated from the problem when `None`.
    pub h_init: Option<f64>,
    pub h_max: f64,
    /// Steps below this magnitude are reported as underflow.
    pub h_min: f64,
    pub max_steps: usize,
}

impl Default for StepControl {
    fn default() -> Self {
        Self {
            rtol: 1e-10,
            atol: 1e-13,
            h_init: None,
            h_max: f64::INFINITY,
            h_min: 1e-14,
            max_steps: 2_000_000,
        }
    }
}

/// Returned by the step observer to continue or halt the integration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Flow {
    Continue,
    Stop,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    /// The observer requested a stop.
    Stopped,
    ReachedEnd,
    MaxSteps,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Stats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

#[derive(Debug, thiserror::Error)]
pub enum RkError {
    #[error("step size underflow (|h| = {h:e}) at t = {t}")]
    StepUnderflow { t: f64, h: f64 },
    #[error("non-finite state at t = {t}")]
    NonFinite { t: f64 },
    #[error(transparent)]
    Rhs(#[from] SolitonError),
}

/// One accepted step together with its dense-output polynomial.
#[derive(Debug, Clone)]
pub struct DenseStep<const N: usize> {
    pub t0: f64,
    pub h: f64,
    pub y0: [f64; N],
    pub y1: [f64; N],
    pub f0: [f64; N],
    pub f1: [f64; N],
    rcont: [[f64; N]; 5],
}

impl<const N: usize> DenseStep<N> {
    pub fn t1(&self) -> f64 {
        self.t0 + self.h
    }

    /// Fourth-order interpolant at `t` in `[t0, t1]`.
    pub fn eval(&self, t: f64) -> [f64; N] {
        let th = (t - self.t0) / self.h;
        let th1 = 1.0 - th;
        let r = &self.rcont;
        std::array::from_fn(|i| {
            r[0][i] + th * (r[1][i] + th1 * (r[2][i] + th * (r[3][i] + th1 * r[4][i])))
        })
    }
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

const SAFETY: f64 = 0.9;
const BETA: f64 = 0.04;
const EXPO1: f64 = 0.2 - BETA * 0.75;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 10.0;

fn combo<const N: usize>(y: &[f64; N], h: f64, terms: &[(f64, &[f64; N])]) -> [f64; N] {
    std::array::from_fn(|i| y[i] + h * terms.iter().map(|(c, k)| c * k[i]).sum::<f64>())
}

fn finite<const N: usize>(v: &[f64; N]) -> bool {
    v.iter().all(|x| x.is_finite())
}

fn initial_step<const N: usize, S: OdeSystem<N>>(
    sys: &S,
    t0: f64,
    y0: &[f64; N],
    f0: &[f64; N],
    dir: f64,
    ctl: &StepControl,
) -> Result<f64, RkError> {
    let sk = |i: usize| ctl.atol + ctl.rtol * y0[i].abs();
    let dnf: f64 = (0..N).map(|i| (f0[i] / sk(i)).powi(2)).sum::<f64>() / N as f64;
    let dny: f64 = (0..N).map(|i| (y0[i] / sk(i)).powi(2)).sum::<f64>() / N as f64;
    let mut h = if dnf <= 1e-10 || dny <= 1e-10 {
        1e-6
    } else {
        (dny / dnf).sqrt() * 0.01
    };
    h = h.min(ctl.h_max);
    let y1 = combo(y0, dir * h, &[(1.0, f0)]);
    let f1 = sys.rhs(t0 + dir * h, &y1)?;
    let der2 = ((0..N)
        .map(|i| ((f1[i] - f0[i]) / sk(i)).powi(2))
        .sum::<f64>()
        / N as f64)
        .sqrt()
        / h;
    let der12 = der2.max(dnf.sqrt());
    let h1 = if der12 <= 1e-15 {
        (h * 1e-3).max(1e-6)
    } else {
        (0.01 / der12).powf(0.2)
    };
    Ok((100.0 * h).min(h1).min(ctl.h_max))
}

/// Integrates from `t0` towards `t_end` (either direction), handing every
/// accepted step to `observer`.
pub fn solve<const N: usize, S, O>(
    sys: &S,
    t0: f64,
    y0: [f64; N],
    t_end: f64,
    ctl: &StepControl,
    mut observer: O,
) -> Result<(Termination, Stats), RkError>
where
    S: OdeSystem<N>,
    O: FnMut(&DenseStep<N>) -> Flow,
{
    let dir = if t_end >= t0 { 1.0 } else { -1.0 };
    let mut stats = Stats::default();
    let mut t = t0;
    let mut y = y0;
    let mut k1 = sys.rhs(t, &y)?;
    stats.evaluations += 1;
    if !finite(&y) || !finite(&k1) {
        return Err(RkError::NonFinite { t });
    }
    let mut h = match ctl.h_init {
        Some(h) => h.abs(),
        None => {
            stats.evaluations += 1;
            initial_step(sys, t, &y, &k1, dir, ctl)?
        }
    };
    let mut facold: f64 = 1e-4;
    let mut last_rejected = false;

    loop {
        if stats.accepted >= ctl.max_steps {
            return Ok((Termination::MaxSteps, stats));
        }
        let remaining = (t_end - t) * dir;
        if remaining <= 0.0 {
            return Ok((Termination::ReachedEnd, stats));
        }
        h = h.min(ctl.h_max);
        let last = h >= remaining;
        if last {
            h = remaining;
        }
        if h < ctl.h_min && !last {
            return Err(RkError::StepUnderflow { t, h });
        }
        let hs = dir * h;

        let y2 = combo(&y, hs, &[(A21, &k1)]);
        let k2 = sys.rhs(t + C2 * hs, &y2)?;
        let y3 = combo(&y, hs, &[(A31, &k1), (A32, &k2)]);
        let k3 = sys.rhs(t + C3 * hs, &y3)?;
        let y4 = combo(&y, hs, &[(A41, &k1), (A42, &k2), (A43, &k3)]);
        let k4 = sys.rhs(t + C4 * hs, &y4)?;
        let y5 = combo(&y, hs, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]);
        let k5 = sys.rhs(t + C5 * hs, &y5)?;
        let y6 = combo(
            &y,
            hs,
            &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)],
        );
        let k6 = sys.rhs(t + hs, &y6)?;
        let ynew = combo(
            &y,
            hs,
            &[(A71, &k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)],
        );
        let t_new = if last { t_end } else { t + hs };
        let k7 = sys.rhs(t_new, &ynew)?;
        stats.evaluations += 6;

        let err_vec: [f64; N] = std::array::from_fn(|i| {
            hs * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i])
        });
        let err = ((0..N)
            .map(|i| {
                let sk = ctl.atol + ctl.rtol * y[i].abs().max(ynew[i].abs());
                (err_vec[i] / sk).powi(2)
            })
            .sum::<f64>()
            / N as f64)
            .sqrt();
        if !err.is_finite() || !finite(&ynew) {
            // Shrink hard; a genuinely singular flow ends in step underflow.
            if h * 0.1 < ctl.h_min {
                return if finite(&ynew) {
                    Err(RkError::StepUnderflow { t, h })
                } else {
                    Err(RkError::NonFinite { t })
                };
            }
            h *= 0.1;
            last_rejected = true;
            stats.rejected += 1;
            continue;
        }

        let fac11 = err.powf(EXPO1);
        let mut fac = fac11 / facold.powf(BETA);
        fac = (1.0 / FAC_MAX).max((1.0 / FAC_MIN).min(fac / SAFETY));
        let h_new = h / fac;

        if err <= 1.0 {
            facold = err.max(1e-4);
            stats.accepted += 1;
            let rc2: [f64; N] = std::array::from_fn(|i| ynew[i] - y[i]);
            let rc3: [f64; N] = std::array::from_fn(|i| hs * k1[i] - rc2[i]);
            let rc4: [f64; N] = std::array::from_fn(|i| rc2[i] - hs * k7[i] - rc3[i]);
            let rc5: [f64; N] = std::array::from_fn(|i| {
                hs * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i])
            });
            let step = DenseStep {
                t0: t,
                h: t_new - t,
                y0: y,
                y1: ynew,
                f0: k1,
                f1: k7,
                rcont: [y, rc2, rc3, rc4, rc5],
            };
            t = t_new;
            y = ynew;
            k1 = k7;
            let mut next = h_new;
            if last_rejected {
                next = next.min(h);
            }
            last_rejected = false;
            h = next;
            if observer(&step) == Flow::Stop {
                return Ok((Termination::Stopped, stats));
            }
        } else {
            h /= (1.0 / FAC_MIN).min(fac11 / SAFETY);
            last_rejected = true;
            stats.rejected += 1;
            if h < ctl.h_min {
                return Err(RkError::StepUnderflow { t, h });
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Decay;
    impl OdeSystem<1> for Decay {
        fn rhs(&self, _t: f64, y: &[f64; 1]) -> Result<[f64; 1], SolitonError> {
            Ok([-y[0]])
        }
    }

    struct Oscillator;
    impl OdeSystem<2> for Oscillator {
        fn rhs(&self, _t: f64, y: &[f64; 2]) -> Result<[f64; 2], SolitonError> {
            Ok([y[1], -y[0]])
        }
    }

    struct Blowup;
    impl OdeSystem<1> for Blowup {
        fn rhs(&self, _t: f64, y: &[f64; 1]) -> Result<[f64; 1], SolitonError> {
            Ok([y[0] * y[0]])
        }
    }

    fn final_state<const N: usize, S: OdeSystem<N>>(
        sys: &S,
        t0: f64,
        y0: [f64; N],
        t1: f64,
        rtol: f64,
    ) -> [f64; N] {
        let ctl = StepControl {
            rtol,
            atol: rtol * 1e-3,
            ..Default::default()
        };
        let mut last = y0;
        let (term, _) = solve(sys, t0, y0, t1, &ctl, |s| {
            last = s.y1;
            Flow::Continue
        })
        .unwrap();
        assert_eq!(term, Termination::ReachedEnd);
        last
    }

    #[test]
    fn exponential_decay_both_directions() {
        let y = final_state(&Decay, 0.0, [1.0], 5.0, 1e-10);
        assert!((y[0] - (-5.0f64).exp()).abs() < 1e-11);
        let y = final_state(&Decay, 0.0, [1.0], -3.0, 1e-10);
        assert!((y[0] - 3.0f64.exp()).abs() < 1e-8);
    }

    #[test]
    fn global_error_shrinks_with_tolerance() {
        let exact = (20.0f64).cos();
        let e1 = (final_state(&Oscillator, 0.0, [1.0, 0.0], 20.0, 1e-6)[0] - exact).abs();
        let e2 = (final_state(&Oscillator, 0.0, [1.0, 0.0], 20.0, 1e-9)[0] - exact).abs();
        assert!(e2 < e1 / 50.0, "{e1} {e2}");
    }

    #[test]
    fn dense_output_is_accurate() {
        let ctl = StepControl {
            rtol: 1e-9,
            atol: 1e-12,
            ..Default::default()
        };
        let mut worst = 0.0f64;
        solve(&Oscillator, 0.0, [1.0, 0.0], 10.0, &ctl, |s| {
            for k in 1..10 {
                let t = s.t0 + s.h * f64::from(k) / 10.0;
                let y = s.eval(t);
                worst = worst.max((y[0] - t.cos()).abs());
            }
            Flow::Continue
        })
        .unwrap();
        assert!(worst < 1e-7, "{worst}");
    }

    #[test]
    fn observer_can_stop() {
        let ctl = StepControl::default();
        let mut n = 0;
        let (term, stats) = solve(&Decay, 0.0, [1.0], 100.0, &ctl, |_| {
            n += 1;
            if n == 3 {
                Flow::Stop
            } else {
                Flow::Continue
            }
        })
        .unwrap();
        assert_eq!(term, Termination::Stopped);
        assert_eq!(stats.accepted, 3);
    }

    #[test]
    fn finite_time_singularity_is_reported() {
        let ctl = StepControl::default();
        let res = solve(&Blowup, 0.0, [1.0], 2.0, &ctl, |_| Flow::Continue);
        assert!(matches!(
            res,
            Err(RkError::StepUnderflow { .. }) | Err(RkError::NonFinite { .. })
        ));
    }
}
