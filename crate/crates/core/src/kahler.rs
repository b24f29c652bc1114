//! Independent construction of the `q = -1` (Kähler) solitons from the
//! two-dimensional reduced flow in `(X, Ỹ)`.
//!
//! The zero section corresponds to the node `(0, 2/(d+2))`, whose
//! linearization is `2·I`: every trajectory leaving it is unstable, and the
//! family member is selected by the limit of `(Ỹ - 2/(d+2))/X`. Internally
//! the flow is integrated in `η = Ỹ - 2/(d+2)` to avoid cancellation.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SolitonError};
use crate::forward::{IntegrationOptions, Outcome, Trajectory};
use crate::picard::aitken;
use crate::profile::{interpolate_sorted, MetricProfile};
use crate::quad::linear_fit;
use crate::rk::{solve, Flow, OdeSystem, RkError, StepControl, Termination};
use crate::soliton::{
    reduced_first_integral_residual, FirstIntegralContext, KahlerState, PhaseState, SolitonParams,
};

const MAX_SEED_EPS: f64 = 1e-4;
const BACKWARD_NORM: f64 = 1e-10;
const DRIFT_ERROR: f64 = 1e-6;
const MAX_SHOTS: usize = 40;

fn require_canonical(p: &SolitonParams) -> Result<()> {
    if p.q() != -1.0 {
        return Err(SolitonError::InvalidParams(format!(
            "the Kähler reduction needs q = -1 (canonical bundle), got q = {}",
            p.q()
        )));
    }
    Ok(())
}

fn node(p: &SolitonParams) -> f64 {
    2.0 / (p.df() + 2.0)
}

/// Prescribed limit of `(Ỹ - 2/(d+2))/X`: `-(Λ + A₂)/(d+2)²`.
pub fn target_slope(p: &SolitonParams, big_lambda: f64) -> f64 {
    -(big_lambda + p.a2()) / (p.df() + 2.0).powi(2)
}

/// First-order point on the unstable manifold, `(eps, 2/(d+2) + slope·eps)`,
/// with `slope = -(C₀λ₀² + A₂)/(d+2)²`.
pub fn unstable_seed(p: &SolitonParams, c0: f64, lambda0: f64, eps: f64) -> Result<KahlerState> {
    require_canonical(p)?;
    if !(eps > 0.0 && eps <= MAX_SEED_EPS) {
        return Err(SolitonError::InvalidParams(format!(
            "seed offset {eps} must lie in (0, {MAX_SEED_EPS}]"
        )));
    }
    if !(c0 > 0.0 && lambda0 > 0.0) {
        return Err(SolitonError::InvalidParams(
            "C₀ and λ₀ must be positive".into(),
        ));
    }
    let slope = target_slope(p, c0 * lambda0 * lambda0);
    Ok(KahlerState {
        t: 0.0,
        x: eps,
        yt: node(p) + slope * eps,
    })
}

/// `(X, η)` right-hand side with the node factored out:
/// `X' = X(dX² + 2 + 3(d+2)η + (d+2)²η² - 2X)`,
/// `η' = Ỹ(dX² + (d+2)η(1 + (d+2)η))`.
pub fn rhs_deviation(p: &SolitonParams, x: f64, eta: f64) -> [f64; 2] {
    let d = p.df();
    let e = (d + 2.0) * eta;
    let yt = node(p) + eta;
    [
        x * (d * x * x + 2.0 + 3.0 * e + e * e - 2.0 * x),
        yt * (d * x * x + e * (1.0 + e)),
    ]
}

struct Core<'a>(&'a SolitonParams);

impl OdeSystem<2> for Core<'_> {
    fn rhs(&self, _t: f64, y: &[f64; 2]) -> Result<[f64; 2]> {
        Ok(rhs_deviation(self.0, y[0], y[1]))
    }
}

/// `(X, η, ln g, s, f)`.
struct Augmented<'a>(&'a SolitonParams);

impl OdeSystem<5> for Augmented<'_> {
    fn rhs(&self, _t: f64, y: &[f64; 5]) -> Result<[f64; 5]> {
        let p = self.0;
        let [x, eta, lng, _, _] = *y;
        let [dx, deta] = rhs_deviation(p, x, eta);
        let d2 = p.df() + 2.0;
        let yt = node(p) + eta;
        if !(x >= 0.0 && yt > 0.0) {
            return Err(SolitonError::Domain(format!(
                "reduced state left X >= 0, Ỹ > 0: ({x}, {yt})"
            )));
        }
        let g = lng.exp();
        let big_y = (x * yt).sqrt();
        let z = 1.0 + d2 * eta;
        // W/Y = 2X/((d+2)√(XỸ)) = 2√X/((d+2)√Ỹ)
        let w_over_y = 2.0 * x.sqrt() / (d2 * yt.sqrt());
        Ok([dx, deta, x, g * big_y, g * z * w_over_y])
    }
}

/// A point of the reduced flow with its quadratures.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReducedSample {
    pub t: f64,
    pub x: f64,
    /// `Ỹ - 2/(d+2)`.
    pub eta: f64,
    pub lng: f64,
    pub s: f64,
    pub f: f64,
}

impl ReducedSample {
    pub fn state(&self, p: &SolitonParams) -> KahlerState {
        KahlerState {
            t: self.t,
            x: self.x,
            yt: node(p) + self.eta,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReducedRun {
    pub params: SolitonParams,
    pub ctx: FirstIntegralContext,
    pub seed: KahlerState,
    /// Backward samples from the seed towards the node (decreasing `t`).
    pub backward: Vec<KahlerState>,
    /// Measured `lim (Ỹ - 2/(d+2))/X` at `t -> -∞`.
    pub limit_slope: f64,
    /// Fitted exponential rate of the backward approach to the node.
    pub backward_rate: f64,
    /// Forward samples from the end of the backward leg.
    pub forward: Vec<ReducedSample>,
    pub max_reduced_drift: f64,
    pub outcome: Outcome,
    pub trajectory: Trajectory,
}

fn backward_leg(
    p: &SolitonParams,
    seed: &KahlerState,
    rtol: f64,
) -> Result<(Vec<KahlerState>, Vec<[f64; 2]>)> {
    let ctl = StepControl {
        rtol,
        atol: 1e-30,
        ..StepControl::default()
    };
    let y0 = [seed.x, seed.yt - node(p)];
    let mut states = vec![*seed];
    let mut dev = vec![y0];
    let yn = node(p);
    let run = solve(&Core(p), seed.t, y0, seed.t - 1e3, &ctl, |step| {
        let y = step.y1;
        states.push(KahlerState {
            t: step.t1(),
            x: y[0],
            yt: yn + y[1],
        });
        dev.push(y);
        if y[0].abs().max(y[1].abs()) < BACKWARD_NORM {
            Flow::Stop
        } else {
            Flow::Continue
        }
    });
    match run {
        Ok((Termination::Stopped, _)) => Ok((states, dev)),
        Ok((term, _)) => Err(SolitonError::Accuracy(format!(
            "backward flow did not reach the node ({term:?})"
        ))),
        Err(RkError::Rhs(e)) => Err(e),
        Err(e) => Err(SolitonError::Accuracy(format!("backward flow failed: {e}"))),
    }
}

fn limit_from(dev: &[[f64; 2]]) -> f64 {
    let n = dev.len();
    let r = |k: usize| dev[k][1] / dev[k][0];
    if n < 3 {
        return r(n - 1);
    }
    aitken(r(n - 3), r(n - 2), r(n - 1))
}

/// Integrates the reduced flow backward to the node (measuring the limit
/// slope) and then forward from there with the quadratures of `ln g`, `s`,
/// `f`, until the lifted state reaches the origin.
pub fn integrate_reduced(
    p: &SolitonParams,
    seed: &KahlerState,
    ctx: &FirstIntegralContext,
    opts: &IntegrationOptions,
) -> Result<ReducedRun> {
    require_canonical(p)?;
    opts.validate()?;
    if !(seed.x > 0.0 && seed.yt > 0.0) {
        return Err(SolitonError::Domain("seed needs X > 0 and Ỹ > 0".into()));
    }
    let (backward, dev) = backward_leg(p, seed, opts.rtol)?;
    let limit_slope = limit_from(&dev);
    let tb: Vec<f64> = backward.iter().map(|s| s.t).collect();
    let ln_norm: Vec<f64> = dev
        .iter()
        .map(|v| v[0].abs().max(v[1].abs()).ln())
        .collect();
    let backward_rate = linear_fit(&tb, &ln_norm).0;

    // Heads at the node end: X ∝ e^{2t}, ℒ and gZW/Y ∝ e^t.
    let end = *backward.last().unwrap();
    let [xb, eb] = *dev.last().unwrap();
    let d2 = p.df() + 2.0;
    let lng0 = ctx.lambda.ln() + xb / 2.0;
    let g0 = lng0.exp();
    let yt0 = node(p) + eb;
    let l0 = g0 * (xb * yt0).sqrt();
    let f0 = g0 * (1.0 + d2 * eb) * 2.0 * xb.sqrt() / (d2 * yt0.sqrt());
    let start = [xb, eb, lng0, l0, f0];

    let ctl = StepControl {
        rtol: opts.rtol,
        atol: 1e-30,
        max_steps: opts.max_steps,
        ..StepControl::default()
    };
    let mut forward = vec![ReducedSample {
        t: end.t,
        x: xb,
        eta: eb,
        lng: lng0,
        s: l0,
        f: f0,
    }];
    let mut event = None;
    let d = p.df();
    let run = solve(
        &Augmented(p),
        end.t,
        start,
        end.t + opts.max_t,
        &ctl,
        |step| {
            let [x, eta, lng, s, f] = step.y1;
            let smp = ReducedSample {
                t: step.t1(),
                x,
                eta,
                lng,
                s,
                f,
            };
            forward.push(smp);
            let st = lift_sample(p, &smp);
            let norm = st.core_norm();
            if norm > opts.blowup_norm {
                event = Some(Outcome::BlowUp);
                return Flow::Stop;
            }
            let dl = st.l * (d * st.x * st.x + st.z * st.z);
            if norm < opts.origin_eps && dl.abs() < 1e-10 {
                event = Some(Outcome::ConvergedToOrigin);
                return Flow::Stop;
            }
            Flow::Continue
        },
    );
    let (outcome, diagnostic) = match run {
        Ok((Termination::Stopped, _)) => (event.expect("stop only on events"), None),
        Ok((term, st)) => (
            Outcome::StepLimit,
            Some(format!("{term:?} after {} steps", st.accepted)),
        ),
        Err(RkError::StepUnderflow { t, h }) => (
            Outcome::BlowUp,
            Some(format!("step size underflow (h = {h:e}) at t = {t}")),
        ),
        Err(RkError::NonFinite { t }) => return Err(SolitonError::NonFinite(t)),
        Err(RkError::Rhs(e)) => return Err(e),
    };

    let max_reduced_drift = forward
        .iter()
        .map(|s| reduced_first_integral_residual(p, s.x, s.eta, s.lng.exp(), ctx).abs())
        .fold(0.0, f64::max);
    if max_reduced_drift > DRIFT_ERROR {
        return Err(SolitonError::Accuracy(format!(
            "reduced first integral drifted by {max_reduced_drift:e}"
        )));
    }
    let samples: Vec<PhaseState> = forward.iter().map(|s| lift_sample(p, s)).collect();
    let mut trajectory = Trajectory {
        params: *p,
        ctx: *ctx,
        steps_accepted: samples.len() - 1,
        samples,
        germ_len: 0,
        outcome,
        diagnostic,
        max_first_integral_drift: 0.0,
        max_dxplusz: 0.0,
        min_wy2_margin: 0.0,
        steps_rejected: 0,
    };
    trajectory.refresh_stats();
    Ok(ReducedRun {
        params: *p,
        ctx: *ctx,
        seed: *seed,
        backward,
        limit_slope,
        backward_rate,
        forward,
        max_reduced_drift,
        outcome,
        trajectory,
    })
}

/// Secant shooting on the seed slope so that the measured backward limit
/// equals `-(Λ + A₂)/(d+2)²`, then the full reduced run.
pub fn shoot_reduced(
    p: &SolitonParams,
    ctx: &FirstIntegralContext,
    eps: f64,
    opts: &IntegrationOptions,
) -> Result<ReducedRun> {
    let base = unstable_seed(p, ctx.c, ctx.lambda, eps)?;
    let target = target_slope(p, ctx.big_lambda);
    let yn = node(p);
    let seed_with = |slope: f64| KahlerState {
        yt: yn + slope * eps,
        ..base
    };
    let miss = |slope: f64| -> Result<f64> {
        let (_, dev) = backward_leg(p, &seed_with(slope), opts.rtol)?;
        Ok(limit_from(&dev) - target)
    };
    let mut a = target;
    let mut fa = miss(a)?;
    let mut b = target - fa;
    let mut fb = miss(b)?;
    let tol = 1e-13 * target.abs();
    for _ in 0..MAX_SHOTS {
        if fb.abs() <= tol || fb == fa {
            break;
        }
        let c = b - fb * (b - a) / (fb - fa);
        a = b;
        fa = fb;
        b = c;
        fb = miss(b)?;
    }
    if fb.abs() > 1e-10 * target.abs() {
        return Err(SolitonError::Accuracy(format!(
            "slope shooting missed the target by {fb:e}"
        )));
    }
    integrate_reduced(p, &seed_with(b), ctx, opts)
}

fn lift_sample(p: &SolitonParams, s: &ReducedSample) -> PhaseState {
    let d2 = p.df() + 2.0;
    let yt = node(p) + s.eta;
    let y = (s.x * yt).sqrt();
    let g = s.lng.exp();
    PhaseState {
        t: s.t,
        x: s.x,
        y,
        z: 1.0 + d2 * s.eta,
        w: 2.0 * s.x / d2,
        lng: s.lng,
        s: s.s,
        f: s.f,
        l: g * y,
    }
}

/// `Y = √(XỸ)`, `Z = (d+2)Ỹ - 1`, `W = 2X/(d+2)`; augmented fields zero.
pub fn lift_to_xyzw(p: &SolitonParams, states: &[KahlerState]) -> Result<Vec<PhaseState>> {
    let d2 = p.df() + 2.0;
    states
        .iter()
        .map(|s| {
            if !(s.x >= 0.0 && s.yt > 0.0) {
                return Err(SolitonError::Domain(format!(
                    "cannot lift (X, Ỹ) = ({}, {})",
                    s.x, s.yt
                )));
            }
            Ok(PhaseState {
                t: s.t,
                x: s.x,
                y: (s.x * s.yt).sqrt(),
                z: d2 * s.yt - 1.0,
                w: 2.0 * s.x / d2,
                lng: 0.0,
                s: 0.0,
                f: 0.0,
                l: 0.0,
            })
        })
        .collect()
}

/// Sup-relative deviations of `f`, `g`, `h_s` over the common `s` range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileDeviation {
    pub f: f64,
    pub g: f64,
    pub h_s: f64,
    pub s_min: f64,
    pub s_max: f64,
}

impl ProfileDeviation {
    pub fn max(&self) -> f64 {
        self.f.max(self.g).max(self.h_s)
    }
}

/// Compares two profiles of the same `(d, q)` on their common `s` range,
/// evaluating each at the other's native samples by Hermite interpolation.
pub fn compare_profiles(a: &MetricProfile, b: &MetricProfile) -> Result<ProfileDeviation> {
    if a.params.d() != b.params.d() || a.params.q() != b.params.q() {
        return Err(SolitonError::Comparison(format!(
            "profiles differ in (d, q): ({}, {}) vs ({}, {})",
            a.params.d(),
            a.params.q(),
            b.params.d(),
            b.params.q()
        )));
    }
    let (na, nb) = (&a.native, &b.native);
    if na.is_empty() || nb.is_empty() {
        return Err(SolitonError::Comparison("empty profile".into()));
    }
    let lo = na[0].s.max(nb[0].s);
    let hi = na.last().unwrap().s.min(nb.last().unwrap().s);
    if !(hi > lo) {
        return Err(SolitonError::Comparison(format!(
            "s ranges do not overlap ([{}, {}] vs [{}, {}])",
            na[0].s,
            na.last().unwrap().s,
            nb[0].s,
            nb.last().unwrap().s
        )));
    }
    let rel = |u: f64, v: f64| (u - v).abs() / u.abs().max(f64::MIN_POSITIVE);
    let mut dev = ProfileDeviation {
        f: 0.0,
        g: 0.0,
        h_s: 0.0,
        s_min: lo,
        s_max: hi,
    };
    for (from, other) in [(a, b), (b, a)] {
        let xs: Vec<f64> = other.native.iter().map(|n| n.s).collect();
        for smp in from.native.iter().filter(|n| n.s >= lo && n.s <= hi) {
            let o = interpolate_sorted(&other.params, &other.ctx, &other.native, &xs, smp.s);
            dev.f = dev.f.max(rel(smp.f, o.f));
            dev.g = dev.g.max(rel(smp.g, o.g));
            dev.h_s = dev.h_s.max(rel(smp.h_s, o.h_s));
        }
    }
    Ok(dev)
}
