//! Forward integration of the augmented flow from the germ hand-off state.

mod checks;

pub use checks::{
    bar_diagnostics, bar_time, check_dxplusz, check_dxplusz_samples, check_l_monotone,
    check_sign_invariance, check_sign_invariance_samples, check_w_bound, germ_rates,
    lambda0_threshold,
};

use serde::{Deserialize, Serialize};

use crate::error::{Result, SolitonError};
use crate::rk::{solve, Flow, OdeSystem, RkError, StepControl, Termination};
use crate::soliton::{
    first_integral_residual, rhs_nonlin1, FirstIntegralContext, PhaseState, SolitonParams,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegrationOptions {
    pub rtol: f64,
    pub atol: f64,
    pub max_t: f64,
    /// Sup norm of `(X, Y, Z, W)` below which the flow counts as having
    /// reached the origin (together with `dℒ/dt < 1e-10`).
    pub origin_eps: f64,
    pub blowup_norm: f64,
    pub max_steps: usize,
}

impl Default for IntegrationOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-10,
            atol: 1e-13,
            max_t: 1e7,
            origin_eps: 1e-3,
            blowup_norm: 1e6,
            max_steps: 2_000_000,
        }
    }
}

impl IntegrationOptions {
    pub fn validate(&self) -> Result<()> {
        let ok = self.rtol > 0.0
            && self.atol > 0.0
            && self.max_t > 0.0
            && self.origin_eps > 0.0
            && self.origin_eps < 1.0
            && self.blowup_norm > 10.0
            && self.max_steps > 0;
        if ok {
            Ok(())
        } else {
            Err(SolitonError::InvalidParams(format!(
                "invalid integration options: {self:?}"
            )))
        }
    }
}

const ORIGIN_DL_TOL: f64 = 1e-10;
const MIN_STEP: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Outcome {
    ConvergedToOrigin,
    BlowUp,
    StepLimit,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Trajectory {
    pub params: SolitonParams,
    pub ctx: FirstIntegralContext,
    /// Strictly increasing in `t`: germ nodes (if prepended) then every
    /// accepted integrator step.
    pub samples: Vec<PhaseState>,
    /// Number of leading samples that come from the fixed-point germ.
    pub germ_len: usize,
    pub outcome: Outcome,
    pub diagnostic: Option<String>,
    pub max_first_integral_drift: f64,
    pub max_dxplusz: f64,
    pub min_wy2_margin: f64,
    pub steps_accepted: usize,
    pub steps_rejected: usize,
}

impl Trajectory {
    pub fn last(&self) -> &PhaseState {
        self.samples
            .last()
            .expect("trajectory has at least one sample")
    }

    /// `ℒ·√𝒞` at the last sample; 1 on complete solitons.
    pub fn final_l_scaled(&self) -> f64 {
        self.last().l * self.ctx.c.sqrt()
    }

    /// Prepends the germ (ordered by increasing `t`, ending at the hand-off
    /// state) and refreshes the statistics.
    pub fn prepend_germ(&mut self, germ: &[PhaseState]) {
        let first_t = self.samples[0].t;
        let mut merged: Vec<PhaseState> = germ.iter().filter(|s| s.t < first_t).copied().collect();
        self.germ_len = merged.len() + 1;
        merged.append(&mut self.samples);
        self.samples = merged;
        self.refresh_stats();
    }

    pub fn refresh_stats(&mut self) {
        let p = &self.params;
        let bound = p.w_bound();
        self.max_first_integral_drift = self
            .samples
            .iter()
            .map(|s| first_integral_residual(p, s, &self.ctx).abs())
            .fold(0.0, f64::max);
        self.max_dxplusz = self
            .samples
            .iter()
            .map(|s| p.df() * s.x + s.z)
            .fold(f64::NEG_INFINITY, f64::max);
        self.min_wy2_margin = self
            .samples
            .iter()
            .filter(|s| s.y > 0.0)
            .map(|s| bound - (s.w / s.y).powi(2))
            .fold(f64::INFINITY, f64::min);
    }
}

struct Augmented<'a> {
    p: &'a SolitonParams,
}

impl OdeSystem<8> for Augmented<'_> {
    fn rhs(&self, t: f64, y: &[f64; 8]) -> Result<[f64; 8]> {
        Ok(rhs_nonlin1(self.p, &PhaseState::from_array(t, y))?.to_array())
    }
}

/// Integrates forward from `start` until the origin is reached, the state
/// blows up, or the time/step budget is spent.
pub fn integrate(
    p: &SolitonParams,
    start: PhaseState,
    ctx: &FirstIntegralContext,
    opts: &IntegrationOptions,
) -> Result<Trajectory> {
    opts.validate()?;
    let ctl = StepControl {
        rtol: opts.rtol,
        atol: opts.atol,
        h_min: MIN_STEP,
        max_steps: opts.max_steps,
        ..StepControl::default()
    };
    let d = p.df();
    let mut samples = vec![start];
    let mut event: Option<Outcome> = None;
    let sys = Augmented { p };
    let run = solve(
        &sys,
        start.t,
        start.to_array(),
        start.t + opts.max_t,
        &ctl,
        |step| {
            let st = PhaseState::from_array(step.t1(), &step.y1);
            samples.push(st);
            let norm = st.core_norm();
            if norm > opts.blowup_norm {
                event = Some(Outcome::BlowUp);
                return Flow::Stop;
            }
            let dl = st.l * (d * st.x * st.x + st.z * st.z);
            if norm < opts.origin_eps && dl.abs() < ORIGIN_DL_TOL {
                event = Some(Outcome::ConvergedToOrigin);
                return Flow::Stop;
            }
            Flow::Continue
        },
    );
    let (outcome, diagnostic, stats) = match run {
        Ok((term, stats)) => {
            let outcome = match term {
                Termination::Stopped => event.expect("observer stops only on an event"),
                Termination::ReachedEnd | Termination::MaxSteps => Outcome::StepLimit,
            };
            let diag = match outcome {
                Outcome::BlowUp => Some(format!(
                    "state norm exceeded {} at t = {}",
                    opts.blowup_norm,
                    samples.last().unwrap().t
                )),
                Outcome::StepLimit => Some(format!("{term:?} after {} steps", stats.accepted)),
                Outcome::ConvergedToOrigin => None,
            };
            (outcome, diag, Some(stats))
        }
        Err(RkError::StepUnderflow { t, h }) => (
            Outcome::BlowUp,
            Some(format!("step size underflow (h = {h:e}) at t = {t}")),
            None,
        ),
        Err(RkError::NonFinite { t }) => return Err(SolitonError::NonFinite(t)),
        Err(RkError::Rhs(e)) => return Err(e),
    };
    let samples_len = samples.len();
    let mut traj = Trajectory {
        params: *p,
        ctx: *ctx,
        samples,
        germ_len: 0,
        outcome,
        diagnostic,
        max_first_integral_drift: 0.0,
        max_dxplusz: 0.0,
        min_wy2_margin: 0.0,
        steps_accepted: stats.map_or(samples_len - 1, |s| s.accepted),
        steps_rejected: stats.map_or(0, |s| s.rejected),
    };
    traj.refresh_stats();
    Ok(traj)
}
