//! Invariant and certificate checks on a forward trajectory.

use crate::quad::{hermite_cumulative, linear_fit};
use crate::report::{ReportEntry, Status, VerificationReport};
use crate::soliton::{FirstIntegralContext, PhaseState, SolitonParams};

use super::{Outcome, Trajectory};

const DXZ_TOL: f64 = 1e-9;
const WY2_TOL: f64 = 1e-9;
const BAR_TOL: f64 = 1e-6;

/// Smallest `Λ` for which `2^{2/3}√(3/Λ) ≤ √(A₂/(A₃(d+2)))`, i.e.
/// `Λ₀ = 3·2^{4/3}·A₃(d+2)/A₂`.
pub fn lambda0_threshold(p: &SolitonParams) -> f64 {
    3.0 * 2f64.powf(4.0 / 3.0) * p.a3() * (p.df() + 2.0) / p.a2()
}

/// First index where a series that went negative returns to `>= 0`.
fn sign_return(values: impl Iterator<Item = f64>) -> (Option<usize>, Option<usize>) {
    let mut first_neg = None;
    for (k, v) in values.enumerate() {
        match first_neg {
            None if v < 0.0 => first_neg = Some(k),
            Some(_) if v >= 0.0 => return (first_neg, Some(k)),
            _ => {}
        }
    }
    (first_neg, None)
}

/// Once `X < 0` it stays negative; likewise for `Z - X`.
pub fn check_sign_invariance_samples(samples: &[PhaseState]) -> ReportEntry {
    let (x_neg, x_ret) = sign_return(samples.iter().map(|s| s.x));
    let (zx_neg, zx_ret) = sign_return(samples.iter().map(|s| s.z - s.x));
    let mut e = ReportEntry::check(
        "sign_invariance",
        x_ret.is_none() && zx_ret.is_none(),
        "negativity of X and of Z - X is forward invariant",
    );
    let t_of = |k: Option<usize>| k.map_or(f64::NAN, |k| samples[k].t);
    e = e
        .with("x_first_negative_t", t_of(x_neg))
        .with("z_minus_x_first_negative_t", t_of(zx_neg));
    if let Some(k) = x_ret {
        e = e
            .with("x_return_index", k as f64)
            .detail(format!("X returned to >= 0 at sample {k}"));
    }
    if let Some(k) = zx_ret {
        e = e
            .with("z_minus_x_return_index", k as f64)
            .detail(format!("Z - X returned to >= 0 at sample {k}"));
    }
    if x_neg.is_none() && zx_neg.is_none() {
        e = e.detail("vacuous: neither quantity became negative");
    }
    e
}

pub fn check_sign_invariance(traj: &Trajectory) -> ReportEntry {
    check_sign_invariance_samples(&traj.samples)
}

pub fn check_dxplusz_samples(d: f64, samples: &[PhaseState]) -> ReportEntry {
    let max = samples
        .iter()
        .map(|s| d * s.x + s.z)
        .fold(f64::NEG_INFINITY, f64::max);
    ReportEntry::check(
        "dx_plus_z",
        max <= 1.0 + DXZ_TOL,
        "dX + Z <= 1 along the flow",
    )
    .with("max", max)
    .tol(DXZ_TOL)
}

pub fn check_dxplusz(traj: &Trajectory) -> ReportEntry {
    check_dxplusz_samples(traj.params.df(), &traj.samples)
}

/// `W²/Y² <= A₂/(A₃(d+2))`; asserted only at or above `lambda0`.
pub fn check_w_bound(traj: &Trajectory, lambda0: f64) -> ReportEntry {
    let asserted = traj.ctx.big_lambda >= lambda0;
    let margin = traj.min_wy2_margin;
    let status = match (asserted, margin >= -WY2_TOL) {
        (false, _) => Status::ReportOnly,
        (true, true) => Status::Pass,
        (true, false) => Status::Fail,
    };
    let max_ratio = traj.params.w_bound() - margin;
    ReportEntry::new(
        "w_over_y_bound",
        status,
        "W²/Y² stays below A₂/(A₃(d+2)) when Λ >= Λ₀",
    )
    .with("bound", traj.params.w_bound())
    .with("max_w2_over_y2", max_ratio)
    .with("min_margin", margin)
    .with("lambda0", lambda0)
    .tol(WY2_TOL)
}

/// `ℒ` strictly increasing across all samples.
pub fn check_l_monotone(traj: &Trajectory) -> ReportEntry {
    let bad = traj.samples.windows(2).position(|w| !(w[1].l > w[0].l));
    let mut e = ReportEntry::check(
        "l_increasing",
        bad.is_none(),
        "ℒ = gY is strictly increasing",
    );
    if let Some(k) = bad {
        e = e.detail(format!(
            "ℒ fails to increase between samples {k} and {}",
            k + 1
        ));
    }
    e
}

/// Exponential rates of the germ on `t ∈ [-12, -6]` and boundedness of
/// `X/Y²` over the germ.
pub fn germ_rates(traj: &Trajectory) -> VerificationReport {
    let p = &traj.params;
    let germ = &traj.samples[..traj.germ_len.min(traj.samples.len())];
    let window: Vec<&PhaseState> = germ
        .iter()
        .filter(|s| s.t >= -12.0 && s.t <= -6.0)
        .collect();
    let mut r = VerificationReport::new();
    let anchor = "germ decays like Y ~ e^t and X, W, 1 - Z, ℒ² ~ e^{2t}";
    if window.len() < 4 {
        r.push(
            ReportEntry::new("germ_rates", Status::Fail, anchor)
                .detail("fewer than four germ samples in t ∈ [-12, -6]"),
        );
        return r;
    }
    let t: Vec<f64> = window.iter().map(|s| s.t).collect();
    let rate = |f: &dyn Fn(&PhaseState) -> f64| {
        let y: Vec<f64> = window.iter().map(|s| f(s).ln()).collect();
        linear_fit(&t, &y).0
    };
    let series: [(&str, f64, f64); 5] = [
        ("y", rate(&|s| s.y), 1.0),
        ("x", rate(&|s| s.x), 2.0),
        ("w", rate(&|s| s.w), 2.0),
        ("one_minus_z", rate(&|s| 1.0 - s.z), 2.0),
        ("l_squared", rate(&|s| s.l * s.l), 2.0),
    ];
    for (name, got, want) in series {
        let rel = (got / want - 1.0).abs();
        r.push(
            ReportEntry::check(format!("germ_rate_{name}"), rel <= 0.05, anchor)
                .with("rate", got)
                .with("expected", want)
                .tol(0.05),
        );
    }
    let max_xy2 = germ
        .iter()
        .map(|s| s.x / (s.y * s.y))
        .fold(f64::NEG_INFINITY, f64::max);
    let cap = 2.0 * p.a2() / p.df();
    r.push(
        ReportEntry::check(
            "germ_x_over_y2_bounded",
            max_xy2 < cap,
            "X/Y² stays bounded on the germ",
        )
        .with("max", max_xy2)
        .with("cap", cap),
    );
    r
}

/// `t̄(t) = ∫_{-∞}^t Y` at every sample. The head before the first sample is
/// `Y(t_first)`, exact for `Y ∝ e^t`.
pub fn bar_time(traj: &Trajectory) -> Vec<f64> {
    let p = &traj.params;
    let d = p.df();
    let t: Vec<f64> = traj.samples.iter().map(|s| s.t).collect();
    let y: Vec<f64> = traj.samples.iter().map(|s| s.y).collect();
    let dy: Vec<f64> = traj
        .samples
        .iter()
        .map(|s| s.y * (d * s.x * s.x + s.z * s.z - s.x))
        .collect();
    hermite_cumulative(&t, &y, &dy, y[0])
}

/// Checks the rescaled-variable facts (`X̄ = X/Y`, `Ȳ = 1/Y`, ...,
/// `t̄ = ∫Y`) on the span where `W²/Y²` has not yet exceeded its bound.
///
/// Assertions apply only for `Λ >= Λ₀`; below the threshold every entry is
/// report-only. Monotonicity of `W̄` is asserted only when the bound is
/// crossed, since it is derived from the crossing itself.
pub fn bar_diagnostics(traj: &Trajectory, ctx: &FirstIntegralContext) -> VerificationReport {
    let p = &traj.params;
    let d = p.df();
    let big = ctx.big_lambda;
    let asserted = big >= lambda0_threshold(p);
    let status = |ok: bool| match (asserted, ok) {
        (false, _) => Status::ReportOnly,
        (true, true) => Status::Pass,
        (true, false) => Status::Fail,
    };
    let tbar = bar_time(traj);
    let bound = p.w_bound();
    let crossing = traj
        .samples
        .iter()
        .position(|s| (s.w / s.y).powi(2) > bound);
    let end = crossing.map_or(traj.samples.len(), |k| k + 1);
    let span = &traj.samples[..end];
    let tb = &tbar[..end];
    let mut r = VerificationReport::new();

    let k = (big / 3.0).sqrt();
    let rate = (3.0 * big).sqrt() / 2.0;
    let tanh_excess = span
        .iter()
        .zip(tb)
        .map(|(s, &t)| (s.z - 1.0) / s.y + k * (rate * t).tanh())
        .fold(f64::NEG_INFINITY, f64::max);
    r.push(
        ReportEntry::new(
            "bar_tanh_bound",
            status(tanh_excess <= BAR_TOL),
            "Z̄ - Ȳ <= -√(Λ/3)·tanh(√(3Λ)/2·t̄)",
        )
        .with("max_excess", tanh_excess)
        .tol(BAR_TOL),
    );

    let w_cap = 2f64.powf(2.0 / 3.0) * (3.0 / big).sqrt();
    let w_sup = span
        .iter()
        .map(|s| s.w / s.y)
        .fold(f64::NEG_INFINITY, f64::max);
    r.push(
        ReportEntry::new(
            "bar_w_sup",
            status(w_sup <= w_cap + BAR_TOL),
            "sup W̄ <= 2^{2/3}√(3/Λ)",
        )
        .with("sup", w_sup)
        .with("cap", w_cap)
        .tol(BAR_TOL),
    );

    let first = &span[0];
    let w_bar0 = first.w / first.y;
    r.push(
        ReportEntry::new(
            "bar_w_at_start",
            status(w_bar0.abs() <= 1e-4),
            "W̄ -> 0 as t̄ -> 0",
        )
        .with("value", w_bar0)
        .with("tbar", tb[0])
        .tol(1e-4),
    );
    let w_bar_rate0 = first.w * (first.z - first.x) / (first.y * first.y);
    r.push(
        ReportEntry::new(
            "bar_w_rate_at_start",
            status((w_bar_rate0 - 1.0).abs() <= 1e-4),
            "dW̄/dt̄ -> 1 as t̄ -> 0",
        )
        .with("value", w_bar_rate0)
        .tol(1e-4),
    );
    let min_w = span.iter().map(|s| s.w).fold(f64::INFINITY, f64::min);
    let min_x_bar = span.iter().map(|s| s.x / s.y).fold(f64::INFINITY, f64::min);
    r.push(
        ReportEntry::new("bar_w_nonnegative", status(min_w >= 0.0), "W̄ >= 0").with("min", min_w),
    );
    r.push(
        ReportEntry::new("bar_x_nonnegative", status(min_x_bar >= -BAR_TOL), "X̄ >= 0")
            .with("min", min_x_bar)
            .tol(BAR_TOL),
    );
    let min_zx = span.iter().map(|s| s.z - s.x).fold(f64::INFINITY, f64::min);
    let w_rate_status = if crossing.is_some() {
        status(min_zx >= -BAR_TOL)
    } else {
        Status::ReportOnly
    };
    r.push(
        ReportEntry::new(
            "bar_w_increasing",
            w_rate_status,
            "dW̄/dt̄ = W̄(Z̄ - X̄) >= 0 up to the first crossing",
        )
        .with("min_z_minus_x", min_zx)
        .detail(if crossing.is_some() {
            "bound crossed; checked up to the crossing"
        } else {
            "no crossing; monotonicity is only implied up to a crossing"
        }),
    );
    let max_dxz = span
        .iter()
        .map(|s| d * s.x + s.z - 1.0)
        .fold(f64::NEG_INFINITY, f64::max);
    r.push(
        ReportEntry::new("bar_dx_plus_z", status(max_dxz <= DXZ_TOL), "dX̄ + Z̄ <= Ȳ")
            .with("max_excess", max_dxz)
            .tol(DXZ_TOL),
    );
    let max_z = span
        .iter()
        .map(|s| s.z - 1.0)
        .fold(f64::NEG_INFINITY, f64::max);
    r.push(
        ReportEntry::new("bar_z_below_y", status(max_z <= DXZ_TOL), "Z̄ <= Ȳ")
            .with("max_excess", max_z)
            .tol(DXZ_TOL),
    );
    let worst_drop = span
        .windows(2)
        .map(|w| (w[0].g() - w[1].g()) / w[0].g())
        .fold(f64::NEG_INFINITY, f64::max);
    r.push(
        ReportEntry::new(
            "bar_l_nondecreasing",
            status(worst_drop <= 1e-12),
            "ℒ̄ = g is nondecreasing in t̄",
        )
        .with("max_relative_drop", worst_drop)
        .tol(1e-12),
    );
    let l_bar0 = first.g();
    r.push(
        ReportEntry::new(
            "bar_l_at_start",
            status((l_bar0 - ctx.lambda).abs() <= 1e-4),
            "ℒ̄ -> λ as t̄ -> 0",
        )
        .with("value", l_bar0)
        .with("lambda", ctx.lambda)
        .tol(1e-4),
    );
    r.push(
        ReportEntry::new(
            "bar_z_minus_y_at_start",
            status(((first.z - 1.0) / first.y).abs() <= 1e-4),
            "Z̄ - Ȳ -> 0 as t̄ -> 0",
        )
        .with("value", (first.z - 1.0) / first.y)
        .tol(1e-4),
    );
    if traj.outcome != Outcome::ConvergedToOrigin {
        r.entries.iter_mut().for_each(|e| {
            if e.status == Status::Pass {
                e.detail = Some(format!("trajectory outcome {:?}", traj.outcome));
            }
        });
    }
    r
}
