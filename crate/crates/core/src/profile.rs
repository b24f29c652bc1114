//! Recovery of the metric profile `(f, g, h_s, h, S)` as functions of the
//! arclength `s` from a forward trajectory.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SolitonError};
use crate::forward::Trajectory;
use crate::picard::PicardResult;
use crate::quad::{bracket, first_derivative_weights, hermite, linear_fit};
use crate::report::{ReportEntry, Status, VerificationReport};
use crate::soliton::{
    first_integral_residual, rhs_nonlin1, FirstIntegralContext, PhaseState, SolitonParams,
};

/// Below this `Y` the ratio `(1 - dX - Z)/ℒ` is replaced by its leading
/// term `(Λ/2λ)·Y`.
pub const Y_SWITCH: f64 = 1e-5;
pub const DEFAULT_RESAMPLE: usize = 2048;

/// One row of the profile. The `*_s` fields are exact `s`-derivatives used
/// for Hermite interpolation; they are not part of the CSV output.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileSample {
    pub s: f64,
    pub t: f64,
    pub f: f64,
    pub g: f64,
    pub h_s: f64,
    pub h: f64,
    pub scalar: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub w: f64,
    pub l: f64,
    pub fi_residual: f64,
    pub kahler_residual: f64,
    #[serde(skip)]
    pub deriv: SampleDerivs,
}

/// `d/ds` of the interpolated columns.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SampleDerivs {
    pub t: f64,
    pub f: f64,
    pub g: f64,
    pub h_ss: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub w: f64,
    pub l: f64,
}

/// Values measured at the first native sample (the closest to `s = 0`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClosingValues {
    pub s: f64,
    pub f: f64,
    pub f_s: f64,
    pub g: f64,
    pub g_s: f64,
    pub h_s: f64,
    pub w_over_y2: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricProfile {
    pub params: SolitonParams,
    pub ctx: FirstIntegralContext,
    /// One sample per trajectory point.
    pub native: Vec<ProfileSample>,
    /// Equidistant resampling in `s` for output.
    pub samples: Vec<ProfileSample>,
    pub closing: ClosingValues,
}

/// `f_ss/f` and `g_ss/g` from the soliton equations in phase variables.
pub fn second_derivative_ratios(p: &SolitonParams, st: &PhaseState) -> (f64, f64) {
    let (d, a2, a3) = (p.df(), p.a2(), p.a3());
    let l2 = st.l * st.l;
    let fss = (st.z * st.z - st.z + a3 * st.w * st.w) / l2;
    let gss = (st.x * st.x - st.x + (a2 / d) * st.y * st.y - 2.0 * (a3 / d) * st.w * st.w) / l2;
    (fss, gss)
}

/// `-(d+2)/2·q·f - g_s·g`, zero exactly on Kähler profiles.
pub fn kahler_defect(p: &SolitonParams, f: f64, g: f64, g_s: f64) -> f64 {
    -(p.df() + 2.0) / 2.0 * p.q() * f - g_s * g
}

/// Profile row of a single phase state, derivatives included; `h` is left
/// at zero.
pub fn sample_from_state(
    p: &SolitonParams,
    ctx: &FirstIntegralContext,
    st: &PhaseState,
) -> Result<ProfileSample> {
    if !(st.l > 0.0) {
        return Err(SolitonError::CorruptTrajectory(format!(
            "ℒ = {} is not positive at t = {}",
            st.l, st.t
        )));
    }
    if !(st.y > 0.0) {
        return Err(SolitonError::CorruptTrajectory(format!(
            "Y = {} is not positive at t = {}",
            st.y, st.t
        )));
    }
    let d = p.df();
    let g = st.g();
    let h_s = if st.y < Y_SWITCH {
        ctx.big_lambda / (2.0 * ctx.lambda) * st.y
    } else {
        (1.0 - d * st.x - st.z) / st.l
    };
    let g_s = st.x / st.y;
    // Below the switch, h_ss is the s-derivative of the substitute h_s.
    let h_ss = if st.y < Y_SWITCH {
        ctx.big_lambda / (2.0 * ctx.lambda) * (d * st.x * st.x + st.z * st.z - st.x) / g
    } else {
        let (fss, gss) = second_derivative_ratios(p, st);
        -fss - d * gss
    };
    let tan = rhs_nonlin1(p, st)?;
    let inv_l = 1.0 / st.l;
    Ok(ProfileSample {
        s: st.s,
        t: st.t,
        f: st.f,
        g,
        h_s,
        h: 0.0,
        scalar: ctx.c - h_s * h_s,
        x: st.x,
        y: st.y,
        z: st.z,
        w: st.w,
        l: st.l,
        fi_residual: first_integral_residual(p, st, ctx),
        kahler_residual: kahler_defect(p, st.f, g, g_s),
        deriv: SampleDerivs {
            t: inv_l,
            f: st.z * st.w / (st.y * st.y),
            g: g_s,
            h_ss,
            x: tan.x * inv_l,
            y: tan.y * inv_l,
            z: tan.z * inv_l,
            w: tan.w * inv_l,
            l: tan.l * inv_l,
        },
    })
}

/// Converts a trajectory into the profile.
///
/// `h` is accumulated with the Hermite rule using the exact `h_ss`, starting
/// from `h(s₀) = h_s(s₀)·s₀/2` (`h_s` is linear in `s` near the zero section).
pub fn recover_profile(traj: &Trajectory, ctx: &FirstIntegralContext) -> Result<MetricProfile> {
    recover_profile_with(traj, ctx, DEFAULT_RESAMPLE)
}

pub fn recover_profile_with(
    traj: &Trajectory,
    ctx: &FirstIntegralContext,
    resample: usize,
) -> Result<MetricProfile> {
    let p = &traj.params;
    let mut native = traj
        .samples
        .iter()
        .map(|st| sample_from_state(p, ctx, st))
        .collect::<Result<Vec<_>>>()?;
    if native.len() < 2 {
        return Err(SolitonError::CorruptTrajectory(
            "fewer than two samples".into(),
        ));
    }
    if let Some(k) = native.windows(2).position(|w| !(w[1].s > w[0].s)) {
        return Err(SolitonError::CorruptTrajectory(format!(
            "s is not strictly increasing at sample {k}"
        )));
    }
    native[0].h = 0.5 * native[0].h_s * native[0].s;
    for k in 1..native.len() {
        let (a, b) = (native[k - 1], native[k]);
        let hs = b.s - a.s;
        native[k].h =
            a.h + 0.5 * hs * (a.h_s + b.h_s) + hs * hs / 12.0 * (a.deriv.h_ss - b.deriv.h_ss);
    }
    let first = native[0];
    let closing = ClosingValues {
        s: first.s,
        f: first.f,
        f_s: first.deriv.f,
        g: first.g,
        g_s: first.deriv.g,
        h_s: first.h_s,
        w_over_y2: first.w / (first.y * first.y),
    };
    let samples = resample_uniform(p, ctx, &native, resample);
    Ok(MetricProfile {
        params: *p,
        ctx: *ctx,
        native,
        samples,
        closing,
    })
}

/// Hermite interpolation of every column at `s` (clamped to the range).
pub fn interpolate(
    p: &SolitonParams,
    ctx: &FirstIntegralContext,
    native: &[ProfileSample],
    s: f64,
) -> ProfileSample {
    let xs: Vec<f64> = native.iter().map(|n| n.s).collect();
    interpolate_sorted(p, ctx, native, &xs, s)
}

pub(crate) fn interpolate_sorted(
    p: &SolitonParams,
    ctx: &FirstIntegralContext,
    native: &[ProfileSample],
    xs: &[f64],
    s: f64,
) -> ProfileSample {
    let s = s.clamp(xs[0], xs[xs.len() - 1]);
    let k = bracket(xs, s);
    let (a, b) = (&native[k], &native[k + 1]);
    let hi = |va: f64, vb: f64, da: f64, db: f64| hermite(a.s, b.s, va, vb, da, db, s);
    let (t, dt) = hi(a.t, b.t, a.deriv.t, b.deriv.t);
    let (f, df) = hi(a.f, b.f, a.deriv.f, b.deriv.f);
    let (g, dg) = hi(a.g, b.g, a.deriv.g, b.deriv.g);
    let (h_s, dhs) = hi(a.h_s, b.h_s, a.deriv.h_ss, b.deriv.h_ss);
    let (h, _) = hi(a.h, b.h, a.h_s, b.h_s);
    let (x, dx) = hi(a.x, b.x, a.deriv.x, b.deriv.x);
    let (y, dy) = hi(a.y, b.y, a.deriv.y, b.deriv.y);
    let (z, dz) = hi(a.z, b.z, a.deriv.z, b.deriv.z);
    let (w, dw) = hi(a.w, b.w, a.deriv.w, b.deriv.w);
    let (l, dl) = hi(a.l, b.l, a.deriv.l, b.deriv.l);
    let st = PhaseState {
        t,
        x,
        y,
        z,
        w,
        lng: g.ln(),
        s,
        f,
        l,
    };
    ProfileSample {
        s,
        t,
        f,
        g,
        h_s,
        h,
        scalar: ctx.c - h_s * h_s,
        x,
        y,
        z,
        w,
        l,
        fi_residual: first_integral_residual(p, &st, ctx),
        kahler_residual: kahler_defect(p, f, g, dg),
        deriv: SampleDerivs {
            t: dt,
            f: df,
            g: dg,
            h_ss: dhs,
            x: dx,
            y: dy,
            z: dz,
            w: dw,
            l: dl,
        },
    }
}

fn resample_uniform(
    p: &SolitonParams,
    ctx: &FirstIntegralContext,
    native: &[ProfileSample],
    n: usize,
) -> Vec<ProfileSample> {
    if n < 2 {
        return native.to_vec();
    }
    let xs: Vec<f64> = native.iter().map(|a| a.s).collect();
    let (s0, s1) = (xs[0], xs[xs.len() - 1]);
    (0..n)
        .map(|j| {
            let s = if j == n - 1 {
                s1
            } else {
                s0 + (s1 - s0) * j as f64 / (n - 1) as f64
            };
            interpolate_sorted(p, ctx, native, &xs, s)
        })
        .collect()
}

/// Least-squares `a + b·s²` fit of `ratio` over native samples selected by
/// `keep`; returns the intercept and the number of samples used.
fn closing_fit<F, K>(native: &[ProfileSample], ratio: F, keep: K) -> (f64, usize)
where
    F: Fn(&ProfileSample) -> f64,
    K: Fn(&ProfileSample) -> bool,
{
    let sel: Vec<&ProfileSample> = native.iter().filter(|a| keep(a)).collect();
    if sel.len() < 3 {
        return (f64::NAN, sel.len());
    }
    let x: Vec<f64> = sel.iter().map(|a| a.s * a.s).collect();
    let y: Vec<f64> = sel.iter().map(|a| ratio(a)).collect();
    (linear_fit(&x, &y).1, sel.len())
}

/// Smooth-closing limits at the zero section.
pub fn closing_report(prof: &MetricProfile, res: &PicardResult) -> VerificationReport {
    let p = &prof.params;
    let ctx = &prof.ctx;
    let (d, a2) = (p.df(), p.a2());
    let lambda = ctx.lambda;
    let native = &prof.native;
    let mut r = VerificationReport::new();

    let wy2 = res.limit_wy2;
    r.push(
        ReportEntry::check(
            "closing_w_over_y2",
            (wy2 - 1.0).abs() <= 1e-6,
            "metric closes smoothly iff lim W/Y² = 1",
        )
        .with("limit", wy2)
        .with("first_sample", prof.closing.w_over_y2)
        .tol(1e-6),
    );
    r.push(
        ReportEntry::check(
            "closing_one_minus_z_over_y2",
            (res.limit_1mzy2 - ctx.gamma).abs() <= 1e-6,
            "lim (1 - Z)/Y² = (Λ + A₂)/2",
        )
        .with("limit", res.limit_1mzy2)
        .with("expected", ctx.gamma)
        .tol(1e-6),
    );
    r.push(
        ReportEntry::check(
            "closing_x_over_y2",
            (res.limit_xy2 - p.x_over_y2_limit()).abs() <= 1e-5,
            "lim X/Y² = A₂/(2d)",
        )
        .with("limit", res.limit_xy2)
        .with("expected", p.x_over_y2_limit())
        .tol(1e-5),
    );

    let s0 = native[0].s;
    let (gs_f, n1) = closing_fit(native, |a| a.deriv.g / a.f, |a| a.s <= 10.0 * s0);
    let want = a2 / (2.0 * d * lambda);
    r.push(
        ReportEntry::check(
            "closing_gs_over_f",
            (gs_f - want).abs() <= 1e-3,
            "lim g_s/f = A₂/(2dλ)",
        )
        .with("limit", gs_f)
        .with("expected", want)
        .with("samples", n1 as f64)
        .tol(1e-3),
    );
    let upper = 10.0 * Y_SWITCH;
    let (hs_gs, n2) = closing_fit(
        native,
        |a| a.h_s / a.deriv.g,
        |a| a.y >= Y_SWITCH && a.y <= upper && a.t < 0.0,
    );
    let want = d * ctx.c * lambda / a2;
    r.push(
        ReportEntry::check(
            "closing_hs_over_gs",
            (hs_gs - want).abs() <= 1e-3,
            "lim h_s/g_s = d𝒞λ/A₂",
        )
        .with("limit", hs_gs)
        .with("expected", want)
        .with("samples", n2 as f64)
        .tol(1e-3),
    );
    let (hs_f, _) = closing_fit(native, |a| a.h_s / a.f, |a| a.s <= 10.0 * s0);
    let half = ctx.c / 2.0;
    let over_lambda = ctx.c / lambda;
    let matches = match (
        (hs_f - half).abs() <= 1e-3 * half,
        (hs_f - over_lambda).abs() <= 1e-3 * over_lambda,
    ) {
        (true, true) => "matches both 𝒞/2 and 𝒞/λ (λ = 2)",
        (true, false) => "matches 𝒞/2",
        (false, true) => "matches 𝒞/λ",
        (false, false) => "matches neither candidate",
    };
    r.push(
        ReportEntry::new(
            "closing_hs_over_f",
            Status::ReportOnly,
            "finite limit of h_s/f at the zero section",
        )
        .with("limit", hs_f)
        .with("c_over_2", half)
        .with("c_over_lambda", over_lambda)
        .detail(matches),
    );
    r
}

/// Structural properties of the recovered profile.
pub fn profile_invariants(prof: &MetricProfile, complete: bool) -> VerificationReport {
    let c = prof.ctx.c;
    let n = &prof.native;
    let mut r = VerificationReport::new();

    let identity = n
        .iter()
        .chain(&prof.samples)
        .map(|a| (a.scalar + a.h_s * a.h_s - c).abs())
        .fold(0.0, f64::max);
    r.push(
        ReportEntry::check(
            "scalar_identity",
            identity <= 1e-12 * c.max(1.0),
            "S + h_s² = 𝒞",
        )
        .with("max_error", identity)
        .tol(1e-12),
    );
    let s_min = n.iter().map(|a| a.scalar).fold(f64::INFINITY, f64::min);
    let s_max_idx = n
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.scalar.total_cmp(&b.1.scalar))
        .map_or(0, |(k, _)| k);
    r.push(
        ReportEntry::new(
            "scalar_bounds",
            match (
                complete,
                s_min >= 0.0 && n[s_max_idx].scalar <= c && (n[0].scalar - c).abs() <= 1e-8,
            ) {
                (false, _) => Status::ReportOnly,
                (true, true) => Status::Pass,
                (true, false) => Status::Fail,
            },
            "0 <= S <= 𝒞 with the maximum at the zero section on complete solitons",
        )
        .with("min", s_min)
        .with("first", n[0].scalar)
        .with("c", c)
        .with("argmax_s", n[s_max_idx].s),
    );
    r.push(
        ReportEntry::check(
            "g_at_zero_section",
            (prof.closing.g - prof.ctx.lambda).abs() <= 1e-6,
            "g -> λ at the zero section",
        )
        .with("value", prof.closing.g)
        .tol(1e-6),
    );
    r.push(
        ReportEntry::check(
            "fs_hs_at_zero_section",
            (prof.closing.f_s - 1.0).abs() <= 1e-4 && prof.closing.h_s.abs() <= 1e-4,
            "f_s -> 1 and h_s -> 0 at the zero section",
        )
        .with("f_s", prof.closing.f_s)
        .with("h_s", prof.closing.h_s)
        .tol(1e-4),
    );
    let cross = n
        .iter()
        .map(|a| (a.f / a.g - a.w / a.y).abs())
        .fold(0.0, f64::max);
    r.push(
        ReportEntry::check(
            "f_over_g_matches_w_over_y",
            cross < 1e-6,
            "f/g = W/Y along the flow",
        )
        .with("sup", cross)
        .tol(1e-6),
    );
    let fd = fd_gs_error(n);
    r.push(
        ReportEntry::check("gs_two_ways", fd < 1e-5, "g_s = X/Y agrees with dg/ds")
            .with("sup", fd)
            .tol(1e-5),
    );
    let hs_pos = n.iter().all(|a| a.h_s > 0.0);
    r.push(ReportEntry::new(
        "hs_positive",
        match (complete, hs_pos) {
            (false, _) => Status::ReportOnly,
            (true, true) => Status::Pass,
            (true, false) => Status::Fail,
        },
        "h_s > 0 for s > 0 on complete solitons",
    ));
    r
}

/// Largest difference between `X/Y` and a five-point finite-difference
/// derivative of `g(s)`, relative to `max(1, |g_s|)`.
fn fd_gs_error(n: &[ProfileSample]) -> f64 {
    let mut worst: f64 = 0.0;
    for k in 2..n.len().saturating_sub(2) {
        let xs: Vec<f64> = n[k - 2..=k + 2].iter().map(|a| a.s).collect();
        let w = first_derivative_weights(n[k].s, &xs);
        let fd: f64 = w.iter().zip(&n[k - 2..=k + 2]).map(|(w, a)| w * a.g).sum();
        worst = worst.max((fd - n[k].deriv.g).abs() / n[k].deriv.g.abs().max(1.0));
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::soliton::make_params;

    #[test]
    fn kahler_defect_example() {
        let p = make_params(2, -1.0).unwrap();
        assert_eq!(kahler_defect(&p, 1.0, 1.0, 0.0), 2.0);
    }

    #[test]
    fn corrupt_l_rejected() {
        let p = make_params(2, -1.0).unwrap();
        let ctx = FirstIntegralContext::new(&p, 40.0, 1.0).unwrap();
        let st = PhaseState {
            t: 0.0,
            x: 0.1,
            y: 0.1,
            z: 0.5,
            w: 0.01,
            lng: 0.0,
            s: 1.0,
            f: 0.1,
            l: 0.0,
        };
        assert!(matches!(
            sample_from_state(&p, &ctx, &st),
            Err(SolitonError::CorruptTrajectory(_))
        ));
    }
}
