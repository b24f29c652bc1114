//! Geometric diagnostics on a recovered profile: Ricci sign, Kähler
//! condition, `∇J`, end asymptotics and completeness.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SolitonError};
use crate::forward::{lambda0_threshold, Outcome, Trajectory};
use crate::profile::{kahler_defect, MetricProfile, ProfileSample};
use crate::report::{ReportEntry, Status};
use crate::soliton::SolitonParams;

pub const RICCI_TOL: f64 = -1e-10;
pub const KAHLER_TOL: f64 = 1e-6;

/// Minima of the three Hessian components `h_ss`, `f_s h_s/f`, `g_s h_s/g`.
pub fn ricci_sign_report(prof: &MetricProfile) -> ReportEntry {
    ricci_sign_samples(&prof.native)
}

pub fn ricci_sign_samples(samples: &[ProfileSample]) -> ReportEntry {
    let mut mins = [f64::INFINITY; 3];
    for a in samples {
        let vals = [
            a.deriv.h_ss,
            a.deriv.f * a.h_s / a.f,
            a.deriv.g * a.h_s / a.g,
        ];
        for (m, v) in mins.iter_mut().zip(vals) {
            *m = m.min(v);
        }
    }
    let ok = mins.iter().all(|m| *m >= RICCI_TOL);
    ReportEntry::check(
        "ricci_nonnegative",
        ok,
        "Hessian of h (= Ricci) is nonnegative",
    )
    .with("min_h_ss", mins[0])
    .with("min_fs_hs_over_f", mins[1])
    .with("min_gs_hs_over_g", mins[2])
    .tol(RICCI_TOL.abs())
}

pub const TRACE_TOL: f64 = 1e-6;

/// `h_ss + (f_s/f + d·g_s/g)·h_s` (the trace of the Hessian, i.e. the
/// scalar curvature) against `S = 𝒞 - h_s²`, relative to `max(1, 𝒞)`.
pub fn ricci_trace_report(prof: &MetricProfile) -> ReportEntry {
    let d = prof.params.df();
    let err = prof
        .native
        .iter()
        .map(|a| {
            let trace = a.deriv.h_ss + (a.deriv.f / a.f + d * a.deriv.g / a.g) * a.h_s;
            (trace - a.scalar).abs()
        })
        .fold(0.0, f64::max)
        / prof.ctx.c.max(1.0);
    ReportEntry::check(
        "ricci_trace_is_scalar",
        err < TRACE_TOL,
        "the Hessian components summed with multiplicities give S",
    )
    .with("max_rel", err)
    .tol(TRACE_TOL)
}

/// `sup|-(d+2)/2·q·f - g_s·g| / max(1, sup|g_s·g|)` over the native samples.
pub fn kahler_residual_value(prof: &MetricProfile) -> f64 {
    kahler_residual_samples(&prof.params, &prof.native)
}

pub fn kahler_residual_samples(p: &SolitonParams, samples: &[ProfileSample]) -> f64 {
    let mut num: f64 = 0.0;
    let mut scale: f64 = 1.0;
    for a in samples {
        num = num.max(kahler_defect(p, a.f, a.g, a.deriv.g).abs());
        scale = scale.max((a.deriv.g * a.g).abs());
    }
    num / scale
}

/// Asserted only for `q = -1` profiles from the reduced pipeline.
pub fn kahler_residual(prof: &MetricProfile, from_reduced: bool) -> ReportEntry {
    let res = kahler_residual_value(prof);
    let asserted = from_reduced && prof.params.q() == -1.0;
    let status = match (asserted, res < KAHLER_TOL) {
        (false, _) => Status::ReportOnly,
        (true, true) => Status::Pass,
        (true, false) => Status::Fail,
    };
    ReportEntry::new("kahler_residual", status, "Kähler iff -(d+2)/2·q·f = g_s·g")
        .with("scaled_residual", res)
        .tol(KAHLER_TOL)
}

/// The four coefficient functions of `∇J` sampled on the profile.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NablaJ {
    pub s: Vec<f64>,
    pub coefficients: [Vec<f64>; 4],
    /// Sup norm of each coefficient divided by `max(1, sup of its
    /// natural scale)`.
    pub scaled_sup: [f64; 4],
}

impl NablaJ {
    pub fn max_scaled(&self) -> f64 {
        self.scaled_sup.iter().copied().fold(0.0, f64::max)
    }
}

pub fn nabla_j_coefficients(prof: &MetricProfile) -> Result<NablaJ> {
    nabla_j_samples(&prof.params, &prof.native)
}

pub fn nabla_j_samples(p: &SolitonParams, samples: &[ProfileSample]) -> Result<NablaJ> {
    let k = (p.df() + 2.0) / 2.0 * p.q();
    let mut s = Vec::with_capacity(samples.len());
    let mut c: [Vec<f64>; 4] = Default::default();
    let mut sup = [0.0f64; 4];
    let mut scale = [1.0f64; 4];
    for a in samples {
        if !(a.f > 0.0) {
            return Err(SolitonError::Domain(format!("f = {} at s = {}", a.f, a.s)));
        }
        let (f, g, gs) = (a.f, a.g, a.deriv.g);
        let vals = [
            -k * f / (g * g) - gs / g,
            f * gs / g + k * f * f / (g * g),
            -gs * g - k * f,
            -gs * g / f - k,
        ];
        let scales = [gs / g, f * gs / g, gs * g, gs * g / f];
        s.push(a.s);
        for i in 0..4 {
            c[i].push(vals[i]);
            sup[i] = sup[i].max(vals[i].abs());
            scale[i] = scale[i].max(scales[i].abs());
        }
    }
    Ok(NablaJ {
        s,
        coefficients: c,
        scaled_sup: std::array::from_fn(|i| sup[i] / scale[i]),
    })
}

pub fn nabla_j_report(prof: &MetricProfile, from_reduced: bool) -> Result<ReportEntry> {
    let nj = nabla_j_coefficients(prof)?;
    let asserted = from_reduced && prof.params.q() == -1.0;
    let status = match (asserted, nj.max_scaled() < KAHLER_TOL) {
        (false, _) => Status::ReportOnly,
        (true, true) => Status::Pass,
        (true, false) => Status::Fail,
    };
    Ok(
        ReportEntry::new("nabla_j", status, "∇J vanishes exactly on Kähler profiles")
            .with("c1", nj.scaled_sup[0])
            .with("c2", nj.scaled_sup[1])
            .with("c3", nj.scaled_sup[2])
            .with("c4", nj.scaled_sup[3])
            .tol(KAHLER_TOL),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AsymptoticClass {
    Paraboloid,
    CigarParaboloid,
    Undetermined,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub class: AsymptoticClass,
    /// Relative variation `(max - min)/mean` over the final decade of `s`.
    pub g_sqrt_variation: f64,
    pub f_variation: f64,
    pub f_sqrt_variation: f64,
    pub s_max: f64,
}

const CLASS_TOL: f64 = 0.01;

fn variation(vals: impl Iterator<Item = f64>) -> f64 {
    let (mut lo, mut hi, mut sum, mut n) = (f64::INFINITY, f64::NEG_INFINITY, 0.0, 0usize);
    for v in vals {
        lo = lo.min(v);
        hi = hi.max(v);
        sum += v;
        n += 1;
    }
    if n < 2 {
        return f64::INFINITY;
    }
    (hi - lo) / (sum / n as f64).abs()
}

/// End geometry from the final decade of `s`: `g ~ √s` is required, then
/// `f ~ √s` gives a paraboloid and bounded `f` a cigar-paraboloid.
pub fn asymptotic_classifier(prof: &MetricProfile) -> Classification {
    let n = &prof.native;
    let s_max = n.last().map_or(0.0, |a| a.s);
    let tail: Vec<&ProfileSample> = n.iter().filter(|a| a.s >= 0.1 * s_max).collect();
    let g_var = variation(tail.iter().map(|a| a.g / a.s.sqrt()));
    let f_var = variation(tail.iter().map(|a| a.f));
    let fs_var = variation(tail.iter().map(|a| a.f / a.s.sqrt()));
    // Needs a final decade well separated from the curvature scale 1/√𝒞.
    let enough_range = s_max * prof.ctx.c.sqrt() >= 100.0 && tail.len() >= 8;
    let class = if !enough_range || !(g_var < CLASS_TOL) {
        AsymptoticClass::Undetermined
    } else if f_var < CLASS_TOL {
        AsymptoticClass::CigarParaboloid
    } else if fs_var < CLASS_TOL {
        AsymptoticClass::Paraboloid
    } else {
        AsymptoticClass::Undetermined
    };
    Classification {
        class,
        g_sqrt_variation: g_var,
        f_variation: f_var,
        f_sqrt_variation: fs_var,
        s_max,
    }
}

pub fn classifier_entry(c: &Classification) -> ReportEntry {
    ReportEntry::new(
        "asymptotic_class",
        Status::ReportOnly,
        "g ~ √s with f ~ √s (paraboloid) or f bounded (cigar-paraboloid)",
    )
    .with("g_over_sqrt_s_variation", c.g_sqrt_variation)
    .with("f_variation", c.f_variation)
    .with("f_over_sqrt_s_variation", c.f_sqrt_variation)
    .with("s_max", c.s_max)
    .tol(CLASS_TOL)
    .detail(format!("{:?}", c.class))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    ProvenComplete,
    ObservedOnly,
    Incomplete,
}

/// Completeness: convergence to the origin with the `W²/Y²` bound intact and
/// `ℒ → 1/√𝒞`; proven when additionally `Λ >= Λ₀`.
pub fn completeness_verdict(traj: &Trajectory, p: &SolitonParams) -> (Verdict, ReportEntry) {
    let lambda0 = lambda0_threshold(p);
    let l_scaled = traj.final_l_scaled();
    let observed = traj.outcome == Outcome::ConvergedToOrigin
        && traj.min_wy2_margin >= -1e-9
        && (l_scaled - 1.0).abs() <= 1e-4;
    let verdict = match (observed, traj.ctx.big_lambda >= lambda0) {
        (true, true) => Verdict::ProvenComplete,
        (true, false) => Verdict::ObservedOnly,
        (false, _) => Verdict::Incomplete,
    };
    let entry = ReportEntry::new(
        "completeness",
        Status::ReportOnly,
        "complete when 𝒞λ² >= Λ₀: flow reaches the origin and ℒ -> 1/√𝒞",
    )
    .with("final_l_sqrt_c", l_scaled)
    .with("min_wy2_margin", traj.min_wy2_margin)
    .with("lambda0", lambda0)
    .with("big_lambda", traj.ctx.big_lambda)
    .detail(format!("{verdict:?} (outcome {:?})", traj.outcome));
    (verdict, entry)
}
