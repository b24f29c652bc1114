//! End-to-end runs: construction, profile recovery and the full battery of
//! checks, assembled into one report.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::{Pipeline, RunConfig};
use crate::error::{Result, SolitonError};
use crate::forward::{
    bar_diagnostics, check_dxplusz, check_dxplusz_samples, check_l_monotone, check_sign_invariance,
    check_sign_invariance_samples, check_w_bound, germ_rates, integrate, lambda0_threshold,
    IntegrationOptions, Outcome, Trajectory,
};
use crate::geometry::{
    asymptotic_classifier, classifier_entry, completeness_verdict, kahler_residual,
    kahler_residual_samples, nabla_j_report, ricci_sign_report, ricci_sign_samples,
    ricci_trace_report, AsymptoticClass, Classification, Verdict, KAHLER_TOL,
};
use crate::io::{native_path, read_profile_csv, write_profile_csv, write_report_json};
use crate::kahler::{compare_profiles, shoot_reduced, target_slope, ProfileDeviation, ReducedRun};
use crate::picard::{germ_samples, iterate_to_fixed_point, PicardResult, SeedSpec, WeightedGrid};
use crate::profile::{
    closing_report, profile_invariants, recover_profile_with, sample_from_state, MetricProfile,
    ProfileSample,
};
use crate::quad::first_derivative_weights;
use crate::report::{ReportEntry, Status, VerificationReport};
use crate::soliton::{rhs_nonlin1, FirstIntegralContext, PhaseState, SolitonParams};

pub const DRIFT_TOL: f64 = 1e-8;
pub const CONTRACTION_TOL: f64 = 0.5;
pub const LIFT_FD_TOL: f64 = 1e-5;
const SLOPE_TOL: f64 = 1e-6;
const RATE_TOL: f64 = 0.05;
/// Resampled rows interpolate every column separately, so derived columns
/// agree with the phase variables only to interpolation accuracy.
const STORED_TOL: f64 = 1e-6;

/// Everything a run produced. Stages after a numerical failure are `None`;
/// the failure itself is a report entry.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub config: RunConfig,
    pub params: SolitonParams,
    pub ctx: FirstIntegralContext,
    pub picard: Option<PicardResult>,
    pub reduced: Option<ReducedRun>,
    pub trajectory: Option<Trajectory>,
    pub profile: Option<MetricProfile>,
    pub verdict: Option<Verdict>,
    pub classification: Option<Classification>,
    pub report: VerificationReport,
}

impl RunOutput {
    pub fn passed(&self) -> bool {
        self.report.all_pass()
    }
}

pub fn integration_options(cfg: &RunConfig) -> IntegrationOptions {
    IntegrationOptions {
        rtol: cfg.rtol,
        atol: cfg.atol,
        ..IntegrationOptions::default()
    }
}

/// Runs the pipeline selected in the config. Invalid input is an error;
/// numerical failures are recorded in the report.
pub fn run(cfg: &RunConfig) -> Result<RunOutput> {
    match cfg.pipeline {
        Pipeline::General => run_general(cfg),
        Pipeline::Kahler => run_kahler(cfg),
    }
}

fn stage_failure(stage: &str, e: &SolitonError) -> ReportEntry {
    ReportEntry::new(stage, Status::Fail, "pipeline stage completed").detail(e.to_string())
}

fn empty_output(cfg: &RunConfig, p: SolitonParams, ctx: FirstIntegralContext) -> RunOutput {
    RunOutput {
        config: cfg.clone(),
        params: p,
        ctx,
        picard: None,
        reduced: None,
        trajectory: None,
        profile: None,
        verdict: None,
        classification: None,
        report: VerificationReport::new(),
    }
}

fn picard_entries(res: &PicardResult, tol: f64) -> VerificationReport {
    let mut r = VerificationReport::new();
    let worst = res.contraction_ratios.iter().copied().fold(0.0, f64::max);
    r.push(
        ReportEntry::check(
            "picard_contraction",
            worst < CONTRACTION_TOL,
            "T_u is a contraction on the weighted ball",
        )
        .with("max_ratio", worst)
        .with("eps", res.seed.eps)
        .with("iterations", res.iterations as f64)
        .with("first_update", res.first_update)
        .tol(CONTRACTION_TOL),
    );
    r.push(
        ReportEntry::check(
            "picard_converged",
            res.final_update <= tol,
            "fixed point of T_u reached",
        )
        .with("final_update", res.final_update)
        .tol(tol),
    );
    r
}

fn outcome_entry(traj: &Trajectory, lambda0: f64) -> ReportEntry {
    // Below Λ₀ convergence is not guaranteed, but a run that does not reach
    // the origin produced no complete soliton either way.
    let status = if traj.outcome == Outcome::ConvergedToOrigin {
        Status::Pass
    } else {
        Status::Fail
    };
    let last = traj.last();
    let e = ReportEntry::new(
        "forward_outcome",
        status,
        "the flow reaches the origin when 𝒞λ² >= Λ₀",
    )
    .with("t_end", last.t)
    .with("final_norm", last.core_norm())
    .with("final_l_sqrt_c", traj.final_l_scaled())
    .with("lambda0", lambda0)
    .with("steps_accepted", traj.steps_accepted as f64);
    let mut detail = format!("{:?}", traj.outcome);
    if let Some(diag) = &traj.diagnostic {
        detail.push_str(&format!(": {diag}"));
    }
    if traj.ctx.big_lambda < lambda0 {
        detail.push_str(" (Λ below Λ₀; convergence is not guaranteed)");
    }
    e.detail(detail)
}

fn drift_entry(traj: &Trajectory) -> ReportEntry {
    let drift = traj.max_first_integral_drift;
    let status = if traj.outcome != Outcome::ConvergedToOrigin {
        Status::ReportOnly
    } else if drift < DRIFT_TOL {
        Status::Pass
    } else {
        Status::Fail
    };
    ReportEntry::new(
        "first_integral_drift",
        status,
        "first integral R vanishes along the flow",
    )
    .with("max_abs", drift)
    .tol(DRIFT_TOL)
}

/// Checks shared by both pipelines once a trajectory and its profile exist.
fn trajectory_and_profile_checks(out: &mut RunOutput, traj: &Trajectory, prof: &MetricProfile) {
    let p = &out.params;
    let lambda0 = lambda0_threshold(p);
    let from_reduced = out.reduced.is_some();
    let r = &mut out.report;
    r.push(outcome_entry(traj, lambda0));
    r.push(drift_entry(traj));
    r.push(check_sign_invariance(traj));
    r.push(check_dxplusz(traj));
    r.push(check_w_bound(traj, lambda0));
    r.push(check_l_monotone(traj));
    r.extend(bar_diagnostics(traj, &out.ctx));

    let (verdict, entry) = completeness_verdict(traj, p);
    let complete = verdict != Verdict::Incomplete;
    r.extend(profile_invariants(prof, complete));
    let mut ricci = ricci_sign_report(prof);
    if !complete && ricci.status == Status::Fail {
        ricci.status = Status::ReportOnly;
    }
    r.push(ricci);
    r.push(ricci_trace_report(prof));
    r.push(kahler_residual(prof, from_reduced));
    match nabla_j_report(prof, from_reduced) {
        Ok(e) => r.push(e),
        Err(e) => r.push(stage_failure("nabla_j", &e)),
    }
    let class = asymptotic_classifier(prof);
    r.push(classifier_entry(&class));
    r.push(g_growth_entry(&class, complete));
    r.push(entry);
    out.verdict = Some(verdict);
    out.classification = Some(class);
}

/// `g/√s` settles over the final decade on complete solitons.
fn g_growth_entry(c: &Classification, complete: bool) -> ReportEntry {
    let ok = c.g_sqrt_variation < 0.01;
    let status = match (complete, ok) {
        (false, _) => Status::ReportOnly,
        (true, true) => Status::Pass,
        (true, false) => Status::Fail,
    };
    ReportEntry::new(
        "g_over_sqrt_s_converges",
        status,
        "g grows like √s on a complete end",
    )
    .with("variation", c.g_sqrt_variation)
    .with("s_max", c.s_max)
    .tol(0.01)
}

/// Picard germ, forward flow, profile and all checks.
pub fn run_general(cfg: &RunConfig) -> Result<RunOutput> {
    let (p, ctx) = cfg.validate()?;
    let mut out = empty_output(cfg, p, ctx);
    let grid = WeightedGrid::graded(cfg.nodes, cfg.tmax_tilde)?;
    let spec = SeedSpec::for_context(&ctx, cfg.seed_eps);
    let res = match iterate_to_fixed_point(&p, &spec, &grid, cfg.picard_tol, cfg.max_iter) {
        Ok(res) => res,
        Err(e @ SolitonError::InvalidParams(_)) => return Err(e),
        Err(e) => {
            out.report.push(stage_failure("picard", &e));
            return Ok(out);
        }
    };
    out.report.extend(picard_entries(&res, cfg.picard_tol));

    let built = germ_samples(&res, &ctx).and_then(|germ| {
        let start = *germ.last().expect("germ ends at the hand-off state");
        let mut traj = integrate(&p, start, &ctx, &integration_options(cfg))?;
        traj.prepend_germ(&germ);
        Ok(traj)
    });
    let traj = match built {
        Ok(t) => t,
        Err(e) => {
            out.report.push(stage_failure("forward_integration", &e));
            out.picard = Some(res);
            return Ok(out);
        }
    };
    out.report.extend(germ_rates(&traj));
    match recover_profile_with(&traj, &ctx, cfg.resample) {
        Ok(prof) => {
            out.report.extend(closing_report(&prof, &res));
            trajectory_and_profile_checks(&mut out, &traj, &prof);
            out.profile = Some(prof);
        }
        Err(e) => {
            let lambda0 = lambda0_threshold(&p);
            out.report.push(outcome_entry(&traj, lambda0));
            out.report.push(drift_entry(&traj));
            out.report.push(stage_failure("profile_recovery", &e));
        }
    }
    out.picard = Some(res);
    out.trajectory = Some(traj);
    Ok(out)
}

/// Five-point finite-difference `d/dt` of the lifted `(X, Y, Z, W)` against
/// the vector field, over the forward leg. Returns the sup of the absolute
/// mismatch relative to `max(1, |rhs|)`.
pub fn lift_fd_error(p: &SolitonParams, samples: &[PhaseState]) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for k in 2..samples.len().saturating_sub(2) {
        let win = &samples[k - 2..=k + 2];
        let ts: Vec<f64> = win.iter().map(|s| s.t).collect();
        let w = first_derivative_weights(ts[2], &ts);
        let fd =
            |f: fn(&PhaseState) -> f64| -> f64 { w.iter().zip(win).map(|(w, s)| w * f(s)).sum() };
        let tan = rhs_nonlin1(p, &samples[k])?;
        let pairs = [
            (fd(|s| s.x), tan.x),
            (fd(|s| s.y), tan.y),
            (fd(|s| s.z), tan.z),
            (fd(|s| s.w), tan.w),
        ];
        for (a, b) in pairs {
            worst = worst.max((a - b).abs() / b.abs().max(1.0));
        }
    }
    Ok(worst)
}

fn reduced_entries(run: &ReducedRun) -> Result<VerificationReport> {
    let p = &run.params;
    let d2 = p.df() + 2.0;
    let target = target_slope(p, run.ctx.big_lambda);
    let mut r = VerificationReport::new();
    let slope_err = (run.limit_slope - target).abs();
    r.push(
        ReportEntry::check(
            "reduced_limit_slope",
            slope_err <= SLOPE_TOL,
            "the branch leaves the node with slope -(Λ + A₂)/(d+2)²",
        )
        .with("measured", run.limit_slope)
        .with("target", target)
        .tol(SLOPE_TOL),
    );
    let rate_err = (run.backward_rate / 2.0 - 1.0).abs();
    r.push(
        ReportEntry::check(
            "reduced_backward_rate",
            rate_err <= RATE_TOL,
            "the node is a source with rate 2",
        )
        .with("rate", run.backward_rate)
        .tol(RATE_TOL),
    );
    r.push(
        ReportEntry::check(
            "reduced_first_integral_drift",
            run.max_reduced_drift < DRIFT_TOL,
            "reduced first integral vanishes along the planar flow",
        )
        .with("max_abs", run.max_reduced_drift)
        .tol(DRIFT_TOL),
    );
    let samples = &run.trajectory.samples;
    let identity = samples
        .iter()
        .map(|s| (s.w - 2.0 * s.x / d2).abs() / s.x.abs().max(1.0))
        .fold(0.0, f64::max);
    r.push(
        ReportEntry::check(
            "lift_w_identity",
            identity <= 4.0 * f64::EPSILON,
            "lifted states satisfy W = 2X/(d+2)",
        )
        .with("max_abs", identity)
        .tol(4.0 * f64::EPSILON),
    );
    let fd = lift_fd_error(p, samples)?;
    r.push(
        ReportEntry::check(
            "lift_solves_phase_system",
            fd < LIFT_FD_TOL,
            "lifted planar solutions solve the four-dimensional system",
        )
        .with("max_mismatch", fd)
        .tol(LIFT_FD_TOL),
    );
    // Limits at the node, read from the first forward sample.
    let first = samples[0];
    let y2 = first.y * first.y;
    let closing = [
        ("closing_w_over_y2", first.w / y2, 1.0, 1e-6),
        (
            "closing_one_minus_z_over_y2",
            (1.0 - first.z) / y2,
            (run.ctx.big_lambda + p.a2()) / 2.0,
            1e-6,
        ),
        ("closing_x_over_y2", first.x / y2, p.x_over_y2_limit(), 1e-5),
    ];
    for (name, got, want, tol) in closing {
        r.push(
            ReportEntry::check(
                name,
                (got - want).abs() <= tol,
                "smooth closing at the zero section",
            )
            .with("limit", got)
            .with("expected", want)
            .tol(tol),
        );
    }
    Ok(r)
}

/// Planar construction for `q = -1`, lifted to the phase variables.
pub fn run_kahler(cfg: &RunConfig) -> Result<RunOutput> {
    let cfg = RunConfig {
        pipeline: Pipeline::Kahler,
        ..cfg.clone()
    };
    let (p, ctx) = cfg.validate()?;
    let mut out = empty_output(&cfg, p, ctx);
    let run = match shoot_reduced(&p, &ctx, cfg.kahler_eps, &integration_options(&cfg)) {
        Ok(run) => run,
        Err(e @ SolitonError::InvalidParams(_)) => return Err(e),
        Err(e) => {
            out.report.push(stage_failure("reduced_flow", &e));
            return Ok(out);
        }
    };
    match reduced_entries(&run) {
        Ok(r) => out.report.extend(r),
        Err(e) => out.report.push(stage_failure("lift_validation", &e)),
    }
    let traj = run.trajectory.clone();
    out.reduced = Some(run);
    match recover_profile_with(&traj, &ctx, cfg.resample) {
        Ok(prof) => {
            trajectory_and_profile_checks(&mut out, &traj, &prof);
            out.profile = Some(prof);
        }
        Err(e) => out.report.push(stage_failure("profile_recovery", &e)),
    }
    out.trajectory = Some(traj);
    Ok(out)
}

/// Writes the resampled profile to `out`, the native samples next to it, and
/// the report to `report` (each only if a path is given).
pub fn write_outputs(
    out: &RunOutput,
    profile_path: Option<&Path>,
    report_path: Option<&Path>,
) -> Result<()> {
    if let (Some(path), Some(prof)) = (profile_path, &out.profile) {
        write_profile_csv(path, &prof.samples)?;
        write_profile_csv(&native_path(path), &prof.native)?;
    }
    if let Some(path) = report_path {
        write_report_json(path, &out.report)?;
    }
    Ok(())
}

/// Runs both configs and compares their profiles.
pub fn compare_runs(
    a: &RunConfig,
    b: &RunConfig,
    tol: f64,
) -> Result<(ProfileDeviation, VerificationReport)> {
    let (pa, _) = a.validate()?;
    let (pb, _) = b.validate()?;
    if pa.d() != pb.d() || pa.q() != pb.q() {
        return Err(SolitonError::Comparison(format!(
            "configs differ in (d, q): ({}, {}) vs ({}, {})",
            pa.d(),
            pa.q(),
            pb.d(),
            pb.q()
        )));
    }
    let ra = run(a)?;
    let rb = run(b)?;
    let (Some(fa), Some(fb)) = (&ra.profile, &rb.profile) else {
        return Err(SolitonError::Accuracy("a run produced no profile".into()));
    };
    let dev = compare_profiles(fa, fb)?;
    let mut report = VerificationReport::new();
    report.push(
        ReportEntry::check(
            "profile_deviation",
            dev.max() < tol,
            "solitons with equal 𝒞 and g(0) coincide",
        )
        .with("f", dev.f)
        .with("g", dev.g)
        .with("h_s", dev.h_s)
        .with("s_min", dev.s_min)
        .with("s_max", dev.s_max)
        .tol(tol),
    );
    Ok((dev, report))
}

/// One line of a parameter sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    #[serde(rename = "Lambda")]
    pub big_lambda: f64,
    pub outcome: Option<Outcome>,
    pub verdict: Option<Verdict>,
    pub final_l_sqrt_c: f64,
    pub min_wy2_margin: f64,
    pub class: Option<AsymptoticClass>,
    pub passed: bool,
}

impl SweepRow {
    pub fn from_output(out: &RunOutput) -> Self {
        let traj = out.trajectory.as_ref();
        Self {
            big_lambda: out.ctx.big_lambda,
            outcome: traj.map(|t| t.outcome),
            verdict: out.verdict,
            final_l_sqrt_c: traj.map_or(f64::NAN, |t| t.final_l_scaled()),
            min_wy2_margin: traj.map_or(f64::NAN, |t| t.min_wy2_margin),
            class: out.classification.map(|c| c.class),
            passed: out.passed(),
        }
    }
}

pub fn sweep_row(base: &RunConfig, big_lambda: f64) -> Result<SweepRow> {
    Ok(SweepRow::from_output(&run(&base.with_lambda(big_lambda))?))
}

/// Recomputes every derived column of a stored profile from its phase
/// variables and re-runs the pointwise checks.
pub fn check_stored(cfg: &RunConfig, path: &Path) -> Result<VerificationReport> {
    let (p, ctx) = cfg.validate()?;
    let rows = read_profile_csv(path)?;
    check_rows(&p, &ctx, &rows)
}

pub fn check_rows(
    p: &SolitonParams,
    ctx: &FirstIntegralContext,
    rows: &[ProfileSample],
) -> Result<VerificationReport> {
    if rows.len() < 2 {
        return Err(SolitonError::CorruptTrajectory(
            "fewer than two rows".into(),
        ));
    }
    let mut r = VerificationReport::new();
    let states: Vec<PhaseState> = rows
        .iter()
        .map(|a| PhaseState {
            t: a.t,
            x: a.x,
            y: a.y,
            z: a.z,
            w: a.w,
            lng: a.g.ln(),
            s: a.s,
            f: a.f,
            l: a.l,
        })
        .collect();
    let fresh = states
        .iter()
        .map(|st| sample_from_state(p, ctx, st))
        .collect::<Result<Vec<_>>>()?;

    let rel = |u: f64, v: f64| (u - v).abs() / u.abs().max(1.0);
    let mut columns: f64 = 0.0;
    for (a, b) in rows.iter().zip(&fresh) {
        for (u, v) in [
            (a.h_s, b.h_s),
            (a.scalar, b.scalar),
            (a.fi_residual, b.fi_residual),
            (a.kahler_residual, b.kahler_residual),
        ] {
            columns = columns.max(rel(u, v));
        }
    }
    r.push(
        ReportEntry::check(
            "stored_columns_consistent",
            columns <= STORED_TOL,
            "derived columns match the phase variables",
        )
        .with("max_rel", columns)
        .tol(STORED_TOL),
    );
    let monotone = rows.windows(2).all(|w| w[1].s > w[0].s && w[1].t > w[0].t);
    r.push(ReportEntry::check(
        "stored_monotone",
        monotone,
        "s and t increase along the profile",
    ));
    let ell = rows
        .iter()
        .map(|a| (a.l - a.g * a.y).abs() / a.l.max(1e-300))
        .fold(0.0, f64::max);
    r.push(
        ReportEntry::check("stored_l_equals_gy", ell <= STORED_TOL, "ℒ = gY")
            .with("max_rel", ell)
            .tol(STORED_TOL),
    );
    let drift = fresh
        .iter()
        .map(|a| a.fi_residual.abs())
        .fold(0.0, f64::max);
    r.push(
        ReportEntry::check(
            "first_integral_drift",
            drift < DRIFT_TOL,
            "first integral R vanishes along the flow",
        )
        .with("max_abs", drift)
        .tol(DRIFT_TOL),
    );
    r.push(check_sign_invariance_samples(&states));
    r.push(check_dxplusz_samples(p.df(), &states));
    r.push(ricci_sign_samples(&fresh));
    let scalar_ok = fresh.iter().all(|a| a.scalar >= 0.0 && a.scalar <= ctx.c);
    r.push(ReportEntry::check(
        "scalar_bounds",
        scalar_ok,
        "0 <= S <= 𝒞",
    ));
    r.push(
        ReportEntry::new(
            "kahler_residual",
            Status::ReportOnly,
            "Kähler iff -(d+2)/2·q·f = g_s·g",
        )
        .with("scaled_residual", kahler_residual_samples(p, &fresh))
        .tol(KAHLER_TOL),
    );
    Ok(r)
}
