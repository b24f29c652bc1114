use soliton_forge::forward::IntegrationOptions;
use soliton_forge::geometry::{
    kahler_residual_value, nabla_j_coefficients, AsymptoticClass, Verdict, KAHLER_TOL,
};
use soliton_forge::io::{read_profile_csv, read_report_json, write_profile_csv, write_report_json};
use soliton_forge::kahler::{compare_profiles, shoot_reduced};
use soliton_forge::pipeline::{check_stored, compare_runs, run, sweep_row, write_outputs};
use soliton_forge::profile::recover_profile;
use soliton_forge::soliton::{make_params, FirstIntegralContext};
use soliton_forge::{Pipeline, RunConfig, SolitonError, Status};

fn cfg(big: f64, q: f64) -> RunConfig {
    RunConfig {
        q,
        ..RunConfig::default().with_lambda(big)
    }
}

fn kahler_cfg(big: f64) -> RunConfig {
    RunConfig {
        pipeline: Pipeline::Kahler,
        ..cfg(big, -1.0)
    }
}

#[test]
fn reference_run_passes_every_check() {
    let out = run(&cfg(40.0, -1.0)).unwrap();
    let failures: Vec<_> = out.report.failures().map(|e| &e.name).collect();
    assert!(failures.is_empty(), "{failures:?}");
    assert_eq!(out.verdict, Some(Verdict::ProvenComplete));
    assert!(out.report.entries.iter().all(|e| !e.anchor.is_empty()));
    assert!(out.report.entries.len() > 40);
}

#[test]
fn reduced_run_passes_every_check() {
    let out = run(&kahler_cfg(40.0)).unwrap();
    let failures: Vec<_> = out.report.failures().map(|e| &e.name).collect();
    assert!(failures.is_empty(), "{failures:?}");
    for name in [
        "kahler_residual",
        "nabla_j",
        "lift_w_identity",
        "lift_solves_phase_system",
    ] {
        assert_eq!(out.report.get(name).unwrap().status, Status::Pass, "{name}");
    }
}

#[test]
fn below_threshold_is_only_observed() {
    let out = run(&cfg(20.0, -1.0)).unwrap();
    assert_eq!(out.verdict, Some(Verdict::ObservedOnly));
    assert_eq!(
        out.report.get("w_over_y_bound").unwrap().status,
        Status::ReportOnly
    );
}

#[test]
fn blow_up_is_reported_not_raised() {
    let out = run(&cfg(40.0, -2.0)).unwrap();
    assert_eq!(out.verdict, Some(Verdict::Incomplete));
    assert_eq!(
        out.report.get("forward_outcome").unwrap().status,
        Status::Fail
    );
    assert!(!out.passed());
}

#[test]
fn kahler_residual_and_nabla_j_agree() {
    let mut profiles = vec![run(&kahler_cfg(40.0)).unwrap()];
    for (big, q) in [(40.0, -1.0), (160.0, -2.0), (40.0, 1.0), (160.0, 2.0)] {
        profiles.push(run(&cfg(big, q)).unwrap());
    }
    for out in &profiles {
        let prof = out.profile.as_ref().unwrap();
        let res = kahler_residual_value(prof);
        let nj = nabla_j_coefficients(prof).unwrap().max_scaled();
        assert_eq!(
            res < KAHLER_TOL,
            nj < KAHLER_TOL,
            "q = {}: {res:e} vs {nj:e}",
            out.params.q()
        );
        if out.params.q() != -1.0 {
            assert!(res > 100.0 * KAHLER_TOL, "q = {}: {res:e}", out.params.q());
        }
    }
}

#[test]
fn reduced_profile_independent_of_seed_offset() {
    let p = make_params(2, -1.0).unwrap();
    let ctx = FirstIntegralContext::new(&p, 40.0, 1.0).unwrap();
    let opts = IntegrationOptions::default();
    let prof = |eps: f64| {
        let run = shoot_reduced(&p, &ctx, eps, &opts).unwrap();
        recover_profile(&run.trajectory, &ctx).unwrap()
    };
    let dev = compare_profiles(&prof(1e-4), &prof(5e-5)).unwrap();
    assert!(dev.max() < 1e-6, "{dev:?}");
}

#[test]
fn general_and_reduced_agree_and_neighbours_differ() {
    let (dev, report) = compare_runs(&cfg(40.0, -1.0), &kahler_cfg(40.0), 1e-5).unwrap();
    assert!(report.all_pass(), "{dev:?}");
    let (dev, report) = compare_runs(&cfg(40.0, -1.0), &cfg(41.0, -1.0), 1e-5).unwrap();
    assert!(!report.all_pass());
    assert!(dev.max() > 1e-3, "{dev:?}");
}

#[test]
fn compare_rejects_mismatched_bundles() {
    let err = compare_runs(&cfg(40.0, -1.0), &cfg(160.0, -2.0), 1e-5).unwrap_err();
    assert!(matches!(err, SolitonError::Comparison(_)));
}

#[test]
fn outputs_round_trip_and_recheck() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&cfg(40.0, -1.0)).unwrap();
    let csv = dir.path().join("run.csv");
    let json = dir.path().join("run.json");
    write_outputs(&out, Some(&csv), Some(&json)).unwrap();

    let prof = out.profile.as_ref().unwrap();
    let rows = read_profile_csv(&csv).unwrap();
    assert_eq!(rows.len(), prof.samples.len());
    for (a, b) in rows.iter().zip(&prof.samples) {
        assert_eq!(a.s.to_bits(), b.s.to_bits());
        assert_eq!(a.h.to_bits(), b.h.to_bits());
        assert_eq!(a.kahler_residual.to_bits(), b.kahler_residual.to_bits());
    }
    let report = read_report_json(&json).unwrap();
    assert_eq!(report.entries.len(), out.report.entries.len());
    for (a, b) in report.entries.iter().zip(&out.report.entries) {
        assert_eq!(a.name, b.name);
        assert_eq!(a.status, b.status);
    }

    let cfg = cfg(40.0, -1.0);
    for path in [csv.clone(), dir.path().join("run.native.csv")] {
        let r = check_stored(&cfg, &path).unwrap();
        let failures: Vec<_> = r.failures().map(|e| &e.name).collect();
        assert!(failures.is_empty(), "{}: {failures:?}", path.display());
    }
}

#[test]
fn check_detects_tampering() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&cfg(40.0, -1.0)).unwrap();
    let mut rows = out.profile.unwrap().samples;
    rows[100].h_s *= 1.01;
    let path = dir.path().join("bad.csv");
    write_profile_csv(&path, &rows).unwrap();
    let r = check_stored(&cfg(40.0, -1.0), &path).unwrap();
    assert_eq!(
        r.get("stored_columns_consistent").unwrap().status,
        Status::Fail
    );
}

#[test]
fn identical_configs_give_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    let mut bytes = Vec::new();
    for k in 0..2 {
        let out = run(&cfg(31.0, -1.0)).unwrap();
        let (csv, json) = (
            dir.path().join(format!("{k}.csv")),
            dir.path().join(format!("{k}.json")),
        );
        write_outputs(&out, Some(&csv), None).unwrap();
        write_report_json(&json, &out.report).unwrap();
        bytes.push((std::fs::read(csv).unwrap(), std::fs::read(json).unwrap()));
    }
    assert!(bytes[0] == bytes[1]);
}

#[test]
fn sweep_rows_summarise_runs() {
    for big in [31.0, 80.0] {
        let row = sweep_row(&RunConfig::default(), big).unwrap();
        assert_eq!(row.verdict, Some(Verdict::ProvenComplete));
        assert!((row.final_l_sqrt_c - 1.0).abs() < 1e-4);
        assert!(row.min_wy2_margin > 0.0);
        assert_eq!(row.class, Some(AsymptoticClass::CigarParaboloid));
        assert!(row.passed);
    }
}
