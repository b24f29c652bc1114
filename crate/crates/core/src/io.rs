//! Profile CSV and report JSON serialization.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::{Result, SolitonError};
use crate::profile::{ProfileSample, SampleDerivs};
use crate::report::VerificationReport;

pub const PROFILE_COLUMNS: [&str; 14] = [
    "s",
    "t",
    "f",
    "g",
    "h_s",
    "h",
    "S",
    "X",
    "Y",
    "Z",
    "W",
    "L",
    "fi_residual",
    "kahler_residual",
];

/// Round-trip exact formatting (17 significant digits).
fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_profile_csv(path: &Path, samples: &[ProfileSample]) -> Result<()> {
    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
    w.write_record(PROFILE_COLUMNS)?;
    for a in samples {
        let row = [
            a.s,
            a.t,
            a.f,
            a.g,
            a.h_s,
            a.h,
            a.scalar,
            a.x,
            a.y,
            a.z,
            a.w,
            a.l,
            a.fi_residual,
            a.kahler_residual,
        ];
        w.write_record(row.iter().map(|v| fmt(*v)))?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Deserialize)]
struct Row {
    s: f64,
    t: f64,
    f: f64,
    g: f64,
    h_s: f64,
    h: f64,
    #[serde(rename = "S")]
    scalar: f64,
    #[serde(rename = "X")]
    x: f64,
    #[serde(rename = "Y")]
    y: f64,
    #[serde(rename = "Z")]
    z: f64,
    #[serde(rename = "W")]
    w: f64,
    #[serde(rename = "L")]
    l: f64,
    fi_residual: f64,
    kahler_residual: f64,
}

/// Reads a profile written by [`write_profile_csv`]; derivative fields are
/// left at zero.
pub fn read_profile_csv(path: &Path) -> Result<Vec<ProfileSample>> {
    let mut r = csv::Reader::from_path(path)?;
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header != PROFILE_COLUMNS {
        return Err(SolitonError::CorruptTrajectory(format!(
            "unexpected profile columns {header:?}"
        )));
    }
    r.deserialize::<Row>()
        .map(|row| {
            let a = row?;
            Ok(ProfileSample {
                s: a.s,
                t: a.t,
                f: a.f,
                g: a.g,
                h_s: a.h_s,
                h: a.h,
                scalar: a.scalar,
                x: a.x,
                y: a.y,
                z: a.z,
                w: a.w,
                l: a.l,
                fi_residual: a.fi_residual,
                kahler_residual: a.kahler_residual,
                deriv: SampleDerivs::default(),
            })
        })
        .collect()
}

/// `<stem>.native.csv` next to the resampled profile.
pub fn native_path(out: &Path) -> PathBuf {
    let stem = out
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("profile");
    out.with_file_name(format!("{stem}.native.csv"))
}

pub fn write_report_json(path: &Path, report: &VerificationReport) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, report)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

pub fn read_report_json(path: &Path) -> Result<VerificationReport> {
    Ok(serde_json::from_reader(File::open(path)?)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn formatting_is_lossless(v in proptest::num::f64::NORMAL | proptest::num::f64::SUBNORMAL | proptest::num::f64::ZERO) {
            prop_assert_eq!(fmt(v).parse::<f64>().unwrap().to_bits(), v.to_bits());
        }
    }

    #[test]
    fn native_path_naming() {
        assert_eq!(
            native_path(Path::new("/a/b/run.csv")),
            PathBuf::from("/a/b/run.native.csv")
        );
    }
}
