use std::path::Path;

use crate::error::{Error, Result};
use crate::experiment::runner::{RunResult, SweepPoint};

pub const TRACE_HEADER: [&str; 7] = [
    "run_id",
    "epoch",
    "bs_id",
    "reward_bps_hz",
    "sum_rate_bps_hz",
    "noise_sigma",
    "fed_round_flag",
];

pub const SUMMARY_HEADER: [&str; 5] = ["axis_value", "mean_tp", "median_tp", "std_tp", "bytes_uploaded"];

/// 17 significant digits, enough to read every f64 back exactly.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Format(format!("{}: {other:?}", path.display())),
    }
}

/// One row per (run, epoch, BS).
pub fn write_traces(path: &Path, runs: &[RunResult]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    w.write_record(TRACE_HEADER).map_err(|e| csv_err(path, e))?;
    for run in runs {
        for (t, row) in run.rewards.iter().enumerate() {
            for (k, reward) in row.iter().enumerate() {
                w.write_record([
                    run.run_id.to_string(),
                    (t + 1).to_string(),
                    k.to_string(),
                    fmt_f64(*reward),
                    fmt_f64(run.sum_rates[t]),
                    fmt_f64(run.noise_sigma[t]),
                    u8::from(run.fed_round[t]).to_string(),
                ])
                .map_err(|e| csv_err(path, e))?;
            }
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// One row per sweep point (or a single row for a plain run).
pub fn write_summary(path: &Path, points: &[SweepPoint]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    w.write_record(SUMMARY_HEADER).map_err(|e| csv_err(path, e))?;
    for p in points {
        let s = p.result.stats;
        w.write_record([
            p.axis_value.clone(),
            fmt_f64(s.mean),
            fmt_f64(s.median),
            fmt_f64(s.std),
            fmt_f64(p.result.mean_bytes_uploaded),
        ])
        .map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Write `traces.csv` and `summary.csv` under `dir`, creating it if needed.
pub fn emit_csv(dir: &Path, points: &[SweepPoint]) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let runs: Vec<RunResult> = points.iter().flat_map(|p| p.result.runs.iter().cloned()).collect();
    write_traces(&dir.join("traces.csv"), &runs)?;
    write_summary(&dir.join("summary.csv"), points)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_format_round_trips() {
        for x in [0.1, 1.0 / 3.0, 1e-300, -2.5e17, f64::MIN_POSITIVE, 6.02214076e23] {
            let s = fmt_f64(x);
            assert_eq!(s.parse::<f64>().unwrap(), x);
        }
        assert_eq!(fmt_f64(1.5), "1.5000000000000000e0");
    }

    #[test]
    fn unwritable_path_reports_it() {
        let err = write_traces(Path::new("/nonexistent-dir/x/traces.csv"), &[]).unwrap_err();
        assert_eq!(err.category(), "io");
        assert!(err.to_string().contains("/nonexistent-dir/x/traces.csv"));
    }
}
