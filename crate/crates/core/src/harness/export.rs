use std::fs;
use std::path::{Path, PathBuf};

use super::run::{AlgorithmRun, RunRecord};
use crate::error::{Error, Result};

pub const CSV_HEADER: [&str; 9] = [
    "iter",
    "comm_rounds",
    "scalars_sent",
    "rel_error",
    "gnorm_error",
    "tracking_residual",
    "kkt_primal",
    "kkt_dual",
    "wall_ms",
];

fn io_error(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Writes through a sibling temporary file and a rename, so readers never see
/// a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(io_error(parent))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, bytes).map_err(io_error(&tmp))?;
    fs::rename(&tmp, path).map_err(io_error(path))
}

fn cell(value: Option<f64>) -> String {
    // `Display` for f64 is the shortest string that parses back exactly
    value.map(|v| v.to_string()).unwrap_or_default()
}

pub fn trace_csv(run: &AlgorithmRun) -> Result<Vec<u8>> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer.write_record(CSV_HEADER)?;
    for row in &run.trace.rows {
        writer.write_record([
            row.iter.to_string(),
            row.comm_rounds.to_string(),
            row.scalars_sent.to_string(),
            cell(Some(row.rel_error)),
            cell(row.gnorm_error),
            cell(row.tracking_residual),
            cell(Some(row.kkt_primal)),
            cell(Some(row.kkt_dual)),
            cell(row.wall_ms),
        ])?;
    }
    writer
        .into_inner()
        .map_err(|e| Error::InvalidParameter(format!("csv buffer: {e}")))
}

/// One `<label>.csv` per method run in `dir`.
pub fn export_csv(record: &RunRecord, dir: &Path) -> Result<Vec<PathBuf>> {
    let mut paths = Vec::with_capacity(record.runs.len());
    for run in &record.runs {
        let path = dir.join(format!("{}.csv", run.label));
        write_atomic(&path, &trace_csv(run)?)?;
        paths.push(path);
    }
    Ok(paths)
}

const PLOT_SCRIPT: &str = r#"#!/usr/bin/env python3
# Relative error against iterations and communication rounds for every CSV
# next to this script.
import csv
import pathlib

import matplotlib.pyplot as plt

here = pathlib.Path(__file__).resolve().parent
fig, (by_iter, by_round) = plt.subplots(1, 2, figsize=(10, 4), sharey=True)
for path in sorted(here.glob("*.csv")):
    with path.open() as f:
        rows = list(csv.DictReader(f))
    iters = [int(r["iter"]) for r in rows]
    rounds = [int(r["comm_rounds"]) for r in rows]
    errors = [float(r["rel_error"]) for r in rows]
    by_iter.semilogy(iters, errors, label=path.stem)
    by_round.semilogy(rounds, errors, label=path.stem)
by_iter.set_xlabel("iteration")
by_round.set_xlabel("communication rounds")
by_iter.set_ylabel("relative error")
by_iter.legend()
fig.tight_layout()
fig.savefig(here / "relative_error.png", dpi=150)
"#;

/// CSVs, `record.json` and `plot.py` in `dir`. Returns every written path.
pub fn save_record(record: &RunRecord, dir: &Path) -> Result<Vec<PathBuf>> {
    let mut paths = export_csv(record, dir)?;
    let json = dir.join("record.json");
    write_atomic(&json, record.to_json().as_bytes())?;
    paths.push(json);
    let script = dir.join("plot.py");
    write_atomic(&script, PLOT_SCRIPT.as_bytes())?;
    paths.push(script);
    Ok(paths)
}

pub fn load_record(path: &Path) -> Result<RunRecord> {
    let text = fs::read_to_string(path).map_err(io_error(path))?;
    RunRecord::from_json(&text).map_err(|e| e.context(path.display().to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::{preset, run_experiment};

    fn small_record() -> RunRecord {
        let mut config = preset("logistic-n10").unwrap();
        config.iterations = 30;
        run_experiment(&config).unwrap()
    }

    #[test]
    fn csv_layout() {
        let record = small_record();
        let dir = tempfile::tempdir().unwrap();
        let paths = export_csv(&record, dir.path()).unwrap();
        assert_eq!(paths, vec![dir.path().join("newton_tracking.csv")]);
        let text = fs::read_to_string(&paths[0]).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), CSV_HEADER.join(","));
        let first: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(first[0], "0");
        assert_eq!(first[3], "1");
        // the logistic preset is infeasible, so no G-norm; timing is off
        assert_eq!(first[4], "");
        assert_eq!(first[8], "");
        assert_eq!(text.lines().count(), 32);
    }

    #[test]
    fn floats_round_trip() {
        let record = small_record();
        let bytes = trace_csv(&record.runs[0]).unwrap();
        let mut reader = csv::Reader::from_reader(bytes.as_slice());
        for (row, parsed) in record.runs[0].trace.rows.iter().zip(reader.records()) {
            let parsed = parsed.unwrap();
            assert_eq!(parsed[3].parse::<f64>().unwrap().to_bits(), row.rel_error.to_bits());
            assert_eq!(parsed[7].parse::<f64>().unwrap().to_bits(), row.kkt_dual.to_bits());
        }
    }

    #[test]
    fn re_export_is_byte_identical() {
        let record = small_record();
        let dir = tempfile::tempdir().unwrap();
        let path = &export_csv(&record, dir.path()).unwrap()[0];
        let first = fs::read(path).unwrap();
        export_csv(&record, dir.path()).unwrap();
        assert_eq!(first, fs::read(path).unwrap());
        assert_eq!(trace_csv(&small_record().runs[0]).unwrap(), first);
    }

    #[test]
    fn record_json_round_trips() {
        let record = small_record();
        let dir = tempfile::tempdir().unwrap();
        save_record(&record, dir.path()).unwrap();
        let back = load_record(&dir.path().join("record.json")).unwrap();
        assert_eq!(back, record);
        assert!(dir.path().join("plot.py").exists());
        assert!(!dir.path().join("record.json.tmp").exists());
    }

    #[test]
    fn missing_directory_is_an_io_error() {
        let err = load_record(Path::new("/nonexistent/record.json")).unwrap_err();
        assert_eq!(err.kind(), "io");
    }
}
