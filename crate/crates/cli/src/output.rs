//! Byte-stable serialization of results.
//!
//! Every float is written as `{:.16e}` (17 significant digits), which
//! round-trips `f64` exactly.

use std::io::Write;
use std::path::Path;

use gas_core::fedsim::{ExperimentConfig, ExperimentSummary, RunResult};

use crate::{CliError, CliResult};

pub fn fmt_num(x: f64) -> String {
    format!("{x:.16e}")
}

/// Writes `bytes` to a sibling temp file, then renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> CliResult<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp = dir.join(format!(".{name}.tmp-{}", std::process::id()));
    let mut file = std::fs::File::create(&tmp).map_err(|e| CliError::io(&tmp, e))?;
    file.write_all(bytes)
        .and_then(|_| file.sync_all())
        .map_err(|e| CliError::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| CliError::io(path, e))
}

pub const ROUND_HEADER: [&str; 7] = [
    "round",
    "repeat",
    "accuracy",
    "deviation",
    "honest_ratio",
    "byz_count",
    "wall_time",
];

fn round_fields(run: &RunResult, record_timing: bool) -> Vec<[String; 7]> {
    run.records
        .iter()
        .map(|r| {
            [
                r.round.to_string(),
                run.repeat.to_string(),
                fmt_num(r.test_accuracy),
                fmt_num(r.deviation),
                fmt_num(r.honest_inclusion_ratio),
                r.byz_inclusion_count.to_string(),
                fmt_num(if record_timing { r.wall_time } else { 0.0 }),
            ]
        })
        .collect()
}

/// One row per round per repeat. Wall time is written as zero unless
/// `record_timing` is set, so that reruns are byte-identical.
pub fn rounds_csv(runs: &[RunResult], record_timing: bool) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(ROUND_HEADER).expect("in-memory write");
    for run in runs {
        for row in round_fields(run, record_timing) {
            w.write_record(&row).expect("in-memory write");
        }
    }
    w.into_inner().expect("in-memory write")
}

/// Combined sweep CSV: the swept value prepended to every round row.
pub fn sweep_csv(axis: &str, points: &[(String, Vec<RunResult>)], record_timing: bool) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec![axis];
    header.extend(ROUND_HEADER);
    w.write_record(&header).expect("in-memory write");
    for (value, runs) in points {
        for run in runs {
            for row in round_fields(run, record_timing) {
                let mut full = vec![value.clone()];
                full.extend(row);
                w.write_record(&full).expect("in-memory write");
            }
        }
    }
    w.into_inner().expect("in-memory write")
}

pub fn summary_text(cfg: &ExperimentConfig, summary: &ExperimentSummary) -> String {
    let per_repeat: Vec<String> = summary.per_repeat_best.iter().map(|&b| fmt_num(b)).collect();
    format!(
        "defense = {}\nattack = {:?}\nseed = {}\nrepeats = {}\nrounds = {}\nbest_accuracy_mean = {}\nbest_accuracy_std = {}\nbest_accuracy_per_repeat = {}\n",
        cfg.defense.label(),
        cfg.attack,
        cfg.seed,
        cfg.repeats,
        cfg.rounds,
        fmt_num(summary.best_accuracy_mean),
        fmt_num(summary.best_accuracy_std),
        per_repeat.join(", "),
    )
}
