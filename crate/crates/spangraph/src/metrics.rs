//! CSV schemas and writers. Column sets and order are fixed; anything
//! wall-clock dependent lives in separate timing files so metric files are
//! reproducible byte for byte.

use std::{
    fs,
    io::{BufWriter, Write},
    path::Path,
};

use spangraph_core::train::EpochRecord;

use crate::{
    error::{Error, Result},
    run::{DiagRow, EpochTiming, RunOutput},
};

pub const METRICS_COLUMNS: &[&str] =
    &["epoch", "loss", "train_acc", "val_acc", "val_macro_f1", "edge_ratio", "active_edges", "peak_edges_so_far"];
pub const TIMING_COLUMNS: &[&str] = &["epoch", "sampling_time_ms", "train_time_ms"];
pub const SUMMARY_COLUMNS: &[&str] = &[
    "variant",
    "best_val_acc",
    "best_val_macro_f1",
    "best_epoch",
    "final_edge_ratio",
    "peak_edges",
    "bytes_estimate",
    "mean_sampling_ms",
];
pub const SAMPLE_INSPECT_COLUMNS: &[&str] = &["edge_index", "u", "v", "weight", "normalized_prob"];

/// `noise_norm_l0 .. noise_norm_l{layers-1}` sit between `sampler` and
/// `z_diff_norm`.
pub fn diagnostics_columns(layers: usize) -> Vec<String> {
    let mut cols = vec!["epoch".to_string(), "sampler".to_string()];
    cols.extend((0..layers).map(|l| format!("noise_norm_l{l}")));
    cols.extend(["z_diff_norm", "var_xi", "peak_edges"].map(String::from));
    cols
}

pub fn metrics_fields(r: &EpochRecord) -> Vec<String> {
    vec![
        r.epoch.to_string(),
        r.loss.to_string(),
        r.train_acc.to_string(),
        r.val_acc.to_string(),
        r.val_macro_f1.to_string(),
        r.edge_ratio.to_string(),
        r.active_edges.to_string(),
        r.peak_directed_edges.to_string(),
    ]
}

fn timing_fields(t: &EpochTiming) -> Vec<String> {
    vec![t.epoch.to_string(), t.sampling_ms.to_string(), t.train_ms.to_string()]
}

fn diag_fields(label: &str, d: &DiagRow) -> Vec<String> {
    let mut f = vec![d.epoch.to_string(), label.to_string()];
    f.extend(d.noise_norms.iter().map(f64::to_string));
    f.extend([d.z_diff_norm.to_string(), d.var_xi.to_string(), d.peak_edges.to_string()]);
    f
}

/// Writes a header and rows, comma-separated, `\n`-terminated.
pub fn write_csv<H, R>(path: &Path, header: &[H], rows: impl IntoIterator<Item = R>) -> Result<()>
where
    H: AsRef<str>,
    R: AsRef<[String]>,
{
    let file = fs::File::create(path).map_err(Error::io(path))?;
    let mut w = BufWriter::new(file);
    let header: Vec<&str> = header.iter().map(AsRef::as_ref).collect();
    let mut emit = |fields: &[&str]| writeln!(w, "{}", fields.join(","));
    emit(&header).map_err(Error::io(path))?;
    for row in rows {
        let fields: Vec<&str> = row.as_ref().iter().map(String::as_str).collect();
        emit(&fields).map_err(Error::io(path))?;
    }
    w.flush().map_err(Error::io(path))
}

fn prefixed(first: &str, header: &[&str]) -> Vec<String> {
    std::iter::once(first).chain(header.iter().copied()).map(String::from).collect()
}

fn with_label(label: &str, mut fields: Vec<String>) -> Vec<String> {
    fields.insert(0, label.to_string());
    fields
}

/// `metrics.csv` and `timings.csv` for a single run.
pub fn write_run(dir: &Path, run: &RunOutput) -> Result<()> {
    write_csv(&dir.join("metrics.csv"), METRICS_COLUMNS, run.records.iter().map(metrics_fields))?;
    write_csv(&dir.join("timings.csv"), TIMING_COLUMNS, run.timings.iter().map(timing_fields))
}

/// Best validation accuracy with its epoch; the first epoch wins ties.
pub fn best_epoch(records: &[EpochRecord]) -> Option<&EpochRecord> {
    records.iter().fold(None, |best: Option<&EpochRecord>, r| match best {
        Some(b) if b.val_acc >= r.val_acc => Some(b),
        _ => Some(r),
    })
}

pub fn summary_fields(run: &RunOutput) -> Vec<String> {
    let best = best_epoch(&run.records);
    let mean_sampling = if run.timings.is_empty() {
        0.0
    } else {
        run.timings.iter().map(|t| t.sampling_ms as f64).sum::<f64>() / run.timings.len() as f64
    };
    vec![
        run.label.clone(),
        best.map_or(0.0, |b| b.val_acc).to_string(),
        run.records.iter().map(|r| r.val_macro_f1).fold(0.0, f64::max).to_string(),
        best.map_or(0, |b| b.epoch).to_string(),
        run.records.last().map_or(0.0, |r| r.edge_ratio).to_string(),
        run.memory.peak_directed_edges.to_string(),
        run.memory.bytes_estimate.to_string(),
        mean_sampling.to_string(),
    ]
}

/// `compare.csv`, `compare_timings.csv`, `summary.csv` and
/// `diagnostics.csv` for a set of runs.
pub fn write_comparison(dir: &Path, runs: &[RunOutput]) -> Result<()> {
    write_csv(
        &dir.join("compare.csv"),
        &prefixed("variant", METRICS_COLUMNS),
        runs.iter().flat_map(|r| r.records.iter().map(|rec| with_label(&r.label, metrics_fields(rec)))),
    )?;
    write_csv(
        &dir.join("compare_timings.csv"),
        &prefixed("variant", TIMING_COLUMNS),
        runs.iter().flat_map(|r| r.timings.iter().map(|t| with_label(&r.label, timing_fields(t)))),
    )?;
    write_csv(&dir.join("summary.csv"), SUMMARY_COLUMNS, runs.iter().map(summary_fields))?;
    let layers = runs.first().map_or(0, |r| r.model.num_layers());
    write_csv(
        &dir.join("diagnostics.csv"),
        &diagnostics_columns(layers),
        runs.iter().flat_map(|r| r.diagnostics.iter().map(|d| diag_fields(&r.label, d))),
    )
}
