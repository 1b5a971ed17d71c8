//! CSV and JSON artefacts.
//!
//! Metrics CSV layout: one `# run <i>: <json>` comment line per run holding
//! that run's resolved configuration, then a header row and one row per
//! (run, round):
//!
//! ```text
//! run,protocol,seed,straggler_rate,partitions,per_partition,sample_size,round,mean_test_accuracy,mean_train_loss,participated,survivors,comm_time_s
//! ```
//!
//! Floats are written in shortest round-trip form, so parsing a file gives
//! back exactly the logs that were emitted.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::commcost::CommTableRow;
use crate::error::{Error, Result};
use crate::protocol::{Protocol, RoundRecord};

use super::{ExperimentConfig, MetricsLog, RunSummary};

const METRICS_HEADER: [&str; 13] = [
    "run",
    "protocol",
    "seed",
    "straggler_rate",
    "partitions",
    "per_partition",
    "sample_size",
    "round",
    "mean_test_accuracy",
    "mean_train_loss",
    "participated",
    "survivors",
    "comm_time_s",
];

#[derive(Debug, Serialize, Deserialize)]
struct MetricsRow {
    run: usize,
    protocol: Protocol,
    seed: u64,
    straggler_rate: f64,
    partitions: usize,
    per_partition: usize,
    sample_size: usize,
    round: usize,
    mean_test_accuracy: f64,
    mean_train_loss: f64,
    participated: usize,
    survivors: usize,
    comm_time_s: f64,
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> Error + '_ {
    move |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    }
}

/// Writes the metrics CSV for `logs`. An empty slice gives a header-only file.
pub fn emit_fig_data(logs: &[MetricsLog], path: &Path) -> Result<()> {
    let mut out = create(path)?;
    for (i, log) in logs.iter().enumerate() {
        writeln!(out, "# run {i}: {}", log.config.to_json()).map_err(|e| Error::io(path, e))?;
    }
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(METRICS_HEADER).map_err(csv_err(path))?;
    for (run, log) in logs.iter().enumerate() {
        let c = &log.config;
        for r in &log.rows {
            w.serialize(MetricsRow {
                run,
                protocol: r.protocol,
                seed: c.seeds.protocol,
                straggler_rate: c.round.straggler_rate,
                partitions: c.round.partitions,
                per_partition: c.round.per_partition,
                sample_size: c.round.sample_size,
                round: r.round,
                mean_test_accuracy: r.mean_test_accuracy,
                mean_train_loss: r.mean_train_loss,
                participated: r.participated,
                survivors: r.survivors,
                comm_time_s: r.comm_time_s,
            })
            .map_err(csv_err(path))?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads a file written by [`emit_fig_data`].
pub fn parse_fig_data(path: &Path) -> Result<Vec<MetricsLog>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut configs: BTreeMap<usize, ExperimentConfig> = BTreeMap::new();
    for line in text.lines().filter_map(|l| l.strip_prefix("# run ")) {
        let (idx, json) = line
            .split_once(": ")
            .ok_or_else(|| Error::Parse(format!("{}: malformed run line `{line}`", path.display())))?;
        let idx: usize = idx
            .parse()
            .map_err(|_| Error::Parse(format!("{}: bad run index `{idx}`", path.display())))?;
        let cfg =
            serde_json::from_str(json).map_err(|e| Error::Parse(format!("{}: run {idx}: {e}", path.display())))?;
        configs.insert(idx, cfg);
    }
    let mut logs: Vec<MetricsLog> = configs
        .into_values()
        .map(|config| MetricsLog {
            config,
            rows: Vec::new(),
        })
        .collect();

    let mut r = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    for row in r.deserialize::<MetricsRow>() {
        let row = row.map_err(csv_err(path))?;
        let log = logs
            .get_mut(row.run)
            .ok_or_else(|| Error::Parse(format!("{}: row for unknown run {}", path.display(), row.run)))?;
        log.rows.push(RoundRecord {
            round: row.round,
            protocol: row.protocol,
            mean_test_accuracy: row.mean_test_accuracy,
            mean_train_loss: row.mean_train_loss,
            participated: row.participated,
            survivors: row.survivors,
            comm_time_s: row.comm_time_s,
        });
    }
    Ok(logs)
}

/// JSON mirror of the metrics CSV.
pub fn emit_json(logs: &[MetricsLog], path: &Path) -> Result<()> {
    let mut out = create(path)?;
    serde_json::to_writer_pretty(&mut out, logs).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    writeln!(out).and_then(|_| out.flush()).map_err(|e| Error::io(path, e))
}

/// One row per run; the configs live in the matching metrics file.
pub fn emit_summary(summary: &[RunSummary], path: &Path) -> Result<()> {
    let out = create(path)?;
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record([
        "protocol",
        "seed",
        "straggler_rate",
        "partitions",
        "per_partition",
        "sample_size",
        "best_accuracy",
        "final_accuracy",
        "max_jump",
    ])
    .map_err(csv_err(path))?;
    for s in summary {
        w.serialize(s).map_err(csv_err(path))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Normalised communication table, one row per `(α, γ, P)` grid point.
pub fn emit_comm_table(rows: &[CommTableRow], alphas: &[f64], gammas: &[f64], devices: &[f64], path: &Path) -> Result<()> {
    let mut out = create(path)?;
    let grid = serde_json::json!({ "alphas": alphas, "gammas": gammas, "devices": devices });
    writeln!(out, "# grid: {grid}").map_err(|e| Error::io(path, e))?;
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(["alpha", "gamma", "devices", "optimal_l", "fedavg", "fedp2p"])
        .map_err(csv_err(path))?;
    for r in rows {
        w.serialize(r).map_err(csv_err(path))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Writes `<stem>.csv`, `<stem>.json` and, when given, `<stem>_summary.csv`
/// into `dir`.
pub fn write_experiment_outputs(
    logs: &[MetricsLog],
    summary: Option<&[RunSummary]>,
    dir: &Path,
    stem: &str,
) -> Result<()> {
    emit_fig_data(logs, &dir.join(format!("{stem}.csv")))?;
    emit_json(logs, &dir.join(format!("{stem}.json")))?;
    if let Some(s) = summary {
        emit_summary(s, &dir.join(format!("{stem}_summary.csv")))?;
    }
    Ok(())
}
