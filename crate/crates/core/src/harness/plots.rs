//! Figure tables aggregated over seeds from finished run directories.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;

use crate::error::{Error, Result};

use super::config::{EnvKind, ExperimentConfig};
use super::metrics::read_metrics;
use super::stats::summarize;
use super::trainer::{CONFIG_FILE, METRICS_FILE};

pub const TRAINING_RETURN: &str = "training_return";
pub const EVAL_RETURN_VS_Q: &str = "eval_return_vs_q";
pub const FRUIT_CHOICE: &str = "fruit_choice";
pub const ROOM_CURRICULUM: &str = "room_curriculum";
pub const ICE_EXPOSURE: &str = "ice_exposure";

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Row {
    pub step: f64,
    pub mean: f64,
    pub stderr: f64,
    pub method: String,
    pub seeds: usize,
}

/// Metrics of one finished run.
#[derive(Clone, Debug)]
pub struct RunData {
    pub method: String,
    pub env: EnvKind,
    pub records: Vec<Value>,
}

impl RunData {
    pub fn load(dir: &Path) -> Result<Self> {
        let cfg = ExperimentConfig::load(&dir.join(CONFIG_FILE))?;
        Ok(RunData {
            method: cfg.method.to_string(),
            env: cfg.env,
            records: read_metrics(&dir.join(METRICS_FILE))?,
        })
    }
}

/// Every directory below `root` (inclusive) holding a metrics stream and a
/// resolved config, in sorted order.
pub fn find_runs(root: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        if dir.join(METRICS_FILE).is_file() && dir.join(CONFIG_FILE).is_file() {
            out.push(dir.clone());
        }
        for entry in fs::read_dir(&dir)? {
            let p = entry?.path();
            if p.is_dir() {
                stack.push(p);
            }
        }
    }
    out.sort();
    Ok(out)
}

fn field(rec: &Value, name: &str) -> Result<f64> {
    rec.get(name).and_then(Value::as_f64).ok_or_else(|| Error::Schema { field: name.into() })
}

fn kind_is(rec: &Value, kind: &str) -> bool {
    rec.get("kind").and_then(Value::as_str) == Some(kind)
}

/// Per-seed series `(step, value)` of an update field, as `(method, series)`.
/// `required` fields raise a schema error when absent; optional ones skip the
/// record.
fn update_series(runs: &[RunData], name: &str, required: bool) -> Result<Vec<(String, Vec<(f64, f64)>)>> {
    let mut out = Vec::new();
    for run in runs {
        let mut s = Vec::new();
        for rec in run.records.iter().filter(|r| kind_is(r, "update")) {
            let step = field(rec, "env_steps")?;
            match rec.get(name) {
                Some(v) if v.is_number() => s.push((step, v.as_f64().unwrap_or(f64::NAN))),
                Some(Value::Null) | None if !required => {}
                _ => return Err(Error::Schema { field: name.into() }),
            }
        }
        out.push((run.method.clone(), s));
    }
    Ok(out)
}

/// Aggregates the `i`-th point of each seed's series; the step is the mean
/// step of the contributing seeds.
pub fn aggregate(series: &[(String, Vec<(f64, f64)>)]) -> Vec<Row> {
    let mut by_method: BTreeMap<&str, Vec<&Vec<(f64, f64)>>> = BTreeMap::new();
    for (m, s) in series {
        by_method.entry(m).or_default().push(s);
    }
    let mut rows = Vec::new();
    for (method, runs) in by_method {
        let len = runs.iter().map(|s| s.len()).max().unwrap_or(0);
        for i in 0..len {
            let pts: Vec<(f64, f64)> = runs.iter().filter_map(|s| s.get(i).copied()).collect();
            let steps: Vec<f64> = pts.iter().map(|p| p.0).collect();
            let vals: Vec<f64> = pts.iter().map(|p| p.1).collect();
            let s = summarize(&vals);
            rows.push(Row {
                step: summarize(&steps).mean.round(),
                mean: s.mean,
                stderr: s.stderr,
                method: method.to_string(),
                seeds: s.n,
            });
        }
    }
    rows
}

fn eval_vs_q(runs: &[RunData]) -> Result<Vec<Row>> {
    let mut groups: BTreeMap<(String, String), (f64, Vec<f64>)> = BTreeMap::new();
    for run in runs {
        for rec in run.records.iter().filter(|r| kind_is(r, "final_eval")) {
            let mean = field(rec, "mean_return")?;
            let q = match rec.get("q") {
                Some(Value::Null) => continue,
                Some(v) => v.as_f64().ok_or_else(|| Error::Schema { field: "q".into() })?,
                None => return Err(Error::Schema { field: "q".into() }),
            };
            let g = groups
                .entry((run.method.clone(), format!("{q:020.12}")))
                .or_insert((q, Vec::new()));
            g.1.push(mean);
        }
    }
    Ok(groups
        .into_iter()
        .map(|((method, _), (q, vals))| {
            let s = summarize(&vals);
            Row {
                step: q,
                mean: s.mean,
                stderr: s.stderr,
                method,
                seeds: s.n,
            }
        })
        .collect())
}

/// Builds every table that applies to the runs' environment. In the
/// evaluation-versus-q table the `step` column holds q.
pub fn plot_tables(runs: &[RunData]) -> Result<BTreeMap<&'static str, Vec<Row>>> {
    if runs.is_empty() {
        return Err(Error::config("no completed runs to plot"));
    }
    let mut tables = BTreeMap::new();
    let mut training = aggregate(&update_series(runs, "train_return", true)?);
    let fict: Vec<_> = update_series(runs, "fict_return", false)?
        .into_iter()
        .filter(|(_, s)| !s.is_empty())
        .map(|(m, s)| (format!("{m}:fictitious"), s))
        .collect();
    training.extend(aggregate(&fict));
    tables.insert(TRAINING_RETURN, training);
    tables.insert(EVAL_RETURN_VS_Q, eval_vs_q(runs)?);
    let fruit: Vec<RunData> = runs.iter().filter(|r| r.env == EnvKind::FruitRooms).cloned().collect();
    if !fruit.is_empty() {
        tables.insert(FRUIT_CHOICE, aggregate(&update_series(&fruit, "banana_fraction", false)?));
        tables.insert(ROOM_CURRICULUM, aggregate(&update_series(&fruit, "mean_rooms", true)?));
    }
    let icy: Vec<RunData> = runs.iter().filter(|r| r.env == EnvKind::IcyTrack).cloned().collect();
    if !icy.is_empty() {
        tables.insert(ICE_EXPOSURE, aggregate(&update_series(&icy, "ice_per_tile", true)?));
    }
    Ok(tables)
}

pub fn write_table(path: &Path, rows: &[Row]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    if rows.is_empty() {
        w.write_record(["step", "mean", "stderr", "method", "seeds"]).map_err(csv_err)?;
    }
    for r in rows {
        w.serialize(r).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

/// Loads the runs in `run_dirs` and writes `<figure>.csv` files into
/// `out_dir`.
pub fn emit_plots(run_dirs: &[PathBuf], out_dir: &Path) -> Result<BTreeMap<String, PathBuf>> {
    let runs = run_dirs.iter().map(|d| RunData::load(d)).collect::<Result<Vec<_>>>()?;
    fs::create_dir_all(out_dir)?;
    let mut written = BTreeMap::new();
    for (name, rows) in plot_tables(&runs)? {
        let path = out_dir.join(format!("{name}.csv"));
        write_table(&path, &rows)?;
        written.insert(name.to_string(), path);
    }
    Ok(written)
}
