//! Result records, JSON-lines output and per-method summaries.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::config::{ExperimentKind, MethodTag};
use crate::error::{CliError, CliResult};

/// One evaluated sweep cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub experiment: ExperimentKind,
    pub method: MethodTag,
    /// `epsilon`, `k`, and for some experiments `per_arm` or `t`.
    pub parameters: BTreeMap<String, Value>,
    pub seed: u64,
    pub metric: String,
    /// `None` when the cell failed; see `error`.
    pub value: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    /// Seconds; only recorded when timing is enabled.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_time: Option<f64>,
    /// Solver residuals and similar numerical health checks.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub diagnostics: BTreeMap<String, f64>,
}

/// Whether smaller metric values are better.
pub fn lower_is_better(metric: &str) -> bool {
    metric != "accuracy"
}

pub fn write_jsonl(records: &[ResultRecord], path: &Path) -> CliResult<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path).map_err(CliError::io(path))?);
    for r in records {
        let line = serde_json::to_string(r).expect("records serialize");
        writeln!(out, "{line}").map_err(CliError::io(path))?;
    }
    out.flush().map_err(CliError::io(path))
}

pub fn read_jsonl(path: &Path) -> CliResult<Vec<ResultRecord>> {
    let text = std::fs::read_to_string(path).map_err(CliError::io(path))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            serde_json::from_str(l).map_err(|source| CliError::Config {
                path: path.to_path_buf(),
                source,
            })
        })
        .collect()
}

/// Best-over-grid result of one method within one group for one seed.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SeedBest {
    pub seed: u64,
    pub value: Option<f64>,
    pub parameters: BTreeMap<String, Value>,
}

/// Best-over-grid results of one method, per seed and averaged.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SummaryEntry {
    pub method: MethodTag,
    /// Parameters that are not tuned over (`per_arm`, `t`).
    pub group: BTreeMap<String, Value>,
    pub metric: String,
    pub per_seed: Vec<SeedBest>,
    /// Mean of the per-seed bests that exist.
    pub mean_best: Option<f64>,
    pub failed_cells: usize,
}

/// Keys that define groups rather than tuning grids.
const GROUP_KEYS: [&str; 2] = ["per_arm", "t"];

fn split_params(params: &BTreeMap<String, Value>) -> (BTreeMap<String, Value>, BTreeMap<String, Value>) {
    params
        .iter()
        .map(|(k, v)| (k.clone(), v.clone()))
        .partition(|(k, _)| GROUP_KEYS.contains(&k.as_str()))
}

/// Groups records by (method, group parameters, metric) and picks the best
/// tuning parameters per seed.
pub fn summarize(records: &[ResultRecord]) -> Vec<SummaryEntry> {
    type Key = (MethodTag, String, String);
    let mut groups: BTreeMap<Key, (BTreeMap<String, Value>, Vec<&ResultRecord>)> = BTreeMap::new();
    for r in records {
        let (group, _) = split_params(&r.parameters);
        let key = (r.method, serde_json::to_string(&group).unwrap(), r.metric.clone());
        groups.entry(key).or_insert_with(|| (group, Vec::new())).1.push(r);
    }
    groups
        .into_iter()
        .map(|((method, _, metric), (group, rs))| {
            let lower = lower_is_better(&metric);
            let mut seeds: Vec<u64> = rs.iter().map(|r| r.seed).collect();
            seeds.sort_unstable();
            seeds.dedup();
            let per_seed: Vec<SeedBest> = seeds
                .iter()
                .map(|&seed| {
                    let best = rs
                        .iter()
                        .filter(|r| r.seed == seed)
                        .filter_map(|r| r.value.map(|v| (v, r)))
                        .fold(None::<(f64, &ResultRecord)>, |acc, (v, r)| match acc {
                            Some((b, _)) if (lower && v >= b) || (!lower && v <= b) => acc,
                            _ => Some((v, r)),
                        });
                    SeedBest {
                        seed,
                        value: best.map(|b| b.0),
                        parameters: best.map(|b| split_params(&b.1.parameters).1).unwrap_or_default(),
                    }
                })
                .collect();
            let found: Vec<f64> = per_seed.iter().filter_map(|s| s.value).collect();
            SummaryEntry {
                method,
                group,
                metric,
                mean_best: (!found.is_empty()).then(|| found.iter().sum::<f64>() / found.len() as f64),
                failed_cells: rs.iter().filter(|r| r.value.is_none()).count(),
                per_seed,
            }
        })
        .collect()
}

/// Mean metric over seeds for every (method, tuning parameters) row and
/// `per_arm` column, as CSV.
pub fn density_heatmap(records: &[ResultRecord]) -> String {
    let mut columns: Vec<u64> = records
        .iter()
        .filter_map(|r| r.parameters.get("per_arm").and_then(Value::as_u64))
        .collect();
    columns.sort_unstable();
    columns.dedup();
    let mut cells: BTreeMap<(MethodTag, String), BTreeMap<u64, Vec<f64>>> = BTreeMap::new();
    for r in records {
        let Some(per_arm) = r.parameters.get("per_arm").and_then(Value::as_u64) else {
            continue;
        };
        let (_, tuning) = split_params(&r.parameters);
        let label: Vec<String> = tuning.iter().map(|(k, v)| format!("{k}={v}")).collect();
        let entry = cells
            .entry((r.method, label.join(" ")))
            .or_default()
            .entry(per_arm)
            .or_default();
        if let Some(v) = r.value {
            entry.push(v);
        }
    }
    let mut out = String::from("method,parameters");
    for c in &columns {
        out.push_str(&format!(",{c}"));
    }
    out.push('\n');
    for ((method, label), row) in cells {
        out.push_str(&format!("{},{label}", method.as_str()));
        for c in &columns {
            match row.get(c).filter(|v| !v.is_empty()) {
                Some(v) => out.push_str(&format!(",{:?}", v.iter().sum::<f64>() / v.len() as f64)),
                None => out.push(','),
            }
        }
        out.push('\n');
    }
    out
}
