//! One-parameter sweeps over a configuration document.
//!
//! Parameters are addressed by dotted paths into the JSON document, with
//! numeric segments indexing arrays (`pumps.1.amplitude`). Member runs are
//! independent and execute concurrently; rows keep the input order.

use std::collections::BTreeSet;

use rayon::prelude::*;
use serde_json::Value;

use crate::error::Error;
use crate::experiments::run_experiment;
use crate::model::{validate, Config};
use crate::report::ExperimentReport;

/// Parse a value list. `1,2,3` and `[1,2,3]` are equivalent; each entry is
/// any JSON value, so arrays are written as `[3],[4],[5]`.
pub fn parse_values(text: &str) -> Result<Vec<Value>, Error> {
    let t = text.trim();
    let v: Vec<Value> = serde_json::from_str(t).or_else(|_| serde_json::from_str(&format!("[{t}]")))?;
    if v.is_empty() {
        return Err(Error::Experiment("sweep value list is empty".into()));
    }
    Ok(v)
}

fn slot<'a>(doc: &'a mut Value, path: &str) -> Result<&'a mut Value, Error> {
    let mut cur = doc;
    for seg in path.split('.') {
        let missing = || Error::Experiment(format!("sweep parameter '{path}' does not exist in the configuration (at '{seg}')"));
        cur = match cur {
            Value::Object(map) => map.get_mut(seg).ok_or_else(missing)?,
            Value::Array(items) => {
                let i: usize = seg.parse().map_err(|_| missing())?;
                items.get_mut(i).ok_or_else(missing)?
            }
            _ => return Err(missing()),
        };
    }
    Ok(cur)
}

/// Replace the value at `path`, which must already exist.
pub fn set_param(doc: &mut Value, path: &str, value: Value) -> Result<(), Error> {
    *slot(doc, path)? = value;
    Ok(())
}

#[derive(Debug)]
pub struct SweepRow {
    pub index: usize,
    pub value: Value,
    pub result: Result<ExperimentReport, String>,
}

fn member(doc: &Value, param: &str, value: &Value) -> Result<ExperimentReport, Error> {
    let mut d = doc.clone();
    set_param(&mut d, param, value.clone())?;
    let cfg: Config = serde_json::from_value(d)?;
    let v = validate(&cfg)?;
    Ok(run_experiment(&v)?.report)
}

/// Run every member with at most `jobs` concurrent runs (0 = all cores).
pub fn run_sweep(doc: &Value, param: &str, values: &[Value], jobs: usize) -> Result<Vec<SweepRow>, Error> {
    if values.is_empty() {
        return Err(Error::Experiment("sweep value list is empty".into()));
    }
    // Fail fast on a path that does not exist at all.
    slot(&mut doc.clone(), param)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Experiment(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(|| {
        values
            .par_iter()
            .enumerate()
            .map(|(index, value)| SweepRow {
                index,
                value: value.clone(),
                result: member(doc, param, value).map_err(|e| e.to_string()),
            })
            .collect()
    }))
}

fn csv_cell(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Merged table: one row per member, one column per metric (measured value).
pub fn sweep_csv(param: &str, rows: &[SweepRow]) -> String {
    let names: BTreeSet<&String> = rows.iter().filter_map(|r| r.result.as_ref().ok()).flat_map(|r| r.metrics.keys()).collect();
    let mut out = format!("index,{},passed,error", csv_cell(param));
    for n in &names {
        out.push(',');
        out.push_str(n);
    }
    out.push('\n');
    for r in rows {
        let value = csv_cell(&r.value.to_string());
        match &r.result {
            Ok(rep) => {
                out.push_str(&format!("{},{},{},", r.index, value, rep.passed()));
                for n in &names {
                    out.push(',');
                    if let Some(m) = rep.metrics.get(*n) {
                        out.push_str(&format!("{:.12e}", m.measured));
                    }
                }
            }
            Err(e) => {
                out.push_str(&format!("{},{},false,{}", r.index, value, csv_cell(e)));
                for _ in &names {
                    out.push(',');
                }
            }
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn value_lists() {
        assert_eq!(parse_values("1,2.5,3").unwrap(), vec![json!(1), json!(2.5), json!(3)]);
        assert_eq!(parse_values("[1,2]").unwrap(), vec![json!(1), json!(2)]);
        assert_eq!(parse_values("[3],[4],[5]").unwrap(), vec![json!([3]), json!([4]), json!([5])]);
        assert!(parse_values("").is_err());
        assert!(parse_values("[]").is_err());
    }

    #[test]
    fn paths_must_exist() {
        let mut d = json!({"pumps": [{"amplitude": 1.0}, {"amplitude": 2.0}]});
        set_param(&mut d, "pumps.1.amplitude", json!(5.0)).unwrap();
        assert_eq!(d["pumps"][1]["amplitude"], json!(5.0));
        assert!(set_param(&mut d, "pumps.2.amplitude", json!(1)).is_err());
        assert!(set_param(&mut d, "pumps.0.missing", json!(1)).is_err());
    }

    #[test]
    fn member_failures_are_recorded_per_row() {
        let doc: Value = serde_json::from_str(crate::presets::source("fig2_profiles").unwrap()).unwrap();
        let rows = run_sweep(&doc, "experiment.levels", &[json!([3]), json!([2]), json!([5])], 2).unwrap();
        assert_eq!(rows.len(), 3);
        assert!(rows[0].result.is_ok() && rows[1].result.is_err() && rows[2].result.is_ok());
        let csv = sweep_csv("experiment.levels", &rows);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 4);
        assert!(lines[2].starts_with("1,"));
        assert!(lines[0].contains("envelope_fwhm_m3") && lines[0].contains("envelope_fwhm_m5"));
    }
}
