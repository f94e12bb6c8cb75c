//! Report schema shared by the command-line runner and the tests.
//!
//! A report is a JSON object with `config`, `results`, `summary` and
//! `timings`. Everything except `timings` is a pure function of the run
//! configuration.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::stats::Verdict;

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// One result row. `verdict` is absent for informational rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultEntry {
    pub experiment: String,
    pub id: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub verdict: Option<Verdict>,
    pub data: Value,
}

impl ResultEntry {
    pub fn new(experiment: &str, id: impl Into<String>, verdict: Option<Verdict>, data: impl Serialize) -> Self {
        Self {
            experiment: experiment.to_owned(),
            id: id.into(),
            verdict,
            data: serde_json::to_value(data).expect("report data serializes"),
        }
    }

    pub fn pass_if(experiment: &str, id: impl Into<String>, ok: bool, data: impl Serialize) -> Self {
        let v = if ok { Verdict::Pass } else { Verdict::Fail };
        Self::new(experiment, id, Some(v), data)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Summary {
    pub pass: u64,
    pub fail: u64,
    pub inconclusive: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub tool_version: String,
    pub config: Value,
    pub results: Vec<ResultEntry>,
    pub summary: Summary,
    /// Wall time per experiment, in milliseconds.
    pub timings: BTreeMap<String, f64>,
}

impl Report {
    pub fn new(config: impl Serialize) -> Self {
        Self {
            tool_version: TOOL_VERSION.to_owned(),
            config: serde_json::to_value(config).expect("config serializes"),
            results: Vec::new(),
            summary: Summary::default(),
            timings: BTreeMap::new(),
        }
    }

    pub fn push(&mut self, entry: ResultEntry) {
        match entry.verdict {
            Some(Verdict::Pass) => self.summary.pass += 1,
            Some(Verdict::Fail) => self.summary.fail += 1,
            Some(Verdict::Inconclusive) => self.summary.inconclusive += 1,
            None => {}
        }
        self.results.push(entry);
    }

    pub fn has_failures(&self) -> bool {
        self.summary.fail > 0
    }

    /// Long-format CSV: `experiment,id,verdict,field,value`, one line per
    /// scalar leaf of each entry's data.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("experiment,id,verdict,field,value\n");
        for e in &self.results {
            let verdict = e.verdict.map_or(String::new(), |v| {
                serde_json::to_value(v).unwrap().as_str().unwrap().to_owned()
            });
            let mut leaves = Vec::new();
            flatten(&e.data, String::new(), &mut leaves);
            for (field, value) in leaves {
                out.push_str(&format!(
                    "{},{},{},{},{}\n",
                    csv_field(&e.experiment),
                    csv_field(&e.id),
                    verdict,
                    csv_field(&field),
                    csv_field(&value)
                ));
            }
        }
        out
    }
}

fn flatten(v: &Value, prefix: String, out: &mut Vec<(String, String)>) {
    let join = |k: &str| {
        if prefix.is_empty() {
            k.to_owned()
        } else {
            format!("{prefix}.{k}")
        }
    };
    match v {
        Value::Object(map) => {
            for (k, v) in map {
                flatten(v, join(k), out);
            }
        }
        Value::Array(items) => {
            for (i, v) in items.iter().enumerate() {
                flatten(v, join(&i.to_string()), out);
            }
        }
        Value::String(s) => out.push((prefix, s.clone())),
        other => out.push((prefix, other.to_string())),
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_owned()
    }
}
