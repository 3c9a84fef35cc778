//! File formats: demonstration CSVs, provenance envelopes and CSV writers.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::demos::{DemoRecord, DemoSet};
use crate::error::{Error, Result};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Deserialize)]
struct DemoRow {
    trajectory_id: i64,
    t: f64,
    state: i64,
    action: i64,
    successor: i64,
}

/// Reads `trajectory_id,t,state,action,successor` rows, where `-1` marks an
/// unknown action or successor. Row numbers in errors count the header as
/// row 1.
pub fn load_demos(path: impl AsRef<Path>) -> Result<DemoSet> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_demos(file, path)
}

pub fn parse_demos<R: std::io::Read>(reader: R, path: &Path) -> Result<DemoSet> {
    let row_err = |row: usize, message: String| Error::Row { path: path.to_path_buf(), row, message };
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).comment(Some(b'#')).from_reader(reader);
    let mut records = Vec::new();
    for (i, result) in rdr.deserialize::<DemoRow>().enumerate() {
        let row = i + 2;
        let r = result.map_err(|e| row_err(row, e.to_string()))?;
        let index = |v: i64, name: &str| -> Result<Option<usize>> {
            match v {
                -1 => Ok(None),
                v if v >= 0 => Ok(Some(v as usize)),
                v => Err(row_err(row, format!("{name} must be >= 0 or -1, got {v}"))),
            }
        };
        let state = index(r.state, "state")?.ok_or_else(|| row_err(row, "state must be known".into()))?;
        let trajectory = index(r.trajectory_id, "trajectory_id")?
            .ok_or_else(|| row_err(row, "trajectory_id must be >= 0".into()))?;
        if !r.t.is_finite() {
            return Err(row_err(row, format!("timestamp must be finite, got {}", r.t)));
        }
        records.push(DemoRecord {
            trajectory,
            state,
            action: index(r.action, "action")?,
            successor: index(r.successor, "successor")?,
            timestamp: Some(r.t),
        });
    }
    // row-level checks first, so errors name the offending row
    let has_action = records.first().map(|r| r.action.is_some());
    for (i, r) in records.iter().enumerate() {
        if r.action.is_none() && r.successor.is_none() {
            return Err(row_err(i + 2, "action and successor are both unknown".into()));
        }
        if has_action == Some(true) && r.action.is_none() {
            return Err(row_err(i + 2, "row lacks an action while earlier rows have one (mixed kinds)".into()));
        }
        if has_action == Some(false) && r.successor.is_none() {
            return Err(row_err(i + 2, "row lacks a successor while earlier rows have one (mixed kinds)".into()));
        }
        if i > 0 && records[i - 1].trajectory == r.trajectory && records[i - 1].timestamp >= r.timestamp {
            return Err(row_err(i + 2, format!("timestamps must increase within trajectory {}", r.trajectory)));
        }
    }
    DemoSet::new(records)
}

/// Checks demo indices against an MDP, naming the CSV row on failure.
pub fn check_demo_rows(demos: &DemoSet, n_states: usize, n_actions: usize, path: &Path) -> Result<()> {
    for (i, r) in demos.records().iter().enumerate() {
        let fail = |message: String| Error::Row { path: path.to_path_buf(), row: i + 2, message };
        for s in std::iter::once(r.state).chain(r.successor) {
            if s >= n_states {
                return Err(fail(format!("state {s} out of range for {n_states} states")));
            }
        }
        if let Some(a) = r.action.filter(|&a| a >= n_actions) {
            return Err(fail(format!("action {a} out of range for {n_actions} actions")));
        }
    }
    Ok(())
}

pub fn demos_to_csv(demos: &DemoSet) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["trajectory_id", "t", "state", "action", "successor"])?;
    let times = demos.effective_timestamps(1.0);
    for (r, t) in demos.records().iter().zip(times) {
        let opt = |v: Option<usize>| v.map_or("-1".to_string(), |x| x.to_string());
        let t = r.timestamp.unwrap_or(t);
        w.write_record([r.trajectory.to_string(), format_float(t), r.state.to_string(), opt(r.action), opt(r.successor)])?;
    }
    finish(w)
}

/// Shortest decimal that round-trips.
pub fn format_float(v: f64) -> String {
    format!("{v:?}")
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| Error::io("<memory>", e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// CSV text from a header and rows of already formatted cells.
pub fn csv_table(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    finish(w)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn file_hash(path: impl AsRef<Path>) -> Result<String> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(sha256_hex(&bytes))
}

/// What produced an output file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub seed: u64,
    pub config: serde_json::Value,
    /// `(name, sha256)` of every input file.
    pub inputs: Vec<(String, String)>,
}

impl Provenance {
    pub fn new(command: &str, seed: u64, config: &impl Serialize, inputs: Vec<(String, String)>) -> Result<Self> {
        Ok(Provenance {
            tool: "ddbnirl".into(),
            version: TOOL_VERSION.into(),
            command: command.into(),
            seed,
            config: serde_json::to_value(config)?,
            inputs,
        })
    }

    /// One-line comment header for CSV outputs.
    pub fn csv_header(&self) -> Result<String> {
        Ok(format!("# provenance: {}\n", serde_json::to_string(self)?))
    }
}

/// JSON document wrapping a payload with its provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Envelope<T> {
    pub provenance: Provenance,
    pub payload: T,
}

pub fn write_file(path: impl AsRef<Path>, contents: &[u8]) -> Result<()> {
    let path = path.as_ref();
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(contents).map_err(|e| Error::io(path, e))
}

pub fn write_json(path: impl AsRef<Path>, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_file(path, text.as_bytes())
}

/// Writes a CSV body preceded by the provenance comment line.
pub fn write_csv(path: impl AsRef<Path>, provenance: &Provenance, body: &str) -> Result<()> {
    let mut text = provenance.csv_header()?;
    text.push_str(body);
    write_file(path, text.as_bytes())
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: impl AsRef<Path>) -> Result<T> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::demos::DemoKind;

    fn parse(text: &str) -> Result<DemoSet> {
        parse_demos(text.as_bytes(), Path::new("demos.csv"))
    }

    #[test]
    fn kind_follows_populated_column() {
        let sa = parse("trajectory_id,t,state,action,successor\n0,0,1,2,-1\n0,1,2,2,-1\n").unwrap();
        assert_eq!(sa.kind(), DemoKind::StateAction);
        let ss = parse("trajectory_id,t,state,action,successor\n0,0,1,-1,2\n").unwrap();
        assert_eq!(ss.kind(), DemoKind::StateSuccessor);
    }

    #[test]
    fn errors_name_rows() {
        let err = parse("trajectory_id,t,state,action,successor\n0,0,1,2,-1\n0,1,1,-1,3\n").unwrap_err();
        assert!(matches!(err, Error::Row { row: 3, .. }), "{err}");
        let err = parse("trajectory_id,t,state,action,successor\n0,1,1,2,-1\n0,1,1,2,-1\n").unwrap_err();
        assert!(matches!(err, Error::Row { row: 3, .. }), "{err}");
        let err = parse("trajectory_id,t,state,action,successor\n0,x,1,2,-1\n").unwrap_err();
        assert!(matches!(err, Error::Row { row: 2, .. }), "{err}");
        let demos = parse("trajectory_id,t,state,action,successor\n0,0,1,2,-1\n0,1,500,2,-1\n").unwrap();
        let err = check_demo_rows(&demos, 400, 8, Path::new("demos.csv")).unwrap_err();
        assert!(err.to_string().contains("row 3"), "{err}");
    }

    #[test]
    fn csv_round_trip() {
        let text = "trajectory_id,t,state,action,successor\n0,0.0,1,2,-1\n0,1.5,2,0,-1\n3,0.0,0,1,-1\n";
        let demos = parse(text).unwrap();
        assert_eq!(demos_to_csv(&demos).unwrap(), text);
    }
}
