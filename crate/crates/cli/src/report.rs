//! Deterministic artifact emission: summary.json (schema itespec/1),
//! RFC-4180 CSV, and two-column plot-data files.

use serde_json::{json, Map, Value};
use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

pub struct Reporter {
    dir: PathBuf,
    task: String,
    files: Vec<String>,
    metrics: BTreeMap<String, Value>,
    pub pass: bool,
}

impl Reporter {
    pub fn new(dir: &Path, task: &str) -> std::io::Result<Reporter> {
        fs::create_dir_all(dir)?;
        Ok(Reporter {
            dir: dir.to_path_buf(),
            task: task.to_string(),
            files: Vec::new(),
            metrics: BTreeMap::new(),
            pass: true,
        })
    }

    pub fn metric<T: serde::Serialize>(&mut self, key: &str, value: T) {
        self.metrics
            .insert(key.to_string(), serde_json::to_value(value).unwrap());
    }

    pub fn require(&mut self, key: &str, ok: bool) {
        self.metric(key, ok);
        self.pass &= ok;
    }

    pub fn csv(&mut self, name: &str, header: &str, rows: &[Vec<String>]) -> std::io::Result<()> {
        let path = self.dir.join(name);
        let mut f = fs::File::create(&path)?;
        write!(f, "{header}\r\n")?;
        for row in rows {
            write!(f, "{}\r\n", row.join(","))?;
        }
        self.files.push(name.to_string());
        Ok(())
    }

    /// Two-column whitespace plot data.
    pub fn plot_data(&mut self, name: &str, rows: &[(f64, f64)]) -> std::io::Result<()> {
        let path = self.dir.join(name);
        let mut f = fs::File::create(&path)?;
        for &(x, y) in rows {
            writeln!(f, "{x:.12e} {y:.12e}")?;
        }
        self.files.push(name.to_string());
        Ok(())
    }

    pub fn json<T: serde::Serialize>(&mut self, name: &str, value: &T) -> std::io::Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, serde_json::to_string_pretty(value).unwrap())?;
        self.files.push(name.to_string());
        Ok(())
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn note_file(&mut self, name: &str) {
        self.files.push(name.to_string());
    }

    /// Writes summary.json and returns the pass flag.
    pub fn finish(mut self) -> std::io::Result<bool> {
        let mut metrics = Map::new();
        for (k, v) in std::mem::take(&mut self.metrics) {
            metrics.insert(k, v);
        }
        let summary = json!({
            "schema": "itespec/1",
            "task": self.task,
            "pass": self.pass,
            "metrics": Value::Object(metrics),
            "files": self.files,
        });
        fs::write(
            self.dir.join("summary.json"),
            serde_json::to_string_pretty(&summary).unwrap(),
        )?;
        Ok(self.pass)
    }
}

pub fn fmt_f(v: f64) -> String {
    format!("{v:.12e}")
}
