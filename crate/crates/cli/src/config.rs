//! TOML run configuration: a problem block, one task with its parameter
//! table, an output directory, and a seed.

use itespec_core::problem::{Geometry, IndexMode, ProblemConfig};
use serde::Deserialize;
use std::collections::BTreeMap;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: Option<ProblemBlock>,
    pub task: TaskBlock,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemBlock {
    pub geometry: String,
    pub a: Option<f64>,
    pub b: Option<f64>,
    pub radius: Option<f64>,
    #[serde(default = "default_collar")]
    pub collar_width: f64,
    #[serde(default = "default_smoothness")]
    pub smoothness_degree: u32,
    pub index: IndexBlock,
}

fn default_collar() -> f64 {
    0.1
}
fn default_smoothness() -> u32 {
    2
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IndexBlock {
    pub mode: String,
    pub n: Option<String>,
    pub n1: Option<String>,
    pub n2: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskBlock {
    pub name: String,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_outdir")]
    pub output_dir: String,
    #[serde(default)]
    pub params: BTreeMap<String, toml::Value>,
}

fn default_seed() -> u64 {
    42
}
fn default_outdir() -> String {
    "out".into()
}

impl ProblemBlock {
    pub fn to_core(&self) -> Result<ProblemConfig, String> {
        let geometry = match self.geometry.as_str() {
            "interval" => Geometry::Interval {
                a: self.a.ok_or("problem.a missing for interval geometry")?,
                b: self.b.ok_or("problem.b missing for interval geometry")?,
            },
            "disk" => Geometry::Disk {
                radius: self
                    .radius
                    .ok_or("problem.radius missing for disk geometry")?,
            },
            other => return Err(format!("problem.geometry: unknown geometry `{other}`")),
        };
        let mode = match self.index.mode.as_str() {
            "fixed" => IndexMode::FixedComplex,
            "k-dependent" => IndexMode::KDependent,
            other => return Err(format!("problem.index.mode: unknown mode `{other}`")),
        };
        if mode == IndexMode::FixedComplex && self.index.n.is_none() {
            return Err("problem.index.n missing for fixed mode".into());
        }
        if mode == IndexMode::KDependent && (self.index.n1.is_none() || self.index.n2.is_none()) {
            return Err("problem.index.n1/n2 missing for k-dependent mode".into());
        }
        Ok(ProblemConfig {
            geometry,
            mode,
            n_expr: self.index.n.clone(),
            n1_expr: self.index.n1.clone(),
            n2_expr: self.index.n2.clone(),
            collar_width: self.collar_width,
            smoothness_degree: self.smoothness_degree,
            sample_count: 0,
        })
    }
}

/// Typed access to the per-task parameter table with named diagnostics.
pub struct Params<'a>(pub &'a BTreeMap<String, toml::Value>);

impl<'a> Params<'a> {
    pub fn f64(&self, key: &str) -> Result<f64, String> {
        self.any(key)?
            .as_float()
            .or_else(|| self.any(key).ok().and_then(|v| v.as_integer().map(|i| i as f64)))
            .ok_or_else(|| format!("task.params.{key}: expected a number"))
    }

    pub fn f64_or(&self, key: &str, default: f64) -> Result<f64, String> {
        if self.0.contains_key(key) {
            self.f64(key)
        } else {
            Ok(default)
        }
    }

    pub fn usize(&self, key: &str) -> Result<usize, String> {
        self.any(key)?
            .as_integer()
            .map(|v| v as usize)
            .ok_or_else(|| format!("task.params.{key}: expected an integer"))
    }

    pub fn usize_or(&self, key: &str, default: usize) -> Result<usize, String> {
        if self.0.contains_key(key) {
            self.usize(key)
        } else {
            Ok(default)
        }
    }

    pub fn str_or(&self, key: &str, default: &str) -> Result<String, String> {
        if !self.0.contains_key(key) {
            return Ok(default.to_string());
        }
        self.any(key)?
            .as_str()
            .map(|s| s.to_string())
            .ok_or_else(|| format!("task.params.{key}: expected a string"))
    }

    pub fn f64_list(&self, key: &str) -> Result<Vec<f64>, String> {
        let v = self.any(key)?;
        let arr = v
            .as_array()
            .ok_or_else(|| format!("task.params.{key}: expected an array"))?;
        arr.iter()
            .map(|x| {
                x.as_float()
                    .or_else(|| x.as_integer().map(|i| i as f64))
                    .ok_or_else(|| format!("task.params.{key}: expected numbers"))
            })
            .collect()
    }

    pub fn f64_list_or(&self, key: &str, default: &[f64]) -> Result<Vec<f64>, String> {
        if self.0.contains_key(key) {
            self.f64_list(key)
        } else {
            Ok(default.to_vec())
        }
    }

    fn any(&self, key: &str) -> Result<&toml::Value, String> {
        self.0
            .get(key)
            .ok_or_else(|| format!("task.params.{key}: missing required field"))
    }
}
