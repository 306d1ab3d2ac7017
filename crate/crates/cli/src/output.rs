//! Artifact files. Every file starts with the provenance of the run.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use serde::Serialize;
use serde_json::{Map, Value};

use crate::config::Config;
use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Provenance {
    pub tool: &'static str,
    pub version: &'static str,
    pub scenario: String,
    pub seed: u64,
    pub config_sha256: String,
}

impl Provenance {
    pub fn new(cfg: &Config, scenario: &str) -> Self {
        Self {
            tool: env!("CARGO_BIN_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            scenario: scenario.to_string(),
            seed: cfg.seed,
            config_sha256: cfg.digest(),
        }
    }

    fn comment(&self) -> String {
        format!(
            "# {} {} scenario={} seed={} config_sha256={}\n",
            self.tool, self.version, self.scenario, self.seed, self.config_sha256
        )
    }
}

/// Plot-ready rows.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table {
    #[serde(skip)]
    pub name: &'static str,
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Value>>,
}

impl Table {
    pub fn new(name: &'static str, columns: &[&'static str]) -> Self {
        Self {
            name,
            columns: columns.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Value>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    fn csv(&self) -> String {
        let mut s = self.columns.join(",");
        s.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row
                .iter()
                .map(|v| match v {
                    Value::Null => String::new(),
                    Value::String(x) => x.clone(),
                    other => other.to_string(),
                })
                .collect();
            s.push_str(&cells.join(","));
            s.push('\n');
        }
        s
    }
}

/// Scenario result: a JSON summary plus zero or more tables.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub summary: Value,
    pub tables: Vec<Table>,
}

#[derive(Serialize)]
struct JsonFile<'a> {
    provenance: &'a Provenance,
    summary: &'a Value,
    #[serde(skip_serializing_if = "Map::is_empty")]
    tables: Map<String, Value>,
}

/// Write the report under `dir` and return the paths written.
pub fn write_report(dir: &Path, prov: &Provenance, cfg: &Config, report: &Report, format: Format) -> Result<Vec<PathBuf>, CliError> {
    fs::create_dir_all(dir)?;
    let stem = prov.scenario.replace('-', "_");
    let mut written = Vec::new();
    let mut put = |name: String, body: String| -> Result<(), CliError> {
        let path = dir.join(name);
        fs::File::create(&path)?.write_all(body.as_bytes())?;
        written.push(path);
        Ok(())
    };

    put(format!("{stem}_config.toml"), format!("{}{}", prov.comment(), cfg.canonical()))?;
    let mut tables = Map::new();
    match format {
        Format::Csv => {
            for t in &report.tables {
                let name = if t.name.is_empty() {
                    format!("{stem}.csv")
                } else {
                    format!("{stem}_{}.csv", t.name)
                };
                put(name, format!("{}{}", prov.comment(), t.csv()))?;
            }
        }
        Format::Json => {
            for t in &report.tables {
                let key = if t.name.is_empty() { stem.clone() } else { t.name.to_string() };
                tables.insert(key, serde_json::to_value(t).map_err(|e| CliError::Numerical(e.to_string()))?);
            }
        }
    }
    let file = JsonFile {
        provenance: prov,
        summary: &report.summary,
        tables,
    };
    let mut body = serde_json::to_string_pretty(&file).map_err(|e| CliError::Numerical(e.to_string()))?;
    body.push('\n');
    put(format!("{stem}.json"), body)?;
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn csv_cells() {
        let mut t = Table::new("", &["a", "b", "c"]);
        t.push(vec![json!(1.5), Value::Null, json!("x")]);
        assert_eq!(t.csv(), "a,b,c\n1.5,,x\n");
    }

    #[test]
    fn provenance_comment_has_digest_and_seed() {
        let cfg = Config::default();
        let p = Provenance::new(&cfg, "dbr");
        let c = p.comment();
        assert!(c.starts_with("# qdsps "));
        assert!(c.contains(&cfg.digest()) && c.contains("seed=1"));
    }
}
