//! Result documents and the files written under `--out`.

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::{Map, Value};
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

/// Bumped whenever a field of the JSON output changes meaning or goes away.
pub const SCHEMA_VERSION: u32 = 1;

const PLOT_SCRIPT: &str = r#"#!/usr/bin/env python3
# Plots every CSV next to this script: first column against the others.
import csv
import pathlib

import matplotlib.pyplot as plt

here = pathlib.Path(__file__).resolve().parent
for path in sorted(here.glob("*.csv")):
    with path.open() as f:
        rows = list(csv.reader(f))
    header, data = rows[0], [[float(x) for x in r] for r in rows[1:] if r]
    if not data:
        continue
    fig, ax = plt.subplots()
    for j in range(1, len(header)):
        ax.plot([r[0] for r in data], [r[j] for r in data], label=header[j])
    ax.set_xlabel(header[0])
    ax.legend()
    ax.set_title(path.stem)
    fig.savefig(path.with_suffix(".png"), dpi=150)
    plt.close(fig)
"#;

/// A JSON document plus named CSV tables.
pub struct Artifacts {
    doc: Map<String, Value>,
    tables: Vec<(String, String)>,
}

impl Artifacts {
    pub fn new(command: &str) -> Self {
        let mut doc = Map::new();
        doc.insert("schema_version".into(), SCHEMA_VERSION.into());
        doc.insert("command".into(), command.into());
        Self { doc, tables: Vec::new() }
    }

    pub fn set(&mut self, key: &str, value: impl Serialize) -> Result<()> {
        self.doc.insert(key.into(), serde_json::to_value(value)?);
        Ok(())
    }

    pub fn table(&mut self, name: &str, csv: String) {
        self.tables.push((name.into(), csv));
    }

    pub fn json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.doc)?)
    }

    /// Prints the document and, with `out`, writes `summary.json`, the
    /// tables and `plot.py` there.
    pub fn emit(&self, out: Option<&Path>) -> Result<()> {
        let json = self.json()?;
        let mut stdout = io::stdout().lock();
        match writeln!(stdout, "{json}") {
            Err(e) if e.kind() != io::ErrorKind::BrokenPipe => return Err(e.into()),
            _ => {}
        }
        let Some(dir) = out else { return Ok(()) };
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        write(&dir.join("summary.json"), &(json + "\n"))?;
        for (name, body) in &self.tables {
            write(&dir.join(name), body)?;
        }
        write(&dir.join("plot.py"), PLOT_SCRIPT)
    }
}

fn write(path: &PathBuf, body: &str) -> Result<()> {
    fs::write(path, body).with_context(|| format!("writing {}", path.display()))
}

/// `header` then one row per record, floats in shortest round-trip form.
pub fn csv(header: &[&str], rows: impl IntoIterator<Item = Vec<f64>>) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for r in rows {
        let cells: Vec<String> = r.iter().map(|x| format!("{x:?}")).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}
