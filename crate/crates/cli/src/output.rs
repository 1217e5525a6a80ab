//! CSV tables with `# key=value` headers and the run manifest.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::Opts;

/// Seventeen significant digits, locale independent.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub struct Table {
    headers: Vec<(String, String)>,
    columns: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Table { headers: Vec::new(), columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn header(mut self, key: &str, value: impl ToString) -> Self {
        self.headers.push((key.to_string(), value.to_string()));
        self
    }

    pub fn row(&mut self, values: &[f64]) {
        self.rows.push(values.iter().map(|&v| fmt_f64(v)).collect());
    }

    /// Row whose first cell is an integer index.
    pub fn indexed_row(&mut self, index: usize, values: &[f64]) {
        let mut r = vec![index.to_string()];
        r.extend(values.iter().map(|&v| fmt_f64(v)));
        self.rows.push(r);
    }

    pub fn write(&self, path: &Path) -> anyhow::Result<()> {
        let mut f = std::io::BufWriter::new(fs::File::create(path)?);
        for (k, v) in &self.headers {
            writeln!(f, "# {k}={v}")?;
        }
        writeln!(f, "# columns={}", self.columns.join(","))?;
        for r in &self.rows {
            writeln!(f, "{}", r.join(","))?;
        }
        f.flush()?;
        Ok(())
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    fs::write(path, serde_json::to_string_pretty(value)? + "\n")?;
    Ok(())
}

/// Everything needed to repeat a run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config: Opts,
    pub seed: Option<u64>,
    pub tool: String,
    pub version: String,
    pub started: String,
    pub finished: String,
    pub outputs: Vec<PathBuf>,
}

impl RunManifest {
    pub fn new(command: &str, config: Opts, started: chrono::DateTime<chrono::Utc>, outputs: Vec<PathBuf>) -> Self {
        RunManifest {
            command: command.to_string(),
            seed: config.seed,
            config,
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            started: started.to_rfc3339(),
            finished: chrono::Utc::now().to_rfc3339(),
            outputs,
        }
    }
}

/// Python script that draws a grid CSV with matplotlib.
pub fn grid_plot_script(csv: &Path, label: &str) -> String {
    let name = csv.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    format!(
        r##"import numpy as np
import matplotlib.pyplot as plt

d = np.loadtxt("{name}", delimiter=",", comments="#")
n1 = len(np.unique(d[:, 0]))
v = d[:, 2].reshape(n1, -1)
extent = [d[:, 0].min(), d[:, 0].max(), d[:, 1].min(), d[:, 1].max()]
plt.imshow(v.T, origin="lower", extent=extent, cmap="RdBu_r")
plt.colorbar(label="{label}")
plt.xlabel("nu1")
plt.ylabel("nu2")
plt.savefig("{stem}.png", dpi=150)
"##,
        stem = name.trim_end_matches(".csv"),
    )
}
