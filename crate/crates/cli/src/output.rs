//! CSV tables, 2D grids with axis files, and the provenance manifest.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};

pub enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Num(v) => format!("{v:e}"),
            Cell::Int(v) => v.to_string(),
            Cell::Text(s) => s.clone(),
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<i64> for Cell {
    fn from(v: i64) -> Self {
        Cell::Int(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

/// Row or column axis of a grid: one or more named coordinate columns.
pub struct Axis<'a> {
    pub columns: Vec<(&'a str, Vec<f64>)>,
}

impl<'a> Axis<'a> {
    pub fn new(name: &'a str, values: Vec<f64>) -> Self {
        Self {
            columns: vec![(name, values)],
        }
    }

    pub fn with(mut self, name: &'a str, values: Vec<f64>) -> Self {
        self.columns.push((name, values));
        self
    }

    fn len(&self) -> usize {
        self.columns[0].1.len()
    }

    fn header(&self) -> String {
        self.columns.iter().map(|c| c.0).collect::<Vec<_>>().join(", ")
    }
}

/// Collects output files of one command run and writes the manifest.
pub struct Bundle {
    dir: PathBuf,
    command: String,
    files: Vec<(String, String)>,
    results: Vec<(String, String)>,
}

impl Bundle {
    pub fn create(dir: &Path, command: &str) -> Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            command: command.to_string(),
            files: Vec::new(),
            results: Vec::new(),
        })
    }

    /// Records a scalar result in the manifest.
    pub fn result(&mut self, key: &str, value: impl ToString) {
        self.results.push((key.to_string(), value.to_string()));
    }

    pub fn table<R, C>(&mut self, name: &str, description: &str, header: &[&str], rows: R) -> Result<()>
    where
        R: IntoIterator<Item = Vec<C>>,
        C: Into<Cell>,
    {
        let file = format!("{name}.csv");
        let path = self.dir.join(&file);
        let mut w = csv::Writer::from_path(&path).with_context(|| format!("writing {}", path.display()))?;
        w.write_record(header)?;
        for row in rows {
            let row: Vec<String> = row.into_iter().map(|c| c.into().render()).collect();
            anyhow::ensure!(row.len() == header.len(), "{file}: row width differs from header");
            w.write_record(&row)?;
        }
        w.flush()?;
        self.files.push((file, format!("{description}; columns: {}", header.join(", "))));
        Ok(())
    }

    /// Writes `values[i][j]` as `<name>.csv` (no header) with
    /// `<name>_rows.csv` and `<name>_cols.csv` holding the axes.
    pub fn grid(&mut self, name: &str, description: &str, rows: Axis, cols: Axis, values: &[Vec<f64>]) -> Result<()> {
        anyhow::ensure!(values.len() == rows.len(), "{name}: row axis length differs from grid");
        anyhow::ensure!(
            values.iter().all(|r| r.len() == cols.len()),
            "{name}: column axis length differs from grid"
        );
        let file = format!("{name}.csv");
        let path = self.dir.join(&file);
        let mut w = csv::WriterBuilder::new()
            .has_headers(false)
            .from_path(&path)
            .with_context(|| format!("writing {}", path.display()))?;
        for row in values {
            w.write_record(row.iter().map(|v| format!("{v:e}")))?;
        }
        w.flush()?;
        self.files.push((
            file,
            format!(
                "{description}; grid {}x{}, rows: {name}_rows.csv ({}), columns: {name}_cols.csv ({})",
                rows.len(),
                cols.len(),
                rows.header(),
                cols.header()
            ),
        ));
        for (suffix, axis) in [("rows", &rows), ("cols", &cols)] {
            let file = format!("{name}_{suffix}.csv");
            let mut w = csv::Writer::from_path(self.dir.join(&file))?;
            w.write_record(axis.columns.iter().map(|c| c.0))?;
            for i in 0..axis.len() {
                w.write_record(axis.columns.iter().map(|c| format!("{:e}", c.1[i])))?;
            }
            w.flush()?;
        }
        Ok(())
    }

    /// Writes `manifest.txt`: command, parameters, results and files.
    pub fn finish(self, parameters: &std::collections::BTreeMap<String, String>) -> Result<PathBuf> {
        let mut text = format!("command = {}\n", self.command);
        let stamp = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        text += &format!("generated_unix = {stamp}\n");
        for (k, v) in parameters {
            text += &format!("param.{k} = {v}\n");
        }
        for (k, v) in &self.results {
            text += &format!("result.{k} = {v}\n");
        }
        for (f, d) in &self.files {
            text += &format!("file.{f} = {d}\n");
        }
        let path = self.dir.join("manifest.txt");
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }
}
