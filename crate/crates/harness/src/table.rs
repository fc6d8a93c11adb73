//! Result tables and their CSV form.
//!
//! Every written row carries the provenance columns `config_hash`,
//! `code_version`, `tableau`, `n`, `m` and `stage_tol` after the data columns.

use std::path::Path;

use crate::error::{HarnessError, Result};

pub const CODE_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Float(f64),
    Int(i64),
    Text(String),
}

impl Cell {
    fn render(&self) -> String {
        match self {
            // 17 significant digits
            Cell::Float(x) => format!("{x:.16e}"),
            Cell::Int(i) => i.to_string(),
            Cell::Text(s) => s.clone(),
        }
    }

    pub fn as_f64(&self) -> f64 {
        match self {
            Cell::Float(x) => *x,
            Cell::Int(i) => *i as f64,
            Cell::Text(_) => f64::NAN,
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Float(x)
    }
}

impl From<usize> for Cell {
    fn from(x: usize) -> Self {
        Cell::Int(x as i64)
    }
}

impl From<u64> for Cell {
    fn from(x: u64) -> Self {
        Cell::Int(x as i64)
    }
}

impl From<i64> for Cell {
    fn from(x: i64) -> Self {
        Cell::Int(x)
    }
}

impl From<&str> for Cell {
    fn from(x: &str) -> Self {
        Cell::Text(x.to_string())
    }
}

impl From<String> for Cell {
    fn from(x: String) -> Self {
        Cell::Text(x)
    }
}

/// Run-wide provenance; `n` and `m` are per row.
#[derive(Debug, Clone, PartialEq)]
pub struct Provenance {
    pub config_hash: String,
    pub tableau: String,
    pub stage_tol: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub cells: Vec<Cell>,
    pub n: Option<usize>,
    /// Cutoff label: an integer, or `full`.
    pub m: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Row>,
}

impl Table {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Table {
            name: name.to_string(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, cells: Vec<Cell>, n: Option<usize>, m: impl Into<String>) {
        assert_eq!(cells.len(), self.columns.len(), "row width of table {}", self.name);
        self.rows.push(Row { cells, n, m: m.into() });
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// Numeric values of a column; text cells read as NaN.
    pub fn column(&self, name: &str) -> Vec<f64> {
        let i = self
            .column_index(name)
            .unwrap_or_else(|| panic!("table {} has no column {name}", self.name));
        self.rows.iter().map(|r| r.cells[i].as_f64()).collect()
    }

    pub fn text_column(&self, name: &str) -> Vec<String> {
        let i = self
            .column_index(name)
            .unwrap_or_else(|| panic!("table {} has no column {name}", self.name));
        self.rows.iter().map(|r| r.cells[i].render()).collect()
    }

    /// Rows whose cell in `name` equals `value`.
    pub fn filter(&self, name: &str, value: f64) -> Table {
        let i = self.column_index(name).expect("filter column");
        Table {
            name: self.name.clone(),
            columns: self.columns.clone(),
            rows: self
                .rows
                .iter()
                .filter(|r| r.cells[i].as_f64() == value)
                .cloned()
                .collect(),
        }
    }

    pub fn to_csv_bytes(&self, prov: &Provenance) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header: Vec<&str> = self.columns.iter().map(|s| s.as_str()).collect();
        header.extend(["config_hash", "code_version", "tableau", "n", "m", "stage_tol"]);
        w.write_record(&header)?;
        for row in &self.rows {
            let mut rec: Vec<String> = row.cells.iter().map(Cell::render).collect();
            rec.push(prov.config_hash.clone());
            rec.push(CODE_VERSION.to_string());
            rec.push(prov.tableau.clone());
            rec.push(row.n.map_or_else(|| "NA".to_string(), |n| n.to_string()));
            rec.push(row.m.clone());
            rec.push(Cell::Float(prov.stage_tol).render());
            w.write_record(&rec)?;
        }
        w.into_inner().map_err(|e| HarnessError::Io(e.to_string()))
    }

    /// Writes `<dir>/<name>.csv` and returns its path.
    pub fn write(&self, dir: &Path, prov: &Provenance) -> Result<std::path::PathBuf> {
        std::fs::create_dir_all(dir).map_err(|e| HarnessError::Io(format!("{}: {e}", dir.display())))?;
        let path = dir.join(format!("{}.csv", self.name));
        std::fs::write(&path, self.to_csv_bytes(prov)?)
            .map_err(|e| HarnessError::Io(format!("{}: {e}", path.display())))?;
        Ok(path)
    }
}
