use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::CliError;

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(i64),
    Num(f64),
    Text(String),
    Empty,
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.into())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

impl From<Option<f64>> for Cell {
    fn from(v: Option<f64>) -> Self {
        v.map_or(Cell::Empty, Cell::Num)
    }
}

/// A named CSV table.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(name: &str, header: &[&str]) -> Self {
        Self {
            name: name.into(),
            header: header.iter().map(|h| h.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.header.len(), "row width of table {}", self.name);
        self.rows.push(row);
    }

    /// CSV text: header row, `'\n'` endings, floats in `{:.16e}` (17
    /// significant digits). Non-finite numbers are rejected.
    pub fn render(&self) -> Result<String, CliError> {
        let mut out = self.header.join(",");
        out.push('\n');
        for (r, row) in self.rows.iter().enumerate() {
            for (c, cell) in row.iter().enumerate() {
                if c > 0 {
                    out.push(',');
                }
                match cell {
                    Cell::Int(v) => write!(out, "{v}").unwrap(),
                    Cell::Num(v) if v.is_finite() => write!(out, "{v:.16e}").unwrap(),
                    Cell::Num(v) => {
                        return Err(CliError::Compute(format!(
                            "{} row {r} column {}: non-finite value {v}",
                            self.name, self.header[c]
                        )))
                    }
                    Cell::Text(s) => {
                        assert!(!s.contains([',', '"', '\n', '\r']), "plain text cell");
                        out.push_str(s);
                    }
                    Cell::Empty => {}
                }
            }
            out.push('\n');
        }
        Ok(out)
    }
}

/// Writes `<dir>/<name>.csv`. Nothing is written when a value is not finite.
pub fn emit_csv(table: &Table, dir: &Path) -> Result<PathBuf, CliError> {
    let text = table.render()?;
    let path = dir.join(format!("{}.csv", table.name));
    std::fs::write(&path, text)?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rendering() {
        let mut t = Table::new("t", &["a", "b", "c"]);
        assert_eq!(t.render().unwrap(), "a,b,c\n");
        t.push(vec![3usize.into(), 0.1.into(), Cell::Empty]);
        assert_eq!(t.render().unwrap(), "a,b,c\n3,1.0000000000000001e-1,\n");
        t.push(vec![1usize.into(), f64::NAN.into(), "x".into()]);
        assert!(matches!(t.render(), Err(CliError::Compute(_))));
    }

    #[test]
    fn round_trip_digits() {
        for v in [0.1, 1.0 / 3.0, std::f64::consts::PI * 1e-300, -2.5e17, f64::MIN_POSITIVE] {
            let s = format!("{v:.16e}");
            assert_eq!(s.parse::<f64>().unwrap(), v);
        }
    }
}
