//! Column access over CSV files written by the commands.

use std::path::Path;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone)]
pub struct Table {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn read(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        let mut rdr = csv::ReaderBuilder::new().has_headers(false).from_reader(text.as_bytes());
        let mut records = rdr.records();
        let headers = match records.next() {
            Some(h) => h?.iter().map(str::to_string).collect(),
            None => Vec::new(),
        };
        let rows = records
            .map(|r| r.map(|r| r.iter().map(str::to_string).collect()))
            .collect::<Result<_, _>>()?;
        Ok(Self { headers, rows })
    }

    /// Fails with every required column that is absent.
    pub fn require(&self, names: &[&str]) -> CliResult<()> {
        let missing: Vec<String> = names
            .iter()
            .filter(|n| !self.headers.iter().any(|h| h == *n))
            .map(|n| n.to_string())
            .collect();
        if missing.is_empty() {
            Ok(())
        } else {
            Err(curvo::Error::MissingColumns(missing).into())
        }
    }

    pub fn index(&self, name: &str) -> CliResult<usize> {
        self.headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| curvo::Error::MissingColumns(vec![name.to_string()]).into())
    }

    /// Numeric column; empty cells are `None`.
    pub fn column(&self, name: &str) -> CliResult<Vec<Option<f64>>> {
        let k = self.index(name)?;
        self.rows
            .iter()
            .enumerate()
            .map(|(i, r)| {
                let cell = r.get(k).map(String::as_str).unwrap_or("");
                if cell.is_empty() {
                    Ok(None)
                } else {
                    cell.parse::<f64>().map(Some).map_err(|_| {
                        curvo::Error::MalformedLine {
                            line: i + 2,
                            reason: format!("bad {name} value '{cell}'"),
                        }
                        .into()
                    })
                }
            })
            .collect()
    }

    /// `(x, y)` pairs where both cells are present.
    pub fn pairs(&self, x: &str, y: &str) -> CliResult<Vec<(f64, f64)>> {
        Ok(self
            .column(x)?
            .into_iter()
            .zip(self.column(y)?)
            .filter_map(|(a, b)| Some((a?, b?)))
            .collect())
    }
}
