//! Minimal RFC 4180 writer with a fixed header.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Result, SnnError};

/// A table whose rows all have as many cells as the header.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvTable {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Self {
            header: header.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn header(&self) -> &[String] {
        &self.header
    }

    pub fn rows(&self) -> &[Vec<String>] {
        &self.rows
    }

    pub fn push<S: ToString>(&mut self, row: impl IntoIterator<Item = S>) -> Result<()> {
        let row: Vec<String> = row.into_iter().map(|c| c.to_string()).collect();
        if row.len() != self.header.len() {
            return Err(SnnError::mismatch("csv row", self.header.len(), row.len()));
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = String::new();
        for row in std::iter::once(&self.header).chain(&self.rows) {
            let line: Vec<String> = row.iter().map(|c| quote(c)).collect();
            let _ = write!(out, "{}\r\n", line.join(","));
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv_string()).map_err(|e| SnnError::io(path, e))
    }
}

fn quote(cell: &str) -> String {
    if cell.contains([',', '"', '\r', '\n']) {
        format!("\"{}\"", cell.replace('"', "\"\""))
    } else {
        cell.to_string()
    }
}

/// Split one CSV document into records, honoring quotes.
pub fn parse_csv(text: &str) -> Vec<Vec<String>> {
    let mut records = Vec::new();
    let mut record = Vec::new();
    let mut cell = String::new();
    let mut quoted = false;
    let mut chars = text.chars().peekable();
    while let Some(c) = chars.next() {
        if quoted {
            match c {
                '"' if chars.peek() == Some(&'"') => {
                    cell.push('"');
                    chars.next();
                }
                '"' => quoted = false,
                _ => cell.push(c),
            }
            continue;
        }
        match c {
            '"' => quoted = true,
            ',' => record.push(std::mem::take(&mut cell)),
            '\r' => {}
            '\n' => {
                record.push(std::mem::take(&mut cell));
                records.push(std::mem::take(&mut record));
            }
            _ => cell.push(c),
        }
    }
    if !cell.is_empty() || !record.is_empty() {
        record.push(cell);
        records.push(record);
    }
    records
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quoting() {
        let mut t = CsvTable::new(["name", "value"]);
        t.push(["plain", "1"]).unwrap();
        t.push(["a,b", "say \"hi\""]).unwrap();
        let s = t.to_csv_string();
        assert_eq!(s, "name,value\r\nplain,1\r\n\"a,b\",\"say \"\"hi\"\"\"\r\n");
        assert_eq!(parse_csv(&s), vec![vec!["name", "value"], vec!["plain", "1"], vec!["a,b", "say \"hi\""]]);
    }

    #[test]
    fn rejects_ragged_rows() {
        let mut t = CsvTable::new(["a", "b"]);
        assert!(t.push(["1"]).is_err());
    }
}
