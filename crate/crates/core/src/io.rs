//! CSV and JSON files: sampled paths, record tables and summaries.
//!
//! Floats are written with 17 significant digits so that every value reads
//! back bit for bit.

use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::path::GridPath;

/// `x` with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// One CSV field.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Float(f64),
    Int(u64),
    Text(String),
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Float(x) => fmt_f64(*x),
            Cell::Int(i) => i.to_string(),
            Cell::Text(s) => s.clone(),
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Float(x)
    }
}

impl From<u64> for Cell {
    fn from(i: u64) -> Self {
        Cell::Int(i)
    }
}

impl From<usize> for Cell {
    fn from(i: usize) -> Self {
        Cell::Int(i as u64)
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Text(s.to_string())
    }
}

impl From<String> for Cell {
    fn from(s: String) -> Self {
        Cell::Text(s)
    }
}

/// A header plus rows, written as CSV.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|h| h.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header).map_err(csv_err)?;
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::render)).map_err(csv_err)?;
        }
        w.into_inner().map_err(|e| Error::Io(e.into_error()))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_csv()?)?;
        Ok(())
    }
}

fn csv_err(e: csv::Error) -> Error {
    if e.is_io_error() {
        match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::Io(io),
            _ => unreachable!(),
        }
    } else {
        Error::Parse(e.to_string())
    }
}

/// The CSV form of a path: header `t,<value_name>`, one row per grid point.
pub fn path_table(p: &GridPath, value_name: &str) -> Table {
    let mut t = Table::new(&["t", value_name]);
    for (k, v) in p.values().iter().enumerate() {
        t.push(vec![p.time(k).into(), (*v).into()]);
    }
    t
}

pub fn write_path_csv(path: &Path, p: &GridPath, value_name: &str) -> Result<()> {
    path_table(p, value_name).write(path)
}

/// Parses a two-column CSV path with a header row and a uniform time grid.
pub fn parse_path_csv(text: &str) -> Result<GridPath> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut times = Vec::new();
    let mut values = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        if rec.len() != 2 {
            return Err(Error::Parse(format!(
                "row {}: expected 2 columns, found {}",
                line + 2,
                rec.len()
            )));
        }
        let num = |i: usize| -> Result<f64> {
            let x: f64 = rec[i]
                .parse()
                .map_err(|_| Error::Parse(format!("row {}: '{}' is not a number", line + 2, &rec[i])))?;
            Ok(x)
        };
        times.push(num(0)?);
        values.push(num(1)?);
    }
    if times.len() < 2 {
        return Err(Error::Parse("a path needs at least two rows".into()));
    }
    let n = times.len() - 1;
    let t0 = times[0];
    let dt = (times[n] - t0) / n as f64;
    if !(dt > 0.0) {
        return Err(Error::Parse("time column must be increasing".into()));
    }
    for (k, t) in times.iter().enumerate() {
        let want = t0 + k as f64 * dt;
        if (t - want).abs() > 1e-9 * dt.max(want.abs()) {
            return Err(Error::Parse(format!(
                "time column is not a uniform grid: row {} has t = {t}, expected {want}",
                k + 2
            )));
        }
    }
    GridPath::new(t0, dt, values).map_err(|e| Error::Parse(e.to_string()))
}

pub fn read_path_csv(path: &Path) -> Result<GridPath> {
    let text = fs::read_to_string(path)?;
    parse_path_csv(&text)
}

/// Pretty JSON with a trailing newline.
pub fn to_json<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn path_round_trip_is_lossless() {
        let p = GridPath::from_fn(37, 1.3, |t| (7.1 * t).sin() / 3.0 + 1e-300).unwrap();
        let csv = String::from_utf8(path_table(&p, "value").to_csv().unwrap()).unwrap();
        assert!(csv.starts_with("t,value\n"));
        let back = parse_path_csv(&csv).unwrap();
        assert_eq!(back.values(), p.values());
        assert_eq!(back.steps(), 37);
        assert!((back.dt() - p.dt()).abs() <= 1e-15);
    }

    #[test]
    fn malformed_input_is_a_parse_error() {
        for bad in [
            "t,value\n0,1\n",
            "t,value\n0,0\n0.5,x\n1,2\n",
            "t,value\n0,0\n0.2,1\n1,2\n",
            "t,value\n0,0,0\n1,1,1\n",
            "t,value\n1,0\n0,1\n",
        ] {
            let err = parse_path_csv(bad).unwrap_err();
            assert!(err.is_config(), "{bad:?}: {err}");
        }
    }

    #[test]
    fn table_renders_cells() {
        let mut t = Table::new(&["a", "b", "c"]);
        t.push(vec![1usize.into(), 0.5.into(), "ok".into()]);
        let s = String::from_utf8(t.to_csv().unwrap()).unwrap();
        assert_eq!(s, "a,b,c\n1,5.0000000000000000e-1,ok\n");
    }

    proptest! {
        #[test]
        fn seventeen_digits_round_trip(x in proptest::num::f64::NORMAL | proptest::num::f64::SUBNORMAL) {
            prop_assert_eq!(fmt_f64(x).parse::<f64>().unwrap(), x);
        }
    }
}
