//! CSV series files: comma separated, `.` decimal point, LF newlines,
//! mandatory header whose first column is `time`.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::constitutive::StrainMeasure;
use crate::error::{Error, Result};
use crate::qlv::StrainHistory;

/// Significant digits at which values are written in shortest round-trip
/// form.
pub const FULL_PRECISION: usize = 17;

/// A rectangular table of named numeric columns, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesTable {
    columns: Vec<String>,
    rows: Vec<Vec<f64>>,
}

impl SeriesTable {
    pub fn new<S: Into<String>>(columns: impl IntoIterator<Item = S>) -> Self {
        Self { columns: columns.into_iter().map(Into::into).collect(), rows: Vec::new() }
    }

    /// Builds a table from equally long columns.
    pub fn from_columns(columns: Vec<(String, Vec<f64>)>) -> Result<Self> {
        let n = columns.first().map_or(0, |c| c.1.len());
        if let Some((name, _)) = columns.iter().find(|c| c.1.len() != n) {
            return Err(Error::Domain(format!("column `{name}` has a different length")));
        }
        let rows = (0..n).map(|i| columns.iter().map(|c| c.1[i]).collect()).collect();
        Ok(Self { columns: columns.into_iter().map(|c| c.0).collect(), rows })
    }

    pub fn push_row(&mut self, row: Vec<f64>) -> Result<()> {
        if row.len() != self.columns.len() {
            return Err(Error::Domain(format!("row has {} values for {} columns", row.len(), self.columns.len())));
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[j]).collect())
    }

    pub fn time(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r[0]).collect()
    }

    /// Strain history from a `stretch`, `stretch_minus_one` or
    /// `green_strain` column.
    pub fn strain_history(&self, column: &str) -> Result<StrainHistory> {
        let values = self.column(column).ok_or_else(|| Error::Domain(format!("no column named `{column}`")))?;
        let (values, measure) = match column {
            "stretch" => (values, StrainMeasure::Stretch),
            "stretch_minus_one" => (values.iter().map(|x| 1.0 + x).collect(), StrainMeasure::Stretch),
            "green_strain" => (values, StrainMeasure::GreenStrain),
            other => {
                return Err(Error::Domain(format!(
                    "column `{other}` is not a strain channel (stretch, stretch_minus_one, green_strain)"
                )))
            }
        };
        StrainHistory::new(self.time(), values, measure)
    }
}

/// Formats `value` rounded to `precision` significant digits, printed in
/// the shortest form that reads back to the rounded value.
pub fn format_value(value: f64, precision: usize) -> Result<String> {
    if !value.is_finite() {
        return Err(Error::Domain(format!("refusing to write non-finite value {value}")));
    }
    if precision == 0 {
        return Err(Error::invalid("precision", 0.0, "must be >= 1"));
    }
    let v = if precision >= FULL_PRECISION {
        value
    } else {
        format!("{:.*e}", precision - 1, value).parse::<f64>().expect("formatted float parses")
    };
    // normalize -0 so identical magnitudes print identically
    let v = if v == 0.0 { 0.0 } else { v };
    Ok(format!("{v:?}"))
}

/// Renders the table as CSV text.
pub fn render_series(table: &SeriesTable, precision: usize) -> Result<String> {
    let mut out = String::new();
    out.push_str(&table.columns.join(","));
    out.push('\n');
    for row in &table.rows {
        for (j, &v) in row.iter().enumerate() {
            if j > 0 {
                out.push(',');
            }
            write!(out, "{}", format_value(v, precision)?).expect("writing to a String");
        }
        out.push('\n');
    }
    Ok(out)
}

pub fn write_series(table: &SeriesTable, path: &Path, precision: usize) -> Result<()> {
    let text = render_series(table, precision)?;
    fs::write(path, text).map_err(|source| Error::Io { path: path.to_path_buf(), source })
}

/// Parses CSV text; `origin` names the source in error messages.
pub fn parse_series(text: &str, origin: &str) -> Result<SeriesTable> {
    let err = |line: usize, reason: String| Error::Parse { path: origin.to_string(), line, reason };
    let mut lines = text.split('\n').enumerate().map(|(i, l)| (i + 1, l.strip_suffix('\r').unwrap_or(l)));

    let Some((hline, header)) = lines.by_ref().find(|(_, l)| !l.trim().is_empty()) else {
        return Err(err(1, "no data rows".into()));
    };
    let columns: Vec<String> = header.split(',').map(|c| c.trim().to_string()).collect();
    if columns.iter().all(|c| c.parse::<f64>().is_ok()) {
        return Err(err(hline, "missing header row".into()));
    }
    if columns[0] != "time" {
        return Err(err(hline, format!("first column must be `time`, found `{}`", columns[0])));
    }
    if let Some(c) = columns.iter().find(|c| c.is_empty()) {
        return Err(err(hline, format!("empty column name `{c}`")));
    }
    for (i, c) in columns.iter().enumerate() {
        if columns[..i].contains(c) {
            return Err(err(hline, format!("duplicate column `{c}`")));
        }
    }

    let mut table = SeriesTable::new(columns.clone());
    for (line, raw) in lines {
        if raw.trim().is_empty() {
            continue;
        }
        let cells: Vec<&str> = raw.split(',').collect();
        if cells.len() != columns.len() {
            return Err(err(line, format!("expected {} cells, found {}", columns.len(), cells.len())));
        }
        let mut row = Vec::with_capacity(cells.len());
        for (cell, name) in cells.iter().zip(&columns) {
            let v: f64 = cell
                .trim()
                .parse()
                .map_err(|_| err(line, format!("column `{name}`: `{}` is not a number", cell.trim())))?;
            if !v.is_finite() {
                return Err(err(line, format!("column `{name}`: value must be finite")));
            }
            row.push(v);
        }
        if let Some(prev) = table.rows.last() {
            if row[0] == prev[0] {
                return Err(err(line, format!("duplicated timestamp {}", row[0])));
            }
            if row[0] < prev[0] {
                return Err(err(line, format!("time decreases ({} after {})", row[0], prev[0])));
            }
        }
        table.rows.push(row);
    }
    if table.rows.is_empty() {
        return Err(err(hline, "no data rows".into()));
    }
    Ok(table)
}

pub fn read_series(path: &Path) -> Result<SeriesTable> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
    parse_series(&text, &path.display().to_string())
}
