//! Result tables and their on-disk forms: CSV files with a `#`-prefixed
//! metadata preamble, and optional gnuplot scripts referencing them.
//!
//! Floats are written with 17 significant digits so a rerun with the
//! same configuration produces byte-identical files and every value
//! round-trips exactly through `f64` parsing.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

/// One table cell: a float, verbatim text (labels such as `inf`), or an
/// empty field (a column that does not apply to this row).
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Float(f64),
    Text(String),
    Empty,
}

impl Cell {
    fn render(&self, out: &mut String) {
        match self {
            // 16 fractional digits in scientific notation = 17
            // significant digits: lossless for f64.
            Cell::Float(v) => {
                let _ = write!(out, "{v:.16e}");
            }
            Cell::Text(s) => out.push_str(s),
            Cell::Empty => {}
        }
    }
}

/// A computed table: metadata echoing the effective parameters, a
/// header row, and data rows.
#[derive(Debug, Clone)]
pub struct ResultTable {
    /// Echoed as `# key = value` lines before the header.
    pub metadata: Vec<(String, String)>,
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl ResultTable {
    pub fn new(columns: Vec<&'static str>) -> Self {
        ResultTable { metadata: Vec::new(), columns, rows: Vec::new() }
    }

    pub fn meta(&mut self, key: impl Into<String>, value: impl ToString) {
        self.metadata.push((key.into(), value.to_string()));
    }

    pub fn push_row(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    /// Returns the first non-finite float as (column, row index), if any.
    /// Such a table must not be written; it signals a numeric defect.
    pub fn find_non_finite(&self) -> Option<(&'static str, usize)> {
        for (i, row) in self.rows.iter().enumerate() {
            for (cell, col) in row.iter().zip(&self.columns) {
                if let Cell::Float(v) = cell {
                    if !v.is_finite() {
                        return Some((col, i));
                    }
                }
            }
        }
        None
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.metadata {
            let _ = writeln!(out, "# {k} = {v}");
        }
        let _ = writeln!(out, "{}", self.columns.join(","));
        for row in &self.rows {
            let mut first = true;
            for cell in row {
                if !first {
                    out.push(',');
                }
                first = false;
                cell.render(&mut out);
            }
            out.push('\n');
        }
        out
    }

    pub fn write(&self, path: &Path) -> io::Result<()> {
        fs::write(path, self.to_csv())
    }
}

/// One `plot` entry in a gnuplot script.
#[derive(Debug, Clone)]
pub struct PlotSeries {
    /// CSV file name relative to the script.
    pub csv: String,
    /// gnuplot `using` clause, e.g. `1:2`.
    pub using: String,
    pub title: String,
    /// gnuplot style, e.g. `lines` or `linespoints`.
    pub style: &'static str,
}

/// A plot over emitted CSV files.
#[derive(Debug, Clone)]
pub struct PlotSpec {
    pub stem: String,
    pub title: String,
    pub xlabel: String,
    pub ylabel: String,
    pub series: Vec<PlotSeries>,
}

impl PlotSpec {
    pub fn new(stem: &str, title: &str, xlabel: &str, ylabel: &str) -> Self {
        PlotSpec {
            stem: stem.to_string(),
            title: title.to_string(),
            xlabel: xlabel.to_string(),
            ylabel: ylabel.to_string(),
            series: Vec::new(),
        }
    }

    pub fn line(mut self, csv: &str, using: &str, title: &str) -> Self {
        self.series.push(PlotSeries {
            csv: csv.to_string(),
            using: using.to_string(),
            title: title.to_string(),
            style: "lines",
        });
        self
    }

    pub fn points(mut self, csv: &str, using: &str, title: &str) -> Self {
        self.series.push(PlotSeries {
            csv: csv.to_string(),
            using: using.to_string(),
            title: title.to_string(),
            style: "linespoints",
        });
        self
    }

    pub fn to_script(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "set datafile separator \",\"");
        let _ = writeln!(out, "set datafile commentschars \"#\"");
        let _ = writeln!(out, "set terminal pngcairo size 960,640");
        let _ = writeln!(out, "set output '{}.png'", self.stem);
        let _ = writeln!(out, "set title \"{}\"", self.title);
        let _ = writeln!(out, "set xlabel \"{}\"", self.xlabel);
        let _ = writeln!(out, "set ylabel \"{}\"", self.ylabel);
        let _ = writeln!(out, "set key outside right");
        let mut plot = String::from("plot ");
        let mut first = true;
        for s in &self.series {
            if !first {
                plot.push_str(", \\\n     ");
            }
            first = false;
            let _ = write!(
                plot,
                "'{}' skip 1 using {} with {} title \"{}\"",
                s.csv, s.using, s.style, s.title
            );
        }
        let _ = writeln!(out, "{plot}");
        out
    }

    pub fn write(&self, dir: &Path) -> io::Result<PathBuf> {
        let path = dir.join(format!("{}.gp", self.stem));
        fs::write(&path, self.to_script())?;
        Ok(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip_through_the_csv_encoding() {
        let mut table = ResultTable::new(vec!["x"]);
        let values = [1.0 / 3.0, 2.0_f64.sqrt(), -1.234567890123456e-12, 0.0];
        for v in values {
            table.push_row(vec![Cell::Float(v)]);
        }
        let csv = table.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("x"));
        for (line, v) in lines.zip(values) {
            assert_eq!(line.parse::<f64>().unwrap(), v, "row {line}");
        }
    }

    #[test]
    fn metadata_precedes_the_header_as_comments() {
        let mut table = ResultTable::new(vec!["a", "b"]);
        table.meta("mode", "quench");
        table.meta("L", 4);
        table.push_row(vec![Cell::Float(1.0), Cell::Empty]);
        let csv = table.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "# mode = quench");
        assert_eq!(lines[1], "# L = 4");
        assert_eq!(lines[2], "a,b");
        assert_eq!(lines[3], "1.0000000000000000e0,");
    }

    #[test]
    fn non_finite_cells_are_detected() {
        let mut table = ResultTable::new(vec!["x", "y"]);
        table.push_row(vec![Cell::Float(1.0), Cell::Float(2.0)]);
        table.push_row(vec![Cell::Float(1.0), Cell::Float(f64::NAN)]);
        assert_eq!(table.find_non_finite(), Some(("y", 1)));
    }

    #[test]
    fn gnuplot_script_references_each_series_file() {
        let spec = PlotSpec::new("demo", "Demo", "t", "y")
            .line("demo_a.csv", "1:2", "a")
            .points("demo_b.csv", "1:3", "b");
        let script = spec.to_script();
        assert!(script.contains("set output 'demo.png'"));
        assert!(script.contains("'demo_a.csv' skip 1 using 1:2 with lines"));
        assert!(script.contains("'demo_b.csv' skip 1 using 1:3 with linespoints"));
    }
}
