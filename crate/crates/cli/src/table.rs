//! Numeric result tables and their CSV form.
//!
//! A file starts with `# key: value` metadata lines, then one header row and
//! the data rows. Floats are written with 17 significant digits so that
//! reading a file back reproduces every value bit for bit.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ResultTable {
    pub name: String,
    pub metadata: Vec<(String, String)>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl ResultTable {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Self {
            name: name.to_string(),
            metadata: Vec::new(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn meta(&mut self, key: &str, value: impl ToString) {
        self.metadata.push((key.to_string(), value.to_string()));
    }

    pub fn get_meta(&self, key: &str) -> Option<&str> {
        self.metadata.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    /// Appends a row; panics if its width differs from the header.
    pub fn push(&mut self, row: Vec<f64>) {
        assert_eq!(row.len(), self.columns.len(), "row width for table {}", self.name);
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }

    /// Writes the table with `precision` significant digits (17 round-trips exactly).
    pub fn write<W: Write>(&self, out: W, precision: usize) -> Result<()> {
        let mut out = BufWriter::new(out);
        writeln!(out, "# table: {}", self.name)?;
        for (k, v) in &self.metadata {
            for line in v.lines() {
                writeln!(out, "# {k}: {line}")?;
            }
        }
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(out);
        w.write_record(&self.columns)?;
        let digits = precision.clamp(1, 17) - 1;
        for row in &self.rows {
            w.write_record(row.iter().map(|x| format_float(*x, digits)))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn emit_csv(&self, path: &Path, precision: usize) -> Result<()> {
        let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
        self.write(file, precision)
            .with_context(|| format!("writing {}", path.display()))
    }

    pub fn parse<R: Read>(input: R) -> Result<Self> {
        let mut reader = BufReader::new(input);
        let mut name = String::new();
        let mut metadata: Vec<(String, String)> = Vec::new();
        let mut body = String::new();
        let mut line = String::new();
        loop {
            line.clear();
            if reader.read_line(&mut line)? == 0 {
                break;
            }
            let Some(rest) = line.strip_prefix("# ") else {
                body.push_str(&line);
                reader.read_to_string(&mut body)?;
                break;
            };
            let rest = rest.trim_end_matches('\n');
            let Some((k, v)) = rest.split_once(": ").or_else(|| rest.strip_suffix(':').map(|k| (k, ""))) else {
                bail!("malformed metadata line {rest:?}");
            };
            if k == "table" {
                name = v.to_string();
                continue;
            }
            // a multi-line value is stored as consecutive lines with the same key
            match metadata.last_mut() {
                Some((last, value)) if last == k && k == "config" => {
                    value.push('\n');
                    value.push_str(v);
                }
                _ => metadata.push((k.to_string(), v.to_string())),
            }
        }
        let mut r = csv::ReaderBuilder::new().from_reader(body.as_bytes());
        let columns: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
        let mut rows = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            let row = rec
                .iter()
                .map(|f| f.parse::<f64>().with_context(|| format!("bad number {f:?}")))
                .collect::<Result<Vec<_>>>()?;
            if row.len() != columns.len() {
                bail!("row width {} differs from header width {}", row.len(), columns.len());
            }
            rows.push(row);
        }
        Ok(Self {
            name,
            metadata,
            columns,
            rows,
        })
    }

    pub fn read(path: &Path) -> Result<Self> {
        let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
        Self::parse(f).with_context(|| format!("parsing {}", path.display()))
    }
}

fn format_float(x: f64, digits: usize) -> String {
    if x.is_nan() {
        "NaN".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x:.digits$e}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_table_is_header_only() {
        let t = ResultTable::new("empty", &["a", "b"]);
        let mut buf = Vec::new();
        t.write(&mut buf, 17).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "# table: empty\na,b\n");
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let mut t = ResultTable::new("rt", &["x", "y"]);
        t.meta("config", "[device]\nlength = 26.0");
        t.meta("version", "0.1.0");
        for i in 0..50 {
            let x = (i as f64 * 0.7311).sin() * 10f64.powi(i - 25);
            t.push(vec![x, 1.0 / (i as f64 + 0.1)]);
        }
        t.push(vec![f64::NAN, f64::INFINITY]);
        t.push(vec![-0.0, f64::MIN_POSITIVE]);
        let mut buf = Vec::new();
        t.write(&mut buf, 17).unwrap();
        let back = ResultTable::parse(buf.as_slice()).unwrap();
        assert_eq!(back.name, "rt");
        assert_eq!(back.metadata, t.metadata);
        assert_eq!(back.columns, t.columns);
        for (a, b) in back.rows.iter().flatten().zip(t.rows.iter().flatten()) {
            assert!(a.to_bits() == b.to_bits() || (a.is_nan() && b.is_nan()));
        }
    }

    #[test]
    fn lf_line_endings() {
        let mut t = ResultTable::new("lf", &["x"]);
        t.push(vec![1.0]);
        let mut buf = Vec::new();
        t.write(&mut buf, 17).unwrap();
        assert!(!buf.contains(&b'\r'));
    }
}
