// SPDX-License-Identifier: MIT OR Apache-2.0

//! Single-column count CSV files.

use std::io::{Read, Write};
use std::path::Path;

use lrsm_core::CountSeries;

use crate::error::CliError;

/// Column name written by [`write_series`].
pub const COLUMN: &str = "x";

/// Parses a single-column CSV of non-negative integers.
///
/// A first row that is not a number is taken as a header. Blank lines are
/// skipped. Floats, negative values and extra columns are rejected.
pub fn parse_series<R: Read>(reader: R) -> Result<CountSeries, CliError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut values = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| CliError::Input(format!("csv: {e}")))?;
        let line = rec.position().map_or(i as u64 + 1, |p| p.line());
        if rec.len() != 1 {
            return Err(CliError::Input(format!(
                "line {line}: expected one column, found {}",
                rec.len()
            )));
        }
        let field = &rec[0];
        if field.is_empty() {
            continue;
        }
        match field.parse::<u64>() {
            Ok(v) => values.push(v),
            Err(_) if values.is_empty() && i == 0 && field.parse::<f64>().is_err() => {}
            Err(_) => {
                let why = if field.starts_with('-') && field[1..].parse::<f64>().is_ok() {
                    "negative value"
                } else if field.parse::<f64>().is_ok() {
                    "not an integer"
                } else {
                    "not a number"
                };
                return Err(CliError::Input(format!("line {line}: {why}: `{field}`")));
            }
        }
    }
    if values.is_empty() {
        return Err(CliError::Input("no observations".into()));
    }
    CountSeries::new(values).map_err(|e| CliError::Input(e.to_string()))
}

pub fn read_series(path: &Path) -> Result<CountSeries, CliError> {
    let file = std::fs::File::open(path)
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    parse_series(std::io::BufReader::new(file))
}

/// Writes `x` as a CSV with header [`COLUMN`] and LF line endings.
pub fn write_series<W: Write>(mut out: W, series: &CountSeries) -> std::io::Result<()> {
    writeln!(out, "{COLUMN}")?;
    for v in series.values() {
        writeln!(out, "{v}")?;
    }
    out.flush()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str) -> Result<Vec<u64>, CliError> {
        parse_series(s.as_bytes()).map(|c| c.values().to_vec())
    }

    #[test]
    fn header_is_optional() {
        assert_eq!(parse("x\n1\n2\n").unwrap(), vec![1, 2]);
        assert_eq!(parse("3\n4\n\n5\n").unwrap(), vec![3, 4, 5]);
        assert_eq!(parse("count\r\n7\r\n").unwrap(), vec![7]);
    }

    #[test]
    fn invalid_values_are_rejected() {
        let e = parse("x\n1\n-2\n").unwrap_err().to_string();
        assert!(e.contains("line 3") && e.contains("negative"), "{e}");
        assert!(parse("1\n2.5\n")
            .unwrap_err()
            .to_string()
            .contains("not an integer"));
        assert!(parse("1\nabc\n").is_err());
        assert!(parse("1,2\n").is_err());
        assert!(parse("x\n").is_err());
        assert!(parse("1.0\n2\n").is_err());
    }

    #[test]
    fn round_trip() {
        let s = CountSeries::new(vec![0, 5, 12, 3]).unwrap();
        let mut buf = Vec::new();
        write_series(&mut buf, &s).unwrap();
        assert_eq!(String::from_utf8(buf.clone()).unwrap(), "x\n0\n5\n12\n3\n");
        assert_eq!(parse_series(buf.as_slice()).unwrap(), s);
    }
}
