//! CSV ingestion and round-trip float formatting.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// Formats with 17 significant digits, enough to round-trip any `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn csv_error(e: csv::Error) -> Error {
    let row = e.position().map(|p| p.line() as usize);
    match row {
        Some(row) => Error::Data {
            row,
            msg: e.to_string(),
        },
        None => Error::Csv(e),
    }
}

/// Raw string fields of the named columns, with the 1-based file line of each row.
pub fn read_fields<R: Read>(reader: R, names: &[&str]) -> Result<Vec<(usize, Vec<String>)>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers().map_err(csv_error)?.clone();
    let idx: Vec<usize> = names
        .iter()
        .map(|n| {
            headers.iter().position(|h| h == *n).ok_or_else(|| Error::Data {
                row: 1,
                msg: format!("missing column `{n}` (header: {})", headers.iter().collect::<Vec<_>>().join(",")),
            })
        })
        .collect::<Result<_>>()?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(csv_error)?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        let fields = idx.iter().map(|&i| rec.get(i).unwrap_or("").to_string()).collect();
        out.push((line, fields));
    }
    Ok(out)
}

/// Parses the named columns as finite floats.
pub fn read_float_columns<R: Read>(reader: R, names: &[&str]) -> Result<Vec<(usize, Vec<f64>)>> {
    read_fields(reader, names)?
        .into_iter()
        .map(|(line, fields)| {
            let vals = fields
                .iter()
                .zip(names)
                .map(|(s, n)| parse_finite(s, n, line))
                .collect::<Result<Vec<_>>>()?;
            Ok((line, vals))
        })
        .collect()
}

pub fn parse_finite(s: &str, column: &str, row: usize) -> Result<f64> {
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(Error::Data {
            row,
            msg: format!("column `{column}`: expected a finite number, got `{s}`"),
        }),
    }
}

pub fn open(path: &Path) -> Result<std::fs::File> {
    std::fs::File::open(path).map_err(Error::from)
}

/// Writes a header and rows of floats.
pub fn write_rows<W: Write>(mut w: W, header: &[&str], rows: impl IntoIterator<Item = Vec<f64>>) -> Result<()> {
    writeln!(w, "{}", header.join(","))?;
    for row in rows {
        let line: Vec<String> = row.into_iter().map(fmt_f64).collect();
        writeln!(w, "{}", line.join(","))?;
    }
    Ok(())
}

/// Writes a step CDF as `x,cdf` at its jump points.
pub fn write_step_cdf<W: Write>(w: W, f: &crate::step::StepDistribution) -> Result<()> {
    write_rows(
        w,
        &["x", "cdf"],
        f.points().iter().zip(f.cumulative()).map(|(x, c)| vec![*x, *c]),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_format_round_trips() {
        for x in [0.1, 1.0 / 3.0, 1e-300, 123456.789, -2.5e17] {
            assert_eq!(fmt_f64(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn reports_row_of_bad_value() {
        let text = "a,b\n1,2\n3,x\n";
        match read_float_columns(text.as_bytes(), &["a", "b"]) {
            Err(Error::Data { row, .. }) => assert_eq!(row, 3),
            other => panic!("unexpected {other:?}"),
        }
        let ragged = "a,b\n1,2\n3\n";
        assert!(matches!(
            read_float_columns(ragged.as_bytes(), &["a", "b"]),
            Err(Error::Data { row: 3, .. })
        ));
        assert!(matches!(
            read_float_columns("a,c\n1,2\n".as_bytes(), &["a", "b"]),
            Err(Error::Data { row: 1, .. })
        ));
    }
}
