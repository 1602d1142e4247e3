use std::fs::File;
use std::io::Write;
use std::path::Path;

use crate::error::CliError;

/// One CSV cell. Floats are written with 17 significant digits so that a
/// re-parse reproduces them bit for bit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Field {
    Int(u64),
    Float(f64),
}

impl Field {
    fn render(self) -> String {
        match self {
            Field::Int(k) => k.to_string(),
            Field::Float(x) => format!("{x:.16e}"),
        }
    }
}

fn csv_err(e: csv::Error) -> CliError {
    CliError::Csv(e.to_string())
}

pub fn write_csv<W: Write>(out: W, header: &[&str], rows: &[Vec<Field>]) -> Result<(), CliError> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    w.write_record(header).map_err(csv_err)?;
    for row in rows {
        if row.len() != header.len() {
            return Err(CliError::Csv(format!("row has {} fields, header has {}", row.len(), header.len())));
        }
        w.write_record(row.iter().map(|f| f.render())).map_err(csv_err)?;
    }
    w.flush().map_err(|e| CliError::Csv(e.to_string()))
}

pub fn emit_csv(path: &Path, header: &[&str], rows: &[Vec<Field>]) -> Result<(), CliError> {
    let file = File::create(path).map_err(|e| CliError::io(path, e))?;
    write_csv(file, header, rows)
}

/// Reads back a file written by [`emit_csv`]; every cell is parsed as `f64`.
pub fn read_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>), CliError> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    let header = r.headers().map_err(csv_err)?.iter().map(str::to_owned).collect();
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(csv_err)?;
        let row = rec
            .iter()
            .map(|s| s.parse::<f64>().map_err(|e| CliError::Csv(format!("bad number {s:?}: {e}"))))
            .collect::<Result<Vec<_>, _>>()?;
        rows.push(row);
    }
    Ok((header, rows))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn render(header: &[&str], rows: &[Vec<Field>]) -> String {
        let mut buf = Vec::new();
        write_csv(&mut buf, header, rows).unwrap();
        String::from_utf8(buf).unwrap()
    }

    #[test]
    fn header_only_when_empty() {
        assert_eq!(render(&["gap", "residual"], &[]), "gap,residual\n");
    }

    #[test]
    fn seventeen_significant_digits_and_lf() {
        let s = render(&["k", "gap"], &[vec![Field::Int(3), Field::Float(0.1)]]);
        assert_eq!(s, "k,gap\n3,1.0000000000000001e-1\n");
        assert!(!s.contains('\r'));
    }

    #[test]
    fn ragged_rows_are_rejected() {
        let mut buf = Vec::new();
        assert!(write_csv(&mut buf, &["a", "b"], &[vec![Field::Int(1)]]).is_err());
    }
}
