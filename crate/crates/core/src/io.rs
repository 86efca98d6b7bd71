//! Metaorder CSV: UTF-8, LF line endings, `.` decimal separator, one
//! header row with exactly the columns of [`METAORDER_HEADER`].

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::estimation::MetaorderRecord;
use crate::trajectory::Schedule;

pub const METAORDER_HEADER: [&str; 9] = [
    "id",
    "q0",
    "T",
    "delta",
    "S0",
    "S_Tprime",
    "cash_change",
    "sigma",
    "schedule",
];

/// Writes records with shortest round-trip float formatting.
pub fn write_metaorders<W: Write>(out: W, records: &[MetaorderRecord]) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    let csv_err = |e: csv::Error| Error::Io(e.to_string());
    w.write_record(METAORDER_HEADER).map_err(csv_err)?;
    for r in records {
        w.write_record([
            r.id.to_string(),
            r.q0.to_string(),
            r.horizon.to_string(),
            r.delta.to_string(),
            r.s0.to_string(),
            r.s_tprime.to_string(),
            r.cash_change.to_string(),
            r.sigma.to_string(),
            r.schedule.as_str().to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads and validates records. Errors carry the 1-based file line.
pub fn read_metaorders<R: Read>(input: R) -> Result<Vec<MetaorderRecord>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).from_reader(input);
    let mut rows = rdr.records();
    let line_of = |pos: Option<&csv::Position>| pos.map_or(0, |p| p.line());
    let header = match rows.next() {
        None => {
            return Err(Error::Csv {
                line: 1,
                message: "empty file, expected a header row".into(),
            })
        }
        Some(r) => r.map_err(|e| Error::Csv {
            line: line_of(e.position()),
            message: e.to_string(),
        })?,
    };
    if header.iter().ne(METAORDER_HEADER) {
        return Err(Error::Csv {
            line: 1,
            message: format!(
                "header must be `{}`, found `{}`",
                METAORDER_HEADER.join(","),
                header.iter().collect::<Vec<_>>().join(",")
            ),
        });
    }
    let mut out = Vec::new();
    for row in rows {
        let row = row.map_err(|e| Error::Csv {
            line: line_of(e.position()),
            message: e.to_string(),
        })?;
        let line = line_of(row.position());
        let field = |i: usize| row.get(i).unwrap_or("");
        let num = |i: usize| -> Result<f64> {
            field(i).parse::<f64>().map_err(|_| Error::Csv {
                line,
                message: format!(
                    "column `{}`: cannot parse `{}` as a number",
                    METAORDER_HEADER[i],
                    field(i)
                ),
            })
        };
        if row.len() != METAORDER_HEADER.len() {
            return Err(Error::Csv {
                line,
                message: format!("expected {} fields, found {}", METAORDER_HEADER.len(), row.len()),
            });
        }
        let id = field(0).parse::<u64>().map_err(|_| Error::Csv {
            line,
            message: format!("column `id`: cannot parse `{}` as an unsigned integer", field(0)),
        })?;
        let schedule = match field(8) {
            "linear" => Schedule::Linear,
            "knots" => Schedule::Knots,
            other => {
                return Err(Error::Csv {
                    line,
                    message: format!("column `schedule`: unknown value `{other}`"),
                })
            }
        };
        let rec = MetaorderRecord {
            id,
            q0: num(1)?,
            horizon: num(2)?,
            delta: num(3)?,
            s0: num(4)?,
            s_tprime: num(5)?,
            cash_change: num(6)?,
            sigma: num(7)?,
            schedule,
        };
        rec.validate().map_err(|e| Error::Csv {
            line,
            message: e.to_string(),
        })?;
        out.push(rec);
    }
    Ok(out)
}
