//! Convergence history as CSV: header `iter,loss,rel_err`, one row per
//! iteration, values with 17 significant digits. `rel_err` is left empty when
//! the target is the zero matrix.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::factorize::HistoryEntry;

pub const HISTORY_HEADER: &str = "iter,loss,rel_err";

pub fn write_history_to<W: Write>(w: &mut W, history: &[HistoryEntry]) -> Result<()> {
    if history.is_empty() {
        return Err(Error::Io(std::io::Error::new(
            std::io::ErrorKind::InvalidInput,
            "refusing to write an empty history",
        )));
    }
    writeln!(w, "{HISTORY_HEADER}")?;
    for h in history {
        match h.rel_err {
            Some(e) => writeln!(w, "{},{:.16e},{:.16e}", h.iteration, h.loss, e)?,
            None => writeln!(w, "{},{:.16e},", h.iteration, h.loss)?,
        }
    }
    Ok(())
}

pub fn write_history_csv(path: impl AsRef<Path>, history: &[HistoryEntry]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_history_to(&mut w, history)?;
    w.flush()?;
    Ok(())
}

pub fn read_history_csv(path: impl AsRef<Path>) -> Result<Vec<HistoryEntry>> {
    let reader = BufReader::new(File::open(path)?);
    let mut lines = reader.lines();
    let bad = |msg: String| Error::CorruptHeader(msg);
    match lines.next() {
        Some(Ok(h)) if h.trim() == HISTORY_HEADER => {}
        _ => return Err(bad(format!("history CSV must start with {HISTORY_HEADER:?}"))),
    }
    let mut out = Vec::new();
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 3 {
            return Err(bad(format!("expected 3 fields in {line:?}")));
        }
        let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad(format!("bad number {s:?}")));
        out.push(HistoryEntry {
            iteration: fields[0].trim().parse().map_err(|_| bad(format!("bad iteration {:?}", fields[0])))?,
            loss: num(fields[1])?,
            rel_err: if fields[2].trim().is_empty() { None } else { Some(num(fields[2])?) },
        });
    }
    Ok(out)
}
