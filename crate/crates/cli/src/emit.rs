//! Schema-stable CSV and JSON artifacts.

use crate::error::{CliError, CliResult};
use serde::de::DeserializeOwned;
use serde::Serialize;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

/// A CSV row type with a fixed column list; the header is written even when
/// there are no rows.
pub trait CsvRecord: Serialize + DeserializeOwned {
    const HEADER: &'static [&'static str];
}

pub fn write_csv<R: CsvRecord>(path: &Path, rows: &[R]) -> CliResult<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path)?;
    w.write_record(R::HEADER)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads rows back, refusing files whose header differs from `R::HEADER`.
pub fn read_csv<R: CsvRecord>(path: &Path) -> CliResult<Vec<R>> {
    let mut r = csv::Reader::from_path(path)?;
    let header: Vec<String> = r.headers()?.iter().map(str::to_owned).collect();
    if header != R::HEADER {
        return Err(CliError::Invariant(format!("{}: header {header:?} differs from {:?}", path.display(), R::HEADER)));
    }
    r.deserialize().map(|row| row.map_err(CliError::from)).collect()
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    Ok(serde_json::from_reader(std::io::BufReader::new(File::open(path)?))?)
}
