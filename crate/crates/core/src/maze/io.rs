use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use crate::energy::ExpertDataset;
use crate::error::{Error, Result};

const HEADER: [&str; 4] = ["sx", "sy", "snx", "sny"];

pub fn write_dataset(data: &ExpertDataset<f64>, out: impl Write) -> Result<()> {
    if data.dim() != 4 {
        return Err(Error::dim("maze transition", 4, data.dim()));
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(HEADER).map_err(csv_err)?;
    for r in data.features().rows() {
        w.write_record(r.iter().map(|v| format!("{v:.16e}"))).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_dataset(input: impl Read) -> Result<ExpertDataset<f64>> {
    let mut r = csv::ReaderBuilder::new().has_headers(false).flexible(true).from_reader(input);
    let mut rows = Vec::new();
    for (i, record) in r.records().enumerate() {
        let line = i + 1;
        let record = record.map_err(|e| Error::Parse { line, message: e.to_string() })?;
        if line == 1 {
            if record.iter().ne(HEADER) {
                return Err(Error::Parse { line, message: format!("expected header {}", HEADER.join(",")) });
            }
            continue;
        }
        if record.len() != 4 {
            return Err(Error::Parse { line, message: format!("expected 4 columns, found {}", record.len()) });
        }
        let row = record
            .iter()
            .map(|f| {
                let v: f64 = f.trim().parse().map_err(|_| Error::Parse { line, message: format!("invalid number {f:?}") })?;
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(Error::Parse { line, message: format!("non-finite value {f:?}") })
                }
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Empty("maze dataset"));
    }
    ExpertDataset::from_rows(&rows)
}

pub fn save_dataset(data: &ExpertDataset<f64>, path: impl AsRef<Path>) -> Result<()> {
    let mut f = File::create(path)?;
    write_dataset(data, &mut f)?;
    f.sync_all()?;
    Ok(())
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<ExpertDataset<f64>> {
    read_dataset(File::open(path)?)
}

fn csv_err(e: csv::Error) -> Error {
    Error::Format(e.to_string())
}
