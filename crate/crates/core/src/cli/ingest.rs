//! CSV ingestion: one vector per row, optional header, optional leading label column.

use std::fs::File;
use std::path::Path;

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::sis::ShiftStructure;
use crate::subspace::DataSet;

/// What the rows are checked against after parsing.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IngestMode {
    Euclidean,
    /// Rows are real signals of length `M`.
    Sis(ShiftStructure),
}

fn is_numeric(field: &str) -> bool {
    field.parse::<f64>().is_ok()
}

/// Reads a data set. A first row whose value columns are not all numeric is a
/// header; a non-numeric first field on the first data row marks a label
/// column. Rows and columns in errors are 1-based and count the header.
pub fn ingest(path: &Path, mode: IngestMode) -> Result<DataSet> {
    if !path.is_file() {
        return Err(Error::FileNotFound(path.to_path_buf()));
    }
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(File::open(path)?);

    let mut records = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| Error::Parse {
            row: i + 1,
            col: 0,
            msg: e.to_string(),
        })?;
        if rec.iter().all(str::is_empty) {
            continue;
        }
        records.push((i + 1, rec));
    }

    let mut start = 0;
    if let Some((_, first)) = records.first() {
        let values = if first.len() > 1 {
            first.iter().skip(1).collect::<Vec<_>>()
        } else {
            first.iter().collect()
        };
        if values.iter().any(|f| !is_numeric(f)) {
            start = 1;
        }
    }
    let body = &records[start..];
    let labelled = body
        .first()
        .is_some_and(|(_, r)| r.get(0).is_some_and(|f| !is_numeric(f)));
    let skip = usize::from(labelled);

    let mut rows: Vec<DVector<f64>> = Vec::with_capacity(body.len());
    let mut labels = Vec::new();
    let mut width = None;
    for (row, rec) in body {
        let found = rec.len().saturating_sub(skip);
        let expected = *width.get_or_insert(found);
        if found != expected {
            return Err(Error::RaggedRows {
                row: *row,
                expected,
                found,
            });
        }
        if labelled {
            labels.push(rec[0].to_string());
        }
        let values = rec
            .iter()
            .enumerate()
            .skip(skip)
            .map(|(c, f)| {
                let x: f64 = f.parse().map_err(|_| Error::Parse {
                    row: *row,
                    col: c + 1,
                    msg: format!("'{f}' is not a number"),
                })?;
                if x.is_finite() {
                    Ok(x)
                } else {
                    Err(Error::Parse {
                        row: *row,
                        col: c + 1,
                        msg: format!("'{f}' is not finite"),
                    })
                }
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(DVector::from_vec(values));
    }
    if rows.is_empty() {
        return Err(Error::EmptyDataSet);
    }

    let dim = width.unwrap_or(0);
    if let IngestMode::Sis(s) = mode {
        if dim != s.signal_len() {
            return Err(Error::LengthMismatch {
                expected: s.signal_len(),
                found: dim,
            });
        }
    }
    let data = DataSet::new(dim, rows)?;
    if labelled {
        data.with_labels(labels)
    } else {
        Ok(data)
    }
}

/// Writes `data` as CSV: a header, then one row per vector, with a leading
/// `label` column when the data set is labelled.
pub fn write_csv(path: &Path, data: &DataSet) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_io)?;
    let labels = data.labels();
    let mut header: Vec<String> = Vec::new();
    if labels.is_some() {
        header.push("label".into());
    }
    header.extend((0..data.dim()).map(|k| format!("x{k}")));
    w.write_record(&header).map_err(csv_io)?;
    for (i, v) in data.vectors().iter().enumerate() {
        let mut rec: Vec<String> = Vec::with_capacity(v.len() + 1);
        if let Some(l) = labels {
            rec.push(l[i].clone());
        }
        rec.extend(v.iter().map(|x| x.to_string()));
        w.write_record(&rec).map_err(csv_io)?;
    }
    w.flush()?;
    Ok(())
}

pub(crate) fn csv_io(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Io(std::io::Error::other(format!("{other:?}"))),
    }
}
