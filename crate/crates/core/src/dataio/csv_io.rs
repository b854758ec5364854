//! CSV ingestion and export in the canonical column layout:
//! the 12 features in schema order, then `label`, then `timestamp`.

use std::path::Path;

use super::{DataError, Dataset, FeatureSchema, Sample, Timestamp, NUM_FEATURES};

/// Result of loading a CSV file: the surviving samples plus how many rows
/// were dropped for unparseable numerics, NaN/Inf values, bad labels or
/// bad timestamps.
#[derive(Debug)]
pub struct CsvLoad {
    pub dataset: Dataset,
    pub dropped: usize,
}

fn expected_header(schema: &FeatureSchema) -> Vec<String> {
    let mut cols: Vec<String> = schema.names().iter().map(|s| s.to_string()).collect();
    cols.push("label".to_string());
    cols.push("timestamp".to_string());
    cols
}

/// Load a dataset from `path`. The header must match the schema order
/// exactly; rows that fail to parse are dropped and counted.
pub fn load_csv(path: &Path, schema: &FeatureSchema) -> Result<CsvLoad, DataError> {
    if !path.exists() {
        return Err(DataError::NotFound(path.display().to_string()));
    }
    let path_str = path.display().to_string();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_path(path)
        .map_err(|source| DataError::Csv {
            path: path_str.clone(),
            source,
        })?;

    let expected = expected_header(schema);
    let header = reader
        .headers()
        .map_err(|source| DataError::Csv {
            path: path_str.clone(),
            source,
        })?
        .clone();
    let got: Vec<String> = header.iter().map(|s| s.to_string()).collect();
    if got != expected {
        let offending = expected
            .iter()
            .enumerate()
            .filter(|(i, want)| got.get(*i).map(String::as_str) != Some(want.as_str()))
            .map(|(i, want)| {
                format!("column {}: expected {:?}, got {:?}", i, want, got.get(i).map(String::as_str).unwrap_or("<missing>"))
            })
            .collect();
        return Err(DataError::HeaderMismatch {
            offending,
            expected,
        });
    }

    let mut samples = Vec::new();
    let mut dropped = 0usize;
    for record in reader.records() {
        let record = record.map_err(|source| DataError::Csv {
            path: path_str.clone(),
            source,
        })?;
        match parse_row(&record) {
            Some(sample) => samples.push(sample),
            None => dropped += 1,
        }
    }
    if samples.is_empty() {
        return Err(DataError::NoValidRows);
    }
    Ok(CsvLoad {
        dataset: Dataset::new(samples, schema.clone()),
        dropped,
    })
}

fn parse_row(record: &csv::StringRecord) -> Option<Sample> {
    if record.len() != NUM_FEATURES + 2 {
        return None;
    }
    let mut x = [0.0; NUM_FEATURES];
    for (j, slot) in x.iter_mut().enumerate() {
        let v: f64 = record.get(j)?.trim().parse().ok()?;
        if !v.is_finite() {
            return None;
        }
        *slot = v;
    }
    let y: u8 = record.get(NUM_FEATURES)?.trim().parse().ok()?;
    if y > 1 {
        return None;
    }
    let timestamp = Timestamp::parse(record.get(NUM_FEATURES + 1)?.trim()).ok()?;
    Some(Sample { x, y, timestamp })
}

/// Write `ds` to `path` in the canonical layout. Floats are written with
/// Rust's shortest round-trip formatting, so reading the file back
/// reproduces the values bit-exactly.
pub fn write_csv(path: &Path, ds: &Dataset) -> Result<(), DataError> {
    let path_str = path.display().to_string();
    let mut writer = csv::Writer::from_path(path).map_err(|source| DataError::Csv {
        path: path_str.clone(),
        source,
    })?;
    let io_err = |e: csv::Error| DataError::Csv {
        path: path_str.clone(),
        source: e,
    };
    writer.write_record(expected_header(ds.schema())).map_err(io_err)?;
    for s in ds.samples() {
        let mut row: Vec<String> = s.x.iter().map(|v| v.to_string()).collect();
        row.push(s.y.to_string());
        row.push(s.timestamp.to_string());
        writer.write_record(&row).map_err(io_err)?;
    }
    writer.flush().map_err(|source| DataError::Io {
        path: path_str,
        source,
    })?;
    Ok(())
}
