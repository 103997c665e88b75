//! CSV series, parameter JSON and filtered-path export.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use pvqmle_core::filters::FilteredPaths;
use pvqmle_core::{ParamVector, SampleSpace, TimeSeries};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("row {row}: cannot parse {text:?} as a number")]
    Parse { row: usize, text: String },
    #[error("row {row}: value {value} is outside the {space:?} sample space")]
    Space { row: usize, value: f64, space: SampleSpace },
    #[error("row {row}: {message}")]
    Csv { row: usize, message: String },
    #[error("series needs at least 2 observations, found {0}")]
    TooShort(usize),
    #[error(transparent)]
    Model(#[from] pvqmle_core::Error),
    #[error("invalid JSON: {0}")]
    Json(#[from] serde_json::Error),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DataError + '_ {
    move |source| DataError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Reads a one-value-per-row series. A single non-numeric first row is
/// treated as a header. Row numbers in errors are one-based file rows.
pub fn read_series<R: Read>(reader: R, space: SampleSpace) -> Result<TimeSeries, DataError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut values = Vec::new();
    let mut rows = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| DataError::Csv {
            row,
            message: e.to_string(),
        })?;
        let Some(text) = record.get(0) else { continue };
        if text.is_empty() && record.len() == 1 {
            continue;
        }
        match text.parse::<f64>() {
            Ok(v) => {
                values.push(v);
                rows.push(row);
            }
            Err(_) if row == 1 => {}
            Err(_) => {
                return Err(DataError::Parse {
                    row,
                    text: text.to_string(),
                })
            }
        }
    }
    if values.len() < 2 {
        return Err(DataError::TooShort(values.len()));
    }
    TimeSeries::new(values, space).map_err(|e| match e {
        pvqmle_core::Error::SpaceViolation { index, value, space } => DataError::Space {
            row: rows[index],
            value,
            space,
        },
        other => other.into(),
    })
}

pub fn load_csv(path: impl AsRef<Path>, space: SampleSpace) -> Result<TimeSeries, DataError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(io_err(path))?;
    read_series(file, space)
}

/// Writes the series one value per row under a `y` header.
pub fn write_series<W: Write>(writer: W, series: &TimeSeries) -> Result<(), DataError> {
    let mut w = csv::Writer::from_writer(writer);
    let csv_err = |e: csv::Error| DataError::Csv {
        row: 0,
        message: e.to_string(),
    };
    w.write_record(["y"]).map_err(csv_err)?;
    for v in series.values() {
        w.write_record([v.to_string()]).map_err(csv_err)?;
    }
    w.flush().map_err(|e| DataError::Csv {
        row: 0,
        message: e.to_string(),
    })?;
    Ok(())
}

pub fn save_csv(path: impl AsRef<Path>, series: &TimeSeries) -> Result<(), DataError> {
    let path = path.as_ref();
    let file = File::create(path).map_err(io_err(path))?;
    write_series(BufWriter::new(file), series)
}

pub fn params_to_json(params: &ParamVector) -> Result<String, DataError> {
    Ok(serde_json::to_string_pretty(params)?)
}

/// Parses a parameter vector, checking that names match the coordinates.
pub fn params_from_json(text: &str) -> Result<ParamVector, DataError> {
    let raw: ParamVector = serde_json::from_str(text)?;
    Ok(ParamVector::new(raw.psi, raw.gamma, raw.names)?)
}

/// Writes `t, lambda, nu_star` for the usable range; `t` is one-based.
pub fn write_filtered<W: Write>(writer: W, paths: &FilteredPaths) -> Result<(), DataError> {
    let mut w = csv::Writer::from_writer(writer);
    let csv_err = |e: csv::Error| DataError::Csv {
        row: 0,
        message: e.to_string(),
    };
    w.write_record(["t", "lambda", "nu_star"]).map_err(csv_err)?;
    for t in paths.valid_from..paths.lambda.len() {
        w.write_record([(t + 1).to_string(), paths.lambda[t].to_string(), paths.nu_star[t].to_string()])
            .map_err(csv_err)?;
    }
    w.flush().map_err(|e| DataError::Csv {
        row: 0,
        message: e.to_string(),
    })?;
    Ok(())
}

/// Reads a file, or returns `arg` itself when it does not name a file.
/// Lets flags such as `--dgp` take inline JSON or a path.
pub fn inline_or_file(arg: &str) -> Result<String, DataError> {
    let path = Path::new(arg);
    if !arg.trim_start().starts_with(['{', '[']) && path.exists() {
        std::fs::read_to_string(path).map_err(io_err(path))
    } else {
        Ok(arg.to_string())
    }
}
