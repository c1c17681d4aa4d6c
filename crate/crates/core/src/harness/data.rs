//! CSV datasets: a header row, then one numeric row per observation.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::model::{LabeledDataset, Task};

fn parse_error(path: &Path, line: u64, column: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        column,
        message: message.into(),
    }
}

fn csv_error(path: &Path, err: csv::Error) -> Error {
    let line = err.position().map(|p| p.line()).unwrap_or(0);
    match err.into_kind() {
        csv::ErrorKind::Io(e) => Error::Io(e),
        kind => parse_error(path, line, 0, format!("{kind:?}")),
    }
}

/// Reads `path` with `target` as the response; every other column becomes a
/// predictor, in file order.
///
/// Line numbers in errors are 1-based and count the header as line 1.
pub fn load_csv(path: &Path, target: &str, task: Task) -> Result<LabeledDataset> {
    let file = File::open(path)?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(file);
    let header = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    let target_idx = header
        .iter()
        .position(|h| h == target)
        .ok_or_else(|| Error::MissingTarget(target.to_string()))?;
    let names: Vec<String> = header
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != target_idx)
        .map(|(_, h)| h.to_string())
        .collect();
    let p = names.len();

    let mut values = Vec::new();
    let mut y = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = record.position().map(|pos| pos.line()).unwrap_or(0);
        for (col, field) in record.iter().enumerate() {
            if field.is_empty() {
                return Err(parse_error(path, line, col + 1, "empty cell"));
            }
            let v: f64 = field
                .parse()
                .map_err(|_| parse_error(path, line, col + 1, format!("`{field}` is not a number")))?;
            if !v.is_finite() {
                return Err(parse_error(
                    path,
                    line,
                    col + 1,
                    format!("`{field}` is not finite"),
                ));
            }
            if col == target_idx {
                if task == Task::Logistic && v != 0.0 && v != 1.0 {
                    return Err(Error::NonBinaryTarget { line, value: v });
                }
                y.push(v);
            } else {
                values.push(v);
            }
        }
    }
    let n = y.len();
    let x = Array2::from_shape_vec((n, p), values).map_err(|e| Error::DimensionMismatch(e.to_string()))?;
    LabeledDataset::new(x, Array1::from(y))?.with_feature_names(names)
}

/// Writes `ds` with its feature names and a final `y` column. Values use the
/// shortest representation that parses back to the same `f64`.
pub fn write_csv(ds: &LabeledDataset, path: &Path) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    let mut header = ds.feature_names().join(",");
    header.push_str(",y");
    writeln!(out, "{header}")?;
    for (row, y) in ds.x().rows().into_iter().zip(ds.y()) {
        let mut line = String::new();
        for v in row {
            line.push_str(&format!("{v},"));
        }
        line.push_str(&format!("{y}"));
        writeln!(out, "{line}")?;
    }
    out.flush()?;
    Ok(())
}
