//! CSV ingestion of classifier outputs.
//!
//! One sample per row: `d` numbers followed by a zero-based integer label.
//! A leading header row is skipped when its first cell is not a number.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::simplex::{softmax, Dataset, ProbVector, Sample};

/// Sum tolerance for rows of a probabilities file.
pub const PROBS_SUM_TOL: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InputFormat {
    /// Raw logits, softmaxed at temperature 1.
    LogitsCsv,
    /// Probability vectors, renormalized after a tolerance check.
    ProbsCsv,
}

impl InputFormat {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "logits-csv" => Ok(Self::LogitsCsv),
            "probs-csv" => Ok(Self::ProbsCsv),
            other => Err(Error::input(format!("unknown input format `{other}`"))),
        }
    }
}

pub fn load_dataset<T: Scalar>(path: impl AsRef<Path>, format: InputFormat) -> Result<Dataset<T>> {
    read_dataset(File::open(path)?, format)
}

pub fn read_dataset<T: Scalar, R: Read>(reader: R, format: InputFormat) -> Result<Dataset<T>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(reader);
    let mut samples = Vec::new();
    let mut width = None;
    for (idx, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            Error::Parse { line, message: e.to_string() }
        })?;
        let line = record.position().map_or(idx + 1, |p| p.line() as usize);
        let parse_err = |message: String| Error::Parse { line, message };
        if idx == 0 && record.get(0).is_some_and(|c| c.parse::<f64>().is_err()) {
            continue;
        }
        if record.len() < 3 {
            return Err(parse_err(format!("expected at least 2 values and a label, found {} cells", record.len())));
        }
        match width {
            None => width = Some(record.len()),
            Some(w) if w != record.len() => {
                return Err(parse_err(format!("ragged row: {} cells, expected {w}", record.len())));
            }
            _ => {}
        }
        let d = record.len() - 1;
        let values = record
            .iter()
            .take(d)
            .enumerate()
            .map(|(k, cell)| match cell.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(T::lit(v)),
                _ => Err(parse_err(format!("cell {} `{cell}` is not a finite number", k + 1))),
            })
            .collect::<Result<Vec<T>>>()?;
        let cell = &record[d];
        let label: usize = cell.parse().map_err(|_| parse_err(format!("label `{cell}` is not a class index")))?;
        if label >= d {
            return Err(parse_err(format!("label {label} out of range for {d} classes")));
        }
        let probs = match format {
            InputFormat::LogitsCsv => softmax(&values, T::one()),
            InputFormat::ProbsCsv => ProbVector::renormalized(values, T::lit(PROBS_SUM_TOL)),
        }
        .map_err(|e| parse_err(e.to_string()))?;
        samples.push(Sample::new(probs, label).map_err(|e| parse_err(e.to_string()))?);
    }
    if samples.is_empty() {
        return Err(Error::input("no samples in input"));
    }
    Dataset::canonical(samples)
}

/// Writes a canonical dataset as a headed probabilities CSV.
pub fn write_probs_csv<T: Scalar, W: Write>(ds: &Dataset<T>, writer: W) -> Result<()> {
    let samples = ds.samples().ok_or_else(|| Error::input("only canonical datasets can be written"))?;
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<String> = (0..ds.dim()).map(|k| format!("p{k}")).collect();
    header.push("label".into());
    w.write_record(&header).map_err(csv_io)?;
    for s in samples {
        let mut row: Vec<String> = s.probs.as_slice().iter().map(|v| v.to_string()).collect();
        row.push(s.label.to_string());
        w.write_record(&row).map_err(csv_io)?;
    }
    w.flush()?;
    Ok(())
}

pub(crate) fn csv_io(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}
