//! CSV ingestion and output plumbing shared by the subcommands.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serialdep::MultiSeries;

/// Errors split by exit code: usage problems exit 2, data problems exit 1.
#[derive(Debug)]
pub enum AppError {
    Usage(String),
    Data(String),
}

impl AppError {
    pub fn code(&self) -> i32 {
        match self {
            AppError::Usage(_) => 2,
            AppError::Data(_) => 1,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            AppError::Usage(m) | AppError::Data(m) => m,
        }
    }
}

impl From<serialdep::Error> for AppError {
    fn from(e: serialdep::Error) -> Self {
        AppError::Data(e.to_string())
    }
}

pub type AppResult<T> = Result<T, AppError>;

pub fn usage(msg: impl Into<String>) -> AppError {
    AppError::Usage(msg.into())
}

pub fn data(msg: impl Into<String>) -> AppError {
    AppError::Data(msg.into())
}

/// Read a CSV of one column per component. A first row whose fields do not
/// all parse as numbers is taken as the header. Applies the natural log and
/// first difference, in that order, when asked.
pub fn read_series(path: &Path, log: bool, diff: bool) -> AppResult<MultiSeries> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| data(format!("{}: {e}", path.display())))?;

    let mut labels: Option<Vec<String>> = None;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| data(format!("{}: {e}", path.display())))?;
        let parsed: Result<Vec<f64>, _> = record.iter().map(str::parse::<f64>).collect();
        match parsed {
            Ok(row) => rows.push(row),
            Err(_) if i == 0 => {
                labels = Some(record.iter().map(str::to_string).collect());
            }
            Err(_) => {
                return Err(data(format!(
                    "{}: non-numeric value in row {}",
                    path.display(),
                    i + 1
                )));
            }
        }
    }

    if log {
        for row in &mut rows {
            for v in row.iter_mut() {
                if *v <= 0.0 {
                    return Err(data("log transform needs strictly positive values"));
                }
                *v = v.ln();
            }
        }
    }
    if diff {
        if rows.len() < 2 {
            return Err(data("differencing needs at least 2 rows"));
        }
        rows = rows
            .windows(2)
            .map(|w| w[1].iter().zip(&w[0]).map(|(a, b)| a - b).collect())
            .collect();
    }

    if rows.len() < 2 {
        return Err(data(format!(
            "{}: fewer than 2 usable rows",
            path.display()
        )));
    }
    MultiSeries::from_rows(&rows, labels).map_err(AppError::from)
}

/// Write to the file given, or stdout.
pub fn write_output(out: Option<&PathBuf>, content: &str) -> AppResult<()> {
    match out {
        Some(path) => fs::write(path, content)
            .map_err(|e| data(format!("{}: {e}", path.display()))),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(content.as_bytes())
                .and_then(|_| stdout.flush())
                .map_err(|e| data(format!("stdout: {e}")))
        }
    }
}

/// Shortest round-trip decimal form, the same convention in CSV and JSON.
pub fn fmt_f64(v: f64) -> String {
    format!("{v}")
}
