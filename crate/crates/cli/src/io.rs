//! CSV ingestion/emission and atomic file output.

use std::fs;
use std::io::Write;
use std::path::Path;

use frfkit_core::interpolate::{ComplexSample, TrainingSet};
use num_complex::Complex64;

use crate::CliError;

pub const SAMPLE_HEADER: [&str; 3] = ["omega", "re", "im"];

/// Round-trip exact decimal (17 significant digits); NaN is spelled `NaN`.
pub fn format_num(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn parse_samples(text: &str) -> Result<Vec<ComplexSample>, CliError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(text.as_bytes());
    let header = rdr
        .headers()
        .map_err(|e| CliError::Input(format!("line 1: {e}")))?;
    if header.iter().collect::<Vec<_>>() != SAMPLE_HEADER {
        return Err(CliError::Input(format!(
            "line 1: expected header \"omega,re,im\", found \"{}\"",
            header.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| CliError::Input(format!("malformed CSV: {e}")))?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != 3 {
            return Err(CliError::Input(format!(
                "line {line}: expected 3 fields, found {}",
                rec.len()
            )));
        }
        let mut vals = [0.0; 3];
        for (k, field) in rec.iter().enumerate() {
            vals[k] = field.parse::<f64>().map_err(|_| {
                CliError::Input(format!("line {line}: cannot parse {:?} as a number", field))
            })?;
            if !vals[k].is_finite() {
                return Err(CliError::Input(format!(
                    "line {line}: non-finite value {field:?}"
                )));
            }
        }
        out.push(ComplexSample::new(
            vals[0],
            Complex64::new(vals[1], vals[2]),
        ));
    }
    if out.is_empty() {
        return Err(CliError::Input("no data rows".into()));
    }
    Ok(out)
}

pub fn read_samples(path: &Path) -> Result<TrainingSet, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    let samples = parse_samples(&text).map_err(|e| match e {
        CliError::Input(m) => CliError::Input(format!("{}: {m}", path.display())),
        other => other,
    })?;
    TrainingSet::new(samples).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

pub fn samples_csv<'a>(rows: impl IntoIterator<Item = (f64, Complex64)> + 'a) -> String {
    let mut s = String::from("omega,re,im\n");
    for (w, y) in rows {
        s.push_str(&format!(
            "{},{},{}\n",
            format_num(w),
            format_num(y.re),
            format_num(y.im)
        ));
    }
    s
}

/// Writes through a temporary file in the target directory, then renames.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), CliError> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let io_err = |e: std::io::Error| CliError::Input(format!("{}: {e}", path.display()));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_err)?;
    tmp.write_all(contents).map_err(io_err)?;
    tmp.as_file().sync_all().map_err(io_err)?;
    tmp.persist(path).map_err(|e| io_err(e.error))?;
    Ok(())
}

/// Writes to `path`, or to stdout when absent.
pub fn emit(path: Option<&Path>, contents: &str) -> Result<(), CliError> {
    match path {
        Some(p) => write_atomic(p, contents.as_bytes()),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(contents.as_bytes())
                .map_err(|e| CliError::Input(format!("stdout: {e}")))
        }
    }
}
