use std::fs;
use std::path::{Path, PathBuf};

use crate::HarnessError;

/// First line of every CSV artifact.
pub const CSV_VERSION_LINE: &str = "# frustra-csv v1";

/// Shortest round-trip decimal form, switching to exponent notation for
/// very small or very large magnitudes.
pub fn fmt_f64(x: f64) -> String {
    let a = x.abs();
    if x == 0.0 || (1e-4..1e16).contains(&a) || !x.is_finite() {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

pub fn fmt_opt<T: ToString>(x: Option<T>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

/// Render a versioned CSV document.
pub fn csv_document<I>(columns: &[&str], rows: I) -> Result<String, HarnessError>
where
    I: IntoIterator<Item = Vec<String>>,
{
    let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
    w.write_record(columns)?;
    for row in rows {
        w.write_record(&row)?;
    }
    let body = w.into_inner().map_err(|e| HarnessError::Io(e.into_error()))?;
    let body = String::from_utf8(body).expect("csv output is utf-8");
    Ok(format!("{CSV_VERSION_LINE}\n{body}"))
}

/// Write `contents` to `dir/name`, creating `dir` if needed.
pub fn write_artifact(dir: &Path, name: &str, contents: &[u8]) -> Result<PathBuf, HarnessError> {
    fs::create_dir_all(dir)?;
    let path = dir.join(name);
    fs::write(&path, contents)?;
    Ok(path)
}
