use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::args::OutputArgs;
use crate::error::CliError;

pub fn to_json<T: Serialize>(value: &T) -> Result<String, CliError> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Data(format!("serialization: {e}")))?;
    text.push('\n');
    Ok(text)
}

/// Writes `text` to a temporary file beside `path`, then renames it into place.
pub fn write_atomic(path: &Path, text: &str) -> Result<(), CliError> {
    let fail = |e: std::io::Error| CliError::data(path.display(), e);
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(fail)?;
    tmp.write_all(text.as_bytes()).map_err(fail)?;
    tmp.as_file().sync_all().map_err(fail)?;
    tmp.persist(path).map_err(|e| fail(e.error))?;
    Ok(())
}

/// Sends a report to `--out`, or to stdout when no path was given.
pub fn emit(output: &OutputArgs, text: &str) -> Result<(), CliError> {
    match &output.out {
        Some(path) => write_atomic(path, text),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .and_then(|_| stdout.flush())
                .map_err(|e| CliError::data("stdout", e))
        }
    }
}
