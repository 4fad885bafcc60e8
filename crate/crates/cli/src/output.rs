use std::io::Write;
use std::path::Path;

use percolab::Error;

/// Exit status and message for a failed run.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

pub const USAGE: u8 = 2;
pub const DATA_QUALITY: u8 = 3;

impl Failure {
    pub fn usage(message: impl Into<String>) -> Self {
        Failure { code: USAGE, message: message.into() }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Range(_) | Error::Domain(_) | Error::Format { .. } | Error::Insufficient(_) | Error::Json(_) => {
                USAGE
            }
            Error::DataQuality(_) => DATA_QUALITY,
            _ => 1,
        };
        Failure { code, message: e.to_string() }
    }
}

/// Write through a temporary file in the target directory, then rename over the target.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), Failure> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let io = |e: std::io::Error| Failure { code: 1, message: format!("{}: {e}", path.display()) };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(bytes).map_err(io)?;
    tmp.as_file().sync_all().map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}
