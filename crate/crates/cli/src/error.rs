use std::fmt;
use std::io::Write;

use serde::Serialize;

/// A failure that ends the process, with its exit code.
#[derive(Debug, Clone, Serialize)]
pub struct CliError {
    pub kind: &'static str,
    pub message: String,
    pub exit_code: i32,
}

pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_IO: i32 = 1;

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        Self {
            kind: "config",
            message: message.into(),
            exit_code: EXIT_CONFIG,
        }
    }

    pub fn numerical(message: impl Into<String>) -> Self {
        Self {
            kind: "numerical",
            message: message.into(),
            exit_code: EXIT_NUMERICAL,
        }
    }

    pub fn io(message: impl Into<String>) -> Self {
        Self {
            kind: "io",
            message: message.into(),
            exit_code: EXIT_IO,
        }
    }

    /// One JSON object on a single line.
    pub fn emit(&self) {
        let line = serde_json::json!({ "error": self }).to_string();
        let _ = writeln!(std::io::stderr().lock(), "{line}");
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.kind, self.message)
    }
}

/// Configuration and shape errors are the caller's fault; the rest are numerical, except
/// output failures.
impl From<lmss::Error> for CliError {
    fn from(e: lmss::Error) -> Self {
        use lmss::Error::*;
        match e {
            Config(_) | Dimension(_) => CliError::config(e.to_string()),
            Io(_) => CliError::io(e.to_string()),
            Domain(_) | Completeness(_) | Singular(_) | Factorization(_) => {
                CliError::numerical(e.to_string())
            }
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

pub fn write_file(path: &std::path::Path, contents: impl AsRef<[u8]>) -> CliResult<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)
            .map_err(|e| CliError::io(format!("{}: {e}", dir.display())))?;
    }
    std::fs::write(path, contents).map_err(|e| CliError::io(format!("{}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn library_errors_map_to_exit_codes() {
        let code = |e| CliError::from(e).exit_code;
        assert_eq!(code(lmss::Error::Config("x".into())), EXIT_CONFIG);
        assert_eq!(code(lmss::Error::Dimension("x".into())), EXIT_CONFIG);
        assert_eq!(code(lmss::Error::Completeness("x".into())), EXIT_NUMERICAL);
        assert_eq!(code(lmss::Error::Singular("x".into())), EXIT_NUMERICAL);
        assert_eq!(code(lmss::Error::Io("x".into())), EXIT_IO);
    }
}
