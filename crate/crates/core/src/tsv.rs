//! Minimal tab-separated reader shared by the snapshot and knowledge-base loaders.

use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum TsvError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Row {
        path: PathBuf,
        line: usize,
        message: String,
    },
}

/// One non-blank line split on tabs, tagged with its 1-based line number.
#[derive(Debug, Clone)]
pub struct Row<'a> {
    pub line: usize,
    pub fields: Vec<&'a str>,
}

/// A whole file held in memory so rows can borrow from it.
#[derive(Debug)]
pub struct TsvFile {
    path: PathBuf,
    text: String,
}

impl TsvFile {
    pub fn open(path: impl AsRef<Path>) -> Result<Self, TsvError> {
        let path = path.as_ref().to_path_buf();
        let text = fs::read_to_string(&path).map_err(|source| TsvError::Io {
            path: path.clone(),
            source,
        })?;
        Ok(TsvFile { path, text })
    }

    pub fn from_string(path: impl Into<PathBuf>, text: String) -> Self {
        TsvFile {
            path: path.into(),
            text,
        }
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Rows with blank lines and `#` comments skipped. Trailing `\r` is stripped.
    pub fn rows(&self) -> impl Iterator<Item = Row<'_>> {
        self.text.lines().enumerate().filter_map(|(i, raw)| {
            let line = raw.strip_suffix('\r').unwrap_or(raw);
            if line.trim().is_empty() || line.starts_with('#') {
                return None;
            }
            Some(Row {
                line: i + 1,
                fields: line.split('\t').collect(),
            })
        })
    }

    pub fn error(&self, line: usize, message: impl Into<String>) -> TsvError {
        TsvError::Row {
            path: self.path.clone(),
            line,
            message: message.into(),
        }
    }

    /// Checks the column count, allowing any count in `allowed`.
    pub fn expect_columns(&self, row: &Row<'_>, allowed: &[usize]) -> Result<(), TsvError> {
        if allowed.contains(&row.fields.len()) {
            Ok(())
        } else {
            let want = allowed
                .iter()
                .map(|n| n.to_string())
                .collect::<Vec<_>>()
                .join(" or ");
            Err(self.error(
                row.line,
                format!("expected {want} columns, found {}", row.fields.len()),
            ))
        }
    }

    pub fn parse<T: std::str::FromStr>(
        &self,
        row: &Row<'_>,
        column: usize,
        what: &str,
    ) -> Result<T, TsvError> {
        let raw = row.fields.get(column).copied().unwrap_or("");
        raw.trim()
            .parse()
            .map_err(|_| self.error(row.line, format!("invalid {what} `{raw}`")))
    }

    pub fn parse_flag(&self, row: &Row<'_>, column: usize) -> Result<bool, TsvError> {
        match row.fields.get(column).map(|s| s.trim()) {
            Some("1") => Ok(true),
            Some("0") => Ok(false),
            other => Err(self.error(
                row.line,
                format!("active flag must be 0 or 1, found `{}`", other.unwrap_or("")),
            )),
        }
    }
}
