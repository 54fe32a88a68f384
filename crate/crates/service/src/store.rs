//! Submitted cases and their responses, keyed by content hash.

use std::fs;
use std::path::PathBuf;
use std::sync::Mutex;

use sha2::{Digest, Sha256};

use crate::ServiceError;

pub struct CaseStore {
    dir: PathBuf,
    write_lock: Mutex<()>,
}

impl CaseStore {
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self, ServiceError> {
        let dir = dir.into();
        fs::create_dir_all(&dir).map_err(|e| ServiceError::Io(format!("{}: {e}", dir.display())))?;
        Ok(CaseStore {
            dir,
            write_lock: Mutex::new(()),
        })
    }

    /// SHA-256 of the encoding tag and the body.
    pub fn key(kind: &str, body: &str) -> String {
        let mut h = Sha256::new();
        h.update(kind.as_bytes());
        h.update([0]);
        h.update(body.as_bytes());
        hex::encode(h.finalize())
    }

    /// Stores the request as received and the response JSON; returns the key.
    pub fn put(&self, kind: &str, body: &str, response: &str) -> Result<String, ServiceError> {
        let key = Self::key(kind, body);
        let _guard = self.write_lock.lock().unwrap_or_else(|e| e.into_inner());
        let io = |e: std::io::Error| ServiceError::Io(format!("case store: {e}"));
        fs::write(self.dir.join(format!("{key}.request.{kind}")), body).map_err(io)?;
        fs::write(self.dir.join(format!("{key}.response.json")), response).map_err(io)?;
        Ok(key)
    }

    pub fn get(&self, key: &str) -> Result<String, ServiceError> {
        let valid = key.len() == 64 && key.bytes().all(|b| b.is_ascii_hexdigit() && !b.is_ascii_uppercase());
        if !valid {
            return Err(ServiceError::BadInput(format!("`{key}` is not a case hash")));
        }
        fs::read_to_string(self.dir.join(format!("{key}.response.json")))
            .map_err(|_| ServiceError::NotFound(format!("case {key}")))
    }
}
