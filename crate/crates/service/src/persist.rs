//! Encrypted on-disk session snapshots for offline workflows.
//!
//! Each session is one file named after its id holding a random 96-bit nonce
//! followed by the ChaCha20-Poly1305 ciphertext of its JSON record.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use chacha20poly1305::aead::{Aead, KeyInit};
use chacha20poly1305::{ChaCha20Poly1305, Key, Nonce};
use chrono::{DateTime, Utc};
use qareply_core::Session;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const ENV_STORE_KEY: &str = "QAREPLY_STORE_KEY";
const NONCE_LEN: usize = 12;
const EXTENSION: &str = "session";

#[derive(Debug, Error)]
pub enum PersistError {
    #[error("store key must be 64 hex characters")]
    BadKey,
    #[error("I/O error: {0}")]
    Io(#[from] io::Error),
    #[error("could not decrypt {0}")]
    Decrypt(PathBuf),
    #[error("corrupt session record: {0}")]
    Corrupt(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoredRecord {
    pub session: Session,
    pub expires_at: DateTime<Utc>,
}

pub struct EncryptedDir {
    dir: PathBuf,
    cipher: ChaCha20Poly1305,
}

impl std::fmt::Debug for EncryptedDir {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("EncryptedDir")
            .field("dir", &self.dir)
            .finish_non_exhaustive()
    }
}

impl EncryptedDir {
    pub fn open(dir: impl Into<PathBuf>, key: &[u8; 32]) -> Result<Self, PersistError> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        Ok(Self {
            dir,
            cipher: ChaCha20Poly1305::new(Key::from_slice(key)),
        })
    }

    pub fn open_with_hex_key(dir: impl Into<PathBuf>, hex_key: &str) -> Result<Self, PersistError> {
        let bytes = hex::decode(hex_key.trim()).map_err(|_| PersistError::BadKey)?;
        let key: [u8; 32] = bytes.try_into().map_err(|_| PersistError::BadKey)?;
        Self::open(dir, &key)
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn path(&self, id: &str) -> PathBuf {
        self.dir.join(format!("{id}.{EXTENSION}"))
    }

    pub fn save(&self, record: &StoredRecord) -> Result<(), PersistError> {
        let plain = serde_json::to_vec(record).map_err(|e| PersistError::Corrupt(e.to_string()))?;
        let mut nonce = [0u8; NONCE_LEN];
        rand::rng().fill(&mut nonce);
        let sealed = self
            .cipher
            .encrypt(Nonce::from_slice(&nonce), plain.as_slice())
            .map_err(|_| PersistError::Corrupt("encryption failed".into()))?;
        let mut bytes = nonce.to_vec();
        bytes.extend_from_slice(&sealed);
        let target = self.path(&record.session.id);
        let staging = target.with_extension("tmp");
        fs::write(&staging, bytes)?;
        fs::rename(staging, target)?;
        Ok(())
    }

    pub fn remove(&self, id: &str) -> Result<(), PersistError> {
        match fs::remove_file(self.path(id)) {
            Err(e) if e.kind() != io::ErrorKind::NotFound => Err(e.into()),
            _ => Ok(()),
        }
    }

    pub fn load(&self, path: &Path) -> Result<StoredRecord, PersistError> {
        let bytes = fs::read(path)?;
        if bytes.len() < NONCE_LEN {
            return Err(PersistError::Decrypt(path.to_path_buf()));
        }
        let (nonce, sealed) = bytes.split_at(NONCE_LEN);
        let plain = self
            .cipher
            .decrypt(Nonce::from_slice(nonce), sealed)
            .map_err(|_| PersistError::Decrypt(path.to_path_buf()))?;
        serde_json::from_slice(&plain).map_err(|e| PersistError::Corrupt(e.to_string()))
    }

    pub fn load_all(&self) -> Result<Vec<StoredRecord>, PersistError> {
        let mut records = Vec::new();
        for entry in fs::read_dir(&self.dir)? {
            let path = entry?.path();
            if path.extension().is_some_and(|ext| ext == EXTENSION) {
                records.push(self.load(&path)?);
            }
        }
        Ok(records)
    }
}
