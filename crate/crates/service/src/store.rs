//! In-memory session store with TTL expiry and per-session locking.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, RwLock};

use chrono::{DateTime, Duration, Utc};
use qareply_core::Session;
use rand::Rng;
use tokio::sync::{RwLock as SessionLock, RwLockReadGuard, RwLockWriteGuard};

use crate::persist::{EncryptedDir, PersistError, StoredRecord};

#[derive(Debug, Default)]
pub enum StoreMode {
    /// Nothing ever leaves memory.
    #[default]
    Ephemeral,
    EncryptedFile(EncryptedDir),
}

struct Entry {
    session: SessionLock<Session>,
    expires_at: Mutex<DateTime<Utc>>,
}

/// Shared reference to one stored session.
#[derive(Clone)]
pub struct SessionHandle {
    id: String,
    entry: Arc<Entry>,
}

impl SessionHandle {
    pub fn id(&self) -> &str {
        &self.id
    }

    pub async fn read(&self) -> RwLockReadGuard<'_, Session> {
        self.entry.session.read().await
    }

    /// Exclusive access; all mutations of one session are serialized here.
    pub async fn write(&self) -> RwLockWriteGuard<'_, Session> {
        self.entry.session.write().await
    }

    pub fn expires_at(&self) -> DateTime<Utc> {
        *self.entry.expires_at.lock().unwrap()
    }

    /// Moves expiry earlier, never later.
    pub fn expire_no_later_than(&self, at: DateTime<Utc>) {
        let mut expires = self.entry.expires_at.lock().unwrap();
        *expires = (*expires).min(at);
    }
}

pub struct SessionStore {
    sessions: RwLock<HashMap<String, SessionHandle>>,
    ttl: Duration,
    mode: StoreMode,
}

/// 128 random bits as 32 lowercase hex characters.
pub fn new_session_id() -> String {
    format!("{:032x}", rand::rng().random::<u128>())
}

impl SessionStore {
    pub fn new(ttl: Duration, mode: StoreMode) -> Self {
        Self {
            sessions: RwLock::new(HashMap::new()),
            ttl,
            mode,
        }
    }

    pub fn ephemeral(ttl: Duration) -> Self {
        Self::new(ttl, StoreMode::Ephemeral)
    }

    pub fn mode(&self) -> &StoreMode {
        &self.mode
    }

    pub fn ttl(&self) -> Duration {
        self.ttl
    }

    fn insert_entry(&self, session: Session, expires_at: DateTime<Utc>) -> SessionHandle {
        let handle = SessionHandle {
            id: session.id.clone(),
            entry: Arc::new(Entry {
                session: SessionLock::new(session),
                expires_at: Mutex::new(expires_at),
            }),
        };
        self.sessions.write().unwrap().insert(handle.id.clone(), handle.clone());
        handle
    }

    /// Stores a new session expiring `ttl` after `now`.
    pub fn insert(&self, session: Session, now: DateTime<Utc>) -> SessionHandle {
        self.insert_entry(session, now + self.ttl)
    }

    /// Looks up a live session; an expired one is dropped on the spot.
    pub fn get(&self, id: &str, now: DateTime<Utc>) -> Option<SessionHandle> {
        let handle = self.sessions.read().unwrap().get(id).cloned()?;
        if handle.expires_at() <= now {
            self.remove(id);
            return None;
        }
        Some(handle)
    }

    fn remove(&self, id: &str) {
        self.sessions.write().unwrap().remove(id);
        if let StoreMode::EncryptedFile(dir) = &self.mode {
            if let Err(e) = dir.remove(id) {
                tracing::warn!(session_id = %id, error = %e, "could not delete session file");
            }
        }
    }

    /// Drops every session whose expiry has passed; returns how many.
    pub fn purge_expired(&self, now: DateTime<Utc>) -> usize {
        let expired: Vec<String> = self
            .sessions
            .read()
            .unwrap()
            .values()
            .filter(|h| h.expires_at() <= now)
            .map(|h| h.id.clone())
            .collect();
        for id in &expired {
            self.remove(id);
        }
        expired.len()
    }

    /// Forgets all in-memory sessions. Encrypted files are kept.
    pub fn clear(&self) -> usize {
        let mut sessions = self.sessions.write().unwrap();
        let count = sessions.len();
        sessions.clear();
        count
    }

    pub fn len(&self) -> usize {
        self.sessions.read().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Writes a snapshot in encrypted-file mode; a no-op when ephemeral.
    pub fn persist(&self, handle: &SessionHandle, session: &Session) -> Result<(), PersistError> {
        match &self.mode {
            StoreMode::Ephemeral => Ok(()),
            StoreMode::EncryptedFile(dir) => dir.save(&StoredRecord {
                session: session.clone(),
                expires_at: handle.expires_at(),
            }),
        }
    }

    /// Loads unexpired snapshots from disk; returns how many were restored.
    pub fn restore(&self, now: DateTime<Utc>) -> Result<usize, PersistError> {
        let StoreMode::EncryptedFile(dir) = &self.mode else {
            return Ok(0);
        };
        let mut restored = 0;
        for record in dir.load_all()? {
            if record.expires_at <= now {
                dir.remove(&record.session.id)?;
            } else {
                self.insert_entry(record.session, record.expires_at);
                restored += 1;
            }
        }
        Ok(restored)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use qareply_core::{EmailMessage, UserIdentity};

    fn t(secs: i64) -> DateTime<Utc> {
        DateTime::from_timestamp(1_700_000_000 + secs, 0).unwrap()
    }

    fn session(id: &str) -> Session {
        let email = EmailMessage {
            subject: "s".into(),
            sender_name: "a".into(),
            sender_address: "a@x".into(),
            body: "Can you come?".into(),
            thread: vec![],
            received_at: None,
        };
        Session::new(id, email, UserIdentity::new("u", "u@x"), t(0))
    }

    #[test]
    fn ids_are_128_bit_hex_and_distinct() {
        let ids: std::collections::HashSet<String> = (0..1000).map(|_| new_session_id()).collect();
        assert_eq!(ids.len(), 1000);
        assert!(ids
            .iter()
            .all(|id| id.len() == 32 && id.chars().all(|c| c.is_ascii_hexdigit())));
    }

    #[test]
    fn expiry_is_lazy_and_swept() {
        let store = SessionStore::ephemeral(Duration::seconds(100));
        store.insert(session("a"), t(0));
        store.insert(session("b"), t(50));
        assert!(store.get("a", t(99)).is_some());
        assert!(store.get("a", t(100)).is_none());
        assert_eq!(store.len(), 1);
        assert_eq!(store.purge_expired(t(149)), 0);
        assert_eq!(store.purge_expired(t(150)), 1);
        assert!(store.is_empty());
    }

    #[test]
    fn expiry_only_moves_earlier() {
        let store = SessionStore::ephemeral(Duration::seconds(100));
        let handle = store.insert(session("a"), t(0));
        handle.expire_no_later_than(t(500));
        assert_eq!(handle.expires_at(), t(100));
        handle.expire_no_later_than(t(10));
        assert_eq!(handle.expires_at(), t(10));
    }

    #[test]
    fn encrypted_snapshots_round_trip_without_plaintext() {
        let tmp = tempfile::tempdir().unwrap();
        let key = [7u8; 32];
        let canary = "Can you come?";
        let store = SessionStore::new(
            Duration::seconds(100),
            StoreMode::EncryptedFile(EncryptedDir::open(tmp.path(), &key).unwrap()),
        );
        let handle = store.insert(session("abc"), t(0));
        let snapshot = session("abc");
        store.persist(&handle, &snapshot).unwrap();
        let bytes = std::fs::read(tmp.path().join("abc.session")).unwrap();
        assert!(!bytes.windows(canary.len()).any(|w| w == canary.as_bytes()));

        let reopened = SessionStore::new(
            Duration::seconds(100),
            StoreMode::EncryptedFile(EncryptedDir::open(tmp.path(), &key).unwrap()),
        );
        assert_eq!(reopened.restore(t(10)).unwrap(), 1);
        let restored = reopened.get("abc", t(10)).unwrap();
        assert_eq!(restored.expires_at(), t(100));

        let wrong_key = EncryptedDir::open(tmp.path(), &[8u8; 32]).unwrap();
        assert!(matches!(wrong_key.load_all(), Err(PersistError::Decrypt(_))));

        assert_eq!(reopened.purge_expired(t(100)), 1);
        assert!(!tmp.path().join("abc.session").exists());
    }
}
