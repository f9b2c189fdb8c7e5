use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

use super::mac::SharedKey;

/// Contact id to shared key. On disk: a JSON object of contact id to hex key.
#[derive(Debug, Clone, Default)]
pub struct KeyStore {
    keys: BTreeMap<String, SharedKey>,
}

impl KeyStore {
    pub fn new() -> Self {
        KeyStore::default()
    }

    pub fn insert(&mut self, contact: impl Into<String>, key: SharedKey) {
        self.keys.insert(contact.into(), key);
    }

    pub fn get(&self, contact: &str) -> Option<&SharedKey> {
        self.keys.get(contact)
    }

    pub fn contacts(&self) -> impl Iterator<Item = &str> {
        self.keys.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    /// Loads a key file, refusing files readable by group or others.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        check_permissions(path)?;
        let text = fs::read_to_string(path)?;
        let raw: BTreeMap<String, String> = serde_json::from_str(&text)
            .map_err(|e| Error::KeyStore(format!("{}: {e}", path.display())))?;
        let mut store = KeyStore::new();
        for (contact, hex_key) in raw {
            let key = SharedKey::from_hex(&hex_key)
                .map_err(|e| Error::KeyStore(format!("contact {contact:?}: {e}")))?;
            store.insert(contact, key);
        }
        Ok(store)
    }

    /// Writes the key file with owner-only permissions.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let raw: BTreeMap<&str, String> = self
            .keys
            .iter()
            .map(|(c, k)| (c.as_str(), k.to_hex()))
            .collect();
        let text = serde_json::to_string_pretty(&raw)?;
        write_private(path.as_ref(), text.as_bytes())
    }
}

#[cfg(unix)]
fn check_permissions(path: &Path) -> Result<()> {
    use std::os::unix::fs::PermissionsExt;
    let mode = fs::metadata(path)?.permissions().mode();
    if mode & 0o077 != 0 {
        return Err(Error::KeyStore(format!(
            "{}: permissions {:o} expose keys; expected 600",
            path.display(),
            mode & 0o777
        )));
    }
    Ok(())
}

#[cfg(not(unix))]
fn check_permissions(_path: &Path) -> Result<()> {
    Ok(())
}

#[cfg(unix)]
fn write_private(path: &Path, bytes: &[u8]) -> Result<()> {
    use std::io::Write;
    use std::os::unix::fs::{OpenOptionsExt, PermissionsExt};
    let mut file = fs::OpenOptions::new()
        .write(true)
        .create(true)
        .truncate(true)
        .mode(0o600)
        .open(path)?;
    file.set_permissions(fs::Permissions::from_mode(0o600))?;
    file.write_all(bytes)?;
    Ok(())
}

#[cfg(not(unix))]
fn write_private(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes)?;
    Ok(())
}
