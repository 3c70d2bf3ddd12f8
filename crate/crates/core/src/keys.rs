//! Master key loading and per-tenant key derivation.
//!
//! Derivation uses AES only. The tenant root is the CBC-MAC of the padded
//! tenant id under the master key; the encryption and MAC keys are the
//! encryptions of the constant blocks `01..01` and `02..02` under that root.

use std::fmt;
use std::path::PathBuf;

use thiserror::Error;

use crate::aes::{Key128, KeySchedule, BLOCK_LEN, KEY_LEN};
use crate::codec::{cbc_mac, pad};

/// Environment variable holding the hex master key.
pub const MASTER_KEY_ENV: &str = "CMT_MASTER_KEY";

pub const MAX_TENANT_ID_LEN: usize = 64;

const ENC_KEY_CONSTANT: [u8; BLOCK_LEN] = [0x01; BLOCK_LEN];
const MAC_KEY_CONSTANT: [u8; BLOCK_LEN] = [0x02; BLOCK_LEN];

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum KeyError {
    #[error("no master key: {0}")]
    MissingKey(String),
    #[error("master key must be exactly 32 hex characters")]
    MalformedKey,
    #[error("invalid tenant id {0:?}: expected 1..=64 chars of [a-z0-9_-]")]
    InvalidTenantId(String),
}

/// The operator's root secret.
#[derive(Clone)]
pub struct MasterKey {
    key: Key128,
    schedule: KeySchedule,
}

impl MasterKey {
    pub fn new(key: Key128) -> MasterKey {
        let schedule = KeySchedule::expand(&key);
        MasterKey { key, schedule }
    }

    /// Parses exactly 32 hex digits.
    pub fn from_hex(text: &str) -> Result<MasterKey, KeyError> {
        if text.len() != 2 * KEY_LEN {
            return Err(KeyError::MalformedKey);
        }
        let mut bytes = [0u8; KEY_LEN];
        hex::decode_to_slice(text, &mut bytes).map_err(|_| KeyError::MalformedKey)?;
        Ok(MasterKey::new(Key128::new(bytes)))
    }

    pub fn key(&self) -> &Key128 {
        &self.key
    }
}

impl fmt::Debug for MasterKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("MasterKey(..)")
    }
}

/// Where to look for the master key. A file wins over the environment.
#[derive(Debug, Clone, Default)]
pub struct KeySource {
    pub file: Option<PathBuf>,
    pub env_value: Option<String>,
}

impl KeySource {
    /// Reads [`MASTER_KEY_ENV`] from the process environment.
    pub fn from_env(file: Option<PathBuf>) -> KeySource {
        KeySource {
            file,
            env_value: std::env::var(MASTER_KEY_ENV).ok(),
        }
    }
}

pub fn load_master_key(source: &KeySource) -> Result<MasterKey, KeyError> {
    if let Some(path) = &source.file {
        let text = std::fs::read_to_string(path)
            .map_err(|e| KeyError::MissingKey(format!("{}: {e}", path.display())))?;
        let text = text.strip_suffix('\n').unwrap_or(&text);
        let text = text.strip_suffix('\r').unwrap_or(text);
        return MasterKey::from_hex(text);
    }
    match &source.env_value {
        Some(value) => MasterKey::from_hex(value),
        None => Err(KeyError::MissingKey(format!(
            "set {MASTER_KEY_ENV} or pass --master-key-file"
        ))),
    }
}

/// A validated tenant identifier.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TenantId(String);

impl TenantId {
    pub fn new(id: impl Into<String>) -> Result<TenantId, KeyError> {
        let id = id.into();
        let valid = !id.is_empty()
            && id.len() <= MAX_TENANT_ID_LEN
            && id
                .bytes()
                .all(|b| b.is_ascii_lowercase() || b.is_ascii_digit() || b == b'_' || b == b'-');
        if valid {
            Ok(TenantId(id))
        } else {
            Err(KeyError::InvalidTenantId(id))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for TenantId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::str::FromStr for TenantId {
    type Err = KeyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        TenantId::new(s)
    }
}

/// Per-tenant encryption and MAC keys, kept with their expanded schedules.
#[derive(Clone)]
pub struct TenantKeySet {
    enc_key: Key128,
    mac_key: Key128,
    enc_schedule: KeySchedule,
    mac_schedule: KeySchedule,
}

impl TenantKeySet {
    pub fn derive(master: &MasterKey, tenant: &TenantId) -> TenantKeySet {
        let root = Key128::new(cbc_mac(&master.schedule, &pad(tenant.as_str().as_bytes())));
        let root_schedule = KeySchedule::expand(&root);
        let enc_key = Key128::new(root_schedule.encrypt_block(&ENC_KEY_CONSTANT));
        let mac_key = Key128::new(root_schedule.encrypt_block(&MAC_KEY_CONSTANT));
        TenantKeySet {
            enc_schedule: KeySchedule::expand(&enc_key),
            mac_schedule: KeySchedule::expand(&mac_key),
            enc_key,
            mac_key,
        }
    }

    pub fn enc_key(&self) -> &Key128 {
        &self.enc_key
    }

    pub fn mac_key(&self) -> &Key128 {
        &self.mac_key
    }

    pub(crate) fn enc_schedule(&self) -> &KeySchedule {
        &self.enc_schedule
    }

    pub(crate) fn mac_schedule(&self) -> &KeySchedule {
        &self.mac_schedule
    }
}

impl PartialEq for TenantKeySet {
    fn eq(&self, other: &Self) -> bool {
        self.enc_key == other.enc_key && self.mac_key == other.mac_key
    }
}

impl Eq for TenantKeySet {}

impl fmt::Debug for TenantKeySet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("TenantKeySet(..)")
    }
}

pub fn derive_tenant_key(master: &MasterKey, tenant: &TenantId) -> TenantKeySet {
    TenantKeySet::derive(master, tenant)
}
