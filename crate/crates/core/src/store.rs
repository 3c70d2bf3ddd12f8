//! Shared-table record store.
//!
//! All tenants write into one table. The tenant id and row id of each row are
//! kept in clear for addressing; every field value is encrypted under the
//! owning tenant's derived keys. Rows live in memory and are persisted as an
//! append-only newline-delimited JSON log that is replayed on open:
//!
//! ```text
//! {"v":1,"table":"student_entry","fields":["name","contact","department"]}
//! {"op":"ins","t":"uni_a","r":1,"ts":1700000000,"f":{"contact":"<b64>",...}}
//! {"op":"del","t":"uni_a","r":1,"ts":1700000001}
//! ```
//!
//! A trailing line without its newline is the remains of a torn write and is
//! cut off on open. Each event is synced to disk before the call returns.
//! A sidecar `<path>.lock` file holds an exclusive advisory lock while a
//! store is open.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fs::{File, OpenOptions};
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use rand::rngs::OsRng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codec::{self, CipherValue, CodecError};
use crate::keys::{derive_tenant_key, MasterKey, TenantId, TenantKeySet};

pub const FORMAT_VERSION: u32 = 1;
pub const MAX_FIELDS: usize = 32;
pub const MAX_FIELD_NAME_LEN: usize = 64;
pub const MAX_TABLE_NAME_LEN: usize = 128;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("store already exists: {0}")]
    AlreadyExists(PathBuf),
    #[error("invalid schema: {0}")]
    InvalidSchema(String),
    #[error("corrupt store header: {0}")]
    CorruptHeader(String),
    #[error("unsupported store version {found} (expected {FORMAT_VERSION})")]
    VersionMismatch { found: u64 },
    #[error("corrupt log entry at line {line}: {reason}")]
    CorruptEntry { line: usize, reason: String },
    #[error("store is locked by another process: {0}")]
    Locked(PathBuf),
    #[error("fields do not match schema: {0}")]
    SchemaMismatch(String),
    #[error("field {field:?} is {len} bytes, limit is {}", codec::MAX_FIELD_LEN)]
    FieldTooLarge { field: String, len: usize },
    #[error("row {0} not found")]
    NotFound(RowId),
    #[error("row {0} belongs to another tenant")]
    IsolationDenied(RowId),
    #[error("authentication failed for row {0}: wrong master key or corrupted store")]
    Auth(RowId),
    #[error("internal codec failure on row {row}: {source}")]
    Codec { row: RowId, source: CodecError },
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Store-assigned primary key. Starts at 1 and is never reused.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RowId(pub u64);

impl fmt::Display for RowId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TableSchema {
    table: String,
    fields: Vec<String>,
}

impl TableSchema {
    pub fn new<S: Into<String>>(
        table: impl Into<String>,
        fields: impl IntoIterator<Item = S>,
    ) -> Result<TableSchema, StoreError> {
        let table = table.into();
        let fields: Vec<String> = fields.into_iter().map(Into::into).collect();
        if table.is_empty()
            || table.len() > MAX_TABLE_NAME_LEN
            || table.chars().any(char::is_control)
        {
            return Err(StoreError::InvalidSchema(format!(
                "bad table name {table:?}"
            )));
        }
        if fields.is_empty() || fields.len() > MAX_FIELDS {
            return Err(StoreError::InvalidSchema(format!(
                "expected 1..={MAX_FIELDS} fields, got {}",
                fields.len()
            )));
        }
        let mut seen = HashSet::new();
        for name in &fields {
            let valid = !name.is_empty()
                && name.len() <= MAX_FIELD_NAME_LEN
                && name
                    .bytes()
                    .all(|b| b.is_ascii_lowercase() || b.is_ascii_digit() || b == b'_');
            if !valid {
                return Err(StoreError::InvalidSchema(format!(
                    "bad field name {name:?}"
                )));
            }
            if !seen.insert(name.as_str()) {
                return Err(StoreError::InvalidSchema(format!(
                    "duplicate field {name:?}"
                )));
            }
        }
        Ok(TableSchema { table, fields })
    }

    pub fn table(&self) -> &str {
        &self.table
    }

    pub fn fields(&self) -> &[String] {
        &self.fields
    }
}

/// A decrypted row as returned to its owner.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Record {
    pub row_id: RowId,
    /// Field values in schema order.
    pub fields: Vec<(String, String)>,
}

impl Record {
    pub fn get(&self, field: &str) -> Option<&str> {
        self.fields
            .iter()
            .find(|(name, _)| name == field)
            .map(|(_, v)| v.as_str())
    }
}

/// A row as held at rest: clear addressing, encrypted values in schema order.
#[derive(Debug, Clone)]
struct StoredRow {
    tenant: TenantId,
    values: Vec<CipherValue>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    v: u64,
    table: String,
    fields: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
enum Op {
    #[serde(rename = "ins")]
    Insert,
    #[serde(rename = "upd")]
    Update,
    #[serde(rename = "del")]
    Delete,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Event {
    op: Op,
    t: String,
    r: RowId,
    ts: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    f: Option<BTreeMap<String, String>>,
}

fn lock_path(path: &Path) -> PathBuf {
    let mut name = path.as_os_str().to_owned();
    name.push(".lock");
    PathBuf::from(name)
}

fn acquire_lock(path: &Path) -> Result<File, StoreError> {
    let lock_path = lock_path(path);
    let lock = OpenOptions::new()
        .create(true)
        .truncate(false)
        .write(true)
        .open(&lock_path)?;
    match lock.try_lock() {
        Ok(()) => Ok(lock),
        Err(std::fs::TryLockError::WouldBlock) => Err(StoreError::Locked(path.to_path_buf())),
        Err(std::fs::TryLockError::Error(e)) => Err(e.into()),
    }
}

fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

fn sync_parent_dir(path: &Path) {
    if let Some(dir) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        if let Ok(d) = File::open(dir) {
            let _ = d.sync_all();
        }
    }
}

/// An open store. Mutations take `&mut self`; reads work on `&self`.
pub struct Store {
    path: PathBuf,
    schema: TableSchema,
    master: MasterKey,
    rows: BTreeMap<RowId, StoredRow>,
    last_id: u64,
    log: File,
    log_len: u64,
    _lock: File,
}

impl fmt::Debug for Store {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Store")
            .field("path", &self.path)
            .field("schema", &self.schema)
            .field("rows", &self.rows.len())
            .field("last_id", &self.last_id)
            .finish_non_exhaustive()
    }
}

impl Store {
    /// Writes a new, empty store file containing only the header line.
    pub fn init_file(path: impl AsRef<Path>, schema: &TableSchema) -> Result<(), StoreError> {
        let path = path.as_ref();
        let mut file = match OpenOptions::new().write(true).create_new(true).open(path) {
            Ok(f) => f,
            Err(e) if e.kind() == io::ErrorKind::AlreadyExists => {
                return Err(StoreError::AlreadyExists(path.to_path_buf()))
            }
            Err(e) => return Err(e.into()),
        };
        let header = Header {
            v: u64::from(FORMAT_VERSION),
            table: schema.table.clone(),
            fields: schema.fields.clone(),
        };
        let mut line = serde_json::to_string(&header).expect("header serializes");
        line.push('\n');
        file.write_all(line.as_bytes())?;
        file.sync_all()?;
        sync_parent_dir(path);
        Ok(())
    }

    pub fn create(
        path: impl AsRef<Path>,
        schema: &TableSchema,
        master: MasterKey,
    ) -> Result<Store, StoreError> {
        Store::init_file(path.as_ref(), schema)?;
        Store::open(path, master)
    }

    /// Opens an existing store and replays its log.
    pub fn open(path: impl AsRef<Path>, master: MasterKey) -> Result<Store, StoreError> {
        let path = path.as_ref().to_path_buf();
        let lock = acquire_lock(&path)?;
        let mut log = OpenOptions::new().read(true).append(true).open(&path)?;
        let mut bytes = Vec::new();
        log.read_to_end(&mut bytes)?;

        let header_end = bytes
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| StoreError::CorruptHeader("missing header line".into()))?;
        let schema = parse_header(&bytes[..header_end])?;

        // Anything after the last newline is a torn write.
        let complete_len = bytes.iter().rposition(|&b| b == b'\n').map_or(0, |i| i + 1);
        if complete_len < bytes.len() {
            log::warn!(
                "{}: discarding {} bytes of torn trailing entry",
                path.display(),
                bytes.len() - complete_len
            );
            log.set_len(complete_len as u64)?;
            log.sync_all()?;
        }

        let mut store = Store {
            path,
            schema,
            master,
            rows: BTreeMap::new(),
            last_id: 0,
            log,
            log_len: complete_len as u64,
            _lock: lock,
        };

        let body = &bytes[header_end + 1..complete_len];
        for (idx, raw) in body.split(|&b| b == b'\n').enumerate() {
            if raw.is_empty() {
                continue;
            }
            let line = idx + 2;
            store
                .replay_line(raw)
                .map_err(|reason| StoreError::CorruptEntry { line, reason })?;
        }
        Ok(store)
    }

    fn replay_line(&mut self, raw: &[u8]) -> Result<(), String> {
        let event: Event = serde_json::from_slice(raw).map_err(|e| e.to_string())?;
        let tenant = TenantId::new(event.t).map_err(|e| e.to_string())?;
        let row = event.r;
        match event.op {
            Op::Insert => {
                if row.0 <= self.last_id {
                    return Err(format!("row id {row} is not above {}", self.last_id));
                }
                let values = self.decode_fields(event.f)?;
                self.last_id = row.0;
                self.rows.insert(row, StoredRow { tenant, values });
            }
            Op::Update => {
                let values = self.decode_fields(event.f)?;
                let existing = self.owned_row_mut(row, &tenant)?;
                existing.values = values;
            }
            Op::Delete => {
                if event.f.is_some() {
                    return Err("delete carries fields".into());
                }
                self.owned_row_mut(row, &tenant)?;
                self.rows.remove(&row);
            }
        }
        Ok(())
    }

    fn owned_row_mut(&mut self, row: RowId, tenant: &TenantId) -> Result<&mut StoredRow, String> {
        match self.rows.get_mut(&row) {
            Some(r) if &r.tenant == tenant => Ok(r),
            Some(_) => Err(format!("row {row} is owned by another tenant")),
            None => Err(format!("row {row} is not live")),
        }
    }

    fn decode_fields(
        &self,
        f: Option<BTreeMap<String, String>>,
    ) -> Result<Vec<CipherValue>, String> {
        let mut map = f.ok_or("missing fields")?;
        if map.len() != self.schema.fields.len() {
            return Err(format!(
                "expected {} fields, got {}",
                self.schema.fields.len(),
                map.len()
            ));
        }
        self.schema
            .fields
            .iter()
            .map(|name| {
                let text = map
                    .remove(name)
                    .ok_or_else(|| format!("missing field {name:?}"))?;
                CipherValue::from_base64(&text).map_err(|e| format!("field {name:?}: {e}"))
            })
            .collect()
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn schema(&self) -> &TableSchema {
        &self.schema
    }

    /// Number of live rows across all tenants.
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Highest row id ever assigned, 0 for a fresh store.
    pub fn last_row_id(&self) -> RowId {
        RowId(self.last_id)
    }

    /// Owner of a live row. Reveals only clear-text addressing data.
    pub fn owner_of(&self, row_id: RowId) -> Option<&TenantId> {
        self.rows.get(&row_id).map(|r| &r.tenant)
    }

    pub fn insert<K: AsRef<str>, V: AsRef<str>>(
        &mut self,
        tenant: &TenantId,
        values: &[(K, V)],
    ) -> Result<RowId, StoreError> {
        let encrypted = self.encrypt_row(tenant, values)?;
        let row_id = RowId(self.last_id + 1);
        self.append(Op::Insert, tenant, row_id, Some(&encrypted))?;
        self.last_id = row_id.0;
        self.rows.insert(
            row_id,
            StoredRow {
                tenant: tenant.clone(),
                values: encrypted,
            },
        );
        Ok(row_id)
    }

    pub fn get(&self, tenant: &TenantId, row_id: RowId) -> Result<Record, StoreError> {
        let row = self.check_owner(tenant, row_id)?;
        let keys = derive_tenant_key(&self.master, tenant);
        self.decrypt_row(&keys, row_id, row)
    }

    /// All of the tenant's rows in ascending row id order. Other tenants'
    /// rows are skipped without touching their ciphertext.
    pub fn list(&self, tenant: &TenantId) -> Result<Vec<Record>, StoreError> {
        let keys = derive_tenant_key(&self.master, tenant);
        self.rows
            .iter()
            .filter(|(_, row)| &row.tenant == tenant)
            .map(|(&id, row)| self.decrypt_row(&keys, id, row))
            .collect()
    }

    /// Replaces every field of an owned row.
    pub fn update<K: AsRef<str>, V: AsRef<str>>(
        &mut self,
        tenant: &TenantId,
        row_id: RowId,
        values: &[(K, V)],
    ) -> Result<(), StoreError> {
        self.check_owner(tenant, row_id)?;
        let encrypted = self.encrypt_row(tenant, values)?;
        self.append(Op::Update, tenant, row_id, Some(&encrypted))?;
        if let Some(row) = self.rows.get_mut(&row_id) {
            row.values = encrypted;
        }
        Ok(())
    }

    pub fn delete(&mut self, tenant: &TenantId, row_id: RowId) -> Result<(), StoreError> {
        self.check_owner(tenant, row_id)?;
        self.append(Op::Delete, tenant, row_id, None)?;
        self.rows.remove(&row_id);
        Ok(())
    }

    fn check_owner(&self, tenant: &TenantId, row_id: RowId) -> Result<&StoredRow, StoreError> {
        match self.rows.get(&row_id) {
            None => Err(StoreError::NotFound(row_id)),
            Some(row) if &row.tenant != tenant => Err(StoreError::IsolationDenied(row_id)),
            Some(row) => Ok(row),
        }
    }

    fn encrypt_row<K: AsRef<str>, V: AsRef<str>>(
        &self,
        tenant: &TenantId,
        values: &[(K, V)],
    ) -> Result<Vec<CipherValue>, StoreError> {
        let mut by_name: BTreeMap<&str, &str> = BTreeMap::new();
        for (k, v) in values {
            let name = k.as_ref();
            if !self.schema.fields.iter().any(|f| f == name) {
                return Err(StoreError::SchemaMismatch(format!(
                    "unknown field {name:?}"
                )));
            }
            if by_name.insert(name, v.as_ref()).is_some() {
                return Err(StoreError::SchemaMismatch(format!(
                    "field {name:?} given twice"
                )));
            }
        }
        let keys = derive_tenant_key(&self.master, tenant);
        self.schema
            .fields
            .iter()
            .map(|name| {
                let plain = by_name
                    .get(name.as_str())
                    .ok_or_else(|| StoreError::SchemaMismatch(format!("missing field {name:?}")))?;
                codec::encrypt_value(plain.as_bytes(), &keys, &mut OsRng).map_err(|e| match e {
                    CodecError::FieldTooLarge { len } => StoreError::FieldTooLarge {
                        field: name.clone(),
                        len,
                    },
                    other => StoreError::SchemaMismatch(other.to_string()),
                })
            })
            .collect()
    }

    fn decrypt_row(
        &self,
        keys: &TenantKeySet,
        row_id: RowId,
        row: &StoredRow,
    ) -> Result<Record, StoreError> {
        let fields = self
            .schema
            .fields
            .iter()
            .zip(&row.values)
            .map(|(name, value)| {
                let plain = codec::decrypt_value(value, keys).map_err(|e| match e {
                    CodecError::Auth => StoreError::Auth(row_id),
                    source => StoreError::Codec {
                        row: row_id,
                        source,
                    },
                })?;
                let text = String::from_utf8(plain).map_err(|_| StoreError::Codec {
                    row: row_id,
                    source: CodecError::Malformed("plaintext is not UTF-8".into()),
                })?;
                Ok((name.clone(), text))
            })
            .collect::<Result<_, StoreError>>()?;
        Ok(Record { row_id, fields })
    }

    fn append(
        &mut self,
        op: Op,
        tenant: &TenantId,
        row_id: RowId,
        values: Option<&[CipherValue]>,
    ) -> Result<(), StoreError> {
        let f = values.map(|vals| {
            self.schema
                .fields
                .iter()
                .zip(vals)
                .map(|(name, v)| (name.clone(), v.to_base64()))
                .collect()
        });
        let event = Event {
            op,
            t: tenant.as_str().to_owned(),
            r: row_id,
            ts: unix_now(),
            f,
        };
        let mut line = serde_json::to_vec(&event).expect("event serializes");
        line.push(b'\n');
        let written = self
            .log
            .write_all(&line)
            .and_then(|()| self.log.sync_data());
        if let Err(e) = written {
            // Cut any partial line so later appends do not land after garbage.
            let _ = self.log.set_len(self.log_len);
            return Err(e.into());
        }
        self.log_len += line.len() as u64;
        Ok(())
    }
}

fn parse_header(raw: &[u8]) -> Result<TableSchema, StoreError> {
    let value: serde_json::Value =
        serde_json::from_slice(raw).map_err(|e| StoreError::CorruptHeader(e.to_string()))?;
    let version = value
        .get("v")
        .and_then(serde_json::Value::as_u64)
        .ok_or_else(|| StoreError::CorruptHeader("missing version".into()))?;
    if version != u64::from(FORMAT_VERSION) {
        return Err(StoreError::VersionMismatch { found: version });
    }
    let header: Header =
        serde_json::from_value(value).map_err(|e| StoreError::CorruptHeader(e.to_string()))?;
    TableSchema::new(header.table, header.fields)
        .map_err(|e| StoreError::CorruptHeader(e.to_string()))
}

pub fn create_store(
    path: impl AsRef<Path>,
    schema: &TableSchema,
    master: MasterKey,
) -> Result<Store, StoreError> {
    Store::create(path, schema, master)
}

pub fn open_store(path: impl AsRef<Path>, master: MasterKey) -> Result<Store, StoreError> {
    Store::open(path, master)
}
