//! C ABI over `cmt-core`.
//!
//! Every fallible function returns a [`CmtStatus`]. On failure a message is
//! available from [`cmt_last_error_message`] on the same thread. Handles are
//! opaque and must be released with their matching `_free` function. Strings
//! returned through out-parameters are owned by the caller and released with
//! [`cmt_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use cmt_core::cli::{exit, write_records, Failure, Format};
use cmt_core::keys::{derive_tenant_key, KeyError, MasterKey, TenantId};
use cmt_core::store::{Record, RowId, Store, StoreError, TableSchema};
use cmt_core::{selftest, Key128, KeySchedule};

/// Status codes. Values match the `cmt` tool's exit codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CmtStatus {
    Ok = 0,
    SelftestFailed = 1,
    InvalidArgument = 2,
    AccessError = 3,
    NotFound = 4,
    IsolationDenied = 5,
    AuthError = 6,
    Panic = 7,
}

impl CmtStatus {
    fn from_exit_code(code: i32) -> CmtStatus {
        match code {
            exit::OK => CmtStatus::Ok,
            exit::SELFTEST_FAILED => CmtStatus::SelftestFailed,
            exit::USAGE => CmtStatus::InvalidArgument,
            exit::ACCESS => CmtStatus::AccessError,
            exit::NOT_FOUND => CmtStatus::NotFound,
            exit::ISOLATION_DENIED => CmtStatus::IsolationDenied,
            exit::AUTH => CmtStatus::AuthError,
            _ => CmtStatus::Panic,
        }
    }
}

/// Opaque master key handle.
pub struct CmtMasterKey(MasterKey);

/// Opaque open-store handle.
pub struct CmtStore(Store);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: impl Into<String>) {
    let msg = CString::new(message.into().replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(msg));
}

struct Error {
    status: CmtStatus,
    message: String,
}

impl Error {
    fn invalid(message: impl Into<String>) -> Error {
        Error {
            status: CmtStatus::InvalidArgument,
            message: message.into(),
        }
    }
}

impl From<Failure> for Error {
    fn from(f: Failure) -> Self {
        Error {
            status: CmtStatus::from_exit_code(f.code),
            message: f.message,
        }
    }
}

impl From<StoreError> for Error {
    fn from(e: StoreError) -> Self {
        Failure::from(e).into()
    }
}

impl From<KeyError> for Error {
    fn from(e: KeyError) -> Self {
        Failure::from(e).into()
    }
}

fn guard(f: impl FnOnce() -> Result<CmtStatus, Error>) -> CmtStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(status)) => status,
        Ok(Err(e)) => {
            set_last_error(e.message);
            e.status
        }
        Err(_) => {
            set_last_error("panic inside cmt");
            CmtStatus::Panic
        }
    }
}

unsafe fn c_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, Error> {
    if p.is_null() {
        return Err(Error::invalid(format!("{what} is NULL")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Error::invalid(format!("{what} is not UTF-8")))
}

unsafe fn c_str_array<'a>(
    p: *const *const c_char,
    len: usize,
    what: &str,
) -> Result<Vec<&'a str>, Error> {
    if len == 0 {
        return Ok(Vec::new());
    }
    if p.is_null() {
        return Err(Error::invalid(format!("{what} is NULL")));
    }
    std::slice::from_raw_parts(p, len)
        .iter()
        .map(|&s| c_str(s, what))
        .collect()
}

unsafe fn block_in(p: *const u8, what: &str) -> Result<[u8; 16], Error> {
    if p.is_null() {
        return Err(Error::invalid(format!("{what} is NULL")));
    }
    let mut out = [0u8; 16];
    ptr::copy_nonoverlapping(p, out.as_mut_ptr(), 16);
    Ok(out)
}

unsafe fn block_out(p: *mut u8, block: &[u8; 16]) {
    ptr::copy_nonoverlapping(block.as_ptr(), p, 16);
}

fn require_out<T>(p: *mut T, what: &str) -> Result<(), Error> {
    if p.is_null() {
        Err(Error::invalid(format!("{what} is NULL")))
    } else {
        Ok(())
    }
}

fn into_c_string(s: String) -> Result<*mut c_char, Error> {
    CString::new(s)
        .map(CString::into_raw)
        .map_err(|_| Error::invalid("output contains a NUL byte"))
}

/// Message for the last failed call on this thread, or NULL. The pointer is
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn cmt_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Releases a string returned by this library. NULL is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed already.
#[no_mangle]
pub unsafe extern "C" fn cmt_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Encrypts one 16-byte block under a 16-byte key.
///
/// # Safety
/// `key` and `input` must point to 16 readable bytes, `output` to 16 writable bytes.
#[no_mangle]
pub unsafe extern "C" fn cmt_aes128_encrypt_block(
    key: *const u8,
    input: *const u8,
    output: *mut u8,
) -> CmtStatus {
    guard(|| {
        let ks = KeySchedule::expand(&Key128::new(block_in(key, "key")?));
        let block = block_in(input, "input")?;
        require_out(output, "output")?;
        block_out(output, &ks.encrypt_block(&block));
        Ok(CmtStatus::Ok)
    })
}

/// Decrypts one 16-byte block under a 16-byte key.
///
/// # Safety
/// Same requirements as [`cmt_aes128_encrypt_block`].
#[no_mangle]
pub unsafe extern "C" fn cmt_aes128_decrypt_block(
    key: *const u8,
    input: *const u8,
    output: *mut u8,
) -> CmtStatus {
    guard(|| {
        let ks = KeySchedule::expand(&Key128::new(block_in(key, "key")?));
        let block = block_in(input, "input")?;
        require_out(output, "output")?;
        block_out(output, &ks.decrypt_block(&block));
        Ok(CmtStatus::Ok)
    })
}

/// Parses a 32-hex-digit master key.
///
/// # Safety
/// `hex` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cmt_master_key_from_hex(
    hex: *const c_char,
    out: *mut *mut CmtMasterKey,
) -> CmtStatus {
    guard(|| {
        require_out(out, "out")?;
        let key = MasterKey::from_hex(c_str(hex, "hex")?)?;
        *out = Box::into_raw(Box::new(CmtMasterKey(key)));
        Ok(CmtStatus::Ok)
    })
}

/// # Safety
/// `key` must be NULL or a handle from [`cmt_master_key_from_hex`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cmt_master_key_free(key: *mut CmtMasterKey) {
    if !key.is_null() {
        drop(Box::from_raw(key));
    }
}

/// Writes the tenant's derived encryption and MAC keys (16 bytes each).
///
/// # Safety
/// `master` must be a live handle, `tenant` a NUL-terminated string, and
/// `enc_key_out` / `mac_key_out` must each point to 16 writable bytes.
#[no_mangle]
pub unsafe extern "C" fn cmt_derive_tenant_keys(
    master: *const CmtMasterKey,
    tenant: *const c_char,
    enc_key_out: *mut u8,
    mac_key_out: *mut u8,
) -> CmtStatus {
    guard(|| {
        let master = master
            .as_ref()
            .ok_or_else(|| Error::invalid("master is NULL"))?;
        let tenant = TenantId::new(c_str(tenant, "tenant")?)?;
        require_out(enc_key_out, "enc_key_out")?;
        require_out(mac_key_out, "mac_key_out")?;
        let keys = derive_tenant_key(&master.0, &tenant);
        block_out(enc_key_out, keys.enc_key().as_bytes());
        block_out(mac_key_out, keys.mac_key().as_bytes());
        Ok(CmtStatus::Ok)
    })
}

/// Creates a new store file and opens it. The master key is copied.
///
/// # Safety
/// String arguments must be NUL-terminated; `fields` must hold `field_count`
/// strings; `master` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cmt_store_create(
    path: *const c_char,
    table: *const c_char,
    fields: *const *const c_char,
    field_count: usize,
    master: *const CmtMasterKey,
    out: *mut *mut CmtStore,
) -> CmtStatus {
    guard(|| {
        require_out(out, "out")?;
        let master = master
            .as_ref()
            .ok_or_else(|| Error::invalid("master is NULL"))?;
        let schema = TableSchema::new(
            c_str(table, "table")?,
            c_str_array(fields, field_count, "fields")?,
        )?;
        let store = Store::create(c_str(path, "path")?, &schema, master.0.clone())?;
        *out = Box::into_raw(Box::new(CmtStore(store)));
        Ok(CmtStatus::Ok)
    })
}

/// Opens an existing store, replaying its log. The master key is copied.
///
/// # Safety
/// `path` must be NUL-terminated, `master` a live handle, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn cmt_store_open(
    path: *const c_char,
    master: *const CmtMasterKey,
    out: *mut *mut CmtStore,
) -> CmtStatus {
    guard(|| {
        require_out(out, "out")?;
        let master = master
            .as_ref()
            .ok_or_else(|| Error::invalid("master is NULL"))?;
        let store = Store::open(c_str(path, "path")?, master.0.clone())?;
        *out = Box::into_raw(Box::new(CmtStore(store)));
        Ok(CmtStatus::Ok)
    })
}

/// Closes a store and releases its lock.
///
/// # Safety
/// `store` must be NULL or a live handle; it must not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn cmt_store_free(store: *mut CmtStore) {
    if !store.is_null() {
        drop(Box::from_raw(store));
    }
}

unsafe fn pairs<'a>(
    fields: *const *const c_char,
    values: *const *const c_char,
    count: usize,
) -> Result<Vec<(&'a str, &'a str)>, Error> {
    let names = c_str_array(fields, count, "fields")?;
    let vals = c_str_array(values, count, "values")?;
    Ok(names.into_iter().zip(vals).collect())
}

/// Encrypts and appends a row; writes its id to `row_out`.
///
/// # Safety
/// `store` must be a live handle; `fields` and `values` must each hold
/// `count` NUL-terminated strings; `row_out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cmt_store_insert(
    store: *mut CmtStore,
    tenant: *const c_char,
    fields: *const *const c_char,
    values: *const *const c_char,
    count: usize,
    row_out: *mut u64,
) -> CmtStatus {
    guard(|| {
        let store = store
            .as_mut()
            .ok_or_else(|| Error::invalid("store is NULL"))?;
        require_out(row_out, "row_out")?;
        let tenant = TenantId::new(c_str(tenant, "tenant")?)?;
        let row = store.0.insert(&tenant, &pairs(fields, values, count)?)?;
        *row_out = row.0;
        Ok(CmtStatus::Ok)
    })
}

fn render(store: &Store, records: &[Record]) -> Result<*mut c_char, Error> {
    let mut buf = Vec::new();
    write_records(&mut buf, Format::Lines, store.schema(), records)
        .map_err(|e| Error::invalid(e.to_string()))?;
    into_c_string(String::from_utf8(buf).map_err(|e| Error::invalid(e.to_string()))?)
}

/// Decrypts one row into `row=<id>` / `field=value` lines.
///
/// # Safety
/// `store` must be a live handle, `tenant` NUL-terminated, `out` writable.
/// Free the result with [`cmt_string_free`].
#[no_mangle]
pub unsafe extern "C" fn cmt_store_get(
    store: *const CmtStore,
    tenant: *const c_char,
    row: u64,
    out: *mut *mut c_char,
) -> CmtStatus {
    guard(|| {
        let store = store
            .as_ref()
            .ok_or_else(|| Error::invalid("store is NULL"))?;
        require_out(out, "out")?;
        let tenant = TenantId::new(c_str(tenant, "tenant")?)?;
        let record = store.0.get(&tenant, RowId(row))?;
        *out = render(&store.0, &[record])?;
        Ok(CmtStatus::Ok)
    })
}

/// Decrypts all of the tenant's rows, ascending by id, in the same line format
/// as [`cmt_store_get`].
///
/// # Safety
/// Same requirements as [`cmt_store_get`].
#[no_mangle]
pub unsafe extern "C" fn cmt_store_list(
    store: *const CmtStore,
    tenant: *const c_char,
    out: *mut *mut c_char,
) -> CmtStatus {
    guard(|| {
        let store = store
            .as_ref()
            .ok_or_else(|| Error::invalid("store is NULL"))?;
        require_out(out, "out")?;
        let tenant = TenantId::new(c_str(tenant, "tenant")?)?;
        let records = store.0.list(&tenant)?;
        *out = render(&store.0, &records)?;
        Ok(CmtStatus::Ok)
    })
}

/// Replaces every field of an owned row.
///
/// # Safety
/// Same requirements as [`cmt_store_insert`], without `row_out`.
#[no_mangle]
pub unsafe extern "C" fn cmt_store_update(
    store: *mut CmtStore,
    tenant: *const c_char,
    row: u64,
    fields: *const *const c_char,
    values: *const *const c_char,
    count: usize,
) -> CmtStatus {
    guard(|| {
        let store = store
            .as_mut()
            .ok_or_else(|| Error::invalid("store is NULL"))?;
        let tenant = TenantId::new(c_str(tenant, "tenant")?)?;
        store
            .0
            .update(&tenant, RowId(row), &pairs(fields, values, count)?)?;
        Ok(CmtStatus::Ok)
    })
}

/// # Safety
/// `store` must be a live handle and `tenant` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn cmt_store_delete(
    store: *mut CmtStore,
    tenant: *const c_char,
    row: u64,
) -> CmtStatus {
    guard(|| {
        let store = store
            .as_mut()
            .ok_or_else(|| Error::invalid("store is NULL"))?;
        let tenant = TenantId::new(c_str(tenant, "tenant")?)?;
        store.0.delete(&tenant, RowId(row))?;
        Ok(CmtStatus::Ok)
    })
}

/// Runs the self-test suite. `throughput_bytes` of 0 skips the throughput
/// check. When `report_out` is non-NULL it receives the printed report.
///
/// # Safety
/// `report_out` must be NULL or writable.
#[no_mangle]
pub unsafe extern "C" fn cmt_selftest(
    throughput_bytes: usize,
    report_out: *mut *mut c_char,
) -> CmtStatus {
    guard(|| {
        let report = selftest::run(&selftest::Options { throughput_bytes });
        if !report_out.is_null() {
            *report_out = into_c_string(report.to_string())?;
        }
        if report.passed() {
            Ok(CmtStatus::Ok)
        } else {
            set_last_error("self-test failed");
            Ok(CmtStatus::SelftestFailed)
        }
    })
}
