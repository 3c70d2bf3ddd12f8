//! Encrypted multi-tenant record storage built on a from-scratch AES-128.
//!
//! * [`aes`]: the block cipher.
//! * [`keys`]: master key loading and AES-only per-tenant key derivation.
//! * [`codec`]: CBC + CBC-MAC field encryption.
//! * [`store`]: the shared-table, append-only record store.
//! * [`selftest`] and [`cli`]: the `cmt` tool.

pub mod aes;
pub mod cli;
pub mod codec;
pub mod keys;
pub mod selftest;
pub mod store;

pub use aes::{Block128, Key128, KeySchedule, SBox, State};
pub use codec::{CipherValue, CodecError};
pub use keys::{KeyError, KeySource, MasterKey, TenantId, TenantKeySet};
pub use store::{Record, RowId, Store, StoreError, TableSchema};
