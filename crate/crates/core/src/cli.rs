//! The `cmt` command-line tool.
//!
//! Exit codes: 0 ok, 1 self-test failure, 2 usage or schema error, 3 key or
//! store access error, 4 row not found, 5 row owned by another tenant,
//! 6 authentication failure.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};

use crate::keys::{load_master_key, KeyError, KeySource, TenantId};
use crate::selftest;
use crate::store::{Record, RowId, Store, StoreError, TableSchema};

pub mod exit {
    pub const OK: i32 = 0;
    pub const SELFTEST_FAILED: i32 = 1;
    pub const USAGE: i32 = 2;
    pub const ACCESS: i32 = 3;
    pub const NOT_FOUND: i32 = 4;
    pub const ISOLATION_DENIED: i32 = 5;
    pub const AUTH: i32 = 6;
}

pub const DEFAULT_STORE: &str = "./studententry.cmt";

#[derive(Debug, Parser)]
#[command(name = "cmt", version, about = "Encrypted multi-tenant record store")]
pub struct Cli {
    /// Store file.
    #[arg(long, global = true, default_value = DEFAULT_STORE)]
    pub store: PathBuf,

    /// File holding the 32-hex-digit master key; overrides CMT_MASTER_KEY.
    #[arg(long, global = true)]
    pub master_key_file: Option<PathBuf>,

    /// Tenant performing the operation.
    #[arg(long, global = true)]
    pub tenant: Option<String>,

    /// Output format for get/list.
    #[arg(long, global = true, value_enum, default_value_t = Format::Lines)]
    pub format: Format,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    /// `key=value` lines, one block per row.
    Lines,
    /// Aligned human-readable table.
    Table,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Create a new store with the given table schema.
    Init {
        #[arg(long, default_value = "student_entry")]
        table: String,
        #[arg(long, value_delimiter = ',', default_value = "name,contact,department")]
        fields: Vec<String>,
    },
    /// Encrypt and append a row; prints the new row id.
    Insert {
        #[arg(long = "set", value_name = "FIELD=VALUE", value_parser = parse_assignment)]
        set: Vec<(String, String)>,
    },
    /// Decrypt and print one row.
    Get {
        #[arg(long)]
        row: u64,
    },
    /// Decrypt and print all of the tenant's rows.
    List,
    /// Replace every field of a row.
    Update {
        #[arg(long)]
        row: u64,
        #[arg(long = "set", value_name = "FIELD=VALUE", value_parser = parse_assignment)]
        set: Vec<(String, String)>,
    },
    /// Delete a row.
    Delete {
        #[arg(long)]
        row: u64,
    },
    /// Run the cipher known-answer and round-trip checks.
    Selftest,
}

fn parse_assignment(s: &str) -> Result<(String, String), String> {
    s.split_once('=')
        .map(|(k, v)| (k.to_owned(), v.to_owned()))
        .ok_or_else(|| format!("expected FIELD=VALUE, got {s:?}"))
}

/// A failed command: the message for the error stream and the exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl From<StoreError> for Failure {
    fn from(e: StoreError) -> Self {
        let code = match &e {
            StoreError::AlreadyExists(_)
            | StoreError::InvalidSchema(_)
            | StoreError::SchemaMismatch(_)
            | StoreError::FieldTooLarge { .. } => exit::USAGE,
            StoreError::CorruptHeader(_)
            | StoreError::VersionMismatch { .. }
            | StoreError::CorruptEntry { .. }
            | StoreError::Locked(_)
            | StoreError::Io(_) => exit::ACCESS,
            StoreError::NotFound(_) => exit::NOT_FOUND,
            StoreError::IsolationDenied(_) => exit::ISOLATION_DENIED,
            StoreError::Auth(_) | StoreError::Codec { .. } => exit::AUTH,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

impl From<KeyError> for Failure {
    fn from(e: KeyError) -> Self {
        let code = match e {
            KeyError::InvalidTenantId(_) => exit::USAGE,
            KeyError::MissingKey(_) | KeyError::MalformedKey => exit::ACCESS,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

/// Parses `args` and runs the command. `env_key` stands in for the
/// `CMT_MASTER_KEY` environment variable.
pub fn run_args<I, T>(
    args: I,
    env_key: Option<String>,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() {
                exit::USAGE
            } else {
                exit::OK
            };
            let rendered = e.render().to_string();
            let _ = if e.use_stderr() {
                err.write_all(rendered.as_bytes())
            } else {
                out.write_all(rendered.as_bytes())
            };
            return code;
        }
    };
    run(&cli, env_key, out, err)
}

pub fn run(cli: &Cli, env_key: Option<String>, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    match execute(cli, env_key, out) {
        Ok(code) => code,
        Err(failure) => {
            let _ = writeln!(err, "cmt: {}", failure.message);
            failure.code
        }
    }
}

fn io_failure(e: std::io::Error) -> Failure {
    Failure {
        code: exit::ACCESS,
        message: format!("write failed: {e}"),
    }
}

fn execute(cli: &Cli, env_key: Option<String>, out: &mut dyn Write) -> Result<i32, Failure> {
    match &cli.command {
        Command::Selftest => {
            let report = selftest::run(&selftest::Options::default());
            write!(out, "{report}").map_err(io_failure)?;
            return Ok(if report.passed() {
                exit::OK
            } else {
                exit::SELFTEST_FAILED
            });
        }
        Command::Init { table, fields } => {
            let schema = TableSchema::new(table.clone(), fields.iter().cloned())?;
            Store::init_file(&cli.store, &schema)?;
            writeln!(
                out,
                "created {} table={} fields={}",
                cli.store.display(),
                schema.table(),
                schema.fields().join(",")
            )
            .map_err(io_failure)?;
            return Ok(exit::OK);
        }
        _ => {}
    }

    let tenant = match &cli.tenant {
        Some(t) => TenantId::new(t.clone())?,
        None => {
            return Err(Failure {
                code: exit::USAGE,
                message: "--tenant is required for this command".into(),
            })
        }
    };
    let source = KeySource {
        file: cli.master_key_file.clone(),
        env_value: env_key,
    };
    let master = load_master_key(&source)?;
    let mut store = Store::open(&cli.store, master)?;

    match &cli.command {
        Command::Insert { set } => {
            let id = store.insert(&tenant, set)?;
            writeln!(out, "{id}").map_err(io_failure)?;
        }
        Command::Get { row } => {
            let record = store.get(&tenant, RowId(*row))?;
            write_records(out, cli.format, store.schema(), &[record]).map_err(io_failure)?;
        }
        Command::List => {
            let records = store.list(&tenant)?;
            write_records(out, cli.format, store.schema(), &records).map_err(io_failure)?;
        }
        Command::Update { row, set } => store.update(&tenant, RowId(*row), set)?,
        Command::Delete { row } => store.delete(&tenant, RowId(*row))?,
        Command::Init { .. } | Command::Selftest => unreachable!("handled above"),
    }
    Ok(exit::OK)
}

pub fn write_records(
    out: &mut dyn Write,
    format: Format,
    schema: &TableSchema,
    records: &[Record],
) -> std::io::Result<()> {
    match format {
        Format::Lines => {
            for record in records {
                writeln!(out, "row={}", record.row_id)?;
                for (name, value) in &record.fields {
                    writeln!(out, "{name}={value}")?;
                }
            }
        }
        Format::Table => {
            let mut header = vec!["row".to_owned()];
            header.extend(schema.fields().iter().cloned());
            let rows: Vec<Vec<String>> = records
                .iter()
                .map(|r| {
                    let mut cells = vec![r.row_id.to_string()];
                    cells.extend(r.fields.iter().map(|(_, v)| v.clone()));
                    cells
                })
                .collect();
            let widths: Vec<usize> = (0..header.len())
                .map(|i| {
                    rows.iter()
                        .map(|r| r[i].chars().count())
                        .chain(std::iter::once(header[i].len()))
                        .max()
                        .unwrap_or(0)
                })
                .collect();
            for cells in std::iter::once(&header).chain(rows.iter()) {
                let line: Vec<String> = cells
                    .iter()
                    .zip(&widths)
                    .map(|(c, w)| format!("{c:<w$}"))
                    .collect();
                writeln!(out, "{}", line.join(" | ").trim_end())?;
            }
        }
    }
    Ok(())
}
