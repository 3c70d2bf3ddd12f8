//! Drives the `cmt` binary as a separate process.

use std::path::Path;
use std::process::{Command, Output};

const CMT: &str = env!("CARGO_BIN_EXE_cmt");
const KEY: &str = "000102030405060708090a0b0c0d0e0f";

fn run(dir: &Path, args: &[&str], key: Option<&str>) -> Output {
    let mut cmd = Command::new(CMT);
    cmd.current_dir(dir).args(args).env_remove("CMT_MASTER_KEY");
    if let Some(k) = key {
        cmd.env("CMT_MASTER_KEY", k);
    }
    cmd.output().expect("spawn cmt")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn default_store_name_and_student_entry_schema() {
    let dir = tempfile::tempdir().unwrap();
    let init = run(dir.path(), &["init"], None);
    assert!(init.status.success());
    assert!(dir.path().join("studententry.cmt").exists());
    assert!(stdout(&init).contains("fields=name,contact,department"));

    let ins = run(
        dir.path(),
        &[
            "insert",
            "--tenant",
            "uni_a",
            "--set",
            "name=N",
            "--set",
            "contact=C",
            "--set",
            "department=D",
        ],
        Some(KEY),
    );
    assert_eq!(stdout(&ins), "1\n");
    let get = run(
        dir.path(),
        &["get", "--tenant", "uni_a", "--row", "1"],
        Some(KEY),
    );
    assert_eq!(stdout(&get), "row=1\nname=N\ncontact=C\ndepartment=D\n");
    assert!(get.stderr.is_empty());
}

#[test]
fn exit_code_contract() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(run(d, &["init"], None).status.code(), Some(0));
    assert_eq!(run(d, &["init"], None).status.code(), Some(2));
    assert_eq!(
        run(d, &["init", "--store", "x.cmt", "--fields", "a,a"], None)
            .status
            .code(),
        Some(2)
    );

    let full = [
        "insert",
        "--tenant",
        "uni_a",
        "--set",
        "name=N",
        "--set",
        "contact=C",
        "--set",
        "department=D",
    ];
    assert_eq!(run(d, &full, None).status.code(), Some(3));
    assert_eq!(run(d, &full[..7], Some(KEY)).status.code(), Some(2));
    assert_eq!(run(d, &full, Some(KEY)).status.code(), Some(0));

    let get = |tenant: &str, row: &str, key: &str| {
        run(d, &["get", "--tenant", tenant, "--row", row], Some(key))
    };
    let other = get("uni_b", "1", KEY);
    assert_eq!(other.status.code(), Some(5));
    assert!(other.stdout.is_empty());
    assert!(!other.stderr.is_empty());
    assert_eq!(get("uni_a", "42", KEY).status.code(), Some(4));
    assert_eq!(
        get("uni_a", "1", "ffffffffffffffffffffffffffffffff")
            .status
            .code(),
        Some(6)
    );
}

#[test]
fn selftest_runs_without_key_or_store() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["selftest"], None);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    for check in [
        "sbox-bijective",
        "sbox-reference",
        "aes128-cipher-example",
        "aes128-example-vector",
        "codec-round-trip",
        "throughput",
    ] {
        assert!(
            text.lines()
                .any(|l| l.starts_with("PASS ") && l.contains(check)),
            "{check}\n{text}"
        );
    }
    assert!(!text.contains("FAIL"));
    assert!(!dir.path().join("studententry.cmt").exists());
}

#[test]
fn values_survive_restart_byte_for_byte() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    run(d, &["init", "--fields", "name,note"], None);
    let tricky = "note=ünïcødé = with equals, tabs\tand trailing space ";
    let ins = run(
        d,
        &[
            "insert", "--tenant", "t1", "--set", "name=", "--set", tricky,
        ],
        Some(KEY),
    );
    assert_eq!(
        ins.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&ins.stderr)
    );
    let get = run(d, &["get", "--tenant", "t1", "--row", "1"], Some(KEY));
    assert_eq!(stdout(&get), format!("row=1\nname=\n{tricky}\n"));
}
