use std::ffi::{c_char, CStr, CString};
use std::ptr;

use cmt_ffi::*;

fn cs(s: &str) -> CString {
    CString::new(s).unwrap()
}

unsafe fn take_string(p: *mut c_char) -> String {
    assert!(!p.is_null());
    let s = CStr::from_ptr(p).to_str().unwrap().to_owned();
    cmt_string_free(p);
    s
}

unsafe fn last_error() -> String {
    let p = cmt_last_error_message();
    assert!(!p.is_null());
    CStr::from_ptr(p).to_string_lossy().into_owned()
}

fn hex16(s: &str) -> [u8; 16] {
    let mut out = [0u8; 16];
    for (i, b) in out.iter_mut().enumerate() {
        *b = u8::from_str_radix(&s[2 * i..2 * i + 2], 16).unwrap();
    }
    out
}

#[test]
fn block_cipher_known_answer() {
    let key = hex16("000102030405060708090a0b0c0d0e0f");
    let pt = hex16("00112233445566778899aabbccddeeff");
    let mut ct = [0u8; 16];
    let mut back = [0u8; 16];
    unsafe {
        assert_eq!(
            cmt_aes128_encrypt_block(key.as_ptr(), pt.as_ptr(), ct.as_mut_ptr()),
            CmtStatus::Ok
        );
        assert_eq!(
            cmt_aes128_decrypt_block(key.as_ptr(), ct.as_ptr(), back.as_mut_ptr()),
            CmtStatus::Ok
        );
        assert_eq!(
            cmt_aes128_encrypt_block(ptr::null(), pt.as_ptr(), ct.as_mut_ptr()),
            CmtStatus::InvalidArgument
        );
        assert!(last_error().contains("key"));
    }
    assert_eq!(ct, hex16("69c4e0d86a7b0430d8cdb78070b4c55a"));
    assert_eq!(back, pt);
}

#[test]
fn master_key_and_derivation() {
    unsafe {
        let mut bad = ptr::null_mut();
        assert_eq!(
            cmt_master_key_from_hex(cs("xyz").as_ptr(), &mut bad),
            CmtStatus::AccessError
        );
        assert!(bad.is_null());

        let mut master = ptr::null_mut();
        let hex = cs("000102030405060708090a0b0c0d0e0f");
        assert_eq!(
            cmt_master_key_from_hex(hex.as_ptr(), &mut master),
            CmtStatus::Ok
        );
        let (mut enc, mut mac) = ([0u8; 16], [0u8; 16]);
        let alpha = cs("alpha");
        assert_eq!(
            cmt_derive_tenant_keys(master, alpha.as_ptr(), enc.as_mut_ptr(), mac.as_mut_ptr()),
            CmtStatus::Ok
        );
        assert_eq!(enc, hex16("2b666a63ed610b9690c68782c992ae9b"));
        assert_eq!(mac, hex16("d2a90a98eee3a59a2fd649a0478a994b"));
        let bad_tenant = cs("Not Valid");
        assert_eq!(
            cmt_derive_tenant_keys(
                master,
                bad_tenant.as_ptr(),
                enc.as_mut_ptr(),
                mac.as_mut_ptr()
            ),
            CmtStatus::InvalidArgument
        );
        cmt_master_key_free(master);
        cmt_master_key_free(ptr::null_mut());
    }
}

#[test]
fn store_lifecycle_and_status_codes() {
    let dir = tempfile::tempdir().unwrap();
    let path = cs(dir.path().join("ffi.cmt").to_str().unwrap());
    let table = cs("student_entry");
    let names = [cs("name"), cs("contact"), cs("department")];
    let name_ptrs: Vec<*const c_char> = names.iter().map(|s| s.as_ptr()).collect();
    let values = [cs("N"), cs("C"), cs("D")];
    let value_ptrs: Vec<*const c_char> = values.iter().map(|s| s.as_ptr()).collect();
    let (uni_a, uni_b) = (cs("uni_a"), cs("uni_b"));

    unsafe {
        let mut master = ptr::null_mut();
        cmt_master_key_from_hex(cs("000102030405060708090a0b0c0d0e0f").as_ptr(), &mut master);

        let mut store = ptr::null_mut();
        assert_eq!(
            cmt_store_create(
                path.as_ptr(),
                table.as_ptr(),
                name_ptrs.as_ptr(),
                3,
                master,
                &mut store
            ),
            CmtStatus::Ok
        );
        let mut row = 0u64;
        assert_eq!(
            cmt_store_insert(
                store,
                uni_a.as_ptr(),
                name_ptrs.as_ptr(),
                value_ptrs.as_ptr(),
                3,
                &mut row
            ),
            CmtStatus::Ok
        );
        assert_eq!(row, 1);
        assert_eq!(
            cmt_store_insert(
                store,
                uni_a.as_ptr(),
                name_ptrs.as_ptr(),
                value_ptrs.as_ptr(),
                2,
                &mut row
            ),
            CmtStatus::InvalidArgument
        );

        let mut out = ptr::null_mut();
        assert_eq!(
            cmt_store_get(store, uni_a.as_ptr(), 1, &mut out),
            CmtStatus::Ok
        );
        assert_eq!(take_string(out), "row=1\nname=N\ncontact=C\ndepartment=D\n");
        assert_eq!(
            cmt_store_get(store, uni_b.as_ptr(), 1, &mut out),
            CmtStatus::IsolationDenied
        );
        assert_eq!(
            cmt_store_get(store, uni_a.as_ptr(), 9, &mut out),
            CmtStatus::NotFound
        );
        assert_eq!(
            cmt_store_list(store, uni_b.as_ptr(), &mut out),
            CmtStatus::Ok
        );
        assert_eq!(take_string(out), "");

        let new_values = [cs("N2"), cs("C2"), cs("D2")];
        let new_ptrs: Vec<*const c_char> = new_values.iter().map(|s| s.as_ptr()).collect();
        assert_eq!(
            cmt_store_update(
                store,
                uni_b.as_ptr(),
                1,
                name_ptrs.as_ptr(),
                new_ptrs.as_ptr(),
                3
            ),
            CmtStatus::IsolationDenied
        );
        assert_eq!(
            cmt_store_update(
                store,
                uni_a.as_ptr(),
                1,
                name_ptrs.as_ptr(),
                new_ptrs.as_ptr(),
                3
            ),
            CmtStatus::Ok
        );

        // A second handle on the same file is refused while the first is open.
        let mut second = ptr::null_mut();
        assert_eq!(
            cmt_store_open(path.as_ptr(), master, &mut second),
            CmtStatus::AccessError
        );
        cmt_store_free(store);

        assert_eq!(
            cmt_store_open(path.as_ptr(), master, &mut store),
            CmtStatus::Ok
        );
        assert_eq!(
            cmt_store_list(store, uni_a.as_ptr(), &mut out),
            CmtStatus::Ok
        );
        assert_eq!(
            take_string(out),
            "row=1\nname=N2\ncontact=C2\ndepartment=D2\n"
        );
        assert_eq!(
            cmt_store_delete(store, uni_b.as_ptr(), 1),
            CmtStatus::IsolationDenied
        );
        assert_eq!(cmt_store_delete(store, uni_a.as_ptr(), 1), CmtStatus::Ok);
        assert_eq!(
            cmt_store_delete(store, uni_a.as_ptr(), 1),
            CmtStatus::NotFound
        );
        cmt_store_free(store);

        let mut again = ptr::null_mut();
        assert_eq!(
            cmt_store_create(
                path.as_ptr(),
                table.as_ptr(),
                name_ptrs.as_ptr(),
                3,
                master,
                &mut again
            ),
            CmtStatus::InvalidArgument
        );
        cmt_master_key_free(master);
    }
}

#[test]
fn wrong_master_key_reports_auth_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = cs(dir.path().join("auth.cmt").to_str().unwrap());
    let names = [cs("f")];
    let name_ptrs: Vec<*const c_char> = names.iter().map(|s| s.as_ptr()).collect();
    let vals = [cs("secret")];
    let val_ptrs: Vec<*const c_char> = vals.iter().map(|s| s.as_ptr()).collect();
    let t = cs("t");
    unsafe {
        let (mut m1, mut m2) = (ptr::null_mut(), ptr::null_mut());
        cmt_master_key_from_hex(cs("000102030405060708090a0b0c0d0e0f").as_ptr(), &mut m1);
        cmt_master_key_from_hex(cs("ffffffffffffffffffffffffffffffff").as_ptr(), &mut m2);
        let mut store = ptr::null_mut();
        cmt_store_create(
            path.as_ptr(),
            cs("t").as_ptr(),
            name_ptrs.as_ptr(),
            1,
            m1,
            &mut store,
        );
        let mut row = 0;
        cmt_store_insert(
            store,
            t.as_ptr(),
            name_ptrs.as_ptr(),
            val_ptrs.as_ptr(),
            1,
            &mut row,
        );
        cmt_store_free(store);

        assert_eq!(cmt_store_open(path.as_ptr(), m2, &mut store), CmtStatus::Ok);
        let mut out = ptr::null_mut();
        assert_eq!(
            cmt_store_get(store, t.as_ptr(), row, &mut out),
            CmtStatus::AuthError
        );
        assert!(out.is_null());
        cmt_store_free(store);
        cmt_master_key_free(m1);
        cmt_master_key_free(m2);
    }
}

#[test]
fn selftest_report() {
    unsafe {
        let mut report = ptr::null_mut();
        assert_eq!(cmt_selftest(0, &mut report), CmtStatus::Ok);
        let text = take_string(report);
        assert!(text.contains("PASS aes128-example-vector"));
        assert!(!text.contains("throughput"));
        assert_eq!(cmt_selftest(0, ptr::null_mut()), CmtStatus::Ok);
    }
}

#[test]
fn header_declares_every_export() {
    let header = include_str!("../include/cmt.h");
    for name in [
        "cmt_last_error_message",
        "cmt_string_free",
        "cmt_aes128_encrypt_block",
        "cmt_aes128_decrypt_block",
        "cmt_master_key_from_hex",
        "cmt_master_key_free",
        "cmt_derive_tenant_keys",
        "cmt_store_create",
        "cmt_store_open",
        "cmt_store_free",
        "cmt_store_insert",
        "cmt_store_get",
        "cmt_store_list",
        "cmt_store_update",
        "cmt_store_delete",
        "cmt_selftest",
        "CMT_STATUS_ISOLATION_DENIED = 5",
        "typedef struct CmtStore CmtStore",
    ] {
        assert!(header.contains(name), "{name} missing from cmt.h");
    }
}
