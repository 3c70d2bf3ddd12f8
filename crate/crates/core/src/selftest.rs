//! Known-answer and structural checks over the cipher and the codec, plus a
//! rough single-threaded throughput measurement.

use std::fmt;
use std::time::Instant;

use rand::rngs::StdRng;
use rand::{Rng, RngCore, SeedableRng};

use crate::aes::{Block128, Key128, KeySchedule, SBox};
use crate::codec;
use crate::keys::{MasterKey, TenantId, TenantKeySet};

/// Bytes encrypted by the throughput check.
pub const THROUGHPUT_BYTES: usize = 16 * 1024 * 1024;

/// Minimum accepted throughput in MB/s (10^6 bytes per second).
pub const MIN_THROUGHPUT_MBPS: f64 = 1.0;

const KAT_VECTORS: [(&str, &str, &str, &str); 2] = [
    (
        "aes128-cipher-example",
        "2b7e151628aed2a6abf7158809cf4f3c",
        "3243f6a8885a308d313198a2e0370734",
        "3925841d02dc09fbdc118597196a0b32",
    ),
    (
        "aes128-example-vector",
        "000102030405060708090a0b0c0d0e0f",
        "00112233445566778899aabbccddeeff",
        "69c4e0d86a7b0430d8cdb78070b4c55a",
    ),
];

/// The published AES S-box, kept independent of the generated one.
#[rustfmt::skip]
pub const REFERENCE_SBOX: [u8; 256] = [
    0x63, 0x7c, 0x77, 0x7b, 0xf2, 0x6b, 0x6f, 0xc5, 0x30, 0x01, 0x67, 0x2b, 0xfe, 0xd7, 0xab, 0x76,
    0xca, 0x82, 0xc9, 0x7d, 0xfa, 0x59, 0x47, 0xf0, 0xad, 0xd4, 0xa2, 0xaf, 0x9c, 0xa4, 0x72, 0xc0,
    0xb7, 0xfd, 0x93, 0x26, 0x36, 0x3f, 0xf7, 0xcc, 0x34, 0xa5, 0xe5, 0xf1, 0x71, 0xd8, 0x31, 0x15,
    0x04, 0xc7, 0x23, 0xc3, 0x18, 0x96, 0x05, 0x9a, 0x07, 0x12, 0x80, 0xe2, 0xeb, 0x27, 0xb2, 0x75,
    0x09, 0x83, 0x2c, 0x1a, 0x1b, 0x6e, 0x5a, 0xa0, 0x52, 0x3b, 0xd6, 0xb3, 0x29, 0xe3, 0x2f, 0x84,
    0x53, 0xd1, 0x00, 0xed, 0x20, 0xfc, 0xb1, 0x5b, 0x6a, 0xcb, 0xbe, 0x39, 0x4a, 0x4c, 0x58, 0xcf,
    0xd0, 0xef, 0xaa, 0xfb, 0x43, 0x4d, 0x33, 0x85, 0x45, 0xf9, 0x02, 0x7f, 0x50, 0x3c, 0x9f, 0xa8,
    0x51, 0xa3, 0x40, 0x8f, 0x92, 0x9d, 0x38, 0xf5, 0xbc, 0xb6, 0xda, 0x21, 0x10, 0xff, 0xf3, 0xd2,
    0xcd, 0x0c, 0x13, 0xec, 0x5f, 0x97, 0x44, 0x17, 0xc4, 0xa7, 0x7e, 0x3d, 0x64, 0x5d, 0x19, 0x73,
    0x60, 0x81, 0x4f, 0xdc, 0x22, 0x2a, 0x90, 0x88, 0x46, 0xee, 0xb8, 0x14, 0xde, 0x5e, 0x0b, 0xdb,
    0xe0, 0x32, 0x3a, 0x0a, 0x49, 0x06, 0x24, 0x5c, 0xc2, 0xd3, 0xac, 0x62, 0x91, 0x95, 0xe4, 0x79,
    0xe7, 0xc8, 0x37, 0x6d, 0x8d, 0xd5, 0x4e, 0xa9, 0x6c, 0x56, 0xf4, 0xea, 0x65, 0x7a, 0xae, 0x08,
    0xba, 0x78, 0x25, 0x2e, 0x1c, 0xa6, 0xb4, 0xc6, 0xe8, 0xdd, 0x74, 0x1f, 0x4b, 0xbd, 0x8b, 0x8a,
    0x70, 0x3e, 0xb5, 0x66, 0x48, 0x03, 0xf6, 0x0e, 0x61, 0x35, 0x57, 0xb9, 0x86, 0xc1, 0x1d, 0x9e,
    0xe1, 0xf8, 0x98, 0x11, 0x69, 0xd9, 0x8e, 0x94, 0x9b, 0x1e, 0x87, 0xe9, 0xce, 0x55, 0x28, 0xdf,
    0x8c, 0xa1, 0x89, 0x0d, 0xbf, 0xe6, 0x42, 0x68, 0x41, 0x99, 0x2d, 0x0f, 0xb0, 0x54, 0xbb, 0x16,
];

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Report {
    pub checks: Vec<Check>,
    /// Measured encryption throughput in MB/s, if the check ran.
    pub throughput_mbps: Option<f64>,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    fn record(&mut self, name: &'static str, passed: bool, detail: impl Into<String>) {
        self.checks.push(Check {
            name,
            passed,
            detail: detail.into(),
        });
    }
}

impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            let status = if c.passed { "PASS" } else { "FAIL" };
            if c.detail.is_empty() {
                writeln!(f, "{status} {}", c.name)?;
            } else {
                writeln!(f, "{status} {} ({})", c.name, c.detail)?;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Options {
    pub throughput_bytes: usize,
}

impl Default for Options {
    fn default() -> Self {
        Options {
            throughput_bytes: THROUGHPUT_BYTES,
        }
    }
}

fn hex16(s: &str) -> Block128 {
    let mut out = [0u8; 16];
    hex::decode_to_slice(s, &mut out).expect("constant hex vector");
    out
}

/// Runs the full suite against the standard S-box.
pub fn run(options: &Options) -> Report {
    run_with_sbox(SBox::standard(), options)
}

/// Runs the suite with the given substitution table driving the cipher.
pub fn run_with_sbox(sbox: &'static SBox, options: &Options) -> Report {
    let mut report = Report::default();

    report.record(
        "sbox-bijective",
        sbox.is_consistent(),
        "256-entry permutation, inverse composes to identity",
    );
    let mismatches = (0..256)
        .filter(|&i| sbox.forward_table()[i] != REFERENCE_SBOX[i])
        .count();
    report.record(
        "sbox-reference",
        mismatches == 0,
        format!("{mismatches} entries differ from the reference table"),
    );

    for (name, key, pt, ct) in KAT_VECTORS {
        let ks = KeySchedule::expand_with(&Key128::new(hex16(key)), sbox);
        let got = ks.encrypt_block(&hex16(pt));
        let back = ks.decrypt_block(&hex16(ct));
        let ok = got == hex16(ct) && back == hex16(pt);
        report.record(name, ok, format!("got {}", hex::encode(got)));
    }

    let ks = KeySchedule::expand_with(&Key128::new(hex16(KAT_VECTORS[0].1)), sbox);
    let w4 = ks.word(4);
    report.record(
        "key-expansion",
        w4 == 0xa0fafe17,
        format!("w[4] = {w4:08x}"),
    );

    report.record(
        "block-round-trip",
        block_round_trip(sbox, 1000),
        "1000 random key/block pairs",
    );

    let (codec_ok, codec_detail) = codec_round_trip();
    report.record("codec-round-trip", codec_ok, codec_detail);

    if options.throughput_bytes > 0 {
        let mbps = throughput(sbox, options.throughput_bytes);
        report.throughput_mbps = Some(mbps);
        report.record(
            "throughput",
            mbps >= MIN_THROUGHPUT_MBPS,
            format!(
                "{mbps:.1} MB/s over {} MiB, minimum {MIN_THROUGHPUT_MBPS} MB/s",
                options.throughput_bytes / (1024 * 1024)
            ),
        );
    }
    report
}

fn block_round_trip(sbox: &'static SBox, trials: usize) -> bool {
    let mut rng = StdRng::seed_from_u64(0x5e1f);
    (0..trials).all(|_| {
        let ks = KeySchedule::expand_with(&Key128::new(rng.gen()), sbox);
        let block: Block128 = rng.gen();
        ks.decrypt_block(&ks.encrypt_block(&block)) == block
    })
}

fn codec_round_trip() -> (bool, String) {
    let master = MasterKey::new(Key128::new(hex16(KAT_VECTORS[1].1)));
    let keys = TenantKeySet::derive(&master, &TenantId::new("selftest").expect("valid id"));
    let other = TenantKeySet::derive(&master, &TenantId::new("selftest_other").expect("valid id"));
    let mut rng = StdRng::seed_from_u64(0xc0dec);
    for len in 0..=64usize {
        let mut plain = vec![0u8; len];
        rng.fill_bytes(&mut plain);
        let value = match codec::encrypt_value(&plain, &keys, &mut rng) {
            Ok(v) => v,
            Err(e) => return (false, format!("encrypt failed at length {len}: {e}")),
        };
        if value.serialized_len() != 32 + 16 * (len / 16 + 1) {
            return (false, format!("wrong serialized length at {len}"));
        }
        if codec::decrypt_value(&value, &keys).as_deref() != Ok(&plain[..]) {
            return (false, format!("round trip failed at length {len}"));
        }
        if codec::decrypt_value(&value, &other) != Err(codec::CodecError::Auth) {
            return (false, format!("wrong key accepted at length {len}"));
        }
    }
    (true, "lengths 0..=64, wrong key rejected".into())
}

/// Encrypts `bytes` of random data block by block and returns MB/s.
pub fn throughput(sbox: &'static SBox, bytes: usize) -> f64 {
    let mut rng = StdRng::seed_from_u64(0xbeef);
    let mut buf = vec![0u8; bytes - bytes % 16];
    rng.fill_bytes(&mut buf);
    let ks = KeySchedule::expand_with(&Key128::new(rng.gen()), sbox);
    let start = Instant::now();
    let mut sink = 0u8;
    for chunk in buf.chunks_exact_mut(16) {
        let block: Block128 = (&*chunk).try_into().unwrap();
        let out = ks.encrypt_block(&block);
        chunk.copy_from_slice(&out);
        sink ^= out[0];
    }
    let secs = start.elapsed().as_secs_f64().max(1e-9);
    std::hint::black_box(sink);
    buf.len() as f64 / 1e6 / secs
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick() -> Options {
        Options {
            throughput_bytes: 0,
        }
    }

    #[test]
    fn standard_build_passes() {
        let report = run(&quick());
        assert!(report.passed(), "{report}");
        assert_eq!(report.checks.len(), 7);
    }

    fn failed_checks(report: &Report) -> Vec<&'static str> {
        report
            .checks
            .iter()
            .filter(|c| !c.passed)
            .map(|c| c.name)
            .collect()
    }

    #[test]
    fn every_single_entry_corruption_fails() {
        let standard = SBox::standard();
        for index in 0..=255u8 {
            let value = standard.forward(index) ^ 0x01;
            let bad: &'static SBox = Box::leak(Box::new(standard.with_forward_entry(index, value)));
            let report = run_with_sbox(bad, &quick());
            let failed = failed_checks(&report);
            assert!(failed.contains(&"sbox-bijective"), "entry {index:#x}");
            assert!(failed.contains(&"sbox-reference"), "entry {index:#x}");
        }
    }

    #[test]
    fn corrupted_entry_used_by_kat_fails_the_kat() {
        // 0x00 is hit in the first round of the example vector (pt ^ key = 0x00 at byte 0)
        let standard = SBox::standard();
        let bad: &'static SBox = Box::leak(Box::new(standard.with_forward_entry(0x00, 0x00)));
        let failed = failed_checks(&run_with_sbox(bad, &quick()));
        assert!(failed.contains(&"aes128-example-vector"), "{failed:?}");
    }

    #[test]
    fn generated_sbox_matches_reference() {
        assert_eq!(SBox::standard().forward_table(), &REFERENCE_SBOX);
    }

    #[test]
    fn throughput_is_reported() {
        let report = run(&Options {
            throughput_bytes: 1 << 20,
        });
        assert!(report.throughput_mbps.unwrap() > 0.0);
        assert!(report.to_string().contains("throughput"));
    }
}
