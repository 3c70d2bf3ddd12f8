//! Field-value encryption: PKCS#7, CBC with a fresh IV, and a CBC-MAC tag
//! over `iv || ct` under a separate key (encrypt-then-MAC).

use base64::engine::general_purpose::STANDARD;
use base64::Engine as _;
use rand::{CryptoRng, RngCore};
use thiserror::Error;

use crate::aes::{Block128, KeySchedule, BLOCK_LEN};
use crate::keys::TenantKeySet;

/// Largest plaintext accepted for a single field.
pub const MAX_FIELD_LEN: usize = 65_536;

/// Fixed overhead of a serialized value: IV plus tag.
pub const VALUE_OVERHEAD: usize = 2 * BLOCK_LEN;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CodecError {
    #[error("field is {len} bytes, limit is {MAX_FIELD_LEN}")]
    FieldTooLarge { len: usize },
    #[error("invalid PKCS#7 padding")]
    Padding,
    #[error("authentication tag mismatch")]
    Auth,
    #[error("malformed cipher value: {0}")]
    Malformed(String),
}

pub fn pad(data: &[u8]) -> Vec<u8> {
    let n = BLOCK_LEN - data.len() % BLOCK_LEN;
    let mut out = Vec::with_capacity(data.len() + n);
    out.extend_from_slice(data);
    out.resize(data.len() + n, n as u8);
    out
}

pub fn unpad(data: &[u8]) -> Result<&[u8], CodecError> {
    if data.is_empty() || !data.len().is_multiple_of(BLOCK_LEN) {
        return Err(CodecError::Padding);
    }
    let n = *data.last().unwrap() as usize;
    if n == 0 || n > BLOCK_LEN {
        return Err(CodecError::Padding);
    }
    let (body, padding) = data.split_at(data.len() - n);
    if padding.iter().any(|&b| b as usize != n) {
        return Err(CodecError::Padding);
    }
    Ok(body)
}

fn xor_into(dst: &mut Block128, src: &[u8]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d ^= s;
    }
}

/// CBC encryption of already-padded input.
pub fn cbc_encrypt(schedule: &KeySchedule, iv: &Block128, padded: &[u8]) -> Vec<u8> {
    assert_eq!(
        padded.len() % BLOCK_LEN,
        0,
        "CBC input must be block aligned"
    );
    let mut out = Vec::with_capacity(padded.len());
    let mut chain = *iv;
    for chunk in padded.chunks_exact(BLOCK_LEN) {
        xor_into(&mut chain, chunk);
        chain = schedule.encrypt_block(&chain);
        out.extend_from_slice(&chain);
    }
    out
}

pub fn cbc_decrypt(schedule: &KeySchedule, iv: &Block128, ciphertext: &[u8]) -> Vec<u8> {
    assert_eq!(
        ciphertext.len() % BLOCK_LEN,
        0,
        "CBC input must be block aligned"
    );
    let mut out = Vec::with_capacity(ciphertext.len());
    let mut prev = *iv;
    for chunk in ciphertext.chunks_exact(BLOCK_LEN) {
        let block: Block128 = chunk.try_into().unwrap();
        let mut plain = schedule.decrypt_block(&block);
        xor_into(&mut plain, &prev);
        out.extend_from_slice(&plain);
        prev = block;
    }
    out
}

/// CBC-MAC with a zero IV: the last ciphertext block. Input must be block aligned.
pub fn cbc_mac(schedule: &KeySchedule, data: &[u8]) -> Block128 {
    assert_eq!(
        data.len() % BLOCK_LEN,
        0,
        "CBC-MAC input must be block aligned"
    );
    let mut chain = [0u8; BLOCK_LEN];
    for chunk in data.chunks_exact(BLOCK_LEN) {
        xor_into(&mut chain, chunk);
        chain = schedule.encrypt_block(&chain);
    }
    chain
}

fn tag_for(schedule: &KeySchedule, iv: &Block128, ct: &[u8]) -> Block128 {
    let mut authenticated = Vec::with_capacity(BLOCK_LEN + ct.len());
    authenticated.extend_from_slice(iv);
    authenticated.extend_from_slice(ct);
    cbc_mac(schedule, &authenticated)
}

fn tags_equal(a: &Block128, b: &Block128) -> bool {
    a.iter().zip(b).fold(0u8, |acc, (x, y)| acc | (x ^ y)) == 0
}

/// An encrypted field value: `iv || ct || tag`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CipherValue {
    iv: Block128,
    ct: Vec<u8>,
    tag: Block128,
}

impl CipherValue {
    pub fn iv(&self) -> &Block128 {
        &self.iv
    }

    pub fn ciphertext(&self) -> &[u8] {
        &self.ct
    }

    pub fn tag(&self) -> &Block128 {
        &self.tag
    }

    pub fn serialized_len(&self) -> usize {
        VALUE_OVERHEAD + self.ct.len()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.serialized_len());
        out.extend_from_slice(&self.iv);
        out.extend_from_slice(&self.ct);
        out.extend_from_slice(&self.tag);
        out
    }

    /// Parses `iv || ct || tag`, checking only the structure.
    pub fn from_bytes(bytes: &[u8]) -> Result<CipherValue, CodecError> {
        let len = bytes.len();
        if len < VALUE_OVERHEAD + BLOCK_LEN || !(len - VALUE_OVERHEAD).is_multiple_of(BLOCK_LEN) {
            return Err(CodecError::Malformed(format!("invalid length {len}")));
        }
        if len - VALUE_OVERHEAD > pad_len(MAX_FIELD_LEN) {
            return Err(CodecError::Malformed(format!(
                "ciphertext too long ({len} bytes)"
            )));
        }
        let iv = bytes[..BLOCK_LEN].try_into().unwrap();
        let tag = bytes[len - BLOCK_LEN..].try_into().unwrap();
        let ct = bytes[BLOCK_LEN..len - BLOCK_LEN].to_vec();
        Ok(CipherValue { iv, ct, tag })
    }

    pub fn to_base64(&self) -> String {
        STANDARD.encode(self.to_bytes())
    }

    pub fn from_base64(text: &str) -> Result<CipherValue, CodecError> {
        let bytes = STANDARD
            .decode(text)
            .map_err(|e| CodecError::Malformed(e.to_string()))?;
        CipherValue::from_bytes(&bytes)
    }
}

fn pad_len(n: usize) -> usize {
    (n / BLOCK_LEN + 1) * BLOCK_LEN
}

/// Encrypts one plaintext with a fresh random IV.
pub fn encrypt_value<R: RngCore + CryptoRng>(
    plaintext: &[u8],
    keys: &TenantKeySet,
    rng: &mut R,
) -> Result<CipherValue, CodecError> {
    let mut iv = [0u8; BLOCK_LEN];
    rng.fill_bytes(&mut iv);
    encrypt_value_with_iv(plaintext, keys, iv)
}

/// Encryption with a caller-chosen IV. The IV must never repeat under one key.
pub fn encrypt_value_with_iv(
    plaintext: &[u8],
    keys: &TenantKeySet,
    iv: Block128,
) -> Result<CipherValue, CodecError> {
    if plaintext.len() > MAX_FIELD_LEN {
        return Err(CodecError::FieldTooLarge {
            len: plaintext.len(),
        });
    }
    let ct = cbc_encrypt(keys.enc_schedule(), &iv, &pad(plaintext));
    let tag = tag_for(keys.mac_schedule(), &iv, &ct);
    Ok(CipherValue { iv, ct, tag })
}

/// Verifies the tag, then decrypts. No decryption happens on a bad tag.
pub fn decrypt_value(value: &CipherValue, keys: &TenantKeySet) -> Result<Vec<u8>, CodecError> {
    let expected = tag_for(keys.mac_schedule(), &value.iv, &value.ct);
    if !tags_equal(&expected, &value.tag) {
        return Err(CodecError::Auth);
    }
    let padded = cbc_decrypt(keys.enc_schedule(), &value.iv, &value.ct);
    unpad(&padded).map(<[u8]>::to_vec)
}
