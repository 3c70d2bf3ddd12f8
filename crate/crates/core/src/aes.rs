//! AES-128 block cipher.
//!
//! The S-box is computed from GF(2^8) inversion followed by the affine map and
//! checked against known entries the first time it is requested. The cipher
//! operates on a column-major 4x4 [`State`] so that published vectors can be
//! compared byte for byte.
//!
//! No attempt is made at constant-time execution.

use std::fmt;
use std::sync::OnceLock;

use thiserror::Error;

/// Block size in bytes.
pub const BLOCK_LEN: usize = 16;

/// Key size in bytes.
pub const KEY_LEN: usize = 16;

/// Number of rounds for a 128-bit key.
pub const ROUNDS: usize = 10;

/// A 16-byte cipher block.
pub type Block128 = [u8; BLOCK_LEN];

/// Round constants for the key schedule; index 0 is unused.
const RCON: [u8; 11] = [
    0x00, 0x01, 0x02, 0x04, 0x08, 0x10, 0x20, 0x40, 0x80, 0x1b, 0x36,
];

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AesError {
    #[error("AES-128 key must be 16 bytes, got {0}")]
    InvalidKeyLength(usize),
    #[error("substitution table is not a permutation of 0..=255")]
    NotPermutation,
}

/// Multiplication by `x` in GF(2^8) modulo x^8 + x^4 + x^3 + x + 1.
#[inline]
fn xtime(a: u8) -> u8 {
    (a << 1) ^ (if a & 0x80 != 0 { 0x1b } else { 0 })
}

/// Multiplies two elements of GF(2^8) modulo 0x11B.
pub fn gf_mul(mut a: u8, mut b: u8) -> u8 {
    let mut product = 0u8;
    while b != 0 {
        if b & 1 != 0 {
            product ^= a;
        }
        a = xtime(a);
        b >>= 1;
    }
    product
}

/// Multiplicative inverse in GF(2^8), with 0 mapped to 0.
///
/// Computed as a^254, which equals a^-1 for every non-zero element.
pub fn gf_inv(a: u8) -> u8 {
    let mut result = 1u8;
    let mut base = a;
    let mut exp = 254u8;
    while exp != 0 {
        if exp & 1 != 0 {
            result = gf_mul(result, base);
        }
        base = gf_mul(base, base);
        exp >>= 1;
    }
    if a == 0 {
        0
    } else {
        result
    }
}

fn affine(b: u8) -> u8 {
    b ^ b.rotate_left(1) ^ b.rotate_left(2) ^ b.rotate_left(3) ^ b.rotate_left(4) ^ 0x63
}

/// Forward and inverse byte substitution tables.
#[derive(Clone, PartialEq, Eq)]
pub struct SBox {
    forward: [u8; 256],
    inverse: [u8; 256],
}

impl SBox {
    /// Builds the AES S-box from field inversion and the affine transform.
    pub fn generate() -> SBox {
        let mut forward = [0u8; 256];
        for (i, entry) in forward.iter_mut().enumerate() {
            *entry = affine(gf_inv(i as u8));
        }
        SBox::from_forward(forward).expect("generated S-box is a permutation")
    }

    /// Builds a table pair from a forward table, deriving the inverse.
    pub fn from_forward(forward: [u8; 256]) -> Result<SBox, AesError> {
        let mut inverse = [0u8; 256];
        let mut seen = [false; 256];
        for (i, &v) in forward.iter().enumerate() {
            if seen[v as usize] {
                return Err(AesError::NotPermutation);
            }
            seen[v as usize] = true;
            inverse[v as usize] = i as u8;
        }
        Ok(SBox { forward, inverse })
    }

    /// The process-wide standard S-box.
    ///
    /// Panics on first use if the generated table disagrees with the known
    /// entries 0x00 -> 0x63 and 0x53 -> 0xED.
    pub fn standard() -> &'static SBox {
        static TABLE: OnceLock<SBox> = OnceLock::new();
        TABLE.get_or_init(|| {
            let sbox = SBox::generate();
            assert_eq!(sbox.forward[0x00], 0x63, "S-box self-check failed at 0x00");
            assert_eq!(sbox.forward[0x53], 0xed, "S-box self-check failed at 0x53");
            sbox
        })
    }

    /// Returns a copy with one forward entry overwritten and the inverse
    /// table left as it was. Only useful for fault-injecting the self-test.
    pub fn with_forward_entry(&self, index: u8, value: u8) -> SBox {
        let mut out = self.clone();
        out.forward[index as usize] = value;
        out
    }

    #[inline]
    pub fn forward(&self, b: u8) -> u8 {
        self.forward[b as usize]
    }

    #[inline]
    pub fn inverse(&self, b: u8) -> u8 {
        self.inverse[b as usize]
    }

    pub fn forward_table(&self) -> &[u8; 256] {
        &self.forward
    }

    pub fn inverse_table(&self) -> &[u8; 256] {
        &self.inverse
    }

    /// True when the forward table is a permutation and the inverse table
    /// undoes it for every byte.
    pub fn is_consistent(&self) -> bool {
        let mut seen = [false; 256];
        for &v in &self.forward {
            if std::mem::replace(&mut seen[v as usize], true) {
                return false;
            }
        }
        (0..=255u8).all(|b| self.inverse(self.forward(b)) == b)
    }
}

impl fmt::Debug for SBox {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SBox")
            .field("forward[0]", &self.forward[0])
            .finish_non_exhaustive()
    }
}

/// The 4x4 AES state. Byte `i` of a block sits at row `i % 4`, column `i / 4`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct State([u8; BLOCK_LEN]);

impl State {
    pub fn from_block(block: Block128) -> State {
        State(block)
    }

    pub fn to_block(self) -> Block128 {
        self.0
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.0[col * 4 + row]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: u8) {
        self.0[col * 4 + row] = value;
    }

    pub fn row(&self, row: usize) -> [u8; 4] {
        [
            self.get(row, 0),
            self.get(row, 1),
            self.get(row, 2),
            self.get(row, 3),
        ]
    }

    pub fn column(&self, col: usize) -> [u8; 4] {
        let mut out = [0u8; 4];
        out.copy_from_slice(&self.0[col * 4..col * 4 + 4]);
        out
    }

    pub fn set_column(&mut self, col: usize, column: [u8; 4]) {
        self.0[col * 4..col * 4 + 4].copy_from_slice(&column);
    }

    pub fn sub_bytes(&mut self, sbox: &SBox) {
        for b in self.0.iter_mut() {
            *b = sbox.forward(*b);
        }
    }

    pub fn inv_sub_bytes(&mut self, sbox: &SBox) {
        for b in self.0.iter_mut() {
            *b = sbox.inverse(*b);
        }
    }

    /// Rotates row `r` left by `r` positions.
    pub fn shift_rows(&mut self) {
        let src = *self;
        for row in 1..4 {
            for col in 0..4 {
                self.set(row, col, src.get(row, (col + row) % 4));
            }
        }
    }

    pub fn inv_shift_rows(&mut self) {
        let src = *self;
        for row in 1..4 {
            for col in 0..4 {
                self.set(row, (col + row) % 4, src.get(row, col));
            }
        }
    }

    pub fn mix_columns(&mut self) {
        for col in 0..4 {
            let c = self.column(col);
            self.set_column(col, mix_column(c));
        }
    }

    pub fn inv_mix_columns(&mut self) {
        for col in 0..4 {
            let c = self.column(col);
            self.set_column(col, inv_mix_column(c));
        }
    }

    pub fn add_round_key(&mut self, round_key: &[u8; BLOCK_LEN]) {
        for (b, k) in self.0.iter_mut().zip(round_key) {
            *b ^= k;
        }
    }
}

/// Multiplies one column by the circulant matrix (02 03 01 01).
pub fn mix_column(c: [u8; 4]) -> [u8; 4] {
    let all = c[0] ^ c[1] ^ c[2] ^ c[3];
    // 2a + 3b + c + d = a ^ (a^b)*2 ^ (a^b^c^d) with the shared sum factored out
    [
        c[0] ^ all ^ xtime(c[0] ^ c[1]),
        c[1] ^ all ^ xtime(c[1] ^ c[2]),
        c[2] ^ all ^ xtime(c[2] ^ c[3]),
        c[3] ^ all ^ xtime(c[3] ^ c[0]),
    ]
}

/// Multiplies one column by the inverse matrix (0E 0B 0D 09).
pub fn inv_mix_column(c: [u8; 4]) -> [u8; 4] {
    let mut out = [0u8; 4];
    for (i, o) in out.iter_mut().enumerate() {
        *o = gf_mul(c[i], 0x0e)
            ^ gf_mul(c[(i + 1) % 4], 0x0b)
            ^ gf_mul(c[(i + 2) % 4], 0x0d)
            ^ gf_mul(c[(i + 3) % 4], 0x09);
    }
    out
}

/// A 128-bit cipher key.
#[derive(Clone, PartialEq, Eq)]
pub struct Key128([u8; KEY_LEN]);

impl Key128 {
    pub fn new(bytes: [u8; KEY_LEN]) -> Key128 {
        Key128(bytes)
    }

    pub fn from_slice(bytes: &[u8]) -> Result<Key128, AesError> {
        let arr: [u8; KEY_LEN] = bytes
            .try_into()
            .map_err(|_| AesError::InvalidKeyLength(bytes.len()))?;
        Ok(Key128(arr))
    }

    pub fn as_bytes(&self) -> &[u8; KEY_LEN] {
        &self.0
    }
}

impl fmt::Debug for Key128 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("Key128(..)")
    }
}

impl From<[u8; KEY_LEN]> for Key128 {
    fn from(bytes: [u8; KEY_LEN]) -> Self {
        Key128(bytes)
    }
}

/// Expanded round keys for one AES-128 key. Encrypts and decrypts blocks.
#[derive(Clone)]
pub struct KeySchedule {
    round_keys: [[u8; BLOCK_LEN]; ROUNDS + 1],
    sbox: &'static SBox,
}

impl KeySchedule {
    pub fn expand(key: &Key128) -> KeySchedule {
        KeySchedule::expand_with(key, SBox::standard())
    }

    /// Key expansion with an explicit substitution table. The table is also
    /// used by [`encrypt_block`](Self::encrypt_block) and
    /// [`decrypt_block`](Self::decrypt_block).
    pub fn expand_with(key: &Key128, sbox: &'static SBox) -> KeySchedule {
        let mut words = [0u32; 4 * (ROUNDS + 1)];
        for (i, chunk) in key.0.chunks_exact(4).enumerate() {
            words[i] = u32::from_be_bytes(chunk.try_into().unwrap());
        }
        for i in 4..words.len() {
            let mut t = words[i - 1];
            if i % 4 == 0 {
                t = sub_word(t.rotate_left(8), sbox) ^ (u32::from(RCON[i / 4]) << 24);
            }
            words[i] = words[i - 4] ^ t;
        }

        let mut round_keys = [[0u8; BLOCK_LEN]; ROUNDS + 1];
        for (round, rk) in round_keys.iter_mut().enumerate() {
            for j in 0..4 {
                rk[j * 4..j * 4 + 4].copy_from_slice(&words[round * 4 + j].to_be_bytes());
            }
        }
        KeySchedule { round_keys, sbox }
    }

    pub fn rounds(&self) -> usize {
        ROUNDS
    }

    pub fn round_key(&self, round: usize) -> &[u8; BLOCK_LEN] {
        &self.round_keys[round]
    }

    pub fn round_keys(&self) -> &[[u8; BLOCK_LEN]; ROUNDS + 1] {
        &self.round_keys
    }

    /// Word `i` (0..44) of the expanded key, big-endian.
    pub fn word(&self, i: usize) -> u32 {
        let rk = &self.round_keys[i / 4];
        let j = (i % 4) * 4;
        u32::from_be_bytes([rk[j], rk[j + 1], rk[j + 2], rk[j + 3]])
    }

    /// All 176 bytes of expanded key material.
    pub fn to_bytes(&self) -> Vec<u8> {
        self.round_keys.iter().flatten().copied().collect()
    }

    pub fn encrypt_block(&self, block: &Block128) -> Block128 {
        let mut state = State::from_block(*block);
        state.add_round_key(&self.round_keys[0]);
        for round in 1..ROUNDS {
            state.sub_bytes(self.sbox);
            state.shift_rows();
            state.mix_columns();
            state.add_round_key(&self.round_keys[round]);
        }
        state.sub_bytes(self.sbox);
        state.shift_rows();
        state.add_round_key(&self.round_keys[ROUNDS]);
        state.to_block()
    }

    pub fn decrypt_block(&self, block: &Block128) -> Block128 {
        let mut state = State::from_block(*block);
        state.add_round_key(&self.round_keys[ROUNDS]);
        state.inv_shift_rows();
        state.inv_sub_bytes(self.sbox);
        for round in (1..ROUNDS).rev() {
            state.add_round_key(&self.round_keys[round]);
            state.inv_mix_columns();
            state.inv_shift_rows();
            state.inv_sub_bytes(self.sbox);
        }
        state.add_round_key(&self.round_keys[0]);
        state.to_block()
    }
}

impl fmt::Debug for KeySchedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("KeySchedule")
            .field("rounds", &ROUNDS)
            .finish_non_exhaustive()
    }
}

fn sub_word(w: u32, sbox: &SBox) -> u32 {
    u32::from_be_bytes(w.to_be_bytes().map(|b| sbox.forward(b)))
}

pub fn expand_key(key: &Key128) -> KeySchedule {
    KeySchedule::expand(key)
}

pub fn encrypt_block(block: &Block128, schedule: &KeySchedule) -> Block128 {
    schedule.encrypt_block(block)
}

pub fn decrypt_block(block: &Block128, schedule: &KeySchedule) -> Block128 {
    schedule.decrypt_block(block)
}
