//! Canonical byte encoding for everything that gets hashed.
//!
//! Every hashed tuple is encoded as fixed-width 32-byte big-endian fields in
//! declaration order. Variable-length byte strings are length-prefixed with a
//! big-endian `u64`, lists are count-prefixed the same way, and optional
//! fields carry a one-byte presence flag. Two values encode to the same bytes
//! iff they are equal, which is what makes witness hashing and proof binding
//! well defined.

use crate::types::{
    u256_be, Account, Address, Digest, GrabberKey, HexBytes, PublicKey, SecretKey, U256,
};

/// Accumulates the canonical encoding of a value.
#[derive(Default)]
pub struct Encoder {
    buf: Vec<u8>,
}

impl Encoder {
    pub fn new() -> Self {
        Encoder { buf: Vec::new() }
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.buf
    }

    pub fn put_u256(&mut self, v: &U256) {
        self.buf.extend_from_slice(&u256_be(v));
    }

    pub fn put_digest(&mut self, d: &Digest) {
        self.buf.extend_from_slice(&d.0);
    }

    pub fn put_account(&mut self, a: &Account) {
        self.buf.extend_from_slice(&a.0);
    }

    pub fn put_address(&mut self, a: &Address) {
        self.buf.extend_from_slice(&a.0);
    }

    pub fn put_secret_key(&mut self, sk: &SecretKey) {
        self.put_u256(&sk.0);
    }

    pub fn put_public_key(&mut self, pk: &PublicKey) {
        self.buf.extend_from_slice(&pk.0);
    }

    pub fn put_grabber_key(&mut self, gk: &GrabberKey) {
        self.put_u256(&gk.0);
    }

    pub fn put_bool(&mut self, b: bool) {
        self.buf.push(b as u8);
    }

    pub fn put_u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_be_bytes());
    }

    /// Length-prefixed raw bytes.
    pub fn put_bytes(&mut self, data: &[u8]) {
        self.put_u64(data.len() as u64);
        self.buf.extend_from_slice(data);
    }

    pub fn put_opt<T: Encode>(&mut self, v: &Option<T>) {
        match v {
            None => self.put_bool(false),
            Some(inner) => {
                self.put_bool(true);
                inner.encode(self);
            }
        }
    }

    pub fn put_opt_bytes(&mut self, v: &Option<Vec<u8>>) {
        match v {
            None => self.put_bool(false),
            Some(data) => {
                self.put_bool(true);
                self.put_bytes(data);
            }
        }
    }

    pub fn put_list<T: Encode>(&mut self, items: &[T]) {
        self.put_u64(items.len() as u64);
        for item in items {
            item.encode(self);
        }
    }
}

/// Canonical encoding of a value into an [`Encoder`].
pub trait Encode {
    fn encode(&self, enc: &mut Encoder);
}

impl Encode for U256 {
    fn encode(&self, enc: &mut Encoder) {
        enc.put_u256(self);
    }
}

impl Encode for Digest {
    fn encode(&self, enc: &mut Encoder) {
        enc.put_digest(self);
    }
}

impl Encode for Account {
    fn encode(&self, enc: &mut Encoder) {
        enc.put_account(self);
    }
}

impl Encode for Address {
    fn encode(&self, enc: &mut Encoder) {
        enc.put_address(self);
    }
}

impl Encode for SecretKey {
    fn encode(&self, enc: &mut Encoder) {
        enc.put_secret_key(self);
    }
}

impl Encode for PublicKey {
    fn encode(&self, enc: &mut Encoder) {
        enc.put_public_key(self);
    }
}

impl Encode for GrabberKey {
    fn encode(&self, enc: &mut Encoder) {
        enc.put_grabber_key(self);
    }
}

impl Encode for HexBytes {
    fn encode(&self, enc: &mut Encoder) {
        enc.put_bytes(&self.0);
    }
}

/// Canonical byte string of any encodable value.
pub fn canonical<T: Encode>(v: &T) -> Vec<u8> {
    let mut enc = Encoder::new();
    v.encode(&mut enc);
    enc.into_bytes()
}

/// Errors raised while decoding canonical bytes.
#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum DecodeError {
    #[error("unexpected end of input at offset {0}")]
    Truncated(usize),
    #[error("trailing bytes after decode: {0} left")]
    TrailingBytes(usize),
    #[error("invalid flag byte {0}")]
    InvalidFlag(u8),
}

/// Reader over canonical bytes; used where an encoding must be recovered
/// (audit payloads, proof deserialization).
pub struct Decoder<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Decoder<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        Decoder { buf, pos: 0 }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], DecodeError> {
        if self.pos + n > self.buf.len() {
            return Err(DecodeError::Truncated(self.pos));
        }
        let out = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    pub fn take_u256(&mut self) -> Result<U256, DecodeError> {
        Ok(U256::from_big_endian(self.take(32)?))
    }

    pub fn take_digest(&mut self) -> Result<Digest, DecodeError> {
        let raw = self.take(32)?;
        let mut out = [0u8; 32];
        out.copy_from_slice(raw);
        Ok(Digest(out))
    }

    pub fn take_account(&mut self) -> Result<Account, DecodeError> {
        Ok(Account(self.take_digest()?.0))
    }

    pub fn take_bool(&mut self) -> Result<bool, DecodeError> {
        match self.take(1)?[0] {
            0 => Ok(false),
            1 => Ok(true),
            b => Err(DecodeError::InvalidFlag(b)),
        }
    }

    pub fn take_u64(&mut self) -> Result<u64, DecodeError> {
        let raw = self.take(8)?;
        let mut out = [0u8; 8];
        out.copy_from_slice(raw);
        Ok(u64::from_be_bytes(out))
    }

    pub fn take_bytes(&mut self) -> Result<Vec<u8>, DecodeError> {
        let len = self.take_u64()? as usize;
        Ok(self.take(len)?.to_vec())
    }

    pub fn finish(self) -> Result<(), DecodeError> {
        if self.pos != self.buf.len() {
            return Err(DecodeError::TrailingBytes(self.buf.len() - self.pos));
        }
        Ok(())
    }
}
