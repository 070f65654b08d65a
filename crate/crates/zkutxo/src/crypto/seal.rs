//! Deterministic sealed box used for audit data.
//!
//! The circuits compare `pub.audit_d` against a fresh encryption of the audit
//! payload, so sealing must be a pure function of `(pk, data)`: the keystream
//! nonce is itself derived from the payload. This trades semantic security
//! for the bit-exact equality check the circuit needs, which is the right
//! trade at desk scale.

use crate::crypto::{derive_public_key, domain, hash_tagged, KeyError};
use crate::types::{Digest, PublicKey, SecretKey};

/// Ciphertext addressed to one public key.
#[derive(Clone, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct SealedBox {
    /// Hash of the recipient public key; lets the opener detect a key
    /// mismatch without attempting decryption.
    pub recipient_tag: Digest,
    /// Deterministic keystream nonce derived from `(pk, data)`.
    pub nonce: Digest,
    pub ciphertext: Vec<u8>,
}

fn keystream(pk: &PublicKey, nonce: &Digest, len: usize) -> Vec<u8> {
    let mut out = Vec::with_capacity(len);
    let mut counter = 0u64;
    while out.len() < len {
        let block = hash_tagged(
            domain::DS_SEAL_KEY,
            &[&pk.0, &nonce.0, &counter.to_be_bytes()],
        );
        out.extend_from_slice(&block.0);
        counter += 1;
    }
    out.truncate(len);
    out
}

fn recipient_tag(pk: &PublicKey) -> Digest {
    hash_tagged(domain::DS_SEAL_TAG, &[&pk.0])
}

/// Seals `data` to `pk`. Deterministic: the same `(pk, data)` always yields
/// an identical box.
pub fn seal_to_key(pk: &PublicKey, data: &[u8]) -> SealedBox {
    let nonce = hash_tagged(domain::DS_SEAL_NONCE, &[&pk.0, data]);
    let stream = keystream(pk, &nonce, data.len());
    let ciphertext = data.iter().zip(stream).map(|(d, s)| d ^ s).collect();
    SealedBox {
        recipient_tag: recipient_tag(pk),
        nonce,
        ciphertext,
    }
}

/// Opens a box with the matching secret key.
pub fn open_with_key(sk: &SecretKey, sealed: &SealedBox) -> Result<Vec<u8>, KeyError> {
    let pk = derive_public_key(sk)?;
    if recipient_tag(&pk) != sealed.recipient_tag {
        return Err(KeyError::WrongKey);
    }
    let stream = keystream(&pk, &sealed.nonce, sealed.ciphertext.len());
    Ok(sealed
        .ciphertext
        .iter()
        .zip(stream)
        .map(|(c, s)| c ^ s)
        .collect())
}

impl SealedBox {
    /// Fixed byte layout: tag || nonce || len || ciphertext. This is the form
    /// the circuits compare and the ledger publishes as `audit_d`.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(72 + self.ciphertext.len());
        out.extend_from_slice(&self.recipient_tag.0);
        out.extend_from_slice(&self.nonce.0);
        out.extend_from_slice(&(self.ciphertext.len() as u64).to_be_bytes());
        out.extend_from_slice(&self.ciphertext);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<SealedBox, crate::enc::DecodeError> {
        let mut dec = crate::enc::Decoder::new(bytes);
        let recipient_tag = dec.take_digest()?;
        let nonce = dec.take_digest()?;
        let ciphertext = dec.take_bytes()?;
        dec.finish()?;
        Ok(SealedBox {
            recipient_tag,
            nonce,
            ciphertext,
        })
    }
}
