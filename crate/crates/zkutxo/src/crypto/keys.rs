//! Hash-based key derivation and the grabber-key binding.
//!
//! The key map is a one-way hash standing in for an elliptic-curve keypair;
//! it is circuit-friendly and sufficient at desk scale, and swapping in a
//! real curve is a backend change behind these signatures.
//!
//! The grabber-key pair models the contract's "cipher the nonce with the
//! secret key, check by decrypting with the public key" rule. An
//! sk-encrypts/pk-decrypts primitive is signature-like rather than a cipher,
//! so the binding here is a keystream derived from the public key: creation
//! takes the secret key (and derives the public half), recovery takes the
//! public key directly.

use crate::crypto::{domain, hash_tagged};
use crate::types::{Account, GrabberKey, PublicKey, SecretKey, U256};

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum KeyError {
    #[error("secret key must be nonzero")]
    ZeroKey,
    #[error("key does not match the sealed recipient")]
    WrongKey,
}

/// One-way map from a secret key to its public key.
pub fn derive_public_key(sk: &SecretKey) -> Result<PublicKey, KeyError> {
    if sk.0.is_zero() {
        return Err(KeyError::ZeroKey);
    }
    let d = hash_tagged(domain::DS_PUBLIC_KEY, &[&sk.0.to_big_endian()]);
    Ok(PublicKey(d.0))
}

/// Account identifier: the plain hash of the public key.
pub fn get_account(sk: &SecretKey) -> Result<Account, KeyError> {
    let pk = derive_public_key(sk)?;
    Ok(account_of(&pk))
}

/// Account of an already-derived public key.
pub fn account_of(pk: &PublicKey) -> Account {
    Account(crate::crypto::hash256(&pk.0).0)
}

fn grabber_stream(pk: &PublicKey) -> U256 {
    let d = hash_tagged(domain::DS_GRABBER_KEY, &[&pk.0]);
    U256::from_big_endian(&d.0)
}

/// Binds the contract's grabber nonce to the owner's key material.
pub fn create_grabber_key(sk: &SecretKey, nonce_g: U256) -> Result<GrabberKey, KeyError> {
    let pk = derive_public_key(sk)?;
    Ok(GrabberKey(nonce_g ^ grabber_stream(&pk)))
}

/// Recovers the nonce sealed into a grabber key. Mismatched keys yield
/// garbage; the caller compares against the expected nonce.
pub fn verify_binding(pk: &PublicKey, gk: &GrabberKey) -> U256 {
    gk.0 ^ grabber_stream(pk)
}
